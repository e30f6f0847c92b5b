#include "egolane/moo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "egolane/errors.hpp"
#include "egolane/harness.hpp"

namespace egolane {

namespace {

void require_outcomes(std::span<const Outcome> outcomes, const char* name) {
    if (outcomes.empty()) {
        throw DomainError(std::string(name) + ": empty outcome set");
    }
}

bool lexicographic_less(const Objectives& a, const Objectives& b) {
    return a(0) != b(0) ? a(0) < b(0) : a(1) < b(1);
}

// Sorted sweep over points already known to lie inside the reference box.
double sweep(std::vector<Objectives> points, const Objectives& reference) {
    std::sort(points.begin(), points.end(), lexicographic_less);
    double area = 0.0;
    double ceiling = reference(1);
    for (const auto& p : points) {
        if (p(1) < ceiling) {
            area += (reference(0) - p(0)) * (ceiling - p(1));
            ceiling = p(1);
        }
    }
    return area;
}

double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

} // namespace

double cost_accuracy(std::span<const Outcome> outcomes) {
    require_outcomes(outcomes, "cost_accuracy");
    int predicted = 0;
    int wrong = 0;
    for (const auto& o : outcomes) {
        if (o.predicted) {
            ++predicted;
            wrong += o.predicted != o.truth ? 1 : 0;
        }
    }
    return predicted > 0 ? static_cast<double>(wrong) / predicted : 0.0;
}

double cost_earliness(std::span<const Outcome> outcomes) {
    require_outcomes(outcomes, "cost_earliness");
    double sum = 0.0;
    for (const auto& o : outcomes) {
        sum += o.predicted && o.length > 0 ? static_cast<double>(*o.t_star) / o.length : 1.0;
    }
    return sum / static_cast<double>(outcomes.size());
}

double cost_availability(std::span<const Outcome> outcomes) {
    require_outcomes(outcomes, "cost_availability");
    const auto missing = std::count_if(outcomes.begin(), outcomes.end(), [](const Outcome& o) { return !o.predicted; });
    return static_cast<double>(missing) / static_cast<double>(outcomes.size());
}

std::vector<std::vector<std::size_t>> non_dominated_sort(std::span<const Objectives> points) {
    const std::size_t n = points.size();
    std::vector<std::vector<std::size_t>> dominated_by_me(n);
    std::vector<int> domination_count(n, 0);
    std::vector<std::vector<std::size_t>> fronts(1);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) {
            if (dominates(points[p], points[q])) {
                dominated_by_me[p].push_back(q);
            } else if (dominates(points[q], points[p])) {
                ++domination_count[p];
            }
        }
        if (domination_count[p] == 0) {
            fronts[0].push_back(p);
        }
    }
    for (std::size_t i = 0; !fronts[i].empty(); ++i) {
        std::vector<std::size_t> next;
        for (auto p : fronts[i]) {
            for (auto q : dominated_by_me[p]) {
                if (--domination_count[q] == 0) {
                    next.push_back(q);
                }
            }
        }
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(next));
    }
    fronts.pop_back();
    return fronts;
}

std::vector<double> crowding_distance(std::span<const Objectives> points, std::span<const std::size_t> front) {
    const std::size_t m = front.size();
    std::vector<double> distance(m, 0.0);
    if (m <= 2) {
        std::fill(distance.begin(), distance.end(), std::numeric_limits<double>::infinity());
        return distance;
    }
    std::vector<std::size_t> order(m);
    for (Eigen::Index k = 0; k < 2; ++k) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return points[front[a]](k) < points[front[b]](k); });
        const double lo = points[front[order.front()]](k);
        const double hi = points[front[order.back()]](k);
        distance[order.front()] = std::numeric_limits<double>::infinity();
        distance[order.back()] = std::numeric_limits<double>::infinity();
        if (hi - lo <= 0.0) {
            continue;
        }
        for (std::size_t i = 1; i + 1 < m; ++i) {
            distance[order[i]] += (points[front[order[i + 1]]](k) - points[front[order[i - 1]]](k)) / (hi - lo);
        }
    }
    return distance;
}

double hypervolume(std::span<const Objectives> points, const Objectives& reference) {
    for (const auto& p : points) {
        if (!(p(0) >= 0.0 && p(1) >= 0.0 && p(0) <= reference(0) && p(1) <= reference(1))) {
            throw DomainError("hypervolume: point (" + std::to_string(p(0)) + ", " + std::to_string(p(1)) +
                              ") lies outside the reference box");
        }
    }
    return sweep({points.begin(), points.end()}, reference);
}

double dominated_hypervolume(std::span<const Objectives> points, const Objectives& reference) {
    std::vector<Objectives> inside;
    for (const auto& p : points) {
        if (p(0) <= reference(0) && p(1) <= reference(1)) {
            inside.push_back(p);
        }
    }
    return sweep(std::move(inside), reference);
}

std::size_t select_operating_point(const ParetoFront& front) {
    if (front.points.empty()) {
        throw PreconditionError("select_operating_point: empty front");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < front.points.size(); ++i) {
        const auto& a = front.points[i];
        const auto& b = front.points[best];
        const double sa = a.c_av + a.c_ac;
        const double sb = b.c_av + b.c_ac;
        if (sa < sb || (sa == sb && (a.c_ac < b.c_ac || (a.c_ac == b.c_ac && a.c_ea < b.c_ea)))) {
            best = i;
        }
    }
    return best;
}

void validate(const NsgaConfig& config) {
    if (config.population < 4 || config.population % 2 != 0) {
        throw ConfigError("population", "must be even and at least 4");
    }
    if (config.generations < 1) {
        throw ConfigError("generations", "must be at least 1");
    }
    if (!(config.lower < config.upper)) {
        throw ConfigError("bounds", "lower must be below upper");
    }
}

namespace {

class Nsga2 {
public:
    Nsga2(const NsgaConfig& config, int genes, const Objective& objective)
        : config_(config), genes_(genes), objective_(objective), rng_(config.seed),
          mutation_prob_(config.mutation_prob > 0.0 ? config.mutation_prob : 1.0 / genes) {}

    NsgaResult run() {
        NsgaResult result;
        std::vector<Individual> population;
        for (int i = 0; i < config_.population; ++i) {
            Individual ind;
            ind.genes.resize(genes_);
            for (int g = 0; g < genes_; ++g) {
                ind.genes(g) = config_.lower + (config_.upper - config_.lower) * uniform01(rng_);
            }
            population.push_back(evaluate(std::move(ind), result));
        }
        assign_rank_and_crowding(population);
        result.front_hypervolume.push_back(archive_hypervolume());

        for (int gen = 0; gen < config_.generations; ++gen) {
            std::vector<Individual> offspring;
            while (static_cast<int>(offspring.size()) < config_.population) {
                const auto& a = tournament(population);
                const auto& b = tournament(population);
                auto [c1, c2] = crossover(a.genes, b.genes);
                mutate(c1);
                mutate(c2);
                offspring.push_back(evaluate(Individual{std::move(c1)}, result));
                if (static_cast<int>(offspring.size()) < config_.population) {
                    offspring.push_back(evaluate(Individual{std::move(c2)}, result));
                }
            }
            population.insert(population.end(), std::make_move_iterator(offspring.begin()),
                              std::make_move_iterator(offspring.end()));
            population = survivors(std::move(population));
            result.front_hypervolume.push_back(archive_hypervolume());
        }

        result.population = std::move(population);
        result.front = archive_;
        return result;
    }

private:
    Individual evaluate(Individual ind, NsgaResult& result) {
        ind.objectives = objective_(ind.genes);
        ++result.evaluations;
        add_to_archive(ind);
        return ind;
    }

    void add_to_archive(const Individual& ind) {
        for (const auto& member : archive_) {
            if (dominates(member.objectives, ind.objectives) || member.objectives == ind.objectives) {
                return;
            }
        }
        std::erase_if(archive_, [&](const Individual& member) { return dominates(ind.objectives, member.objectives); });
        const auto pos = std::upper_bound(
            archive_.begin(), archive_.end(), ind,
            [](const Individual& a, const Individual& b) { return lexicographic_less(a.objectives, b.objectives); });
        archive_.insert(pos, ind);
    }

    double archive_hypervolume() const {
        std::vector<Objectives> points;
        for (const auto& member : archive_) {
            points.push_back(member.objectives);
        }
        return dominated_hypervolume(points);
    }

    static std::vector<Objectives> objectives_of(const std::vector<Individual>& population) {
        std::vector<Objectives> points;
        points.reserve(population.size());
        for (const auto& ind : population) {
            points.push_back(ind.objectives);
        }
        return points;
    }

    static void assign_rank_and_crowding(std::vector<Individual>& population) {
        const auto points = objectives_of(population);
        const auto fronts = non_dominated_sort(points);
        for (std::size_t r = 0; r < fronts.size(); ++r) {
            const auto distance = crowding_distance(points, fronts[r]);
            for (std::size_t i = 0; i < fronts[r].size(); ++i) {
                population[fronts[r][i]].rank = static_cast<int>(r);
                population[fronts[r][i]].crowding = distance[i];
            }
        }
    }

    const Individual& tournament(const std::vector<Individual>& population) {
        std::uniform_int_distribution<std::size_t> pick(0, population.size() - 1);
        const auto& a = population[pick(rng_)];
        const auto& b = population[pick(rng_)];
        if (a.rank != b.rank) {
            return a.rank < b.rank ? a : b;
        }
        if (a.crowding != b.crowding) {
            return a.crowding > b.crowding ? a : b;
        }
        return uniform01(rng_) < 0.5 ? a : b;
    }

    // Bounded simulated binary crossover.
    std::pair<Eigen::VectorXd, Eigen::VectorXd> crossover(const Eigen::VectorXd& p1, const Eigen::VectorXd& p2) {
        Eigen::VectorXd c1 = p1;
        Eigen::VectorXd c2 = p2;
        if (uniform01(rng_) > config_.crossover_prob) {
            return {c1, c2};
        }
        const double lo = config_.lower;
        const double hi = config_.upper;
        const double eta = config_.crossover_eta;
        for (int g = 0; g < genes_; ++g) {
            if (uniform01(rng_) > 0.5 || std::abs(p1(g) - p2(g)) <= 1e-14) {
                continue;
            }
            const double y1 = std::min(p1(g), p2(g));
            const double y2 = std::max(p1(g), p2(g));
            const double u = uniform01(rng_);
            auto spread = [&](double beta) {
                const double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
                return u <= 1.0 / alpha ? std::pow(u * alpha, 1.0 / (eta + 1.0))
                                        : std::pow(1.0 / (2.0 - u * alpha), 1.0 / (eta + 1.0));
            };
            const double betaq1 = spread(1.0 + 2.0 * (y1 - lo) / (y2 - y1));
            const double betaq2 = spread(1.0 + 2.0 * (hi - y2) / (y2 - y1));
            double v1 = std::clamp(0.5 * ((y1 + y2) - betaq1 * (y2 - y1)), lo, hi);
            double v2 = std::clamp(0.5 * ((y1 + y2) + betaq2 * (y2 - y1)), lo, hi);
            if (uniform01(rng_) < 0.5) {
                std::swap(v1, v2);
            }
            c1(g) = v1;
            c2(g) = v2;
        }
        return {c1, c2};
    }

    // Bounded polynomial mutation.
    void mutate(Eigen::VectorXd& x) {
        const double lo = config_.lower;
        const double hi = config_.upper;
        const double eta = config_.mutation_eta;
        for (int g = 0; g < genes_; ++g) {
            if (uniform01(rng_) >= mutation_prob_) {
                continue;
            }
            const double y = x(g);
            const double d1 = (y - lo) / (hi - lo);
            const double d2 = (hi - y) / (hi - lo);
            const double u = uniform01(rng_);
            const double power = 1.0 / (eta + 1.0);
            double dq = 0.0;
            if (u <= 0.5) {
                const double v = 2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - d1, eta + 1.0);
                dq = std::pow(v, power) - 1.0;
            } else {
                const double v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - d2, eta + 1.0);
                dq = 1.0 - std::pow(v, power);
            }
            x(g) = std::clamp(y + dq * (hi - lo), lo, hi);
        }
    }

    std::vector<Individual> survivors(std::vector<Individual> merged) const {
        const auto points = objectives_of(merged);
        const auto fronts = non_dominated_sort(points);
        std::vector<Individual> next;
        for (std::size_t r = 0; r < fronts.size(); ++r) {
            const auto& front = fronts[r];
            const auto distance = crowding_distance(points, front);
            std::vector<std::size_t> order(front.size());
            std::iota(order.begin(), order.end(), 0);
            if (next.size() + front.size() > static_cast<std::size_t>(config_.population)) {
                std::stable_sort(order.begin(), order.end(),
                                 [&](std::size_t a, std::size_t b) { return distance[a] > distance[b]; });
            }
            for (auto i : order) {
                if (next.size() == static_cast<std::size_t>(config_.population)) {
                    break;
                }
                Individual ind = merged[front[i]];
                ind.rank = static_cast<int>(r);
                ind.crowding = distance[i];
                next.push_back(std::move(ind));
            }
            if (next.size() == static_cast<std::size_t>(config_.population)) {
                break;
            }
        }
        return next;
    }

    NsgaConfig config_;
    int genes_;
    const Objective& objective_;
    Rng rng_;
    double mutation_prob_;
    std::vector<Individual> archive_;
};

} // namespace

NsgaResult nsga2(const NsgaConfig& config, int num_genes, const Objective& objective) {
    validate(config);
    if (num_genes < 1) {
        throw PreconditionError("nsga2: need at least one gene");
    }
    return Nsga2(config, num_genes, objective).run();
}

CostPoint evaluate_gamma(const TriggerParams& trigger, std::span<const LabeledSequence> dataset,
                         const BoostedModel& model) {
    std::vector<Outcome> outcomes;
    outcomes.reserve(dataset.size());
    for (const auto& ls : dataset) {
        const auto prediction = run_sequence_online(ls, model, trigger);
        outcomes.push_back(Outcome{prediction.hypothesis_id, ls.true_id(), prediction.t_star, ls.length()});
    }
    return CostPoint{cost_availability(outcomes), cost_accuracy(outcomes), cost_earliness(outcomes), trigger};
}

CostPoint evaluate_gamma(const TriggerParams& trigger, std::span<const ProbabilityTrace> traces) {
    std::vector<Outcome> outcomes;
    outcomes.reserve(traces.size());
    for (const auto& trace : traces) {
        outcomes.push_back(to_outcome(decide(trace, trigger), trace));
    }
    return CostPoint{cost_availability(outcomes), cost_accuracy(outcomes), cost_earliness(outcomes), trigger};
}

ParetoFront optimize_trigger(TriggerVariant variant, std::span<const ProbabilityTrace> traces,
                             const NsgaConfig& config, int horizon) {
    // Every evaluation is kept so that equal (c_av, c_ac) points can be resolved by earliness.
    std::vector<CostPoint> evaluated;
    const Objective objective = [&](const Eigen::VectorXd& genes) {
        evaluated.push_back(evaluate_gamma(TriggerParams{variant, genes, horizon}, traces));
        return evaluated.back().objectives();
    };
    nsga2(config, gamma_size(variant), objective);

    std::vector<Objectives> points;
    for (const auto& p : evaluated) {
        points.push_back(p.objectives());
    }
    ParetoFront front;
    const auto fronts = non_dominated_sort(points);
    for (auto i : fronts.front()) {
        const auto same = std::find_if(front.points.begin(), front.points.end(), [&](const CostPoint& p) {
            return p.objectives() == evaluated[i].objectives();
        });
        if (same == front.points.end()) {
            front.points.push_back(evaluated[i]);
        } else if (evaluated[i].c_ea < same->c_ea) {
            *same = evaluated[i];
        }
    }
    std::sort(front.points.begin(), front.points.end(), [](const CostPoint& a, const CostPoint& b) {
        return lexicographic_less(a.objectives(), b.objectives());
    });
    points.clear();
    for (const auto& p : front.points) {
        points.push_back(p.objectives());
    }
    front.hypervolume = hypervolume(points, front.reference);
    return front;
}

} // namespace egolane
