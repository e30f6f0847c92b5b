#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "egolane/trigger.hpp"

namespace egolane {

struct LabeledSequence;
struct ProbabilityTrace;
struct BoostedModel;

/// One sequence's result under a trigger.
struct Outcome {
    std::optional<int> predicted;
    std::optional<int> truth;
    std::optional<int> t_star;
    int length = 0;
};

/// Wrong predictions over predicted sequences; 0 when nothing was predicted.
double cost_accuracy(std::span<const Outcome> outcomes);
/// Mean t*/L over all sequences; an unpredicted sequence counts as 1.
double cost_earliness(std::span<const Outcome> outcomes);
/// Fraction of sequences without a prediction.
double cost_availability(std::span<const Outcome> outcomes);

/// (availability cost, accuracy cost), both minimized.
using Objectives = Eigen::Vector2d;

/// a dominates b: no worse in both coordinates and strictly better in one.
inline bool dominates(const Objectives& a, const Objectives& b) {
    return (a.array() <= b.array()).all() && (a.array() < b.array()).any();
}

/// Fronts of indices; front 0 is the nondominated set.
std::vector<std::vector<std::size_t>> non_dominated_sort(std::span<const Objectives> points);

/// Crowding distance of each member of `front` (same order); boundary points get +inf.
std::vector<double> crowding_distance(std::span<const Objectives> points, std::span<const std::size_t> front);

/// Area dominated by `points` inside the box bounded by `reference`.
/// Throws DomainError for a point outside [0, reference].
double hypervolume(std::span<const Objectives> points, const Objectives& reference = Objectives(1.0, 1.0));

/// As hypervolume(), but points not inside the reference box contribute nothing.
double dominated_hypervolume(std::span<const Objectives> points, const Objectives& reference = Objectives(1.0, 1.0));

struct CostPoint {
    double c_av = 1.0;
    double c_ac = 0.0;
    double c_ea = 1.0;
    TriggerParams trigger;

    Objectives objectives() const { return {c_av, c_ac}; }
};

struct ParetoFront {
    std::vector<CostPoint> points;
    Objectives reference = Objectives(1.0, 1.0);
    double hypervolume = 0.0;
};

/// Index of the point minimizing c_av + c_ac; ties go to the lower c_ac, then the lower c_ea.
/// Throws on an empty front.
std::size_t select_operating_point(const ParetoFront& front);

struct NsgaConfig {
    int population = 8;
    int generations = 16;
    double crossover_eta = 15.0;
    double crossover_prob = 0.9;
    double mutation_eta = 20.0;
    /// Per-gene mutation probability; non-positive means 1 / genes.
    double mutation_prob = 0.0;
    double lower = -1.0;
    double upper = 1.0;
    std::uint64_t seed = 1;
};

void validate(const NsgaConfig& config);

struct Individual {
    Eigen::VectorXd genes;
    Objectives objectives = Objectives::Zero();
    int rank = 0;
    double crowding = 0.0;
};

struct NsgaResult {
    /// Final population.
    std::vector<Individual> population;
    /// Nondominated set of every evaluated individual, sorted by objectives, duplicates removed.
    std::vector<Individual> front;
    /// Hypervolume of the nondominated archive after initialization and after each generation.
    std::vector<double> front_hypervolume;
    int evaluations = 0;
};

using Objective = std::function<Objectives(const Eigen::VectorXd&)>;

/// NSGA-II: fast non-dominated sorting, crowding distance, binary tournament,
/// SBX crossover and polynomial mutation inside the box [lower, upper]^genes.
NsgaResult nsga2(const NsgaConfig& config, int num_genes, const Objective& objective);

/// Costs of one trigger over a dataset, running the online loop on every sequence.
CostPoint evaluate_gamma(const TriggerParams& trigger, std::span<const LabeledSequence> dataset,
                         const BoostedModel& model);

/// Same costs from precomputed probability traces.
CostPoint evaluate_gamma(const TriggerParams& trigger, std::span<const ProbabilityTrace> traces);

/// NSGA-II over the trigger's gamma on `traces`. The front is the nondominated set of every
/// evaluated gamma; among equal (c_av, c_ac) the earliest is kept.
ParetoFront optimize_trigger(TriggerVariant variant, std::span<const ProbabilityTrace> traces,
                             const NsgaConfig& config, int horizon = kDefaultHorizon);

} // namespace egolane
