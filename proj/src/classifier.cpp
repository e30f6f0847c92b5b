#include "egolane/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace egolane {

namespace {

constexpr double kProbEpsilon = 1e-15;

double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double row_loss(double raw, std::uint8_t label) {
    return label ? softplus(-raw) : softplus(raw);
}

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

struct NodeStats {
    int count = 0;
    double sum = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, const std::vector<std::vector<int>>& sorted, const BoostingParams& params)
        : x_(x), sorted_(sorted), params_(params) {}

    /// Fits a tree to `gradient`; fills `leaf_of` with the leaf node of every row.
    RegressionTree build(const std::vector<double>& gradient, std::vector<int>& leaf_of) const {
        const int n = static_cast<int>(gradient.size());
        RegressionTree tree;
        tree.nodes.emplace_back();
        leaf_of.assign(static_cast<std::size_t>(n), 0);

        std::vector<int> frontier{0};
        for (int depth = 0; depth < params_.max_depth && !frontier.empty(); ++depth) {
            std::vector<int> slot_of(tree.nodes.size(), -1);
            std::vector<NodeStats> totals(frontier.size());
            for (std::size_t s = 0; s < frontier.size(); ++s) {
                slot_of[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);
            }
            for (int i = 0; i < n; ++i) {
                const int s = slot_of[static_cast<std::size_t>(leaf_of[static_cast<std::size_t>(i)])];
                if (s >= 0) {
                    totals[static_cast<std::size_t>(s)].count += 1;
                    totals[static_cast<std::size_t>(s)].sum += gradient[static_cast<std::size_t>(i)];
                }
            }

            std::vector<SplitCandidate> best(frontier.size());
            std::vector<NodeStats> running(frontier.size());
            std::vector<double> last(frontier.size());
            for (int f = 0; f < static_cast<int>(x_.cols()); ++f) {
                std::fill(running.begin(), running.end(), NodeStats{});
                for (int i : sorted_[static_cast<std::size_t>(f)]) {
                    const int s = slot_of[static_cast<std::size_t>(leaf_of[static_cast<std::size_t>(i)])];
                    if (s < 0) {
                        continue;
                    }
                    const auto su = static_cast<std::size_t>(s);
                    const double v = x_(i, f);
                    auto& run = running[su];
                    if (run.count > 0 && v > last[su]) {
                        const auto& total = totals[su];
                        const int right_count = total.count - run.count;
                        if (run.count >= params_.min_samples_leaf && right_count >= params_.min_samples_leaf) {
                            const double right_sum = total.sum - run.sum;
                            const double gain = run.sum * run.sum / run.count + right_sum * right_sum / right_count -
                                                total.sum * total.sum / total.count;
                            if (gain > best[su].gain) {
                                double threshold = 0.5 * (last[su] + v);
                                if (!(threshold < v)) {
                                    threshold = last[su];
                                }
                                best[su] = {gain, f, threshold};
                            }
                        }
                    }
                    run.count += 1;
                    run.sum += gradient[static_cast<std::size_t>(i)];
                    last[su] = v;
                }
            }

            std::vector<int> next;
            std::vector<int> split_left(tree.nodes.size(), -1);
            for (std::size_t s = 0; s < frontier.size(); ++s) {
                if (best[s].feature < 0 || !(best[s].gain > 0.0)) {
                    continue;
                }
                const int id = frontier[s];
                const int left = static_cast<int>(tree.nodes.size());
                tree.nodes.emplace_back();
                tree.nodes.emplace_back();
                auto& node = tree.nodes[static_cast<std::size_t>(id)];
                node.feature = best[s].feature;
                node.threshold = best[s].threshold;
                node.left = left;
                node.right = left + 1;
                split_left[static_cast<std::size_t>(id)] = left;
                next.push_back(left);
                next.push_back(left + 1);
            }
            for (int i = 0; i < n; ++i) {
                auto& leaf = leaf_of[static_cast<std::size_t>(i)];
                if (leaf < static_cast<int>(split_left.size()) && split_left[static_cast<std::size_t>(leaf)] >= 0) {
                    const auto& node = tree.nodes[static_cast<std::size_t>(leaf)];
                    leaf = x_(i, node.feature) <= node.threshold ? node.left : node.right;
                }
            }
            frontier = std::move(next);
        }
        return tree;
    }

private:
    const Eigen::MatrixXd& x_;
    const std::vector<std::vector<int>>& sorted_;
    BoostingParams params_;
};

} // namespace

std::uint64_t FeatureSchema::hash() const {
    std::string text = "egolane-features-v1;channels=" + std::to_string(kNumChannels) + ";windows=";
    for (int w : windows) {
        text += std::to_string(w) + ",";
    }
    text += ";missing-fraction;length/" + std::to_string(kNominalLength);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

FeatureAccumulator::FeatureAccumulator(FeatureSchema schema)
    : schema_(std::move(schema)), hash_(schema_.hash()), sums_(1), counts_(1) {
    sums_[0].fill(0.0);
    counts_[0].fill(0);
}

void FeatureAccumulator::push(const MmqFrame& frame) {
    auto sums = sums_.back();
    auto counts = counts_.back();
    for (std::size_t c = 0; c < kNumChannels; ++c) {
        if (frame.channels[c]) {
            sums[c] += *frame.channels[c];
            counts[c] += 1;
        }
    }
    sums_.push_back(sums);
    counts_.push_back(counts);
}

FeatureVector FeatureAccumulator::features(int t) const {
    if (t < 1 || t > length()) {
        throw PreconditionError("extract_features: prefix length " + std::to_string(t) + " outside [1, " +
                                std::to_string(length()) + "]");
    }
    FeatureVector fv;
    fv.schema_hash = hash_;
    fv.values.resize(static_cast<Eigen::Index>(schema_.size()));
    const auto end = static_cast<std::size_t>(t);
    Eigen::Index k = 0;
    for (std::size_t c = 0; c < kNumChannels; ++c) {
        for (int w : schema_.windows) {
            const auto begin = w == kWholePrefix ? std::size_t{0} : static_cast<std::size_t>(std::max(0, t - w));
            const int count = counts_[end][c] - counts_[begin][c];
            fv.values(k++) = count > 0 ? (sums_[end][c] - sums_[begin][c]) / count : kMissingSentinel;
        }
    }
    for (std::size_t c = 0; c < kNumChannels; ++c) {
        fv.values(k++) = 1.0 - static_cast<double>(counts_[end][c]) / t;
    }
    fv.values(k) = std::min(static_cast<double>(t) / kNominalLength, 1.0);
    return fv;
}

FeatureVector extract_features(std::span<const MmqFrame> prefix, const FeatureSchema& schema) {
    if (prefix.empty()) {
        throw PreconditionError("extract_features: empty prefix");
    }
    FeatureAccumulator acc(schema);
    for (const auto& frame : prefix) {
        acc.push(frame);
    }
    return acc.features();
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double log_loss(std::span<const double> raw_scores, std::span<const std::uint8_t> labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < raw_scores.size(); ++i) {
        total += row_loss(raw_scores[i], labels[i]);
    }
    return raw_scores.empty() ? 0.0 : total / static_cast<double>(raw_scores.size());
}

BoostedModel fit(const TrainingSet& data, const BoostingParams& params) {
    const auto n = static_cast<int>(data.labels.size());
    if (n == 0 || data.features.rows() != n) {
        throw TrainingError("fit: training set is empty or inconsistent");
    }
    if (params.rounds < 0 || params.max_depth < 1 || !(params.learning_rate > 0.0) || params.min_samples_leaf < 1) {
        throw TrainingError("fit: invalid boosting parameters");
    }
    const auto positives = std::count(data.labels.begin(), data.labels.end(), std::uint8_t{1});
    const auto negatives = n - positives;
    if (positives == 0 || negatives == 0) {
        throw TrainingError("fit: training data must contain both classes");
    }

    // Canonical row order makes the model independent of input row order.
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        for (Eigen::Index f = 0; f < data.features.cols(); ++f) {
            const double va = data.features(a, f);
            const double vb = data.features(b, f);
            if (va != vb) {
                return va < vb;
            }
        }
        return data.labels[static_cast<std::size_t>(a)] < data.labels[static_cast<std::size_t>(b)];
    });
    Eigen::MatrixXd x(n, data.features.cols());
    std::vector<std::uint8_t> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        x.row(i) = data.features.row(order[static_cast<std::size_t>(i)]);
        y[static_cast<std::size_t>(i)] = data.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    }

    std::vector<std::vector<int>> sorted(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
        auto& idx = sorted[static_cast<std::size_t>(f)];
        idx.resize(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return x(a, f) < x(b, f); });
    }

    BoostedModel model;
    model.params = params;
    model.learning_rate = params.learning_rate;
    model.schema_hash = data.schema_hash;
    model.num_features = static_cast<std::size_t>(x.cols());
    model.base_score = std::log(static_cast<double>(positives) / static_cast<double>(negatives));

    std::vector<double> raw(static_cast<std::size_t>(n), model.base_score);
    model.training_loss.push_back(log_loss(raw, y));

    const TreeBuilder builder(x, sorted, params);
    std::vector<double> gradient(static_cast<std::size_t>(n));
    std::vector<double> hessian(static_cast<std::size_t>(n));
    std::vector<int> leaf_of;
    for (int round = 0; round < params.rounds; ++round) {
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const double p = sigmoid(raw[i]);
            gradient[i] = static_cast<double>(y[i]) - p;
            hessian[i] = p * (1.0 - p);
        }
        RegressionTree tree = builder.build(gradient, leaf_of);

        std::vector<double> g_sum(tree.nodes.size(), 0.0);
        std::vector<double> h_sum(tree.nodes.size(), 0.0);
        std::vector<std::vector<int>> members(tree.nodes.size());
        for (int i = 0; i < n; ++i) {
            const auto leaf = static_cast<std::size_t>(leaf_of[static_cast<std::size_t>(i)]);
            g_sum[leaf] += gradient[static_cast<std::size_t>(i)];
            h_sum[leaf] += hessian[static_cast<std::size_t>(i)];
            members[leaf].push_back(i);
        }
        for (std::size_t leaf = 0; leaf < tree.nodes.size(); ++leaf) {
            auto& node = tree.nodes[leaf];
            if (!node.is_leaf() || members[leaf].empty()) {
                continue;
            }
            double value = h_sum[leaf] > 1e-12 ? g_sum[leaf] / h_sum[leaf] : 0.0;
            // Backtrack the Newton step until the leaf's loss does not increase.
            auto leaf_loss = [&](double step) {
                double total = 0.0;
                for (int i : members[leaf]) {
                    total += row_loss(raw[static_cast<std::size_t>(i)] + step, y[static_cast<std::size_t>(i)]);
                }
                return total;
            };
            const double before = leaf_loss(0.0);
            int halvings = 0;
            while (value != 0.0 && leaf_loss(params.learning_rate * value) > before) {
                value = ++halvings > 60 ? 0.0 : 0.5 * value;
            }
            node.value = value;
        }
        for (int i = 0; i < n; ++i) {
            raw[static_cast<std::size_t>(i)] +=
                params.learning_rate * tree.nodes[static_cast<std::size_t>(leaf_of[static_cast<std::size_t>(i)])].value;
        }
        model.trees.push_back(std::move(tree));
        model.training_loss.push_back(log_loss(raw, y));
    }
    return model;
}

double predict_proba(const BoostedModel& model, const FeatureVector& fv) {
    if (fv.schema_hash != model.schema_hash || static_cast<std::size_t>(fv.values.size()) != model.num_features) {
        throw SchemaError("predict_proba: feature vector schema does not match the model");
    }
    return std::clamp(sigmoid(model.raw_score(fv.values)), kProbEpsilon, 1.0 - kProbEpsilon);
}

} // namespace egolane
