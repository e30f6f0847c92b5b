#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "egolane/mmq.hpp"

namespace egolane {

/// Window mean reported when a window holds no present value; below every MMQ.
inline constexpr double kMissingSentinel = -11.0;
/// Prefix length at which the normalized-length feature saturates (30 s at 40 Hz).
inline constexpr int kNominalLength = 1200;
/// Window size 0 means "everything observed so far".
inline constexpr int kWholePrefix = 0;

struct FeatureSchema {
    std::vector<int> windows{10, 40, 120, 400, kWholePrefix};

    std::size_t size() const { return kNumChannels * windows.size() + kNumChannels + 1; }
    /// FNV-1a over the schema description; stored with trained models.
    std::uint64_t hash() const;
};

struct FeatureVector {
    Eigen::VectorXd values;
    std::uint64_t schema_hash = 0;
};

/// Prefix sums of one hypothesis's MMQ series for O(1) trailing-window means.
class FeatureAccumulator {
public:
    explicit FeatureAccumulator(FeatureSchema schema = {});

    void push(const MmqFrame& frame);
    int length() const { return static_cast<int>(counts_.size()) - 1; }
    /// Features over the first `t` frames pushed (1 <= t <= length()).
    FeatureVector features(int t) const;
    FeatureVector features() const { return features(length()); }
    const FeatureSchema& schema() const { return schema_; }

private:
    FeatureSchema schema_;
    std::uint64_t hash_;
    // Row k holds cumulative sums/counts over the first k frames.
    std::vector<std::array<double, kNumChannels>> sums_;
    std::vector<std::array<int, kNumChannels>> counts_;
};

/// Features of the prefix [0, t). Reads nothing beyond the span.
FeatureVector extract_features(std::span<const MmqFrame> prefix, const FeatureSchema& schema = {});

struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

/// Axis-aligned regression tree; `x[feature] <= threshold` goes left.
struct RegressionTree {
    std::vector<TreeNode> nodes;

    template <typename Derived>
    double predict(const Eigen::DenseBase<Derived>& x) const {
        int i = 0;
        while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
            const auto& node = nodes[static_cast<std::size_t>(i)];
            i = x(node.feature) <= node.threshold ? node.left : node.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }
};

struct BoostingParams {
    int rounds = 100;
    int max_depth = 3;
    double learning_rate = 0.1;
    int min_samples_leaf = 1;
};

struct BoostedModel {
    double base_score = 0.0;
    double learning_rate = 0.1;
    std::vector<RegressionTree> trees;
    BoostingParams params;
    std::uint64_t schema_hash = 0;
    std::size_t num_features = 0;
    FeatureSchema schema;
    /// Training log-loss after each round, index 0 being the prior.
    std::vector<double> training_loss;

    template <typename Derived>
    double raw_score(const Eigen::DenseBase<Derived>& x) const {
        double sum = 0.0;
        for (const auto& tree : trees) {
            sum += tree.predict(x);
        }
        return base_score + learning_rate * sum;
    }
};

struct TrainingSet {
    Eigen::MatrixXd features;
    std::vector<std::uint8_t> labels;
    std::uint64_t schema_hash = 0;

    std::size_t size() const { return labels.size(); }
};

/// Stagewise logistic-loss gradient boosting with Newton leaf values.
/// Throws TrainingError when only one class is present.
BoostedModel fit(const TrainingSet& data, const BoostingParams& params = {});

/// Throws SchemaError when the vector was built with a different feature schema.
double predict_proba(const BoostedModel& model, const FeatureVector& fv);

double sigmoid(double z);
double log_loss(std::span<const double> raw_scores, std::span<const std::uint8_t> labels);

} // namespace egolane
