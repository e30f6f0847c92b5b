#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "egolane/classifier.hpp"
#include "egolane/config.hpp"
#include "egolane/mmq.hpp"
#include "egolane/moo.hpp"
#include "egolane/sim.hpp"
#include "egolane/tracker.hpp"
#include "egolane/trigger.hpp"

namespace egolane {

/// Output of tracking one hypothesis through a sequence. Both vectors hold one
/// entry per frame while the hypothesis is active.
struct HypothesisSeries {
    int id = 0;
    int lane_index = 0;
    MmqSeries mmq;
    std::vector<double> global_lateral;

    int length() const { return static_cast<int>(mmq.size()); }
};

/// Runs predict, associate, score and update for every hypothesis frame by frame.
std::vector<HypothesisSeries> build_mmq_series(const SequenceRecord& seq, const TrackerParams& params = {},
                                               double chi2_probability = 0.95);

/// Minimum separation (m) between the closest and second-closest hypothesis.
inline constexpr double kAmbiguityEpsilon = 1e-6;

struct LabeledSequence {
    SequenceRecord sequence;
    std::vector<HypothesisSeries> hypotheses;
    std::vector<bool> labels;
    bool valid = false;

    int length() const { return static_cast<int>(sequence.frames.size()); }
    int scenario_id() const { return sequence.scenario_id; }
    std::optional<int> true_id() const;
};

/// A hypothesis is true iff it is the unique closest to the reference pose at every frame.
/// Ties or a changing winner invalidate the sequence.
LabeledSequence label_sequence(SequenceRecord seq, std::vector<HypothesisSeries> hypotheses);

/// Simulate, track, score and label one scenario.
LabeledSequence make_labeled_sequence(const PipelineConfig& config, int scenario_id, std::uint64_t base_seed);

/// `count` scenarios with ids 0..count-1; per-scenario seeds are derived from `base_seed`.
std::vector<LabeledSequence> simulate_dataset(const PipelineConfig& config, int count, std::uint64_t base_seed);

struct SplitRatios {
    double train = 0.49;
    double opt = 0.33;
    double test = 0.18;
};

struct DatasetSplit {
    std::vector<LabeledSequence> train;
    std::vector<LabeledSequence> opt;
    std::vector<LabeledSequence> test;
};

/// Deterministic partition of the valid sequences by a hash of scenario_id.
/// Throws PreconditionError with fewer than 10 valid sequences.
DatasetSplit split_dataset(std::vector<LabeledSequence> sequences, const SplitRatios& ratios = {});

/// Labeled feature rows at prefix lengths 1, 1 + stride, 1 + 2 stride, ...
TrainingSet build_training_set(std::span<const LabeledSequence> sequences, const FeatureSchema& schema = {},
                               int stride = 20);

BoostedModel train_model(std::span<const LabeledSequence> sequences, const PipelineConfig& config);

struct Prediction {
    std::optional<int> hypothesis_id;
    std::optional<int> t_star;

    bool operator==(const Prediction&) const = default;
};

/// Online decision loop. Only frames [0, t) are read at step t; stops at the first firing step.
Prediction run_sequence_online(const LabeledSequence& ls, const BoostedModel& model, const TriggerParams& trigger);

/// Per-step classifier output for every hypothesis; NaN where a hypothesis is inactive.
struct ProbabilityTrace {
    int scenario_id = 0;
    int length = 0;
    std::vector<int> ids;
    std::optional<int> truth_id;
    /// length x hypotheses; row t - 1 holds the probabilities at step t.
    Eigen::MatrixXd probs;
};

ProbabilityTrace probability_trace(const LabeledSequence& ls, const BoostedModel& model);
std::vector<ProbabilityTrace> probability_traces(std::span<const LabeledSequence> sequences,
                                                 const BoostedModel& model);

/// The online decision replayed over a precomputed trace; identical to run_sequence_online.
Prediction decide(const ProbabilityTrace& trace, const TriggerParams& trigger);

/// Argmax at step t without a trigger; empty when no hypothesis is active.
std::optional<int> argmax_at(const ProbabilityTrace& trace, int t);

Outcome to_outcome(const Prediction& prediction, const ProbabilityTrace& trace);

struct EvalMetrics {
    double earliness_s = 0.0;
    double availability = 0.0;
    double accuracy = 1.0;
    /// Set when nothing was predicted and accuracy is 1 by convention.
    bool accuracy_vacuous = false;
    int predicted = 0;
    int total = 0;
};

/// Availability, accuracy and earliness (seconds) from a prediction log.
EvalMetrics metrics_from_outcomes(std::span<const Outcome> outcomes, double sample_rate = kSampleRate);

struct EvalReport {
    EvalMetrics metrics;
    double hypervolume = 0.0;
    std::vector<Outcome> outcomes;
};

/// Throws PreconditionError on an empty test set.
EvalReport evaluate(std::span<const LabeledSequence> test, const BoostedModel& model, const TriggerParams& trigger,
                    double front_hypervolume = 0.0);
EvalReport evaluate(std::span<const ProbabilityTrace> test, const TriggerParams& trigger,
                    double front_hypervolume = 0.0);

struct MethodRow {
    std::string method;
    TriggerParams trigger;
    EvalMetrics metrics;
    /// Hypervolume of the front found on the optimization set.
    double hypervolume = 0.0;
    /// Hypervolume of the same front re-evaluated on the test set.
    double test_hypervolume = 0.0;
    ParetoFront front;
    std::size_t selected_index = 0;
};

struct NoTriggerCurve {
    std::vector<int> t;
    /// Accuracy of the per-step argmax among sequences still running at t.
    std::vector<double> accuracy;
    /// Fraction of test sequences on which the reference trigger has fired by t.
    std::vector<double> trigger_fraction;
};

struct ComparisonReport {
    std::vector<MethodRow> rows;
    NoTriggerCurve curve;
    std::string curve_method = "s4";
};

NoTriggerCurve no_trigger_curve(std::span<const ProbabilityTrace> test, std::span<const Outcome> reference);

/// For every trigger variant: optimize on `split.opt`, select an operating point, evaluate on `split.test`.
ComparisonReport compare_methods(const DatasetSplit& split, const BoostedModel& model, const NsgaConfig& nsga,
                                 int horizon = kDefaultHorizon);

} // namespace egolane
