#include "egolane/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "egolane/errors.hpp"

namespace egolane {

std::vector<HypothesisSeries> build_mmq_series(const SequenceRecord& seq, const TrackerParams& params,
                                               double chi2_probability) {
    if (seq.frames.empty()) {
        return {};
    }
    const MmqScorer scorer(chi2_probability);
    const auto& map = seq.map;
    const double dt = 1.0 / seq.config.sample_rate;

    auto hypotheses = generate_hypotheses(seq.frames.front().gnss, map, params.max_hypotheses, params);
    std::vector<HypothesisSeries> out;
    out.reserve(hypotheses.size());
    for (const auto& h : hypotheses) {
        out.push_back(HypothesisSeries{h.id, h.lane_index, {}, {}});
    }

    // Longitudinal position is dead-reckoned once and shared by all hypotheses.
    double station = std::max(seq.frames.front().gnss.station, 0.0);
    for (std::size_t k = 0; k < seq.frames.size(); ++k) {
        const auto& frame = seq.frames[k];
        if (k > 0) {
            station += seq.frames[k - 1].odometry.speed * dt;
        }
        for (std::size_t i = 0; i < hypotheses.size(); ++i) {
            auto& h = hypotheses[i];
            if (!h.active) {
                continue;
            }
            if (k > 0) {
                h = predict(h, seq.frames[k - 1].odometry, dt, params);
            }
            h = deactivate_if_off_map(h, map, station);
            if (!h.active) {
                continue;
            }
            auto associations = associate(frame.perceived, map, h, station, params);
            const auto types = match_types(frame.perceived, map, h);
            auto result = update(h, std::move(associations));
            out[i].mmq.push_back(scorer.score(frame.t, result.summaries, types));
            h = result.hypothesis;
            out[i].global_lateral.push_back(implied_lateral(h, map, station));
        }
    }
    return out;
}

std::optional<int> LabeledSequence::true_id() const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i]) {
            return hypotheses[i].id;
        }
    }
    return std::nullopt;
}

LabeledSequence label_sequence(SequenceRecord seq, std::vector<HypothesisSeries> hypotheses) {
    LabeledSequence out;
    out.labels.assign(hypotheses.size(), false);
    std::optional<std::size_t> winner;
    bool consistent = true;
    bool any_frame = false;
    for (std::size_t k = 0; k < seq.truth_pose.size() && consistent; ++k) {
        double best = std::numeric_limits<double>::infinity();
        double second = best;
        std::size_t best_index = 0;
        bool any = false;
        for (std::size_t i = 0; i < hypotheses.size(); ++i) {
            if (k >= hypotheses[i].global_lateral.size()) {
                continue;
            }
            any = true;
            const double dy = std::abs(hypotheses[i].global_lateral[k] - seq.truth_pose[k].lateral);
            if (dy < best) {
                second = best;
                best = dy;
                best_index = i;
            } else if (dy < second) {
                second = dy;
            }
        }
        if (!any) {
            continue;
        }
        any_frame = true;
        if (second - best < kAmbiguityEpsilon || (winner && *winner != best_index)) {
            consistent = false;
        }
        winner = best_index;
    }
    out.valid = consistent && any_frame && winner.has_value();
    if (out.valid) {
        out.labels[*winner] = true;
    }
    out.sequence = std::move(seq);
    out.hypotheses = std::move(hypotheses);
    return out;
}

LabeledSequence make_labeled_sequence(const PipelineConfig& config, int scenario_id, std::uint64_t base_seed) {
    ScenarioConfig scenario = config.scenario;
    scenario.seed = scenario_seed(base_seed, scenario_id);
    auto seq = generate_scenario(scenario, scenario_id);
    auto series = build_mmq_series(seq, config.tracker, config.chi2_probability);
    return label_sequence(std::move(seq), std::move(series));
}

std::vector<LabeledSequence> simulate_dataset(const PipelineConfig& config, int count, std::uint64_t base_seed) {
    validate(config);
    std::vector<LabeledSequence> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int id = 0; id < count; ++id) {
        out.push_back(make_labeled_sequence(config, id, base_seed));
    }
    return out;
}

DatasetSplit split_dataset(std::vector<LabeledSequence> sequences, const SplitRatios& ratios) {
    std::erase_if(sequences, [](const LabeledSequence& s) { return !s.valid; });
    if (sequences.size() < 10) {
        throw PreconditionError("split_dataset: need at least 10 valid sequences, got " +
                                std::to_string(sequences.size()));
    }
    std::set<int> ids;
    for (const auto& s : sequences) {
        if (!ids.insert(s.scenario_id()).second) {
            throw PreconditionError("split_dataset: duplicate scenario id " + std::to_string(s.scenario_id()));
        }
    }
    const double total_ratio = ratios.train + ratios.opt + ratios.test;
    if (!(ratios.train >= 0 && ratios.opt >= 0 && ratios.test >= 0 && total_ratio > 0)) {
        throw PreconditionError("split_dataset: invalid ratios");
    }

    auto key = [](int id) { return scenario_seed(0x5EED5B1170ULL, id); };
    std::sort(sequences.begin(), sequences.end(), [&](const LabeledSequence& a, const LabeledSequence& b) {
        const auto ka = key(a.scenario_id());
        const auto kb = key(b.scenario_id());
        return ka != kb ? ka < kb : a.scenario_id() < b.scenario_id();
    });

    const auto n = static_cast<double>(sequences.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * ratios.train / total_ratio));
    const auto n_opt = std::min(sequences.size() - n_train,
                                static_cast<std::size_t>(std::llround(n * ratios.opt / total_ratio)));

    DatasetSplit split;
    auto by_id = [](const LabeledSequence& a, const LabeledSequence& b) { return a.scenario_id() < b.scenario_id(); };
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        auto& target = i < n_train ? split.train : (i < n_train + n_opt ? split.opt : split.test);
        target.push_back(std::move(sequences[i]));
    }
    std::sort(split.train.begin(), split.train.end(), by_id);
    std::sort(split.opt.begin(), split.opt.end(), by_id);
    std::sort(split.test.begin(), split.test.end(), by_id);
    return split;
}

TrainingSet build_training_set(std::span<const LabeledSequence> sequences, const FeatureSchema& schema, int stride) {
    if (stride < 1) {
        throw PreconditionError("build_training_set: stride must be at least 1");
    }
    std::vector<Eigen::VectorXd> rows;
    std::vector<std::uint8_t> labels;
    for (const auto& ls : sequences) {
        if (!ls.valid) {
            continue;
        }
        for (std::size_t i = 0; i < ls.hypotheses.size(); ++i) {
            const auto& series = ls.hypotheses[i];
            FeatureAccumulator acc(schema);
            for (const auto& frame : series.mmq) {
                acc.push(frame);
            }
            for (int t = 1; t <= acc.length(); t += stride) {
                rows.push_back(acc.features(t).values);
                labels.push_back(ls.labels[i] ? 1 : 0);
            }
        }
    }
    TrainingSet set;
    set.schema_hash = schema.hash();
    set.labels = std::move(labels);
    set.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(schema.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        set.features.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    }
    return set;
}

BoostedModel train_model(std::span<const LabeledSequence> sequences, const PipelineConfig& config) {
    const FeatureSchema schema;
    auto model = fit(build_training_set(sequences, schema, config.training_stride), config.boosting);
    model.schema = schema;
    return model;
}

Prediction run_sequence_online(const LabeledSequence& ls, const BoostedModel& model, const TriggerParams& trigger) {
    validate(trigger);
    std::vector<FeatureAccumulator> accumulators(ls.hypotheses.size(), FeatureAccumulator(model.schema));
    std::vector<std::pair<int, double>> probs;
    for (int t = 1; t <= ls.length(); ++t) {
        probs.clear();
        for (std::size_t i = 0; i < ls.hypotheses.size(); ++i) {
            const auto& series = ls.hypotheses[i];
            if (series.length() < t) {
                continue;
            }
            accumulators[i].push(series.mmq[static_cast<std::size_t>(t - 1)]);
            probs.emplace_back(series.id, predict_proba(model, accumulators[i].features(t)));
        }
        const auto sorted = sort_probs(probs, t);
        if (!sorted) {
            return {};
        }
        if (fire(*sorted, trigger)) {
            return {sorted->argmax_id, t};
        }
    }
    return {};
}

ProbabilityTrace probability_trace(const LabeledSequence& ls, const BoostedModel& model) {
    ProbabilityTrace trace;
    trace.scenario_id = ls.scenario_id();
    trace.length = ls.length();
    trace.truth_id = ls.true_id();
    const auto h = static_cast<Eigen::Index>(ls.hypotheses.size());
    trace.probs = Eigen::MatrixXd::Constant(trace.length, h, std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index j = 0; j < h; ++j) {
        const auto& series = ls.hypotheses[static_cast<std::size_t>(j)];
        trace.ids.push_back(series.id);
        FeatureAccumulator acc(model.schema);
        const int steps = std::min(series.length(), trace.length);
        for (int t = 1; t <= steps; ++t) {
            acc.push(series.mmq[static_cast<std::size_t>(t - 1)]);
            trace.probs(t - 1, j) = predict_proba(model, acc.features(t));
        }
    }
    return trace;
}

std::vector<ProbabilityTrace> probability_traces(std::span<const LabeledSequence> sequences,
                                                 const BoostedModel& model) {
    std::vector<ProbabilityTrace> out;
    out.reserve(sequences.size());
    for (const auto& ls : sequences) {
        out.push_back(probability_trace(ls, model));
    }
    return out;
}

namespace {

std::optional<SortedProbs> sorted_at(const ProbabilityTrace& trace, int t, std::vector<std::pair<int, double>>& buf) {
    buf.clear();
    for (Eigen::Index j = 0; j < trace.probs.cols(); ++j) {
        const double p = trace.probs(t - 1, j);
        if (!std::isnan(p)) {
            buf.emplace_back(trace.ids[static_cast<std::size_t>(j)], p);
        }
    }
    return sort_probs(buf, t);
}

} // namespace

Prediction decide(const ProbabilityTrace& trace, const TriggerParams& trigger) {
    validate(trigger);
    std::vector<std::pair<int, double>> buf;
    for (int t = 1; t <= trace.length; ++t) {
        const auto sorted = sorted_at(trace, t, buf);
        if (!sorted) {
            return {};
        }
        if (fire(*sorted, trigger)) {
            return {sorted->argmax_id, t};
        }
    }
    return {};
}

std::optional<int> argmax_at(const ProbabilityTrace& trace, int t) {
    if (t < 1 || t > trace.length) {
        return std::nullopt;
    }
    std::vector<std::pair<int, double>> buf;
    const auto sorted = sorted_at(trace, t, buf);
    if (!sorted) {
        return std::nullopt;
    }
    return sorted->argmax_id;
}

Outcome to_outcome(const Prediction& prediction, const ProbabilityTrace& trace) {
    return Outcome{prediction.hypothesis_id, trace.truth_id, prediction.t_star, trace.length};
}

EvalMetrics metrics_from_outcomes(std::span<const Outcome> outcomes, double sample_rate) {
    if (outcomes.empty()) {
        throw PreconditionError("evaluate: empty test set");
    }
    EvalMetrics m;
    m.total = static_cast<int>(outcomes.size());
    int correct = 0;
    double time_sum = 0.0;
    for (const auto& o : outcomes) {
        if (!o.predicted) {
            continue;
        }
        ++m.predicted;
        correct += o.predicted == o.truth ? 1 : 0;
        time_sum += static_cast<double>(*o.t_star) / sample_rate;
    }
    m.availability = static_cast<double>(m.predicted) / m.total;
    m.accuracy_vacuous = m.predicted == 0;
    m.accuracy = m.predicted > 0 ? static_cast<double>(correct) / m.predicted : 1.0;
    m.earliness_s = m.predicted > 0 ? time_sum / m.predicted : 0.0;
    return m;
}

EvalReport evaluate(std::span<const ProbabilityTrace> test, const TriggerParams& trigger, double front_hypervolume) {
    if (test.empty()) {
        throw PreconditionError("evaluate: empty test set");
    }
    EvalReport report;
    for (const auto& trace : test) {
        report.outcomes.push_back(to_outcome(decide(trace, trigger), trace));
    }
    report.metrics = metrics_from_outcomes(report.outcomes);
    report.hypervolume = front_hypervolume;
    return report;
}

EvalReport evaluate(std::span<const LabeledSequence> test, const BoostedModel& model, const TriggerParams& trigger,
                    double front_hypervolume) {
    if (test.empty()) {
        throw PreconditionError("evaluate: empty test set");
    }
    EvalReport report;
    for (const auto& ls : test) {
        const auto prediction = run_sequence_online(ls, model, trigger);
        report.outcomes.push_back(Outcome{prediction.hypothesis_id, ls.true_id(), prediction.t_star, ls.length()});
    }
    report.metrics = metrics_from_outcomes(report.outcomes, test.front().sequence.config.sample_rate);
    report.hypervolume = front_hypervolume;
    return report;
}

NoTriggerCurve no_trigger_curve(std::span<const ProbabilityTrace> test, std::span<const Outcome> reference) {
    NoTriggerCurve curve;
    int max_length = 0;
    for (const auto& trace : test) {
        max_length = std::max(max_length, trace.length);
    }
    for (int t = 1; t <= max_length; ++t) {
        int running = 0;
        int correct = 0;
        for (const auto& trace : test) {
            const auto argmax = argmax_at(trace, t);
            if (!argmax) {
                continue;
            }
            ++running;
            correct += argmax == trace.truth_id ? 1 : 0;
        }
        int fired = 0;
        for (const auto& o : reference) {
            fired += o.t_star && *o.t_star <= t ? 1 : 0;
        }
        curve.t.push_back(t);
        curve.accuracy.push_back(running > 0 ? static_cast<double>(correct) / running : 0.0);
        curve.trigger_fraction.push_back(reference.empty() ? 0.0
                                                           : static_cast<double>(fired) / reference.size());
    }
    return curve;
}

ComparisonReport compare_methods(const DatasetSplit& split, const BoostedModel& model, const NsgaConfig& nsga,
                                 int horizon) {
    const auto opt = probability_traces(split.opt, model);
    const auto test = probability_traces(split.test, model);
    if (opt.empty() || test.empty()) {
        throw PreconditionError("compare_methods: optimization and test sets must be non-empty");
    }

    ComparisonReport report;
    for (auto variant : kTriggerVariants) {
        MethodRow row;
        row.method = std::string(to_string(variant));
        row.front = optimize_trigger(variant, opt, nsga, horizon);
        row.hypervolume = row.front.hypervolume;
        row.selected_index = select_operating_point(row.front);
        row.trigger = row.front.points[row.selected_index].trigger;

        std::vector<Objectives> on_test;
        for (const auto& point : row.front.points) {
            on_test.push_back(evaluate_gamma(point.trigger, test).objectives());
        }
        row.test_hypervolume = hypervolume(on_test);

        const auto eval = evaluate(test, row.trigger, row.hypervolume);
        row.metrics = eval.metrics;
        if (variant == TriggerVariant::S4) {
            report.curve = no_trigger_curve(test, eval.outcomes);
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

} // namespace egolane
