#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "egolane/classifier.hpp"
#include "egolane/config.hpp"
#include "egolane/harness.hpp"
#include "egolane/moo.hpp"
#include "egolane/trigger.hpp"

namespace egolane {

/// A dataset directory: one `scenario_NNNNN.jsonl` per sequence.
struct Dataset {
    PipelineConfig config;
    std::vector<LabeledSequence> sequences;
};

/// Header line (config, map, truth, hypothesis labels) then one object per frame
/// carrying sensors, truth pose and the 8 nullable MMQs of every hypothesis.
std::string sequence_to_jsonl(const LabeledSequence& ls, const PipelineConfig& config);

/// Restores the sensor record and re-runs tracking and labeling with the stored config.
LabeledSequence sequence_from_jsonl(const std::string& text, PipelineConfig* config_out = nullptr);

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
/// Files are read in name order. Throws SchemaError on malformed content.
Dataset read_dataset(const std::filesystem::path& dir);

std::string model_to_json(const BoostedModel& model);
BoostedModel model_from_json(const std::string& text);
void save_model(const std::filesystem::path& path, const BoostedModel& model);
BoostedModel load_model(const std::filesystem::path& path);

std::string trigger_to_json(const TriggerParams& trigger);
TriggerParams trigger_from_json(const std::string& text);

/// {"points": [{gamma, variant, horizon, c_av, c_ac, c_ea}...], "hypervolume", "selected_index"}
std::string front_to_json(const ParetoFront& front, std::size_t selected_index);
ParetoFront front_from_json(const std::string& text, std::size_t* selected_index = nullptr);

/// One row per method: method, earliness_s, availability, accuracy, hypervolume, test_hypervolume.
std::string report_to_json(const ComparisonReport& report);
std::string report_to_json(const EvalReport& report, const std::string& method);
/// Columns: t, no_trigger_accuracy, cumulative_trigger_fraction.
std::string curves_to_csv(const NoTriggerCurve& curve);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace egolane
