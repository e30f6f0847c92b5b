#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "egolane/classifier.hpp"
#include "egolane/sim.hpp"
#include "egolane/tracker.hpp"

namespace egolane {

/// Everything tunable in the pipeline, loadable from one key-value file.
struct PipelineConfig {
    ScenarioConfig scenario;
    TrackerParams tracker;
    double chi2_probability = 0.95;
    BoostingParams boosting;
    int training_stride = 20;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown keys and bad values
/// raise ConfigError naming the key. Unset gnss_bias_range follows 1.5 lane widths
/// and unset measurement_sigma follows point_noise_sigma.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string format_config(const PipelineConfig& config);

void validate(const PipelineConfig& config);

} // namespace egolane
