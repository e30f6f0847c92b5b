#pragma once

#include <cstdint>
#include <vector>

#include "egolane/config.hpp"
#include "egolane/harness.hpp"
#include "egolane/sim.hpp"

namespace egolane::testing {

inline ScenarioConfig noiseless_scenario() {
    ScenarioConfig c;
    c.point_noise_sigma = 0.0;
    c.type_confusion_prob = 0.0;
    c.gnss_bias_range = 0.0;
    c.gnss_noise_sigma = 0.0;
    c.missing_prob = 0.0;
    c.perception_persistence = 0.0;
    c.speed_noise_sigma = 0.0;
    c.yaw_rate_noise_sigma = 0.0;
    return c;
}

/// Short sequences so that pipeline tests stay fast.
inline PipelineConfig small_pipeline(double duration = 6.0) {
    PipelineConfig c = parse_config("");
    c.scenario.duration = duration;
    c.boosting.rounds = 30;
    c.training_stride = 10;
    return c;
}

inline std::vector<LabeledSequence> valid_only(std::vector<LabeledSequence> all) {
    std::erase_if(all, [](const LabeledSequence& s) { return !s.valid; });
    return all;
}

} // namespace egolane::testing
