#include "egolane/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "egolane/errors.hpp"

namespace egolane {

namespace {

double gaussian(Rng& rng, double sigma) {
    if (sigma <= 0.0) {
        return 0.0;
    }
    return std::normal_distribution<double>(0.0, sigma)(rng);
}

double uniform(Rng& rng, double lo, double hi) {
    if (!(hi > lo)) {
        return lo;
    }
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool bernoulli(Rng& rng, double p) {
    if (p <= 0.0) {
        return false;
    }
    if (p >= 1.0) {
        return true;
    }
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

void require_probability(double p, const char* field) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw ConfigError(field, "must be a probability in [0, 1], got " + std::to_string(p));
    }
}

void require_non_negative(double v, const char* field) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ConfigError(field, "must be finite and non-negative, got " + std::to_string(v));
    }
}

} // namespace

std::string_view to_string(MarkingType type) {
    switch (type) {
    case MarkingType::Solid: return "solid";
    case MarkingType::Dashed: return "dashed";
    case MarkingType::Double: return "double";
    case MarkingType::BottsDots: return "botts-dots";
    }
    return "unknown";
}

MarkingType marking_type_from_string(std::string_view name) {
    for (auto type : kMarkingTypes) {
        if (to_string(type) == name) {
            return type;
        }
    }
    throw DomainError("unknown lane marking type '" + std::string(name) + "'");
}

std::string_view to_string(Marking marking) {
    switch (marking) {
    case Marking::EgoLeft: return "ego-left";
    case Marking::EgoRight: return "ego-right";
    case Marking::AdjacentLeft: return "adjacent-left";
    case Marking::AdjacentRight: return "adjacent-right";
    }
    return "unknown";
}

void validate(const ScenarioConfig& config) {
    if (config.num_lanes < 2) {
        throw ConfigError("num_lanes", "must be at least 2, got " + std::to_string(config.num_lanes));
    }
    if (config.num_lanes > 8) {
        throw ConfigError("num_lanes", "must be at most 8, got " + std::to_string(config.num_lanes));
    }
    if (!(config.lane_width > 0.0) || !std::isfinite(config.lane_width)) {
        throw ConfigError("lane_width", "must be positive");
    }
    if (!(config.duration > 0.0) || !std::isfinite(config.duration)) {
        throw ConfigError("duration", "must be positive");
    }
    if (config.sample_rate != kSampleRate) {
        throw ConfigError("sample_rate", "is fixed at 40 Hz");
    }
    require_non_negative(config.point_noise_sigma, "point_noise_sigma");
    require_probability(config.type_confusion_prob, "type_confusion_prob");
    require_non_negative(config.gnss_bias_range, "gnss_bias_range");
    require_non_negative(config.gnss_noise_sigma, "gnss_noise_sigma");
    require_probability(config.missing_prob, "missing_prob");
    require_non_negative(config.perception_persistence, "perception_persistence");
    if (!(config.map_extent > 0.0) || !std::isfinite(config.map_extent)) {
        throw ConfigError("map_extent", "must be positive");
    }
    if (!(config.ego_speed > 0.0) || !std::isfinite(config.ego_speed)) {
        throw ConfigError("ego_speed", "must be positive");
    }
    require_non_negative(config.speed_noise_sigma, "speed_noise_sigma");
    require_non_negative(config.yaw_rate_noise_sigma, "yaw_rate_noise_sigma");
}

std::optional<double> Polyline::lateral_at(double station) const {
    if (stations.empty() || station < stations.front() || station > stations.back()) {
        return std::nullopt;
    }
    auto upper = std::upper_bound(stations.begin(), stations.end(), station);
    if (upper == stations.end()) {
        return laterals.back();
    }
    const auto i = static_cast<std::size_t>(upper - stations.begin());
    if (i == 0) {
        return laterals.front();
    }
    const double s0 = stations[i - 1];
    const double s1 = stations[i];
    const double w = (station - s0) / (s1 - s0);
    return laterals[i - 1] + w * (laterals[i] - laterals[i - 1]);
}

std::optional<double> MapModel::boundary_lateral(int index, double station) const {
    if (!has_boundary(index)) {
        return std::nullopt;
    }
    return boundaries[static_cast<std::size_t>(index)].lateral_at(station);
}

double MapModel::lane_center(int lane, double station) const {
    const double clamped = std::clamp(station, 0.0, map_extent);
    return 0.5 * (*boundary_lateral(lane, clamped) + *boundary_lateral(lane + 1, clamped));
}

int lane_of(const MapModel& map, double lateral) {
    const int lane = static_cast<int>(std::floor(lateral / map.lane_width));
    return std::clamp(lane, 0, map.num_lanes() - 1);
}

MapModel build_map(const ScenarioConfig& config, Rng& rng) {
    MapModel map;
    map.map_extent = config.map_extent;
    map.lane_width = config.lane_width;
    const int count = config.num_lanes + 1;
    for (int j = 0; j < count; ++j) {
        const double lateral = j * config.lane_width;
        map.boundaries.push_back(Polyline{{0.0, config.map_extent}, {lateral, lateral}});
        const bool outer = j == 0 || j == count - 1;
        map.boundary_types.push_back(outer ? MarkingType::Solid : MarkingType::Dashed);
    }
    const auto distinct = std::uniform_int_distribution<int>(0, count - 1)(rng);
    const auto kind = std::uniform_int_distribution<int>(0, 1)(rng);
    map.boundary_types[static_cast<std::size_t>(distinct)] = kind == 0 ? MarkingType::Double : MarkingType::BottsDots;
    return map;
}

namespace {

std::optional<MarkingType> draw_confusion(MarkingType actual, double prob, Rng& rng) {
    if (!bernoulli(rng, prob)) {
        return std::nullopt;
    }
    std::array<MarkingType, 3> others{};
    std::size_t n = 0;
    for (auto type : kMarkingTypes) {
        if (type != actual) {
            others[n++] = type;
        }
    }
    return others[std::uniform_int_distribution<std::size_t>(0, 2)(rng)];
}

} // namespace

Perception perceive(const Pose& truth_pose, const MapModel& map, const ScenarioConfig& config, Rng& rng,
                    PerceptionErrors* errors) {
    Perception out;
    if (!map.on_map(truth_pose.station)) {
        return out;
    }
    const bool persistent = errors != nullptr && config.perception_persistence > 0.0;
    const double keep = persistent ? std::exp(-1.0 / (config.sample_rate * config.perception_persistence)) : 0.0;
    auto redraw = [&] { return !persistent || !errors->initialized || !bernoulli(rng, keep); };

    const int lane = lane_of(map, truth_pose.lateral);
    for (auto marking : kMarkings) {
        const auto m = static_cast<std::size_t>(marking);
        const int boundary = lane + boundary_offset(marking);
        const auto lateral = map.boundary_lateral(boundary, truth_pose.station);
        if (!lateral) {
            continue;
        }
        const auto actual = map.boundary_types[static_cast<std::size_t>(boundary)];
        bool geometry_dropped = persistent ? errors->geometry_dropped[m] : false;
        bool type_dropped = persistent ? errors->type_dropped[m] : false;
        std::optional<MarkingType> confused = persistent ? errors->confused[m] : std::nullopt;
        if (redraw()) {
            geometry_dropped = bernoulli(rng, config.missing_prob);
        }
        if (redraw()) {
            type_dropped = bernoulli(rng, config.missing_prob);
        }
        if (redraw()) {
            confused = draw_confusion(actual, config.type_confusion_prob, rng);
        }
        if (persistent) {
            errors->geometry_dropped[m] = geometry_dropped;
            errors->type_dropped[m] = type_dropped;
            errors->confused[m] = confused;
        }

        auto& slot = out[m];
        if (!geometry_dropped) {
            std::vector<Eigen::Vector2d> points;
            points.reserve(kLookaheads.size());
            for (double forward : kLookaheads) {
                const double offset = vehicle_frame_offset(*lateral, truth_pose, forward);
                points.emplace_back(forward, offset + gaussian(rng, config.point_noise_sigma));
            }
            slot.points = std::move(points);
        }
        if (!type_dropped) {
            slot.type = confused.value_or(actual);
        }
    }
    if (persistent) {
        errors->initialized = true;
    }
    return out;
}

std::uint64_t scenario_seed(std::uint64_t base_seed, int scenario_id) {
    // splitmix64 finalizer
    std::uint64_t z = base_seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(scenario_id) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

SequenceRecord generate_scenario(const ScenarioConfig& config, int scenario_id) {
    validate(config);
    Rng rng(config.seed);

    SequenceRecord seq;
    seq.scenario_id = scenario_id;
    seq.config = config;
    seq.map = build_map(config, rng);
    seq.truth_lane = std::uniform_int_distribution<int>(0, config.num_lanes - 1)(rng);

    const double dt = 1.0 / config.sample_rate;
    const double omega = 2.0 * std::numbers::pi * kDriftFrequency;
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double bias = uniform(rng, -config.gnss_bias_range, config.gnss_bias_range);
    const auto max_frames = static_cast<int>(std::floor(config.duration * config.sample_rate + 1e-9));

    // Lateral drift is exact at every sample; heading is the one that makes the
    // discrete motion model lateral += v sin(heading) dt reproduce it.
    auto drift = [&](int k) { return kDriftAmplitude * std::sin(omega * k * dt + phase); };
    auto heading = [&](int k) {
        const double ratio = (drift(k + 1) - drift(k)) / (config.ego_speed * dt);
        return std::asin(std::clamp(ratio, -1.0, 1.0));
    };

    const double center = seq.map.lane_center(seq.truth_lane, 0.0);
    double station = 0.0;
    PerceptionErrors errors;
    for (int k = 0; k < max_frames; ++k) {
        if (station > config.map_extent) {
            break;
        }
        const Pose pose{station, center + drift(k), heading(k)};
        SensorFrame frame;
        frame.t = k;
        frame.perceived = perceive(pose, seq.map, config, rng, &errors);
        frame.gnss.station = pose.station + gaussian(rng, config.gnss_noise_sigma);
        frame.gnss.lateral = pose.lateral + bias + gaussian(rng, config.gnss_noise_sigma);
        frame.odometry.speed = config.ego_speed + gaussian(rng, config.speed_noise_sigma);
        frame.odometry.yaw_rate = (heading(k + 1) - heading(k)) / dt + gaussian(rng, config.yaw_rate_noise_sigma);
        seq.truth_pose.push_back(pose);
        seq.frames.push_back(std::move(frame));
        station += config.ego_speed * std::cos(pose.heading) * dt;
    }
    return seq;
}

} // namespace egolane
