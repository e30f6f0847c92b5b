#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace egolane {

using Rng = std::mt19937_64;

enum class MarkingType : std::uint8_t { Solid, Dashed, Double, BottsDots };

inline constexpr std::array<MarkingType, 4> kMarkingTypes = {
    MarkingType::Solid, MarkingType::Dashed, MarkingType::Double, MarkingType::BottsDots};

std::string_view to_string(MarkingType type);
MarkingType marking_type_from_string(std::string_view name);

/// The four perceived lane markings, relative to the lane the vehicle is in.
enum class Marking : std::uint8_t { EgoLeft, EgoRight, AdjacentLeft, AdjacentRight };

inline constexpr std::size_t kNumMarkings = 4;
inline constexpr std::array<Marking, kNumMarkings> kMarkings = {
    Marking::EgoLeft, Marking::EgoRight, Marking::AdjacentLeft, Marking::AdjacentRight};

std::string_view to_string(Marking marking);

/// Offset from lane index to the index of the boundary a marking refers to.
/// Boundaries are numbered right to left; lane i lies between boundary i and i + 1.
constexpr int boundary_offset(Marking marking) {
    switch (marking) {
    case Marking::EgoLeft: return 1;
    case Marking::EgoRight: return 0;
    case Marking::AdjacentLeft: return 2;
    case Marking::AdjacentRight: return -1;
    }
    return 0;
}

/// Forward ranges (m) at which marking points are sampled.
inline constexpr std::array<double, 10> kLookaheads = {5, 10, 15, 20, 25, 30, 35, 40, 45, 50};

inline constexpr double kSampleRate = 40.0;
inline constexpr double kDriftAmplitude = 0.4;
inline constexpr double kDriftFrequency = 0.05;

struct ScenarioConfig {
    int num_lanes = 4;
    double lane_width = 3.5;
    double duration = 30.0;
    double sample_rate = kSampleRate;
    double point_noise_sigma = 0.1;
    double type_confusion_prob = 0.1;
    double gnss_bias_range = 1.5 * 3.5;
    double gnss_noise_sigma = 0.5;
    double missing_prob = 0.5;
    /// Time constant (s) over which dropouts and type confusions persist; 0 draws them
    /// independently every frame. Per-frame rates stay missing_prob and type_confusion_prob.
    double perception_persistence = 0.5;
    double map_extent = 1000.0;
    double ego_speed = 25.0;
    double speed_noise_sigma = 0.05;
    double yaw_rate_noise_sigma = 1e-4;
    std::uint64_t seed = 1;

    bool operator==(const ScenarioConfig&) const = default;
};

/// Throws ConfigError naming the first invalid field.
void validate(const ScenarioConfig& config);

/// Station-parameterized polyline: lateral offset (m) as a function of station (m).
struct Polyline {
    std::vector<double> stations;
    std::vector<double> laterals;

    /// Linear interpolation; empty outside the mapped station range.
    std::optional<double> lateral_at(double station) const;

    bool operator==(const Polyline&) const = default;
};

struct MapModel {
    std::vector<Polyline> boundaries;
    std::vector<MarkingType> boundary_types;
    double map_extent = 0.0;
    double lane_width = 0.0;

    int num_lanes() const { return static_cast<int>(boundaries.size()) - 1; }
    bool has_boundary(int index) const { return index >= 0 && index < static_cast<int>(boundaries.size()); }
    std::optional<double> boundary_lateral(int index, double station) const;
    /// Midpoint between the lane's bounding polylines.
    double lane_center(int lane, double station) const;
    bool on_map(double station) const { return station >= 0.0 && station <= map_extent; }

    bool operator==(const MapModel&) const = default;
};

/// Straight corridor with outer boundaries solid and inner ones dashed; one boundary,
/// chosen with `rng`, gets a distinct type (double or botts-dots).
MapModel build_map(const ScenarioConfig& config, Rng& rng);

struct PerceivedMarking {
    /// (forward m, lateral m) in the vehicle frame.
    std::optional<std::vector<Eigen::Vector2d>> points;
    std::optional<MarkingType> type;

    bool operator==(const PerceivedMarking&) const = default;
};

using Perception = std::array<PerceivedMarking, kNumMarkings>;

struct GnssFix {
    double station = 0.0;
    double lateral = 0.0;
    bool operator==(const GnssFix&) const = default;
};

struct Odometry {
    double speed = 0.0;
    double yaw_rate = 0.0;
    bool operator==(const Odometry&) const = default;
};

struct SensorFrame {
    int t = 0;
    Perception perceived;
    GnssFix gnss;
    /// Motion measured over [t, t + 1).
    Odometry odometry;

    bool operator==(const SensorFrame&) const = default;
};

struct Pose {
    double station = 0.0;
    double lateral = 0.0;
    double heading = 0.0;
    bool operator==(const Pose&) const = default;
};

struct SequenceRecord {
    int scenario_id = 0;
    ScenarioConfig config;
    MapModel map;
    std::vector<SensorFrame> frames;
    int truth_lane = 0;
    std::vector<Pose> truth_pose;

    bool operator==(const SequenceRecord&) const = default;
};

/// Lateral offset, in the vehicle frame, of the straight boundary `boundary_lateral`
/// seen at forward range `forward` from `pose`.
inline double vehicle_frame_offset(double boundary_lateral, const Pose& pose, double forward) {
    return (boundary_lateral - pose.lateral) / std::cos(pose.heading) - forward * std::tan(pose.heading);
}

/// Lane containing a global lateral position, clamped to the road.
int lane_of(const MapModel& map, double lateral);

/// Dropout and type-confusion outcomes of the previous frame, per marking.
struct PerceptionErrors {
    std::array<bool, kNumMarkings> geometry_dropped{};
    std::array<bool, kNumMarkings> type_dropped{};
    /// Misread type, empty when the type was read correctly.
    std::array<std::optional<MarkingType>, kNumMarkings> confused{};
    bool initialized = false;
};

/// Camera model. Off-map poses yield an all-missing perception. With `errors` and a
/// positive perception_persistence, each previous outcome is kept with probability
/// exp(-dt / persistence) and redrawn otherwise.
Perception perceive(const Pose& truth_pose, const MapModel& map, const ScenarioConfig& config, Rng& rng,
                    PerceptionErrors* errors = nullptr);

SequenceRecord generate_scenario(const ScenarioConfig& config, int scenario_id = 0);

/// Per-scenario seed derived from a benchmark seed.
std::uint64_t scenario_seed(std::uint64_t base_seed, int scenario_id);

} // namespace egolane
