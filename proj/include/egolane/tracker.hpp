#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "egolane/sim.hpp"

namespace egolane {

/// Filter tuning. Defaults are scaled to highway lane geometry.
struct TrackerParams {
    double gate = 0.9;
    double r_floor = 1e-4;
    double q_lateral = 0.01;
    double q_heading = 0.001;
    double p0_lateral = 0.25;
    double p0_heading = 0.01;
    /// Assumed per-point lateral noise of the camera (m).
    double measurement_sigma = 0.1;
    int max_hypotheses = 6;

    bool operator==(const TrackerParams&) const = default;
};

void validate(const TrackerParams& params);

/// In-lane state: lateral offset from the assigned lane center (m, left positive) and heading (rad).
using State = Eigen::Vector2d;
using Covariance = Eigen::Matrix2d;

struct Hypothesis {
    int id = 0;
    int lane_index = 0;
    State state = State::Zero();
    Covariance covariance = Covariance::Identity();
    bool active = true;
};

/// Pre-update innovation statistics of one geometry marking channel.
struct AssociationResult {
    Marking channel = Marking::EgoLeft;
    /// Inlier residuals, perceived minus predicted.
    Eigen::VectorXd residual;
    /// H P H^T + R over the inliers.
    Eigen::MatrixXd innovation_cov;
    /// d(predicted)/d(state) for each inlier.
    Eigen::Matrix<double, Eigen::Dynamic, 2> jacobian;
    /// Diagonal of R for each inlier.
    Eigen::VectorXd noise;
    int outlier_count = 0;
    int dof = 0;

    int attempted() const { return dof + outlier_count; }
};

/// Expected versus observed marking type for one channel.
struct TypeObservation {
    Marking channel = Marking::EgoLeft;
    MarkingType observed = MarkingType::Solid;
    /// Empty when the hypothesis's lane has no boundary for this channel.
    std::optional<MarkingType> expected;
};

/// One hypothesis per lane, nearest lane center to the GNSS fix first, truncated at K.
std::vector<Hypothesis> generate_hypotheses(const GnssFix& gnss, const MapModel& map, int max_hypotheses,
                                            const TrackerParams& params = {});

/// Dead-reckoning step. Throws StateError for an inactive hypothesis.
Hypothesis predict(const Hypothesis& h, const Odometry& odometry, double dt, const TrackerParams& params = {});

/// Global lateral position implied by a hypothesis.
double implied_lateral(const Hypothesis& h, const MapModel& map, double station);

/// Predicted vehicle-frame offset of a boundary and its state Jacobian.
struct MarkingPrediction {
    double offset = 0.0;
    Eigen::RowVector2d jacobian = Eigen::RowVector2d::Zero();
};
MarkingPrediction predict_marking(const Hypothesis& h, double boundary_lateral, double lane_center, double forward);

/// Gated association of every present geometry channel against the hypothesis's lane.
std::vector<AssociationResult> associate(const Perception& perception, const MapModel& map, const Hypothesis& h,
                                         double station, const TrackerParams& params = {});

std::vector<TypeObservation> match_types(const Perception& perception, const MapModel& map, const Hypothesis& h);

struct UpdateResult {
    Hypothesis hypothesis;
    /// Pre-update statistics for every associated channel, adjacent ones included.
    std::vector<AssociationResult> summaries;
};

/// Kalman update from ego-lane geometry inliers only.
UpdateResult update(const Hypothesis& h, std::vector<AssociationResult> associations);

/// Permanently deactivates a hypothesis that leaves the map or drifts out of its lane.
Hypothesis deactivate_if_off_map(const Hypothesis& h, const MapModel& map, double station);

} // namespace egolane
