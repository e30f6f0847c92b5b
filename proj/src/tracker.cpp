#include "egolane/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>

#include "egolane/errors.hpp"

namespace egolane {

void validate(const TrackerParams& params) {
    auto positive = [](double v, const char* field) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError(field, "must be positive");
        }
    };
    positive(params.gate, "gate");
    positive(params.r_floor, "r_floor");
    positive(params.q_lateral, "q_lateral");
    positive(params.q_heading, "q_heading");
    positive(params.p0_lateral, "p0_lateral");
    positive(params.p0_heading, "p0_heading");
    if (!(params.measurement_sigma >= 0.0)) {
        throw ConfigError("measurement_sigma", "must be non-negative");
    }
    if (params.max_hypotheses < 1) {
        throw ConfigError("max_hypotheses", "must be at least 1");
    }
}

std::vector<Hypothesis> generate_hypotheses(const GnssFix& gnss, const MapModel& map, int max_hypotheses,
                                            const TrackerParams& params) {
    if (max_hypotheses < 1) {
        throw PreconditionError("generate_hypotheses: K must be at least 1");
    }
    const double station = std::clamp(gnss.station, 0.0, map.map_extent);
    std::vector<int> lanes(static_cast<std::size_t>(map.num_lanes()));
    std::iota(lanes.begin(), lanes.end(), 0);
    std::stable_sort(lanes.begin(), lanes.end(), [&](int a, int b) {
        return std::abs(gnss.lateral - map.lane_center(a, station)) < std::abs(gnss.lateral - map.lane_center(b, station));
    });
    lanes.resize(std::min(lanes.size(), static_cast<std::size_t>(max_hypotheses)));

    std::vector<Hypothesis> out;
    out.reserve(lanes.size());
    for (std::size_t i = 0; i < lanes.size(); ++i) {
        Hypothesis h;
        h.id = static_cast<int>(i);
        h.lane_index = lanes[i];
        h.state.setZero();
        h.covariance = Eigen::Vector2d(params.p0_lateral, params.p0_heading).asDiagonal();
        out.push_back(h);
    }
    return out;
}

Hypothesis predict(const Hypothesis& h, const Odometry& odometry, double dt, const TrackerParams& params) {
    if (!h.active) {
        throw StateError("predict: hypothesis " + std::to_string(h.id) + " is inactive");
    }
    if (!(dt > 0.0)) {
        throw PreconditionError("predict: dt must be positive");
    }
    Hypothesis out = h;
    const double heading = h.state(1);
    out.state(0) += odometry.speed * std::sin(heading) * dt;
    out.state(1) += odometry.yaw_rate * dt;

    Eigen::Matrix2d F = Eigen::Matrix2d::Identity();
    F(0, 1) = odometry.speed * std::cos(heading) * dt;
    const Eigen::Matrix2d Q = Eigen::Vector2d(params.q_lateral * dt, params.q_heading * dt).asDiagonal();
    out.covariance = F * h.covariance * F.transpose() + Q;
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
    return out;
}

double implied_lateral(const Hypothesis& h, const MapModel& map, double station) {
    return map.lane_center(h.lane_index, station) + h.state(0);
}

MarkingPrediction predict_marking(const Hypothesis& h, double boundary_lateral, double lane_center, double forward) {
    const double relative = boundary_lateral - lane_center - h.state(0);
    const double c = std::cos(h.state(1));
    const double s = std::sin(h.state(1));
    MarkingPrediction out;
    out.offset = relative / c - forward * (s / c);
    out.jacobian(0) = -1.0 / c;
    out.jacobian(1) = (relative * s - forward) / (c * c);
    return out;
}

std::vector<AssociationResult> associate(const Perception& perception, const MapModel& map, const Hypothesis& h,
                                         double station, const TrackerParams& params) {
    if (!h.active) {
        throw StateError("associate: hypothesis " + std::to_string(h.id) + " is inactive");
    }
    const double r = std::max(params.measurement_sigma * params.measurement_sigma, params.r_floor);
    const double center = map.lane_center(h.lane_index, station);

    std::vector<AssociationResult> out;
    for (auto marking : kMarkings) {
        const auto& points = perception[static_cast<std::size_t>(marking)].points;
        if (!points || points->empty()) {
            continue;
        }
        AssociationResult result;
        result.channel = marking;
        const auto boundary = map.boundary_lateral(h.lane_index + boundary_offset(marking), station);
        if (!boundary) {
            result.outlier_count = static_cast<int>(points->size());
            result.residual.resize(0);
            result.innovation_cov.resize(0, 0);
            result.jacobian.resize(0, 2);
            result.noise.resize(0);
            out.push_back(std::move(result));
            continue;
        }

        std::vector<double> residuals;
        std::vector<Eigen::RowVector2d> rows;
        for (const auto& point : *points) {
            const auto pred = predict_marking(h, *boundary, center, point.x());
            const double residual = point.y() - pred.offset;
            if (std::abs(residual) > params.gate) {
                ++result.outlier_count;
                continue;
            }
            residuals.push_back(residual);
            rows.push_back(pred.jacobian);
        }
        const auto n = static_cast<Eigen::Index>(residuals.size());
        result.dof = static_cast<int>(n);
        result.residual = Eigen::Map<const Eigen::VectorXd>(residuals.data(), n);
        result.jacobian.resize(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            result.jacobian.row(i) = rows[static_cast<std::size_t>(i)];
        }
        result.noise = Eigen::VectorXd::Constant(n, r);
        result.innovation_cov = result.jacobian * h.covariance * result.jacobian.transpose();
        result.innovation_cov.diagonal() += result.noise;
        out.push_back(std::move(result));
    }
    return out;
}

std::vector<TypeObservation> match_types(const Perception& perception, const MapModel& map, const Hypothesis& h) {
    std::vector<TypeObservation> out;
    for (auto marking : kMarkings) {
        const auto& type = perception[static_cast<std::size_t>(marking)].type;
        if (!type) {
            continue;
        }
        TypeObservation obs;
        obs.channel = marking;
        obs.observed = *type;
        const int boundary = h.lane_index + boundary_offset(marking);
        if (map.has_boundary(boundary)) {
            obs.expected = map.boundary_types[static_cast<std::size_t>(boundary)];
        }
        out.push_back(obs);
    }
    return out;
}

UpdateResult update(const Hypothesis& h, std::vector<AssociationResult> associations) {
    if (!h.active) {
        throw StateError("update: hypothesis " + std::to_string(h.id) + " is inactive");
    }
    UpdateResult out{h, std::move(associations)};

    Eigen::Index rows = 0;
    for (const auto& a : out.summaries) {
        if (a.channel == Marking::EgoLeft || a.channel == Marking::EgoRight) {
            rows += a.residual.size();
        }
    }
    if (rows == 0) {
        return out;
    }

    Eigen::VectorXd residual(rows);
    Eigen::Matrix<double, Eigen::Dynamic, 2> H(rows, 2);
    Eigen::VectorXd noise(rows);
    Eigen::Index offset = 0;
    for (const auto& a : out.summaries) {
        if (a.channel != Marking::EgoLeft && a.channel != Marking::EgoRight) {
            continue;
        }
        const auto n = a.residual.size();
        residual.segment(offset, n) = a.residual;
        H.middleRows(offset, n) = a.jacobian;
        noise.segment(offset, n) = a.noise;
        offset += n;
    }

    const Covariance& P = h.covariance;
    Eigen::MatrixXd S = H * P * H.transpose();
    S.diagonal() += noise;
    const Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) {
        throw DomainError("update: innovation covariance is not positive definite");
    }
    const Eigen::Matrix<double, 2, Eigen::Dynamic> K = llt.solve(H * P).transpose();
    out.hypothesis.state = h.state + K * residual;

    // Joseph form.
    const Eigen::Matrix2d IKH = Eigen::Matrix2d::Identity() - K * H;
    Covariance posterior = IKH * P * IKH.transpose() + K * noise.asDiagonal() * K.transpose();
    out.hypothesis.covariance = 0.5 * (posterior + posterior.transpose());
    return out;
}

Hypothesis deactivate_if_off_map(const Hypothesis& h, const MapModel& map, double station) {
    Hypothesis out = h;
    if (!out.active) {
        return out;
    }
    if (station > map.map_extent || std::abs(out.state(0)) > 2.0 * map.lane_width) {
        out.active = false;
    }
    return out;
}

} // namespace egolane
