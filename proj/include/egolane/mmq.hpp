#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "egolane/errors.hpp"
#include "egolane/sim.hpp"
#include "egolane/tracker.hpp"

namespace egolane {

inline constexpr double kMmqCap = 10.0;
inline constexpr double kMmqFloor = 1e-9;
inline constexpr std::size_t kNumChannels = 8;

/// Slot order: four geometry channels then four type channels, each in Marking order.
constexpr std::size_t geometry_channel(Marking m) { return static_cast<std::size_t>(m); }
constexpr std::size_t type_channel(Marking m) { return kNumMarkings + static_cast<std::size_t>(m); }

struct MmqFrame {
    int t = 0;
    std::array<std::optional<double>, kNumChannels> channels;

    bool operator==(const MmqFrame&) const = default;
};

using MmqSeries = std::vector<MmqFrame>;

struct Chi2Params {
    double p = 0.95;
    int dof = 1;
};

/// Normalized innovation squared r^T S^-1 r.
template <typename DerivedR, typename DerivedS>
typename DerivedR::Scalar nis(const Eigen::MatrixBase<DerivedR>& residual, const Eigen::MatrixBase<DerivedS>& S) {
    using Scalar = typename DerivedR::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (residual.cols() != 1 || S.rows() != residual.rows() || S.cols() != residual.rows()) {
        throw PreconditionError("nis: residual and innovation covariance dimensions differ");
    }
    if (residual.rows() == 0) {
        return Scalar(0);
    }
    const Matrix cov = S;
    const Scalar scale = cov.cwiseAbs().maxCoeff();
    if (!((cov - cov.transpose()).cwiseAbs().maxCoeff() <= Scalar(1e-12) * scale)) {
        throw DomainError("nis: innovation covariance is not symmetric");
    }
    const Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw DomainError("nis: innovation covariance is not positive definite");
    }
    const auto r = residual.template cast<Scalar>().eval();
    const Scalar value = r.dot(llt.solve(r));
    return value < Scalar(0) ? Scalar(0) : value;
}

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);

/// Chi-square CDF with `dof` degrees of freedom.
double chi2_cdf(double x, int dof);

/// Inverse chi-square CDF. Domain: 0 <= p < 1, dof >= 1.
double chi2inv(double p, int dof);

/// -log(max(nis + penalty, floor) / chi2inv(p, dof)), clamped to +/- kMmqCap.
/// Throws DomainError when dof is zero.
double mmq(double nis, double penalty, const Chi2Params& params);

/// One chi2inv(p, 1) quantum per outlier.
double penalty(int outlier_count, const Chi2Params& params);

struct TypeNis {
    double nis = 0.0;
    int dof = 0;
};

/// Discrete-type pseudo-NIS: each mismatch costs chi2inv(p, 1). Empty when the lists are empty.
std::optional<TypeNis> type_pseudo_nis(std::span<const MarkingType> observed, std::span<const MarkingType> map_types,
                                       double p = 0.95);

/// Scores association results into an MmqFrame, caching chi-square quantiles.
class MmqScorer {
public:
    explicit MmqScorer(double p = 0.95);

    double probability() const { return p_; }
    double quantile(int dof) const;

    /// Normalized over all attempted samples (inliers plus outliers); empty when none were attempted.
    std::optional<double> geometry(const AssociationResult& assoc) const;
    double type(const TypeObservation& obs) const;
    MmqFrame score(int t, std::span<const AssociationResult> geometry, std::span<const TypeObservation> types) const;

private:
    double score_value(double nis, double penalty, int dof) const;

    double p_;
    std::vector<double> quantiles_;
};

} // namespace egolane
