#include "egolane/mmq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace egolane {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxIterations = 500;

double gamma_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < kMaxIterations; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps) {
            break;
        }
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
double gamma_continued_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIterations; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) {
            d = tiny;
        }
        c = b + an / c;
        if (std::abs(c) < tiny) {
            c = tiny;
        }
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) {
            break;
        }
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double chi2_pdf(double x, int dof) {
    if (x <= 0.0) {
        return 0.0;
    }
    const double k = 0.5 * dof;
    return std::exp((k - 1.0) * std::log(x) - 0.5 * x - k * std::log(2.0) - std::lgamma(k));
}

} // namespace

double regularized_gamma_p(double a, double x) {
    if (!(a > 0.0)) {
        throw DomainError("regularized_gamma_p: shape must be positive");
    }
    if (std::isnan(x)) {
        throw DomainError("regularized_gamma_p: x is NaN");
    }
    if (x <= 0.0) {
        return 0.0;
    }
    if (std::isinf(x)) {
        return 1.0;
    }
    if (x < a + 1.0) {
        return std::min(1.0, gamma_series(a, x));
    }
    return std::max(0.0, 1.0 - gamma_continued_fraction(a, x));
}

double chi2_cdf(double x, int dof) {
    if (dof < 1) {
        throw DomainError("chi2_cdf: dof must be at least 1");
    }
    return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

double chi2inv(double p, int dof) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw DomainError("chi2inv: probability must lie in [0, 1), got " + std::to_string(p));
    }
    if (dof < 1) {
        throw DomainError("chi2inv: dof must be at least 1, got " + std::to_string(dof));
    }
    if (p == 0.0) {
        return 0.0;
    }

    double lo = 0.0;
    double hi = std::max(1.0, static_cast<double>(dof));
    while (chi2_cdf(hi, dof) < p) {
        lo = hi;
        hi *= 2.0;
    }

    // Newton steps, falling back to bisection whenever a step leaves the bracket.
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < kMaxIterations; ++i) {
        const double f = chi2_cdf(x, dof) - p;
        if (f == 0.0) {
            return x;
        }
        if (f < 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        const double slope = chi2_pdf(x, dof);
        double next = slope > 0.0 ? x - f / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        if (std::abs(next - x) <= 4.0 * kEps * std::max(1.0, x)) {
            return next;
        }
        x = next;
    }
    return x;
}

double mmq(double nis, double penalty, const Chi2Params& params) {
    if (params.dof < 1) {
        throw DomainError("mmq: no associated samples (dof 0)");
    }
    if (!(nis >= 0.0) || !(penalty >= 0.0)) {
        throw DomainError("mmq: nis and penalty must be non-negative");
    }
    const double ratio = std::max(nis + penalty, kMmqFloor) / chi2inv(params.p, params.dof);
    return std::clamp(-std::log(ratio), -kMmqCap, kMmqCap);
}

double penalty(int outlier_count, const Chi2Params& params) {
    if (outlier_count < 0) {
        throw DomainError("penalty: negative outlier count");
    }
    if (outlier_count == 0) {
        return 0.0;
    }
    return outlier_count * chi2inv(params.p, 1);
}

std::optional<TypeNis> type_pseudo_nis(std::span<const MarkingType> observed, std::span<const MarkingType> map_types,
                                       double p) {
    if (observed.size() != map_types.size()) {
        throw PreconditionError("type_pseudo_nis: observed and map type lists differ in length");
    }
    if (observed.empty()) {
        return std::nullopt;
    }
    const double quantum = chi2inv(p, 1);
    TypeNis out;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (observed[i] != map_types[i]) {
            out.nis += quantum;
        }
    }
    out.dof = static_cast<int>(observed.size());
    return out;
}

MmqScorer::MmqScorer(double p) : p_(p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw ConfigError("chi2_probability", "must lie in (0, 1)");
    }
    quantiles_.resize(65);
    for (int d = 1; d < static_cast<int>(quantiles_.size()); ++d) {
        quantiles_[static_cast<std::size_t>(d)] = chi2inv(p_, d);
    }
}

double MmqScorer::quantile(int dof) const {
    if (dof >= 1 && dof < static_cast<int>(quantiles_.size())) {
        return quantiles_[static_cast<std::size_t>(dof)];
    }
    return chi2inv(p_, dof);
}

double MmqScorer::score_value(double nis_value, double penalty_value, int dof) const {
    const double ratio = std::max(nis_value + penalty_value, kMmqFloor) / quantile(dof);
    return std::clamp(-std::log(ratio), -kMmqCap, kMmqCap);
}

std::optional<double> MmqScorer::geometry(const AssociationResult& assoc) const {
    const int attempted = assoc.attempted();
    if (attempted == 0) {
        return std::nullopt;
    }
    const double value = assoc.dof > 0 ? nis(assoc.residual, assoc.innovation_cov) : 0.0;
    return score_value(value, assoc.outlier_count * quantile(1), attempted);
}

double MmqScorer::type(const TypeObservation& obs) const {
    if (!obs.expected) {
        return score_value(0.0, quantile(1), 1);
    }
    const double mismatch = obs.observed == *obs.expected ? 0.0 : quantile(1);
    return score_value(mismatch, 0.0, 1);
}

MmqFrame MmqScorer::score(int t, std::span<const AssociationResult> geometry_results,
                          std::span<const TypeObservation> types) const {
    MmqFrame frame;
    frame.t = t;
    for (const auto& assoc : geometry_results) {
        frame.channels[geometry_channel(assoc.channel)] = geometry(assoc);
    }
    for (const auto& obs : types) {
        frame.channels[type_channel(obs.channel)] = type(obs);
    }
    return frame;
}

} // namespace egolane
