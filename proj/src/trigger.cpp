#include "egolane/trigger.hpp"

#include <algorithm>
#include <string>

#include "egolane/errors.hpp"

namespace egolane {

namespace {

void require_variant(const TriggerParams& params, TriggerVariant expected, const char* name) {
    if (params.variant != expected || params.gamma.size() != gamma_size(expected)) {
        throw PreconditionError(std::string(name) + ": trigger parameters are for a different variant");
    }
}

} // namespace

std::string_view to_string(TriggerVariant variant) {
    switch (variant) {
    case TriggerVariant::S1: return "s1";
    case TriggerVariant::S2: return "s2";
    case TriggerVariant::S3: return "s3";
    case TriggerVariant::S4: return "s4";
    }
    return "unknown";
}

TriggerVariant trigger_variant_from_string(std::string_view name) {
    for (auto v : kTriggerVariants) {
        if (to_string(v) == name) {
            return v;
        }
    }
    throw ConfigError("variant", "unknown trigger variant '" + std::string(name) + "'");
}

void validate(const TriggerParams& params) {
    if (params.gamma.size() != gamma_size(params.variant)) {
        throw ConfigError("gamma", "expected " + std::to_string(gamma_size(params.variant)) + " components for " +
                                       std::string(to_string(params.variant)));
    }
    for (Eigen::Index i = 0; i < params.gamma.size(); ++i) {
        if (!(params.gamma(i) >= -1.0 && params.gamma(i) <= 1.0)) {
            throw ConfigError("gamma", "components must lie in [-1, 1]");
        }
    }
    if (uses_horizon(params.variant) && params.horizon < 1) {
        throw ConfigError("horizon", "must be at least 1");
    }
}

std::optional<SortedProbs> sort_probs(std::span<const std::pair<int, double>> probs, int t) {
    if (probs.empty()) {
        return std::nullopt;
    }
    SortedProbs out;
    out.t = t;
    const std::pair<int, double>* best = nullptr;
    for (const auto& entry : probs) {
        if (!best || entry.second > best->second || (entry.second == best->second && entry.first < best->first)) {
            best = &entry;
        }
    }
    out.argmax_id = best->first;
    out.p_prime = best->second;
    for (const auto& entry : probs) {
        if (&entry != best) {
            out.p_second = std::max(out.p_second, entry.second);
        }
    }
    return out;
}

bool s1(const SortedProbs& sp, const TriggerParams& params) {
    require_variant(params, TriggerVariant::S1, "s1");
    const auto& g = params.gamma;
    const double elapsed = std::min(static_cast<double>(sp.t) / params.horizon, 1.0);
    return g(0) * sp.p_prime + g(1) * (sp.p_prime - sp.p_second) + g(2) * elapsed > 0.0;
}

bool s2(const SortedProbs& sp, const TriggerParams& params) {
    require_variant(params, TriggerVariant::S2, "s2");
    const auto& g = params.gamma;
    const double remaining = std::max(static_cast<double>(params.horizon - sp.t) / params.horizon, 0.0);
    return g(0) * sp.p_prime + g(1) * sp.p_second + g(2) * remaining > 0.0;
}

bool s3(const SortedProbs& sp, const TriggerParams& params) {
    require_variant(params, TriggerVariant::S3, "s3");
    const auto& g = params.gamma;
    return g(0) * sp.p_prime + g(1) * (sp.p_prime - sp.p_second) + g(2) > 0.0;
}

bool s4(const SortedProbs& sp, const TriggerParams& params) {
    require_variant(params, TriggerVariant::S4, "s4");
    const auto& g = params.gamma;
    return g(0) * sp.p_prime + g(1) * (sp.p_prime - sp.p_second) > 0.0;
}

bool fire(const SortedProbs& sp, const TriggerParams& params) {
    switch (params.variant) {
    case TriggerVariant::S1: return s1(sp, params);
    case TriggerVariant::S2: return s2(sp, params);
    case TriggerVariant::S3: return s3(sp, params);
    case TriggerVariant::S4: return s4(sp, params);
    }
    return false;
}

} // namespace egolane
