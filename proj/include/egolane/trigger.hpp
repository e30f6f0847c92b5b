#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <utility>

#include <Eigen/Core>

namespace egolane {

enum class TriggerVariant { S1, S2, S3, S4 };

inline constexpr std::array<TriggerVariant, 4> kTriggerVariants = {TriggerVariant::S1, TriggerVariant::S2,
                                                                   TriggerVariant::S3, TriggerVariant::S4};

std::string_view to_string(TriggerVariant variant);
TriggerVariant trigger_variant_from_string(std::string_view name);

/// Number of gamma components a variant uses.
constexpr int gamma_size(TriggerVariant v) { return v == TriggerVariant::S4 ? 2 : 3; }
constexpr bool uses_horizon(TriggerVariant v) { return v == TriggerVariant::S1 || v == TriggerVariant::S2; }

/// 30 s at 40 Hz.
inline constexpr int kDefaultHorizon = 1200;

struct TriggerParams {
    TriggerVariant variant = TriggerVariant::S4;
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(2);
    int horizon = kDefaultHorizon;
};

/// Throws ConfigError on a gamma of the wrong length, components outside [-1, 1], or horizon < 1.
void validate(const TriggerParams& params);

struct SortedProbs {
    double p_prime = 0.0;
    double p_second = 0.0;
    int argmax_id = -1;
    int t = 0;
};

/// Highest and second-highest probabilities over (hypothesis id, probability) pairs.
/// Ties go to the lower id; p_second is 0 with a single hypothesis; empty input gives nothing.
std::optional<SortedProbs> sort_probs(std::span<const std::pair<int, double>> probs, int t);

// Each returns true ("predict now") iff its linear form is strictly positive.
bool s1(const SortedProbs& sp, const TriggerParams& params);
bool s2(const SortedProbs& sp, const TriggerParams& params);
bool s3(const SortedProbs& sp, const TriggerParams& params);
bool s4(const SortedProbs& sp, const TriggerParams& params);

/// Dispatches on params.variant.
bool fire(const SortedProbs& sp, const TriggerParams& params);

} // namespace egolane
