#pragma once

#include "gsim/rng.hpp"

#include <cstdint>

// Count draws shared by the interpreter and the hand-coded environments. Inputs are
// clipped before drawing: probabilities to [0, 1], rates and means to >= 0.
namespace gsim::sampling {

inline constexpr double kMaxRate = 1e9;

/// llround(clip(v, 0, kMaxRate)); NaN -> 0.
[[nodiscard]] std::int64_t to_count(double v) noexcept;
/// Truncation toward zero, saturated to the int64 range; NaN -> 0.
[[nodiscard]] std::int64_t truncate(double v) noexcept;

std::int64_t binomial(RngStream& rng, double n, double p);
std::int64_t poisson(RngStream& rng, double rate);
std::int64_t negative_binomial(RngStream& rng, double mean, double dispersion);
/// max(floor, trunc(Normal(mean, stdev))).
std::int64_t normal_count(RngStream& rng, double mean, double stdev, std::int64_t floor);
[[nodiscard]] std::int64_t deterministic(double value) noexcept;

} // namespace gsim::sampling
