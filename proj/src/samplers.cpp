#include "gsim/samplers.hpp"

#include <algorithm>
#include <cmath>

namespace gsim::sampling {

namespace {
double clean(double v, double hi) noexcept {
    if (std::isnan(v) || v < 0.0) return 0.0;
    return std::min(v, hi);
}
} // namespace

std::int64_t to_count(double v) noexcept { return std::llround(clean(v, kMaxRate)); }

std::int64_t truncate(double v) noexcept {
    if (std::isnan(v)) return 0;
    constexpr double lim = 9.0e18;
    return static_cast<std::int64_t>(std::clamp(std::trunc(v), -lim, lim));
}

std::int64_t binomial(RngStream& rng, double n, double p) {
    const double pc = std::isnan(p) ? 0.0 : std::clamp(p, 0.0, 1.0);
    return rng.binomial(to_count(n), pc);
}

std::int64_t poisson(RngStream& rng, double rate) { return rng.poisson(clean(rate, kMaxRate)); }

std::int64_t negative_binomial(RngStream& rng, double mean, double dispersion) {
    const double m = clean(mean, kMaxRate);
    const double r = std::max(clean(dispersion, kMaxRate), 1e-9);
    return rng.negative_binomial(m, r);
}

std::int64_t normal_count(RngStream& rng, double mean, double stdev, std::int64_t floor) {
    const double m = std::isnan(mean) ? 0.0 : std::clamp(mean, -kMaxRate, kMaxRate);
    const double s = clean(stdev, kMaxRate);
    return std::max(floor, truncate(rng.normal(m, s)));
}

std::int64_t deterministic(double value) noexcept { return to_count(value); }

} // namespace gsim::sampling
