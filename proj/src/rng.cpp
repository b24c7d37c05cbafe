#include "gsim/rng.hpp"

#include "gsim/errors.hpp"

#include <boost/random/binomial_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace gsim {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t absorb(std::uint64_t partial, std::uint32_t element, std::size_t position) noexcept {
    return mix64(partial + kGolden * (static_cast<std::uint64_t>(element) + 1) + (static_cast<std::uint64_t>(position) << 40));
}

std::uint64_t root(std::uint64_t seed) noexcept { return mix64(seed ^ 0x6A09E667F3BCC908ULL); }

// length tag keeps [a] and [a, 0] apart
std::uint64_t finish(std::uint64_t partial, std::size_t depth) noexcept {
    return mix64(partial ^ (0xBB67AE8584CAA73BULL * (depth + 1)));
}

std::uint64_t absorb_all(std::uint64_t partial, std::size_t depth, std::span<const std::uint32_t> path) noexcept {
    for (std::size_t i = 0; i < path.size(); ++i) partial = absorb(partial, path[i], depth + i);
    return partial;
}

} // namespace

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::initializer_list<std::uint32_t> path) noexcept {
    return finish(absorb_all(root(master_seed), 0, std::span<const std::uint32_t>(path.begin(), path.size())),
                  path.size());
}

RngStream::RngStream(std::uint64_t master_seed, std::span<const std::uint32_t> path)
    : RngStream(master_seed, absorb_all(root(master_seed), 0, path), path.size()) {}

RngStream::RngStream(std::uint64_t seed, std::uint64_t partial, std::size_t depth) noexcept
    : seed_(seed), partial_(partial), depth_(depth), key_(finish(partial, depth)) {}

RngStream RngStream::at(std::uint64_t master_seed, std::span<const std::uint32_t> path,
                        std::initializer_list<std::uint32_t> extra) noexcept {
    const std::uint64_t partial = absorb_all(absorb_all(root(master_seed), 0, path), path.size(),
                                             std::span<const std::uint32_t>(extra.begin(), extra.size()));
    return RngStream(master_seed, partial, path.size() + extra.size());
}

RngStream RngStream::child(std::initializer_list<std::uint32_t> extra) const {
    return child(std::span<const std::uint32_t>(extra.begin(), extra.size()));
}

RngStream RngStream::child(std::span<const std::uint32_t> extra) const {
    return RngStream(seed_, absorb_all(partial_, depth_, extra), depth_ + extra.size());
}

RngStream::result_type RngStream::operator()() noexcept {
    ++counter_;
    return mix64(key_ + kGolden * counter_);
}

double RngStream::uniform01() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw DomainError("uniform_int: lo > hi");
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>((*this)());
    // rejection sampling keeps the draw unbiased
    const std::uint64_t limit = max() - max() % span;
    std::uint64_t x = (*this)();
    while (x >= limit) x = (*this)();
    return lo + static_cast<std::int64_t>(x % span);
}

std::int64_t RngStream::binomial(std::int64_t n, double p) {
    if (n < 0) throw DomainError("binomial: n = " + std::to_string(n) + " < 0");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binomial: p outside [0, 1]");
    if (n == 0 || p == 0.0) return 0;
    if (p == 1.0) return n;
    boost::random::binomial_distribution<std::int64_t, double> dist(n, p);
    return dist(*this);
}

std::int64_t RngStream::poisson(double rate) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw DomainError("poisson: rate must be finite and >= 0");
    if (rate == 0.0) return 0;
    std::poisson_distribution<std::int64_t> dist(rate);
    return dist(*this);
}

double RngStream::normal(double mean, double stdev) {
    if (!(stdev >= 0.0)) throw DomainError("normal: stdev must be >= 0");
    std::normal_distribution<double> dist(0.0, 1.0);
    return mean + stdev * dist(*this);
}

std::int64_t RngStream::negative_binomial(double mean, double dispersion) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) throw DomainError("negative_binomial: mean must be finite and >= 0");
    if (!(dispersion > 0.0)) throw DomainError("negative_binomial: dispersion must be > 0");
    if (mean == 0.0) return 0;
    std::gamma_distribution<double> gamma(dispersion, mean / dispersion);
    return poisson(std::min(gamma(*this), 1e9));
}

} // namespace gsim
