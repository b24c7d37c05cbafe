#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>

namespace gsim {

/// Counter-based random stream keyed by (master seed, path).
///
/// Every draw is a pure function of the key and an internal counter, so two streams
/// built from the same (seed, path) produce identical sequences regardless of what
/// other streams exist. Parallel code derives child streams with `child()` rather
/// than sharing one instance.
class RngStream {
  public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t master_seed, std::span<const std::uint32_t> path);
    RngStream(std::uint64_t master_seed, std::initializer_list<std::uint32_t> path)
        : RngStream(master_seed, std::span<const std::uint32_t>(path.begin(), path.size())) {}

    /// Same stream as RngStream(seed, path ++ extra).
    [[nodiscard]] static RngStream at(std::uint64_t master_seed, std::span<const std::uint32_t> path,
                                      std::initializer_list<std::uint32_t> extra) noexcept;

    [[nodiscard]] std::uint64_t master_seed() const noexcept { return seed_; }
    [[nodiscard]] std::size_t depth() const noexcept { return depth_; }
    [[nodiscard]] std::uint64_t draws() const noexcept { return counter_; }

    /// Stream at path() ++ extra, under the same master seed.
    [[nodiscard]] RngStream child(std::initializer_list<std::uint32_t> extra) const;
    [[nodiscard]] RngStream child(std::span<const std::uint32_t> extra) const;

    // UniformRandomBitGenerator
    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
    result_type operator()() noexcept;

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform01() noexcept;
    /// Uniform integer on [lo, hi]; requires lo <= hi.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Binomial(n, p). Throws DomainError for n < 0 or p outside [0, 1] (including NaN).
    std::int64_t binomial(std::int64_t n, double p);
    /// Poisson(rate). Throws DomainError for negative or non-finite rate.
    std::int64_t poisson(double rate);
    double normal(double mean, double stdev);
    /// Gamma-Poisson mixture with the given mean and dispersion (shape) r: variance = mean + mean^2 / r.
    std::int64_t negative_binomial(double mean, double dispersion);

  private:
    RngStream(std::uint64_t seed, std::uint64_t partial, std::size_t depth) noexcept;

    std::uint64_t seed_;
    std::uint64_t partial_; // key state after absorbing the path, before the length tag
    std::size_t depth_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

inline RngStream derive_stream(std::uint64_t master_seed, std::initializer_list<std::uint32_t> path) {
    return RngStream(master_seed, path);
}

inline RngStream derive_stream(std::uint64_t master_seed, std::span<const std::uint32_t> path) {
    return RngStream(master_seed, path);
}

/// Mixes a 64-bit value (SplitMix64 finalizer).
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives a fresh master seed from a parent seed and a path; used to give
/// sub-computations (e.g. a GA run's Monte-Carlo draws) their own seed space.
std::uint64_t derive_seed(std::uint64_t master_seed, std::initializer_list<std::uint32_t> path) noexcept;

} // namespace gsim
