#pragma once

#include <cstddef>
#include <functional>

namespace gsim {

/// Runs fn(i) for i in [0, n) on up to `workers` threads (0 = hardware concurrency,
/// 1 = inline on the caller). The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

[[nodiscard]] std::size_t resolve_workers(std::size_t workers) noexcept;

} // namespace gsim
