#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace hmfg::detail {

/// Runs fn(i) for i in [0, n), in parallel when OpenMP is enabled. Every
/// iteration must write only to its own slot. If iterations throw, the
/// exception from the lowest index is rethrown, so failures are reported
/// identically under any schedule.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    std::exception_ptr first_error;
    std::size_t first_index = n;
    std::mutex guard;
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard lock(guard);
            if (static_cast<std::size_t>(i) < first_index) {
                first_index = static_cast<std::size_t>(i);
                first_error = std::current_exception();
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace hmfg::detail
