#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dfsdca {

// Selects between the plain loop and the OpenMP loop for data-parallel
// kernels. Every kernel writes per-index results into its own slot and
// reduces them afterwards, so both policies produce identical bits.
enum class ExecPolicy { serial, parallel };

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// Calls body(i) for every i in [0, count). Exceptions thrown inside the
// parallel region are captured and the first one is rethrown on the caller.
template <typename Body>
void for_each_index(ExecPolicy policy, std::ptrdiff_t count, Body&& body) {
    if (policy == ExecPolicy::serial || count < 2) {
        for (std::ptrdiff_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            body(i);
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace dfsdca
