#pragma once

#include <cstddef>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lsmkv {

// Execution policy for the measurement kernels (FPR probing, saturation
// trials, game trials). The serial path is the reference implementation;
// work items index independent RNG streams, so both paths produce
// identical results and the parallel path is validated against the
// serial one in tests.
enum class Exec { serial, parallel };

inline int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

template <typename Fn>
void for_each_index(std::size_t n, Exec exec, Fn&& fn) {
#ifdef _OPENMP
    if (exec == Exec::parallel) {
        #pragma omp parallel for schedule(dynamic, 64)
        for (long long i = 0; i < static_cast<long long>(n); ++i)
            fn(static_cast<std::size_t>(i));
        return;
    }
#else
    (void)exec;
#endif
    for (std::size_t i = 0; i < n; ++i)
        fn(i);
}

}  // namespace lsmkv
