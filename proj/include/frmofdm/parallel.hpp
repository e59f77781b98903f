#pragma once

#include <cstddef>
#include <cstdlib>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace frmofdm::par {

/// Worker count: FRMOFDM_THREADS caps it, otherwise the OpenMP default.
/// Returns 1 when built without OpenMP.
inline int worker_count() {
#ifdef _OPENMP
    int n = omp_get_max_threads();
    if (const char* env = std::getenv("FRMOFDM_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1 && cap < n) n = cap;
    }
    return n;
#else
    return 1;
#endif
}

/// Serial reference loop. Kept as the ground truth the parallel path is
/// tested against.
template <class F>
void for_each_index_serial(std::size_t n, F&& fn) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

/// OpenMP-parallel loop over [0, n). Each index must write only to its own
/// slots; with that contract the output is identical to the serial loop for
/// any schedule and worker count.
template <class F>
void for_each_index(std::size_t n, F&& fn, bool serial = false) {
#ifdef _OPENMP
    if (!serial && n > 1) {
        const int workers = worker_count();
#pragma omp parallel for schedule(dynamic) num_threads(workers)
        for (long long i = 0; i < static_cast<long long>(n); ++i)
            fn(static_cast<std::size_t>(i));
        return;
    }
#endif
    (void)serial;
    for_each_index_serial(n, fn);
}

/// Chunked sum reduction: the sample range is split into `chunks` contiguous
/// blocks, each block is accumulated serially and the partials are combined
/// in block order. Deterministic for a fixed chunk count no matter how the
/// blocks are scheduled. T needs operator+=.
template <class T, class F>
T reduce_chunked(std::size_t n, std::size_t chunks, const T& zero, F&& accumulate_range,
                 bool serial = false) {
    if (chunks == 0) chunks = 1;
    if (chunks > n && n > 0) chunks = n;
    std::vector<T> partial(chunks, zero);
    for_each_index(
        chunks,
        [&](std::size_t c) {
            std::size_t lo = n * c / chunks;
            std::size_t hi = n * (c + 1) / chunks;
            accumulate_range(partial[c], lo, hi);
        },
        serial);
    T total = zero;
    for (const T& p : partial) total += p;
    return total;
}

} // namespace frmofdm::par
