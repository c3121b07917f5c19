#include "msfum/gemm.hpp"

#include <algorithm>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace msfum {

namespace {
// Tile sizes chosen so a B panel (kc x nc scalars) stays L2-resident.
constexpr int64_t kKc = 256;
constexpr int64_t kNc = 512;
}  // namespace

template <typename T>
void gemm_nn(int64_t m, int64_t n, int64_t k, const T* a, const T* b, T* c, bool accumulate) {
    if (!accumulate) {
        std::memset(c, 0, static_cast<size_t>(m) * static_cast<size_t>(n) * sizeof(T));
    }
    if (m == 0 || n == 0 || k == 0) return;

#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (n >= 2 * kNc)
#endif
    for (int64_t jb = 0; jb < n; jb += kNc) {
        const int64_t jend = std::min(jb + kNc, n);
        const int64_t jlen = jend - jb;
        for (int64_t kb = 0; kb < k; kb += kKc) {
            const int64_t kend = std::min(kb + kKc, k);
            for (int64_t i = 0; i < m; ++i) {
                T* __restrict crow = c + i * n + jb;
                const T* arow = a + i * k;
                for (int64_t kk = kb; kk < kend; ++kk) {
                    const T av = arow[kk];
                    if (av == T(0)) continue;
                    const T* __restrict brow = b + kk * n + jb;
                    for (int64_t j = 0; j < jlen; ++j) crow[j] += av * brow[j];
                }
            }
        }
    }
}

template <typename T>
void transpose(int64_t m, int64_t n, const T* in, T* out) {
    constexpr int64_t kTile = 32;
    for (int64_t ib = 0; ib < m; ib += kTile) {
        const int64_t iend = std::min(ib + kTile, m);
        for (int64_t jb = 0; jb < n; jb += kTile) {
            const int64_t jend = std::min(jb + kTile, n);
            for (int64_t i = ib; i < iend; ++i) {
                for (int64_t j = jb; j < jend; ++j) {
                    out[j * m + i] = in[i * n + j];
                }
            }
        }
    }
}

template void gemm_nn<float>(int64_t, int64_t, int64_t, const float*, const float*, float*, bool);
template void gemm_nn<double>(int64_t, int64_t, int64_t, const double*, const double*, double*, bool);
template void transpose<float>(int64_t, int64_t, const float*, float*);
template void transpose<double>(int64_t, int64_t, const double*, double*);

}  // namespace msfum
