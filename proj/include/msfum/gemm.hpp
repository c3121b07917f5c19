#pragma once

#include <cstdint>
#include <vector>

namespace msfum {

// C[M,N] (+)= A[M,K] * B[K,N], row-major contiguous. The k-reduction order
// is fixed per output element, so results do not depend on thread count.
template <typename T>
void gemm_nn(int64_t m, int64_t n, int64_t k, const T* a, const T* b, T* c, bool accumulate);

// out[N,M] = in[M,N]
template <typename T>
void transpose(int64_t m, int64_t n, const T* in, T* out);

}  // namespace msfum
