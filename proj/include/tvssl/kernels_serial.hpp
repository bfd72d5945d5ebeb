#ifndef TVSSL_KERNELS_SERIAL_HPP_
#define TVSSL_KERNELS_SERIAL_HPP_

#include <cstdint>

// Naive single-threaded reference kernels. Quadruple-nested loops, no
// blocking, no im2col. These are the correctness baseline the optimized
// kernels are tested against, and the serial side of the benchmark.

namespace tvssl::kernels::serial {

// C[m,n] (+)= A[m,k] * B[k,n]
void matmul_nn(int64_t m, int64_t n, int64_t k, const double* A, const double* B,
               double* C, bool accumulate);

// C[m,n] (+)= A[m,k] * B[n,k]^T
void matmul_nt(int64_t m, int64_t n, int64_t k, const double* A, const double* B,
               double* C, bool accumulate);

// out[B,K,Ho,Wo] = cross-correlation of in[B,C,H,W] with w[K,C,kh,kw] + bias[K]
void conv2d_forward(const double* in, int64_t B, int64_t C, int64_t H, int64_t W,
                    const double* w, int64_t K, int64_t kh, int64_t kw,
                    const double* bias, int64_t stride, int64_t pad, double* out);

// out[B,C,Ho,Wo] = window means of in[B,C,H,W]
void avg_pool_forward(const double* in, int64_t B, int64_t C, int64_t H, int64_t W,
                      int64_t kh, int64_t kw, int64_t stride, double* out);

// out[B,Dout] = in[B,Din] * w[Dout,Din]^T + bias[Dout]
void linear_forward(const double* in, int64_t B, int64_t Din, const double* w,
                    int64_t Dout, const double* bias, double* out);

}  // namespace tvssl::kernels::serial

#endif  // TVSSL_KERNELS_SERIAL_HPP_
