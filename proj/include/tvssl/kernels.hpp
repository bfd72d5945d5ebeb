#ifndef TVSSL_KERNELS_HPP_
#define TVSSL_KERNELS_HPP_

#include <cstdint>
#include <vector>

// Optimized kernels. Convolutions go through im2col + GEMM; the heavy loops
// are OpenMP-parallel over independent output rows, so results do not depend
// on the thread count (each element is accumulated by exactly one thread in
// a fixed order).

namespace tvssl::kernels {

// C[m,n] (+)= A[m,k] * B[k,n]
void gemm_nn(int64_t m, int64_t n, int64_t k, const double* A, const double* B,
             double* C, bool accumulate);

// C[m,n] (+)= A[m,k] * B[n,k]^T
void gemm_nt(int64_t m, int64_t n, int64_t k, const double* A, const double* B,
             double* C, bool accumulate);

// C[m,n] (+)= A[k,m]^T * B[k,n]
void gemm_tn(int64_t m, int64_t n, int64_t k, const double* A, const double* B,
             double* C, bool accumulate);

// col[C*kh*kw, Ho*Wo] for one image in[C,H,W]
void im2col(const double* in, int64_t C, int64_t H, int64_t W, int64_t kh,
            int64_t kw, int64_t stride, int64_t pad, double* col);

// scatter-add of col back into in_grad[C,H,W]
void col2im_add(const double* col, int64_t C, int64_t H, int64_t W, int64_t kh,
                int64_t kw, int64_t stride, int64_t pad, double* in_grad);

void conv2d_forward(const double* in, int64_t B, int64_t C, int64_t H, int64_t W,
                    const double* w, int64_t K, int64_t kh, int64_t kw,
                    const double* bias, int64_t stride, int64_t pad, double* out);

// All grad outputs are accumulated into (callers pre-zero or reuse autograd
// buffers). Any of grad_in / grad_w / grad_bias may be null.
void conv2d_backward(const double* in, int64_t B, int64_t C, int64_t H, int64_t W,
                     const double* w, int64_t K, int64_t kh, int64_t kw,
                     int64_t stride, int64_t pad, const double* grad_out,
                     double* grad_in, double* grad_w, double* grad_bias);

void linear_forward(const double* in, int64_t B, int64_t Din, const double* w,
                    int64_t Dout, const double* bias, double* out);

void linear_backward(const double* in, int64_t B, int64_t Din, const double* w,
                     int64_t Dout, const double* grad_out, double* grad_in,
                     double* grad_w, double* grad_bias);

void avg_pool_forward(const double* in, int64_t B, int64_t C, int64_t H, int64_t W,
                      int64_t kh, int64_t kw, int64_t stride, double* out);

void avg_pool_backward(int64_t B, int64_t C, int64_t H, int64_t W, int64_t kh,
                       int64_t kw, int64_t stride, const double* grad_out,
                       double* grad_in);

void relu_forward(const double* in, int64_t n, double* out);

// grad_in += grad_out * (in > 0); subgradient at 0 is 0
void relu_backward(const double* in, int64_t n, const double* grad_out,
                   double* grad_in);

}  // namespace tvssl::kernels

#endif  // TVSSL_KERNELS_HPP_
