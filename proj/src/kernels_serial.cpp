#include "tvssl/kernels_serial.hpp"

namespace tvssl::kernels::serial {

void matmul_nn(int64_t m, int64_t n, int64_t k, const double* A, const double* B,
               double* C, bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double acc = accumulate ? C[i * n + j] : 0.0;
      for (int64_t kk = 0; kk < k; ++kk) acc += A[i * k + kk] * B[kk * n + j];
      C[i * n + j] = acc;
    }
  }
}

void matmul_nt(int64_t m, int64_t n, int64_t k, const double* A, const double* B,
               double* C, bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double acc = accumulate ? C[i * n + j] : 0.0;
      for (int64_t kk = 0; kk < k; ++kk) acc += A[i * k + kk] * B[j * k + kk];
      C[i * n + j] = acc;
    }
  }
}

void conv2d_forward(const double* in, int64_t B, int64_t C, int64_t H, int64_t W,
                    const double* w, int64_t K, int64_t kh, int64_t kw,
                    const double* bias, int64_t stride, int64_t pad, double* out) {
  const int64_t Ho = (H + 2 * pad - kh) / stride + 1;
  const int64_t Wo = (W + 2 * pad - kw) / stride + 1;
  for (int64_t b = 0; b < B; ++b)
    for (int64_t ko = 0; ko < K; ++ko)
      for (int64_t oy = 0; oy < Ho; ++oy)
        for (int64_t ox = 0; ox < Wo; ++ox) {
          double acc = bias ? bias[ko] : 0.0;
          for (int64_t c = 0; c < C; ++c)
            for (int64_t fy = 0; fy < kh; ++fy)
              for (int64_t fx = 0; fx < kw; ++fx) {
                const int64_t iy = oy * stride + fy - pad;
                const int64_t ix = ox * stride + fx - pad;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += in[((b * C + c) * H + iy) * W + ix] *
                       w[((ko * C + c) * kh + fy) * kw + fx];
              }
          out[((b * K + ko) * Ho + oy) * Wo + ox] = acc;
        }
}

void avg_pool_forward(const double* in, int64_t B, int64_t C, int64_t H, int64_t W,
                      int64_t kh, int64_t kw, int64_t stride, double* out) {
  const int64_t Ho = (H - kh) / stride + 1;
  const int64_t Wo = (W - kw) / stride + 1;
  const double inv = 1.0 / static_cast<double>(kh * kw);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t oy = 0; oy < Ho; ++oy)
        for (int64_t ox = 0; ox < Wo; ++ox) {
          double acc = 0.0;
          for (int64_t fy = 0; fy < kh; ++fy)
            for (int64_t fx = 0; fx < kw; ++fx)
              acc += in[((b * C + c) * H + oy * stride + fy) * W + ox * stride + fx];
          out[((b * C + c) * Ho + oy) * Wo + ox] = acc * inv;
        }
}

void linear_forward(const double* in, int64_t B, int64_t Din, const double* w,
                    int64_t Dout, const double* bias, double* out) {
  for (int64_t b = 0; b < B; ++b)
    for (int64_t o = 0; o < Dout; ++o) {
      double acc = bias ? bias[o] : 0.0;
      for (int64_t i = 0; i < Din; ++i) acc += in[b * Din + i] * w[o * Din + i];
      out[b * Dout + o] = acc;
    }
}

}  // namespace tvssl::kernels::serial
