#include "tvssl/kernels.hpp"

#include <cstring>
#include <vector>

namespace tvssl::kernels {

void gemm_nn(int64_t m, int64_t n, int64_t k, const double* A, const double* B,
             double* C, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    double* Ci = C + i * n;
    if (!accumulate) std::memset(Ci, 0, sizeof(double) * n);
    const double* Ai = A + i * k;
    for (int64_t kk = 0; kk < k; ++kk) {
      const double a = Ai[kk];
      const double* Bk = B + kk * n;
      for (int64_t j = 0; j < n; ++j) Ci[j] += a * Bk[j];
    }
  }
}

void gemm_nt(int64_t m, int64_t n, int64_t k, const double* A, const double* B,
             double* C, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    const double* Ai = A + i * k;
    double* Ci = C + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* Bj = B + j * k;
      double acc = accumulate ? Ci[j] : 0.0;
      for (int64_t kk = 0; kk < k; ++kk) acc += Ai[kk] * Bj[kk];
      Ci[j] = acc;
    }
  }
}

void gemm_tn(int64_t m, int64_t n, int64_t k, const double* A, const double* B,
             double* C, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    double* Ci = C + i * n;
    if (!accumulate) std::memset(Ci, 0, sizeof(double) * n);
    for (int64_t kk = 0; kk < k; ++kk) {
      const double a = A[kk * m + i];
      const double* Bk = B + kk * n;
      for (int64_t j = 0; j < n; ++j) Ci[j] += a * Bk[j];
    }
  }
}

void im2col(const double* in, int64_t C, int64_t H, int64_t W, int64_t kh,
            int64_t kw, int64_t stride, int64_t pad, double* col) {
  const int64_t Ho = (H + 2 * pad - kh) / stride + 1;
  const int64_t Wo = (W + 2 * pad - kw) / stride + 1;
  const int64_t span = Ho * Wo;
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < C * kh * kw; ++r) {
    const int64_t c = r / (kh * kw);
    const int64_t fy = (r / kw) % kh;
    const int64_t fx = r % kw;
    double* dst = col + r * span;
    const double* src = in + c * H * W;
    for (int64_t oy = 0; oy < Ho; ++oy) {
      const int64_t iy = oy * stride + fy - pad;
      if (iy < 0 || iy >= H) {
        std::memset(dst + oy * Wo, 0, sizeof(double) * Wo);
        continue;
      }
      for (int64_t ox = 0; ox < Wo; ++ox) {
        const int64_t ix = ox * stride + fx - pad;
        dst[oy * Wo + ox] = (ix < 0 || ix >= W) ? 0.0 : src[iy * W + ix];
      }
    }
  }
}

void col2im_add(const double* col, int64_t C, int64_t H, int64_t W, int64_t kh,
                int64_t kw, int64_t stride, int64_t pad, double* in_grad) {
  const int64_t Ho = (H + 2 * pad - kh) / stride + 1;
  const int64_t Wo = (W + 2 * pad - kw) / stride + 1;
  const int64_t span = Ho * Wo;
  // parallel over channels: all rows of one channel scatter into the same
  // image plane, so a channel is owned by one thread
#pragma omp parallel for schedule(static)
  for (int64_t c = 0; c < C; ++c) {
    double* dst = in_grad + c * H * W;
    for (int64_t fy = 0; fy < kh; ++fy)
      for (int64_t fx = 0; fx < kw; ++fx) {
        const double* src = col + ((c * kh + fy) * kw + fx) * span;
        for (int64_t oy = 0; oy < Ho; ++oy) {
          const int64_t iy = oy * stride + fy - pad;
          if (iy < 0 || iy >= H) continue;
          for (int64_t ox = 0; ox < Wo; ++ox) {
            const int64_t ix = ox * stride + fx - pad;
            if (ix < 0 || ix >= W) continue;
            dst[iy * W + ix] += src[oy * Wo + ox];
          }
        }
      }
  }
}

void conv2d_forward(const double* in, int64_t B, int64_t C, int64_t H, int64_t W,
                    const double* w, int64_t K, int64_t kh, int64_t kw,
                    const double* bias, int64_t stride, int64_t pad, double* out) {
  const int64_t Ho = (H + 2 * pad - kh) / stride + 1;
  const int64_t Wo = (W + 2 * pad - kw) / stride + 1;
  const int64_t span = Ho * Wo;
  const int64_t ckk = C * kh * kw;
  std::vector<double> col(static_cast<size_t>(ckk * span));
  for (int64_t b = 0; b < B; ++b) {
    im2col(in + b * C * H * W, C, H, W, kh, kw, stride, pad, col.data());
    double* ob = out + b * K * span;
    gemm_nn(K, span, ckk, w, col.data(), ob, false);
    if (bias) {
#pragma omp parallel for schedule(static)
      for (int64_t ko = 0; ko < K; ++ko) {
        const double bv = bias[ko];
        double* row = ob + ko * span;
        for (int64_t s = 0; s < span; ++s) row[s] += bv;
      }
    }
  }
}

void conv2d_backward(const double* in, int64_t B, int64_t C, int64_t H, int64_t W,
                     const double* w, int64_t K, int64_t kh, int64_t kw,
                     int64_t stride, int64_t pad, const double* grad_out,
                     double* grad_in, double* grad_w, double* grad_bias) {
  const int64_t Ho = (H + 2 * pad - kh) / stride + 1;
  const int64_t Wo = (W + 2 * pad - kw) / stride + 1;
  const int64_t span = Ho * Wo;
  const int64_t ckk = C * kh * kw;
  std::vector<double> col(static_cast<size_t>(ckk * span));
  std::vector<double> col_grad;
  if (grad_in) col_grad.resize(static_cast<size_t>(ckk * span));
  for (int64_t b = 0; b < B; ++b) {
    const double* go = grad_out + b * K * span;
    if (grad_w) {
      im2col(in + b * C * H * W, C, H, W, kh, kw, stride, pad, col.data());
      // dW[K, ckk] += go[K, span] * col[ckk, span]^T
      gemm_nt(K, ckk, span, go, col.data(), grad_w, true);
    }
    if (grad_in) {
      // col_grad[ckk, span] = w[K, ckk]^T * go[K, span]
      gemm_tn(ckk, span, K, w, go, col_grad.data(), false);
      col2im_add(col_grad.data(), C, H, W, kh, kw, stride, pad,
                 grad_in + b * C * H * W);
    }
    if (grad_bias) {
      for (int64_t ko = 0; ko < K; ++ko) {
        double acc = 0.0;
        const double* row = go + ko * span;
        for (int64_t s = 0; s < span; ++s) acc += row[s];
        grad_bias[ko] += acc;
      }
    }
  }
}

void linear_forward(const double* in, int64_t B, int64_t Din, const double* w,
                    int64_t Dout, const double* bias, double* out) {
  gemm_nt(B, Dout, Din, in, w, out, false);
  if (bias) {
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < B; ++b) {
      double* row = out + b * Dout;
      for (int64_t o = 0; o < Dout; ++o) row[o] += bias[o];
    }
  }
}

void linear_backward(const double* in, int64_t B, int64_t Din, const double* w,
                     int64_t Dout, const double* grad_out, double* grad_in,
                     double* grad_w, double* grad_bias) {
  if (grad_in) gemm_nn(B, Din, Dout, grad_out, w, grad_in, true);
  if (grad_w) gemm_tn(Dout, Din, B, grad_out, in, grad_w, true);
  if (grad_bias) {
    for (int64_t b = 0; b < B; ++b)
      for (int64_t o = 0; o < Dout; ++o) grad_bias[o] += grad_out[b * Dout + o];
  }
}

void avg_pool_forward(const double* in, int64_t B, int64_t C, int64_t H, int64_t W,
                      int64_t kh, int64_t kw, int64_t stride, double* out) {
  const int64_t Ho = (H - kh) / stride + 1;
  const int64_t Wo = (W - kw) / stride + 1;
  const double inv = 1.0 / static_cast<double>(kh * kw);
#pragma omp parallel for schedule(static)
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const double* src = in + bc * H * W;
    double* dst = out + bc * Ho * Wo;
    for (int64_t oy = 0; oy < Ho; ++oy)
      for (int64_t ox = 0; ox < Wo; ++ox) {
        double acc = 0.0;
        for (int64_t fy = 0; fy < kh; ++fy)
          for (int64_t fx = 0; fx < kw; ++fx)
            acc += src[(oy * stride + fy) * W + ox * stride + fx];
        dst[oy * Wo + ox] = acc * inv;
      }
  }
}

void avg_pool_backward(int64_t B, int64_t C, int64_t H, int64_t W, int64_t kh,
                       int64_t kw, int64_t stride, const double* grad_out,
                       double* grad_in) {
  const int64_t Ho = (H - kh) / stride + 1;
  const int64_t Wo = (W - kw) / stride + 1;
  const double inv = 1.0 / static_cast<double>(kh * kw);
#pragma omp parallel for schedule(static)
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const double* src = grad_out + bc * Ho * Wo;
    double* dst = grad_in + bc * H * W;
    for (int64_t oy = 0; oy < Ho; ++oy)
      for (int64_t ox = 0; ox < Wo; ++ox) {
        const double g = src[oy * Wo + ox] * inv;
        for (int64_t fy = 0; fy < kh; ++fy)
          for (int64_t fx = 0; fx < kw; ++fx)
            dst[(oy * stride + fy) * W + ox * stride + fx] += g;
      }
  }
}

void relu_forward(const double* in, int64_t n, double* out) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward(const double* in, int64_t n, const double* grad_out,
                   double* grad_in) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i)
    if (in[i] > 0.0) grad_in[i] += grad_out[i];
}

}  // namespace tvssl::kernels
