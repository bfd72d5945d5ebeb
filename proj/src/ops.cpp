#include "tvssl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "tvssl/kernels.hpp"

namespace tvssl::ops {

namespace {

std::vector<double>& grad_of(const std::shared_ptr<TensorImpl>& t) {
  if (t->grad.empty()) t->grad.assign(t->data.size(), 0.0);
  return t->grad;
}

bool grad_ready(const std::shared_ptr<TensorImpl>& t) { return !t->grad.empty(); }

double logsumexp(const double* s, int64_t n) {
  double m = s[0];
  for (int64_t i = 1; i < n; ++i) m = std::max(m, s[i]);
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += std::exp(s[i] - m);
  return m + std::log(acc);
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int64_t stride, int64_t padding) {
  TVSSL_CHECK(input.ndim() == 4, "conv2d input must be 4-d");
  TVSSL_CHECK(weight.ndim() == 4, "conv2d weight must be 4-d");
  const int64_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int64_t K = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  TVSSL_CHECK(weight.dim(1) == C, "conv2d channel mismatch: input C=" << C
                                      << " weight C=" << weight.dim(1));
  TVSSL_CHECK(bias.ndim() == 1 && bias.dim(0) == K, "conv2d bias shape");
  TVSSL_CHECK(stride >= 1, "conv2d stride must be >= 1");
  TVSSL_CHECK(kh <= H + 2 * padding && kw <= W + 2 * padding,
              "conv2d kernel larger than padded input");
  const int64_t Ho = (H + 2 * padding - kh) / stride + 1;
  const int64_t Wo = (W + 2 * padding - kw) / stride + 1;

  Tensor out({B, K, Ho, Wo});
  kernels::conv2d_forward(input.data(), B, C, H, W, weight.data(), K, kh, kw,
                          bias.data(), stride, padding, out.data());
  out.check_finite("conv2d");

  const bool needs = input.requires_grad() || weight.requires_grad() || bias.requires_grad();
  out.set_requires_grad(needs);
  if (Tape* tape = Tape::current(); tape && needs) {
    auto in = input.impl_ptr(), w = weight.impl_ptr(), b = bias.impl_ptr(), o = out.impl_ptr();
    bool gi = input.requires_grad(), gw = weight.requires_grad(), gb = bias.requires_grad();
    tape->record([=]() {
      if (!grad_ready(o)) return;
      kernels::conv2d_backward(in->data.data(), B, C, H, W, w->data.data(), K, kh, kw,
                               stride, padding, o->grad.data(),
                               gi ? grad_of(in).data() : nullptr,
                               gw ? grad_of(w).data() : nullptr,
                               gb ? grad_of(b).data() : nullptr);
    });
  }
  return out;
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  TVSSL_CHECK(input.ndim() == 2 && weight.ndim() == 2, "linear expects 2-d input and weight");
  const int64_t B = input.dim(0), Din = input.dim(1), Dout = weight.dim(0);
  TVSSL_CHECK(weight.dim(1) == Din,
              "linear inner dims disagree: " << Din << " vs " << weight.dim(1));
  TVSSL_CHECK(bias.ndim() == 1 && bias.dim(0) == Dout, "linear bias shape");

  Tensor out({B, Dout});
  kernels::linear_forward(input.data(), B, Din, weight.data(), Dout, bias.data(), out.data());
  out.check_finite("linear");

  const bool needs = input.requires_grad() || weight.requires_grad() || bias.requires_grad();
  out.set_requires_grad(needs);
  if (Tape* tape = Tape::current(); tape && needs) {
    auto in = input.impl_ptr(), w = weight.impl_ptr(), b = bias.impl_ptr(), o = out.impl_ptr();
    bool gi = input.requires_grad(), gw = weight.requires_grad(), gb = bias.requires_grad();
    tape->record([=]() {
      if (!grad_ready(o)) return;
      kernels::linear_backward(in->data.data(), B, Din, w->data.data(), Dout,
                               o->grad.data(),
                               gi ? grad_of(in).data() : nullptr,
                               gw ? grad_of(w).data() : nullptr,
                               gb ? grad_of(b).data() : nullptr);
    });
  }
  return out;
}

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var, double eps,
                  double momentum, bool training) {
  TVSSL_CHECK(input.ndim() == 2 || input.ndim() == 4, "batch_norm expects [B,C] or [B,C,H,W]");
  TVSSL_CHECK(eps > 0, "batch_norm eps must be > 0");
  const int64_t B = input.dim(0), C = input.dim(1);
  const int64_t spatial = input.ndim() == 4 ? input.dim(2) * input.dim(3) : 1;
  const int64_t N = B * spatial;
  TVSSL_CHECK(gamma.numel() == C && beta.numel() == C, "batch_norm affine shape");
  TVSSL_CHECK(running_mean.numel() == C && running_var.numel() == C,
              "batch_norm running-stat shape");
  if (training) TVSSL_CHECK(B >= 2, "batch_norm: degenerate batch (B=" << B << ") in train mode");

  Tensor out(input.shape());
  std::vector<double> mean(C), invstd(C);
  const double* x = input.data();
  double* y = out.data();

  if (training) {
    std::vector<double> var(C, 0.0);
    for (int64_t c = 0; c < C; ++c) {
      double m = 0.0;
      for (int64_t b = 0; b < B; ++b) {
        const double* p = x + (b * C + c) * spatial;
        for (int64_t s = 0; s < spatial; ++s) m += p[s];
      }
      m /= static_cast<double>(N);
      double v = 0.0;
      for (int64_t b = 0; b < B; ++b) {
        const double* p = x + (b * C + c) * spatial;
        for (int64_t s = 0; s < spatial; ++s) v += (p[s] - m) * (p[s] - m);
      }
      v /= static_cast<double>(N);
      mean[c] = m;
      var[c] = v;
      invstd[c] = 1.0 / std::sqrt(v + eps);
      running_mean.data()[c] = (1.0 - momentum) * running_mean.data()[c] + momentum * m;
      running_var.data()[c] = (1.0 - momentum) * running_var.data()[c] + momentum * v;
    }
  } else {
    for (int64_t c = 0; c < C; ++c) {
      mean[c] = running_mean.data()[c];
      invstd[c] = 1.0 / std::sqrt(running_var.data()[c] + eps);
    }
  }

  std::vector<double> xhat(static_cast<size_t>(input.numel()));
#pragma omp parallel for schedule(static)
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c) {
      const double* p = x + (b * C + c) * spatial;
      double* q = y + (b * C + c) * spatial;
      double* h = xhat.data() + (b * C + c) * spatial;
      const double g = gamma.data()[c], bt = beta.data()[c], m = mean[c], is = invstd[c];
      for (int64_t s = 0; s < spatial; ++s) {
        h[s] = (p[s] - m) * is;
        q[s] = g * h[s] + bt;
      }
    }
  out.check_finite("batch_norm");

  const bool needs = input.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  out.set_requires_grad(needs);
  if (Tape* tape = Tape::current(); tape && needs) {
    auto in = input.impl_ptr(), g = gamma.impl_ptr(), bt = beta.impl_ptr(), o = out.impl_ptr();
    bool gi = input.requires_grad(), gg = gamma.requires_grad(), gb = beta.requires_grad();
    auto xh = std::make_shared<std::vector<double>>(std::move(xhat));
    auto istd = std::make_shared<std::vector<double>>(invstd);
    tape->record([=]() {
      if (!grad_ready(o)) return;
      const double* dy = o->grad.data();
      std::vector<double> sum_dy(C, 0.0), sum_dy_xh(C, 0.0);
      for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c) {
          const double* d = dy + (b * C + c) * spatial;
          const double* h = xh->data() + (b * C + c) * spatial;
          for (int64_t s = 0; s < spatial; ++s) {
            sum_dy[c] += d[s];
            sum_dy_xh[c] += d[s] * h[s];
          }
        }
      if (gg) {
        auto& gv = grad_of(g);
        for (int64_t c = 0; c < C; ++c) gv[c] += sum_dy_xh[c];
      }
      if (gb) {
        auto& bv = grad_of(bt);
        for (int64_t c = 0; c < C; ++c) bv[c] += sum_dy[c];
      }
      if (gi) {
        auto& iv = grad_of(in);
        if (training) {
          const double invN = 1.0 / static_cast<double>(N);
          for (int64_t b = 0; b < B; ++b)
            for (int64_t c = 0; c < C; ++c) {
              const double* d = dy + (b * C + c) * spatial;
              const double* h = xh->data() + (b * C + c) * spatial;
              double* gi_p = iv.data() + (b * C + c) * spatial;
              const double gs = g->data[c] * (*istd)[c];
              for (int64_t s = 0; s < spatial; ++s)
                gi_p[s] += gs * (d[s] - invN * sum_dy[c] - invN * h[s] * sum_dy_xh[c]);
            }
        } else {
          for (int64_t b = 0; b < B; ++b)
            for (int64_t c = 0; c < C; ++c) {
              const double* d = dy + (b * C + c) * spatial;
              double* gi_p = iv.data() + (b * C + c) * spatial;
              const double gs = g->data[c] * (*istd)[c];
              for (int64_t s = 0; s < spatial; ++s) gi_p[s] += gs * d[s];
            }
        }
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  kernels::relu_forward(input.data(), input.numel(), out.data());
  out.set_requires_grad(input.requires_grad());
  if (Tape* tape = Tape::current(); tape && input.requires_grad()) {
    auto in = input.impl_ptr(), o = out.impl_ptr();
    const int64_t n = input.numel();
    tape->record([=]() {
      if (!grad_ready(o)) return;
      kernels::relu_backward(in->data.data(), n, o->grad.data(), grad_of(in).data());
    });
  }
  return out;
}

Tensor avg_pool(const Tensor& input, int64_t kh, int64_t kw, int64_t stride) {
  TVSSL_CHECK(input.ndim() == 4, "avg_pool input must be 4-d");
  const int64_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  TVSSL_CHECK(kh <= H && kw <= W, "avg_pool window " << kh << "x" << kw
                                      << " larger than input " << H << "x" << W);
  TVSSL_CHECK(stride >= 1, "avg_pool stride must be >= 1");
  const int64_t Ho = (H - kh) / stride + 1;
  const int64_t Wo = (W - kw) / stride + 1;
  Tensor out({B, C, Ho, Wo});
  kernels::avg_pool_forward(input.data(), B, C, H, W, kh, kw, stride, out.data());
  out.check_finite("avg_pool");
  out.set_requires_grad(input.requires_grad());
  if (Tape* tape = Tape::current(); tape && input.requires_grad()) {
    auto in = input.impl_ptr(), o = out.impl_ptr();
    tape->record([=]() {
      if (!grad_ready(o)) return;
      kernels::avg_pool_backward(B, C, H, W, kh, kw, stride, o->grad.data(),
                                 grad_of(in).data());
    });
  }
  return out;
}

Tensor spatial_mean(const Tensor& input) {
  TVSSL_CHECK(input.ndim() == 4, "spatial_mean input must be 4-d");
  const int64_t B = input.dim(0), C = input.dim(1), S = input.dim(2) * input.dim(3);
  Tensor out({B, C});
  const double inv = 1.0 / static_cast<double>(S);
  for (int64_t bc = 0; bc < B * C; ++bc) {
    double acc = 0.0;
    const double* p = input.data() + bc * S;
    for (int64_t s = 0; s < S; ++s) acc += p[s];
    out.data()[bc] = acc * inv;
  }
  out.set_requires_grad(input.requires_grad());
  if (Tape* tape = Tape::current(); tape && input.requires_grad()) {
    auto in = input.impl_ptr(), o = out.impl_ptr();
    tape->record([=]() {
      if (!grad_ready(o)) return;
      auto& gv = grad_of(in);
      for (int64_t bc = 0; bc < B * C; ++bc) {
        const double g = o->grad[bc] * inv;
        for (int64_t s = 0; s < S; ++s) gv[bc * S + s] += g;
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  TVSSL_CHECK(a.shape() == b.shape(), "add shape mismatch");
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  out.check_finite("add");
  const bool needs = a.requires_grad() || b.requires_grad();
  out.set_requires_grad(needs);
  if (Tape* tape = Tape::current(); tape && needs) {
    auto ai = a.impl_ptr(), bi = b.impl_ptr(), o = out.impl_ptr();
    bool ga = a.requires_grad(), gb = b.requires_grad();
    tape->record([=]() {
      if (!grad_ready(o)) return;
      if (ga) {
        auto& g = grad_of(ai);
        for (size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
      }
      if (gb) {
        auto& g = grad_of(bi);
        for (size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out.data()[i] = c * a.data()[i];
  out.check_finite("scale");
  out.set_requires_grad(a.requires_grad());
  if (Tape* tape = Tape::current(); tape && a.requires_grad()) {
    auto ai = a.impl_ptr(), o = out.impl_ptr();
    tape->record([=]() {
      if (!grad_ready(o)) return;
      auto& g = grad_of(ai);
      for (size_t i = 0; i < g.size(); ++i) g[i] += c * o->grad[i];
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) acc += a.data()[i];
  Tensor out = Tensor::scalar(acc);
  out.check_finite("sum");
  out.set_requires_grad(a.requires_grad());
  if (Tape* tape = Tape::current(); tape && a.requires_grad()) {
    auto ai = a.impl_ptr(), o = out.impl_ptr();
    tape->record([=]() {
      if (!grad_ready(o)) return;
      auto& g = grad_of(ai);
      for (size_t i = 0; i < g.size(); ++i) g[i] += o->grad[0];
    });
  }
  return out;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor dot(const Tensor& a, const Tensor& b) {
  TVSSL_CHECK(a.shape() == b.shape(), "dot shape mismatch");
  double acc = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) acc += a.data()[i] * b.data()[i];
  Tensor out = Tensor::scalar(acc);
  out.check_finite("dot");
  const bool needs = a.requires_grad() || b.requires_grad();
  out.set_requires_grad(needs);
  if (Tape* tape = Tape::current(); tape && needs) {
    auto ai = a.impl_ptr(), bi = b.impl_ptr(), o = out.impl_ptr();
    bool ga = a.requires_grad(), gb = b.requires_grad();
    tape->record([=]() {
      if (!grad_ready(o)) return;
      const double g0 = o->grad[0];
      if (ga) {
        auto& g = grad_of(ai);
        for (size_t i = 0; i < g.size(); ++i) g[i] += g0 * bi->data[i];
      }
      if (gb) {
        auto& g = grad_of(bi);
        for (size_t i = 0; i < g.size(); ++i) g[i] += g0 * ai->data[i];
      }
    });
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  TVSSL_CHECK(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(1),
              "matmul_nt shape mismatch");
  const int64_t Ba = a.dim(0), Bb = b.dim(0), D = a.dim(1);
  Tensor out({Ba, Bb});
  kernels::gemm_nt(Ba, Bb, D, a.data(), b.data(), out.data(), false);
  out.check_finite("matmul_nt");
  const bool needs = a.requires_grad() || b.requires_grad();
  out.set_requires_grad(needs);
  if (Tape* tape = Tape::current(); tape && needs) {
    auto ai = a.impl_ptr(), bi = b.impl_ptr(), o = out.impl_ptr();
    bool ga = a.requires_grad(), gb = b.requires_grad();
    tape->record([=]() {
      if (!grad_ready(o)) return;
      if (ga) kernels::gemm_nn(Ba, D, Bb, o->grad.data(), bi->data.data(), grad_of(ai).data(), true);
      if (gb) kernels::gemm_tn(Bb, D, Ba, o->grad.data(), ai->data.data(), grad_of(bi).data(), true);
    });
  }
  return out;
}

Tensor transpose2d(const Tensor& a) {
  TVSSL_CHECK(a.ndim() == 2, "transpose2d expects 2-d");
  const int64_t R = a.dim(0), C = a.dim(1);
  Tensor out({C, R});
  for (int64_t i = 0; i < R; ++i)
    for (int64_t j = 0; j < C; ++j) out.data()[j * R + i] = a.data()[i * C + j];
  out.set_requires_grad(a.requires_grad());
  if (Tape* tape = Tape::current(); tape && a.requires_grad()) {
    auto ai = a.impl_ptr(), o = out.impl_ptr();
    tape->record([=]() {
      if (!grad_ready(o)) return;
      auto& g = grad_of(ai);
      for (int64_t i = 0; i < R; ++i)
        for (int64_t j = 0; j < C; ++j) g[i * C + j] += o->grad[j * R + i];
    });
  }
  return out;
}

double info_nce(double pos_score, const std::vector<double>& neg_scores) {
  TVSSL_CHECK(!neg_scores.empty(), "info_nce: empty negative set");
  std::vector<double> all;
  all.reserve(neg_scores.size() + 1);
  all.push_back(pos_score);
  all.insert(all.end(), neg_scores.begin(), neg_scores.end());
  for (double v : all)
    if (!std::isfinite(v)) throw NumericError("info_nce: non-finite score");
  return logsumexp(all.data(), static_cast<int64_t>(all.size())) - pos_score;
}

namespace {

// gathers cons[:, :, i, j] into a contiguous [B,D] buffer
void gather_loc(const double* t, int64_t B, int64_t D, int64_t H, int64_t i,
                int64_t j, double* out) {
  for (int64_t b = 0; b < B; ++b)
    for (int64_t d = 0; d < D; ++d) out[b * D + d] = t[((b * D + d) * H + i) * H + j];
}

void scatter_loc_add(const double* g, int64_t B, int64_t D, int64_t H, int64_t i,
                     int64_t j, double* t) {
  for (int64_t b = 0; b < B; ++b)
    for (int64_t d = 0; d < D; ++d) t[((b * D + d) * H + i) * H + j] += g[b * D + d];
}

// One scale pair at one location: ant, cons are [B,D]; positive for row n is
// column n. Returns the summed NCE loss; if gant/gcons are non-null,
// accumulates gradients scaled by gscale instead of (in addition to) nothing.
double nce_block(const double* ant, const double* cons, int64_t B, int64_t D,
                 double gscale, double* gant, double* gcons) {
  std::vector<double> S(static_cast<size_t>(B * B));
  kernels::gemm_nt(B, B, D, ant, cons, S.data(), false);
  double loss = 0.0;
  std::vector<double> G;
  if (gant || gcons) G.assign(static_cast<size_t>(B * B), 0.0);
  for (int64_t n = 0; n < B; ++n) {
    const double* row = S.data() + n * B;
    const double lse = logsumexp(row, B);
    loss += lse - row[n];
    if (!G.empty()) {
      double* grow = G.data() + n * B;
      for (int64_t m = 0; m < B; ++m) grow[m] = std::exp(row[m] - lse) * gscale;
      grow[n] -= gscale;
    }
  }
  if (gant) kernels::gemm_nn(B, D, B, G.data(), cons, gant, true);
  if (gcons) kernels::gemm_tn(B, D, B, G.data(), ant, gcons, true);
  return loss;
}

struct IntraInputs {
  std::shared_ptr<TensorImpl> f1a, f5a, f7a, f1b, f5b, f7b;
};

// walk = forward accumulation (grads null) or backward pass (grads set)
double intra_walk(const IntraInputs& in, int64_t B, int64_t D, double gscale,
                  bool with_grads) {
  struct View {
    TensorImpl* f1;
    TensorImpl* f5;
    TensorImpl* f7;
  };
  View va{in.f1a.get(), in.f5a.get(), in.f7a.get()};
  View vb{in.f1b.get(), in.f5b.get(), in.f7b.get()};

  std::vector<double> ant(static_cast<size_t>(B * D)), cons(static_cast<size_t>(B * D));
  std::vector<double> gant, gcons;
  if (with_grads) {
    gant.assign(static_cast<size_t>(B * D), 0.0);
    gcons.assign(static_cast<size_t>(B * D), 0.0);
  }

  double total = 0.0;
  const View* order[2][2] = {{&va, &vb}, {&vb, &va}};
  for (auto& vo : order) {
    const View& A = *vo[0];
    const View& Bv = *vo[1];
    // (antecedent tensor, its spatial size or 0 for global, consequent tensor, size)
    struct Pair {
      TensorImpl* ant;
      int64_t ah;
      TensorImpl* cons;
      int64_t ch;
    };
    const Pair pairs[3] = {{A.f1, 0, Bv.f5, 5}, {A.f1, 0, Bv.f7, 7}, {A.f5, 5, Bv.f5, 5}};
    for (const Pair& pr : pairs) {
      for (int64_t i = 0; i < pr.ch; ++i)
        for (int64_t j = 0; j < pr.ch; ++j) {
          const double* ap;
          if (pr.ah == 0) {
            ap = pr.ant->data.data();
          } else {
            gather_loc(pr.ant->data.data(), B, D, pr.ah, i, j, ant.data());
            ap = ant.data();
          }
          gather_loc(pr.cons->data.data(), B, D, pr.ch, i, j, cons.data());
          if (!with_grads) {
            total += nce_block(ap, cons.data(), B, D, 0.0, nullptr, nullptr);
          } else {
            std::fill(gant.begin(), gant.end(), 0.0);
            std::fill(gcons.begin(), gcons.end(), 0.0);
            total += nce_block(ap, cons.data(), B, D, gscale, gant.data(), gcons.data());
            if (pr.ant->requires_grad) {
              auto& g = grad_of(pr.ah == 0 ? (pr.ant == va.f1 ? in.f1a : in.f1b)
                                           : (pr.ant == va.f5 ? in.f5a : in.f5b));
              if (pr.ah == 0) {
                for (int64_t t = 0; t < B * D; ++t) g[t] += gant[t];
              } else {
                scatter_loc_add(gant.data(), B, D, pr.ah, i, j, g.data());
              }
            }
            if (pr.cons->requires_grad) {
              auto& g = grad_of(pr.cons == va.f5 ? in.f5a
                                : pr.cons == vb.f5 ? in.f5b
                                : pr.cons == va.f7 ? in.f7a
                                                   : in.f7b);
              scatter_loc_add(gcons.data(), B, D, pr.ch, i, j, g.data());
            }
          }
        }
    }
  }
  return total;
}

}  // namespace

Tensor intra_infomax(const Tensor& f1a, const Tensor& f5a, const Tensor& f7a,
                     const Tensor& f1b, const Tensor& f5b, const Tensor& f7b) {
  TVSSL_CHECK(f1a.ndim() == 2, "intra_infomax: f1 must be [B,D]");
  const int64_t B = f1a.dim(0), D = f1a.dim(1);
  TVSSL_CHECK(B >= 2, "intra_infomax: batch must be >= 2 for in-batch negatives");
  for (const Tensor* t : {&f5a, &f5b})
    TVSSL_CHECK(t->ndim() == 4 && t->dim(0) == B && t->dim(1) == D && t->dim(2) == 5 &&
                    t->dim(3) == 5,
                "intra_infomax: f5 must be [B,D,5,5]");
  for (const Tensor* t : {&f7a, &f7b})
    TVSSL_CHECK(t->ndim() == 4 && t->dim(0) == B && t->dim(1) == D && t->dim(2) == 7 &&
                    t->dim(3) == 7,
                "intra_infomax: f7 must be [B,D,7,7]");
  TVSSL_CHECK(f1b.shape() == f1a.shape(), "intra_infomax: view shapes disagree");

  const int64_t terms = 2 * B * (25 + 49 + 25);
  IntraInputs in{f1a.impl_ptr(), f5a.impl_ptr(), f7a.impl_ptr(),
                 f1b.impl_ptr(), f5b.impl_ptr(), f7b.impl_ptr()};
  const double total = intra_walk(in, B, D, 0.0, false);
  Tensor out = Tensor::scalar(total / static_cast<double>(terms));
  out.check_finite("intra_infomax");

  const bool needs = f1a.requires_grad() || f5a.requires_grad() || f7a.requires_grad() ||
                     f1b.requires_grad() || f5b.requires_grad() || f7b.requires_grad();
  out.set_requires_grad(needs);
  if (Tape* tape = Tape::current(); tape && needs) {
    auto o = out.impl_ptr();
    tape->record([=]() {
      if (!grad_ready(o)) return;
      const double gscale = o->grad[0] / static_cast<double>(terms);
      intra_walk(in, B, D, gscale, true);
    });
  }
  return out;
}

Tensor pairwise_ranking_directional(const Tensor& score_matrix, double alpha) {
  TVSSL_CHECK(score_matrix.ndim() == 2 && score_matrix.dim(0) == score_matrix.dim(1),
              "pairwise_ranking_directional: matrix must be square");
  TVSSL_CHECK(alpha > 0, "pairwise_ranking_directional: alpha must be > 0");
  const int64_t B = score_matrix.dim(0);
  const double* S = score_matrix.data();
  double loss = 0.0;
  for (int64_t m = 0; m < B; ++m)
    for (int64_t k = 0; k < B; ++k) {
      if (k == m) continue;
      const double h = alpha - S[m * B + m] + S[m * B + k];
      if (h > 0) loss += h;
    }
  Tensor out = Tensor::scalar(loss);
  out.check_finite("pairwise_ranking_directional");
  out.set_requires_grad(score_matrix.requires_grad());
  if (Tape* tape = Tape::current(); tape && score_matrix.requires_grad()) {
    auto si = score_matrix.impl_ptr(), o = out.impl_ptr();
    tape->record([=]() {
      if (!grad_ready(o)) return;
      const double g0 = o->grad[0];
      auto& g = grad_of(si);
      const double* Sd = si->data.data();
      for (int64_t m = 0; m < B; ++m)
        for (int64_t k = 0; k < B; ++k) {
          if (k == m) continue;
          if (alpha - Sd[m * B + m] + Sd[m * B + k] > 0) {
            g[m * B + k] += g0;
            g[m * B + m] -= g0;
          }
        }
    });
  }
  return out;
}

Tensor nce_rows(const Tensor& score_matrix) {
  TVSSL_CHECK(score_matrix.ndim() == 2 && score_matrix.dim(0) == score_matrix.dim(1),
              "nce_rows: matrix must be square");
  const int64_t B = score_matrix.dim(0);
  TVSSL_CHECK(B >= 2, "nce_rows: need at least one negative per row");
  const double* S = score_matrix.data();
  double loss = 0.0;
  for (int64_t m = 0; m < B; ++m) loss += logsumexp(S + m * B, B) - S[m * B + m];
  Tensor out = Tensor::scalar(loss);
  out.check_finite("nce_rows");
  out.set_requires_grad(score_matrix.requires_grad());
  if (Tape* tape = Tape::current(); tape && score_matrix.requires_grad()) {
    auto si = score_matrix.impl_ptr(), o = out.impl_ptr();
    tape->record([=]() {
      if (!grad_ready(o)) return;
      const double g0 = o->grad[0];
      auto& g = grad_of(si);
      const double* Sd = si->data.data();
      for (int64_t m = 0; m < B; ++m) {
        const double lse = logsumexp(Sd + m * B, B);
        for (int64_t k = 0; k < B; ++k) g[m * B + k] += g0 * std::exp(Sd[m * B + k] - lse);
        g[m * B + m] -= g0;
      }
    });
  }
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  TVSSL_CHECK(logits.ndim() == 2, "softmax_cross_entropy: logits must be [B,C]");
  const int64_t B = logits.dim(0), C = logits.dim(1);
  TVSSL_CHECK(static_cast<int64_t>(labels.size()) == B,
              "softmax_cross_entropy: label count mismatch");
  for (int l : labels) TVSSL_CHECK(l >= 0 && l < C, "softmax_cross_entropy: label out of range");
  const double* L = logits.data();
  double loss = 0.0;
  for (int64_t b = 0; b < B; ++b) loss += logsumexp(L + b * C, C) - L[b * C + labels[b]];
  Tensor out = Tensor::scalar(loss / static_cast<double>(B));
  out.check_finite("softmax_cross_entropy");
  out.set_requires_grad(logits.requires_grad());
  if (Tape* tape = Tape::current(); tape && logits.requires_grad()) {
    auto li = logits.impl_ptr(), o = out.impl_ptr();
    auto lab = labels;
    tape->record([=]() {
      if (!grad_ready(o)) return;
      const double g0 = o->grad[0] / static_cast<double>(B);
      auto& g = grad_of(li);
      const double* Ld = li->data.data();
      for (int64_t b = 0; b < B; ++b) {
        const double lse = logsumexp(Ld + b * C, C);
        for (int64_t c = 0; c < C; ++c) g[b * C + c] += g0 * std::exp(Ld[b * C + c] - lse);
        g[b * C + lab[b]] -= g0;
      }
    });
  }
  return out;
}

Tensor sigmoid_bce(const Tensor& logits, const Tensor& targets01) {
  TVSSL_CHECK(logits.shape() == targets01.shape(), "sigmoid_bce shape mismatch");
  const int64_t n = logits.numel();
  const double* z = logits.data();
  const double* t = targets01.data();
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i)
    loss += std::max(z[i], 0.0) - z[i] * t[i] + std::log1p(std::exp(-std::fabs(z[i])));
  Tensor out = Tensor::scalar(loss / static_cast<double>(n));
  out.check_finite("sigmoid_bce");
  out.set_requires_grad(logits.requires_grad());
  if (Tape* tape = Tape::current(); tape && logits.requires_grad()) {
    auto li = logits.impl_ptr(), ti = targets01.impl_ptr(), o = out.impl_ptr();
    tape->record([=]() {
      if (!grad_ready(o)) return;
      const double g0 = o->grad[0] / static_cast<double>(n);
      auto& g = grad_of(li);
      for (int64_t i = 0; i < n; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-li->data[i]));
        g[i] += g0 * (s - ti->data[i]);
      }
    });
  }
  return out;
}

}  // namespace tvssl::ops
