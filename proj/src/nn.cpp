#include "tvssl/nn.hpp"

#include <cmath>

namespace tvssl::nn {

void init_fanin_uniform(Tensor& w, int64_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (int64_t i = 0; i < w.numel(); ++i) w.data()[i] = rng.uniform(-bound, bound);
}

Conv2d::Conv2d(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride_,
               int64_t padding_, Rng& rng)
    : weight({out_ch, in_ch, k, k}, true),
      bias({out_ch}, true),
      stride(stride_),
      padding(padding_) {
  init_fanin_uniform(weight, in_ch * k * k, rng);
  init_fanin_uniform(bias, in_ch * k * k, rng);
}

void Conv2d::collect(const std::string& prefix, NamedTensors& params, NamedTensors&) {
  params.emplace_back(prefix + ".weight", weight);
  params.emplace_back(prefix + ".bias", bias);
}

Linear::Linear(int64_t d_in, int64_t d_out, Rng& rng)
    : weight({d_out, d_in}, true), bias({d_out}, true) {
  init_fanin_uniform(weight, d_in, rng);
  init_fanin_uniform(bias, d_in, rng);
}

void Linear::collect(const std::string& prefix, NamedTensors& params, NamedTensors&) {
  params.emplace_back(prefix + ".weight", weight);
  params.emplace_back(prefix + ".bias", bias);
}

BatchNorm::BatchNorm(int64_t channels)
    : gamma({channels}, true),
      beta({channels}, true),
      running_mean({channels}),
      running_var({channels}) {
  for (int64_t i = 0; i < channels; ++i) {
    gamma.data()[i] = 1.0;
    running_var.data()[i] = 1.0;
  }
}

void BatchNorm::collect(const std::string& prefix, NamedTensors& params,
                        NamedTensors& buffers) {
  params.emplace_back(prefix + ".gamma", gamma);
  params.emplace_back(prefix + ".beta", beta);
  buffers.emplace_back(prefix + ".running_mean", running_mean);
  buffers.emplace_back(prefix + ".running_var", running_var);
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    m_.emplace_back(static_cast<size_t>(p.numel()), 0.0);
    v_.emplace_back(static_cast<size_t>(p.numel()), 0.0);
  }
}

void Adam::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& p = params_[pi];
    const int64_t n = p.numel();
    const double* g = p.has_grad() ? p.grad().data() : nullptr;
    double* m = m_[pi].data();
    double* v = v_[pi].data();
    double* x = p.data();
    for (int64_t i = 0; i < n; ++i) {
      const double gi = (g ? g[i] : 0.0) + cfg_.weight_decay * x[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      const double upd = cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      x[i] -= upd;
      if (!std::isfinite(x[i])) throw NumericError("adam_step produced non-finite parameter");
    }
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace tvssl::nn
