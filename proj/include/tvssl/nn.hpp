#ifndef TVSSL_NN_HPP_
#define TVSSL_NN_HPP_

#include <string>
#include <utility>
#include <vector>

#include "tvssl/ops.hpp"
#include "tvssl/tensor.hpp"

namespace tvssl::nn {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// fan-in-scaled uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]
void init_fanin_uniform(Tensor& w, int64_t fan_in, Rng& rng);

struct Conv2d {
  Tensor weight;  // [K,C,kh,kw]
  Tensor bias;    // [K]
  int64_t stride = 1;
  int64_t padding = 0;

  Conv2d() = default;
  Conv2d(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride, int64_t padding,
         Rng& rng);
  Tensor forward(const Tensor& x) const { return ops::conv2d(x, weight, bias, stride, padding); }
  void collect(const std::string& prefix, NamedTensors& params, NamedTensors& buffers);
};

struct Linear {
  Tensor weight;  // [Dout,Din]
  Tensor bias;    // [Dout]

  Linear() = default;
  Linear(int64_t d_in, int64_t d_out, Rng& rng);
  Tensor forward(const Tensor& x) const { return ops::linear(x, weight, bias); }
  void collect(const std::string& prefix, NamedTensors& params, NamedTensors& buffers);
};

struct BatchNorm {
  Tensor gamma, beta;
  Tensor running_mean, running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  BatchNorm() = default;
  explicit BatchNorm(int64_t channels);
  Tensor forward(const Tensor& x, bool training) {
    return ops::batch_norm(x, gamma, beta, running_mean, running_var, eps, momentum, training);
  }
  void collect(const std::string& prefix, NamedTensors& params, NamedTensors& buffers);
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // classic L2: added to the gradient before moments
};

// Bias-corrected Adam over a fixed parameter list. Moment buffers mirror the
// parameter shapes; the step counter increases by exactly 1 per step().
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  void step();
  void zero_grad();

  int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<Tensor>& params() const { return params_; }
  std::vector<std::vector<double>>& moments_m() { return m_; }
  std::vector<std::vector<double>>& moments_v() { return v_; }
  void set_step_count(int64_t s) { step_count_ = s; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  int64_t step_count_ = 0;
};

}  // namespace tvssl::nn

#endif  // TVSSL_NN_HPP_
