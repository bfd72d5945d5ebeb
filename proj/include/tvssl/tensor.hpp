#ifndef TVSSL_TENSOR_HPP_
#define TVSSL_TENSOR_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "tvssl/common.hpp"

namespace tvssl {

using Shape = std::vector<int64_t>;

inline int64_t numel_of(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first backward touch
  bool requires_grad = false;
};

// Dense row-major tensor with shared storage. Copies are shallow; ops that
// need fresh storage allocate a new impl.
class Tensor {
 public:
  Tensor() : p_(nullptr) {}

  explicit Tensor(Shape shape, bool requires_grad = false)
      : p_(std::make_shared<TensorImpl>()) {
    for (int64_t d : shape) TVSSL_CHECK(d > 0, "non-positive extent " << d);
    p_->shape = std::move(shape);
    p_->data.assign(static_cast<size_t>(numel_of(p_->shape)), 0.0);
    p_->requires_grad = requires_grad;
  }

  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    TVSSL_CHECK(static_cast<int64_t>(data.size()) == t.numel(),
                "data size " << data.size() << " != numel " << t.numel());
    t.p_->data = std::move(data);
    return t;
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from_data({1}, {v}, requires_grad);
  }

  bool defined() const { return p_ != nullptr; }
  const Shape& shape() const { return p_->shape; }
  int64_t dim(size_t i) const { return p_->shape[i]; }
  size_t ndim() const { return p_->shape.size(); }
  int64_t numel() const { return numel_of(p_->shape); }
  bool requires_grad() const { return p_->requires_grad; }
  void set_requires_grad(bool v) { p_->requires_grad = v; }

  double* data() { return p_->data.data(); }
  const double* data() const { return p_->data.data(); }
  std::vector<double>& vec() { return p_->data; }
  const std::vector<double>& vec() const { return p_->data; }

  double item() const {
    TVSSL_CHECK(numel() == 1, "item() on tensor with numel " << numel());
    return p_->data[0];
  }

  bool has_grad() const { return !p_->grad.empty(); }
  // Lazily allocates. Gradients accumulate across backward calls until
  // zero_grad().
  std::vector<double>& grad() {
    if (p_->grad.empty()) p_->grad.assign(p_->data.size(), 0.0);
    return p_->grad;
  }
  const std::vector<double>& grad() const { return p_->grad; }
  void zero_grad() { p_->grad.clear(); }

  Tensor clone() const {
    Tensor t(p_->shape, p_->requires_grad);
    t.p_->data = p_->data;
    return t;
  }

  bool same_impl(const Tensor& o) const { return p_ == o.p_; }
  TensorImpl* impl() const { return p_.get(); }
  std::shared_ptr<TensorImpl> impl_ptr() const { return p_; }

  void check_finite(const char* what) const {
    for (double v : p_->data)
      if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + what);
  }

 private:
  std::shared_ptr<TensorImpl> p_;
};

// Reverse-mode tape. Ops append their backward closures in creation order;
// backward() replays in reverse, which is a valid topological order.
class Tape {
 public:
  void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

  size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 and propagates. root must be scalar.
  void backward(Tensor root) {
    TVSSL_CHECK(root.numel() == 1, "backward root must be scalar, got numel " << root.numel());
    root.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

  static Tape* current();

 private:
  std::vector<std::function<void()>> nodes_;
  friend class TapeScope;
};

// RAII: activates a tape for the current thread. No active tape means
// eval-mode forward (nothing recorded).
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

}  // namespace tvssl

#endif  // TVSSL_TENSOR_HPP_
