#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace visaw {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Graph construction can be switched off for pure evaluation (cheaper, no
// backward bookkeeping). Thread-local, so guards compose per thread.
bool grad_enabled();
void set_grad_enabled(bool on);

class NoGradGuard {
 public:
  NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Dense row-major tensor of doubles with reverse-mode autodiff. Copying a
// Tensor copies a handle to the same node, not the storage. Ops build a DAG;
// backward() on a scalar loss accumulates d(loss)/d(node) additively into
// each reachable node's grad buffer. Callers reset grads explicitly.
class Tensor {
 public:
  using GradFn = std::function<void(const std::vector<double>& upstream)>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor identity(std::size_t n);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const;
  std::size_t size() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t last_dim() const;

  std::vector<double>& data();
  const std::vector<double>& data() const;
  double value() const;  // scalar tensors only
  double at(std::size_t flat_index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  // Accumulated gradient; reads as zeros before the first backward pass.
  const std::vector<double>& grad() const;
  void zero_grad();

  // Scalar-only. Repeated calls keep adding into grad buffers.
  void backward();

  // Value copy detached from the graph.
  Tensor detach() const;

  // Hook for op implementations: registers parents and the local backward
  // rule, and marks the result as requiring grad. The rule receives
  // d(loss)/d(this) and must add each parent's share via grad_slot().
  void attach(std::vector<Tensor> parents, GradFn fn);

  // Pass-local accumulator for `parent` during backward; zero-initialized.
  static std::vector<double>& grad_slot(const Tensor& parent);

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;

  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
  Impl& node() const;
};

}  // namespace visaw
