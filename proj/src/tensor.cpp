#include "visaw/tensor.hpp"

#include <sstream>
#include <unordered_set>
#include <utility>

#include "visaw/errors.hpp"

namespace visaw {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

struct Tensor::Impl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  mutable std::vector<double> grad;  // persistent; sized lazily

  // Autodiff graph edges. `tmp` holds the current pass's upstream gradient
  // so repeated backward() calls accumulate correctly into `grad`.
  std::vector<std::shared_ptr<Impl>> parents;
  GradFn grad_fn;
  std::vector<double> tmp;
  bool tmp_set = false;
};

Tensor::Impl& Tensor::node() const {
  if (!impl_) fail(ErrorKind::Contract, "tensor: undefined handle");
  return *impl_;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) fail(ErrorKind::Dimension, "tensor: zero-sized axis in " + shape_str(shape));
  }
  if (numel(shape) != data.size()) {
    fail(ErrorKind::Dimension, "tensor: " + shape_str(shape) + " does not hold " +
                                   std::to_string(data.size()) + " values");
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> data(numel(shape), 0.0);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> data(numel(shape), value);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> data(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) data[i * n + i] = 1.0;
  return from_data({n, n}, std::move(data));
}

const Shape& Tensor::shape() const { return node().shape; }
std::size_t Tensor::rank() const { return node().shape.size(); }
std::size_t Tensor::size() const { return node().data.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = node().shape;
  if (axis >= s.size()) {
    fail(ErrorKind::Dimension,
         "tensor: axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::last_dim() const {
  const Shape& s = node().shape;
  if (s.empty()) fail(ErrorKind::Dimension, "tensor: rank-0 tensor has no last axis");
  return s.back();
}

std::vector<double>& Tensor::data() { return node().data; }
const std::vector<double>& Tensor::data() const { return node().data; }

double Tensor::value() const {
  if (size() != 1) {
    fail(ErrorKind::Contract, "tensor: value() needs a scalar, got " + shape_str(shape()));
  }
  return node().data[0];
}

double Tensor::at(std::size_t flat_index) const {
  const auto& d = node().data;
  if (flat_index >= d.size()) {
    fail(ErrorKind::Dimension, "tensor: flat index " + std::to_string(flat_index) +
                                   " out of range for " + shape_str(shape()));
  }
  return d[flat_index];
}

bool Tensor::requires_grad() const { return node().requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  Impl& n = node();
  if (on && n.grad_fn) {
    fail(ErrorKind::Contract, "tensor: requires_grad is derived for op results");
  }
  n.requires_grad = on;
  return *this;
}

const std::vector<double>& Tensor::grad() const {
  Impl& n = node();
  if (n.grad.size() != n.data.size()) n.grad.assign(n.data.size(), 0.0);
  return n.grad;
}

void Tensor::zero_grad() {
  Impl& n = node();
  n.grad.assign(n.data.size(), 0.0);
}

Tensor Tensor::detach() const {
  const Impl& n = node();
  return from_data(n.shape, n.data, false);
}

void Tensor::attach(std::vector<Tensor> parents, GradFn fn) {
  Impl& n = node();
  if (n.grad_fn) fail(ErrorKind::Contract, "tensor: op result already attached");
  n.parents.reserve(parents.size());
  for (const Tensor& p : parents) n.parents.push_back(p.impl_);
  n.grad_fn = std::move(fn);
  n.requires_grad = true;
}

std::vector<double>& Tensor::grad_slot(const Tensor& parent) {
  Impl& n = parent.node();
  if (!n.tmp_set) {
    n.tmp.assign(n.data.size(), 0.0);
    n.tmp_set = true;
  }
  return n.tmp;
}

void Tensor::backward() {
  Impl& root = node();
  if (root.data.size() != 1) {
    fail(ErrorKind::Contract, "backward: loss must be scalar, got " + shape_str(root.shape));
  }
  if (!root.requires_grad) return;  // nothing upstream wants a gradient

  // Iterative post-order DFS: parents land before children, so the reverse
  // walk sees every consumer's contribution before a node propagates.
  std::vector<Impl*> topo;
  std::unordered_set<Impl*> seen;
  struct Frame {
    Impl* node;
    std::size_t next;
  };
  std::vector<Frame> stack{{&root, 0}};
  seen.insert(&root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      Impl* p = f.node->parents[f.next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  root.tmp.assign(1, 1.0);
  root.tmp_set = true;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Impl* n = *it;
    if (!n->tmp_set) continue;  // not on a gradient path this pass
    if (n->grad_fn) n->grad_fn(n->tmp);
    if (n->grad.size() != n->data.size()) n->grad.assign(n->data.size(), 0.0);
    for (std::size_t i = 0; i < n->tmp.size(); ++i) n->grad[i] += n->tmp[i];
    n->tmp = {};
    n->tmp_set = false;
  }
}

}  // namespace visaw
