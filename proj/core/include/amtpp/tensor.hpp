// Dense 64-bit tensors with reverse-mode automatic differentiation.
//
// Tensors are shared handles onto an immutable-shape value buffer. Every
// differentiable operation on tensors that require gradients records a node
// holding the inputs and a backward closure; the graph is rebuilt on every
// forward pass (define-by-run) and released when the result tensors go out
// of scope. backward() on a scalar loss walks the recorded graph once in
// reverse topological order.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace amtpp {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl;

// One recorded primitive application. `backward` reads the output's gradient
// accumulator and adds each input's contribution into its accumulator.
struct Node {
  const char* op = "";
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until first touched; same size as values
  std::shared_ptr<Node> creator;  // null for leaves
  std::uint64_t id = 0;

  std::size_t size() const { return values.size(); }
  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor constant(Shape shape, double fill);
  static Tensor from_values(Shape shape, std::vector<double> values);
  static Tensor scalar(double v);
  // Leaf with requires_grad set; the usual way to create a learnable weight.
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rank() const;
  std::uint64_t node_id() const;

  std::span<const double> values() const;
  // Mutable access to the raw buffer. Mutating a tensor that participates in
  // a live graph invalidates that graph; optimizers call this between passes.
  std::span<double> values_mut();
  double value() const;          // scalar tensors only
  double at(std::size_t i) const;

  bool requires_grad() const;
  void set_requires_grad(bool rg);
  std::span<const double> grad() const;
  void zero_grad();

  // Reverse-mode pass from a scalar loss. Gradient accumulators of every
  // tensor reachable from the loss are zeroed first unless `accumulate`.
  void backward(bool accumulate = false) const;

  std::shared_ptr<TensorImpl> impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// A learnable tensor with a stable name, used for optimizer state,
// checkpoints and gradient-check reports.
struct NamedParam {
  std::string name;
  Tensor tensor;
};

// Scoped suppression of graph recording; forwards run value-only.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

namespace detail {
std::shared_ptr<TensorImpl> make_impl(Shape shape, std::vector<double> values);
// Records `node` as creator of `out` when recording is on and any input
// requires a gradient; propagates requires_grad accordingly.
void finalize(const std::shared_ptr<TensorImpl>& out, std::shared_ptr<Node> node);
}  // namespace detail

}  // namespace amtpp
