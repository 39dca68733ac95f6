#include "amtpp/tensor.hpp"

#include <atomic>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace amtpp {

namespace {
std::atomic<std::uint64_t> g_next_id{1};
thread_local int g_no_grad_depth = 0;
}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

bool grad_enabled() { return g_no_grad_depth == 0; }

namespace detail {

std::shared_ptr<TensorImpl> make_impl(Shape shape, std::vector<double> values) {
  if (numel(shape) != values.size())
    throw std::invalid_argument("tensor: shape " + shape_str(shape) +
                                " does not match value count " +
                                std::to_string(values.size()));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return impl;
}

void finalize(const std::shared_ptr<TensorImpl>& out, std::shared_ptr<Node> node) {
  if (!grad_enabled()) return;
  bool needs = false;
  for (const auto& in : node->inputs)
    if (in->requires_grad) {
      needs = true;
      break;
    }
  if (!needs) return;
  out->requires_grad = true;
  out->creator = std::move(node);
}

}  // namespace detail

Tensor Tensor::zeros(Shape shape) { return constant(std::move(shape), 0.0); }

Tensor Tensor::constant(Shape shape, double fill) {
  std::vector<double> v(numel(shape), fill);
  return Tensor(detail::make_impl(std::move(shape), std::move(v)));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values) {
  return Tensor(detail::make_impl(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double v) { return from_values({}, {v}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = from_values(std::move(shape), std::move(values));
  t.set_requires_grad(true);
  return t;
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::size() const { return impl_->values.size(); }
std::size_t Tensor::rank() const { return impl_->shape.size(); }
std::uint64_t Tensor::node_id() const { return impl_->id; }

std::span<const double> Tensor::values() const { return impl_->values; }
std::span<double> Tensor::values_mut() { return impl_->values; }

double Tensor::value() const {
  if (size() != 1)
    throw std::invalid_argument("tensor: value() on non-scalar of shape " +
                                shape_str(impl_->shape));
  return impl_->values[0];
}

double Tensor::at(std::size_t i) const { return impl_->values.at(i); }

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool rg) { impl_->requires_grad = rg; }

std::span<const double> Tensor::grad() const {
  impl_->ensure_grad();
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->values.size(), 0.0); }

void Tensor::backward(bool accumulate) const {
  if (!impl_) throw std::invalid_argument("backward: undefined tensor");
  if (size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(impl_->shape));

  // Iterative post-order DFS: `order` ends up topologically sorted, inputs
  // before outputs.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  struct Frame {
    TensorImpl* impl;
    std::size_t next_child;
  };
  std::vector<Frame> stack;
  if (seen.insert(impl_.get()).second) stack.push_back({impl_.get(), 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    const auto& node = f.impl->creator;
    std::size_t n_children = node ? node->inputs.size() : 0;
    if (f.next_child < n_children) {
      TensorImpl* child = node->inputs[f.next_child++].get();
      if (seen.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(f.impl);
      stack.pop_back();
    }
  }

  if (!accumulate) {
    for (TensorImpl* t : order)
      if (t->requires_grad) t->grad.assign(t->values.size(), 0.0);
  }
  for (TensorImpl* t : order)
    if (t->requires_grad) t->ensure_grad();

  impl_->ensure_grad();
  impl_->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* t = *it;
    if (t->creator) t->creator->backward(*t);
  }
}

}  // namespace amtpp
