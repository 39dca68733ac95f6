#include "amtpp/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "amtpp/rng.hpp"

namespace amtpp {

namespace {

using Impl = std::shared_ptr<TensorImpl>;

constexpr double kInvSqrtPiTwo = 1.1283791670955126;  // 2/√π

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  throw std::invalid_argument(std::string(op) + ": " + detail);
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) shape_error(op, "expected rank-2 tensor, got " + shape_str(t.shape()));
}

// Broadcast layout for an elementwise binary: per-axis element strides of
// both inputs aligned to the output shape, 0 on broadcast axes.
struct BCast {
  Shape out;
  std::vector<std::size_t> sa, sb;
  bool trivial;  // shapes identical
};

std::vector<std::size_t> row_major_strides(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

BCast broadcast_layout(const char* op, const Shape& a, const Shape& b) {
  BCast bc;
  bc.trivial = (a == b);
  std::size_t rank = std::max(a.size(), b.size());
  bc.out.assign(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1)
      shape_error(op, "shapes " + shape_str(a) + " and " + shape_str(b) +
                          " are not broadcast-compatible");
    bc.out[i] = std::max(da, db);
  }
  auto strides_for = [&](const Shape& s) {
    auto natural = row_major_strides(s);
    std::vector<std::size_t> st(rank, 0);
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::size_t axis = rank - s.size() + i;
      st[axis] = (s[i] == 1 && bc.out[axis] != 1) ? 0 : natural[i];
    }
    return st;
  };
  bc.sa = strides_for(a);
  bc.sb = strides_for(b);
  return bc;
}

// Walks the broadcast output space calling fn(out_flat, a_flat, b_flat).
template <typename F>
void for_broadcast(const BCast& bc, F&& fn) {
  std::size_t n = numel(bc.out);
  if (bc.trivial) {
    for (std::size_t i = 0; i < n; ++i) fn(i, i, i);
    return;
  }
  std::size_t rank = bc.out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    fn(i, ia, ib);
    for (std::size_t ax = rank; ax-- > 0;) {
      idx[ax]++;
      ia += bc.sa[ax];
      ib += bc.sb[ax];
      if (idx[ax] < bc.out[ax]) break;
      ia -= bc.sa[ax] * bc.out[ax];
      ib -= bc.sb[ax] * bc.out[ax];
      idx[ax] = 0;
    }
  }
}

Tensor make_binary(const char* op, const Tensor& a, const Tensor& b,
                   double (*fwd)(double, double),
                   void (*bwd)(double ga_out, double va, double vb, double& ga, double& gb)) {
  BCast bc = broadcast_layout(op, a.shape(), b.shape());
  std::vector<double> out(numel(bc.out));
  const auto& av = a.impl()->values;
  const auto& bv = b.impl()->values;
  for_broadcast(bc, [&](std::size_t i, std::size_t ia, std::size_t ib) {
    out[i] = fwd(av[ia], bv[ib]);
  });
  auto out_impl = detail::make_impl(bc.out, std::move(out));
  auto node = std::make_shared<Node>();
  node->op = op;
  node->inputs = {a.impl(), b.impl()};
  node->backward = [bc, bwd](const TensorImpl& o) {
    auto& ai = *o.creator->inputs[0];
    auto& bi = *o.creator->inputs[1];
    if (ai.requires_grad) ai.ensure_grad();
    if (bi.requires_grad) bi.ensure_grad();
    double dummy = 0.0;
    for_broadcast(bc, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      double& ga = ai.requires_grad ? ai.grad[ia] : dummy;
      double& gb = bi.requires_grad ? bi.grad[ib] : dummy;
      bwd(o.grad[i], ai.values[ia], bi.values[ib], ga, gb);
    });
  };
  detail::finalize(out_impl, std::move(node));
  return Tensor(out_impl);
}

Tensor make_unary(const char* op, const Tensor& a, double (*fwd)(double),
                  double (*dfdx)(double x, double y)) {
  const auto& av = a.impl()->values;
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  auto out_impl = detail::make_impl(a.shape(), std::move(out));
  auto node = std::make_shared<Node>();
  node->op = op;
  node->inputs = {a.impl()};
  node->backward = [dfdx](const TensorImpl& o) {
    auto& ai = *o.creator->inputs[0];
    if (!ai.requires_grad) return;
    ai.ensure_grad();
    for (std::size_t i = 0; i < o.values.size(); ++i)
      ai.grad[i] += o.grad[i] * dfdx(ai.values[i], o.values[i]);
  };
  detail::finalize(out_impl, std::move(node));
  return Tensor(out_impl);
}

void matmul_kernel(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n) {
  std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return make_binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double g, double, double, double& ga, double& gb) {
        ga += g;
        gb += g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return make_binary(
      "subtract", a, b, [](double x, double y) { return x - y; },
      [](double g, double, double, double& ga, double& gb) {
        ga += g;
        gb -= g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return make_binary(
      "multiply", a, b, [](double x, double y) { return x * y; },
      [](double g, double x, double y, double& ga, double& gb) {
        ga += g * y;
        gb += g * x;
      });
}

Tensor divide(const Tensor& a, const Tensor& b) {
  for (double v : b.values())
    if (v == 0.0) throw std::domain_error("divide: division by zero");
  return make_binary(
      "divide", a, b, [](double x, double y) { return x / y; },
      [](double g, double x, double y, double& ga, double& gb) {
        ga += g / y;
        gb -= g * x / (y * y);
      });
}

Tensor add(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
Tensor sub(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
Tensor sub(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
Tensor mul(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
Tensor neg(const Tensor& a) { return mul(a, -1.0); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  std::size_t m = a.shape()[0], k = a.shape()[1];
  std::size_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2)
    shape_error("matmul", "inner dimensions disagree: " + shape_str(a.shape()) +
                              " vs " + shape_str(b.shape()));
  std::vector<double> out(m * n);
  matmul_kernel(a.values().data(), b.values().data(), out.data(), m, k, n);
  auto out_impl = detail::make_impl({m, n}, std::move(out));
  auto node = std::make_shared<Node>();
  node->op = "matmul";
  node->inputs = {a.impl(), b.impl()};
  node->backward = [m, k, n](const TensorImpl& o) {
    auto& ai = *o.creator->inputs[0];
    auto& bi = *o.creator->inputs[1];
    if (ai.requires_grad) {
      ai.ensure_grad();
      // dA[i,p] += sum_j dC[i,j] * B[p,j]
      for (std::size_t i = 0; i < m; ++i) {
        const double* gc = o.grad.data() + i * n;
        double* ga = ai.grad.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = bi.values.data() + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += gc[j] * brow[j];
          ga[p] += acc;
        }
      }
    }
    if (bi.requires_grad) {
      bi.ensure_grad();
      // dB[p,j] += sum_i A[i,p] * dC[i,j]
      for (std::size_t i = 0; i < m; ++i) {
        const double* arow = ai.values.data() + i * k;
        const double* gc = o.grad.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          double av = arow[p];
          double* gb = bi.grad.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gb[j] += av * gc[j];
        }
      }
    }
  };
  detail::finalize(out_impl, std::move(node));
  return Tensor(out_impl);
}

Tensor transpose(const Tensor& a) {
  require_rank2("transpose", a);
  std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(m * n);
  const auto& av = a.impl()->values;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  auto out_impl = detail::make_impl({n, m}, std::move(out));
  auto node = std::make_shared<Node>();
  node->op = "transpose";
  node->inputs = {a.impl()};
  node->backward = [m, n](const TensorImpl& o) {
    auto& ai = *o.creator->inputs[0];
    if (!ai.requires_grad) return;
    ai.ensure_grad();
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < m; ++i) ai.grad[i * n + j] += o.grad[j * m + i];
  };
  detail::finalize(out_impl, std::move(node));
  return Tensor(out_impl);
}

Tensor exp(const Tensor& a) {
  return make_unary(
      "exponential", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double v : a.values())
    if (!(v > 0.0)) throw std::domain_error("natural-log: input must be strictly positive");
  return make_unary(
      "natural-log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor pow(const Tensor& a, double p) {
  bool integral = p == std::floor(p);
  for (double v : a.values()) {
    if (v < 0.0 && !integral)
      throw std::domain_error("power: negative base with non-integer exponent");
    if (v == 0.0 && p < 0.0) throw std::domain_error("power: zero base with negative exponent");
  }
  const auto& av = a.impl()->values;
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::pow(av[i], p);
  auto out_impl = detail::make_impl(a.shape(), std::move(out));
  auto node = std::make_shared<Node>();
  node->op = "power";
  node->inputs = {a.impl()};
  node->backward = [p](const TensorImpl& o) {
    auto& ai = *o.creator->inputs[0];
    if (!ai.requires_grad) return;
    ai.ensure_grad();
    for (std::size_t i = 0; i < o.values.size(); ++i)
      ai.grad[i] += o.grad[i] * p * std::pow(ai.values[i], p - 1.0);
  };
  detail::finalize(out_impl, std::move(node));
  return Tensor(out_impl);
}

Tensor sin(const Tensor& a) {
  return make_unary(
      "sine", a, [](double x) { return std::sin(x); },
      [](double x, double) { return std::cos(x); });
}

Tensor cos(const Tensor& a) {
  return make_unary(
      "cosine", a, [](double x) { return std::cos(x); },
      [](double x, double) { return -std::sin(x); });
}

Tensor erf(const Tensor& a) {
  return make_unary(
      "gaussian-error-function", a, [](double x) { return std::erf(x); },
      [](double x, double) { return kInvSqrtPiTwo * std::exp(-x * x); });
}

Tensor softmax(const Tensor& a, int axis) {
  if (a.rank() == 0) shape_error("softmax", "scalar input");
  std::size_t ax;
  if (axis == -1)
    ax = a.rank() - 1;
  else if (axis >= 0 && static_cast<std::size_t>(axis) < a.rank())
    ax = static_cast<std::size_t>(axis);
  else
    shape_error("softmax", "axis out of range");
  if (a.rank() > 2) shape_error("softmax", "rank > 2 unsupported");

  // View as (slices × len) with a stride so rows (axis 1) and columns
  // (axis 0) share one code path.
  std::size_t len = a.shape()[ax];
  std::size_t slices = a.size() / len;
  std::size_t stride = (a.rank() == 2 && ax == 0) ? a.shape()[1] : 1;
  std::size_t slice_step = (a.rank() == 2 && ax == 0) ? 1 : len;

  const auto& av = a.impl()->values;
  std::vector<double> out(av.size());
  for (std::size_t s = 0; s < slices; ++s) {
    std::size_t base = s * slice_step;
    double mx = -HUGE_VAL;
    for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, av[base + i * stride]);
    double denom = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      double e = std::exp(av[base + i * stride] - mx);
      out[base + i * stride] = e;
      denom += e;
    }
    for (std::size_t i = 0; i < len; ++i) out[base + i * stride] /= denom;
  }
  auto out_impl = detail::make_impl(a.shape(), std::move(out));
  auto node = std::make_shared<Node>();
  node->op = "softmax";
  node->inputs = {a.impl()};
  node->backward = [len, slices, stride, slice_step](const TensorImpl& o) {
    auto& ai = *o.creator->inputs[0];
    if (!ai.requires_grad) return;
    ai.ensure_grad();
    for (std::size_t s = 0; s < slices; ++s) {
      std::size_t base = s * slice_step;
      double dot = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        std::size_t k = base + i * stride;
        dot += o.grad[k] * o.values[k];
      }
      for (std::size_t i = 0; i < len; ++i) {
        std::size_t k = base + i * stride;
        ai.grad[k] += o.values[k] * (o.grad[k] - dot);
      }
    }
  };
  detail::finalize(out_impl, std::move(node));
  return Tensor(out_impl);
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) shape_error("concatenate", "no inputs");
  std::size_t rank = parts[0].rank();
  if (axis >= rank) shape_error("concatenate", "axis out of range");
  Shape out_shape = parts[0].shape();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const Shape& s = parts[p].shape();
    if (s.size() != rank) shape_error("concatenate", "rank mismatch");
    for (std::size_t i = 0; i < rank; ++i)
      if (i != axis && s[i] != out_shape[i])
        shape_error("concatenate", "shape mismatch off the concat axis: " +
                                       shape_str(parts[0].shape()) + " vs " + shape_str(s));
    out_shape[axis] += s[axis];
  }

  // Treat every tensor as (outer × axis_len × inner).
  std::size_t inner = 1, outer = 1;
  for (std::size_t i = axis + 1; i < rank; ++i) inner *= out_shape[i];
  for (std::size_t i = 0; i < axis; ++i) outer *= out_shape[i];
  std::size_t out_axis = out_shape[axis];

  std::vector<double> out(numel(out_shape));
  std::size_t offset = 0;
  std::vector<std::size_t> offsets(parts.size());
  std::vector<std::size_t> lens(parts.size());
  for (std::size_t p = 0; p < parts.size(); ++p) {
    offsets[p] = offset;
    lens[p] = parts[p].shape()[axis];
    const auto& pv = parts[p].impl()->values;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy(pv.begin() + o * lens[p] * inner, pv.begin() + (o + 1) * lens[p] * inner,
                out.begin() + (o * out_axis + offset) * inner);
    offset += lens[p];
  }
  auto out_impl = detail::make_impl(out_shape, std::move(out));
  auto node = std::make_shared<Node>();
  node->op = "concatenate";
  for (const Tensor& t : parts) node->inputs.push_back(t.impl());
  node->backward = [outer, inner, out_axis, offsets, lens](const TensorImpl& o) {
    for (std::size_t p = 0; p < o.creator->inputs.size(); ++p) {
      auto& pi = *o.creator->inputs[p];
      if (!pi.requires_grad) continue;
      pi.ensure_grad();
      for (std::size_t ou = 0; ou < outer; ++ou) {
        const double* src = o.grad.data() + (ou * out_axis + offsets[p]) * inner;
        double* dst = pi.grad.data() + ou * lens[p] * inner;
        for (std::size_t i = 0; i < lens[p] * inner; ++i) dst[i] += src[i];
      }
    }
  };
  detail::finalize(out_impl, std::move(node));
  return Tensor(out_impl);
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  std::vector<Tensor> v(parts);
  return concat(std::span<const Tensor>(v), axis);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size())
    shape_error("reshape", "cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  auto out_impl = detail::make_impl(std::move(shape), std::vector<double>(a.values().begin(), a.values().end()));
  auto node = std::make_shared<Node>();
  node->op = "reshape";
  node->inputs = {a.impl()};
  node->backward = [](const TensorImpl& o) {
    auto& ai = *o.creator->inputs[0];
    if (!ai.requires_grad) return;
    ai.ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) ai.grad[i] += o.grad[i];
  };
  detail::finalize(out_impl, std::move(node));
  return Tensor(out_impl);
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t stop) {
  if (axis >= a.rank()) shape_error("slice", "axis out of range");
  if (start >= stop || stop > a.shape()[axis])
    shape_error("slice", "bad range [" + std::to_string(start) + "," + std::to_string(stop) +
                             ") on axis extent " + std::to_string(a.shape()[axis]));
  Shape out_shape = a.shape();
  out_shape[axis] = stop - start;
  std::size_t inner = 1, outer = 1;
  for (std::size_t i = axis + 1; i < a.rank(); ++i) inner *= a.shape()[i];
  for (std::size_t i = 0; i < axis; ++i) outer *= a.shape()[i];
  std::size_t in_axis = a.shape()[axis], out_axis = stop - start;

  const auto& av = a.impl()->values;
  std::vector<double> out(numel(out_shape));
  for (std::size_t o = 0; o < outer; ++o)
    std::copy(av.begin() + (o * in_axis + start) * inner,
              av.begin() + (o * in_axis + stop) * inner, out.begin() + o * out_axis * inner);
  auto out_impl = detail::make_impl(out_shape, std::move(out));
  auto node = std::make_shared<Node>();
  node->op = "slice";
  node->inputs = {a.impl()};
  node->backward = [outer, inner, in_axis, out_axis, start](const TensorImpl& o) {
    auto& ai = *o.creator->inputs[0];
    if (!ai.requires_grad) return;
    ai.ensure_grad();
    for (std::size_t ou = 0; ou < outer; ++ou) {
      const double* src = o.grad.data() + ou * out_axis * inner;
      double* dst = ai.grad.data() + (ou * in_axis + start) * inner;
      for (std::size_t i = 0; i < out_axis * inner; ++i) dst[i] += src[i];
    }
  };
  detail::finalize(out_impl, std::move(node));
  return Tensor(out_impl);
}

Tensor index_select(const Tensor& a, std::size_t axis, std::vector<std::size_t> idx) {
  if (a.rank() < 1 || a.rank() > 2) shape_error("index-gather", "rank must be 1 or 2");
  if (axis >= a.rank()) shape_error("index-gather", "axis out of range");
  std::size_t extent = a.shape()[axis];
  for (std::size_t i : idx)
    if (i >= extent)
      shape_error("index-gather", "index " + std::to_string(i) + " out of range for extent " +
                                      std::to_string(extent));
  Shape out_shape = a.shape();
  out_shape[axis] = idx.size();
  std::size_t rows = a.rank() == 2 ? a.shape()[0] : 1;
  std::size_t cols = a.rank() == 2 ? a.shape()[1] : a.shape()[0];

  const auto& av = a.impl()->values;
  std::vector<double> out(numel(out_shape));
  if (axis == 0 && a.rank() <= 2) {
    std::size_t width = a.rank() == 2 ? cols : 1;
    for (std::size_t r = 0; r < idx.size(); ++r)
      std::copy(av.begin() + idx[r] * width, av.begin() + (idx[r] + 1) * width,
                out.begin() + r * width);
  } else {  // axis == 1, rank 2
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < idx.size(); ++c) out[r * idx.size() + c] = av[r * cols + idx[c]];
  }
  auto out_impl = detail::make_impl(out_shape, std::move(out));
  auto node = std::make_shared<Node>();
  node->op = "index-gather";
  node->inputs = {a.impl()};
  std::size_t rank = a.rank();
  node->backward = [axis, idx, rows, cols, rank](const TensorImpl& o) {
    auto& ai = *o.creator->inputs[0];
    if (!ai.requires_grad) return;
    ai.ensure_grad();
    if (axis == 0) {
      std::size_t width = rank == 2 ? cols : 1;
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const double* src = o.grad.data() + r * width;
        double* dst = ai.grad.data() + idx[r] * width;
        for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
      }
    } else {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < idx.size(); ++c)
          ai.grad[r * cols + idx[c]] += o.grad[r * idx.size() + c];
    }
  };
  detail::finalize(out_impl, std::move(node));
  return Tensor(out_impl);
}

Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  auto out_impl = detail::make_impl({}, {acc});
  auto node = std::make_shared<Node>();
  node->op = "sum-reduce";
  node->inputs = {a.impl()};
  node->backward = [](const TensorImpl& o) {
    auto& ai = *o.creator->inputs[0];
    if (!ai.requires_grad) return;
    ai.ensure_grad();
    for (double& g : ai.grad) g += o.grad[0];
  };
  detail::finalize(out_impl, std::move(node));
  return Tensor(out_impl);
}

Tensor sum_axis(const Tensor& a, std::size_t axis) {
  require_rank2("sum-reduce", a);
  if (axis > 1) shape_error("sum-reduce", "axis out of range");
  std::size_t m = a.shape()[0], n = a.shape()[1];
  const auto& av = a.impl()->values;
  Shape out_shape = axis == 1 ? Shape{m, 1} : Shape{1, n};
  std::vector<double> out(numel(out_shape), 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[axis == 1 ? i : j] += av[i * n + j];
  auto out_impl = detail::make_impl(out_shape, std::move(out));
  auto node = std::make_shared<Node>();
  node->op = "sum-reduce";
  node->inputs = {a.impl()};
  node->backward = [m, n, axis](const TensorImpl& o) {
    auto& ai = *o.creator->inputs[0];
    if (!ai.requires_grad) return;
    ai.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ai.grad[i * n + j] += o.grad[axis == 1 ? i : j];
  };
  detail::finalize(out_impl, std::move(node));
  return Tensor(out_impl);
}

Tensor broadcast_to(const Tensor& a, Shape shape) {
  BCast bc = broadcast_layout("broadcast", a.shape(), shape);
  if (bc.out != shape)
    shape_error("broadcast", "cannot broadcast " + shape_str(a.shape()) + " to " + shape_str(shape));
  std::vector<double> out(numel(shape));
  const auto& av = a.impl()->values;
  for_broadcast(bc, [&](std::size_t i, std::size_t ia, std::size_t) { out[i] = av[ia]; });
  auto out_impl = detail::make_impl(shape, std::move(out));
  auto node = std::make_shared<Node>();
  node->op = "broadcast";
  node->inputs = {a.impl()};
  node->backward = [bc](const TensorImpl& o) {
    auto& ai = *o.creator->inputs[0];
    if (!ai.requires_grad) return;
    ai.ensure_grad();
    for_broadcast(bc, [&](std::size_t i, std::size_t ia, std::size_t) { ai.grad[ia] += o.grad[i]; });
  };
  detail::finalize(out_impl, std::move(node));
  return Tensor(out_impl);
}

Tensor masked_fill(const Tensor& a, const std::vector<std::uint8_t>& mask, double value) {
  if (mask.size() != a.size()) shape_error("masked-fill", "mask size mismatch");
  const auto& av = a.impl()->values;
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = mask[i] ? value : av[i];
  auto out_impl = detail::make_impl(a.shape(), std::move(out));
  auto node = std::make_shared<Node>();
  node->op = "masked-fill";
  node->inputs = {a.impl()};
  node->backward = [mask](const TensorImpl& o) {
    auto& ai = *o.creator->inputs[0];
    if (!ai.requires_grad) return;
    ai.ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      if (!mask[i]) ai.grad[i] += o.grad[i];
  };
  detail::finalize(out_impl, std::move(node));
  return Tensor(out_impl);
}

Tensor select_ge0(const Tensor& sel, const Tensor& if_ge, const Tensor& if_lt) {
  if (sel.shape() != if_ge.shape() || sel.shape() != if_lt.shape())
    shape_error("select", "all operands must share a shape");
  const auto& sv = sel.impl()->values;
  const auto& gv = if_ge.impl()->values;
  const auto& lv = if_lt.impl()->values;
  std::vector<double> out(sv.size());
  std::vector<std::uint8_t> take_ge(sv.size());
  for (std::size_t i = 0; i < sv.size(); ++i) {
    take_ge[i] = sv[i] >= 0.0;
    out[i] = take_ge[i] ? gv[i] : lv[i];
  }
  auto out_impl = detail::make_impl(sel.shape(), std::move(out));
  auto node = std::make_shared<Node>();
  node->op = "select";
  node->inputs = {if_ge.impl(), if_lt.impl()};
  node->backward = [take_ge](const TensorImpl& o) {
    auto& gi = *o.creator->inputs[0];
    auto& li = *o.creator->inputs[1];
    if (gi.requires_grad) gi.ensure_grad();
    if (li.requires_grad) li.ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      if (take_ge[i]) {
        if (gi.requires_grad) gi.grad[i] += o.grad[i];
      } else {
        if (li.requires_grad) li.grad[i] += o.grad[i];
      }
    }
  };
  detail::finalize(out_impl, std::move(node));
  return Tensor(out_impl);
}

Tensor gelu(const Tensor& a) {
  constexpr double inv_sqrt2 = 0.7071067811865476;
  return mul(mul(a, 0.5), add(erf(mul(a, inv_sqrt2)), 1.0));
}

Tensor row_max_detached(const Tensor& a) {
  require_rank2("row-max", a);
  std::size_t m = a.shape()[0], n = a.shape()[1];
  const auto& av = a.impl()->values;
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = av[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, av[i * n + j]);
    out[i] = mx;
  }
  return Tensor::from_values({m, 1}, std::move(out));
}

Tensor logsumexp_rows(const Tensor& a) {
  // Shift by the detached row max: the value is exact and the gradient
  // collapses to softmax(a) per row.
  Tensor m = row_max_detached(a);
  Tensor shifted = sub(a, m);
  return add(log(sum_axis(exp(shifted), 1)), m);
}

Tensor log_softmax_rows(const Tensor& a) { return sub(a, logsumexp_rows(a)); }

Tensor dropout(const Tensor& a, double rate, Rng& rng) {
  if (rate == 0.0) return a;
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
  double keep = 1.0 - rate;
  std::vector<double> mask(a.size());
  for (double& v : mask) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return mul(a, Tensor::from_values(a.shape(), std::move(mask)));
}

}  // namespace amtpp
