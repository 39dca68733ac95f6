#include "amtpp/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace amtpp {

Adam::Adam(AdamConfig cfg, std::span<const NamedParam> params) : cfg_(cfg) {
  if (!(cfg_.lr > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

void Adam::step(std::span<const NamedParam> params) {
  if (params.size() != m_.size())
    throw std::invalid_argument("adam: parameter list changed size");
  ++step_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const NamedParam& p = params[i];
    auto g = p.tensor.grad();
    auto w = const_cast<Tensor&>(p.tensor).values_mut();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!std::isfinite(g[j]))
        throw std::runtime_error("adam: non-finite gradient in parameter '" + p.name +
                                 "' at element " + std::to_string(j));
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      double m_hat = m[j] / bc1;
      double v_hat = v[j] / bc2;
      w[j] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

void Adam::restore(std::uint64_t step, std::vector<std::vector<double>> m,
                   std::vector<std::vector<double>> v) {
  if (m.size() != m_.size() || v.size() != v_.size())
    throw std::invalid_argument("adam: restored state does not match parameter list");
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i].size() != m_[i].size() || v[i].size() != v_[i].size())
      throw std::invalid_argument("adam: restored moment shape mismatch");
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace amtpp
