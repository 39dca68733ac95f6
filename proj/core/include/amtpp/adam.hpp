#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "amtpp/tensor.hpp"

namespace amtpp {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed list of named parameters. Moment slots
// are keyed by position; the parameter list must be stable across steps.
class Adam {
 public:
  Adam(AdamConfig cfg, std::span<const NamedParam> params);

  // Applies one update from the parameters' current gradients.
  // Throws std::runtime_error naming the parameter on a non-finite gradient.
  void step(std::span<const NamedParam> params);

  std::uint64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

  // Checkpoint plumbing: flat access to the moment buffers.
  std::span<const double> first_moment(std::size_t i) const { return m_[i]; }
  std::span<const double> second_moment(std::size_t i) const { return v_[i]; }
  void restore(std::uint64_t step, std::vector<std::vector<double>> m,
               std::vector<std::vector<double>> v);

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t step_ = 0;
};

}  // namespace amtpp
