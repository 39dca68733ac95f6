// Trip-sequence encoder: periodic positional encodings with a learnable
// scale, origin/destination embeddings (optionally extended with per-station
// features), and masked multi-head self-attention with a GELU output, plus a
// learned start state for empty histories.

#pragma once

#include <cstdint>
#include <vector>

#include "amtpp/tensor.hpp"

namespace amtpp {

// Sinusoidal encoding of a discrete position with learnable scale L_pos,
// kept positive by parameterizing rho = log(L_pos):
//   out[2i]   = sin(pos / L_pos^(2i/J))
//   out[2i+1] = cos(pos / L_pos^(2i/J))
// Differentiable in rho. J must be even.
Tensor positional_encode(std::size_t pos, const Tensor& rho, std::size_t J);

// All positions 0..n_pos-1 stacked into an (n_pos × J) table; row p equals
// positional_encode(p, rho, J).
Tensor positional_table(std::size_t n_pos, const Tensor& rho, std::size_t J);

struct PositionalEncodingParams {
  Tensor rho_hour;  // scalar, log L_pos for the hour encoding
  Tensor rho_week;  // scalar, log L_pos for the week encoding
  std::size_t J_h = 64;
  std::size_t J_w = 64;
};

// Learnable station embedding with one extra zero-initialized padding row at
// index S. Optional feature rows ((S+1)×P) are appended to each lookup.
struct EmbeddingTable {
  Tensor table;     // (S+1)×J
  Tensor bias;      // 1×J
  Tensor features;  // (S+1)×P constant; undefined when P == 0

  std::size_t width() const;  // J + P
  Tensor lookup(const std::vector<std::size_t>& ids) const;  // n×width
};

struct AttentionHeadParams {
  Tensor wq, wk, wv;  // J×c_k, J×c_k, J×c_v
};

struct AttentionLayerParams {
  std::vector<AttentionHeadParams> heads;
  Tensor w_out;  // (L*c_v)×c_model
};

// Per-trip plain inputs for one user, already truncated to the attention
// window. taus[0] is a placeholder for the undefined first gap.
struct StepInputs {
  std::vector<double> taus;
  std::vector<std::size_t> hours;
  std::vector<std::size_t> weekdays;
  std::vector<std::size_t> origins;
  std::vector<std::size_t> dests;
  std::size_t size() const { return taus.size(); }
};

struct EncoderConfig {
  std::size_t stations = 0;
  std::size_t J_o = 64, J_d = 64, J_h = 64, J_w = 64;
  std::size_t heads = 4;
  std::size_t c_model = 100;
  std::size_t layers = 1;
  double dropout = 0.0;
  bool no_time_embedding = false;  // time embedding reduced to the raw tau
  std::size_t feature_dim = 0;

  std::size_t c_k() const { return std::max<std::size_t>(1, c_model / heads); }
  std::size_t c_v() const { return c_k(); }
  std::size_t time_width() const { return no_time_embedding ? 1 : J_w + J_h + 1; }
  std::size_t trip_width() const {
    return time_width() + J_o + feature_dim + J_d + feature_dim;
  }
};

class Rng;

struct HistoryEncoder {
  EncoderConfig cfg;
  PositionalEncodingParams pe;
  EmbeddingTable origin_emb;
  EmbeddingTable dest_emb;
  std::vector<AttentionLayerParams> layers;
  Tensor h0;  // 1×c_model learned start state

  // concat(time, origin, dest) embedding rows, one per trip (Eq-style order
  // week | hour | tau inside the time part).
  Tensor trip_matrix(const StepInputs& in) const;

  // Causal masked multi-head attention over embedding rows; n×c_model.
  Tensor attend(const Tensor& E, Rng* dropout_rng = nullptr) const;

  // States [h_0, h_1, ..., h_n] as an (n+1)×c_model tensor; row i encodes
  // the first i trips, so the prediction for trip i+1 conditions on row i.
  Tensor encode(const StepInputs& in, Rng* dropout_rng = nullptr) const;
};

}  // namespace amtpp
