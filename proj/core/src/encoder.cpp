#include "amtpp/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "amtpp/ops.hpp"
#include "amtpp/rng.hpp"

namespace amtpp {

namespace {

// Fixed exponent row (1×J/2): entry i is 2i/J.
Tensor exponent_row(std::size_t J) {
  std::vector<double> c(J / 2);
  for (std::size_t i = 0; i < c.size(); ++i)
    c[i] = 2.0 * static_cast<double>(i) / static_cast<double>(J);
  return Tensor::from_values({1, J / 2}, std::move(c));
}

// Interleaves [sins | coses] columns into (sin0, cos0, sin1, cos1, ...).
std::vector<std::size_t> interleave_index(std::size_t J) {
  std::vector<std::size_t> idx(J);
  for (std::size_t i = 0; i < J / 2; ++i) {
    idx[2 * i] = i;
    idx[2 * i + 1] = J / 2 + i;
  }
  return idx;
}

Tensor positional_block(const Tensor& pos_col, const Tensor& rho, std::size_t J) {
  if (J == 0 || J % 2 != 0)
    throw std::invalid_argument("positional encoding: dimension must be positive and even");
  // angle[p,i] = pos_p * exp(-rho * 2i/J) = pos_p / L_pos^(2i/J)
  Tensor freq = exp(neg(mul(exponent_row(J), rho)));  // 1×J/2
  Tensor angles = matmul(pos_col, freq);              // n×J/2
  Tensor block = concat({sin(angles), cos(angles)}, 1);
  return index_select(block, 1, interleave_index(J));
}

}  // namespace

Tensor positional_encode(std::size_t pos, const Tensor& rho, std::size_t J) {
  Tensor pos_col = Tensor::from_values({1, 1}, {static_cast<double>(pos)});
  return reshape(positional_block(pos_col, rho, J), {J});
}

Tensor positional_table(std::size_t n_pos, const Tensor& rho, std::size_t J) {
  std::vector<double> pos(n_pos);
  for (std::size_t p = 0; p < n_pos; ++p) pos[p] = static_cast<double>(p);
  return positional_block(Tensor::from_values({n_pos, 1}, std::move(pos)), rho, J);
}

std::size_t EmbeddingTable::width() const {
  return table.shape()[1] + (features.defined() ? features.shape()[1] : 0);
}

Tensor EmbeddingTable::lookup(const std::vector<std::size_t>& ids) const {
  Tensor emb = add(index_select(table, 0, ids), bias);
  if (features.defined()) emb = concat({emb, index_select(features, 0, ids)}, 1);
  return emb;
}

Tensor HistoryEncoder::trip_matrix(const StepInputs& in) const {
  std::size_t n = in.size();
  if (n == 0) throw std::invalid_argument("trip_matrix: empty input");
  Tensor tau_col = Tensor::from_values({n, 1}, std::vector<double>(in.taus));
  Tensor time_emb;
  if (cfg.no_time_embedding) {
    time_emb = tau_col;
  } else {
    Tensor hour_tbl = positional_table(24, pe.rho_hour, pe.J_h);
    Tensor week_tbl = positional_table(7, pe.rho_week, pe.J_w);
    time_emb = concat({index_select(week_tbl, 0, in.weekdays),
                       index_select(hour_tbl, 0, in.hours), tau_col},
                      1);
  }
  return concat({time_emb, origin_emb.lookup(in.origins), dest_emb.lookup(in.dests)}, 1);
}

Tensor HistoryEncoder::attend(const Tensor& E, Rng* dropout_rng) const {
  Tensor x = E;
  std::size_t n = x.shape()[0];
  // Strict upper triangle: position i may attend to 1..i only.
  std::vector<std::uint8_t> causal(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) causal[i * n + j] = 1;

  for (const auto& layer : layers) {
    double inv_sqrt_ck = 1.0 / std::sqrt(static_cast<double>(cfg.c_k()));
    std::vector<Tensor> head_outs;
    head_outs.reserve(layer.heads.size());
    for (const auto& head : layer.heads) {
      Tensor q = matmul(x, head.wq);
      Tensor k = matmul(x, head.wk);
      Tensor v = matmul(x, head.wv);
      Tensor scores = mul(matmul(q, transpose(k)), inv_sqrt_ck);
      Tensor att = softmax(masked_fill(scores, causal, -HUGE_VAL), 1);
      if (dropout_rng && cfg.dropout > 0.0) att = dropout(att, cfg.dropout, *dropout_rng);
      head_outs.push_back(matmul(att, v));
    }
    x = gelu(matmul(concat(std::span<const Tensor>(head_outs), 1), layer.w_out));
  }
  return x;
}

Tensor HistoryEncoder::encode(const StepInputs& in, Rng* dropout_rng) const {
  if (in.size() == 0) return h0;
  Tensor H = attend(trip_matrix(in), dropout_rng);
  return concat({h0, H}, 0);
}

}  // namespace amtpp
