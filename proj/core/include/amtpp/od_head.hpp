// Next-origin and next-destination heads. The origin distribution conditions
// on the hidden state concatenated with the time-head parameters; the
// destination distribution is the product of a dynamically generated rank-r
// column-stochastic OD matrix with the origin distribution. Impossible pairs
// (always including the diagonal) are removed with an additive -inf mask
// before the column softmax.

#pragma once

#include <string>
#include <vector>

#include "amtpp/tensor.hpp"

namespace amtpp {

// S×S additive mask: -inf on excluded (destination,origin) entries, 0
// elsewhere. The diagonal is always excluded.
struct OdMask {
  std::size_t stations = 0;
  Tensor additive;  // constant S×S

  static OdMask diagonal(std::size_t stations);
  // CSV rows `o,d` list additional forbidden pairs. A column whose every
  // entry is masked is rejected.
  static OdMask from_csv(const std::string& path, std::size_t stations);
};

struct OriginHead {
  Tensor phi;  // (c_model+4K)×S
  Tensor b;    // 1×S
};

struct OdFactors {
  Tensor phi_d1;  // (c_model+4K)×(S*r)
  Tensor phi_d2;
  std::size_t stations = 0;
  std::size_t rank = 0;
};

// context: 1×(c_model+4K) row [h | w | beta_hat | lambda_hat | gamma_hat].
Tensor origin_log_distribution(const Tensor& context, const OriginHead& head);
Tensor origin_distribution(const Tensor& context, const OriginHead& head);

// Column o holds P(next destination | next origin = o); columns sum to 1.
Tensor build_od_matrix(const Tensor& context, const OdFactors& f, const OdMask& mask);

// d_hat = OD * o_hat; takes the 1×S origin row, returns a 1×S row.
Tensor destination_distribution(const Tensor& od, const Tensor& origin_dist);

void write_od_csv(const std::string& path, const Tensor& od);

}  // namespace amtpp
