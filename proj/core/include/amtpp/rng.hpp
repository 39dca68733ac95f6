// Deterministic random source. All draws are derived from the raw 64-bit
// stream with fixed arithmetic (no std::*_distribution), so a seed produces
// the same sequence on every platform and standard library.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace amtpp {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed0_(seed), gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // Uniform on [0,1) with 53-bit resolution.
  double uniform() { return (gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  double normal() {
    double u1 = 1.0 - uniform();  // (0,1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double exponential(double mean) { return -mean * std::log(1.0 - uniform()); }

  // Child stream derived from the construction seed only, so per-unit
  // streams do not depend on draw or iteration order.
  Rng fork(std::uint64_t stream) const {
    return Rng(mix(seed0_ ^ mix(stream + 0x9e3779b97f4a7c15ull)));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    // Fisher–Yates; avoids std::shuffle so the permutation is portable.
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::string state() const {
    std::ostringstream os;
    os << seed0_ << ' ' << gen_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> seed0_ >> gen_;
  }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
  }

  std::uint64_t seed0_;
  std::mt19937_64 gen_;
};

}  // namespace amtpp
