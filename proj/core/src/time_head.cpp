#include "amtpp/time_head.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "amtpp/ops.hpp"
#include "amtpp/rng.hpp"

namespace amtpp {

namespace {

constexpr double kLogSqrt2Pi = 0.9189385332046727;  // log sqrt(2*pi)

double logsumexp(const std::vector<double>& xs) {
  double mx = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

// Mass left of the knot: 1/(1+gamma_hat^2) = gamma/(lambda+gamma).
double left_mass(double gamma_hat) { return 1.0 / (1.0 + gamma_hat * gamma_hat); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865476); }

}  // namespace

void AllParams::validate() const {
  if (w.size() != beta_hat.size() || w.size() != lambda_hat.size() ||
      w.size() != gamma_hat.size() || w.empty())
    throw std::invalid_argument("ALL mixture: inconsistent component counts");
  for (std::size_t k = 0; k < w.size(); ++k)
    if (!(lambda_hat[k] > 0.0) || !(gamma_hat[k] > 0.0))
      throw std::domain_error("ALL mixture: scale parameters must be positive");
}

double al_log_density(double y, double beta_hat, double lambda_hat, double gamma_hat) {
  if (!(lambda_hat > 0.0) || !(gamma_hat > 0.0))
    throw std::domain_error("asymmetric Laplace: scale parameters must be positive");
  double log_c = std::log(lambda_hat) - std::log(gamma_hat + 1.0 / gamma_hat);
  double dev = y - beta_hat;
  double exponent = dev >= 0.0 ? -(lambda_hat / gamma_hat) * dev : lambda_hat * gamma_hat * dev;
  return log_c + exponent;
}

double mixture_log_density_y(double y, const AllParams& p) {
  p.validate();
  std::vector<double> terms(p.components());
  for (std::size_t k = 0; k < terms.size(); ++k)
    terms[k] = std::log(p.w[k]) + al_log_density(y, p.beta_hat[k], p.lambda_hat[k], p.gamma_hat[k]);
  return logsumexp(terms);
}

double tau_log_likelihood(double tau, const AllParams& p) {
  if (!(tau > 0.0)) throw std::domain_error("tau_log_likelihood: tau must be positive");
  double y = std::log(tau);
  return mixture_log_density_y(y, p) - y;
}

double tau_cdf(double tau, const AllParams& p) {
  if (!(tau > 0.0)) throw std::domain_error("tau_cdf: tau must be positive");
  p.validate();
  double y = std::log(tau);
  double acc = 0.0;
  for (std::size_t k = 0; k < p.components(); ++k) {
    double pl = left_mass(p.gamma_hat[k]);
    double dev = y - p.beta_hat[k];
    double f = dev < 0.0
                   ? pl * std::exp(p.lambda_hat[k] * p.gamma_hat[k] * dev)
                   : 1.0 - (1.0 - pl) * std::exp(-(p.lambda_hat[k] / p.gamma_hat[k]) * dev);
    acc += p.w[k] * f;
  }
  return acc;
}

double tau_quantile(const AllParams& p, double q) {
  p.validate();
  if (!(q > 0.0 && q < 1.0)) throw std::domain_error("tau_quantile: q must be in (0,1)");
  // Bracket in y across all component tails, then bisect the monotone CDF.
  double lo = HUGE_VAL, hi = -HUGE_VAL;
  for (std::size_t k = 0; k < p.components(); ++k) {
    lo = std::min(lo, p.beta_hat[k] - 80.0 / (p.lambda_hat[k] * p.gamma_hat[k]));
    hi = std::max(hi, p.beta_hat[k] + 80.0 * p.gamma_hat[k] / p.lambda_hat[k]);
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (tau_cdf(std::exp(mid), p) < q)
      lo = mid;
    else
      hi = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

double sample_tau(const AllParams& p, Rng& rng) {
  p.validate();
  double x = rng.uniform();
  std::size_t k = p.components() - 1;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.components(); ++i) {
    acc += p.w[i];
    if (x < acc) {
      k = i;
      break;
    }
  }
  double pl = left_mass(p.gamma_hat[k]);
  double u = rng.uniform();
  double y;
  if (u < pl)
    y = p.beta_hat[k] + std::log(u / pl) / (p.lambda_hat[k] * p.gamma_hat[k]);
  else
    y = p.beta_hat[k] -
        (p.gamma_hat[k] / p.lambda_hat[k]) * std::log((1.0 - u) / (1.0 - pl));
  return std::exp(y);
}

void LogNormParams::validate() const {
  if (w.size() != mu.size() || w.size() != sigma.size() || w.empty())
    throw std::invalid_argument("log-normal mixture: inconsistent component counts");
  for (double s : sigma)
    if (!(s > 0.0)) throw std::domain_error("log-normal mixture: sigma must be positive");
}

double lognormal_mixture_log_density_y(double y, const LogNormParams& p) {
  p.validate();
  std::vector<double> terms(p.components());
  for (std::size_t k = 0; k < terms.size(); ++k) {
    double z = (y - p.mu[k]) / p.sigma[k];
    terms[k] = std::log(p.w[k]) - 0.5 * z * z - std::log(p.sigma[k]) - kLogSqrt2Pi;
  }
  return logsumexp(terms);
}

double lognormal_mixture_log_likelihood(double tau, const LogNormParams& p) {
  if (!(tau > 0.0)) throw std::domain_error("lognormal_mixture_log_likelihood: tau must be positive");
  double y = std::log(tau);
  return lognormal_mixture_log_density_y(y, p) - y;
}

double lognormal_mixture_cdf(double tau, const LogNormParams& p) {
  if (!(tau > 0.0)) throw std::domain_error("lognormal_mixture_cdf: tau must be positive");
  p.validate();
  double y = std::log(tau);
  double acc = 0.0;
  for (std::size_t k = 0; k < p.components(); ++k)
    acc += p.w[k] * normal_cdf((y - p.mu[k]) / p.sigma[k]);
  return acc;
}

double lognormal_quantile(const LogNormParams& p, double q) {
  p.validate();
  if (!(q > 0.0 && q < 1.0)) throw std::domain_error("lognormal_quantile: q must be in (0,1)");
  double lo = HUGE_VAL, hi = -HUGE_VAL;
  for (std::size_t k = 0; k < p.components(); ++k) {
    lo = std::min(lo, p.mu[k] - 12.0 * p.sigma[k]);
    hi = std::max(hi, p.mu[k] + 12.0 * p.sigma[k]);
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (lognormal_mixture_cdf(std::exp(mid), p) < q)
      lo = mid;
    else
      hi = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

double sample_tau(const LogNormParams& p, Rng& rng) {
  p.validate();
  double x = rng.uniform();
  std::size_t k = p.components() - 1;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.components(); ++i) {
    acc += p.w[i];
    if (x < acc) {
      k = i;
      break;
    }
  }
  return std::exp(p.mu[k] + p.sigma[k] * rng.normal());
}

// ---- graph path ----

AllMixtureHead::Out AllMixtureHead::forward(const Tensor& states) const {
  Out out;
  Tensor logits = add(matmul(states, phi_w), b_w);
  out.log_w = log_softmax_rows(logits);
  out.w = exp(out.log_w);
  Tensor beta_aff = add(matmul(states, phi_beta), b_beta);
  out.beta = beta_unconstrained ? beta_aff : exp(beta_aff);
  out.lambda = exp(add(matmul(states, phi_lambda), b_lambda));
  out.gamma = exp(add(matmul(states, phi_gamma), b_gamma));
  return out;
}

AllParams AllMixtureHead::params_at(const Out& out, std::size_t step) const {
  std::size_t K = out.w.shape()[1];
  AllParams p;
  p.w.resize(K);
  p.beta_hat.resize(K);
  p.lambda_hat.resize(K);
  p.gamma_hat.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    p.w[k] = out.w.at(step * K + k);
    p.beta_hat[k] = out.beta.at(step * K + k);
    p.lambda_hat[k] = out.lambda.at(step * K + k);
    p.gamma_hat[k] = out.gamma.at(step * K + k);
  }
  return p;
}

Tensor all_mixture_log_likelihood(const AllMixtureHead::Out& p, const Tensor& y_col) {
  std::size_t T = p.w.shape()[0], K = p.w.shape()[1];
  if (y_col.shape() != Shape{T, 1})
    throw std::invalid_argument("all_mixture_log_likelihood: y must be T×1");
  Tensor y = broadcast_to(y_col, {T, K});
  Tensor dev = sub(y, p.beta);
  // log C = log(lambda_hat) - log(gamma_hat + 1/gamma_hat)
  Tensor log_c = sub(log(p.lambda), log(add(p.gamma, divide(Tensor::constant({T, K}, 1.0), p.gamma))));
  Tensor right = neg(mul(divide(p.lambda, p.gamma), dev));
  Tensor left = mul(mul(p.lambda, p.gamma), dev);
  Tensor log_comp = add(log_c, select_ge0(dev, right, left));
  Tensor log_mix = logsumexp_rows(add(p.log_w, log_comp));  // T×1
  return sub(log_mix, y_col);
}

LogNormHead::Out LogNormHead::forward(const Tensor& states) const {
  Out out;
  Tensor logits = add(matmul(states, phi_w), b_w);
  out.log_w = log_softmax_rows(logits);
  out.w = exp(out.log_w);
  out.mu = add(matmul(states, phi_mu), b_mu);
  out.sigma = exp(add(matmul(states, phi_sigma), b_sigma));
  return out;
}

LogNormParams LogNormHead::params_at(const Out& out, std::size_t step) const {
  std::size_t K = out.w.shape()[1];
  LogNormParams p;
  p.w.resize(K);
  p.mu.resize(K);
  p.sigma.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    p.w[k] = out.w.at(step * K + k);
    p.mu[k] = out.mu.at(step * K + k);
    p.sigma[k] = out.sigma.at(step * K + k);
  }
  return p;
}

Tensor lognorm_mixture_log_likelihood(const LogNormHead::Out& p, const Tensor& y_col) {
  std::size_t T = p.w.shape()[0], K = p.w.shape()[1];
  if (y_col.shape() != Shape{T, 1})
    throw std::invalid_argument("lognorm_mixture_log_likelihood: y must be T×1");
  Tensor y = broadcast_to(y_col, {T, K});
  Tensor z = divide(sub(y, p.mu), p.sigma);
  Tensor log_comp = sub(sub(mul(mul(z, z), -0.5), log(p.sigma)), kLogSqrt2Pi);
  Tensor log_mix = logsumexp_rows(add(p.log_w, log_comp));
  return sub(log_mix, y_col);
}

}  // namespace amtpp
