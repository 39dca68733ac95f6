// Inter-trip time model: a K-component asymmetric log-Laplace mixture over
// tau > 0, parameterized in log space. With y = log(tau), beta_hat = log(beta),
// lambda_hat = sqrt(lambda*gamma) and gamma_hat = sqrt(lambda/gamma), each
// component density in y is
//
//   AL(y) = C * exp( lambda_hat*gamma_hat * (y - beta_hat))   y <  beta_hat
//           C * exp(-(lambda_hat/gamma_hat) * (y - beta_hat)) y >= beta_hat
//   C     = lambda_hat / (gamma_hat + 1/gamma_hat)
//
// i.e. left tail slope lambda and right tail slope gamma of the original
// (beta, lambda, gamma) parameterization, so the hat/unhat round trip is
// exact. The density of tau follows by the change of variables
// log p(tau) = log p_y(log tau) - log tau.
//
// A log-normal mixture head with the same interface backs the LogNormMix
// ablation.

#pragma once

#include <vector>

#include "amtpp/tensor.hpp"

namespace amtpp {

class Rng;

// ---- scalar (value-space) mixture math ----

struct AllParams {
  std::vector<double> w;           // simplex weights
  std::vector<double> beta_hat;    // log of the mode
  std::vector<double> lambda_hat;  // > 0
  std::vector<double> gamma_hat;   // > 0

  std::size_t components() const { return w.size(); }
  void validate() const;  // throws std::domain_error on non-positive scales
};

double al_log_density(double y, double beta_hat, double lambda_hat, double gamma_hat);
// Mixture density of y = log(tau); log-sum-exp over components.
double mixture_log_density_y(double y, const AllParams& p);
double tau_log_likelihood(double tau, const AllParams& p);
double tau_cdf(double tau, const AllParams& p);
// Inverse CDF of the mixture at probability q via bisection in y.
double tau_quantile(const AllParams& p, double q);
// Component choice by weight, then the component's closed-form inverse CDF.
double sample_tau(const AllParams& p, Rng& rng);

struct LogNormParams {
  std::vector<double> w;
  std::vector<double> mu;     // mean of log tau
  std::vector<double> sigma;  // > 0
  std::size_t components() const { return w.size(); }
  void validate() const;
};

double lognormal_mixture_log_likelihood(double tau, const LogNormParams& p);
double lognormal_mixture_log_density_y(double y, const LogNormParams& p);
double sample_tau(const LogNormParams& p, Rng& rng);
double lognormal_mixture_cdf(double tau, const LogNormParams& p);
double lognormal_quantile(const LogNormParams& p, double q);

// ---- mixture-density heads over hidden states (graph path) ----

// Affine maps from the hidden state to K mixture parameters, with softmax on
// the weights and exp on the scale parameters. `beta_unconstrained` skips the
// exp on beta_hat (the literal formulation constrains beta_hat > 0, i.e. a
// mode above one hour).
struct AllMixtureHead {
  Tensor phi_w, b_w;
  Tensor phi_beta, b_beta;
  Tensor phi_lambda, b_lambda;
  Tensor phi_gamma, b_gamma;
  bool beta_unconstrained = false;

  struct Out {
    Tensor log_w;      // T×K, log softmax
    Tensor w;          // T×K
    Tensor beta;       // T×K (beta_hat)
    Tensor lambda;     // T×K (lambda_hat)
    Tensor gamma;      // T×K (gamma_hat)
  };
  Out forward(const Tensor& states) const;  // states T×c_model

  AllParams params_at(const Out& out, std::size_t step) const;
};

// log p(tau) per step: T×1, given targets y = log tau as a constant column.
Tensor all_mixture_log_likelihood(const AllMixtureHead::Out& p, const Tensor& y_col);

struct LogNormHead {
  Tensor phi_w, b_w;
  Tensor phi_mu, b_mu;
  Tensor phi_sigma, b_sigma;

  struct Out {
    Tensor log_w;
    Tensor w;
    Tensor mu;
    Tensor sigma;
  };
  Out forward(const Tensor& states) const;

  LogNormParams params_at(const Out& out, std::size_t step) const;
};

Tensor lognorm_mixture_log_likelihood(const LogNormHead::Out& p, const Tensor& y_col);

}  // namespace amtpp
