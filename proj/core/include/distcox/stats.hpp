#pragma once

#include <string>

#include "distcox/linalg.hpp"

namespace distcox {

// Special functions are implemented here rather than pulled from a library so
// the math core stays dependency-free and bit-stable across platforms.

double log_gamma(double x);

// Upper-tail probability of a chi-square variable: 1 - P(df/2, x/2) through
// the regularized incomplete gamma function, series for x < df + 1 and
// continued fraction otherwise. Absolute error <= 1e-12.
double chi_square_upper_tail(double x, int df);

// Inverse standard normal CDF: rational approximation polished by one Newton
// step against the erfc-based CDF. Absolute error well under 1e-10.
double normal_quantile(double prob);

struct ModelFitStats {
  double neg2loglik_null = 0.0;
  double neg2loglik_fit = 0.0;
  double aic = 0.0;   // -2 l + 2 p
  double bic = 0.0;   // -2 l + p ln(total events)
  int p = 0;
  long long total_events = 0;
};

ModelFitStats model_fit_stats(double loglik_null, double loglik_fit, int p,
                              long long total_events);

struct GlobalNullTest {
  double chisq = 0.0;
  int df = 0;
  double pvalue = 1.0;
};

// Likelihood-ratio test of the global null hypothesis beta = 0.
GlobalNullTest global_null_test(double loglik_null, double loglik_fit, int p);

struct ParameterEstimateRow {
  std::string name;
  int df = 1;
  double estimate = 0.0;
  double std_err = 0.0;
  double chisq = 0.0;
  double pvalue = 1.0;
  double hazard_ratio = 1.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
};

// Per-parameter Wald statistics and hazard-ratio confidence limits at level
// 1 - alpha. Throws NonPositiveVariance when a covariance diagonal is <= 0.
std::vector<ParameterEstimateRow> parameter_table(
    const Vector& beta_hat, const Matrix& covariance,
    const std::vector<std::string>& names, double alpha);

}  // namespace distcox
