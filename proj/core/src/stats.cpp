#include "distcox/stats.hpp"

#include <cmath>
#include <limits>

#include "distcox/error.hpp"

namespace distcox {

double log_gamma(double x) {
  // Lanczos approximation, full double accuracy for x > 0.
  static const double cof[14] = {
      57.1562356658629235,     -59.5979603554754912,
      14.1360979747417471,     -0.491913816097620199,
      0.339946499848118887e-4, 0.465236289270485756e-4,
      -0.983744753048795646e-4, 0.158088703224912494e-3,
      -0.210264441724104883e-3, 0.217439618115212643e-3,
      -0.164318106536763890e-3, 0.844182239838527433e-4,
      -0.261908384015814087e-4, 0.368991826595316234e-5};
  double y = x;
  double tmp = x + 5.24218750000000000;
  tmp = (x + 0.5) * std::log(tmp) - tmp;
  double ser = 0.999999999999997092;
  for (int j = 0; j < 14; ++j) ser += cof[j] / ++y;
  return tmp + std::log(2.5066282746310005 * ser / x);
}

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kFpMin =
    std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();

// Regularized lower incomplete gamma P(a, x) by its power series.
double gamma_p_series(double a, double x) {
  double ap = a;
  double del = 1.0 / a;
  double sum = del;
  for (int i = 0; i < 10000; ++i) {
    ++ap;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps)
      return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
  }
  return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
}

// Regularized upper incomplete gamma Q(a, x) by continued fraction (Lentz).
double gamma_q_contfrac(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kFpMin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = b + an / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) <= kEps) break;
  }
  return std::exp(-x + a * std::log(x) - log_gamma(a)) * h;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
}

}  // namespace

double chi_square_upper_tail(double x, int df) {
  if (x <= 0.0) return 1.0;
  const double a = 0.5 * df;
  const double x2 = 0.5 * x;
  if (x < df + 1.0) return 1.0 - gamma_p_series(a, x2);
  return gamma_q_contfrac(a, x2);
}

double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0))
    throw ConfigError("normal quantile requires a probability in (0, 1)");
  // Acklam's rational approximation.
  static const double A[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double B[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double C[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double D[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double z;
  if (prob < p_low) {
    const double q = std::sqrt(-2.0 * std::log(prob));
    z = (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) /
        ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0);
  } else if (prob <= 1.0 - p_low) {
    const double q = prob - 0.5;
    const double r = q * q;
    z = (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) *
        q /
        (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - prob));
    z = -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) /
        ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0);
  }
  // One Newton step against the exact CDF (skipped in the far tails where
  // the density underflows).
  const double pdf = normal_pdf(z);
  if (pdf > 0.0) z -= (normal_cdf(z) - prob) / pdf;
  return z;
}

ModelFitStats model_fit_stats(double loglik_null, double loglik_fit, int p,
                              long long total_events) {
  ModelFitStats s;
  s.p = p;
  s.total_events = total_events;
  s.neg2loglik_null = -2.0 * loglik_null;
  s.neg2loglik_fit = -2.0 * loglik_fit;
  s.aic = s.neg2loglik_fit + 2.0 * p;
  s.bic = s.neg2loglik_fit + p * std::log(static_cast<double>(total_events));
  return s;
}

GlobalNullTest global_null_test(double loglik_null, double loglik_fit, int p) {
  GlobalNullTest t;
  t.df = p;
  t.chisq = std::max(0.0, 2.0 * (loglik_fit - loglik_null));
  t.pvalue = chi_square_upper_tail(t.chisq, p);
  return t;
}

std::vector<ParameterEstimateRow> parameter_table(
    const Vector& beta_hat, const Matrix& covariance,
    const std::vector<std::string>& names, double alpha) {
  const double z = normal_quantile(1.0 - alpha / 2.0);
  std::vector<ParameterEstimateRow> rows;
  rows.reserve(beta_hat.size());
  for (std::size_t i = 0; i < beta_hat.size(); ++i) {
    const double var = covariance(i, i);
    if (!(var > 0.0))
      throw NonPositiveVariance("variance of '" + names[i] +
                                "' is not positive");
    ParameterEstimateRow row;
    row.name = names[i];
    row.estimate = beta_hat[i];
    row.std_err = std::sqrt(var);
    const double ratio = row.estimate / row.std_err;
    row.chisq = ratio * ratio;
    row.pvalue = chi_square_upper_tail(row.chisq, 1);
    row.hazard_ratio = std::exp(row.estimate);
    row.ci_lower = std::exp(row.estimate - z * row.std_err);
    row.ci_upper = std::exp(row.estimate + z * row.std_err);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace distcox
