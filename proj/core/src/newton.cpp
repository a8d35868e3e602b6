#include "distcox/newton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "distcox/error.hpp"

namespace distcox {

Vector update_beta(const Vector& beta, const Vector& step) {
  return beta + step;
}

ConvergenceCheck check_convergence(const Vector& beta_n, const Vector& beta_next,
                                   double xconv) {
  ConvergenceCheck c;
  for (std::size_t s = 0; s < beta_n.size(); ++s) {
    const double diff = beta_next[s] - beta_n[s];
    const double delta =
        std::fabs(beta_n[s]) < 0.01 ? diff : diff / beta_n[s];
    c.max_delta = std::max(c.max_delta, std::fabs(delta));
  }
  c.converged = c.max_delta < xconv;
  return c;
}

namespace {

void require_finite(const ScoreContribution& sc) {
  bool ok = std::isfinite(sc.loglik);
  for (double v : sc.gradient) ok = ok && std::isfinite(v);
  for (double v : sc.hessian.data()) ok = ok && std::isfinite(v);
  if (!ok)
    throw NonFiniteLikelihood(
        "non-finite log likelihood, gradient, or Hessian during iteration");
}

Matrix negated(const Matrix& h) {
  Matrix info = h;
  info *= -1.0;
  return info;
}

}  // namespace

FitResult run_fit(ScoreProvider& provider, const ModelSpec& spec, std::size_t p) {
  FitResult fit;
  Vector beta = spec.initial_estimates.empty() ? Vector(p, 0.0)
                                               : spec.initial_estimates;
  if (beta.size() != p)
    throw ConfigError("initial estimates length does not match covariate count");
  const bool start_at_zero =
      std::all_of(beta.begin(), beta.end(), [](double v) { return v == 0.0; });
  if (!start_at_zero) {
    const ScoreContribution at_zero = provider.evaluate(Vector(p, 0.0), false);
    require_finite(at_zero);
    fit.loglik_null = at_zero.loglik;
  }

  fit.history.push_back(
      {0, beta, std::numeric_limits<double>::quiet_NaN(), std::nullopt});

  bool converged = false;
  for (int n = 0; n < spec.max_iter && !converged; ++n) {
    const ScoreContribution sc = provider.evaluate(beta, false);
    require_finite(sc);
    fit.history.back().loglik = sc.loglik;
    if (n == 0 && start_at_zero) fit.loglik_null = sc.loglik;

    const Vector step =
        solve_newton_step(negated(sc.hessian), sc.gradient, false).step;
    const Vector next = update_beta(beta, step);
    const ConvergenceCheck check = check_convergence(beta, next, spec.xconv);
    beta = next;
    fit.history.push_back({n + 1, beta,
                           std::numeric_limits<double>::quiet_NaN(),
                           check.max_delta});
    converged = check.converged;
  }

  fit.beta_hat = beta;
  fit.iterations_used = static_cast<int>(fit.history.size()) - 1;
  fit.converged = converged;
  if (converged) {
    // The information matrix at beta_hat is only available from one more
    // evaluation; its inverse is the covariance of the estimates.
    const ScoreContribution at_hat = provider.evaluate(beta, true);
    require_finite(at_hat);
    fit.history.back().loglik = at_hat.loglik;
    fit.loglik_final = at_hat.loglik;
    const NewtonStepResult solved =
        solve_newton_step(negated(at_hat.hessian), at_hat.gradient, true);
    fit.covariance = *solved.inverse;
  }
  return fit;
}

}  // namespace distcox
