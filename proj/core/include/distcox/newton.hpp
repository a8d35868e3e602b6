#pragma once

#include <optional>

#include "distcox/aggregate.hpp"
#include "distcox/model.hpp"

namespace distcox {

struct IterationRecord {
  int iteration = 0;               // 0 = initial estimates
  Vector beta;
  double loglik = 0.0;             // NaN when never evaluated (aborted run)
  std::optional<double> max_delta; // absent for iteration 0
};

struct FitResult {
  Vector beta_hat;
  Matrix covariance;               // empty unless converged
  std::vector<IterationRecord> history;
  bool converged = false;
  int iterations_used = 0;         // Newton updates performed
  double loglik_null = 0.0;        // log likelihood at beta = 0
  double loglik_final = 0.0;
};

Vector update_beta(const Vector& beta, const Vector& step);

struct ConvergenceCheck {
  bool converged = false;
  double max_delta = 0.0;
};

// Relative parameter-change criterion: per coordinate the change is taken
// absolute when |beta_n| < 0.01 and relative to the signed beta_n otherwise;
// the criterion quantity is the max of the absolute deltas.
ConvergenceCheck check_convergence(const Vector& beta_n, const Vector& beta_next,
                                   double xconv);

// Score-evaluation contract: given beta, produce the global log-likelihood,
// gradient and Hessian. `final_round` marks the one post-convergence
// evaluation, letting protocol-backed providers collect end-of-run payloads
// (baseline inputs) in the same exchange.
class ScoreProvider {
 public:
  virtual ~ScoreProvider() = default;
  virtual ScoreContribution evaluate(const Vector& beta, bool final_round) = 0;
};

// Newton-Raphson driver. Starts from the initial estimates (zeros when
// unset), solves -H b = g each iteration, applies beta + b, and stops on the
// xconv criterion or after max_iter updates (converged = false, history kept
// for diagnosis). On convergence one extra evaluation at beta_hat supplies
// the final log likelihood and the information-matrix inverse used as the
// covariance. The null log likelihood is the value at the zero vector: taken
// from the first iteration when the start is zero, otherwise from one
// dedicated evaluation.
FitResult run_fit(ScoreProvider& provider, const ModelSpec& spec, std::size_t p);

}  // namespace distcox
