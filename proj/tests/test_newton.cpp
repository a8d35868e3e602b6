#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "distcox/error.hpp"
#include "distcox/newton.hpp"
#include "distcox/orchestrate.hpp"
#include "testutil.hpp"

using namespace distcox;
using namespace testutil;

TEST_CASE("update_beta is elementwise addition") {
  CHECK(update_beta({0, 0, 0}, {0.1, -0.2, 0.3}) == Vector{0.1, -0.2, 0.3});
  CHECK(update_beta({1.5}, {0.0}) == Vector{1.5});
  CHECK(update_beta({1.0}, {-1.0}) == Vector{0.0});
}

TEST_CASE("convergence criterion: relative and absolute branches") {
  auto c = check_convergence({0.5}, {0.50004}, 1e-4);
  CHECK(c.max_delta == doctest::Approx(8e-5).epsilon(1e-9));
  CHECK(c.converged);

  c = check_convergence({0.005}, {0.0052}, 1e-4);
  CHECK(c.max_delta == doctest::Approx(2e-4).epsilon(1e-9));
  CHECK_FALSE(c.converged);

  c = check_convergence({0.3, -0.2}, {0.3, -0.2}, 1e-4);
  CHECK(c.max_delta == 0.0);
  CHECK(c.converged);

  // Negative denominator: the quotient is taken against the signed value.
  c = check_convergence({-0.5}, {-0.55}, 1e-4);
  CHECK(c.max_delta == doctest::Approx(0.1).epsilon(1e-12));
}

namespace {

class DatasetProvider : public ScoreProvider {
 public:
  DatasetProvider(const AnalysisDataset& ds, Ties ties) : ds_(ds), ties_(ties) {}
  ScoreContribution evaluate(const Vector& beta, bool) override {
    ++calls_;
    const auto scores = compute_site_contributions(ds_, beta, ties_);
    return total_score(scores, beta.size());
  }
  int calls() const { return calls_; }

 private:
  const AnalysisDataset& ds_;
  Ties ties_;
  int calls_ = 0;
};

}  // namespace

TEST_CASE("first Newton step of the two-subject example is 2") {
  const AnalysisDataset ds = two_subject_example();
  DatasetProvider provider(ds, Ties::Breslow);
  ModelSpec spec = rossi_spec();
  spec.independent_vars = {"z1"};
  spec.max_iter = 1;
  const FitResult fit = run_fit(provider, spec, 1);
  REQUIRE(fit.history.size() == 2);
  CHECK(fit.history[1].beta[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_FALSE(fit.converged);  // one iteration cannot satisfy xconv here
  CHECK(fit.covariance.empty());
}

TEST_CASE("constant covariate raises SingularHessian on iteration 1") {
  const AnalysisDataset ds =
      dataset({rec(1, 1, {1.0}), rec(2, 1, {1.0}), rec(3, 0, {1.0})}, 1);
  DatasetProvider provider(ds, Ties::Breslow);
  const ModelSpec spec = [&] {
    ModelSpec s = rossi_spec();
    s.independent_vars = {"z1"};
    return s;
  }();
  CHECK_THROWS_AS(run_fit(provider, spec, 1), SingularHessian);
}

TEST_CASE("fixture fit reproduces the published estimates") {
  const AnalysisDataset ds = load_rossi();
  DatasetProvider provider(ds, Ties::Breslow);
  const ModelSpec spec = rossi_spec();
  const FitResult fit = run_fit(provider, spec, 3);

  REQUIRE(fit.converged);
  CHECK(std::fabs(fit.beta_hat[0] - -0.346444) < 5e-6);
  CHECK(std::fabs(fit.beta_hat[1] - -0.066921) < 5e-6);
  CHECK(std::fabs(fit.beta_hat[2] - 0.096528) < 5e-6);
  CHECK(std::fabs(std::sqrt(fit.covariance(0, 0)) - 0.190236) < 5e-6);
  CHECK(std::fabs(std::sqrt(fit.covariance(1, 1)) - 0.020840) < 5e-6);
  CHECK(std::fabs(std::sqrt(fit.covariance(2, 2)) - 0.027241) < 5e-6);
  CHECK(std::fabs(-2 * fit.loglik_null - 1351.366779) < 5e-6);
  CHECK(std::fabs(-2 * fit.loglik_final - 1322.465221) < 5e-6);

  // Bookkeeping: 5 updates for this fixture, history of 6, one call per
  // iteration plus the covariance evaluation.
  CHECK(fit.iterations_used == 5);
  CHECK(fit.history.size() == 6);
  CHECK(provider.calls() == fit.iterations_used + 1);
  CHECK(*fit.history.back().max_delta < spec.xconv);

  // The log likelihood never decreases along the accepted path.
  for (std::size_t i = 0; i + 1 < fit.history.size(); ++i)
    CHECK(fit.history[i].loglik <= fit.history[i + 1].loglik + 1e-12);
}

TEST_CASE("score equation is solved at a tight tolerance") {
  const AnalysisDataset ds = load_rossi();
  DatasetProvider provider(ds, Ties::Breslow);
  ModelSpec spec = rossi_spec();
  spec.xconv = 1e-8;
  const FitResult fit = run_fit(provider, spec, 3);
  REQUIRE(fit.converged);
  const ScoreContribution at_hat = provider.evaluate(fit.beta_hat, false);
  CHECK(max_abs(at_hat.gradient) < 1e-6);
}

TEST_CASE("fit is invariant under row permutation") {
  const AnalysisDataset ds = load_rossi();
  AnalysisDataset shuffled = ds;
  std::mt19937 rng(5);
  std::shuffle(shuffled.records.begin(), shuffled.records.end(), rng);

  DatasetProvider p1(ds, Ties::Efron), p2(shuffled, Ties::Efron);
  const ModelSpec spec = rossi_spec();
  const FitResult a = run_fit(p1, spec, 3);
  const FitResult b = run_fit(p2, spec, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.beta_hat[i] ==
          doctest::Approx(b.beta_hat[i]).epsilon(1e-12).scale(1));
    CHECK(a.covariance(i, i) ==
          doctest::Approx(b.covariance(i, i)).epsilon(1e-12).scale(1));
  }
}

TEST_CASE("nonzero start evaluates the null likelihood separately") {
  const AnalysisDataset ds = load_rossi();
  DatasetProvider provider(ds, Ties::Breslow);
  ModelSpec spec = rossi_spec();
  spec.initial_estimates = {-0.3, -0.06, 0.09};
  const FitResult fit = run_fit(provider, spec, 3);
  REQUIRE(fit.converged);
  CHECK(std::fabs(-2 * fit.loglik_null - 1351.366779) < 5e-6);
  CHECK(std::fabs(-2 * fit.loglik_final - 1322.465221) < 5e-6);
  CHECK(fit.iterations_used < 5);  // warm start saves iterations
}

TEST_CASE("max_iter exhaustion keeps history for diagnosis") {
  const AnalysisDataset ds = load_rossi();
  DatasetProvider provider(ds, Ties::Breslow);
  ModelSpec spec = rossi_spec();
  spec.max_iter = 2;
  const FitResult fit = run_fit(provider, spec, 3);
  CHECK_FALSE(fit.converged);
  CHECK(fit.iterations_used == 2);
  CHECK(fit.history.size() == 3);
  CHECK(fit.covariance.empty());
}

TEST_CASE("non-finite likelihood surfaces as NonFiniteLikelihood") {
  class BadProvider : public ScoreProvider {
   public:
    ScoreContribution evaluate(const Vector& beta, bool) override {
      ScoreContribution sc;
      sc.loglik = std::numeric_limits<double>::quiet_NaN();
      sc.gradient = Vector(beta.size(), 0.0);
      sc.hessian = Matrix(beta.size(), beta.size());
      return sc;
    }
  } provider;
  ModelSpec spec = rossi_spec();
  spec.independent_vars = {"z1"};
  CHECK_THROWS_AS(run_fit(provider, spec, 1), NonFiniteLikelihood);
}

namespace {

// Independent inverse route for cross-checking the factorization: plain
// Gauss-Jordan elimination with partial pivoting.
Matrix gauss_jordan_inverse(Matrix a) {
  const std::size_t n = a.rows();
  Matrix inv = Matrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a(r, col)) > std::fabs(a(piv, col))) piv = r;
    if (piv != col)
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(a(piv, c), a(col, c));
        std::swap(inv(piv, c), inv(col, c));
      }
    const double d = a(col, col);
    for (std::size_t c = 0; c < n; ++c) {
      a(col, c) /= d;
      inv(col, c) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a(r, c) -= f * a(col, c);
        inv(r, c) -= f * inv(col, c);
      }
    }
  }
  return inv;
}

}  // namespace

TEST_CASE("covariance equals an independent inverse of the information") {
  const AnalysisDataset ds = load_rossi();
  DatasetProvider provider(ds, Ties::Breslow);
  const FitResult fit = run_fit(provider, rossi_spec(), 3);
  REQUIRE(fit.converged);

  const ScoreContribution at_hat = provider.evaluate(fit.beta_hat, false);
  Matrix info = at_hat.hessian;
  info *= -1.0;
  const Matrix oracle = gauss_jordan_inverse(info);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(fit.covariance(i, j) ==
            doctest::Approx(oracle(i, j)).epsilon(1e-10).scale(1));
  // And the diagonal carries the published squared standard errors.
  CHECK(std::fabs(std::sqrt(oracle(0, 0)) - 0.190236) < 5e-6);
  CHECK(std::fabs(std::sqrt(oracle(1, 1)) - 0.020840) < 5e-6);
  CHECK(std::fabs(std::sqrt(oracle(2, 2)) - 0.027241) < 5e-6);
}
