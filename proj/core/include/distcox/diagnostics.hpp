#pragma once

#include "distcox/site_summary.hpp"

namespace distcox {

// Cumulative baseline hazard per stratum as a right-continuous step function:
// the value at t is the sum of increments at event times <= t.
struct BaselineStratum {
  StratumKey stratum;
  std::vector<double> times;    // strictly increasing event times
  std::vector<double> cumhaz;   // non-decreasing cumulative values
};

struct BaselineHazard {
  Ties estimator = Ties::Breslow;
  std::vector<BaselineStratum> strata;  // sorted by stratum key

  const BaselineStratum* find(const StratumKey& key) const;
};

double baseline_at(const BaselineStratum& s, double t);

// Step increments d_j / S0_j under Breslow; under Efron each tied event
// contributes 1 / (S0_j deflated for its position in the tie), the
// Fleming-Harrington form. Summaries must be evaluated at the final beta.
BaselineHazard baseline_cumulative_hazard(
    const std::vector<StratumRiskSummaries>& global, Ties ties);

struct ResidualRecord {
  double linear_predictor = 0.0;   // beta'Z
  double cumulative_hazard = 0.0;  // exp(beta'Z) * baseline at T
  double survival = 1.0;           // exp(-cumulative_hazard)
  double martingale = 0.0;         // event - cumulative_hazard
  double deviance = 0.0;
  int event = 0;
  long long freq = 1;
  int partner_id = 0;
  StratumKey stratum;
  bool clamped = false;  // deviance log argument clamped at 1e-300
};

// Per-subject survival estimate and martingale/deviance residuals. These
// never leave the data partner; only binned summaries are transmitted.
std::vector<ResidualRecord> evaluate_subject_diagnostics(
    const AnalysisDataset& ds, const Vector& beta_hat,
    const BaselineHazard& baseline);

struct SurvivalCurve {
  StratumKey stratum;
  std::vector<double> times;
  std::vector<double> survival;
};

// Baseline survival evaluated at the per-stratum average covariates:
// S(t) = exp(-exp(beta' zbar_m) * cumhaz_m(t)).
std::vector<SurvivalCurve> baseline_survival_at_means(
    const BaselineHazard& baseline, const std::vector<CovariateSums>& sums,
    const Vector& beta_hat);

struct ResidualBin {
  int bin = 0;
  double count = 0.0;  // frequency-weighted subjects
  double mean_linear_predictor = 0.0;
  double mean_martingale = 0.0;
  double mean_deviance = 0.0;
};

struct BinnedResidualSummary {
  int partner_id = 0;
  std::vector<ResidualBin> bins;  // ordered by mean linear predictor
  bool suppressed = false;        // single bin still under the minimum count
};

// Percentile bins of the linear predictor for one partner's records. The
// effective group count starts at min(groups, floor(N / min_count),
// max_groups) and decreases until every bin holds at least min_count
// subjects; tied predictors share a bin through average ranks. A partner
// with fewer than min_count records yields one bin flagged `suppressed`.
BinnedResidualSummary bin_residuals(const std::vector<ResidualRecord>& records,
                                    int groups, int min_count, int max_groups);

}  // namespace distcox
