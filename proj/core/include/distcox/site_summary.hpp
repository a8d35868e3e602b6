#pragma once

#include "distcox/model.hpp"

namespace distcox {

// Distinct event times per stratum with their tie multiplicities. Times are
// strictly increasing; tie counts are frequency-weighted event multiplicities
// (zero when unknown, e.g. in a designated grid built from a pre-shared event
// time set).
struct StratumEventTimes {
  StratumKey stratum;
  std::vector<double> times;
  std::vector<double> tie_counts;
};

struct EventTimeGrid {
  std::vector<StratumEventTimes> strata;  // sorted by stratum key

  const StratumEventTimes* find(const StratumKey& key) const;
};

// Aggregates for one (stratum, event time) cell:
//   d0, d1          weighted event sums (weight * freq, times Z for d1)
//   s0, s1, s2      risk-set sums of weight * freq * exp(beta'Z) * Z^l over
//                   subjects still at risk at `time`
//   q0, q1, q2      the same sums restricted to subjects with an event
//                   exactly at `time`; populated only under Efron ties
//   tie_count       frequency-weighted number of events at `time` (no weight)
struct RiskSetSummary {
  double time = 0.0;
  double d0 = 0.0;
  Vector d1;
  double s0 = 0.0;
  Vector s1;
  Matrix s2;
  double q0 = 0.0;
  Vector q1;
  Matrix q2;
  double tie_count = 0.0;
};

struct StratumRiskSummaries {
  StratumKey stratum;
  std::vector<RiskSetSummary> rows;  // aligned with the designated grid
};

enum class Scope { Stratum, Site, Global };

struct ScoreContribution {
  double loglik = 0.0;
  Vector gradient;
  Matrix hessian;
  Scope scope = Scope::Stratum;
  StratumKey stratum;  // meaningful for Scope::Stratum
};

struct CensoringRow {
  StratumKey stratum;
  double total = 0.0;     // frequency-weighted subject count
  double events = 0.0;
  double censored = 0.0;
};

struct CensoringSummary {
  std::vector<CensoringRow> rows;  // sorted by stratum key
};

inline double percent_censored(const CensoringRow& r) {
  return r.total > 0 ? 100.0 * r.censored / r.total : 0.0;
}

// Weighted covariate sums per stratum; sums and totals are shipped (not
// means) so the center can form exact global means across partners.
struct CovariateSums {
  StratumKey stratum;
  Vector weighted_sums;   // sum of weight * freq * Z
  double weight_total = 0.0;
};

// Distinct event times with tie counts for every stratum observed in the
// dataset (strata without events get empty lists).
EventTimeGrid extract_local_event_times(const AnalysisDataset& ds);

// Evaluates the per-(stratum, event time) aggregates over the designated
// grid. Every grid stratum gets a full row list, zero-filled where this site
// has no subjects at risk. Throws NonFiniteIntermediate when exp(beta'Z)
// overflows (reported, never clamped) and GridMismatch when a local event
// time is absent from the designated grid for its stratum.
std::vector<StratumRiskSummaries> compute_site_summaries(
    const AnalysisDataset& ds, const Vector& beta, const EventTimeGrid& grid,
    Ties ties);

// Score kernel: log-likelihood, gradient and Hessian contribution of one
// stratum from its (global or site-local) risk summaries. Under Efron ties
// the risk-set sums are deflated s-1 times by the tied-event aggregate,
//   S^(l,E)_{j,s} = S^(l)_j - ((s-1)/d_j) Q^(l)_j,  s = 1..d_j,
// with d_j the unweighted tie count and the weighted d0_j / d_j factor on
// the inner sum.
ScoreContribution stratum_scores(const StratumRiskSummaries& summary,
                                 const Vector& beta, Ties ties);

// All per-stratum contributions of one site, computed over its local grids.
// Valid for the site-aggregated path, where risk sets are site-local; payload
// size is independent of the number of event times.
std::vector<ScoreContribution> compute_site_contributions(
    const AnalysisDataset& ds, const Vector& beta, Ties ties);

CensoringSummary compute_censoring_summary(const AnalysisDataset& ds);

std::vector<CovariateSums> compute_covariate_sums(const AnalysisDataset& ds);

}  // namespace distcox
