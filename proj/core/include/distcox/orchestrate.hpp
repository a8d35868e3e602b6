#pragma once

#include <functional>
#include <optional>

#include "distcox/newton.hpp"
#include "distcox/protocol.hpp"
#include "distcox/stats.hpp"

namespace distcox {

// Everything a completed run produces; the output-table writer materializes
// this into the msoc directory.
struct RunOutputs {
  ModelSpec spec;
  ComputationPath path = ComputationPath::CenterAggregated;
  FitResult fit;
  CensoringSummary censoring;                    // global, per stratum
  std::vector<CovariateSums> covariate_sums;     // global, per stratum
  long long total_events = 0;                    // frequency-weighted
  ModelFitStats fit_stats;                       // valid when converged
  GlobalNullTest null_test;                      // valid when converged
  std::vector<ParameterEstimateRow> estimates;   // empty unless converged
  BaselineHazard baseline;                       // empty unless converged
  std::vector<SurvivalCurve> survival;           // at per-stratum mean covariates
  std::vector<BinnedResidualSummary> bins;       // per partner, ascending id
};

// Analysis-center driver. Handshakes with every partner, runs the Newton
// iterations over the transport, performs the post-convergence covariance
// round, distributes the final baseline hazards, collects binned residual
// summaries, and broadcasts STOP. On error a STOP(error) broadcast is
// attempted before the exception propagates.
RunOutputs orchestrate_center(const ModelSpec& spec, const TransportConfig& cfg);

// Data-partner driver: awaits center messages, answers each round from the
// local dataset, and returns when STOP arrives. Local computation failures
// are reported to the center in a STOP(error) reply before rethrowing.
void orchestrate_partner(const std::filesystem::path& data_file, int partner_id,
                         std::optional<int> min_count_override,
                         const std::string& run_id, const TransportConfig& cfg);

// Runs the identical engine in process against one or more datasets without
// any transport; `force_path` overrides the spec-selected computation path
// (used to cross-check the two paths against each other) and `on_evaluate`
// observes every score evaluation the fit makes.
using EvaluateObserver = std::function<void(const Vector&, bool,
                                            const ScoreContribution&)>;
RunOutputs run_local(const std::vector<const AnalysisDataset*>& sites,
                     const ModelSpec& spec,
                     std::optional<ComputationPath> force_path = std::nullopt,
                     EvaluateObserver on_evaluate = nullptr);

// Pooled-data oracle: one site holding everything, same engine end to end.
RunOutputs run_pooled(const AnalysisDataset& pooled, const ModelSpec& spec);

// Score provider over in-memory datasets; exposed so tests can wrap or count
// evaluations before handing it to run_fit.
class LocalScoreProvider : public ScoreProvider {
 public:
  LocalScoreProvider(std::vector<const AnalysisDataset*> sites,
                     const ModelSpec& spec, ComputationPath path);

  ScoreContribution evaluate(const Vector& beta, bool final_round) override;

  const EventTimeGrid& designated_grid() const { return grid_; }
  // State captured on the final (covariance) evaluation.
  const std::vector<StratumRiskSummaries>& final_global() const {
    return final_global_;
  }
  const BaselineHazard& final_baseline() const { return final_baseline_; }

 private:
  std::vector<const AnalysisDataset*> sites_;
  ModelSpec spec_;
  ComputationPath path_;
  EventTimeGrid grid_;
  std::vector<StratumRiskSummaries> final_global_;
  BaselineHazard final_baseline_;
};

// Completes RunOutputs from a finished fit: fit statistics, parameter table,
// survival at means. Shared by the center and the local runner.
void finalize_outputs(RunOutputs& out);

}  // namespace distcox
