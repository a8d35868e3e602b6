#include "distcox/orchestrate.hpp"

#include <algorithm>
#include <cmath>

#include "distcox/ingest.hpp"

namespace distcox {

namespace {

// Designated per-stratum event times: the merged partner grids, or the
// user-supplied event time set replicated over all observed strata.
EventTimeGrid designate_grid(const ModelSpec& spec,
                             const std::vector<EventTimeGrid>& local_grids,
                             const std::vector<StratumKey>& strata) {
  if (spec.event_time_set.empty()) return merge_event_time_grids(local_grids);
  std::vector<double> times = spec.event_time_set;
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  EventTimeGrid grid;
  for (const StratumKey& key : strata) {
    StratumEventTimes s;
    s.stratum = key;
    s.times = times;
    s.tie_counts.assign(times.size(), 0.0);
    grid.strata.push_back(std::move(s));
  }
  return grid;
}

std::vector<StratumKey> strata_of(const CensoringSummary& c) {
  std::vector<StratumKey> keys;
  for (const auto& row : c.rows) keys.push_back(row.stratum);
  return keys;
}

CensoringSummary merge_censoring(const std::vector<CensoringSummary>& parts) {
  std::map<StratumKey, CensoringRow> rows;
  for (const auto& part : parts) {
    for (const auto& r : part.rows) {
      CensoringRow& g = rows[r.stratum];
      g.stratum = r.stratum;
      g.total += r.total;
      g.events += r.events;
      g.censored += r.censored;
    }
  }
  CensoringSummary out;
  for (auto& [key, row] : rows) out.rows.push_back(std::move(row));
  return out;
}

std::vector<CovariateSums> merge_covariate_sums(
    const std::vector<std::vector<CovariateSums>>& parts) {
  std::map<StratumKey, CovariateSums> sums;
  for (const auto& part : parts) {
    for (const auto& s : part) {
      CovariateSums& g = sums[s.stratum];
      if (g.weighted_sums.empty()) {
        g.stratum = s.stratum;
        g.weighted_sums.assign(s.weighted_sums.size(), 0.0);
      }
      g.weight_total += s.weight_total;
      for (std::size_t a = 0; a < s.weighted_sums.size(); ++a)
        g.weighted_sums[a] += s.weighted_sums[a];
    }
  }
  std::vector<CovariateSums> out;
  for (auto& [key, s] : sums) out.push_back(std::move(s));
  return out;
}

BaselineHazard merge_baselines(std::vector<BaselineHazard> parts, Ties ties) {
  BaselineHazard out;
  out.estimator = ties;
  for (auto& part : parts)
    for (auto& s : part.strata) out.strata.push_back(std::move(s));
  std::sort(out.strata.begin(), out.strata.end(),
            [](const BaselineStratum& a, const BaselineStratum& b) {
              return a.stratum < b.stratum;
            });
  return out;
}

// Reassemble a partner's decoded summaries against the designated grid:
// strata with no event times are legitimately absent from the wire format.
std::vector<StratumRiskSummaries> align_summaries(
    std::vector<StratumRiskSummaries> decoded, const EventTimeGrid& grid,
    int partner_id) {
  std::vector<StratumRiskSummaries> aligned;
  std::size_t next = 0;
  for (const auto& gs : grid.strata) {
    if (next < decoded.size() && decoded[next].stratum == gs.stratum) {
      aligned.push_back(std::move(decoded[next]));
      ++next;
    } else if (gs.times.empty()) {
      StratumRiskSummaries empty;
      empty.stratum = gs.stratum;
      aligned.push_back(std::move(empty));
    } else {
      throw GridMismatch("partner " + std::to_string(partner_id) +
                         " sent no rows for stratum '" +
                         stratum_label(gs.stratum) + "'");
    }
  }
  if (next != decoded.size())
    throw GridMismatch("partner " + std::to_string(partner_id) +
                       " sent rows for a stratum outside the designated grid");
  return aligned;
}

long long total_event_count(const CensoringSummary& c) {
  double sum = 0.0;
  for (const auto& r : c.rows) sum += r.events;
  return std::llround(sum);
}

}  // namespace

void finalize_outputs(RunOutputs& out) {
  out.total_events = total_event_count(out.censoring);
  if (!out.fit.converged) return;
  out.fit_stats =
      model_fit_stats(out.fit.loglik_null, out.fit.loglik_final,
                      static_cast<int>(out.fit.beta_hat.size()), out.total_events);
  out.null_test = global_null_test(out.fit.loglik_null, out.fit.loglik_final,
                                   static_cast<int>(out.fit.beta_hat.size()));
  out.estimates = parameter_table(out.fit.beta_hat, out.fit.covariance,
                                  out.spec.independent_vars, out.spec.alpha);
  out.survival =
      baseline_survival_at_means(out.baseline, out.covariate_sums, out.fit.beta_hat);
}

// ---------------------------------------------------------------------------
// Local (in-process) evaluation

LocalScoreProvider::LocalScoreProvider(std::vector<const AnalysisDataset*> sites,
                                       const ModelSpec& spec,
                                       ComputationPath path)
    : sites_(std::move(sites)), spec_(spec), path_(path) {
  if (path_ == ComputationPath::CenterAggregated) {
    std::vector<EventTimeGrid> grids;
    std::vector<CensoringSummary> censoring;
    for (const AnalysisDataset* ds : sites_) {
      grids.push_back(extract_local_event_times(*ds));
      censoring.push_back(compute_censoring_summary(*ds));
    }
    grid_ = designate_grid(spec_, grids, strata_of(merge_censoring(censoring)));
  }
}

ScoreContribution LocalScoreProvider::evaluate(const Vector& beta,
                                               bool final_round) {
  const std::size_t p = beta.size();
  if (path_ == ComputationPath::CenterAggregated) {
    std::vector<PartnerSummaries> parts;
    std::vector<int> ids;
    for (const AnalysisDataset* ds : sites_) {
      PartnerSummaries part;
      part.partner_id = ds->partner_id;
      part.summaries = compute_site_summaries(*ds, beta, grid_, spec_.ties);
      parts.push_back(std::move(part));
      ids.push_back(ds->partner_id);
    }
    auto global = aggregate_summaries(std::move(parts), ids, grid_);
    const auto scores = stratum_scores_from_summaries(global, beta, spec_.ties);
    if (final_round) {
      final_global_ = std::move(global);
      final_baseline_ = baseline_cumulative_hazard(final_global_, spec_.ties);
    }
    return total_score(scores, p);
  }

  // Site-aggregated: per-site, per-stratum contributions summed in
  // (partner, stratum) order.
  std::vector<const AnalysisDataset*> ordered = sites_;
  std::sort(ordered.begin(), ordered.end(),
            [](const AnalysisDataset* a, const AnalysisDataset* b) {
              return a->partner_id < b->partner_id;
            });
  std::vector<ScoreContribution> all;
  std::vector<BaselineHazard> baselines;
  for (const AnalysisDataset* ds : ordered) {
    auto scores = compute_site_contributions(*ds, beta, spec_.ties);
    for (auto& sc : scores) all.push_back(std::move(sc));
    if (final_round) {
      const EventTimeGrid local = extract_local_event_times(*ds);
      baselines.push_back(baseline_cumulative_hazard(
          compute_site_summaries(*ds, beta, local, spec_.ties), spec_.ties));
    }
  }
  if (final_round)
    final_baseline_ = merge_baselines(std::move(baselines), spec_.ties);
  return total_score(all, p);
}

namespace {

class ObservedProvider : public ScoreProvider {
 public:
  ObservedProvider(ScoreProvider& inner, EvaluateObserver observer)
      : inner_(inner), observer_(std::move(observer)) {}
  ScoreContribution evaluate(const Vector& beta, bool final_round) override {
    ScoreContribution sc = inner_.evaluate(beta, final_round);
    if (observer_) observer_(beta, final_round, sc);
    return sc;
  }

 private:
  ScoreProvider& inner_;
  EvaluateObserver observer_;
};

}  // namespace

RunOutputs run_local(const std::vector<const AnalysisDataset*>& sites,
                     const ModelSpec& spec,
                     std::optional<ComputationPath> force_path,
                     EvaluateObserver on_evaluate) {
  validate_spec(spec);
  const ComputationPath path =
      force_path ? *force_path : select_computation_path(spec);
  RunOutputs out;
  out.spec = spec;
  out.path = path;

  std::vector<CensoringSummary> censoring;
  std::vector<std::vector<CovariateSums>> covsums;
  for (const AnalysisDataset* ds : sites) {
    censoring.push_back(compute_censoring_summary(*ds));
    covsums.push_back(compute_covariate_sums(*ds));
  }
  out.censoring = merge_censoring(censoring);
  out.covariate_sums = merge_covariate_sums(covsums);

  LocalScoreProvider provider(sites, spec, path);
  ObservedProvider used(provider, std::move(on_evaluate));
  out.fit = run_fit(used, spec, spec_p(spec));
  if (out.fit.converged) {
    out.baseline = provider.final_baseline();
    for (const AnalysisDataset* ds : sites) {
      const auto residuals =
          evaluate_subject_diagnostics(*ds, out.fit.beta_hat, out.baseline);
      out.bins.push_back(bin_residuals(residuals, spec.groups,
                                       spec.min_count_per_grp_glob,
                                       spec.max_numb_of_grp));
    }
    std::sort(out.bins.begin(), out.bins.end(),
              [](const BinnedResidualSummary& a, const BinnedResidualSummary& b) {
                return a.partner_id < b.partner_id;
              });
  }
  finalize_outputs(out);
  return out;
}

RunOutputs run_pooled(const AnalysisDataset& pooled, const ModelSpec& spec) {
  return run_local({&pooled}, spec);
}

// ---------------------------------------------------------------------------
// Distributed center

namespace {

// Score provider that exchanges one protocol round per evaluation.
class ProtocolScoreProvider : public ScoreProvider {
 public:
  ProtocolScoreProvider(const ModelSpec& spec, const TransportConfig& cfg,
                        ComputationPath path, EventTimeGrid grid, int* round)
      : spec_(spec), cfg_(cfg), path_(path), grid_(std::move(grid)),
        round_(round) {}

  ScoreContribution evaluate(const Vector& beta, bool final_round) override {
    const int round = ++*round_;
    for (int id : spec_.partner_ids) {
      RoundMessage msg;
      msg.run_id = spec_.run_id;
      msg.round = round;
      msg.kind = MessageKind::Iterate;
      msg.beta = beta;
      msg.final_round = final_round;
      if (path_ == ComputationPath::CenterAggregated) msg.grid = grid_;
      send(cfg_, {true, id}, msg);
    }

    std::vector<PartnerSummaries> parts;
    std::vector<std::pair<int, std::vector<ScoreContribution>>> site_scores;
    std::vector<BaselineHazard> baselines;
    for (int id : spec_.partner_ids) {
      RoundMessage reply = await(cfg_, {false, id}, spec_.run_id, round);
      if (reply.kind == MessageKind::Stop)
        throw RemotePartnerError(reply.error_class,
                                 "partner " + std::to_string(id) +
                                     " failed: " + reply.reason);
      if (reply.kind != MessageKind::SummaryReply)
        throw MalformedPayload("expected SUMMARY_REPLY from partner " +
                               std::to_string(id) + ", got " +
                               message_kind_name(reply.kind));
      if (path_ == ComputationPath::CenterAggregated) {
        PartnerSummaries part;
        part.partner_id = id;
        part.summaries = align_summaries(std::move(reply.summaries), grid_, id);
        parts.push_back(std::move(part));
      } else {
        site_scores.emplace_back(id, std::move(reply.scores));
        if (final_round) baselines.push_back(std::move(reply.baseline));
      }
    }

    const std::size_t p = beta.size();
    if (path_ == ComputationPath::CenterAggregated) {
      auto global =
          aggregate_summaries(std::move(parts), spec_.partner_ids, grid_);
      const auto scores = stratum_scores_from_summaries(global, beta, spec_.ties);
      if (final_round) {
        final_global_ = std::move(global);
        final_baseline_ = baseline_cumulative_hazard(final_global_, spec_.ties);
      }
      return total_score(scores, p);
    }
    std::sort(site_scores.begin(), site_scores.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<ScoreContribution> all;
    for (auto& [id, scores] : site_scores)
      for (auto& sc : scores) all.push_back(std::move(sc));
    if (final_round)
      final_baseline_ = merge_baselines(std::move(baselines), spec_.ties);
    return total_score(all, p);
  }

  const BaselineHazard& final_baseline() const { return final_baseline_; }

 private:
  const ModelSpec& spec_;
  const TransportConfig& cfg_;
  ComputationPath path_;
  EventTimeGrid grid_;
  int* round_;
  std::vector<StratumRiskSummaries> final_global_;
  BaselineHazard final_baseline_;
};

void broadcast_stop(const ModelSpec& spec, const TransportConfig& cfg, int round,
                    const std::string& status, const std::string& reason,
                    ErrorClass cls) {
  for (int id : spec.partner_ids) {
    RoundMessage msg;
    msg.run_id = spec.run_id;
    msg.round = round;
    msg.kind = MessageKind::Stop;
    msg.status = status;
    msg.reason = reason;
    msg.error_class = cls;
    try {
      send(cfg, {true, id}, msg);
    } catch (const Error&) {
      // Best effort: never mask the original failure.
    }
  }
}

}  // namespace

RunOutputs orchestrate_center(const ModelSpec& spec, const TransportConfig& cfg) {
  validate_spec(spec);
  if (spec.partner_ids.empty())
    throw ConfigError("dp_cd_list must name at least one data partner");
  const ComputationPath path = select_computation_path(spec);

  RunOutputs out;
  out.spec = spec;
  out.path = path;
  int round = 0;

  try {
    // Round 0: handshake. Grids ride back only on the center-aggregated path
    // and only when no event time set was supplied.
    for (int id : spec.partner_ids) {
      RoundMessage msg;
      msg.run_id = spec.run_id;
      msg.round = 0;
      msg.kind = MessageKind::HandshakeRequest;
      msg.spec = spec;
      send(cfg, {true, id}, msg);
    }
    std::vector<CensoringSummary> censoring;
    std::vector<std::vector<CovariateSums>> covsums;
    std::vector<EventTimeGrid> grids;
    for (int id : spec.partner_ids) {
      RoundMessage reply = await(cfg, {false, id}, spec.run_id, 0);
      if (reply.kind == MessageKind::Stop)
        throw RemotePartnerError(reply.error_class,
                                 "partner " + std::to_string(id) +
                                     " failed: " + reply.reason);
      if (reply.kind != MessageKind::HandshakeReply)
        throw MalformedPayload("expected HANDSHAKE_REPLY from partner " +
                               std::to_string(id));
      censoring.push_back(std::move(reply.censoring));
      covsums.push_back(std::move(reply.covariate_sums));
      if (path == ComputationPath::CenterAggregated)
        grids.push_back(std::move(reply.grid));
    }
    out.censoring = merge_censoring(censoring);
    out.covariate_sums = merge_covariate_sums(covsums);

    EventTimeGrid grid;
    if (path == ComputationPath::CenterAggregated)
      grid = designate_grid(spec, grids, strata_of(out.censoring));

    ProtocolScoreProvider provider(spec, cfg, path, std::move(grid), &round);
    out.fit = run_fit(provider, spec, spec_p(spec));

    if (!out.fit.converged) {
      broadcast_stop(spec, cfg, ++round, "not_converged",
                     "no convergence within max_iter_nb iterations",
                     ErrorClass::Config);
      finalize_outputs(out);
      return out;
    }

    out.baseline = provider.final_baseline();
    finalize_outputs(out);

    // Distribute the final state; partners answer with residual summaries.
    const int finalize_round = ++round;
    for (int id : spec.partner_ids) {
      RoundMessage msg;
      msg.run_id = spec.run_id;
      msg.round = finalize_round;
      msg.kind = MessageKind::Finalize;
      msg.beta = out.fit.beta_hat;
      msg.baseline = out.baseline;
      send(cfg, {true, id}, msg);
    }
    for (int id : spec.partner_ids) {
      RoundMessage reply = await(cfg, {false, id}, spec.run_id, finalize_round);
      if (reply.kind == MessageKind::Stop)
        throw RemotePartnerError(reply.error_class,
                                 "partner " + std::to_string(id) +
                                     " failed: " + reply.reason);
      if (reply.kind != MessageKind::DiagnosticsReply)
        throw MalformedPayload("expected DIAGNOSTICS_REPLY from partner " +
                               std::to_string(id));
      out.bins.push_back(std::move(reply.bins));
    }
    std::sort(out.bins.begin(), out.bins.end(),
              [](const BinnedResidualSummary& a, const BinnedResidualSummary& b) {
                return a.partner_id < b.partner_id;
              });

    broadcast_stop(spec, cfg, ++round, "ok", "converged", ErrorClass::Protocol);
    return out;
  } catch (const Error& e) {
    broadcast_stop(spec, cfg, ++round, "error", e.what(), e.error_class());
    throw;
  }
}

// ---------------------------------------------------------------------------
// Data-partner node

void orchestrate_partner(const std::filesystem::path& data_file, int partner_id,
                         std::optional<int> min_count_override,
                         const std::string& run_id, const TransportConfig& cfg) {
  const Direction from_center{true, partner_id};
  const Direction to_center{false, partner_id};

  RoundMessage handshake = await(cfg, from_center, run_id, 0);
  if (handshake.kind == MessageKind::Stop) return;
  if (handshake.kind != MessageKind::HandshakeRequest)
    throw MalformedPayload("expected HANDSHAKE_REQUEST in round 0");
  const ModelSpec spec = handshake.spec;
  const ComputationPath path = select_computation_path(spec);
  const int min_count =
      min_count_override ? *min_count_override : spec.min_count_per_grp_glob;

  int round = 0;
  try {
    const AnalysisDataset ds = ingest_dataset(data_file, spec, partner_id);

    RoundMessage reply;
    reply.run_id = run_id;
    reply.round = 0;
    reply.kind = MessageKind::HandshakeReply;
    reply.spec = spec;  // carries covariate names for the covsums header
    reply.censoring = compute_censoring_summary(ds);
    reply.covariate_sums = compute_covariate_sums(ds);
    if (path == ComputationPath::CenterAggregated && spec.event_time_set.empty())
      reply.grid = extract_local_event_times(ds);
    send(cfg, to_center, reply);

    while (true) {
      const RoundMessage msg = await(cfg, from_center, run_id, ++round);
      if (msg.kind == MessageKind::Stop) return;

      RoundMessage answer;
      answer.run_id = run_id;
      answer.round = round;
      if (msg.kind == MessageKind::Iterate) {
        answer.kind = MessageKind::SummaryReply;
        answer.baseline.estimator = spec.ties;
        if (path == ComputationPath::CenterAggregated) {
          answer.summaries =
              compute_site_summaries(ds, msg.beta, msg.grid, spec.ties);
        } else {
          answer.scores = compute_site_contributions(ds, msg.beta, spec.ties);
          if (msg.final_round) {
            // Final evaluation at beta_hat: attach this site's baseline
            // hazards so the center can publish them.
            const EventTimeGrid local = extract_local_event_times(ds);
            answer.baseline = baseline_cumulative_hazard(
                compute_site_summaries(ds, msg.beta, local, spec.ties),
                spec.ties);
          }
        }
      } else if (msg.kind == MessageKind::Finalize) {
        const auto residuals =
            evaluate_subject_diagnostics(ds, msg.beta, msg.baseline);
        answer.kind = MessageKind::DiagnosticsReply;
        answer.bins = bin_residuals(residuals, spec.groups, min_count,
                                    spec.max_numb_of_grp);
        answer.bins.partner_id = partner_id;
      } else {
        throw MalformedPayload("unexpected " +
                               std::string(message_kind_name(msg.kind)) +
                               " in round " + std::to_string(round));
      }
      send(cfg, to_center, answer);
    }
  } catch (const Error& e) {
    RoundMessage fail;
    fail.run_id = run_id;
    fail.round = round;
    fail.kind = MessageKind::Stop;
    fail.status = "error";
    fail.reason = e.what();
    fail.error_class = e.error_class();
    try {
      send(cfg, to_center, fail);
    } catch (const Error&) {
    }
    throw;
  }
}

}  // namespace distcox
