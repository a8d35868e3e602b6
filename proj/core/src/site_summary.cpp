#include "distcox/site_summary.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "distcox/csv.hpp"
#include "distcox/error.hpp"

namespace distcox {

const StratumEventTimes* EventTimeGrid::find(const StratumKey& key) const {
  for (const auto& s : strata)
    if (s.stratum == key) return &s;
  return nullptr;
}

EventTimeGrid extract_local_event_times(const AnalysisDataset& ds) {
  std::map<StratumKey, std::map<double, double>> events;
  for (const auto& rec : ds.records) {
    auto& stratum = events[rec.stratum];  // keep event-free strata visible
    if (rec.event) stratum[rec.time] += static_cast<double>(rec.freq);
  }
  EventTimeGrid grid;
  for (const auto& [key, times] : events) {
    StratumEventTimes s;
    s.stratum = key;
    for (const auto& [t, d] : times) {
      s.times.push_back(t);
      s.tie_counts.push_back(d);
    }
    grid.strata.push_back(std::move(s));
  }
  return grid;
}

namespace {

RiskSetSummary zero_row(double time, std::size_t p) {
  RiskSetSummary r;
  r.time = time;
  r.d1.assign(p, 0.0);
  r.s1.assign(p, 0.0);
  r.s2 = Matrix(p, p);
  r.q1.assign(p, 0.0);
  r.q2 = Matrix(p, p);
  return r;
}

}  // namespace

std::vector<StratumRiskSummaries> compute_site_summaries(
    const AnalysisDataset& ds, const Vector& beta, const EventTimeGrid& grid,
    Ties ties) {
  const std::size_t p = ds.p();
  const bool efron = ties == Ties::Efron;

  // Bucket local records by stratum, reusing the grid's stratum order.
  std::map<StratumKey, std::vector<std::size_t>> local;
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    local[ds.records[i].stratum].push_back(i);
  for (const auto& [key, unused] : local)
    if (!grid.find(key))
      throw GridMismatch("local stratum '" + stratum_label(key) +
                         "' is absent from the designated grid");

  std::vector<StratumRiskSummaries> out;
  out.reserve(grid.strata.size());
  for (const auto& gs : grid.strata) {
    StratumRiskSummaries summary;
    summary.stratum = gs.stratum;
    summary.rows.reserve(gs.times.size());
    for (double t : gs.times) summary.rows.push_back(zero_row(t, p));

    auto it = local.find(gs.stratum);
    if (it == local.end() || gs.times.empty()) {
      // No subjects here, or no event times anywhere for this stratum: the
      // zero-filled rows stand (an event with no grid time is a mismatch).
      if (it != local.end())
        for (std::size_t i : it->second)
          if (ds.records[i].event)
            throw GridMismatch("event time " +
                               csv::format_double(ds.records[i].time) +
                               " missing from grid for stratum '" +
                               stratum_label(gs.stratum) + "'");
      out.push_back(std::move(summary));
      continue;
    }

    // One descending sweep: risk sets grow as the grid time decreases, so
    // the sums accumulate instead of being rescanned per event time.
    std::vector<std::size_t> order = it->second;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return ds.records[a].time > ds.records[b].time;
    });

    double s0 = 0.0;
    Vector s1(p, 0.0);
    Matrix s2(p, p);
    std::size_t next = 0;
    for (std::size_t jj = gs.times.size(); jj-- > 0;) {
      const double t = gs.times[jj];
      const std::size_t batch_start = next;
      while (next < order.size() && ds.records[order[next]].time >= t) {
        const SubjectRecord& rec = ds.records[order[next]];
        const double theta = dot(beta, rec.covariates);
        const double risk =
            rec.weight * static_cast<double>(rec.freq) * std::exp(theta);
        if (!std::isfinite(risk))
          throw NonFiniteIntermediate(
              "exp overflow in risk score, |beta'Z| = " +
              csv::format_double(std::fabs(theta)));
        s0 += risk;
        for (std::size_t a = 0; a < p; ++a) {
          s1[a] += risk * rec.covariates[a];
          for (std::size_t b = 0; b < p; ++b)
            s2(a, b) += risk * rec.covariates[a] * rec.covariates[b];
        }
        ++next;
      }

      RiskSetSummary& row = summary.rows[jj];
      row.s0 = s0;
      row.s1 = s1;
      row.s2 = s2;
      for (std::size_t k = batch_start; k < next; ++k) {
        const SubjectRecord& rec = ds.records[order[k]];
        if (!rec.event) continue;
        if (rec.time != t)
          throw GridMismatch("event time " + csv::format_double(rec.time) +
                             " missing from grid for stratum '" +
                             stratum_label(gs.stratum) + "'");
        const double wf = rec.weight * static_cast<double>(rec.freq);
        row.d0 += wf;
        row.tie_count += static_cast<double>(rec.freq);
        for (std::size_t a = 0; a < p; ++a) row.d1[a] += wf * rec.covariates[a];
        if (efron) {
          const double risk = wf * std::exp(dot(beta, rec.covariates));
          row.q0 += risk;
          for (std::size_t a = 0; a < p; ++a) {
            row.q1[a] += risk * rec.covariates[a];
            for (std::size_t b = 0; b < p; ++b)
              row.q2(a, b) += risk * rec.covariates[a] * rec.covariates[b];
          }
        }
      }
    }
    // Records below the smallest grid time never enter a risk set; an event
    // among them means the grid is incomplete.
    for (std::size_t k = next; k < order.size(); ++k)
      if (ds.records[order[k]].event)
        throw GridMismatch("event time " +
                           csv::format_double(ds.records[order[k]].time) +
                           " missing from grid for stratum '" +
                           stratum_label(gs.stratum) + "'");
    out.push_back(std::move(summary));
  }
  return out;
}

ScoreContribution stratum_scores(const StratumRiskSummaries& summary,
                                 const Vector& beta, Ties ties) {
  const std::size_t p = beta.size();
  ScoreContribution sc;
  sc.scope = Scope::Stratum;
  sc.stratum = summary.stratum;
  sc.gradient.assign(p, 0.0);
  sc.hessian = Matrix(p, p);

  for (const RiskSetSummary& row : summary.rows) {
    if (row.tie_count <= 0.0 || row.d0 <= 0.0) continue;
    if (!(row.s0 > 0.0))
      throw DegenerateRiskSet("risk-set sum " + csv::format_double(row.s0) +
                              " at event time " + csv::format_double(row.time));
    sc.loglik += dot(beta, row.d1);
    if (ties == Ties::Breslow) {
      // Grouped exactly like the single-term Efron sum so the two methods
      // coincide bitwise when no event times are tied.
      sc.loglik -= row.d0 * std::log(row.s0);
      const double inv = 1.0 / row.s0;
      for (std::size_t a = 0; a < p; ++a) {
        sc.gradient[a] += row.d1[a];
        sc.gradient[a] -= row.d0 * row.s1[a] * inv;
        for (std::size_t b = 0; b < p; ++b)
          sc.hessian(a, b) -= row.d0 * (row.s2(a, b) * inv -
                                        row.s1[a] * row.s1[b] * inv * inv);
      }
    } else {
      const long long d = std::llround(row.tie_count);
      const double weight = row.d0 / static_cast<double>(d);
      for (std::size_t a = 0; a < p; ++a) sc.gradient[a] += row.d1[a];
      for (long long s = 1; s <= d; ++s) {
        const double f = static_cast<double>(s - 1) / static_cast<double>(d);
        const double e0 = row.s0 - f * row.q0;
        if (!(e0 > 0.0))
          throw DegenerateRiskSet("deflated risk-set sum " +
                                  csv::format_double(e0) + " at event time " +
                                  csv::format_double(row.time));
        sc.loglik -= weight * std::log(e0);
        const double inv = 1.0 / e0;
        for (std::size_t a = 0; a < p; ++a) {
          const double e1a = row.s1[a] - f * row.q1[a];
          sc.gradient[a] -= weight * e1a * inv;
          for (std::size_t b = 0; b < p; ++b) {
            const double e1b = row.s1[b] - f * row.q1[b];
            const double e2 = row.s2(a, b) - f * row.q2(a, b);
            sc.hessian(a, b) -= weight * (e2 * inv - e1a * e1b * inv * inv);
          }
        }
      }
    }
  }
  return sc;
}

std::vector<ScoreContribution> compute_site_contributions(
    const AnalysisDataset& ds, const Vector& beta, Ties ties) {
  const EventTimeGrid grid = extract_local_event_times(ds);
  const auto summaries = compute_site_summaries(ds, beta, grid, ties);
  std::vector<ScoreContribution> out;
  out.reserve(summaries.size());
  for (const auto& s : summaries) out.push_back(stratum_scores(s, beta, ties));
  return out;
}

CensoringSummary compute_censoring_summary(const AnalysisDataset& ds) {
  std::map<StratumKey, CensoringRow> rows;
  for (const auto& rec : ds.records) {
    CensoringRow& r = rows[rec.stratum];
    r.stratum = rec.stratum;
    const double f = static_cast<double>(rec.freq);
    r.total += f;
    if (rec.event)
      r.events += f;
    else
      r.censored += f;
  }
  CensoringSummary out;
  for (auto& [key, row] : rows) out.rows.push_back(std::move(row));
  return out;
}

std::vector<CovariateSums> compute_covariate_sums(const AnalysisDataset& ds) {
  const std::size_t p = ds.p();
  std::map<StratumKey, CovariateSums> sums;
  for (const auto& rec : ds.records) {
    CovariateSums& s = sums[rec.stratum];
    if (s.weighted_sums.empty()) {
      s.stratum = rec.stratum;
      s.weighted_sums.assign(p, 0.0);
    }
    const double wf = rec.weight * static_cast<double>(rec.freq);
    s.weight_total += wf;
    for (std::size_t a = 0; a < p; ++a)
      s.weighted_sums[a] += wf * rec.covariates[a];
  }
  std::vector<CovariateSums> out;
  for (auto& [key, s] : sums) out.push_back(std::move(s));
  return out;
}

}  // namespace distcox
