#include "distcox/aggregate.hpp"

#include <algorithm>
#include <map>

#include "distcox/csv.hpp"
#include "distcox/error.hpp"

namespace distcox {

EventTimeGrid merge_event_time_grids(const std::vector<EventTimeGrid>& grids) {
  std::map<StratumKey, std::map<double, double>> merged;
  for (const auto& grid : grids) {
    for (const auto& s : grid.strata) {
      auto& times = merged[s.stratum];
      for (std::size_t j = 0; j < s.times.size(); ++j) {
        const double d =
            j < s.tie_counts.size() ? s.tie_counts[j] : 0.0;
        times[s.times[j]] += d;
      }
    }
  }
  EventTimeGrid out;
  for (const auto& [key, times] : merged) {
    StratumEventTimes s;
    s.stratum = key;
    for (const auto& [t, d] : times) {
      s.times.push_back(t);
      s.tie_counts.push_back(d);
    }
    out.strata.push_back(std::move(s));
  }
  return out;
}

namespace {

void check_alignment(const PartnerSummaries& part, const EventTimeGrid& grid) {
  if (part.summaries.size() != grid.strata.size())
    throw GridMismatch("partner " + std::to_string(part.partner_id) +
                       " reported " + std::to_string(part.summaries.size()) +
                       " strata, designated grid has " +
                       std::to_string(grid.strata.size()));
  for (std::size_t m = 0; m < grid.strata.size(); ++m) {
    const auto& gs = grid.strata[m];
    const auto& ps = part.summaries[m];
    if (ps.stratum != gs.stratum)
      throw GridMismatch("partner " + std::to_string(part.partner_id) +
                         " stratum order mismatch at '" +
                         stratum_label(ps.stratum) + "'");
    if (ps.rows.size() != gs.times.size())
      throw GridMismatch("partner " + std::to_string(part.partner_id) +
                         " reported " + std::to_string(ps.rows.size()) +
                         " event times in stratum '" + stratum_label(gs.stratum) +
                         "', expected " + std::to_string(gs.times.size()));
    for (std::size_t j = 0; j < gs.times.size(); ++j)
      if (ps.rows[j].time != gs.times[j])
        throw GridMismatch("partner " + std::to_string(part.partner_id) +
                           " event time " + csv::format_double(ps.rows[j].time) +
                           " differs from designated " +
                           csv::format_double(gs.times[j]));
  }
}

}  // namespace

std::vector<StratumRiskSummaries> aggregate_summaries(
    std::vector<PartnerSummaries> parts,
    const std::vector<int>& expected_partners, const EventTimeGrid& grid) {
  std::sort(parts.begin(), parts.end(),
            [](const PartnerSummaries& a, const PartnerSummaries& b) {
              return a.partner_id < b.partner_id;
            });
  for (int id : expected_partners) {
    const bool present =
        std::any_of(parts.begin(), parts.end(),
                    [&](const PartnerSummaries& p) { return p.partner_id == id; });
    if (!present)
      throw MissingPartnerPayload("no summary payload from partner " +
                                  std::to_string(id));
  }
  for (const auto& part : parts) check_alignment(part, grid);

  std::vector<StratumRiskSummaries> global;
  global.reserve(grid.strata.size());
  std::size_t p = 0;
  for (const auto& part : parts)
    for (const auto& s : part.summaries)
      if (!s.rows.empty()) p = std::max(p, s.rows[0].d1.size());
  for (const auto& gs : grid.strata) {
    StratumRiskSummaries s;
    s.stratum = gs.stratum;
    s.rows.reserve(gs.times.size());
    for (double t : gs.times) {
      RiskSetSummary r;
      r.time = t;
      r.d1.assign(p, 0.0);
      r.s1.assign(p, 0.0);
      r.s2 = Matrix(p, p);
      r.q1.assign(p, 0.0);
      r.q2 = Matrix(p, p);
      s.rows.push_back(std::move(r));
    }
    global.push_back(std::move(s));
  }

  for (const auto& part : parts) {
    for (std::size_t m = 0; m < global.size(); ++m) {
      for (std::size_t j = 0; j < global[m].rows.size(); ++j) {
        RiskSetSummary& g = global[m].rows[j];
        const RiskSetSummary& r = part.summaries[m].rows[j];
        g.d0 += r.d0;
        g.s0 += r.s0;
        g.q0 += r.q0;
        g.tie_count += r.tie_count;
        for (std::size_t a = 0; a < p; ++a) {
          g.d1[a] += r.d1[a];
          g.s1[a] += r.s1[a];
          g.q1[a] += r.q1[a];
          for (std::size_t b = 0; b < p; ++b) {
            g.s2(a, b) += r.s2(a, b);
            g.q2(a, b) += r.q2(a, b);
          }
        }
      }
    }
  }
  return global;
}

std::vector<ScoreContribution> stratum_scores_from_summaries(
    const std::vector<StratumRiskSummaries>& global, const Vector& beta,
    Ties ties) {
  std::vector<ScoreContribution> out;
  out.reserve(global.size());
  for (const auto& s : global) out.push_back(stratum_scores(s, beta, ties));
  return out;
}

ScoreContribution total_score(const std::vector<ScoreContribution>& parts,
                              std::size_t p) {
  ScoreContribution total;
  total.scope = Scope::Global;
  total.gradient.assign(p, 0.0);
  total.hessian = Matrix(p, p);
  for (const auto& part : parts) {
    total.loglik += part.loglik;
    total.gradient += part.gradient;
    total.hessian += part.hessian;
  }
  return total;
}

}  // namespace distcox
