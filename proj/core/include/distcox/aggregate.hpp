#pragma once

#include "distcox/site_summary.hpp"

namespace distcox {

// Per-stratum sorted union of partner event-time grids with tie counts
// summed at shared times.
EventTimeGrid merge_event_time_grids(const std::vector<EventTimeGrid>& grids);

struct PartnerSummaries {
  int partner_id = 0;
  std::vector<StratumRiskSummaries> summaries;
};

// Elementwise sums of partner risk summaries over the designated grid, in
// ascending partner order. Every expected partner must have reported every
// (stratum, time) cell of the grid (zero-filled where it has no local risk).
// Throws MissingPartnerPayload and GridMismatch.
std::vector<StratumRiskSummaries> aggregate_summaries(
    std::vector<PartnerSummaries> parts, const std::vector<int>& expected_partners,
    const EventTimeGrid& grid);

// Per-stratum scores from globally summed summaries (center-aggregated path).
std::vector<ScoreContribution> stratum_scores_from_summaries(
    const std::vector<StratumRiskSummaries>& global, const Vector& beta,
    Ties ties);

// Fieldwise sum of contributions in the order given; callers sort by
// (partner, stratum) first so reductions are deterministic.
ScoreContribution total_score(const std::vector<ScoreContribution>& parts,
                              std::size_t p);

}  // namespace distcox
