#include "distcox/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "distcox/csv.hpp"
#include "distcox/error.hpp"

namespace distcox {

const BaselineStratum* BaselineHazard::find(const StratumKey& key) const {
  for (const auto& s : strata)
    if (s.stratum == key) return &s;
  return nullptr;
}

double baseline_at(const BaselineStratum& s, double t) {
  // Right-continuous step: value of the largest event time <= t.
  auto it = std::upper_bound(s.times.begin(), s.times.end(), t);
  if (it == s.times.begin()) return 0.0;
  return s.cumhaz[static_cast<std::size_t>(it - s.times.begin()) - 1];
}

BaselineHazard baseline_cumulative_hazard(
    const std::vector<StratumRiskSummaries>& global, Ties ties) {
  BaselineHazard out;
  out.estimator = ties;
  for (const auto& stratum : global) {
    BaselineStratum bs;
    bs.stratum = stratum.stratum;
    double cum = 0.0;
    for (const auto& row : stratum.rows) {
      if (row.tie_count <= 0.0) continue;  // designated-grid time with no events
      if (!(row.s0 > 0.0))
        throw DegenerateRiskSet("risk-set sum " + csv::format_double(row.s0) +
                                " at event time " + csv::format_double(row.time));
      if (ties == Ties::Breslow) {
        cum += row.tie_count / row.s0;
      } else {
        const long long d = std::llround(row.tie_count);
        for (long long s = 1; s <= d; ++s) {
          const double e0 =
              row.s0 - (static_cast<double>(s - 1) / static_cast<double>(d)) * row.q0;
          if (!(e0 > 0.0))
            throw DegenerateRiskSet("deflated risk-set sum " +
                                    csv::format_double(e0) + " at event time " +
                                    csv::format_double(row.time));
          cum += 1.0 / e0;
        }
      }
      bs.times.push_back(row.time);
      bs.cumhaz.push_back(cum);
    }
    out.strata.push_back(std::move(bs));
  }
  return out;
}

std::vector<ResidualRecord> evaluate_subject_diagnostics(
    const AnalysisDataset& ds, const Vector& beta_hat,
    const BaselineHazard& baseline) {
  std::vector<ResidualRecord> out;
  out.reserve(ds.records.size());
  for (const auto& rec : ds.records) {
    const BaselineStratum* bs = baseline.find(rec.stratum);
    if (!bs)
      throw MalformedPayload("baseline hazard missing stratum '" +
                             stratum_label(rec.stratum) + "'");
    ResidualRecord r;
    r.event = rec.event;
    r.freq = rec.freq;
    r.partner_id = rec.partner_id;
    r.stratum = rec.stratum;
    r.linear_predictor = dot(beta_hat, rec.covariates);
    r.cumulative_hazard = std::exp(r.linear_predictor) * baseline_at(*bs, rec.time);
    r.survival = std::exp(-r.cumulative_hazard);
    r.martingale = rec.event - r.cumulative_hazard;
    // Deviance: sign(M) * sqrt(-2 [M + event * log(event - M)]). For an event
    // with zero cumulative hazard the log argument vanishes; clamp at 1e-300
    // and flag instead of fabricating a finite value.
    double logterm = 0.0;
    if (rec.event) {
      double arg = rec.event - r.martingale;
      if (arg < 1e-300) {
        arg = 1e-300;
        r.clamped = true;
      }
      logterm = std::log(arg);
    }
    const double inner = -2.0 * (r.martingale + rec.event * logterm);
    const double root = std::sqrt(std::max(0.0, inner));
    r.deviance = r.martingale > 0 ? root : (r.martingale < 0 ? -root : 0.0);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SurvivalCurve> baseline_survival_at_means(
    const BaselineHazard& baseline, const std::vector<CovariateSums>& sums,
    const Vector& beta_hat) {
  std::vector<SurvivalCurve> out;
  for (const auto& bs : baseline.strata) {
    SurvivalCurve curve;
    curve.stratum = bs.stratum;
    double theta = 0.0;
    for (const auto& s : sums) {
      if (s.stratum == bs.stratum && s.weight_total > 0) {
        Vector mean(s.weighted_sums.size());
        for (std::size_t a = 0; a < mean.size(); ++a)
          mean[a] = s.weighted_sums[a] / s.weight_total;
        theta = dot(beta_hat, mean);
        break;
      }
    }
    const double scale = std::exp(theta);
    curve.times = bs.times;
    curve.survival.reserve(bs.cumhaz.size());
    for (double h : bs.cumhaz) curve.survival.push_back(std::exp(-scale * h));
    out.push_back(std::move(curve));
  }
  return out;
}

BinnedResidualSummary bin_residuals(const std::vector<ResidualRecord>& records,
                                    int groups, int min_count, int max_groups) {
  BinnedResidualSummary out;
  if (records.empty()) return out;
  out.partner_id = records.front().partner_id;

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].linear_predictor < records[b].linear_predictor;
  });

  double total = 0.0;
  for (const auto& r : records) total += static_cast<double>(r.freq);

  // Average rank per record: tied linear predictors share the mean of the
  // subject positions they span, so ties land in the same bin.
  std::vector<double> rank(records.size(), 0.0);
  {
    double pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      double span = 0.0;
      while (j < order.size() &&
             records[order[j]].linear_predictor ==
                 records[order[i]].linear_predictor) {
        span += static_cast<double>(records[order[j]].freq);
        ++j;
      }
      const double avg = pos + (span - 1.0) / 2.0;
      for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
      pos += span;
      i = j;
    }
  }

  int effective = std::min<long long>(
      {groups, static_cast<long long>(total / min_count), max_groups});
  effective = std::max(effective, 1);
  const bool suppressed = total < min_count;

  std::vector<ResidualBin> bins;
  for (; effective >= 1; --effective) {
    std::vector<double> cnt(effective, 0.0), lp(effective, 0.0),
        mg(effective, 0.0), dv(effective, 0.0);
    for (std::size_t i = 0; i < records.size(); ++i) {
      int b = static_cast<int>(std::floor(rank[i] * effective / total));
      b = std::clamp(b, 0, effective - 1);
      const double f = static_cast<double>(records[i].freq);
      cnt[b] += f;
      lp[b] += f * records[i].linear_predictor;
      mg[b] += f * records[i].martingale;
      dv[b] += f * records[i].deviance;
    }
    const bool ok =
        std::all_of(cnt.begin(), cnt.end(),
                    [&](double c) { return c >= min_count; }) ||
        effective == 1;
    if (!ok) continue;
    bins.clear();
    for (int b = 0; b < effective; ++b) {
      if (cnt[b] <= 0.0) continue;
      ResidualBin bin;
      bin.bin = static_cast<int>(bins.size()) + 1;
      bin.count = cnt[b];
      bin.mean_linear_predictor = lp[b] / cnt[b];
      bin.mean_martingale = mg[b] / cnt[b];
      bin.mean_deviance = dv[b] / cnt[b];
      bins.push_back(bin);
    }
    break;
  }
  out.bins = std::move(bins);
  out.suppressed = suppressed;
  return out;
}

}  // namespace distcox
