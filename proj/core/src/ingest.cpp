#include "distcox/ingest.hpp"

#include <cmath>

#include "distcox/error.hpp"

namespace distcox {

AnalysisDataset ingest_table(const csv::Table& table, const ModelSpec& spec,
                             int partner_id) {
  const std::size_t time_col = table.column_index(spec.dependent_var);
  const std::size_t cens_col = table.column_index(spec.censoring_var);
  std::vector<std::size_t> cov_cols;
  for (const auto& name : spec.independent_vars)
    cov_cols.push_back(table.column_index(name));
  std::vector<std::size_t> strata_cols;
  for (const auto& name : spec.strata_vars)
    strata_cols.push_back(table.column_index(name));
  std::optional<std::size_t> weight_col, freq_col;
  if (!spec.weight_var.empty()) weight_col = table.column_index(spec.weight_var);
  if (!spec.freq_var.empty()) freq_col = table.column_index(spec.freq_var);

  AnalysisDataset ds;
  ds.covariate_names = spec.independent_vars;
  ds.partner_id = partner_id;

  for (const auto& row : table.rows) {
    auto field = [&](std::size_t col) -> std::optional<double> {
      if (col >= row.size()) return std::nullopt;
      return csv::parse_double(row[col]);
    };

    SubjectRecord rec;
    rec.partner_id = partner_id;
    bool usable = true;

    const auto time = field(time_col);
    const auto cens = field(cens_col);
    usable = usable && time.has_value() && cens.has_value();

    rec.covariates.reserve(cov_cols.size());
    for (std::size_t c : cov_cols) {
      const auto v = field(c);
      if (!v || !std::isfinite(*v)) { usable = false; break; }
      rec.covariates.push_back(*v);
    }
    if (usable) {
      for (std::size_t c : strata_cols) {
        const auto v = field(c);
        if (!v) { usable = false; break; }
        rec.stratum.values.push_back(*v);
      }
    }
    std::optional<double> w, f;
    if (usable && weight_col) {
      w = field(*weight_col);
      usable = w.has_value();
    }
    if (usable && freq_col) {
      f = field(*freq_col);
      usable = f.has_value();
    }
    if (!usable) {
      ++ds.dropped_rows;
      continue;
    }

    if (!(*time > 0.0) || !std::isfinite(*time))
      throw NonPositiveTime("value " + csv::format_double(*time) + " in column " +
                            spec.dependent_var);
    rec.time = *time;
    rec.event = (*cens != spec.censoring_level) ? 1 : 0;
    if (w) {
      if (!(*w >= 0.0) || !std::isfinite(*w))
        throw ConfigError("weight must be a finite nonnegative number, got " +
                          csv::format_double(*w));
      rec.weight = *w;
    }
    if (f) {
      if (!std::isfinite(*f) || *f < 1.0 || *f != std::floor(*f))
        throw ConfigError("frequency must be a positive integer, got " +
                          csv::format_double(*f));
      rec.freq = static_cast<long long>(*f);
    }
    ds.records.push_back(std::move(rec));
  }

  if (ds.records.empty())
    throw EmptyDataset("no usable rows (" + std::to_string(ds.dropped_rows) +
                       " dropped)");
  return ds;
}

AnalysisDataset ingest_dataset(const std::filesystem::path& file,
                               const ModelSpec& spec, int partner_id) {
  return ingest_table(csv::read_table(file), spec, partner_id);
}

}  // namespace distcox
