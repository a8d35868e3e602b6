#include "distcox/tables.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "distcox/csv.hpp"
#include "distcox/error.hpp"

namespace distcox {

namespace {

using csv::Table;

std::string fmt(double v) { return csv::format_double(v); }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::vector<std::string> stratum_fields(const ModelSpec& spec,
                                        const StratumKey& key) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < spec.strata_vars.size(); ++i)
    out.push_back(i < key.values.size() ? fmt(key.values[i]) : "");
  return out;
}

Table cens_sum_table(const RunOutputs& out) {
  Table t;
  const bool stratified = !out.spec.strata_vars.empty();
  if (!stratified) {
    t.columns = {"Total", "Event", "Censored", "PercentCensored"};
    CensoringRow total;
    for (const auto& r : out.censoring.rows) {
      total.total += r.total;
      total.events += r.events;
      total.censored += r.censored;
    }
    t.rows.push_back({fmt(total.total), fmt(total.events), fmt(total.censored),
                      fmt(percent_censored(total))});
    return t;
  }
  t.columns = {"Stratum"};
  for (const auto& v : out.spec.strata_vars) t.columns.push_back(v);
  for (const char* c : {"Total", "Event", "Censored", "PercentCensored"})
    t.columns.push_back(c);
  CensoringRow total;
  int index = 0;
  for (const auto& r : out.censoring.rows) {
    std::vector<std::string> row{std::to_string(++index)};
    for (auto& f : stratum_fields(out.spec, r.stratum)) row.push_back(f);
    row.push_back(fmt(r.total));
    row.push_back(fmt(r.events));
    row.push_back(fmt(r.censored));
    row.push_back(fmt(percent_censored(r)));
    t.rows.push_back(std::move(row));
    total.total += r.total;
    total.events += r.events;
    total.censored += r.censored;
  }
  std::vector<std::string> row{"Total"};
  for (std::size_t i = 0; i < out.spec.strata_vars.size(); ++i) row.push_back("");
  row.push_back(fmt(total.total));
  row.push_back(fmt(total.events));
  row.push_back(fmt(total.censored));
  row.push_back(fmt(percent_censored(total)));
  t.rows.push_back(std::move(row));
  return t;
}

Table step_function_table(const RunOutputs& out, const char* value_name,
                          bool survival) {
  Table t;
  t.columns = {"Stratum"};
  for (const auto& v : out.spec.strata_vars) t.columns.push_back(v);
  t.columns.push_back("Time");
  t.columns.push_back(value_name);
  int index = 0;
  if (survival) {
    for (const auto& s : out.survival) {
      ++index;
      for (std::size_t j = 0; j < s.times.size(); ++j) {
        std::vector<std::string> row{std::to_string(index)};
        for (auto& f : stratum_fields(out.spec, s.stratum)) row.push_back(f);
        row.push_back(fmt(s.times[j]));
        row.push_back(fmt(s.survival[j]));
        t.rows.push_back(std::move(row));
      }
    }
  } else {
    for (const auto& s : out.baseline.strata) {
      ++index;
      for (std::size_t j = 0; j < s.times.size(); ++j) {
        std::vector<std::string> row{std::to_string(index)};
        for (auto& f : stratum_fields(out.spec, s.stratum)) row.push_back(f);
        row.push_back(fmt(s.times[j]));
        row.push_back(fmt(s.cumhaz[j]));
        t.rows.push_back(std::move(row));
      }
    }
  }
  return t;
}

}  // namespace

std::vector<std::filesystem::path> write_bundle(
    const RunOutputs& out, const std::filesystem::path& msoc_dir) {
  std::error_code ec;
  std::filesystem::create_directories(msoc_dir, ec);
  if (ec) throw IoFailure("cannot create " + msoc_dir.string());
  const std::string prefix = out.spec.run_id + "_";
  const auto& names = out.spec.independent_vars;
  std::vector<std::filesystem::path> written;

  auto emit = [&](const std::string& table_name, const Table& t) {
    const auto path = msoc_dir / (prefix + table_name + ".csv");
    csv::write_table(path, t);
    written.push_back(path);
  };

  {
    Table t;
    t.columns = {"Attribute", "Value"};
    t.rows.push_back({"DataSet", out.spec.dataset_name});
    t.rows.push_back({"DependentVariable", out.spec.dependent_var});
    t.rows.push_back({"CensoringVariable", out.spec.censoring_var});
    t.rows.push_back({"CensoringValue", fmt(out.spec.censoring_level)});
    t.rows.push_back({"TiesHandling", ties_name(out.spec.ties)});
    std::string strata;
    for (std::size_t i = 0; i < out.spec.strata_vars.size(); ++i) {
      if (i) strata += ' ';
      strata += out.spec.strata_vars[i];
    }
    t.rows.push_back({"Stratification", strata});
    emit("modelinfo", t);
  }

  emit("cens_sum", cens_sum_table(out));

  {
    Table t;
    t.columns = {"Status", "Reason", "Iterations", "Xconv", "MaxDelta"};
    const double last_delta = out.fit.history.empty() ||
                                      !out.fit.history.back().max_delta
                                  ? std::nan("")
                                  : *out.fit.history.back().max_delta;
    t.rows.push_back({out.fit.converged ? "Converged" : "NotConverged",
                      out.fit.converged
                          ? "convergence criterion satisfied"
                          : "maximum number of iterations reached",
                      std::to_string(out.fit.iterations_used), fmt(out.spec.xconv),
                      std::isnan(last_delta) ? "" : fmt(last_delta)});
    emit("convrg_status", t);
  }

  {
    Table t;
    t.columns = {"Iteration"};
    for (const auto& n : names) t.columns.push_back(n);
    t.columns.push_back("LogLik");
    t.columns.push_back("MaxDelta");
    for (const auto& rec : out.fit.history) {
      std::vector<std::string> row{std::to_string(rec.iteration)};
      for (double b : rec.beta) row.push_back(fmt(b));
      row.push_back(std::isnan(rec.loglik) ? "" : fmt(rec.loglik));
      row.push_back(rec.max_delta ? fmt(*rec.max_delta) : "");
      t.rows.push_back(std::move(row));
    }
    emit("iter_parms_hist", t);
  }

  if (!out.fit.converged) return written;

  {
    Table t;
    t.columns = {"Criterion", "WithoutCovariates", "WithCovariates"};
    t.rows.push_back({"-2Log L", fmt(out.fit_stats.neg2loglik_null),
                      fmt(out.fit_stats.neg2loglik_fit)});
    t.rows.push_back(
        {"AIC", fmt(out.fit_stats.neg2loglik_null), fmt(out.fit_stats.aic)});
    t.rows.push_back(
        {"SBC", fmt(out.fit_stats.neg2loglik_null), fmt(out.fit_stats.bic)});
    emit("modelfit", t);
  }

  {
    Table t;
    t.columns = {"Test", "ChiSq", "DF", "ProbChiSq"};
    t.rows.push_back({"Likelihood Ratio", fmt(out.null_test.chisq),
                      std::to_string(out.null_test.df), fmt(out.null_test.pvalue)});
    emit("glob_null_chisq", t);
  }

  {
    Table t;
    t.columns = {"Parameter", "DF",        "Estimate",    "StdErr",
                 "ChiSq",     "ProbChiSq", "HazardRatio", "HRLowerCL",
                 "HRUpperCL"};
    for (const auto& row : out.estimates)
      t.rows.push_back({row.name, std::to_string(row.df), fmt(row.estimate),
                        fmt(row.std_err), fmt(row.chisq), fmt(row.pvalue),
                        fmt(row.hazard_ratio), fmt(row.ci_lower),
                        fmt(row.ci_upper)});
    emit("p_est", t);
  }

  {
    Table t;
    t.columns = names;
    std::vector<std::string> row;
    for (double b : out.fit.beta_hat) row.push_back(fmt(b));
    t.rows.push_back(std::move(row));
    emit("model_coeff", t);
  }

  {
    Table t;
    t.columns = {"Parameter"};
    for (const auto& n : names) t.columns.push_back(n);
    for (std::size_t i = 0; i < names.size(); ++i) {
      std::vector<std::string> row{names[i]};
      for (std::size_t j = 0; j < names.size(); ++j)
        row.push_back(fmt(out.fit.covariance(i, j)));
      t.rows.push_back(std::move(row));
    }
    emit("cov_est", t);
  }

  emit("baseln_hazard", step_function_table(out, "CumHaz", false));
  emit("baseln_survival", step_function_table(out, "Survival", true));

  {
    Table t;
    t.columns = {"TotalEvents", "Neg2LogLikNull", "Neg2LogLikFit",
                 "AIC",         "BIC",            "Converged",
                 "Iterations"};
    t.rows.push_back({std::to_string(out.total_events),
                      fmt(out.fit_stats.neg2loglik_null),
                      fmt(out.fit_stats.neg2loglik_fit), fmt(out.fit_stats.aic),
                      fmt(out.fit_stats.bic), "1",
                      std::to_string(out.fit.iterations_used)});
    emit("resid_sum", t);
  }

  {
    Table t;
    t.columns = {"dp_cd",           "Bin",
                 "Count",           "MeanLinearPredictor",
                 "MeanMartingale",  "MeanDeviance",
                 "Suppressed"};
    for (const auto& partner : out.bins)
      for (const auto& bin : partner.bins)
        t.rows.push_back({std::to_string(partner.partner_id),
                          std::to_string(bin.bin), fmt(bin.count),
                          fmt(bin.mean_linear_predictor),
                          fmt(bin.mean_martingale), fmt(bin.mean_deviance),
                          partner.suppressed ? "1" : "0"});
    emit("resid_sum_by_pct", t);
  }

  return written;
}

namespace {

Table load_table(const std::filesystem::path& msoc_dir,
                 const std::string& prefix, const std::string& name) {
  const auto path = msoc_dir / (prefix + name + ".csv");
  if (!std::filesystem::exists(path))
    throw IoFailure("required table is missing: " + path.string());
  return csv::read_table(path);
}

void render_text_table(std::ostream& os, const Table& t,
                       const std::vector<std::string>& cells_header,
                       const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width(cells_header.size());
  for (std::size_t c = 0; c < cells_header.size(); ++c)
    width[c] = cells_header[c].size();
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c)
      width[c] = std::max(width[c], row[c].size());
  auto pad = [&](const std::string& s, std::size_t w) {
    return s + std::string(w - s.size(), ' ');
  };
  os << "  ";
  for (std::size_t c = 0; c < cells_header.size(); ++c)
    os << pad(cells_header[c], width[c]) << "  ";
  os << "\n";
  for (const auto& row : cells) {
    os << "  ";
    for (std::size_t c = 0; c < row.size(); ++c) os << pad(row[c], width[c]) << "  ";
    os << "\n";
  }
  (void)t;
}

std::string reformat(const std::string& raw, int digits) {
  const auto v = csv::parse_double(raw);
  return v ? fixed(*v, digits) : raw;
}

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                               "#9467bd", "#ff7f0e", "#8c564b"};

void write_residual_svg(const std::filesystem::path& path, const Table& bins) {
  const std::size_t lp = bins.column_index("MeanLinearPredictor");
  const std::size_t mg = bins.column_index("MeanMartingale");
  const std::size_t cn = bins.column_index("Count");
  const std::size_t dp = bins.column_index("dp_cd");
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0, cmax = 1;
  bool first = true;
  for (const auto& row : bins.rows) {
    const double x = *csv::parse_double(row[lp]);
    const double y = *csv::parse_double(row[mg]);
    const double c = *csv::parse_double(row[cn]);
    if (first) {
      xmin = xmax = x;
      ymin = ymax = y;
      first = false;
    }
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
    cmax = std::max(cmax, c);
  }
  ymin = std::min(ymin, -0.05);
  ymax = std::max(ymax, 0.05);
  const double W = 640, H = 440, L = 60, R = 20, T = 20, B = 40;
  auto sx = [&](double x) {
    return xmax > xmin ? L + (x - xmin) / (xmax - xmin) * (W - L - R) : W / 2;
  };
  auto sy = [&](double y) {
    return ymax > ymin ? T + (ymax - y) / (ymax - ymin) * (H - T - B) : H / 2;
  };
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoFailure("cannot write " + path.string());
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='"
     << H << "' viewBox='0 0 " << W << " " << H << "'>\n";
  os << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
  os << "<line x1='" << L << "' y1='" << sy(0.0) << "' x2='" << W - R
     << "' y2='" << sy(0.0) << "' stroke='#999' stroke-dasharray='4 3'/>\n";
  os << "<line x1='" << L << "' y1='" << T << "' x2='" << L << "' y2='"
     << H - B << "' stroke='#333'/>\n";
  os << "<line x1='" << L << "' y1='" << H - B << "' x2='" << W - R << "' y2='"
     << H - B << "' stroke='#333'/>\n";
  std::map<int, const char*> colors;
  for (const auto& row : bins.rows) {
    const int partner = static_cast<int>(*csv::parse_double(row[dp]));
    if (!colors.count(partner))
      colors[partner] = kSeriesColors[colors.size() % 6];
    const double r =
        4.0 + 12.0 * std::sqrt(*csv::parse_double(row[cn]) / cmax);
    os << "<circle cx='" << sx(*csv::parse_double(row[lp])) << "' cy='"
       << sy(*csv::parse_double(row[mg])) << "' r='" << r << "' fill='"
       << colors[partner] << "' fill-opacity='0.45' stroke='"
       << colors[partner] << "'/>\n";
  }
  os << "<text x='" << (L + W - R) / 2
     << "' y='" << H - 8
     << "' text-anchor='middle' font-size='13'>mean linear predictor</text>\n";
  os << "<text x='14' y='" << (T + H - B) / 2
     << "' text-anchor='middle' font-size='13' transform='rotate(-90 14 "
     << (T + H - B) / 2 << ")'>mean martingale residual</text>\n";
  os << "</svg>\n";
}

}  // namespace

std::filesystem::path render_report(const std::filesystem::path& msoc_dir,
                                    const std::string& run_id,
                                    const std::filesystem::path& dest_dir) {
  std::error_code ec;
  std::filesystem::create_directories(dest_dir, ec);
  const std::string prefix = run_id + "_";

  const Table info = load_table(msoc_dir, prefix, "modelinfo");
  const Table cens = load_table(msoc_dir, prefix, "cens_sum");
  const Table convrg = load_table(msoc_dir, prefix, "convrg_status");
  const bool converged = convrg.rows.at(0).at(0) == "Converged";

  const auto report_path = dest_dir / (prefix + "report.txt");
  std::ofstream os(report_path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoFailure("cannot write " + report_path.string());

  os << "Distributed Cox regression report  (run " << run_id << ")\n";
  os << "=================================================\n\n";

  os << "Model Information\n";
  {
    std::vector<std::vector<std::string>> cells;
    for (const auto& row : info.rows) cells.push_back({row[0], row[1]});
    render_text_table(os, info, {"Attribute", "Value"}, cells);
  }
  os << "\nConvergence\n";
  {
    std::vector<std::vector<std::string>> cells;
    for (const auto& row : convrg.rows)
      cells.push_back({row[0], row[1], row[2]});
    render_text_table(os, convrg, {"Status", "Reason", "Iterations"}, cells);
  }

  os << "\nNumber of Events and Censored Values\n";
  {
    std::vector<std::vector<std::string>> cells;
    const std::size_t pct = cens.column_index("PercentCensored");
    for (const auto& row : cens.rows) {
      std::vector<std::string> line;
      for (std::size_t c = 0; c < row.size(); ++c)
        line.push_back(c == pct ? reformat(row[c], 2) : row[c]);
      cells.push_back(std::move(line));
    }
    render_text_table(os, cens, cens.columns, cells);
  }

  if (converged) {
    const Table fitstats = load_table(msoc_dir, prefix, "modelfit");
    const Table nulltest = load_table(msoc_dir, prefix, "glob_null_chisq");
    const Table pest = load_table(msoc_dir, prefix, "p_est");

    os << "\nModel Fit Statistics\n";
    {
      std::vector<std::vector<std::string>> cells;
      for (const auto& row : fitstats.rows)
        cells.push_back({row[0], reformat(row[1], 6), reformat(row[2], 6)});
      render_text_table(os, fitstats,
                        {"Criterion", "Without Covariates", "With Covariates"},
                        cells);
    }

    os << "\nTesting Global Null Hypothesis: BETA = 0\n";
    {
      std::vector<std::vector<std::string>> cells;
      for (const auto& row : nulltest.rows)
        cells.push_back(
            {row[0], reformat(row[1], 6), row[2], reformat(row[3], 4)});
      render_text_table(os, nulltest,
                        {"Test", "Chi-Square", "DF", "Pr > ChiSq"}, cells);
    }

    os << "\nParameter Estimates\n";
    {
      std::vector<std::vector<std::string>> cells;
      for (const auto& row : pest.rows)
        cells.push_back({row[0], row[1], reformat(row[2], 6), reformat(row[3], 6),
                         reformat(row[4], 6), reformat(row[5], 4),
                         reformat(row[6], 6), reformat(row[7], 7),
                         reformat(row[8], 7)});
      render_text_table(
          os, pest,
          {"Parameter", "DF", "Estimate", "Std Err", "Chi-Square", "Pr > ChiSq",
           "Hazard Ratio", "Lower CL", "Upper CL"},
          cells);
    }

    const Table bins = load_table(msoc_dir, prefix, "resid_sum_by_pct");
    os << "\nResidual Summary by Percentile of the Linear Predictor\n";
    if (bins.rows.empty()) {
      os << "  (all bins suppressed by the minimum-count rule)\n";
    } else {
      std::vector<std::vector<std::string>> cells;
      for (const auto& row : bins.rows)
        cells.push_back({row[0], row[1], row[2], reformat(row[3], 6),
                         reformat(row[4], 6), reformat(row[5], 6)});
      render_text_table(os, bins,
                        {"dp_cd", "Bin", "Count", "Mean LP", "Mean Martingale",
                         "Mean Deviance"},
                        cells);
      // Scatter data: x, y, size, series.
      Table plot;
      plot.columns = {"x_mean_linear_predictor", "y_mean_martingale", "size",
                      "series_dp_cd"};
      for (const auto& row : bins.rows)
        plot.rows.push_back(
            {row[bins.column_index("MeanLinearPredictor")],
             row[bins.column_index("MeanMartingale")],
             row[bins.column_index("Count")], row[bins.column_index("dp_cd")]});
      csv::write_table(dest_dir / (prefix + "resid_plot.csv"), plot);
      write_residual_svg(dest_dir / (prefix + "resid_plot.svg"), bins);
      os << "\n  Scatter data: " << (prefix + "resid_plot.csv") << " / "
         << (prefix + "resid_plot.svg") << "\n";
    }
  } else {
    os << "\nThe run did not converge; estimate tables were not produced.\n";
  }
  os.close();
  return report_path;
}

}  // namespace distcox
