#include "distcox/protocol.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

namespace distcox {

namespace {

using csv::Table;

std::string fmt(double v) { return csv::format_double(v); }

double need_double(const Table& t, const std::string& file, std::size_t row,
                   std::size_t col) {
  if (col >= t.rows[row].size())
    throw MalformedPayload(file + ": row " + std::to_string(row + 2) +
                           " is missing column '" + t.columns[col] + "'");
  const auto v = csv::parse_double(t.rows[row][col]);
  if (!v)
    throw MalformedPayload(file + ": column '" + t.columns[col] +
                           "' holds non-numeric value '" + t.rows[row][col] +
                           "'");
  return *v;
}

std::size_t need_column(const Table& t, const std::string& file,
                        const std::string& name) {
  if (auto idx = t.find_column(name)) return *idx;
  throw MalformedPayload(file + ": missing column '" + name + "'");
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ' ';
    out += names[i];
  }
  return out;
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// ---- spec.csv ----

Table encode_spec(const ModelSpec& spec) {
  Table t;
  t.columns = {"key", "value"};
  auto put = [&](const std::string& k, const std::string& v) {
    t.rows.push_back({k, v});
  };
  put("run_id", spec.run_id);
  put("dataset_name", spec.dataset_name);
  put("dependent_var", spec.dependent_var);
  put("censoring_var", spec.censoring_var);
  put("censoring_level", fmt(spec.censoring_level));
  put("independent_vars", join_names(spec.independent_vars));
  put("strata_vars", join_names(spec.strata_vars));
  put("ties", ties_name(spec.ties));
  put("weight_var", spec.weight_var);
  put("freq_var", spec.freq_var);
  put("xconv", fmt(spec.xconv));
  put("max_iter", std::to_string(spec.max_iter));
  put("alpha", fmt(spec.alpha));
  put("groups", std::to_string(spec.groups));
  put("min_count_per_grp_glob", std::to_string(spec.min_count_per_grp_glob));
  put("max_numb_of_grp", std::to_string(spec.max_numb_of_grp));
  put("have_event_time_set", spec.event_time_set.empty() ? "0" : "1");
  return t;
}

ModelSpec decode_spec(const Table& t) {
  std::map<std::string, std::string> kv;
  const std::size_t key_col = need_column(t, "spec.csv", "key");
  const std::size_t val_col = need_column(t, "spec.csv", "value");
  for (const auto& row : t.rows) {
    const std::string val = val_col < row.size() ? row[val_col] : "";
    kv[row[key_col]] = val;
  }
  auto need = [&](const std::string& k) -> std::string {
    auto it = kv.find(k);
    if (it == kv.end())
      throw MalformedPayload("spec.csv: missing key '" + k + "'");
    return it->second;
  };
  auto need_num = [&](const std::string& k) -> double {
    const auto v = csv::parse_double(need(k));
    if (!v) throw MalformedPayload("spec.csv: bad numeric for key '" + k + "'");
    return *v;
  };
  ModelSpec spec;
  spec.run_id = need("run_id");
  spec.dataset_name = need("dataset_name");
  spec.dependent_var = need("dependent_var");
  spec.censoring_var = need("censoring_var");
  spec.censoring_level = need_num("censoring_level");
  spec.independent_vars = split_names(need("independent_vars"));
  spec.strata_vars = split_names(need("strata_vars"));
  spec.ties = parse_ties(need("ties"));
  spec.weight_var = need("weight_var");
  spec.freq_var = need("freq_var");
  spec.xconv = need_num("xconv");
  spec.max_iter = static_cast<int>(need_num("max_iter"));
  spec.alpha = need_num("alpha");
  spec.groups = static_cast<int>(need_num("groups"));
  spec.min_count_per_grp_glob = static_cast<int>(need_num("min_count_per_grp_glob"));
  spec.max_numb_of_grp = static_cast<int>(need_num("max_numb_of_grp"));
  if (need("have_event_time_set") == "1")
    spec.event_time_set.push_back(0.0);  // flag only; times stay at the center
  return spec;
}

// ---- grid.csv ----

Table encode_grid(const EventTimeGrid& grid) {
  Table t;
  t.columns = {"stratum", "time", "tie_count"};
  for (const auto& s : grid.strata) {
    const std::string label = stratum_label(s.stratum);
    if (s.times.empty()) {
      // keep stratum visible even without event times
      t.rows.push_back({label, "", ""});
      continue;
    }
    for (std::size_t j = 0; j < s.times.size(); ++j)
      t.rows.push_back({label, fmt(s.times[j]),
                        fmt(j < s.tie_counts.size() ? s.tie_counts[j] : 0.0)});
  }
  return t;
}

EventTimeGrid decode_grid(const Table& t) {
  const std::size_t s_col = need_column(t, "grid.csv", "stratum");
  const std::size_t t_col = need_column(t, "grid.csv", "time");
  const std::size_t d_col = need_column(t, "grid.csv", "tie_count");
  std::map<StratumKey, StratumEventTimes> strata;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const StratumKey key = parse_stratum_label(t.rows[r][s_col]);
    auto& s = strata[key];
    s.stratum = key;
    if (t.rows[r][t_col].empty()) continue;
    s.times.push_back(need_double(t, "grid.csv", r, t_col));
    s.tie_counts.push_back(need_double(t, "grid.csv", r, d_col));
  }
  EventTimeGrid grid;
  for (auto& [key, s] : strata) grid.strata.push_back(std::move(s));
  return grid;
}

// ---- censoring.csv ----

Table encode_censoring(const CensoringSummary& c) {
  Table t;
  t.columns = {"stratum", "total", "events", "censored"};
  for (const auto& r : c.rows)
    t.rows.push_back(
        {stratum_label(r.stratum), fmt(r.total), fmt(r.events), fmt(r.censored)});
  return t;
}

CensoringSummary decode_censoring(const Table& t) {
  const std::size_t s_col = need_column(t, "censoring.csv", "stratum");
  const std::size_t tot = need_column(t, "censoring.csv", "total");
  const std::size_t ev = need_column(t, "censoring.csv", "events");
  const std::size_t ce = need_column(t, "censoring.csv", "censored");
  CensoringSummary c;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    CensoringRow row;
    row.stratum = parse_stratum_label(t.rows[r][s_col]);
    row.total = need_double(t, "censoring.csv", r, tot);
    row.events = need_double(t, "censoring.csv", r, ev);
    row.censored = need_double(t, "censoring.csv", r, ce);
    c.rows.push_back(std::move(row));
  }
  return c;
}

// ---- covsums.csv ----

Table encode_covsums(const std::vector<CovariateSums>& sums,
                     const std::vector<std::string>& names) {
  Table t;
  t.columns = {"stratum", "weight_total"};
  for (const auto& n : names) t.columns.push_back("sum_" + n);
  for (const auto& s : sums) {
    std::vector<std::string> row{stratum_label(s.stratum), fmt(s.weight_total)};
    for (double v : s.weighted_sums) row.push_back(fmt(v));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<CovariateSums> decode_covsums(const Table& t) {
  const std::size_t s_col = need_column(t, "covsums.csv", "stratum");
  const std::size_t w_col = need_column(t, "covsums.csv", "weight_total");
  std::vector<CovariateSums> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    CovariateSums s;
    s.stratum = parse_stratum_label(t.rows[r][s_col]);
    s.weight_total = need_double(t, "covsums.csv", r, w_col);
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      if (c == s_col || c == w_col) continue;
      s.weighted_sums.push_back(need_double(t, "covsums.csv", r, c));
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---- beta.csv ----

Table encode_beta(const Vector& beta) {
  Table t;
  t.columns = {"parameter", "value"};
  for (std::size_t i = 0; i < beta.size(); ++i)
    t.rows.push_back({"b" + std::to_string(i + 1), fmt(beta[i])});
  return t;
}

Vector decode_beta(const Table& t) {
  const std::size_t v_col = need_column(t, "beta.csv", "value");
  Vector beta;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    beta.push_back(need_double(t, "beta.csv", r, v_col));
  return beta;
}

// ---- summaries.csv (lower-triangle matrix transport) ----

Table encode_summaries(const std::vector<StratumRiskSummaries>& summaries,
                       bool efron) {
  std::size_t p = 0;
  for (const auto& s : summaries)
    if (!s.rows.empty()) p = s.rows[0].d1.size();
  Table t;
  t.columns = {"stratum", "time", "tie_count", "d0", "s0"};
  for (std::size_t i = 0; i < p; ++i)
    t.columns.push_back("d1_" + std::to_string(i + 1));
  for (std::size_t i = 0; i < p; ++i)
    t.columns.push_back("s1_" + std::to_string(i + 1));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      t.columns.push_back("s2_" + std::to_string(i + 1) + "_" +
                          std::to_string(j + 1));
  if (efron) {
    t.columns.push_back("q0");
    for (std::size_t i = 0; i < p; ++i)
      t.columns.push_back("q1_" + std::to_string(i + 1));
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        t.columns.push_back("q2_" + std::to_string(i + 1) + "_" +
                            std::to_string(j + 1));
  }
  for (const auto& s : summaries) {
    const std::string label = stratum_label(s.stratum);
    for (const auto& row : s.rows) {
      std::vector<std::string> r{label, fmt(row.time), fmt(row.tie_count),
                                 fmt(row.d0), fmt(row.s0)};
      for (double v : row.d1) r.push_back(fmt(v));
      for (double v : row.s1) r.push_back(fmt(v));
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j <= i; ++j) r.push_back(fmt(row.s2(i, j)));
      if (efron) {
        r.push_back(fmt(row.q0));
        for (double v : row.q1) r.push_back(fmt(v));
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t j = 0; j <= i; ++j) r.push_back(fmt(row.q2(i, j)));
      }
      t.rows.push_back(std::move(r));
    }
  }
  return t;
}

std::vector<StratumRiskSummaries> decode_summaries(const Table& t) {
  // Infer p from the d1_* columns.
  std::size_t p = 0;
  while (t.find_column("d1_" + std::to_string(p + 1))) ++p;
  const std::string file = "summaries.csv";
  const std::size_t s_col = need_column(t, file, "stratum");
  const std::size_t t_col = need_column(t, file, "time");
  const std::size_t d_col = need_column(t, file, "tie_count");
  const std::size_t d0_col = need_column(t, file, "d0");
  const std::size_t s0_col = need_column(t, file, "s0");
  const bool efron = t.find_column("q0").has_value();

  std::vector<std::size_t> d1_cols, s1_cols, s2_cols, q1_cols, q2_cols;
  for (std::size_t i = 0; i < p; ++i) {
    d1_cols.push_back(need_column(t, file, "d1_" + std::to_string(i + 1)));
    s1_cols.push_back(need_column(t, file, "s1_" + std::to_string(i + 1)));
  }
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      s2_cols.push_back(need_column(
          t, file, "s2_" + std::to_string(i + 1) + "_" + std::to_string(j + 1)));
  std::size_t q0_col = 0;
  if (efron) {
    q0_col = need_column(t, file, "q0");
    for (std::size_t i = 0; i < p; ++i)
      q1_cols.push_back(need_column(t, file, "q1_" + std::to_string(i + 1)));
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        q2_cols.push_back(need_column(t, file, "q2_" + std::to_string(i + 1) +
                                                   "_" + std::to_string(j + 1)));
  }

  std::map<StratumKey, StratumRiskSummaries> strata;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const StratumKey key = parse_stratum_label(t.rows[r][s_col]);
    auto& s = strata[key];
    s.stratum = key;
    RiskSetSummary row;
    row.time = need_double(t, file, r, t_col);
    row.tie_count = need_double(t, file, r, d_col);
    row.d0 = need_double(t, file, r, d0_col);
    row.s0 = need_double(t, file, r, s0_col);
    row.d1.resize(p);
    row.s1.resize(p);
    row.q1.assign(p, 0.0);
    row.s2 = Matrix(p, p);
    row.q2 = Matrix(p, p);
    for (std::size_t i = 0; i < p; ++i) {
      row.d1[i] = need_double(t, file, r, d1_cols[i]);
      row.s1[i] = need_double(t, file, r, s1_cols[i]);
    }
    std::size_t k = 0;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j <= i; ++j, ++k) {
        const double v = need_double(t, file, r, s2_cols[k]);
        row.s2(i, j) = v;
        row.s2(j, i) = v;
      }
    if (efron) {
      row.q0 = need_double(t, file, r, q0_col);
      for (std::size_t i = 0; i < p; ++i)
        row.q1[i] = need_double(t, file, r, q1_cols[i]);
      k = 0;
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j <= i; ++j, ++k) {
          const double v = need_double(t, file, r, q2_cols[k]);
          row.q2(i, j) = v;
          row.q2(j, i) = v;
        }
    }
    s.rows.push_back(std::move(row));
  }
  std::vector<StratumRiskSummaries> out;
  for (auto& [key, s] : strata) out.push_back(std::move(s));
  return out;
}

// ---- scores.csv ----

Table encode_scores(const std::vector<ScoreContribution>& scores) {
  std::size_t p = 0;
  for (const auto& s : scores) p = s.gradient.size();
  Table t;
  t.columns = {"stratum", "loglik"};
  for (std::size_t i = 0; i < p; ++i)
    t.columns.push_back("g_" + std::to_string(i + 1));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      t.columns.push_back("h_" + std::to_string(i + 1) + "_" +
                          std::to_string(j + 1));
  for (const auto& s : scores) {
    std::vector<std::string> r{stratum_label(s.stratum), fmt(s.loglik)};
    for (double v : s.gradient) r.push_back(fmt(v));
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j <= i; ++j) r.push_back(fmt(s.hessian(i, j)));
    t.rows.push_back(std::move(r));
  }
  return t;
}

std::vector<ScoreContribution> decode_scores(const Table& t) {
  std::size_t p = 0;
  while (t.find_column("g_" + std::to_string(p + 1))) ++p;
  const std::string file = "scores.csv";
  const std::size_t s_col = need_column(t, file, "stratum");
  const std::size_t l_col = need_column(t, file, "loglik");
  std::vector<std::size_t> g_cols, h_cols;
  for (std::size_t i = 0; i < p; ++i)
    g_cols.push_back(need_column(t, file, "g_" + std::to_string(i + 1)));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      h_cols.push_back(need_column(
          t, file, "h_" + std::to_string(i + 1) + "_" + std::to_string(j + 1)));
  std::vector<ScoreContribution> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ScoreContribution sc;
    sc.scope = Scope::Stratum;
    sc.stratum = parse_stratum_label(t.rows[r][s_col]);
    sc.loglik = need_double(t, file, r, l_col);
    sc.gradient.resize(p);
    sc.hessian = Matrix(p, p);
    for (std::size_t i = 0; i < p; ++i)
      sc.gradient[i] = need_double(t, file, r, g_cols[i]);
    std::size_t k = 0;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j <= i; ++j, ++k) {
        const double v = need_double(t, file, r, h_cols[k]);
        sc.hessian(i, j) = v;
        sc.hessian(j, i) = v;
      }
    out.push_back(std::move(sc));
  }
  return out;
}

// ---- baseline.csv ----

Table encode_baseline(const BaselineHazard& b) {
  Table t;
  t.columns = {"stratum", "time", "cumhaz"};
  for (const auto& s : b.strata) {
    const std::string label = stratum_label(s.stratum);
    if (s.times.empty()) {
      t.rows.push_back({label, "", ""});
      continue;
    }
    for (std::size_t j = 0; j < s.times.size(); ++j)
      t.rows.push_back({label, fmt(s.times[j]), fmt(s.cumhaz[j])});
  }
  return t;
}

BaselineHazard decode_baseline(const Table& t, Ties estimator) {
  const std::size_t s_col = need_column(t, "baseline.csv", "stratum");
  const std::size_t t_col = need_column(t, "baseline.csv", "time");
  const std::size_t h_col = need_column(t, "baseline.csv", "cumhaz");
  std::map<StratumKey, BaselineStratum> strata;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const StratumKey key = parse_stratum_label(t.rows[r][s_col]);
    auto& s = strata[key];
    s.stratum = key;
    if (t.rows[r][t_col].empty()) continue;
    s.times.push_back(need_double(t, "baseline.csv", r, t_col));
    s.cumhaz.push_back(need_double(t, "baseline.csv", r, h_col));
  }
  BaselineHazard out;
  out.estimator = estimator;
  for (auto& [key, s] : strata) out.strata.push_back(std::move(s));
  return out;
}

// ---- bins.csv ----

Table encode_bins(const BinnedResidualSummary& b) {
  Table t;
  t.columns = {"dp_cd",           "bin",
               "count",           "mean_linear_predictor",
               "mean_martingale", "mean_deviance"};
  for (const auto& bin : b.bins)
    t.rows.push_back({std::to_string(b.partner_id), std::to_string(bin.bin),
                      fmt(bin.count), fmt(bin.mean_linear_predictor),
                      fmt(bin.mean_martingale), fmt(bin.mean_deviance)});
  return t;
}

BinnedResidualSummary decode_bins(const Table& t, bool suppressed) {
  const std::string file = "bins.csv";
  const std::size_t dp = need_column(t, file, "dp_cd");
  const std::size_t bi = need_column(t, file, "bin");
  const std::size_t cn = need_column(t, file, "count");
  const std::size_t lp = need_column(t, file, "mean_linear_predictor");
  const std::size_t mg = need_column(t, file, "mean_martingale");
  const std::size_t dv = need_column(t, file, "mean_deviance");
  BinnedResidualSummary out;
  out.suppressed = suppressed;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out.partner_id = static_cast<int>(need_double(t, file, r, dp));
    ResidualBin bin;
    bin.bin = static_cast<int>(need_double(t, file, r, bi));
    bin.count = need_double(t, file, r, cn);
    bin.mean_linear_predictor = need_double(t, file, r, lp);
    bin.mean_martingale = need_double(t, file, r, mg);
    bin.mean_deviance = need_double(t, file, r, dv);
    out.bins.push_back(bin);
  }
  return out;
}

}  // namespace

const char* message_kind_name(MessageKind kind) {
  switch (kind) {
    case MessageKind::HandshakeRequest: return "HANDSHAKE_REQUEST";
    case MessageKind::HandshakeReply: return "HANDSHAKE_REPLY";
    case MessageKind::Iterate: return "ITERATE";
    case MessageKind::SummaryReply: return "SUMMARY_REPLY";
    case MessageKind::Finalize: return "FINALIZE";
    case MessageKind::DiagnosticsReply: return "DIAGNOSTICS_REPLY";
    case MessageKind::Stop: return "STOP";
  }
  return "UNKNOWN";
}

namespace {

MessageKind parse_kind(const std::string& name) {
  for (MessageKind k :
       {MessageKind::HandshakeRequest, MessageKind::HandshakeReply,
        MessageKind::Iterate, MessageKind::SummaryReply, MessageKind::Finalize,
        MessageKind::DiagnosticsReply, MessageKind::Stop})
    if (name == message_kind_name(k)) return k;
  throw MalformedPayload("manifest.csv: unknown message kind '" + name + "'");
}

}  // namespace

std::string direction_name(const Direction& dir) {
  const std::string partner = "dp" + std::to_string(dir.partner_id);
  return dir.to_partner ? "center_to_" + partner : partner + "_to_center";
}

TransportConfig loopback_transport(double wait_max) {
  TransportConfig cfg;
  cfg.mode = TransportConfig::Mode::Loopback;
  cfg.wait_time_min = 0.001;
  cfg.wait_time_max = wait_max;
  cfg.bus = std::make_shared<LoopbackBus>();
  return cfg;
}

std::vector<std::pair<std::string, csv::Table>> encode_message(
    const RoundMessage& msg) {
  std::vector<std::pair<std::string, Table>> files;
  switch (msg.kind) {
    case MessageKind::HandshakeRequest:
      files.emplace_back("spec.csv", encode_spec(msg.spec));
      break;
    case MessageKind::HandshakeReply:
      files.emplace_back("censoring.csv", encode_censoring(msg.censoring));
      files.emplace_back("covsums.csv",
                         encode_covsums(msg.covariate_sums,
                                        msg.spec.independent_vars));
      if (!msg.grid.strata.empty())
        files.emplace_back("grid.csv", encode_grid(msg.grid));
      break;
    case MessageKind::Iterate:
      files.emplace_back("beta.csv", encode_beta(msg.beta));
      if (!msg.grid.strata.empty())
        files.emplace_back("grid.csv", encode_grid(msg.grid));
      break;
    case MessageKind::SummaryReply:
      if (!msg.scores.empty())
        files.emplace_back("scores.csv", encode_scores(msg.scores));
      else
        files.emplace_back(
            "summaries.csv",
            encode_summaries(msg.summaries,
                             msg.baseline.estimator == Ties::Efron));
      if (!msg.baseline.strata.empty())
        files.emplace_back("baseline.csv", encode_baseline(msg.baseline));
      break;
    case MessageKind::Finalize:
      files.emplace_back("beta.csv", encode_beta(msg.beta));
      files.emplace_back("baseline.csv", encode_baseline(msg.baseline));
      break;
    case MessageKind::DiagnosticsReply:
      files.emplace_back("bins.csv", encode_bins(msg.bins));
      break;
    case MessageKind::Stop:
      break;
  }

  Table manifest;
  manifest.columns = {"entry", "name", "value"};
  auto meta = [&](const std::string& k, const std::string& v) {
    manifest.rows.push_back({"meta", k, v});
  };
  meta("kind", message_kind_name(msg.kind));
  meta("run_id", msg.run_id);
  meta("round", std::to_string(msg.round));
  if (msg.kind == MessageKind::Iterate)
    meta("final", msg.final_round ? "1" : "0");
  if (msg.kind == MessageKind::SummaryReply ||
      msg.kind == MessageKind::Finalize)
    meta("estimator", ties_name(msg.baseline.estimator));
  if (msg.kind == MessageKind::DiagnosticsReply) {
    meta("suppressed", msg.bins.suppressed ? "1" : "0");
    meta("partner", std::to_string(msg.bins.partner_id));
  }
  if (msg.kind == MessageKind::Stop) {
    meta("status", msg.status);
    meta("reason", msg.reason);
    meta("class", std::to_string(static_cast<int>(msg.error_class)));
  }
  for (const auto& [name, table] : files)
    manifest.rows.push_back({"file", name, std::to_string(table.rows.size())});
  files.emplace_back("manifest.csv", std::move(manifest));
  return files;
}

RoundMessage decode_message(const std::map<std::string, csv::Table>& files) {
  auto mit = files.find("manifest.csv");
  if (mit == files.end())
    throw MalformedPayload("manifest.csv: file is missing");
  const Table& manifest = mit->second;
  const std::size_t e_col = need_column(manifest, "manifest.csv", "entry");
  const std::size_t n_col = need_column(manifest, "manifest.csv", "name");
  const std::size_t v_col = need_column(manifest, "manifest.csv", "value");

  std::map<std::string, std::string> meta;
  for (const auto& row : manifest.rows) {
    if (row[e_col] == "meta") {
      meta[row[n_col]] = v_col < row.size() ? row[v_col] : "";
    } else if (row[e_col] == "file") {
      auto fit = files.find(row[n_col]);
      if (fit == files.end())
        throw MalformedPayload(row[n_col] + ": listed in manifest but missing");
      const auto rows = csv::parse_int(row[v_col]);
      if (!rows || fit->second.rows.size() != static_cast<std::size_t>(*rows))
        throw MalformedPayload(row[n_col] + ": row count differs from manifest");
    }
  }
  auto need_meta = [&](const std::string& k) -> std::string {
    auto it = meta.find(k);
    if (it == meta.end())
      throw MalformedPayload("manifest.csv: missing meta '" + k + "'");
    return it->second;
  };

  RoundMessage msg;
  msg.kind = parse_kind(need_meta("kind"));
  msg.run_id = need_meta("run_id");
  const auto round = csv::parse_int(need_meta("round"));
  if (!round) throw MalformedPayload("manifest.csv: bad round number");
  msg.round = static_cast<int>(*round);

  auto table = [&](const std::string& name) -> const Table* {
    auto it = files.find(name);
    return it == files.end() ? nullptr : &it->second;
  };
  auto need_table = [&](const std::string& name) -> const Table& {
    const Table* t = table(name);
    if (!t) throw MalformedPayload(name + ": file is missing");
    return *t;
  };

  switch (msg.kind) {
    case MessageKind::HandshakeRequest:
      msg.spec = decode_spec(need_table("spec.csv"));
      break;
    case MessageKind::HandshakeReply:
      msg.censoring = decode_censoring(need_table("censoring.csv"));
      msg.covariate_sums = decode_covsums(need_table("covsums.csv"));
      if (const Table* t = table("grid.csv")) msg.grid = decode_grid(*t);
      break;
    case MessageKind::Iterate:
      msg.beta = decode_beta(need_table("beta.csv"));
      msg.final_round = need_meta("final") == "1";
      if (const Table* t = table("grid.csv")) msg.grid = decode_grid(*t);
      break;
    case MessageKind::SummaryReply: {
      const Ties estimator = parse_ties(need_meta("estimator"));
      if (const Table* t = table("scores.csv")) msg.scores = decode_scores(*t);
      if (const Table* t = table("summaries.csv"))
        msg.summaries = decode_summaries(*t);
      if (const Table* t = table("baseline.csv"))
        msg.baseline = decode_baseline(*t, estimator);
      else
        msg.baseline.estimator = estimator;
      break;
    }
    case MessageKind::Finalize:
      msg.beta = decode_beta(need_table("beta.csv"));
      msg.baseline = decode_baseline(need_table("baseline.csv"),
                                     parse_ties(need_meta("estimator")));
      break;
    case MessageKind::DiagnosticsReply:
      msg.bins =
          decode_bins(need_table("bins.csv"), need_meta("suppressed") == "1");
      if (msg.bins.bins.empty()) {
        const auto partner = csv::parse_int(need_meta("partner"));
        if (partner) msg.bins.partner_id = static_cast<int>(*partner);
      }
      break;
    case MessageKind::Stop: {
      msg.status = need_meta("status");
      msg.reason = need_meta("reason");
      const auto cls = csv::parse_int(need_meta("class"));
      msg.error_class = cls && *cls == 4 ? ErrorClass::Numeric
                        : cls && *cls == 5 ? ErrorClass::Config
                                           : ErrorClass::Protocol;
      break;
    }
  }
  return msg;
}

namespace {

std::filesystem::path round_dir(const TransportConfig& cfg,
                                const Direction& dir,
                                const std::string& run_id, int round) {
  return cfg.root / run_id / direction_name(dir) /
         ("round_" + std::to_string(round));
}

std::string mailbox_key(const Direction& dir, const std::string& run_id,
                        int round) {
  return run_id + "/" + direction_name(dir) + "/round_" + std::to_string(round);
}

}  // namespace

void send(const TransportConfig& cfg, const Direction& dir,
          const RoundMessage& msg) {
  if (cfg.mode == TransportConfig::Mode::Loopback) {
    if (!cfg.bus) throw ConfigError("loopback transport has no bus");
    const std::string key = mailbox_key(dir, msg.run_id, msg.round);
    std::lock_guard<std::mutex> lock(cfg.bus->mu);
    if (!cfg.bus->mail.emplace(key, msg).second)
      throw MailboxCollision("mailbox already used: " + key);
    cfg.bus->cv.notify_all();
    return;
  }

  const std::filesystem::path dir_path =
      round_dir(cfg, dir, msg.run_id, msg.round);
  std::error_code ec;
  if (std::filesystem::exists(dir_path))
    throw MailboxCollision("mailbox already used: " + dir_path.string());
  std::filesystem::create_directories(dir_path, ec);
  if (ec)
    throw IoFailure("cannot create " + dir_path.string() + ": " + ec.message());
  for (const auto& [name, table] : encode_message(msg))
    csv::write_table(dir_path / name, table);
  // The zero-byte trigger goes last so a poller never reads a partial round.
  std::ofstream trigger(dir_path / "files_done.ok", std::ios::binary);
  if (!trigger) throw IoFailure("cannot write trigger in " + dir_path.string());
}

RoundMessage await(const TransportConfig& cfg, const Direction& dir,
                   const std::string& run_id, int round) {
  if (cfg.mode == TransportConfig::Mode::Loopback) {
    if (!cfg.bus) throw ConfigError("loopback transport has no bus");
    const std::string key = mailbox_key(dir, run_id, round);
    std::unique_lock<std::mutex> lock(cfg.bus->mu);
    const bool got = cfg.bus->cv.wait_for(
        lock, std::chrono::duration<double>(cfg.wait_time_max),
        [&] { return cfg.bus->mail.count(key) > 0; });
    if (!got) throw Timeout("no message in " + key + " after " +
                            csv::format_double(cfg.wait_time_max) + " s");
    return cfg.bus->mail.at(key);
  }

  const std::filesystem::path dir_path = round_dir(cfg, dir, run_id, round);
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(cfg.wait_time_max));
  while (!std::filesystem::exists(dir_path / "files_done.ok")) {
    if (std::chrono::steady_clock::now() >= deadline)
      throw Timeout("trigger file never appeared in " + dir_path.string());
    std::this_thread::sleep_for(std::chrono::duration<double>(cfg.wait_time_min));
  }
  std::map<std::string, csv::Table> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir_path)) {
    if (entry.path().extension() == ".csv")
      files[entry.path().filename().string()] = csv::read_table(entry.path());
  }
  return decode_message(files);
}

}  // namespace distcox
