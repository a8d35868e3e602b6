// Operator entry points for distributed Cox regression: the analysis center,
// a data-partner node, a pooled-data fit, dataset partitioning for demos,
// and report rendering.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "distcox/error.hpp"
#include "distcox/ingest.hpp"
#include "distcox/orchestrate.hpp"
#include "distcox/partition.hpp"
#include "distcox/tables.hpp"

namespace fs = std::filesystem;
using namespace distcox;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNotConverged = 2;

struct SpecOptions {
  std::string run_id = "run";
  std::string dp_cd_list;
  std::string reg_ds_in;
  std::string dependent_vars;
  std::string independent_vars;
  std::string censoring_var;
  double censoring_lev = 0.0;
  std::string strata_vars;
  std::string ties = "BRESLOW";
  std::string freq, weight;
  double xconv = 1e-4;
  int max_iter_nb = 20;
  double alpha = 0.05;
  int groups = 10;
  int min_count_per_grp_glob = 6;
  int max_numb_of_grp = 10000;
  std::string tbl_initial_est;
  std::string tbl_events_time_set;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

void add_spec_options(CLI::App* cmd, SpecOptions& o, bool center) {
  cmd->add_option("--RunID", o.run_id, "Run identifier; prefixes output tables");
  if (center)
    cmd->add_option("--dp_cd_list", o.dp_cd_list,
                    "Participating data partners, space separated: \"1 2 3\"");
  cmd->add_option("--reg_ds_in", o.reg_ds_in, "Input dataset name (for reports)");
  cmd->add_option("--dependent_vars", o.dependent_vars,
                  "Follow-up time variable");
  cmd->add_option("--independent_vars", o.independent_vars,
                  "Covariates, space separated: \"fin age prio\"");
  cmd->add_option("--censoring_var", o.censoring_var, "Censoring variable");
  cmd->add_option("--censoring_lev", o.censoring_lev,
                  "Value meaning censored (default 0)");
  cmd->add_option("--strata_vars", o.strata_vars,
                  "Stratification variables, space separated");
  cmd->add_option("--ties", o.ties, "BRESLOW or EFRON (default BRESLOW)");
  cmd->add_option("--freq", o.freq, "Frequency variable");
  cmd->add_option("--weight", o.weight, "Weight variable");
  cmd->add_option("--xconv", o.xconv, "Relative convergence criterion (1e-4)");
  cmd->add_option("--max_iter_nb", o.max_iter_nb, "Maximum iterations (20)");
  cmd->add_option("--alpha", o.alpha, "Significance level (0.05)");
  cmd->add_option("--groups", o.groups, "Residual summary bins (10)");
  cmd->add_option("--min_count_per_grp_glob", o.min_count_per_grp_glob,
                  "Minimum records per residual bin (6)");
  cmd->add_option("--max_numb_of_grp", o.max_numb_of_grp,
                  "Upper bound on residual bins (10000)");
  cmd->add_option("--tbl_initial_est", o.tbl_initial_est,
                  "CSV with one row of initial estimates per covariate");
  cmd->add_option("--tbl_events_time_set", o.tbl_events_time_set,
                  "CSV with the shared event times (column named like the "
                  "dependent variable)");
}

ModelSpec build_spec(const SpecOptions& o) {
  ModelSpec spec;
  spec.run_id = o.run_id;
  spec.dataset_name = o.reg_ds_in;
  for (const auto& tok : split_list(o.dp_cd_list))
    spec.partner_ids.push_back(std::stoi(tok));
  spec.dependent_var = o.dependent_vars;
  spec.censoring_var = o.censoring_var;
  spec.censoring_level = o.censoring_lev;
  spec.independent_vars = split_list(o.independent_vars);
  spec.strata_vars = split_list(o.strata_vars);
  spec.ties = parse_ties(o.ties);
  spec.weight_var = o.weight;
  spec.freq_var = o.freq;
  spec.xconv = o.xconv;
  spec.max_iter = o.max_iter_nb;
  spec.alpha = o.alpha;
  spec.groups = o.groups;
  spec.min_count_per_grp_glob = o.min_count_per_grp_glob;
  spec.max_numb_of_grp = o.max_numb_of_grp;

  if (!o.tbl_initial_est.empty()) {
    const csv::Table t = csv::read_table(o.tbl_initial_est);
    if (t.rows.empty())
      throw ConfigError("initial-estimates table has no rows: " +
                        o.tbl_initial_est);
    for (const auto& name : spec.independent_vars) {
      const auto v = csv::parse_double(t.rows[0][t.column_index(name)]);
      if (!v)
        throw ConfigError("initial-estimates column '" + name +
                          "' is not numeric");
      spec.initial_estimates.push_back(*v);
    }
  }
  if (!o.tbl_events_time_set.empty()) {
    const csv::Table t = csv::read_table(o.tbl_events_time_set);
    const std::size_t col = t.column_index(spec.dependent_var);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto v = csv::parse_double(t.rows[r][col]);
      if (!v)
        throw ConfigError("event-time-set has a non-numeric value in row " +
                          std::to_string(r + 2));
      spec.event_time_set.push_back(*v);
    }
  }
  validate_spec(spec);
  return spec;
}

TransportConfig directory_transport(const std::string& root, double wait_min,
                                    double wait_max) {
  TransportConfig cfg;
  cfg.mode = TransportConfig::Mode::Directory;
  cfg.root = root;
  cfg.wait_time_min = wait_min;
  cfg.wait_time_max = wait_max;
  return cfg;
}

int finish_run(const RunOutputs& out, const fs::path& out_dir) {
  const fs::path msoc = out_dir / "msoc";
  write_bundle(out, msoc);
  std::cout << "output tables written to " << msoc.string() << "\n";
  if (!out.fit.converged) {
    std::cerr << "run did not converge within " << out.spec.max_iter
              << " iterations\n";
    return kExitNotConverged;
  }
  render_report(msoc, out.spec.run_id, msoc);
  std::cout << "report written to "
            << (msoc / (out.spec.run_id + "_report.txt")).string() << "\n";
  return kExitOk;
}

std::vector<std::size_t> parse_sizes(const std::string& csv_sizes) {
  std::vector<std::size_t> sizes;
  std::string tok;
  std::istringstream in(csv_sizes);
  while (std::getline(in, tok, ','))
    if (!tok.empty()) sizes.push_back(static_cast<std::size_t>(std::stoull(tok)));
  return sizes;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

// Expands `--config FILE` into `--key value` tokens placed right after the
// subcommand name; explicit command-line flags override them (options take
// the last occurrence). Unknown keys surface as unrecognized options.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  for (std::size_t i = 0; i < args.size();) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
      args.erase(args.begin() + i, args.begin() + i + 2);
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + i);
    } else {
      ++i;
    }
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config file: " + config_path);
  std::vector<std::string> expanded;
  std::string line;
  while (std::getline(in, line)) {
    line = strip(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line is not key=value: " + line);
    const std::string key = strip(line.substr(0, eq));
    std::string value = strip(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    expanded.push_back("--" + key);
    expanded.push_back(value);
  }
  if (args.empty()) return expanded;
  std::vector<std::string> out;
  out.push_back(args[0]);  // subcommand name
  out.insert(out.end(), expanded.begin(), expanded.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

void take_last_options(CLI::App* cmd) {
  for (CLI::Option* opt : cmd->get_options())
    if (opt->get_expected_max() == 1)
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  static std::string config_sink;  // consumed before parsing; help text only
  cmd->add_option("--config", config_sink,
                  "Config file with key=value lines (flags override it)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "distcox: privacy-protecting distributed Cox proportional-hazards "
      "regression.\nExit codes: 0 converged, 2 not converged, 3 protocol "
      "error, 4 numeric error, 5 configuration error."};
  app.require_subcommand(1);

  SpecOptions spec_opts;
  std::string root = "dra_exchange";
  std::string out_dir = ".";
  double wait_min = 3.0, wait_max = 7200.0;

  CLI::App* center = app.add_subcommand(
      "center", "Run the analysis center over a directory transport");
  add_spec_options(center, spec_opts, true);
  center->add_option("--root", root, "Exchange directory shared with partners");
  center->add_option("--out", out_dir, "Directory receiving msoc/ tables");
  center->add_option("--wait_time_min", wait_min,
                     "Seconds between trigger-file checks (3)");
  center->add_option("--wait_time_max", wait_max,
                     "Maximum seconds to wait per message (7200)");

  CLI::App* partner =
      app.add_subcommand("partner", "Run one data-partner node");
  std::string partner_run_id = "run", data_path;
  int dp_cd = 1;
  int min_count_override = -1;
  partner->add_option("--RunID", partner_run_id, "Run identifier")->required();
  partner->add_option("--dp_cd", dp_cd, "This partner's identifier")->required();
  partner->add_option("--data", data_path, "Local analysis dataset (CSV)")
      ->required();
  partner->add_option("--min_count_per_grp", min_count_override,
                      "Partner-level minimum records per residual bin "
                      "(overrides the center's global value)");
  partner->add_option("--root", root, "Exchange directory shared with center");
  partner->add_option("--wait_time_min", wait_min,
                      "Seconds between trigger-file checks (3)");
  partner->add_option("--wait_time_max", wait_max,
                      "Maximum seconds to wait per message (7200)");

  CLI::App* pooled = app.add_subcommand(
      "pooled", "Fit the pooled individual-level data with the same engine");
  std::string pooled_data;
  add_spec_options(pooled, spec_opts, false);
  pooled->add_option("--data", pooled_data, "Pooled dataset (CSV)")->required();
  pooled->add_option("--out", out_dir, "Directory receiving msoc/ tables");

  CLI::App* partition = app.add_subcommand(
      "partition", "Split a pooled file into per-partner shards");
  std::string part_data, part_sizes;
  std::uint64_t seed = kDefaultPartitionSeed;
  std::vector<std::string> part_out;
  partition->add_option("--data", part_data, "Pooled dataset (CSV)")->required();
  partition->add_option("--sizes", part_sizes, "Shard sizes, e.g. 134,149,149")
      ->required();
  partition->add_option("--seed", seed, "Shuffle seed");
  partition->add_option("--out", part_out, "One output path per shard")
      ->required()
      ->expected(-1);

  CLI::App* report =
      app.add_subcommand("report", "Render a report from a written bundle");
  std::string report_msoc, report_run_id = "run", report_dest;
  report->add_option("--msoc", report_msoc, "Bundle directory")->required();
  report->add_option("--RunID", report_run_id, "Run identifier")->required();
  report->add_option("--out", report_dest,
                     "Destination directory (default: the bundle directory)");

  CLI::App* demo = app.add_subcommand(
      "demo", "Partition a pooled file and run center plus partners locally");
  std::string demo_data, demo_sizes = "134,149,149";
  add_spec_options(demo, spec_opts, true);
  demo->add_option("--data", demo_data, "Pooled dataset (CSV)")->required();
  demo->add_option("--sizes", demo_sizes, "Shard sizes");
  demo->add_option("--seed", seed, "Partition seed");
  demo->add_option("--root", root, "Exchange directory");
  demo->add_option("--out", out_dir, "Directory receiving msoc/ tables");

  for (CLI::App* sub : {center, partner, pooled, partition, report, demo})
    take_last_options(sub);

  try {
    const std::vector<std::string> args = expand_config(argc, argv);
    std::vector<const char*> argv2;
    argv2.push_back(argv[0]);
    for (const auto& a : args) argv2.push_back(a.c_str());
    app.parse(static_cast<int>(argv2.size()), argv2.data());

    if (center->parsed()) {
      const ModelSpec spec = build_spec(spec_opts);
      const RunOutputs out = orchestrate_center(
          spec, directory_transport(root, wait_min, wait_max));
      return finish_run(out, out_dir);
    }

    if (partner->parsed()) {
      std::optional<int> override_count;
      if (min_count_override > 0) override_count = min_count_override;
      orchestrate_partner(data_path, dp_cd, override_count, partner_run_id,
                          directory_transport(root, wait_min, wait_max));
      return kExitOk;
    }

    if (pooled->parsed()) {
      const ModelSpec spec = build_spec(spec_opts);
      const AnalysisDataset ds = ingest_dataset(pooled_data, spec, 0);
      return finish_run(run_pooled(ds, spec), out_dir);
    }

    if (partition->parsed()) {
      std::vector<fs::path> outs(part_out.begin(), part_out.end());
      partition_csv(part_data, parse_sizes(part_sizes), seed, outs);
      std::cout << "wrote " << outs.size() << " shards\n";
      return kExitOk;
    }

    if (report->parsed()) {
      const fs::path dest = report_dest.empty() ? fs::path(report_msoc)
                                                : fs::path(report_dest);
      const fs::path path = render_report(report_msoc, report_run_id, dest);
      std::cout << "report written to " << path.string() << "\n";
      return kExitOk;
    }

    if (demo->parsed()) {
      const ModelSpec spec = build_spec(spec_opts);
      if (spec.partner_ids.empty())
        throw ConfigError("demo needs --dp_cd_list");
      const auto sizes = parse_sizes(demo_sizes);
      if (sizes.size() != spec.partner_ids.size())
        throw ConfigError("--sizes must list one size per partner");
      const fs::path shard_dir = fs::path(root) / "shards";
      fs::create_directories(shard_dir);
      std::vector<fs::path> shard_paths;
      for (int id : spec.partner_ids)
        shard_paths.push_back(shard_dir /
                              ("shard_dp" + std::to_string(id) + ".csv"));
      partition_csv(demo_data, sizes, seed, shard_paths);

      const TransportConfig cfg = directory_transport(root, 0.01, 60.0);
      std::vector<std::thread> nodes;
      for (std::size_t k = 0; k < spec.partner_ids.size(); ++k) {
        const int id = spec.partner_ids[k];
        const fs::path path = shard_paths[k];
        nodes.emplace_back([&cfg, &spec, id, path] {
          try {
            orchestrate_partner(path, id, std::nullopt, spec.run_id, cfg);
          } catch (const std::exception& e) {
            std::cerr << "partner " << id << ": " << e.what() << "\n";
          }
        });
      }
      int rc = 1;
      try {
        const RunOutputs out = orchestrate_center(spec, cfg);
        rc = finish_run(out, out_dir);
      } catch (...) {
        for (auto& t : nodes) t.join();
        throw;
      }
      for (auto& t : nodes) t.join();
      return rc;
    }
    return 1;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorClass::Config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.error_class());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
