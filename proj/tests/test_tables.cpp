#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "distcox/error.hpp"
#include "distcox/tables.hpp"
#include "run_helpers.hpp"
#include "testutil.hpp"

using namespace distcox;
using namespace testutil;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

RunOutputs fixture_run(const std::string& run_id) {
  ModelSpec spec = rossi_spec();
  spec.run_id = run_id;
  const AnalysisDataset ds = load_rossi();
  return run_pooled(ds, spec);
}

}  // namespace

TEST_CASE("bundle is complete, prefixed, and byte-stable across rewrites") {
  TempDir tmp("tab1");
  const RunOutputs out = fixture_run("dcx");
  const auto files = write_bundle(out, tmp.path / "msoc");
  const char* expected[] = {
      "modelinfo",   "cens_sum",       "convrg_status", "iter_parms_hist",
      "modelfit",    "glob_null_chisq", "p_est",        "model_coeff",
      "cov_est",     "baseln_hazard",  "baseln_survival", "resid_sum",
      "resid_sum_by_pct"};
  REQUIRE(files.size() == 13);
  for (std::size_t i = 0; i < files.size(); ++i)
    CHECK(files[i].filename().string() ==
          "dcx_" + std::string(expected[i]) + ".csv");

  std::vector<std::string> first;
  for (const auto& f : files) first.push_back(slurp(f));
  const auto files2 = write_bundle(out, tmp.path / "msoc2");
  for (std::size_t i = 0; i < files2.size(); ++i)
    CHECK(first[i] == slurp(files2[i]));
}

TEST_CASE("p_est matches the published row at printed precision") {
  TempDir tmp("tab2");
  const RunOutputs out = fixture_run("dc1");
  write_bundle(out, tmp.path / "msoc");
  const csv::Table t =
      csv::read_table(tmp.path / "msoc" / "dc1_p_est.csv");
  REQUIRE(t.rows.size() == 3);
  const auto est = csv::parse_double(t.rows[0][t.column_index("Estimate")]);
  const auto se = csv::parse_double(t.rows[0][t.column_index("StdErr")]);
  const auto hr = csv::parse_double(t.rows[0][t.column_index("HazardRatio")]);
  CHECK(t.rows[0][t.column_index("Parameter")] == "fin");
  CHECK(std::fabs(*est - -0.346444) < 5e-7);
  CHECK(std::fabs(*se - 0.190236) < 5e-7);
  CHECK(std::fabs(*hr - 0.707198) < 5e-7);
  // Row counts match their sources.
  const csv::Table cov = csv::read_table(tmp.path / "msoc" / "dc1_cov_est.csv");
  CHECK(cov.rows.size() == 3);
  const csv::Table hist =
      csv::read_table(tmp.path / "msoc" / "dc1_iter_parms_hist.csv");
  CHECK(hist.rows.size() == out.fit.history.size());
}

TEST_CASE("stratified censoring table carries a Total row") {
  TempDir tmp("tab3");
  const auto shards = write_shards(test_data_dir() / "rossi.csv",
                                   tmp.path / "shards", {134, 149, 149}, 9);
  ModelSpec spec = rossi_spec();
  spec.run_id = "dc2";
  spec.partner_ids = {1, 2, 3};
  spec.strata_vars = {"dp_cd"};
  spec.ties = Ties::Efron;
  const RunOutputs out = run_distributed(spec, shards, loopback_transport(20.0));
  write_bundle(out, tmp.path / "msoc");
  const csv::Table t = csv::read_table(tmp.path / "msoc" / "dc2_cens_sum.csv");
  REQUIRE(t.rows.size() == 4);
  CHECK(t.columns[1] == "dp_cd");
  CHECK(t.rows[3][0] == "Total");
  CHECK(t.rows[3][t.column_index("Total")] == "432");
  CHECK(t.rows[3][t.column_index("Event")] == "114");
  CHECK(t.rows[3][t.column_index("Censored")] == "318");
}

TEST_CASE("non-converged runs keep bookkeeping tables and drop estimates") {
  TempDir tmp("tab4");
  ModelSpec spec = rossi_spec();
  spec.run_id = "dcnc";
  spec.max_iter = 2;
  const RunOutputs out = run_pooled(load_rossi(), spec);
  REQUIRE_FALSE(out.fit.converged);
  const auto files = write_bundle(out, tmp.path / "msoc");
  CHECK(files.size() == 4);
  CHECK_FALSE(std::filesystem::exists(tmp.path / "msoc" / "dcnc_p_est.csv"));
  const csv::Table t =
      csv::read_table(tmp.path / "msoc" / "dcnc_convrg_status.csv");
  CHECK(t.rows[0][0] == "NotConverged");

  const auto report = render_report(tmp.path / "msoc", "dcnc", tmp.path / "msoc");
  const std::string text = slurp(report);
  CHECK(text.find("did not converge") != std::string::npos);
}

TEST_CASE("report renders the published numbers at table precision") {
  TempDir tmp("tab5");
  const RunOutputs out = fixture_run("dc1");
  write_bundle(out, tmp.path / "msoc");
  const auto path = render_report(tmp.path / "msoc", "dc1", tmp.path / "report");
  const std::string text = slurp(path);
  CHECK(text.find("1322.465221") != std::string::npos);
  CHECK(text.find("1328.465221") != std::string::npos);
  CHECK(text.find("1336.673816") != std::string::npos);
  CHECK(text.find("-0.346444") != std::string::npos);
  CHECK(text.find("0.0686") != std::string::npos);
  CHECK(text.find("73.61") != std::string::npos);
  CHECK(text.find("0.4870936") != std::string::npos);
  CHECK(std::filesystem::exists(tmp.path / "report" / "dc1_resid_plot.csv"));
  CHECK(std::filesystem::exists(tmp.path / "report" / "dc1_resid_plot.svg"));
}

TEST_CASE("three partners with default groups give thirty plot points") {
  TempDir tmp("tab6");
  const auto shards = write_shards(test_data_dir() / "rossi.csv",
                                   tmp.path / "shards", {134, 149, 149}, 10);
  ModelSpec spec = rossi_spec();
  spec.run_id = "dc2";
  spec.partner_ids = {1, 2, 3};
  spec.strata_vars = {"dp_cd"};
  spec.ties = Ties::Efron;
  const RunOutputs out = run_distributed(spec, shards, loopback_transport(20.0));
  write_bundle(out, tmp.path / "msoc");
  render_report(tmp.path / "msoc", "dc2", tmp.path / "msoc");
  const csv::Table plot =
      csv::read_table(tmp.path / "msoc" / "dc2_resid_plot.csv");
  CHECK(plot.rows.size() == 30);  // 3 partners x 10 decile bins
}

TEST_CASE("report on a missing table names it") {
  TempDir tmp("tab7");
  std::filesystem::create_directories(tmp.path / "msoc");
  try {
    render_report(tmp.path / "msoc", "nope", tmp.path / "msoc");
    FAIL("expected IoFailure");
  } catch (const IoFailure& e) {
    CHECK(std::string(e.what()).find("nope_modelinfo") != std::string::npos);
  }
}
