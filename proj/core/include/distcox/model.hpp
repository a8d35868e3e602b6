#pragma once

#include <compare>
#include <string>
#include <vector>

#include "distcox/linalg.hpp"

namespace distcox {

// Name of the data-partner identifier variable. Stratifying on it switches
// the run to the site-aggregated computation path.
inline constexpr const char* kPartnerVar = "dp_cd";

enum class Ties { Breslow, Efron };

// SiteAggregated: every stratum is local to one partner, so partners transmit
// per-stratum log-likelihood/gradient/Hessian contributions whose size does
// not depend on the number of event times. CenterAggregated: partners
// transmit per-(stratum, event time) risk-set summaries and the center
// assembles the scores.
enum class ComputationPath { SiteAggregated, CenterAggregated };

// Values of the stratification variables identifying one stratum. The empty
// tuple is the single stratum of a non-stratified model. Ordering is
// lexicographic and defines the stratum index m.
struct StratumKey {
  std::vector<double> values;
  friend auto operator<=>(const StratumKey&, const StratumKey&) = default;
};

std::string stratum_label(const StratumKey& key);       // values joined by '|'
StratumKey parse_stratum_label(const std::string& s);   // inverse

struct SubjectRecord {
  double weight = 1.0;    // observation weight, >= 0
  long long freq = 1;     // frequency: the row stands for `freq` identical subjects
  double time = 0.0;      // follow-up time, > 0 and finite
  int event = 0;          // 1 = event observed, 0 = censored
  Vector covariates;      // length p, finite
  StratumKey stratum;
  int partner_id = 0;
};

struct AnalysisDataset {
  std::vector<SubjectRecord> records;
  std::vector<std::string> covariate_names;
  int partner_id = 0;
  std::size_t dropped_rows = 0;  // rows excluded at ingestion (missing/non-numeric)

  std::size_t p() const { return covariate_names.size(); }
};

// Regression request. Field names and defaults follow the analysis macro's
// parameter sheet so a config file maps onto this 1:1.
struct ModelSpec {
  std::string run_id = "run";
  std::string dataset_name;                 // reg_ds_in, echoed into MODELINFO
  std::vector<int> partner_ids;

  std::string dependent_var;
  std::string censoring_var;
  double censoring_level = 0.0;
  std::vector<std::string> independent_vars;
  std::vector<std::string> strata_vars;
  Ties ties = Ties::Breslow;
  std::string weight_var;                   // empty = unit weights
  std::string freq_var;                     // empty = frequency 1

  double xconv = 1e-4;
  int max_iter = 20;
  double alpha = 0.05;
  int groups = 10;
  int min_count_per_grp_glob = 6;
  int max_numb_of_grp = 10000;
  Vector initial_estimates;                 // empty = all zeros

  std::vector<double> event_time_set;       // optional pre-shared event times
};

std::size_t spec_p(const ModelSpec& spec);

// Throws ConfigError when the request is internally inconsistent.
void validate_spec(const ModelSpec& spec);

// SiteAggregated iff dp_cd is among the stratification variables. Depends on
// the spec only, never on data.
ComputationPath select_computation_path(const ModelSpec& spec);

const char* ties_name(Ties t);
Ties parse_ties(const std::string& name);  // throws ConfigError

}  // namespace distcox
