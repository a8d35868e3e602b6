#include "distcox/model.hpp"

#include <algorithm>
#include <cctype>

#include "distcox/csv.hpp"
#include "distcox/error.hpp"

namespace distcox {

std::string stratum_label(const StratumKey& key) {
  std::string out;
  for (std::size_t i = 0; i < key.values.size(); ++i) {
    if (i) out += '|';
    out += csv::format_double(key.values[i]);
  }
  return out;
}

StratumKey parse_stratum_label(const std::string& s) {
  StratumKey key;
  if (s.empty()) return key;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find('|', start);
    const std::string part =
        pos == std::string::npos ? s.substr(start) : s.substr(start, pos - start);
    auto v = csv::parse_double(part);
    if (!v) throw MalformedPayload("bad stratum label: " + s);
    key.values.push_back(*v);
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return key;
}

std::size_t spec_p(const ModelSpec& spec) { return spec.independent_vars.size(); }

void validate_spec(const ModelSpec& spec) {
  if (spec.independent_vars.empty())
    throw ConfigError("independent_vars must name at least one covariate");
  if (spec.dependent_var.empty()) throw ConfigError("dependent_vars is required");
  if (spec.censoring_var.empty()) throw ConfigError("censoring_var is required");
  for (const auto& v : spec.independent_vars) {
    if (v == spec.dependent_var || v == spec.censoring_var)
      throw ConfigError("independent variable '" + v +
                        "' collides with the dependent or censoring variable");
  }
  if (!(spec.xconv > 0)) throw ConfigError("xconv must be positive");
  if (spec.max_iter < 1) throw ConfigError("max_iter_nb must be positive");
  if (!(spec.alpha > 0 && spec.alpha < 1))
    throw ConfigError("alpha must lie in (0, 1)");
  if (spec.groups < 1) throw ConfigError("groups must be positive");
  if (spec.min_count_per_grp_glob < 1)
    throw ConfigError("min_count_per_grp_glob must be positive");
  if (spec.max_numb_of_grp < 1)
    throw ConfigError("max_numb_of_grp must be positive");
  if (!spec.initial_estimates.empty() &&
      spec.initial_estimates.size() != spec_p(spec))
    throw ConfigError("initial estimates length does not match covariate count");
}

ComputationPath select_computation_path(const ModelSpec& spec) {
  const bool by_partner =
      std::find(spec.strata_vars.begin(), spec.strata_vars.end(), kPartnerVar) !=
      spec.strata_vars.end();
  return by_partner ? ComputationPath::SiteAggregated
                    : ComputationPath::CenterAggregated;
}

const char* ties_name(Ties t) {
  return t == Ties::Breslow ? "BRESLOW" : "EFRON";
}

Ties parse_ties(const std::string& name) {
  std::string up;
  for (char c : name) up += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "BRESLOW") return Ties::Breslow;
  if (up == "EFRON") return Ties::Efron;
  throw ConfigError("ties must be BRESLOW or EFRON, got '" + name + "'");
}

}  // namespace distcox
