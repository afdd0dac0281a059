#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpodyn/schemes.hpp"
#include "mpodyn/xxz.hpp"

namespace mpodyn {

/// Invalid run configuration; `field` names the offending entry.
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string field_, const std::string& message)
      : std::runtime_error(field_ + ": " + message), field(std::move(field_)) {}
};

struct OperatorSpec {
  ObservableKind kind = ObservableKind::SpLocal;
  std::optional<int> site;
};

struct TrotterCheckConfig {
  std::vector<double> taus{0.125, 0.0625, 0.03125};
  double total_time = 1.0;
  double slope_tolerance = 0.25;  // relative deviation from the nominal order
};

/// Fully resolved run configuration (file plus command-line overrides).
struct RunConfig {
  XXZParams model;
  SchemeSpec scheme;
  std::vector<std::string> sweep_schemes;  // sweep only; defaults to {scheme}
  std::vector<double> betas;
  double tmax = 1.0;
  EvolutionSettings evolution;  // order, dbeta, dt, eps_beta, eps_t, max_rank
  OperatorSpec op_a;
  OperatorSpec op_b;
  std::vector<long long> budgets{1000000};
  double oracle_max_dev = 1e-5;
  TrotterCheckConfig trotter_check;
  int checkpoint_every = 0;
  unsigned seed = 0;
  std::string output_dir = "out";

  MPO build_operator(const OperatorSpec& spec) const;
};

/// Parses and validates a configuration JSON document.
RunConfig parse_config(const nlohmann::json& doc);

/// Applies a `key.path=value` override; the value is parsed as JSON when
/// possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Resolved configuration back in canonical JSON form (manifest content).
nlohmann::json to_json(const RunConfig& cfg);

/// Fingerprint used to match checkpoints against the producing config.
std::string config_tag(const RunConfig& cfg);

}  // namespace mpodyn
