#include "mpodyn/config.hpp"

#include <algorithm>
#include <functional>

namespace mpodyn {

namespace {

using nlohmann::json;

const json* find(const json& doc, const char* key) {
  auto it = doc.find(key);
  return it == doc.end() ? nullptr : &*it;
}

double get_number(const json& doc, const std::string& field, double fallback,
                  bool required = false) {
  auto it = doc.find(field);
  if (it == doc.end()) {
    if (required) throw ConfigError(field, "missing required field");
    return fallback;
  }
  if (!it->is_number()) throw ConfigError(field, "expected a number");
  return it->get<double>();
}

ObservableKind parse_kind(const std::string& field, const std::string& kind) {
  if (kind == "sp_local") return ObservableKind::SpLocal;
  if (kind == "sm_local") return ObservableKind::SmLocal;
  if (kind == "sz_local") return ObservableKind::SzLocal;
  if (kind == "sp_k0") return ObservableKind::SpK0;
  throw ConfigError(field, "unknown operator kind '" + kind +
                               "' (expected sp_local, sm_local, sz_local, sp_k0)");
}

OperatorSpec parse_operator(const json& doc, const std::string& field) {
  const json* node = find(doc, field == "operators.A" ? "A" : "B");
  if (!node) throw ConfigError(field, "missing operator specification");
  OperatorSpec spec;
  if (!node->contains("kind")) throw ConfigError(field + ".kind", "missing field");
  spec.kind = parse_kind(field + ".kind", node->at("kind").get<std::string>());
  if (node->contains("site")) spec.site = node->at("site").get<int>();
  if (spec.kind != ObservableKind::SpK0 && !spec.site)
    throw ConfigError(field + ".site", "local operator kinds require a site index");
  return spec;
}

SchemeSpec parse_scheme(const json& node) {
  const std::string preset =
      node.contains("preset") ? node.at("preset").get<std::string>() : "custom";
  if (preset == "A") return SchemeSpec::scheme_a();
  if (preset == "B") return SchemeSpec::scheme_b();
  if (preset == "C") return SchemeSpec::scheme_c();
  if (preset != "custom")
    throw ConfigError("scheme.preset",
                      "unknown preset '" + preset + "' (expected A, B, C, custom)");
  if (!node.contains("beta_prime"))
    throw ConfigError("scheme.beta_prime", "custom scheme requires beta_prime");
  return SchemeSpec::custom(node.at("beta_prime").get<double>(),
                            node.value("t_prime", 0.0), node.value("t_dprime", 0.0));
}

}  // namespace

MPO RunConfig::build_operator(const OperatorSpec& spec) const {
  return observable(model, spec.kind, spec.site);
}

RunConfig parse_config(const json& doc) {
  RunConfig cfg;

  const json* model = find(doc, "model");
  if (!model) throw ConfigError("model", "missing section");
  cfg.model.L = static_cast<int>(get_number(*model, "L", 0, true));
  if (cfg.model.L < 2) throw ConfigError("model.L", "need at least two sites");
  cfg.model.jz = get_number(*model, "Jz", 1.0);
  cfg.model.h = get_number(*model, "h", 0.0);

  if (const json* scheme = find(doc, "scheme"))
    cfg.scheme = parse_scheme(*scheme);
  else
    cfg.scheme = SchemeSpec::scheme_c();

  if (const json* schemes = find(doc, "schemes")) {
    if (!schemes->is_array() || schemes->empty())
      throw ConfigError("schemes", "expected a non-empty array of scheme names");
    for (const json& s : *schemes) {
      const std::string name = s.get<std::string>();
      if (name != "A" && name != "B" && name != "C")
        throw ConfigError("schemes", "sweep schemes must be presets A, B, or C");
      cfg.sweep_schemes.push_back(name);
    }
  } else {
    cfg.sweep_schemes.push_back(cfg.scheme.name());
  }

  const json* beta = find(doc, "beta");
  if (!beta) throw ConfigError("beta", "missing field");
  if (beta->is_number()) {
    cfg.betas.push_back(beta->get<double>());
  } else if (beta->is_array() && !beta->empty()) {
    for (const json& b : *beta) cfg.betas.push_back(b.get<double>());
  } else {
    throw ConfigError("beta", "expected a number or non-empty array");
  }
  for (double b : cfg.betas)
    if (b < 0.0) throw ConfigError("beta", "inverse temperatures must be >= 0");

  const json* time = find(doc, "time");
  if (!time) throw ConfigError("time", "missing section");
  cfg.tmax = get_number(*time, "tmax", 0, true);
  cfg.evolution.dt = get_number(*time, "dt", 0, true);
  if (cfg.evolution.dt <= 0.0) throw ConfigError("time.dt", "must be positive");
  if (cfg.tmax < 0.0) throw ConfigError("time.tmax", "must be >= 0");

  if (const json* trotter = find(doc, "trotter")) {
    cfg.evolution.order = static_cast<int>(get_number(*trotter, "order", 4));
    cfg.evolution.dbeta = get_number(*trotter, "dbeta", 0.125);
  }
  if (cfg.evolution.order != 2 && cfg.evolution.order != 4)
    throw ConfigError("trotter.order", "supported orders are 2 and 4");
  if (cfg.evolution.dbeta <= 0.0) throw ConfigError("trotter.dbeta", "must be positive");

  if (const json* tr = find(doc, "truncation")) {
    cfg.evolution.eps_beta = get_number(*tr, "eps_beta", 1e-12);
    cfg.evolution.eps_t = get_number(*tr, "eps_t", 1e-10);
    const int cap = static_cast<int>(get_number(*tr, "max_rank", 0));
    if (cap < 0) throw ConfigError("truncation.max_rank", "must be >= 0 (0 = uncapped)");
    if (cap > 0) cfg.evolution.max_rank = cap;
  }
  if (cfg.evolution.eps_beta <= 0.0 || cfg.evolution.eps_beta >= 1.0)
    throw ConfigError("truncation.eps_beta", "must lie in (0, 1)");
  if (cfg.evolution.eps_t <= 0.0 || cfg.evolution.eps_t >= 1.0)
    throw ConfigError("truncation.eps_t", "must lie in (0, 1)");

  const json* ops = find(doc, "operators");
  if (!ops) throw ConfigError("operators", "missing section");
  cfg.op_a = parse_operator(*ops, "operators.A");
  cfg.op_b = parse_operator(*ops, "operators.B");
  for (const auto* spec : {&cfg.op_a, &cfg.op_b})
    if (spec->site && (*spec->site < 0 || *spec->site >= cfg.model.L))
      throw ConfigError("operators.site", "site index out of range");

  if (const json* budgets = find(doc, "budgets")) {
    cfg.budgets.clear();
    for (const json& b : *budgets) cfg.budgets.push_back(b.get<long long>());
    if (cfg.budgets.empty()) throw ConfigError("budgets", "must not be empty");
  }

  if (const json* oracle = find(doc, "oracle"))
    cfg.oracle_max_dev = get_number(*oracle, "max_dev", 1e-5);

  if (const json* tc = find(doc, "trotter_check")) {
    if (tc->contains("taus"))
      cfg.trotter_check.taus = tc->at("taus").get<std::vector<double>>();
    cfg.trotter_check.total_time = get_number(*tc, "total_time", 1.0);
    cfg.trotter_check.slope_tolerance = get_number(*tc, "slope_tol", 0.25);
  }

  cfg.checkpoint_every = static_cast<int>(get_number(doc, "checkpoint_every", 0));
  if (cfg.checkpoint_every < 0)
    throw ConfigError("checkpoint_every", "must be >= 0");
  cfg.seed = static_cast<unsigned>(get_number(doc, "seed", 0));

  if (const json* output = find(doc, "output")) {
    if (output->contains("dir")) cfg.output_dir = output->at("dir").get<std::string>();
  }

  return cfg;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set", "expected key.path=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("--set", "empty key segment in '" + path + "'");
    if (dot == std::string::npos) {
      json value;
      try {
        value = json::parse(raw);
      } catch (const json::parse_error&) {
        value = raw;  // plain string
      }
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

json to_json(const RunConfig& cfg) {
  json doc;
  doc["model"] = {{"L", cfg.model.L}, {"Jz", cfg.model.jz}, {"h", cfg.model.h}};
  json scheme{{"preset", cfg.scheme.name()}};
  if (cfg.scheme.preset == SchemeSpec::Preset::Custom) {
    scheme["beta_prime"] = cfg.scheme.beta_prime;
    scheme["t_prime"] = cfg.scheme.t_prime;
    scheme["t_dprime"] = cfg.scheme.t_dprime;
  }
  doc["scheme"] = scheme;
  doc["schemes"] = cfg.sweep_schemes;
  doc["beta"] = cfg.betas;
  doc["time"] = {{"tmax", cfg.tmax}, {"dt", cfg.evolution.dt}};
  doc["trotter"] = {{"order", cfg.evolution.order}, {"dbeta", cfg.evolution.dbeta}};
  doc["truncation"] = {{"eps_beta", cfg.evolution.eps_beta},
                       {"eps_t", cfg.evolution.eps_t},
                       {"max_rank", cfg.evolution.max_rank.value_or(0)}};
  auto op_json = [](const OperatorSpec& spec) {
    json j;
    switch (spec.kind) {
      case ObservableKind::SpLocal: j["kind"] = "sp_local"; break;
      case ObservableKind::SmLocal: j["kind"] = "sm_local"; break;
      case ObservableKind::SzLocal: j["kind"] = "sz_local"; break;
      case ObservableKind::SpK0: j["kind"] = "sp_k0"; break;
    }
    if (spec.site) j["site"] = *spec.site;
    return j;
  };
  doc["operators"] = {{"A", op_json(cfg.op_a)}, {"B", op_json(cfg.op_b)}};
  doc["budgets"] = cfg.budgets;
  doc["oracle"] = {{"max_dev", cfg.oracle_max_dev}};
  doc["trotter_check"] = {{"taus", cfg.trotter_check.taus},
                          {"total_time", cfg.trotter_check.total_time},
                          {"slope_tol", cfg.trotter_check.slope_tolerance}};
  doc["checkpoint_every"] = cfg.checkpoint_every;
  doc["seed"] = cfg.seed;
  doc["output"] = {{"dir", cfg.output_dir}};
  return doc;
}

std::string config_tag(const RunConfig& cfg) {
  json doc = to_json(cfg);
  doc.erase("output");  // storage location does not affect results
  return std::to_string(std::hash<std::string>{}(doc.dump()));
}

}  // namespace mpodyn
