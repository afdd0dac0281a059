#include "mpodyn/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

namespace mpodyn {

namespace {

using nlohmann::json;

cplx chi_value(const ScaledValue& tr, double log_z) {
  if (tr.mantissa == cplx(0.0, 0.0)) return {0.0, 0.0};
  return tr.mantissa * std::exp(tr.log_mag - log_z);
}

int grid_steps(double span, double dt, const char* what) {
  if (dt <= 0.0) throw DimensionError(std::string(what) + ": dt must be positive");
  if (span < 0.0) throw DimensionError(std::string(what) + ": negative time span");
  const double ratio = span / dt;
  const int n = static_cast<int>(std::lround(ratio));
  if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio))
    throw DimensionError(std::string(what) + ": dt does not divide the time span");
  return n;
}

json cost_to_json(const CostRecord& rec) {
  return json{{"beta", rec.beta}, {"t", rec.t},         {"sum_m3", rec.sum_m3},
              {"max_m", rec.max_m}, {"dims", rec.profile.dims}, {"branch", rec.branch}};
}

CostRecord cost_from_json(const json& j) {
  CostRecord rec;
  rec.beta = j.at("beta").get<double>();
  rec.t = j.at("t").get<double>();
  rec.sum_m3 = j.at("sum_m3").get<long long>();
  rec.max_m = j.at("max_m").get<int>();
  rec.profile.dims = j.at("dims").get<std::vector<int>>();
  rec.branch = j.at("branch").get<std::string>();
  return rec;
}

// Step-granular checkpoint state: the partial series plus the two branch
// MPOs and their step counters.
struct CheckpointState {
  int next_sample = 0;
  int steps_a = 0;
  int steps_b = 0;
};

void save_checkpoint(const CheckpointIO& io, const ResponseSeries& series,
                     const CheckpointState& st, const MPO& branch_b, const MPO& branch_a) {
  std::filesystem::create_directories(io.dir);
  save_mpo(branch_b, io.dir / "checkpoint_branch_b.mpo");
  save_mpo(branch_a, io.dir / "checkpoint_branch_a.mpo");
  json j;
  j["tag"] = io.tag;
  j["scheme"] = series.scheme.name();
  j["next_sample"] = st.next_sample;
  j["steps_a"] = st.steps_a;
  j["steps_b"] = st.steps_b;
  j["beta"] = series.beta;
  j["log_z"] = series.log_z;
  j["times"] = series.times;
  std::vector<double> re, im;
  for (cplx v : series.values) {
    re.push_back(v.real());
    im.push_back(v.imag());
  }
  j["re"] = re;
  j["im"] = im;
  j["cost_a"] = json::array();
  j["cost_b"] = json::array();
  for (const CostRecord& r : series.cost_a) j["cost_a"].push_back(cost_to_json(r));
  for (const CostRecord& r : series.cost_b) j["cost_b"].push_back(cost_to_json(r));
  const auto tmp = io.dir / "checkpoint_state.json.tmp";
  {
    std::ofstream out(tmp);
    out << j.dump();
  }
  std::filesystem::rename(tmp, io.dir / "checkpoint_state.json");
}

bool try_restore_checkpoint(const CheckpointIO& io, ResponseSeries& series,
                            CheckpointState& st, MPO& branch_b, MPO& branch_a) {
  const auto path = io.dir / "checkpoint_state.json";
  std::ifstream in(path);
  if (!in) return false;
  json j;
  try {
    in >> j;
    if (j.at("tag").get<std::string>() != io.tag) return false;
    if (j.at("scheme").get<std::string>() != series.scheme.name()) return false;
    st.next_sample = j.at("next_sample").get<int>();
    st.steps_a = j.at("steps_a").get<int>();
    st.steps_b = j.at("steps_b").get<int>();
    series.beta = j.at("beta").get<double>();
    series.log_z = j.at("log_z").get<double>();
    series.times = j.at("times").get<std::vector<double>>();
    const auto re = j.at("re").get<std::vector<double>>();
    const auto im = j.at("im").get<std::vector<double>>();
    series.values.clear();
    for (std::size_t i = 0; i < re.size(); ++i) series.values.emplace_back(re[i], im[i]);
    series.cost_a.clear();
    series.cost_b.clear();
    for (const json& r : j.at("cost_a")) series.cost_a.push_back(cost_from_json(r));
    for (const json& r : j.at("cost_b")) series.cost_b.push_back(cost_from_json(r));
    branch_b = load_mpo(io.dir / "checkpoint_branch_b.mpo");
    branch_a = load_mpo(io.dir / "checkpoint_branch_a.mpo");
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

void sample_point(ResponseSeries& series, double t, cplx value, const MPO& branch_a,
                  const MPO& branch_b, double ta = -1.0, double tb = -1.0) {
  series.times.push_back(t);
  series.values.push_back(value);
  series.cost_a.push_back(
      make_cost_record(series.beta, ta < 0 ? t : ta, branch_a, "A"));
  series.cost_b.push_back(
      make_cost_record(series.beta, tb < 0 ? t : tb, branch_b, "B"));
}

MPO initial_product(const MPO& left, const MPO& right, double eps_svd,
                    const std::optional<int>& cap) {
  return compress(mpo_multiply(left, right), eps_svd, cap).first;
}

}  // namespace

std::string SchemeSpec::name() const {
  switch (preset) {
    case Preset::A:
      return "A";
    case Preset::B:
      return "B";
    case Preset::C:
      return "C";
    case Preset::Custom:
      return "custom";
  }
  return "custom";
}

double partition_function(const MPO& half_dm) {
  return 2.0 * log_schatten2_norm(half_dm);
}

const CostRecord& dominant_step_cost(const ResponseSeries& series, std::size_t k) {
  const bool b_evolves = series.scheme.preset == SchemeSpec::Preset::A ||
                         series.scheme.preset == SchemeSpec::Preset::C;
  if (!b_evolves) return series.cost_a[k];
  return series.cost_a[k].sum_m3 >= series.cost_b[k].sum_m3 ? series.cost_a[k]
                                                            : series.cost_b[k];
}

ResponseSeries scheme_a_series(const XXZParams& p, const MPO& op_a, const MPO& op_b,
                               double beta, double tmax, const EvolutionSettings& s,
                               SeriesLogs* logs, const CheckpointIO* ckpt) {
  ResponseSeries series;
  series.scheme = SchemeSpec::scheme_a();
  series.beta = beta;
  const int n = grid_steps(tmax, s.dt, "scheme A");
  const TrotterPlan fwd = build_plan(p, s.order, cplx(0.0, s.dt));   // e^{-i dt H}
  const TrotterPlan bwd = build_plan(p, s.order, cplx(0.0, -s.dt));  // e^{+i dt H}

  MPO y, x;
  CheckpointState st;
  if (!(ckpt && ckpt->enabled() && try_restore_checkpoint(*ckpt, series, st, y, x))) {
    const MPO th = thermal_half(p, beta, s.dbeta, s.eps_beta, s.order,
                                logs ? &logs->thermal : nullptr, s.max_rank);
    series.log_z = partition_function(th);
    y = th;                                                                // [e^{-bH/2} e^{iHt}]
    x = initial_product(op_a, th, per_svd_epsilon(fwd, s.eps_t), s.max_rank);  // [e^{-iHt} A e^{-bH/2}]
    st = CheckpointState{};
  }

  for (int k = st.next_sample; k <= n; ++k) {
    const double t = k * s.dt;
    sample_point(series, t, chi_value(hs_trace_scaled(y, op_b, x), series.log_z), x, y);
    if (k == n) break;
    EvolveResult ry = evolve(std::move(y), bwd, EvolveSide::Right, 1, s.eps_t,
                             s.max_rank, logs ? &logs->branch_b : nullptr);
    EvolveResult rx = evolve(std::move(x), fwd, EvolveSide::Left, 1, s.eps_t,
                             s.max_rank, logs ? &logs->branch_a : nullptr);
    y = std::move(ry.mpo);
    x = std::move(rx.mpo);
    if (ry.cap_exceeded || rx.cap_exceeded) {
      series.truncated = true;
      break;
    }
    if (ckpt && ckpt->enabled() && ckpt->every > 0 && (k + 1) % ckpt->every == 0) {
      st.next_sample = k + 1;
      st.steps_a = st.steps_b = k + 1;
      save_checkpoint(*ckpt, series, st, y, x);
    }
  }
  return series;
}

ResponseSeries scheme_b_series(const XXZParams& p, const MPO& op_a, const MPO& op_b,
                               double beta, double tmax, const EvolutionSettings& s,
                               SeriesLogs* logs, const CheckpointIO* ckpt) {
  ResponseSeries series;
  series.scheme = SchemeSpec::scheme_b();
  series.beta = beta;
  const int n = grid_steps(tmax, s.dt, "scheme B");
  const TrotterPlan fwd = build_plan(p, s.order, cplx(0.0, s.dt));

  MPO y, x;
  CheckpointState st;
  if (!(ckpt && ckpt->enabled() && try_restore_checkpoint(*ckpt, series, st, y, x))) {
    const MPO th = thermal_half(p, beta, s.dbeta, s.eps_beta, s.order,
                                logs ? &logs->thermal : nullptr, s.max_rank);
    series.log_z = partition_function(th);
    y = th;  // static [e^{-bH/2}]
    x = initial_product(op_a, th, per_svd_epsilon(fwd, s.eps_t), s.max_rank);
    st = CheckpointState{};
  }

  for (int k = st.next_sample; k <= n; ++k) {
    const double t = k * s.dt;
    sample_point(series, t, chi_value(hs_trace_scaled(y, op_b, x), series.log_z), x, y);
    if (k == n) break;
    EvolveResult rx = evolve(std::move(x), fwd, EvolveSide::Conjugate, 1, s.eps_t,
                             s.max_rank, logs ? &logs->branch_a : nullptr);
    x = std::move(rx.mpo);
    if (rx.cap_exceeded) {
      series.truncated = true;
      break;
    }
    if (ckpt && ckpt->enabled() && ckpt->every > 0 && (k + 1) % ckpt->every == 0) {
      st.next_sample = k + 1;
      st.steps_a = k + 1;
      save_checkpoint(*ckpt, series, st, y, x);
    }
  }
  return series;
}

ResponseSeries scheme_c_series(const XXZParams& p, const MPO& op_a, const MPO& op_b,
                               double beta, double ta_max, double tb_max,
                               const EvolutionSettings& s, SeriesLogs* logs,
                               const CheckpointIO* ckpt) {
  ResponseSeries series;
  series.scheme = SchemeSpec::scheme_c();
  series.beta = beta;
  const int ka = grid_steps(ta_max, s.dt, "scheme C (t_A)");
  const int kb = grid_steps(tb_max, s.dt, "scheme C (t_B)");
  const int n = ka + kb;
  const TrotterPlan fwd = build_plan(p, s.order, cplx(0.0, s.dt));
  const TrotterPlan bwd = build_plan(p, s.order, cplx(0.0, -s.dt));

  MPO y, x;
  CheckpointState st;
  if (!(ckpt && ckpt->enabled() && try_restore_checkpoint(*ckpt, series, st, y, x))) {
    const MPO th = thermal_half(p, beta, s.dbeta, s.eps_beta, s.order,
                                logs ? &logs->thermal : nullptr, s.max_rank);
    series.log_z = partition_function(th);
    x = initial_product(op_a, th, per_svd_epsilon(fwd, s.eps_t), s.max_rank);  // A branch
    y = initial_product(th, op_b, per_svd_epsilon(bwd, s.eps_t), s.max_rank);  // B branch
    st = CheckpointState{};
  }

  for (int k = st.next_sample; k <= n; ++k) {
    // Balanced split where available; the A branch takes the odd step.
    const int na = std::clamp((k + 1) / 2, k - kb, ka);
    const int nb = k - na;
    bool cap = false;
    while (st.steps_a < na && !cap) {
      EvolveResult r = evolve(std::move(x), fwd, EvolveSide::Conjugate, 1, s.eps_t,
                              s.max_rank, logs ? &logs->branch_a : nullptr);
      x = std::move(r.mpo);
      cap = r.cap_exceeded;
      ++st.steps_a;
    }
    while (st.steps_b < nb && !cap) {
      EvolveResult r = evolve(std::move(y), bwd, EvolveSide::Conjugate, 1, s.eps_t,
                              s.max_rank, logs ? &logs->branch_b : nullptr);
      y = std::move(r.mpo);
      cap = r.cap_exceeded;
      ++st.steps_b;
    }
    if (cap) {
      series.truncated = true;
      break;
    }
    const double t = k * s.dt;
    sample_point(series, t, chi_value(hs_trace_scaled(y, x), series.log_z), x, y,
                 st.steps_a * s.dt, st.steps_b * s.dt);
    if (ckpt && ckpt->enabled() && ckpt->every > 0 && k > 0 && k % ckpt->every == 0) {
      st.next_sample = k + 1;
      save_checkpoint(*ckpt, series, st, y, x);
    }
  }
  return series;
}

ResponseSeries general_scheme_series(const XXZParams& p, const MPO& op_a,
                                     const MPO& op_b, const SchemeSpec& spec,
                                     double beta, double tmax,
                                     const EvolutionSettings& s, SeriesLogs* logs,
                                     const CheckpointIO* ckpt) {
  switch (spec.preset) {
    case SchemeSpec::Preset::A:
      return scheme_a_series(p, op_a, op_b, beta, tmax, s, logs, ckpt);
    case SchemeSpec::Preset::B:
      return scheme_b_series(p, op_a, op_b, beta, tmax, s, logs, ckpt);
    case SchemeSpec::Preset::C: {
      const int n = grid_steps(tmax, s.dt, "scheme C");
      const int ka = (n + 1) / 2;
      return scheme_c_series(p, op_a, op_b, beta, ka * s.dt, (n - ka) * s.dt, s, logs,
                             ckpt);
    }
    case SchemeSpec::Preset::Custom:
      break;
  }

  if (spec.beta_prime < -1e-12 || spec.beta_prime > beta + 1e-12)
    throw DimensionError("general scheme: beta_prime must lie in [0, beta]");
  ResponseSeries series;
  series.scheme = spec;
  series.beta = beta;
  const int n = grid_steps(tmax, s.dt, "general scheme");
  const int n_tp = grid_steps(spec.t_prime, s.dt, "general scheme (t')");
  const int n_tpp = grid_steps(spec.t_dprime, s.dt, "general scheme (t'')");
  const TrotterPlan fwd = build_plan(p, s.order, cplx(0.0, s.dt));
  const TrotterPlan bwd = build_plan(p, s.order, cplx(0.0, -s.dt));
  const double eps_svd = per_svd_epsilon(fwd, s.eps_t);

  MPO y, x;
  CheckpointState st;
  if (!(ckpt && ckpt->enabled() && try_restore_checkpoint(*ckpt, series, st, y, x))) {
    // Thermal factors e^{-beta' H} and e^{-(beta-beta') H}.
    const MPO t1 = thermal_half(p, 2.0 * spec.beta_prime, s.dbeta, s.eps_beta, s.order,
                                logs ? &logs->thermal : nullptr, s.max_rank);
    const MPO t2 = thermal_half(p, 2.0 * (beta - spec.beta_prime), s.dbeta, s.eps_beta,
                                s.order, nullptr, s.max_rank);
    series.log_z = hs_trace_scaled(t1, t2).log_abs();  // Tr e^{-beta H}

    // Y = [e^{iHt'} e^{-beta'H} B e^{-iHt''}], fixed across the series.
    y = initial_product(t1, op_b, eps_svd, s.max_rank);
    if (n_tp > 0)
      y = evolve(std::move(y), bwd, EvolveSide::Left, n_tp, s.eps_t, s.max_rank,
                 logs ? &logs->branch_b : nullptr)
              .mpo;
    if (n_tpp > 0)
      y = evolve(std::move(y), fwd, EvolveSide::Right, n_tpp, s.eps_t, s.max_rank,
                 logs ? &logs->branch_b : nullptr)
              .mpo;

    // X(0) = [e^{iHt''} A e^{-(beta-beta')H} e^{-iHt'}]; each series step
    // conjugates with e^{-i dt H}.
    x = initial_product(op_a, t2, eps_svd, s.max_rank);
    if (n_tpp > 0)
      x = evolve(std::move(x), bwd, EvolveSide::Left, n_tpp, s.eps_t, s.max_rank,
                 logs ? &logs->branch_a : nullptr)
              .mpo;
    if (n_tp > 0)
      x = evolve(std::move(x), fwd, EvolveSide::Right, n_tp, s.eps_t, s.max_rank,
                 logs ? &logs->branch_a : nullptr)
              .mpo;
    st = CheckpointState{};
  }

  for (int k = st.next_sample; k <= n; ++k) {
    const double t = k * s.dt;
    sample_point(series, t, chi_value(hs_trace_scaled(y, x), series.log_z), x, y);
    if (k == n) break;
    EvolveResult rx = evolve(std::move(x), fwd, EvolveSide::Conjugate, 1, s.eps_t,
                             s.max_rank, logs ? &logs->branch_a : nullptr);
    x = std::move(rx.mpo);
    if (rx.cap_exceeded) {
      series.truncated = true;
      break;
    }
    if (ckpt && ckpt->enabled() && ckpt->every > 0 && (k + 1) % ckpt->every == 0) {
      st.next_sample = k + 1;
      st.steps_a = k + 1;
      save_checkpoint(*ckpt, series, st, y, x);
    }
  }
  return series;
}

TmaxOptimum optimize_tmax(std::span<const double> beta_grid,
                          std::span<const double> tmax_samples, double beta) {
  const std::size_t n = beta_grid.size();
  if (n != tmax_samples.size())
    throw DimensionError("optimize_tmax: grid/sample length mismatch");
  if (n < 2) throw DimensionError("optimize_tmax: need at least two samples");
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (beta_grid[i + 1] <= beta_grid[i])
      throw DimensionError("optimize_tmax: grid must be strictly increasing");
  if (beta_grid.front() > 1e-12 || beta_grid.back() < beta - 1e-12)
    throw DimensionError("optimize_tmax: samples must cover [0, beta]");

  auto interp = [&](double x) {
    x = std::clamp(x, beta_grid.front(), beta_grid.back());
    std::size_t hi = 1;
    while (hi + 1 < n && beta_grid[hi] < x) ++hi;
    const double x0 = beta_grid[hi - 1], x1 = beta_grid[hi];
    const double f0 = tmax_samples[hi - 1], f1 = tmax_samples[hi];
    return f0 + (f1 - f0) * (x - x0) / (x1 - x0);
  };

  // The objective is piecewise linear, so its maximum sits at a breakpoint of
  // either summand: the sample abscissae and their reflections about beta.
  std::vector<double> candidates{beta / 2.0, 0.0, beta};
  for (double g : beta_grid) {
    if (g >= -1e-12 && g <= beta + 1e-12) candidates.push_back(std::clamp(g, 0.0, beta));
    const double r = beta - g;
    if (r >= -1e-12 && r <= beta + 1e-12) candidates.push_back(std::clamp(r, 0.0, beta));
  }

  TmaxOptimum best{beta / 2.0, 2.0 * interp(beta / 2.0)};
  for (double c : candidates) {
    const double v = interp(c) + interp(beta - c);
    const double tol = 1e-12 * std::max(1.0, std::abs(v));
    if (v > best.t_sum + tol) {
      best = {c, v};
    } else if (std::abs(v - best.t_sum) <= tol &&
               std::abs(c - beta / 2.0) < std::abs(best.beta_prime - beta / 2.0)) {
      best = {c, v};  // ties break toward the symmetric split
    }
  }
  return best;
}

void write_series_csv(const ResponseSeries& series, std::ostream& out) {
  out << "beta,t,re_chi,im_chi,log_z,sum_M3_branchA,sum_M3_branchB,max_M\n";
  char buf[256];
  for (std::size_t k = 0; k < series.times.size(); ++k) {
    const int max_m = std::max(series.cost_a[k].max_m, series.cost_b[k].max_m);
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%.12g,%.12g,%lld,%lld,%d\n",
                  series.beta, series.times[k], series.values[k].real(),
                  series.values[k].imag(), series.log_z, series.cost_a[k].sum_m3,
                  series.cost_b[k].sum_m3, max_m);
    out << buf;
  }
}

}  // namespace mpodyn
