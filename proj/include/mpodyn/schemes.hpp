#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpodyn/cost.hpp"
#include "mpodyn/mpo.hpp"
#include "mpodyn/trotter.hpp"
#include "mpodyn/xxz.hpp"

namespace mpodyn {

/// Member of the evaluation-scheme family chi^{beta' t' t''}(beta, t)
///   = Z^-1 Tr([e^{iHt'} e^{-beta'H} B e^{-iHt''}]
///             [e^{-iH(t-t'')} A e^{-(beta-beta')H} e^{iH(t-t')}]).
/// The named presets select (beta', t', t'') = (beta/2, t, 0) for A,
/// (beta/2, 0, 0) for B, and beta' = beta/2 with the real-time evolution
/// split across both branches for C.
struct SchemeSpec {
  enum class Preset { A, B, C, Custom };
  Preset preset = Preset::Custom;
  double beta_prime = 0.0;
  double t_prime = 0.0;
  double t_dprime = 0.0;

  static SchemeSpec scheme_a() { return {Preset::A, 0, 0, 0}; }
  static SchemeSpec scheme_b() { return {Preset::B, 0, 0, 0}; }
  static SchemeSpec scheme_c() { return {Preset::C, 0, 0, 0}; }
  static SchemeSpec custom(double beta_prime, double t_prime, double t_dprime) {
    return {Preset::Custom, beta_prime, t_prime, t_dprime};
  }

  std::string name() const;
};

/// Numerical knobs shared by the scheme drivers.
struct EvolutionSettings {
  int order = 4;
  double dbeta = 0.125;
  double dt = 0.125;
  double eps_beta = 1e-12;  // per-time-step truncation weight, imaginary time
  double eps_t = 1e-10;     // per-time-step truncation weight, real time
  std::optional<int> max_rank;
};

/// Sampled response function chi(beta, t_k) with per-sample cost records for
/// both MPO branches (branch_a carries the A operator, branch_b the B side).
struct ResponseSeries {
  SchemeSpec scheme;
  double beta = 0.0;
  double log_z = 0.0;
  std::vector<double> times;
  std::vector<cplx> values;
  std::vector<CostRecord> cost_a;
  std::vector<CostRecord> cost_b;
  bool truncated = false;  // stopped before tmax (bond cap exceeded)

  double t_reached() const { return times.empty() ? 0.0 : times.back(); }
};

/// Per-branch evolution logs of a scheme run.
struct SeriesLogs {
  EvolutionLog thermal;
  EvolutionLog branch_a;
  EvolutionLog branch_b;
};

/// Step-granular checkpointing for long real-time runs: every `every`
/// samples the branch MPOs and the partial series are written to `dir`;
/// a later run with the same tag resumes from the stored sample.
struct CheckpointIO {
  std::filesystem::path dir;
  int every = 0;  // 0 disables saving (restore is still attempted when tag set)
  std::string tag;

  bool enabled() const { return !tag.empty(); }
};

/// log Z_beta = 2 log || [e^{-beta H/2}] ||_2.
double partition_function(const MPO& half_dm);

/// Per-time-step cost record of the dominant evolved MPO at sample k: both
/// branches evolve in schemes A and C, while B and the fixed-(t', t'')
/// members evolve only the A-carrying branch (the B side is static and costs
/// nothing per step).
const CostRecord& dominant_step_cost(const ResponseSeries& series, std::size_t k);

ResponseSeries scheme_a_series(const XXZParams& p, const MPO& op_a, const MPO& op_b,
                               double beta, double tmax, const EvolutionSettings& s,
                               SeriesLogs* logs = nullptr,
                               const CheckpointIO* ckpt = nullptr);

ResponseSeries scheme_b_series(const XXZParams& p, const MPO& op_a, const MPO& op_b,
                               double beta, double tmax, const EvolutionSettings& s,
                               SeriesLogs* logs = nullptr,
                               const CheckpointIO* ckpt = nullptr);

/// Two independent conjugate evolutions; chi is assembled on the summed grid
/// t = t_a + t_b with the balanced split (the A branch takes the odd step).
ResponseSeries scheme_c_series(const XXZParams& p, const MPO& op_a, const MPO& op_b,
                               double beta, double ta_max, double tb_max,
                               const EvolutionSettings& s, SeriesLogs* logs = nullptr,
                               const CheckpointIO* ckpt = nullptr);

/// Fixed-(beta', t', t'') member of the scheme family; named presets dispatch
/// to their dedicated drivers (scheme C with the balanced split of tmax).
ResponseSeries general_scheme_series(const XXZParams& p, const MPO& op_a,
                                     const MPO& op_b, const SchemeSpec& spec,
                                     double beta, double tmax,
                                     const EvolutionSettings& s,
                                     SeriesLogs* logs = nullptr,
                                     const CheckpointIO* ckpt = nullptr);

/// t_max^opt(beta) = max_{0 <= b' <= beta} t(b') + t(beta - b') over
/// piecewise-linear interpolation of the samples; ties break toward beta/2.
struct TmaxOptimum {
  double beta_prime = 0.0;
  double t_sum = 0.0;
};

TmaxOptimum optimize_tmax(std::span<const double> beta_grid,
                          std::span<const double> tmax_samples, double beta);

void write_series_csv(const ResponseSeries& series, std::ostream& out);

}  // namespace mpodyn
