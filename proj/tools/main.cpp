// mpodyn: finite-temperature response functions of XXZ chains from MPO
// evolution. Subcommands: run, sweep, compare-oracle, trotter-check, contour.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mpodyn/config.hpp"
#include "mpodyn/cost.hpp"
#include "mpodyn/exact.hpp"
#include "mpodyn/schemes.hpp"
#include "mpodyn/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mpodyn;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitBondCap = 3;
constexpr int kExitValidation = 4;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void atomic_write(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
  }
  fs::rename(tmp, path);
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& sets,
                      const std::string& out_override) {
  json doc;
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("JSON parse error: ") + e.what());
  }
  for (const std::string& s : sets) apply_override(doc, s);
  if (!out_override.empty()) doc["output"]["dir"] = out_override;
  return parse_config(doc);
}

void write_manifest(const RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& outputs) {
  json doc;
  doc["version"] = kVersion;
  doc["command"] = command;
  doc["config"] = to_json(cfg);
  doc["outputs"] = outputs;
  atomic_write(fs::path(cfg.output_dir) / "manifest.json", doc.dump(2) + "\n");
}

std::string costs_csv(const ResponseSeries& series) {
  std::ostringstream os;
  os << "beta,t,scheme,branch,sum_M3,max_M\n";
  char buf[160];
  for (std::size_t k = 0; k < series.times.size(); ++k) {
    for (const CostRecord* rec : {&series.cost_a[k], &series.cost_b[k]}) {
      std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%s,%s,%lld,%d\n", series.beta,
                    series.times[k], series.scheme.name().c_str(), rec->branch.c_str(),
                    rec->sum_m3, rec->max_m);
      os << buf;
    }
  }
  return os.str();
}

ResponseSeries run_series(const RunConfig& cfg, const SchemeSpec& spec, double beta,
                          SeriesLogs* logs, const CheckpointIO* ckpt) {
  const MPO a = cfg.build_operator(cfg.op_a);
  const MPO b = cfg.build_operator(cfg.op_b);
  return general_scheme_series(cfg.model, a, b, spec, beta, cfg.tmax, cfg.evolution,
                               logs, ckpt);
}

int cmd_run(const RunConfig& cfg) {
  bool cap_hit = false;
  std::vector<std::string> outputs;
  for (double beta : cfg.betas) {
    SeriesLogs logs;
    CheckpointIO ckpt;
    const CheckpointIO* ckpt_ptr = nullptr;
    if (cfg.checkpoint_every > 0) {
      ckpt.dir = fs::path(cfg.output_dir) / ("checkpoint_b" + fmt_double(beta));
      ckpt.every = cfg.checkpoint_every;
      ckpt.tag = config_tag(cfg) + "_b" + fmt_double(beta);
      ckpt_ptr = &ckpt;
    }
    ResponseSeries series;
    try {
      series = run_series(cfg, cfg.scheme, beta, &logs, ckpt_ptr);
    } catch (const NumericalError& e) {
      std::cerr << "bond-cap abort at beta=" << beta << ": " << e.what() << "\n";
      return kExitBondCap;
    }
    cap_hit = cap_hit || series.truncated;

    const std::string suffix = "_b" + fmt_double(beta);
    std::ostringstream scsv;
    write_series_csv(series, scsv);
    atomic_write(fs::path(cfg.output_dir) / ("series" + suffix + ".csv"), scsv.str());
    atomic_write(fs::path(cfg.output_dir) / ("costs" + suffix + ".csv"),
                 costs_csv(series));
    std::ostringstream lout;
    logs.thermal.write_jsonl(lout, "thermal");
    logs.branch_a.write_jsonl(lout, "branch_a");
    logs.branch_b.write_jsonl(lout, "branch_b");
    atomic_write(fs::path(cfg.output_dir) / ("evolution" + suffix + ".jsonl"),
                 lout.str());
    outputs.push_back("series" + suffix + ".csv");
    outputs.push_back("costs" + suffix + ".csv");
    outputs.push_back("evolution" + suffix + ".jsonl");

    std::cout << "beta=" << beta << " scheme=" << series.scheme.name()
              << " samples=" << series.times.size() << " t_reached=" << series.t_reached()
              << (series.truncated ? " (bond cap exceeded)" : "") << "\n";
  }
  write_manifest(cfg, "run", outputs);
  return cap_hit ? kExitBondCap : 0;
}

int cmd_compare_oracle(const RunConfig& cfg) {
  if (cfg.model.L > kDenseDefaultCap)
    throw ConfigError("model.L", "compare-oracle requires L <= " +
                                     std::to_string(kDenseDefaultCap));
  ExactSolver exact(cfg.model);
  const DenseOperator ad = dense_reconstruct(cfg.build_operator(cfg.op_a));
  const DenseOperator bd = dense_reconstruct(cfg.build_operator(cfg.op_b));

  double max_dev = 0.0;
  std::vector<std::string> outputs;
  for (double beta : cfg.betas) {
    const ResponseSeries series = run_series(cfg, cfg.scheme, beta, nullptr, nullptr);
    std::ostringstream os;
    os << "beta,t,re_chi,im_chi,re_exact,im_exact,abs_dev\n";
    double row_max = 0.0, sq_sum = 0.0;
    char buf[224];
    for (std::size_t k = 0; k < series.times.size(); ++k) {
      const cplx ref = exact.chi(ad, bd, beta, series.times[k]);
      const double dev = std::abs(series.values[k] - ref);
      row_max = std::max(row_max, dev);
      sq_sum += dev * dev;
      std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.3e\n",
                    beta, series.times[k], series.values[k].real(),
                    series.values[k].imag(), ref.real(), ref.imag(), dev);
      os << buf;
    }
    const std::string name = "compare_b" + fmt_double(beta) + ".csv";
    atomic_write(fs::path(cfg.output_dir) / name, os.str());
    outputs.push_back(name);
    const double rms = std::sqrt(sq_sum / static_cast<double>(series.times.size()));
    std::cout << "beta=" << beta << " max_dev=" << row_max << " rms_dev=" << rms
              << " (threshold " << cfg.oracle_max_dev << ")\n";
    max_dev = std::max(max_dev, row_max);
  }
  write_manifest(cfg, "compare-oracle", outputs);
  if (max_dev > cfg.oracle_max_dev) {
    std::cerr << "validation failure: max_dev=" << max_dev << " exceeds "
              << cfg.oracle_max_dev << "\n";
    return kExitValidation;
  }
  return 0;
}

int cmd_trotter_check(const RunConfig& cfg) {
  if (cfg.trotter_check.taus.size() < 2)
    throw ConfigError("trotter_check.taus", "insufficient points (need at least 2)");
  XXZParams p = cfg.model;
  p.L = 6;  // dense comparison scale
  ExactSolver exact(p);
  const double total = cfg.trotter_check.total_time;

  bool all_ok = true;
  for (int order : {2, 4}) {
    for (bool imaginary : {true, false}) {
      const cplx tau = imaginary ? cplx(total, 0.0) : cplx(0.0, total);
      std::vector<double> log_dtau, log_err;
      for (double dtau : cfg.trotter_check.taus) {
        const int n = static_cast<int>(std::lround(total / dtau));
        const TrotterPlan plan = build_plan(p, order, tau / static_cast<double>(n));
        const Eigen::MatrixXcd u1 = dense_trotter_step(p, plan).matrix;
        Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(u1.rows(), u1.cols());
        for (int s = 0; s < n; ++s) u = u1 * u;
        const double err = (u - exact.propagator(tau).matrix).norm();
        log_dtau.push_back(std::log(dtau));
        log_err.push_back(std::log(err));
      }
      // Least-squares slope on log-log axes.
      const std::size_t n = log_dtau.size();
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (std::size_t i = 0; i < n; ++i) {
        sx += log_dtau[i];
        sy += log_err[i];
        sxx += log_dtau[i] * log_dtau[i];
        sxy += log_dtau[i] * log_err[i];
      }
      const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
      const bool ok =
          std::abs(slope - order) <= cfg.trotter_check.slope_tolerance * order;
      all_ok = all_ok && ok;
      std::cout << "order=" << order << " kind=" << (imaginary ? "imag" : "real")
                << " fitted_slope=" << slope << " nominal=" << order << " "
                << (ok ? "PASS" : "FAIL") << "\n";
    }
  }
  return all_ok ? 0 : kExitValidation;
}

struct SweepCell {
  std::string scheme;
  double beta = 0.0;
  ResponseSeries series;
  bool failed = false;
  std::string error;
};

int cmd_sweep(const RunConfig& cfg, int jobs) {
  std::vector<SweepCell> cells;
  for (const std::string& scheme : cfg.sweep_schemes)
    for (double beta : cfg.betas) cells.push_back({scheme, beta, {}, false, {}});

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      SweepCell& cell = cells[i];
      SchemeSpec spec = cell.scheme == "A"   ? SchemeSpec::scheme_a()
                        : cell.scheme == "B" ? SchemeSpec::scheme_b()
                                             : SchemeSpec::scheme_c();
      try {
        cell.series = run_series(cfg, spec, cell.beta, nullptr, nullptr);
      } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> threads;
  for (int i = 1; i < n_threads; ++i) threads.emplace_back(worker);
  worker();
  for (std::thread& t : threads) t.join();

  for (const SweepCell& cell : cells)
    if (cell.failed) {
      std::cerr << "sweep cell scheme=" << cell.scheme << " beta=" << cell.beta
                << " failed: " << cell.error << "\n";
      return kExitBondCap;
    }

  std::vector<std::string> outputs;
  for (const std::string& scheme : cfg.sweep_schemes) {
    CostMap map;
    map.scheme = scheme;
    std::vector<double> betas = cfg.betas;
    std::sort(betas.begin(), betas.end());
    for (double beta : betas) {
      for (const SweepCell& cell : cells) {
        if (cell.scheme != scheme || cell.beta != beta) continue;
        std::vector<CostRecord> row;
        for (std::size_t k = 0; k < cell.series.times.size(); ++k) {
          CostRecord rec = dominant_step_cost(cell.series, k);
          rec.beta = beta;
          rec.t = cell.series.times[k];
          row.push_back(std::move(rec));
        }
        map.betas.push_back(beta);
        map.rows.push_back(std::move(row));

        const std::string name = "series_" + scheme + "_b" + fmt_double(beta) + ".csv";
        std::ostringstream os;
        write_series_csv(cell.series, os);
        atomic_write(fs::path(cfg.output_dir) / name, os.str());
        outputs.push_back(name);
      }
    }
    std::ostringstream mos;
    write_costmap_csv(map, mos);
    const std::string map_name = "costmap_" + scheme + ".csv";
    atomic_write(fs::path(cfg.output_dir) / map_name, mos.str());
    outputs.push_back(map_name);

    for (long long budget : cfg.budgets) {
      const auto contour = tmax_contour(map, budget);
      std::ostringstream cos;
      write_contour_csv(scheme, budget, contour, cos);
      const std::string cname = "contour_" + scheme + "_" + std::to_string(budget) + ".csv";
      atomic_write(fs::path(cfg.output_dir) / cname, cos.str());
      outputs.push_back(cname);
    }
  }
  write_manifest(cfg, "sweep", outputs);
  bool truncated = false;
  for (const SweepCell& cell : cells) truncated = truncated || cell.series.truncated;
  return truncated ? kExitBondCap : 0;
}

int cmd_contour(const std::string& costmap_path, const std::vector<long long>& budgets,
                const std::string& out_dir) {
  std::ifstream in(costmap_path);
  if (!in) throw ConfigError("--costmap", "cannot open '" + costmap_path + "'");
  std::string line;
  std::getline(in, line);
  if (line != "beta,t,scheme,sum_M3,max_M")
    throw ConfigError("--costmap", "unexpected header '" + line + "'");
  std::map<std::string, std::map<double, std::vector<CostRecord>>> grouped;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    CostRecord rec;
    std::string scheme;
    std::getline(ls, field, ',');
    rec.beta = std::stod(field);
    std::getline(ls, field, ',');
    rec.t = std::stod(field);
    std::getline(ls, scheme, ',');
    std::getline(ls, field, ',');
    rec.sum_m3 = std::stoll(field);
    std::getline(ls, field, ',');
    rec.max_m = std::stoi(field);
    grouped[scheme][rec.beta].push_back(rec);
  }
  for (auto& [scheme, by_beta] : grouped) {
    CostMap map;
    map.scheme = scheme;
    for (auto& [beta, row] : by_beta) {
      map.betas.push_back(beta);
      map.rows.push_back(row);
    }
    for (long long budget : budgets) {
      const auto contour = tmax_contour(map, budget);
      std::ostringstream os;
      write_contour_csv(scheme, budget, contour, os);
      if (out_dir.empty()) {
        std::cout << os.str();
      } else {
        atomic_write(fs::path(out_dir) /
                         ("contour_" + scheme + "_" + std::to_string(budget) + ".csv"),
                     os.str());
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // Keep BLAS single-threaded: one core is assumed throughout and threaded
  // GEMM would perturb determinism-sensitive timings.
  setenv("OPENBLAS_NUM_THREADS", "1", 0);

  CLI::App app{"Finite-temperature response functions of spin-1/2 XXZ chains "
               "via MPO evolution"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, out_override, costmap_path;
  std::vector<std::string> sets;
  std::vector<long long> budgets;
  int jobs = 1;

  auto add_common = [&](CLI::App* sub, bool need_config = true) {
    sub->add_option("--config", config_path, "configuration file (JSON)")
        ->required(need_config);
    sub->add_option("--set", sets, "override config entries as key.path=value");
    sub->add_option("--out", out_override, "output directory override");
  };

  CLI::App* run = app.add_subcommand("run", "execute the configured scheme");
  add_common(run);
  CLI::App* sweep = app.add_subcommand("sweep", "cost maps over beta and scheme lists");
  add_common(sweep);
  sweep->add_option("--jobs", jobs, "worker pool size")->check(CLI::PositiveNumber);
  CLI::App* cmp = app.add_subcommand("compare-oracle",
                                     "scheme vs exact diagonalization (L <= 12)");
  add_common(cmp);
  CLI::App* tck = app.add_subcommand("trotter-check",
                                     "fitted Trotter convergence order (L=6 dense)");
  add_common(tck);
  CLI::App* ctr = app.add_subcommand("contour", "extract t_max contours from a cost map");
  ctr->add_option("--costmap", costmap_path, "costmap CSV produced by sweep")->required();
  ctr->add_option("--budget", budgets, "per-step cost budgets")->required();
  ctr->add_option("--out", out_override, "output directory (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ctr->parsed()) return cmd_contour(costmap_path, budgets, out_override);
    const RunConfig cfg = load_config(config_path, sets, out_override);
    if (run->parsed()) return cmd_run(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg, jobs);
    if (cmp->parsed()) return cmd_compare_oracle(cfg);
    if (tck->parsed()) return cmd_trotter_check(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
