// End-to-end checks of the command-line interface: exit codes, output files,
// determinism, and run/sweep consistency.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* cli_path() { return MPODYN_CLI_PATH; }

struct CliResult {
  int exit_code = -1;
  std::string stdout_text;
};

CliResult run_cli(const std::string& args) {
  const fs::path out = fs::temp_directory_path() / "mpodyn_cli_stdout.txt";
  const std::string cmd = std::string(cli_path()) + " " + args + " > " + out.string() +
                          " 2>" + out.string() + ".err";
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WEXITSTATUS(status);
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  result.stdout_text = ss.str();
  return result;
}

fs::path write_config(const fs::path& dir, json doc) {
  fs::create_directories(dir);
  const fs::path path = dir / "config.json";
  std::ofstream out(path);
  out << doc.dump(2);
  return path;
}

json small_config(const std::string& out_dir) {
  return json::parse(R"({
    "model": {"L": 6, "Jz": 1.0, "h": 0.0},
    "scheme": {"preset": "B"},
    "beta": [0.5],
    "time": {"tmax": 0.25, "dt": 0.0625},
    "trotter": {"order": 4, "dbeta": 0.0625},
    "truncation": {"eps_beta": 1e-12, "eps_t": 1e-10},
    "operators": {"A": {"kind": "sp_local", "site": 3},
                  "B": {"kind": "sm_local", "site": 3}},
    "output": {"dir": ")" + out_dir + R"("}
  })");
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, RunProducesArtifactsAndIsDeterministic) {
  const fs::path base = fs::temp_directory_path() / "mpodyn_cli_run";
  fs::remove_all(base);
  const fs::path cfg = write_config(base, small_config((base / "out").string()));

  CliResult r1 = run_cli("run --config " + cfg.string());
  ASSERT_EQ(r1.exit_code, 0) << r1.stdout_text;
  for (const char* name :
       {"series_b0.5.csv", "costs_b0.5.csv", "evolution_b0.5.jsonl", "manifest.json"})
    EXPECT_TRUE(fs::exists(base / "out" / name)) << name;

  const std::string series1 = slurp(base / "out" / "series_b0.5.csv");
  const std::string costs1 = slurp(base / "out" / "costs_b0.5.csv");
  const json manifest = json::parse(slurp(base / "out" / "manifest.json"));
  EXPECT_EQ(manifest.at("command"), "run");
  EXPECT_TRUE(manifest.contains("version"));
  EXPECT_TRUE(manifest.at("config").contains("truncation"));

  CliResult r2 = run_cli("run --config " + cfg.string());
  ASSERT_EQ(r2.exit_code, 0);
  EXPECT_EQ(slurp(base / "out" / "series_b0.5.csv"), series1);
  EXPECT_EQ(slurp(base / "out" / "costs_b0.5.csv"), costs1);
  fs::remove_all(base);
}

TEST(Cli, ConfigErrorsExitTwo) {
  const fs::path base = fs::temp_directory_path() / "mpodyn_cli_bad";
  fs::remove_all(base);
  const fs::path cfg = write_config(base, small_config((base / "out").string()));

  EXPECT_EQ(run_cli("run --config " + cfg.string() + " --set model.L=1").exit_code, 2);
  EXPECT_EQ(run_cli("run --config " + cfg.string() + " --set time.dt=0").exit_code, 2);
  EXPECT_EQ(run_cli("run --config /nonexistent.json").exit_code, 2);
  EXPECT_EQ(
      run_cli("compare-oracle --config " + cfg.string() + " --set model.L=14").exit_code,
      2);
  fs::remove_all(base);
}

TEST(Cli, BondCapAbortExitsThree) {
  const fs::path base = fs::temp_directory_path() / "mpodyn_cli_cap";
  fs::remove_all(base);
  json doc = small_config((base / "out").string());
  doc["beta"] = {0.0};
  doc["time"]["tmax"] = 2.0;
  doc["truncation"]["max_rank"] = 2;
  const fs::path cfg = write_config(base, doc);
  CliResult r = run_cli("run --config " + cfg.string());
  EXPECT_EQ(r.exit_code, 3);
  // Partial outputs are still written.
  EXPECT_TRUE(fs::exists(base / "out" / "series_b0.csv"));
  fs::remove_all(base);
}

TEST(Cli, CompareOracleAndValidationExit) {
  const fs::path base = fs::temp_directory_path() / "mpodyn_cli_cmp";
  fs::remove_all(base);
  const fs::path cfg = write_config(base, small_config((base / "out").string()));

  EXPECT_EQ(run_cli("compare-oracle --config " + cfg.string()).exit_code, 0);
  EXPECT_TRUE(fs::exists(base / "out" / "compare_b0.5.csv"));
  // An absurdly tight threshold trips the validation exit code.
  EXPECT_EQ(run_cli("compare-oracle --config " + cfg.string() +
                    " --set oracle.max_dev=1e-15")
                .exit_code,
            4);
  fs::remove_all(base);
}

TEST(Cli, TrotterCheckPassesAndRejectsShortGrids) {
  const fs::path base = fs::temp_directory_path() / "mpodyn_cli_tck";
  fs::remove_all(base);
  const fs::path cfg = write_config(base, small_config((base / "out").string()));
  CliResult r = run_cli("trotter-check --config " + cfg.string());
  EXPECT_EQ(r.exit_code, 0) << r.stdout_text;
  EXPECT_NE(r.stdout_text.find("order=2"), std::string::npos);
  EXPECT_NE(r.stdout_text.find("order=4"), std::string::npos);
  EXPECT_NE(r.stdout_text.find("PASS"), std::string::npos);

  EXPECT_EQ(
      run_cli("trotter-check --config " + cfg.string() + " --set trotter_check.taus=[0.125]")
          .exit_code,
      2);
  fs::remove_all(base);
}

TEST(Cli, SweepSingleCellMatchesRun) {
  const fs::path base = fs::temp_directory_path() / "mpodyn_cli_sweep";
  fs::remove_all(base);
  json doc = small_config((base / "out_run").string());
  const fs::path cfg = write_config(base, doc);

  ASSERT_EQ(run_cli("run --config " + cfg.string()).exit_code, 0);
  ASSERT_EQ(run_cli("sweep --config " + cfg.string() + " --out " +
                    (base / "out_sweep").string() + " --jobs 2")
                .exit_code,
            0);

  // The sweep's series for the single (scheme, beta) cell equals the run's.
  EXPECT_EQ(slurp(base / "out_sweep" / "series_B_b0.5.csv"),
            slurp(base / "out_run" / "series_b0.5.csv"));
  EXPECT_TRUE(fs::exists(base / "out_sweep" / "costmap_B.csv"));
  EXPECT_TRUE(fs::exists(base / "out_sweep" / "contour_B_1000000.csv"));

  // The costmap rows restate the run's dominant evolved-branch cost records.
  std::istringstream costmap(slurp(base / "out_sweep" / "costmap_B.csv"));
  std::string header, first_row;
  std::getline(costmap, header);
  std::getline(costmap, first_row);
  EXPECT_EQ(header, "beta,t,scheme,sum_M3,max_M");
  std::istringstream run_costs(slurp(base / "out_run" / "costs_b0.5.csv"));
  std::string rheader, branch_a_row;
  std::getline(run_costs, rheader);
  std::getline(run_costs, branch_a_row);  // first sample, branch A
  // branch A row: beta,t,scheme,branch,sum,max -> drop the branch column.
  const auto strip_branch = [](const std::string& row) {
    std::istringstream ss(row);
    std::string beta, t, scheme, branch, sum, max;
    std::getline(ss, beta, ',');
    std::getline(ss, t, ',');
    std::getline(ss, scheme, ',');
    std::getline(ss, branch, ',');
    std::getline(ss, sum, ',');
    std::getline(ss, max, ',');
    return beta + "," + t + "," + scheme + "," + sum + "," + max;
  };
  EXPECT_EQ(first_row, strip_branch(branch_a_row));

  // Contour re-extraction through the dedicated subcommand round-trips.
  CliResult contour = run_cli("contour --costmap " +
                              (base / "out_sweep" / "costmap_B.csv").string() +
                              " --budget 1000000");
  EXPECT_EQ(contour.exit_code, 0);
  EXPECT_EQ(contour.stdout_text, slurp(base / "out_sweep" / "contour_B_1000000.csv"));
  fs::remove_all(base);
}

TEST(Cli, CheckpointResume) {
  const fs::path base = fs::temp_directory_path() / "mpodyn_cli_ckpt";
  fs::remove_all(base);
  json doc = small_config((base / "out").string());
  doc["checkpoint_every"] = 2;
  const fs::path cfg = write_config(base, doc);

  ASSERT_EQ(run_cli("run --config " + cfg.string()).exit_code, 0);
  const std::string series1 = slurp(base / "out" / "series_b0.5.csv");
  EXPECT_TRUE(fs::exists(base / "out" / "checkpoint_b0.5" / "checkpoint_state.json"));

  // Second invocation resumes from the stored sample and reproduces the series.
  ASSERT_EQ(run_cli("run --config " + cfg.string()).exit_code, 0);
  EXPECT_EQ(slurp(base / "out" / "series_b0.5.csv"), series1);
  fs::remove_all(base);
}
