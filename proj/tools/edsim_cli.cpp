#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "edsim/harness.hpp"

using namespace edsim;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitProtocol = 3;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DRAM technique evaluation simulator"};
  app.require_subcommand(1);

  std::string config, out, workloads, baseline, csv, heatmap_out, report_a, report_b;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 0;

  auto* run_cmd = app.add_subcommand("run", "Simulate one configuration");
  run_cmd->add_option("--config", config, "Experiment config (.ini)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--mode", mode, "timescaled, notimescale or reference");
  run_cmd->add_option("--seed", seed, "Override the run seed");
  run_cmd->add_option("--out", out, "Write the JSON report here");

  auto* profile_cmd = app.add_subcommand("profile", "Profile per-row minimum tRCD of the configured chip");
  profile_cmd->add_option("--config", config, "Experiment config (.ini)")->required()->check(CLI::ExistingFile);
  profile_cmd->add_option("--out", heatmap_out, "Heatmap CSV")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "Run every workload file of a directory on top of a base config");
  sweep_cmd->add_option("--config", config, "Base config (.ini)")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--workloads", workloads, "Directory of workload .ini files")
      ->required()
      ->check(CLI::ExistingDirectory);
  sweep_cmd->add_option("--baseline", baseline, "Workload name speedups are relative to");
  sweep_cmd->add_option("--out", out, "Write the JSON result set here");
  sweep_cmd->add_option("--csv", csv, "Write the CSV table here (default: stdout)");
  sweep_cmd->add_option("-j,--jobs", jobs, "Parallel simulations (default: hardware threads)");

  auto* compare_cmd = app.add_subcommand("compare", "Execution time and latency deltas of b against a");
  compare_cmd->add_option("a", report_a, "Report or sweep JSON")->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("b", report_b, "Report or sweep JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      ExperimentConfig cfg = load_config(config);
      if (mode) cfg.mode = mode_from_string(*mode);
      if (seed) cfg.seed = *seed;
      const RunReport r = run(cfg);
      write_report_summary(std::cout, r);
      if (!out.empty()) write_file(out, report_text(r.json));
    } else if (*profile_cmd) {
      const ExperimentConfig cfg = load_config(config);
      const RowTrcdTable table = profile_rows(cfg, build_profile(cfg));
      std::ofstream f(heatmap_out);
      if (!f) throw ConfigError("cannot write '" + heatmap_out + "'");
      write_heatmap(f, table);
      const auto weak = table.rows_above(kStrongTrcdThreshold).size();
      std::cout << "profiled " << std::uint64_t{table.banks()} * table.rows_per_bank() << " rows, " << weak
                << " weak\n";
    } else if (*sweep_cmd) {
      const ExperimentConfig base = load_config(config);
      const auto items = load_workloads(base, workloads);
      const SweepResult s = sweep(items, baseline.empty() ? base.sweep_baseline : baseline, jobs);
      if (!out.empty()) write_file(out, report_text(to_json(s)));
      if (csv.empty()) {
        write_sweep_csv(std::cout, s);
      } else {
        std::ofstream f(csv);
        if (!f) throw ConfigError("cannot write '" + csv + "'");
        write_sweep_csv(f, s);
      }
    } else if (*compare_cmd) {
      const Comparison c = compare(read_json(report_a), read_json(report_b));
      std::cout << std::fixed << std::setprecision(4);
      for (const auto& r : c.rows)
        std::cout << std::left << std::setw(24) << r.name << std::right << std::setw(14) << r.a_cycles
                  << std::setw(14) << r.b_cycles << std::setw(12) << r.delta_pct << "%" << std::setw(12)
                  << r.latency_delta_pct << "%\n";
      std::cout << "exec time delta: mean " << c.mean_abs_delta_pct << "%, max " << c.max_abs_delta_pct << "%\n"
                << "latency delta:   mean " << c.mean_abs_latency_delta_pct << "%, max "
                << c.max_abs_latency_delta_pct << "%\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
