#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "edsim/system.hpp"

namespace edsim {

inline constexpr int kReportSchemaVersion = 1;

enum class WorkloadKind : std::uint8_t { Empty, Chase, Copy, Init, Trace };
std::string_view to_string(WorkloadKind k);

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::Chase;
  std::uint64_t size = 64 * 1024;  // working set or buffer bytes
  std::uint64_t stride = 64;       // chase
  std::uint64_t loads = 2000;      // chase, measured loads
  std::uint64_t base = 0;          // chase placement
  CopyVariant variant = CopyVariant::CpuLdSt;
  CoherenceSetting coherence = CoherenceSetting::NoFlush;
  std::uint64_t pattern = 0x5A5A5A5A5A5A5A5AULL;  // init
  std::vector<std::string> traces;                 // one path per core
  bool operator==(const WorkloadSpec&) const = default;
};

struct ProfileSpec {
  std::string path;  // chip profile file; generated when empty
  double strong_fraction = 0.845;
  double clonable_rate = 1.0;
  std::uint32_t subarray_rows = 512;
  std::optional<std::uint64_t> seed;  // defaults to a value derived from the run seed
  std::vector<Nanos> ladder = default_trcd_ladder();
  bool operator==(const ProfileSpec&) const = default;
};

struct TechniqueSpec {
  bool rowclone = false;
  RowCloneConfig rowclone_cfg;
  bool trcd_reduction = false;
  Nanos reduced_trcd = Nanos::from_ns(9.0);
  std::string trcd_heatmap;  // per-row tRCD table; the chip profile's own values when empty
  std::uint32_t filter_bits_per_row = 16;
  std::uint32_t filter_k = 4;
  bool operator==(const TechniqueSpec&) const = default;
};

struct ExperimentConfig {
  std::string name = "run";
  SystemMode mode = SystemMode::TimeScaled;
  std::uint64_t seed = 1;
  std::uint32_t cores = 1;
  SystemConfig system;
  ProfileSpec profile;
  TechniqueSpec techniques;
  WorkloadSpec workload;
  std::string sweep_baseline;

  void validate() const;
};

/// Reads the sectioned key=value format; relative paths resolve against
/// `base_dir`. Unknown sections or keys are ConfigErrors.
ExperimentConfig parse_config(std::istream& in, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);
/// Applies the sections present in `in` on top of `cfg`.
void apply_config(ExperimentConfig& cfg, std::istream& in, const std::string& base_dir = ".");
/// Canonical text of every field, in a fixed order.
std::string canonical_config(const ExperimentConfig& cfg);
/// SHA-256 of the canonical text, lowercase hex.
std::string config_digest(const ExperimentConfig& cfg);
std::string sha256_hex(std::string_view bytes);

/// The modeled chip a config describes (loaded or generated).
std::shared_ptr<const ChipProfile> build_profile(const ExperimentConfig& cfg);
/// Per-row tRCD measured by profiling the chip over the configured ladder.
RowTrcdTable profile_rows(const ExperimentConfig& cfg, std::shared_ptr<const ChipProfile> profile);

struct RunReport {
  nlohmann::json json;
  double wall_seconds = 0;  // text output only; never part of the JSON

  Cycles emulated_cycles() const { return json.at("cycles").at("emulated").get<Cycles>(); }
  /// Marked-region cycles of core 0 when present, else emulated cycles.
  Cycles measured_cycles() const { return json.at("cycles").at("measured").get<Cycles>(); }
  double mean_latency() const { return json.at("requests").at("latency").at("mean").get<double>(); }
};

RunReport run(const ExperimentConfig& cfg);
/// Same run against an already built chip profile.
RunReport run(const ExperimentConfig& cfg, std::shared_ptr<const ChipProfile> profile);
/// Stable JSON text (sorted keys, two-space indent, trailing newline).
std::string report_text(const nlohmann::json& j);
void write_report_summary(std::ostream& out, const RunReport& r);

struct CompareRow {
  std::string name;
  Cycles a_cycles = 0;
  Cycles b_cycles = 0;
  double delta_pct = 0;
  double latency_delta_pct = 0;
};
struct Comparison {
  std::vector<CompareRow> rows;
  double mean_abs_delta_pct = 0;
  double max_abs_delta_pct = 0;
  double mean_abs_latency_delta_pct = 0;
  double max_abs_latency_delta_pct = 0;
};
/// Percentage deltas of b against a. Inputs are single reports or sweep
/// results; sweep runs are matched by name.
Comparison compare(const nlohmann::json& a, const nlohmann::json& b);
nlohmann::json to_json(const Comparison& c);

/// A named variant of the base config.
struct SweepItem {
  std::string name;
  ExperimentConfig cfg;
};
/// Loads every *.ini in `dir` (sorted by file name) on top of `base`; the
/// file stem names the item.
std::vector<SweepItem> load_workloads(const ExperimentConfig& base, const std::string& dir);

struct SweepResult {
  std::string baseline;
  std::vector<std::pair<std::string, RunReport>> runs;  // input order
  std::vector<std::pair<std::string, double>> speedups;  // baseline / variant measured cycles
};
/// Runs items in parallel (one simulation per worker) and merges in input
/// order. ConfigError if `baseline` names no item.
SweepResult sweep(const std::vector<SweepItem>& items, const std::string& baseline, unsigned workers = 0);
nlohmann::json to_json(const SweepResult& s);
void write_sweep_csv(std::ostream& out, const SweepResult& s);

}  // namespace edsim
