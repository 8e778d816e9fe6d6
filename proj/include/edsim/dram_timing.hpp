#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "edsim/units.hpp"

namespace edsim {

enum class TimingParam : std::uint8_t {
  tRCD,
  tRP,
  tRAS,
  tRC,
  tCL,
  tWR,
  tCCD,
  tRRD,
  tRTP,
  tREFI,
  tREFW,
  tRFC,
};
inline constexpr std::size_t kTimingParamCount = 12;

std::string_view to_string(TimingParam p);
std::optional<TimingParam> timing_param_from_string(std::string_view name);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Geometry and timing of one DDR4 channel (single rank).
struct DramConfig {
  std::uint32_t channels = 1;
  std::uint32_t ranks = 1;
  std::uint32_t bank_groups = 4;
  std::uint32_t banks_per_group = 4;
  std::uint32_t rows_per_bank = 32768;
  std::uint32_t columns_per_row = 1024;
  std::uint32_t bus_bytes = 8;  // bytes per column access on the x64 bus
  std::uint32_t cache_line_bytes = 64;
  std::uint32_t burst_length = 8;
  std::uint32_t data_rate = 1333;  // MT/s
  std::uint32_t rows_per_refresh = 4;
  std::array<Nanos, kTimingParamCount> timing{};

  /// DDR4-1333 single channel/rank with speed-bin timing conventions.
  static DramConfig ddr4_1333();

  Nanos t(TimingParam p) const { return timing[static_cast<std::size_t>(p)]; }
  void set(TimingParam p, Nanos v) { timing[static_cast<std::size_t>(p)] = v; }

  /// Clock period, 2000/data_rate ns rounded to the picosecond.
  Nanos tCK() const;
  /// Data burst duration, burst_length/2 clocks.
  Nanos burst() const;
  std::uint32_t row_size_bytes() const { return columns_per_row * bus_bytes; }
  std::uint32_t lines_per_row() const { return row_size_bytes() / cache_line_bytes; }
  std::uint32_t total_banks() const { return bank_groups * banks_per_group; }
  std::uint64_t capacity_bytes() const {
    return static_cast<std::uint64_t>(total_banks()) * rows_per_bank * row_size_bytes();
  }

  /// Throws ConfigError describing the first broken invariant.
  void validate() const;
};

struct DramAddress {
  std::uint32_t bank_group = 0;
  std::uint32_t bank = 0;
  std::uint32_t row = 0;
  std::uint32_t column = 0;  // cache-line index within the row

  std::uint32_t flat_bank(const DramConfig& cfg) const { return bank_group * cfg.banks_per_group + bank; }
  bool operator==(const DramAddress&) const = default;
};

DramAddress address_of_flat_bank(const DramConfig& cfg, std::uint32_t flat_bank, std::uint32_t row,
                                 std::uint32_t column = 0);
bool in_bounds(const DramAddress& a, const DramConfig& cfg);

enum class CommandKind : std::uint8_t { ACT, PRE, RD, WR, REF };
std::string_view to_string(CommandKind k);
inline constexpr std::size_t kCommandKindCount = 5;

struct DramCommand {
  CommandKind kind = CommandKind::ACT;
  DramAddress addr{};
  /// Present only when a technique deliberately issues RD/WR below nominal tRCD.
  std::optional<Nanos> override_trcd;
  /// WR data, one cache line.
  std::vector<std::uint8_t> payload;

  static DramCommand act(DramAddress a) { return {CommandKind::ACT, a, std::nullopt, {}}; }
  static DramCommand pre(DramAddress a) { return {CommandKind::PRE, a, std::nullopt, {}}; }
  static DramCommand rd(DramAddress a, std::optional<Nanos> trcd = std::nullopt) {
    return {CommandKind::RD, a, trcd, {}};
  }
  static DramCommand wr(DramAddress a, std::vector<std::uint8_t> data) {
    return {CommandKind::WR, a, std::nullopt, std::move(data)};
  }
  static DramCommand ref() { return {CommandKind::REF, {}, std::nullopt, {}}; }
};

class IllegalSequence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BankState {
  std::optional<std::uint32_t> open_row;
  std::optional<Nanos> last_act;
  std::optional<Nanos> last_pre;
  std::optional<Nanos> last_rd;
  std::optional<Nanos> last_wr;
  std::optional<Nanos> last_ref;
  Nanos refresh_deadline{};

  bool operator==(const BankState&) const = default;
};

BankState initial_bank_state(const DramConfig& cfg);

/// Smallest t >= now at which `cmd` violates no per-bank timing parameter.
Nanos earliest_legal_issue(const BankState& state, const DramCommand& cmd, const DramConfig& cfg, Nanos now);

/// Stamps `cmd` into the bank state. Timing is not checked here; only
/// structurally impossible commands throw.
BankState apply_command(const BankState& state, const DramCommand& cmd, const DramConfig& cfg, Nanos issue);

/// Bank states of the rank plus the cross-bank constraints (tRRD, tCCD).
struct RankState {
  std::vector<BankState> banks;
  std::optional<Nanos> last_act_any;
  std::optional<Nanos> last_col_any;
  Nanos now{};  // device clock: no command may be issued before this

  explicit RankState(const DramConfig& cfg);
  RankState() = default;

  BankState& bank(const DramConfig& cfg, const DramAddress& a) { return banks[a.flat_bank(cfg)]; }
  const BankState& bank(const DramConfig& cfg, const DramAddress& a) const { return banks[a.flat_bank(cfg)]; }
  bool all_closed() const;
  bool operator==(const RankState&) const = default;
};

Nanos earliest_legal_issue(const RankState& rank, const DramCommand& cmd, const DramConfig& cfg, Nanos now);
void apply_command(RankState& rank, const DramCommand& cmd, const DramConfig& cfg, Nanos issue);

struct Violation {
  std::size_t index = 0;
  /// nullopt marks a structural (sequence) violation with zero deficit.
  std::optional<TimingParam> parameter;
  Nanos deficit{};

  bool operator==(const Violation&) const = default;
};

class CommandBatch;

/// Every timing parameter violated by executing `batch` from `rank.now`,
/// measured against nominal values even for RD/WR carrying a tRCD override.
std::vector<Violation> check_batch_legality(const CommandBatch& batch, const RankState& rank, const DramConfig& cfg);

}  // namespace edsim
