#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <vector>

#include "edsim/dram_device.hpp"
#include "edsim/dram_timing.hpp"

namespace edsim {

class BatchOrderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BatchEntry {
  DramCommand cmd;
  Nanos offset;  // from batch start
};

/// Timing-preserving command batch. Offsets are strictly increasing.
class CommandBatch {
 public:
  CommandBatch() = default;
  explicit CommandBatch(bool strict) : strict_(strict) {}

  const std::vector<BatchEntry>& entries() const { return entries_; }
  bool strict() const { return strict_; }
  void set_strict(bool s) { strict_ = s; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  Nanos last_offset() const { return entries_.empty() ? Nanos::zero() : entries_.back().offset; }

  /// Appends at an absolute offset; throws BatchOrderError unless it is
  /// strictly after the previous one.
  void push(DramCommand cmd, Nanos offset);
  std::size_t read_count() const;

 private:
  std::vector<BatchEntry> entries_;
  bool strict_ = false;
};

class BatchBuilder {
 public:
  explicit BatchBuilder(bool strict = false) : batch_(strict) {}

  /// Appends cmd `delay` after the previous command (after 0 for the first).
  BatchBuilder& stage(DramCommand cmd, Nanos delay);
  const CommandBatch& batch() const { return batch_; }
  bool empty() const { return batch_.empty(); }
  /// Hands over the staged batch and leaves the builder empty for reuse.
  CommandBatch take();

 private:
  CommandBatch batch_;
};

struct ExecutionResult {
  std::vector<std::vector<std::uint8_t>> readback;  // one line per RD, in order
  Nanos elapsed;
  std::vector<Violation> violations;
};

class StrictViolation : public std::runtime_error {
 public:
  explicit StrictViolation(std::vector<Violation> v);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// Time from issue until the command's effect completes.
Nanos completion_latency(CommandKind kind, const DramConfig& cfg);

struct RowCloneCandidate {
  std::uint32_t flat_bank;
  std::uint32_t src_row;
  std::uint32_t dst_row;
  std::size_t second_act;  // entry index of the copying ACT

  bool operator==(const RowCloneCandidate&) const = default;
};

/// ACT→PRE→ACT triples on one bank whose PRE violates tRAS or whose second
/// ACT violates tRP, in batch order.
std::vector<RowCloneCandidate> rowclone_detect(const CommandBatch& batch, const DramConfig& cfg);

/// Observes every RD with the tRCD actually applied (issue minus ACT).
using ReadObserver = std::function<void(const DramAddress&, Nanos applied_trcd, AccessOutcome)>;

struct EngineStats {
  std::uint64_t batches = 0;
  std::uint64_t commands[kCommandKindCount] = {};
  std::uint64_t corrupt_reads = 0;
  std::uint64_t clone_success = 0;
  std::uint64_t clone_fail = 0;
  Nanos busy{};
};

/// Executes batches against the timing model and the modeled chip.
class CommandEngine {
 public:
  CommandEngine(DramConfig cfg, std::shared_ptr<const ChipProfile> profile, std::uint64_t fill_seed = 0,
                std::uint64_t corruption_seed = 0);

  /// Runs the batch starting at the device clock and advances the clock by
  /// the elapsed time. Strict batches with any violation, and any batch with
  /// a structurally impossible command, leave all state untouched.
  ExecutionResult flush(const CommandBatch& batch);

  Nanos now() const { return rank_.now; }
  /// Idles the device until t (no-op if already past).
  void advance_to(Nanos t) { rank_.now = max(rank_.now, t); }

  const DramConfig& config() const { return cfg_; }
  const RankState& rank() const { return rank_; }
  const ChipProfile* profile() const { return profile_.get(); }
  RowData& data() { return data_; }
  const RowData& data() const { return data_; }
  const EngineStats& stats() const { return stats_; }
  void set_read_observer(ReadObserver o) { observer_ = std::move(o); }

 private:
  DramConfig cfg_;
  std::shared_ptr<const ChipProfile> profile_;
  RowData data_;
  RankState rank_;
  std::uint64_t corruption_seed_;
  std::uint64_t corruption_events_ = 0;
  EngineStats stats_;
  ReadObserver observer_;
};

/// One line per command: `offset_ns KIND bg bank row col [trcd_override]`.
void write_batch_trace(std::ostream& out, const CommandBatch& batch);
/// Inverse of write_batch_trace; WR payloads come back zero-filled.
CommandBatch read_batch_trace(std::istream& in, std::uint32_t line_bytes = 64);

}  // namespace edsim
