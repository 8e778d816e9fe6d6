#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "edsim/request.hpp"
#include "edsim/units.hpp"

namespace edsim {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Clock of the simulated platform (substrate) and the clock it emulates.
struct DomainConfig {
  std::string name = "proc";
  std::uint64_t substrate_freq_hz = 100'000'000;
  std::uint64_t target_freq_hz = 1'000'000'000;

  void validate() const;
};

enum class SchedModelKind : std::uint8_t { TargetFixed, SubstrateMeasured, Zero };

/// How the controller's own work is charged to emulated time.
struct SchedLatencyModel {
  SchedModelKind kind = SchedModelKind::TargetFixed;
  Cycles fixed_cycles = 0;

  static SchedLatencyModel target_fixed(Cycles k) { return {SchedModelKind::TargetFixed, k}; }
  static SchedLatencyModel substrate_measured() { return {SchedModelKind::SubstrateMeasured, 0}; }
  static SchedLatencyModel zero() { return {SchedModelKind::Zero, 0}; }
  /// "target-fixed:K", "substrate-measured" or "zero".
  static SchedLatencyModel parse(const std::string& text);
  std::string str() const;

  /// Target cycles charged for one scheduling decision that took
  /// `sched_substrate_cycles` on the substrate.
  Cycles sched_target_cycles(std::uint64_t sched_substrate_cycles, const DomainConfig& d) const;
  /// Target cycles charged for other controller work (transfer, staging,
  /// writeback); nonzero only when measured on the substrate.
  Cycles overhead_target_cycles(std::uint64_t substrate_cycles, const DomainConfig& d) const;
  bool operator==(const SchedLatencyModel&) const = default;
};

/// Substrate cycles the software controller spends per action.
struct SubstrateCosts {
  std::uint64_t request_transfer = 200;
  std::uint64_t scheduling = 300;
  std::uint64_t stage_per_command = 10;
  std::uint64_t response_writeback = 100;
  bool operator==(const SubstrateCosts&) const = default;
};

/// Global, processor and controller counters plus the critical-mode lock.
///
/// Processor cycle c executes while proc moves from c to c+1. Outside
/// critical mode proc and mc advance together; inside it proc may only run
/// while it is behind mc.
class TimeScaleState {
 public:
  Cycles global() const { return global_; }
  Cycles proc() const { return proc_; }
  Cycles mc() const { return mc_; }
  bool critical() const { return critical_; }
  bool proc_gated() const { return gated_; }

  /// Stamps the current processor cycle; outside critical mode the
  /// processor is gated until the controller takes over.
  void tag_request(MemRequest& req);
  void enter_critical();
  /// Throws ProtocolError if `unresolved` (requests pending or responses
  /// not yet released). A lagging proc catches up afterwards on its own.
  void exit_critical(bool unresolved);

  /// Advances mc by the device time at the target clock (ceil) plus the
  /// modeled scheduling latency. Returns the increment.
  Cycles account_mc_work(Nanos device_elapsed, std::uint64_t sched_substrate_cycles, const SchedLatencyModel& model,
                         const DomainConfig& dom);
  /// Adds already-converted target cycles to mc (critical mode only).
  void charge_mc(Cycles target_cycles);

  bool releasable(Cycles release_at) const { return proc_ >= release_at; }
  bool proc_can_advance() const;

  /// One substrate tick. `proc_advanced` reports whether the processor
  /// executed cycle proc() during this tick; it must only be true when
  /// proc_can_advance() held at the start of the tick.
  void commit_tick(bool proc_advanced);
  /// Tick without a processor model attached: advances proc whenever allowed.
  bool step_global();
  /// Bulk-advance global while the processor is frozen.
  void idle_global(std::uint64_t n);
  /// Same as n ticks of commit_tick(true); the processor must be allowed to
  /// advance for all of them.
  void advance_proc(Cycles n);

  void set_trace(std::ostream* out);

 private:
  void trace_row();

  Cycles global_ = 0;
  Cycles proc_ = 0;
  Cycles mc_ = 0;
  bool critical_ = false;
  bool gated_ = false;
  std::ostream* trace_ = nullptr;
};

/// The response if its release tag has been reached, otherwise nullopt.
std::optional<MemResponse> release_response(const TimeScaleState& state, const MemResponse& resp);

}  // namespace edsim
