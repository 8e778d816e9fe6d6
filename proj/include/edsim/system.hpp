#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "edsim/controller.hpp"
#include "edsim/frontend.hpp"
#include "edsim/timescale.hpp"

namespace edsim {

/// TimeScaled: substrate clock emulating the target clock.
/// NoTimeScale: everything runs at the substrate clock; the controller keeps
/// its latency in wall time.
/// Reference: an ideal target-clock system with a fixed-latency controller.
enum class SystemMode : std::uint8_t { TimeScaled, NoTimeScale, Reference };
std::string_view to_string(SystemMode m);
SystemMode mode_from_string(const std::string& s);

struct SystemConfig {
  DramConfig dram = DramConfig::ddr4_1333();
  ControllerConfig controller;
  DomainConfig domain;
  SchedLatencyModel sched = SchedLatencyModel::target_fixed(20);
  SubstrateCosts costs;
  CoreConfig core;
  std::size_t request_fifo_depth = 16;
  std::size_t response_fifo_depth = 16;
  std::uint64_t fill_seed = 0;
  std::uint64_t corruption_seed = 0;
  /// Safety limit on the global counter.
  Cycles max_cycles = Cycles{1} << 40;
};

struct RequestRecord {
  std::uint64_t id = 0;
  RequestKind kind = RequestKind::Read;
  std::uint32_t core = 0;
  bool posted = false;
  bool prefetch = false;
  Cycles tag = 0;
  Cycles release = 0;  // response release, or completion for posted writes
  bool operator==(const RequestRecord&) const = default;
};

struct SystemResult {
  Cycles emulated_cycles = 0;   // last core's finishing cycle
  Cycles substrate_cycles = 0;  // global counter (equals emulated cycles in reference mode)
  std::uint64_t decisions = 0;
  std::vector<RequestRecord> requests;  // in issue order
  std::vector<CoreStats> cores;
};

class SimSystem {
 public:
  SimSystem(SystemMode mode, const SystemConfig& cfg, std::shared_ptr<const ChipProfile> profile,
            std::vector<Trace> traces);

  SystemResult run();

  SystemMode mode() const { return mode_; }
  /// Clock and controller charging actually in effect for the mode.
  const DomainConfig& domain() const { return dom_; }
  const SchedLatencyModel& sched() const { return sched_; }
  MemoryController& controller() { return ctl_; }
  const MemoryController& controller() const { return ctl_; }
  std::vector<Core>& cores() { return cores_; }
  const TimeScaleState& timescale() const { return ts_; }
  void set_trace(std::ostream* out) { ts_.set_trace(out); }

  /// Architectural contents of one line: newest cached copy, else DRAM.
  std::vector<std::uint8_t> read_line(std::uint64_t line_addr) const;

 private:
  SystemResult run_timescaled();
  SystemResult run_reference();
  void smc_step();
  void apply_decision();
  void fast_forward();
  void step_cores(Cycles c, const RequestSink& sink);
  void deliver_released(Cycles now);
  void record_issue(const MemRequest& r);
  bool drained() const;
  SystemResult finish();

  SystemMode mode_;
  SystemConfig cfg_;
  DomainConfig dom_;
  SchedLatencyModel sched_;
  MemoryController ctl_;
  std::vector<Core> cores_;
  TimeScaleState ts_;
  HwFifo<MemRequest> req_fifo_;
  HwFifo<MemResponse> resp_fifo_;
  std::vector<RequestRecord> records_;
  std::unordered_map<std::uint64_t, std::size_t> record_index_;
  std::uint64_t decisions_ = 0;

  // Software controller work in flight on the substrate.
  struct Decision {
    ServeResult result;
    std::uint64_t transferred = 0;
  };
  std::optional<Decision> pending_;
  std::uint64_t busy_ = 0;
};

}  // namespace edsim
