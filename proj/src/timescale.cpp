#include "edsim/timescale.hpp"

#include <ostream>

#include "edsim/dram_timing.hpp"

namespace edsim {

std::string_view to_string(RequestKind k) {
  switch (k) {
    case RequestKind::Read: return "Read";
    case RequestKind::Write: return "Write";
    case RequestKind::Flush: return "Flush";
    case RequestKind::Profiling: return "Profiling";
    case RequestKind::RowCloneCopy: return "RowCloneCopy";
    case RequestKind::RowCloneInit: return "RowCloneInit";
  }
  return "?";
}

std::string_view to_string(ResponseStatus s) {
  switch (s) {
    case ResponseStatus::OK: return "OK";
    case ResponseStatus::ProfilingPass: return "ProfilingPass";
    case ResponseStatus::ProfilingFail: return "ProfilingFail";
    case ResponseStatus::FallbackUsed: return "FallbackUsed";
  }
  return "?";
}

void DomainConfig::validate() const {
  if (substrate_freq_hz == 0 || target_freq_hz == 0)
    throw ConfigError("domain '" + name + "': frequencies must be positive");
}

SchedLatencyModel SchedLatencyModel::parse(const std::string& text) {
  if (text == "zero") return zero();
  if (text == "substrate-measured") return substrate_measured();
  const std::string prefix = "target-fixed:";
  if (text.rfind(prefix, 0) == 0) {
    const auto num = text.substr(prefix.size());
    if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("bad target-fixed cycle count in '" + text + "'");
    return target_fixed(std::stoull(num));
  }
  throw ConfigError("unknown scheduling latency model '" + text + "'");
}

std::string SchedLatencyModel::str() const {
  switch (kind) {
    case SchedModelKind::TargetFixed: return "target-fixed:" + std::to_string(fixed_cycles);
    case SchedModelKind::SubstrateMeasured: return "substrate-measured";
    case SchedModelKind::Zero: return "zero";
  }
  return "?";
}

namespace {

Cycles scale_ceil(std::uint64_t substrate_cycles, const DomainConfig& d) {
  const unsigned __int128 num = static_cast<unsigned __int128>(substrate_cycles) * d.target_freq_hz;
  return static_cast<Cycles>((num + d.substrate_freq_hz - 1) / d.substrate_freq_hz);
}

}  // namespace

Cycles SchedLatencyModel::sched_target_cycles(std::uint64_t sched_substrate_cycles, const DomainConfig& d) const {
  switch (kind) {
    case SchedModelKind::TargetFixed: return sched_substrate_cycles > 0 ? fixed_cycles : 0;
    case SchedModelKind::SubstrateMeasured: return scale_ceil(sched_substrate_cycles, d);
    case SchedModelKind::Zero: return 0;
  }
  return 0;
}

Cycles SchedLatencyModel::overhead_target_cycles(std::uint64_t substrate_cycles, const DomainConfig& d) const {
  return kind == SchedModelKind::SubstrateMeasured ? scale_ceil(substrate_cycles, d) : 0;
}

void TimeScaleState::tag_request(MemRequest& req) {
  req.tag_cycle = proc_;
  if (!critical_) gated_ = true;
}

void TimeScaleState::enter_critical() {
  critical_ = true;
  gated_ = false;
}

void TimeScaleState::exit_critical(bool unresolved) {
  if (!critical_) return;
  if (unresolved) throw ProtocolError("exit_critical with unresolved requests or unreleased responses");
  critical_ = false;
}

Cycles TimeScaleState::account_mc_work(Nanos device_elapsed, std::uint64_t sched_substrate_cycles,
                                       const SchedLatencyModel& model, const DomainConfig& dom) {
  if (!critical_) throw ProtocolError("account_mc_work outside critical mode");
  const Cycles delta =
      ns_to_cycles_ceil(device_elapsed, dom.target_freq_hz) + model.sched_target_cycles(sched_substrate_cycles, dom);
  mc_ += delta;
  return delta;
}

void TimeScaleState::charge_mc(Cycles target_cycles) {
  if (!critical_) throw ProtocolError("charge_mc outside critical mode");
  mc_ += target_cycles;
}

bool TimeScaleState::proc_can_advance() const {
  if (critical_) return proc_ < mc_;
  return !gated_;
}

void TimeScaleState::commit_tick(bool proc_advanced) {
  ++global_;
  if (proc_advanced) {
    if (!critical_ && proc_ == mc_) ++mc_;
    ++proc_;
  }
  if (critical_ && proc_ > mc_) throw ProtocolError("processor counter overtook controller in critical mode");
  trace_row();
}

bool TimeScaleState::step_global() {
  const bool adv = proc_can_advance();
  commit_tick(adv);
  return adv;
}

void TimeScaleState::idle_global(std::uint64_t n) {
  if (n == 0) return;
  if (proc_can_advance()) throw ProtocolError("idle_global while the processor may advance");
  global_ += n;
  trace_row();
}

void TimeScaleState::advance_proc(Cycles n) {
  if (trace_) {
    for (Cycles i = 0; i < n; ++i) {
      if (!proc_can_advance()) throw ProtocolError("advance_proc past the processor's limit");
      commit_tick(true);
    }
    return;
  }
  if (critical_ ? proc_ + n > mc_ : gated_) throw ProtocolError("advance_proc past the processor's limit");
  global_ += n;
  proc_ += n;
  if (!critical_ && proc_ > mc_) mc_ = proc_;
}

void TimeScaleState::set_trace(std::ostream* out) {
  trace_ = out;
  if (trace_) *trace_ << "global,proc,mc,critical\n";
}

void TimeScaleState::trace_row() {
  if (trace_) *trace_ << global_ << ',' << proc_ << ',' << mc_ << ',' << (critical_ ? 1 : 0) << '\n';
}

std::optional<MemResponse> release_response(const TimeScaleState& state, const MemResponse& resp) {
  if (!state.releasable(resp.release_at)) return std::nullopt;
  return resp;
}

}  // namespace edsim
