#include "edsim/system.hpp"

#include <algorithm>
#include <limits>

namespace edsim {

namespace {

constexpr Cycles kNever = std::numeric_limits<Cycles>::max();

}  // namespace

std::string_view to_string(SystemMode m) {
  switch (m) {
    case SystemMode::TimeScaled: return "timescaled";
    case SystemMode::NoTimeScale: return "notimescale";
    case SystemMode::Reference: return "reference";
  }
  return "?";
}

SystemMode mode_from_string(const std::string& s) {
  if (s == "timescaled") return SystemMode::TimeScaled;
  if (s == "notimescale") return SystemMode::NoTimeScale;
  if (s == "reference") return SystemMode::Reference;
  throw ConfigError("unknown mode '" + s + "'");
}

SimSystem::SimSystem(SystemMode mode, const SystemConfig& cfg, std::shared_ptr<const ChipProfile> profile,
                     std::vector<Trace> traces)
    : mode_(mode),
      cfg_(cfg),
      dom_(cfg.domain),
      sched_(cfg.sched),
      ctl_(cfg.dram, cfg.controller, std::move(profile), cfg.fill_seed, cfg.corruption_seed),
      req_fifo_(cfg.request_fifo_depth),
      resp_fifo_(cfg.response_fifo_depth) {
  dom_.validate();
  switch (mode_) {
    case SystemMode::TimeScaled: break;
    case SystemMode::NoTimeScale:
      // A fixed controller latency keeps its wall time at the slower clock.
      if (sched_.kind == SchedModelKind::TargetFixed)
        sched_.fixed_cycles = (sched_.fixed_cycles * dom_.substrate_freq_hz + dom_.target_freq_hz - 1) /
                              dom_.target_freq_hz;
      dom_.target_freq_hz = dom_.substrate_freq_hz;
      break;
    case SystemMode::Reference:
      sched_ = SchedLatencyModel::target_fixed(sched_.kind == SchedModelKind::TargetFixed ? sched_.fixed_cycles : 0);
      break;
  }
  CoreConfig cc = cfg.core;
  cc.target_freq_hz = dom_.target_freq_hz;
  cc.validate();
  if (cc.l1d.line_bytes != cfg.dram.cache_line_bytes) throw ConfigError("cache line size differs from DRAM line size");
  for (std::size_t i = 0; i < traces.size(); ++i)
    cores_.emplace_back(static_cast<std::uint32_t>(i), cc, std::move(traces[i]), std::uint64_t{i} << 48);
}

void SimSystem::record_issue(const MemRequest& r) {
  record_index_[r.id] = records_.size();
  records_.push_back({r.id, r.kind, r.core, r.posted, r.prefetch, r.tag_cycle, 0});
}

void SimSystem::step_cores(Cycles c, const RequestSink& sink) {
  const std::size_t n = cores_.size();
  for (std::size_t i = 0; i < n; ++i) cores_[(c + i) % n].step(c, sink);
}

void SimSystem::deliver_released(Cycles now) {
  while (!resp_fifo_.empty() && resp_fifo_.items().front().release_at <= now) {
    auto r = *resp_fifo_.pop();
    records_[record_index_.at(r.request_id)].release = now;
    cores_.at(r.core).deliver(r, now);
  }
}

bool SimSystem::drained() const {
  return std::all_of(cores_.begin(), cores_.end(), [](const Core& c) { return c.done(); }) && req_fifo_.empty() &&
         ctl_.idle() && resp_fifo_.empty() && !pending_;
}

SystemResult SimSystem::finish() {
  SystemResult out;
  for (const auto& c : cores_) {
    out.emulated_cycles = std::max(out.emulated_cycles, c.stats().finished_at.value_or(0));
    out.cores.push_back(c.stats());
  }
  out.decisions = decisions_;
  out.requests = records_;
  return out;
}

SystemResult SimSystem::run() { return mode_ == SystemMode::Reference ? run_reference() : run_timescaled(); }

// --- time-scaled ------------------------------------------------------------

SystemResult SimSystem::run_timescaled() {
  const RequestSink sink = [this](MemRequest& r) {
    if (req_fifo_.full()) return false;
    ts_.tag_request(r);
    record_issue(r);
    req_fifo_.push(r);
    return true;
  };
  while (!drained()) {
    if (ts_.global() > cfg_.max_cycles) throw ProtocolError("simulation exceeded the cycle limit");
    deliver_released(ts_.proc());
    smc_step();
    const bool adv = ts_.proc_can_advance();
    if (adv) step_cores(ts_.proc(), sink);
    ts_.commit_tick(adv);
    fast_forward();
  }
  auto out = finish();
  out.substrate_cycles = ts_.global();
  return out;
}

void SimSystem::smc_step() {
  if (busy_ > 0) {
    if (--busy_ == 0) apply_decision();
    return;
  }
  if (!ts_.critical()) {
    if (req_fifo_.empty()) return;
    ts_.enter_critical();
  }
  // Decisions only once the processor has caught up, so every request it
  // could have issued before this point is visible.
  if (ts_.proc() != ts_.mc()) return;
  if (req_fifo_.empty() && ctl_.idle()) {
    set_scheduling_state(ts_, false, !resp_fifo_.empty());
    return;
  }
  if (resp_fifo_.full()) return;
  Decision d;
  while (auto r = get_request(req_fifo_)) {
    ctl_.add(std::move(*r));
    ++d.transferred;
  }
  const auto& costs = cfg_.costs;
  const Cycles start = ts_.mc() + sched_.overhead_target_cycles(d.transferred * costs.request_transfer, dom_) +
                       sched_.sched_target_cycles(costs.scheduling, dom_);
  d.result = *ctl_.serve_one(cycles_to_ns(start, dom_.target_freq_hz));
  ++decisions_;
  busy_ = d.transferred * costs.request_transfer + costs.scheduling + d.result.commands * costs.stage_per_command +
          d.result.responses.size() * costs.response_writeback;
  pending_ = std::move(d);
  if (busy_ == 0) apply_decision();
}

void SimSystem::apply_decision() {
  Decision d = std::move(*pending_);
  pending_.reset();
  const auto& costs = cfg_.costs;
  ts_.charge_mc(sched_.overhead_target_cycles(d.transferred * costs.request_transfer, dom_));
  ts_.account_mc_work(d.result.elapsed, costs.scheduling, sched_, dom_);
  // Write-back of the response is charged before the release tag is taken.
  ts_.charge_mc(sched_.overhead_target_cycles(
      d.result.commands * costs.stage_per_command + d.result.responses.size() * costs.response_writeback, dom_));
  const Cycles release = ts_.mc();
  if (d.result.responses.empty()) records_[record_index_.at(d.result.request_id)].release = release;
  for (auto& r : d.result.responses) {
    r.release_at = release;
    resp_fifo_.push(std::move(r));
  }
}

void SimSystem::fast_forward() {
  if (busy_ > 0) {
    if (busy_ > 1 && !ts_.proc_can_advance()) {
      ts_.idle_global(busy_ - 1);
      busy_ = 1;
    }
    return;
  }
  if (!ts_.proc_can_advance() || (!ts_.critical() && !req_fifo_.empty())) return;
  const Cycles proc = ts_.proc();
  Cycles target = ts_.critical() ? ts_.mc() : kNever;
  if (!resp_fifo_.empty()) target = std::min(target, resp_fifo_.items().front().release_at);
  for (const auto& c : cores_)
    if (!c.done() && !c.waiting_on_memory()) target = std::min(target, std::max(c.busy_until(), proc));
  if (target == kNever || target <= proc) return;
  ts_.advance_proc(target - proc);
}

// --- reference --------------------------------------------------------------

SystemResult SimSystem::run_reference() {
  Cycles c = 0;
  Cycles busy_until = 0;
  const Cycles k = sched_.fixed_cycles;
  const RequestSink sink = [&](MemRequest& r) {
    if (req_fifo_.full()) return false;
    r.tag_cycle = c;
    record_issue(r);
    req_fifo_.push(r);
    return true;
  };
  while (!drained() || c < busy_until) {
    if (c > cfg_.max_cycles) throw ProtocolError("simulation exceeded the cycle limit");
    deliver_released(c);
    if (c >= busy_until && (!req_fifo_.empty() || !ctl_.idle())) {
      while (auto r = get_request(req_fifo_)) ctl_.add(std::move(*r));
      auto res = *ctl_.serve_one(cycles_to_ns(c + k, dom_.target_freq_hz));
      ++decisions_;
      busy_until = c + k + ns_to_cycles_ceil(res.elapsed, dom_.target_freq_hz);
      if (res.responses.empty()) records_[record_index_.at(res.request_id)].release = busy_until;
      for (auto& r : res.responses) {
        r.release_at = busy_until;
        resp_fifo_.push(std::move(r));
      }
    }
    step_cores(c, sink);
    ++c;
    Cycles next = kNever;
    if (!resp_fifo_.empty()) next = resp_fifo_.items().front().release_at;
    if (!req_fifo_.empty() || !ctl_.idle()) next = std::min(next, std::max(busy_until, c));
    for (const auto& core : cores_)
      if (!core.done() && !core.waiting_on_memory()) next = std::min(next, std::max(core.busy_until(), c));
    if (next == kNever) next = std::max(busy_until, c);
    c = std::max(c, next);
  }
  auto out = finish();
  out.substrate_cycles = c;
  return out;
}

std::vector<std::uint8_t> SimSystem::read_line(std::uint64_t line_addr) const {
  for (const auto& core : cores_)
    if (auto d = core.caches().read_line(line_addr)) return *d;
  return ctl_.read_backing(line_addr);
}

}  // namespace edsim
