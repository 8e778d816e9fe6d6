#include "edsim/dram_timing.hpp"

#include <bit>

#include "edsim/command_engine.hpp"

namespace edsim {

namespace {

constexpr std::array<std::string_view, kTimingParamCount> kParamNames = {
    "tRCD", "tRP", "tRAS", "tRC", "tCL", "tWR", "tCCD", "tRRD", "tRTP", "tREFI", "tREFW", "tRFC"};

struct Bound {
  TimingParam param;
  Nanos at;
};

void require_open(const BankState& s, const DramCommand& cmd) {
  if (!s.open_row) throw IllegalSequence(std::string(to_string(cmd.kind)) + " to a closed bank");
}

void require_closed(const BankState& s, const DramCommand& cmd) {
  if (s.open_row) throw IllegalSequence(std::string(to_string(cmd.kind)) + " to a bank with an open row");
}

// Per-bank lower bounds for issuing cmd. Throws IllegalSequence.
std::vector<Bound> bank_bounds(const BankState& s, const DramCommand& cmd, const DramConfig& cfg) {
  std::vector<Bound> out;
  auto after = [&](const std::optional<Nanos>& t, TimingParam p, Nanos gap) {
    if (t) out.push_back({p, *t + gap});
  };
  switch (cmd.kind) {
    case CommandKind::ACT:
      require_closed(s, cmd);
      after(s.last_pre, TimingParam::tRP, cfg.t(TimingParam::tRP));
      after(s.last_act, TimingParam::tRC, cfg.t(TimingParam::tRC));
      after(s.last_ref, TimingParam::tRFC, cfg.t(TimingParam::tRFC));
      break;
    case CommandKind::PRE:
      require_open(s, cmd);
      after(s.last_act, TimingParam::tRAS, cfg.t(TimingParam::tRAS));
      after(s.last_rd, TimingParam::tRTP, cfg.t(TimingParam::tRTP));
      after(s.last_wr, TimingParam::tWR, cfg.t(TimingParam::tCL) + cfg.burst() + cfg.t(TimingParam::tWR));
      break;
    case CommandKind::RD:
    case CommandKind::WR: {
      require_open(s, cmd);
      if (*s.open_row != cmd.addr.row) throw IllegalSequence("column command to a row that is not open");
      Nanos trcd = cfg.t(TimingParam::tRCD);
      if (cmd.override_trcd) {
        if (*cmd.override_trcd <= Nanos::zero() || *cmd.override_trcd > trcd)
          throw IllegalSequence("override tRCD outside (0, nominal]");
        trcd = *cmd.override_trcd;
      }
      after(s.last_act, TimingParam::tRCD, trcd);
      after(s.last_rd, TimingParam::tCCD, cfg.t(TimingParam::tCCD));
      after(s.last_wr, TimingParam::tCCD, cfg.t(TimingParam::tCCD));
      break;
    }
    case CommandKind::REF:
      require_closed(s, cmd);
      after(s.last_pre, TimingParam::tRP, cfg.t(TimingParam::tRP));
      after(s.last_ref, TimingParam::tRFC, cfg.t(TimingParam::tRFC));
      break;
  }
  return out;
}

std::vector<Bound> rank_bounds(const RankState& r, const DramCommand& cmd, const DramConfig& cfg) {
  if (cmd.kind == CommandKind::REF) {
    std::vector<Bound> out;
    for (const auto& b : r.banks) {
      auto more = bank_bounds(b, cmd, cfg);
      out.insert(out.end(), more.begin(), more.end());
    }
    return out;
  }
  if (!in_bounds(cmd.addr, cfg)) throw IllegalSequence("command addressed outside the device");
  auto out = bank_bounds(r.bank(cfg, cmd.addr), cmd, cfg);
  if (cmd.kind == CommandKind::ACT && r.last_act_any)
    out.push_back({TimingParam::tRRD, *r.last_act_any + cfg.t(TimingParam::tRRD)});
  if ((cmd.kind == CommandKind::RD || cmd.kind == CommandKind::WR) && r.last_col_any)
    out.push_back({TimingParam::tCCD, *r.last_col_any + cfg.t(TimingParam::tCCD)});
  return out;
}

Nanos latest(const std::vector<Bound>& bounds, Nanos now) {
  Nanos t = now;
  for (const auto& b : bounds) t = max(t, b.at);
  return t;
}

bool pow2(std::uint32_t v) { return v != 0 && std::has_single_bit(v); }

}  // namespace

std::string_view to_string(TimingParam p) { return kParamNames[static_cast<std::size_t>(p)]; }

std::optional<TimingParam> timing_param_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kParamNames.size(); ++i)
    if (kParamNames[i] == name) return static_cast<TimingParam>(i);
  return std::nullopt;
}

std::string_view to_string(CommandKind k) {
  switch (k) {
    case CommandKind::ACT: return "ACT";
    case CommandKind::PRE: return "PRE";
    case CommandKind::RD: return "RD";
    case CommandKind::WR: return "WR";
    case CommandKind::REF: return "REF";
  }
  return "?";
}

DramConfig DramConfig::ddr4_1333() {
  DramConfig c;
  using P = TimingParam;
  c.set(P::tRCD, Nanos::from_ns(13.5));
  c.set(P::tRP, Nanos::from_ns(13.5));
  c.set(P::tRAS, Nanos::from_ns(32.5));
  c.set(P::tRC, Nanos::from_ns(46.5));
  c.set(P::tCL, Nanos::from_ns(13.5));
  c.set(P::tWR, Nanos::from_ns(15.0));
  c.set(P::tCCD, Nanos::from_ns(6.0));
  c.set(P::tRRD, Nanos::from_ns(6.0));
  c.set(P::tRTP, Nanos::from_ns(7.5));
  c.set(P::tREFI, Nanos::from_ns(7800.0));
  c.set(P::tREFW, Nanos::from_ns(64'000'000.0));
  c.set(P::tRFC, Nanos::from_ns(350.0));
  return c;
}

Nanos DramConfig::tCK() const {
  return Nanos::from_ps((2'000'000LL + data_rate / 2) / static_cast<std::int64_t>(data_rate));
}

Nanos DramConfig::burst() const { return tCK() * (burst_length / 2); }

void DramConfig::validate() const {
  const std::pair<const char*, std::uint32_t> counts[] = {
      {"channels", channels},       {"ranks", ranks},
      {"bank_groups", bank_groups}, {"banks_per_group", banks_per_group},
      {"rows_per_bank", rows_per_bank}, {"columns_per_row", columns_per_row},
      {"bus_bytes", bus_bytes},     {"cache_line_bytes", cache_line_bytes},
      {"rows_per_refresh", rows_per_refresh}};
  for (const auto& [name, v] : counts)
    if (!pow2(v)) throw ConfigError(std::string(name) + " must be a power of two >= 1");
  if (channels != 1 || ranks != 1) throw ConfigError("only a single channel and rank are modeled");
  if (data_rate == 0) throw ConfigError("data_rate must be positive");
  if (row_size_bytes() % cache_line_bytes != 0 || row_size_bytes() < cache_line_bytes)
    throw ConfigError("row size must be a multiple of the cache line size");
  for (std::size_t i = 0; i < kTimingParamCount; ++i)
    if (timing[i] <= Nanos::zero())
      throw ConfigError(std::string(kParamNames[i]) + " must be positive");
  using P = TimingParam;
  if (t(P::tRC) < t(P::tRAS) + t(P::tRP)) throw ConfigError("tRC must be >= tRAS + tRP");
  const std::int64_t refs_per_window = t(P::tREFW).ps() / t(P::tREFI).ps();
  if (refs_per_window < static_cast<std::int64_t>(rows_per_bank / rows_per_refresh))
    throw ConfigError("tREFW / tREFI cannot cover every row with the configured rows_per_refresh");
}

DramAddress address_of_flat_bank(const DramConfig& cfg, std::uint32_t flat_bank, std::uint32_t row,
                                 std::uint32_t column) {
  return {flat_bank / cfg.banks_per_group, flat_bank % cfg.banks_per_group, row, column};
}

bool in_bounds(const DramAddress& a, const DramConfig& cfg) {
  return a.bank_group < cfg.bank_groups && a.bank < cfg.banks_per_group && a.row < cfg.rows_per_bank &&
         a.column < cfg.lines_per_row();
}

BankState initial_bank_state(const DramConfig& cfg) {
  BankState s;
  s.refresh_deadline = cfg.t(TimingParam::tREFI);
  return s;
}

Nanos earliest_legal_issue(const BankState& state, const DramCommand& cmd, const DramConfig& cfg, Nanos now) {
  return latest(bank_bounds(state, cmd, cfg), now);
}

BankState apply_command(const BankState& state, const DramCommand& cmd, const DramConfig& cfg, Nanos issue) {
  BankState s = state;
  switch (cmd.kind) {
    case CommandKind::ACT:
      if (s.open_row) throw IllegalSequence("ACT to a bank with an open row");
      s.open_row = cmd.addr.row;
      s.last_act = issue;
      break;
    case CommandKind::PRE:
      if (!s.open_row) throw IllegalSequence("PRE to a closed bank");
      s.open_row.reset();
      s.last_pre = issue;
      break;
    case CommandKind::RD:
    case CommandKind::WR:
      if (!s.open_row) throw IllegalSequence("column command to a closed bank");
      if (*s.open_row != cmd.addr.row) throw IllegalSequence("column command to a row that is not open");
      (cmd.kind == CommandKind::RD ? s.last_rd : s.last_wr) = issue;
      break;
    case CommandKind::REF:
      if (s.open_row) throw IllegalSequence("REF requires every bank to be precharged");
      s.last_ref = issue;
      s.refresh_deadline += cfg.t(TimingParam::tREFI);
      break;
  }
  return s;
}

RankState::RankState(const DramConfig& cfg) : banks(cfg.total_banks(), initial_bank_state(cfg)) {}

bool RankState::all_closed() const {
  for (const auto& b : banks)
    if (b.open_row) return false;
  return true;
}

Nanos earliest_legal_issue(const RankState& rank, const DramCommand& cmd, const DramConfig& cfg, Nanos now) {
  return latest(rank_bounds(rank, cmd, cfg), now);
}

void apply_command(RankState& rank, const DramCommand& cmd, const DramConfig& cfg, Nanos issue) {
  if (cmd.kind == CommandKind::REF) {
    if (!rank.all_closed()) throw IllegalSequence("REF requires every bank to be precharged");
    for (auto& b : rank.banks) b = apply_command(b, cmd, cfg, issue);
    return;
  }
  if (!in_bounds(cmd.addr, cfg)) throw IllegalSequence("command addressed outside the device");
  auto& b = rank.bank(cfg, cmd.addr);
  b = apply_command(b, cmd, cfg, issue);
  if (cmd.kind == CommandKind::ACT) rank.last_act_any = issue;
  if (cmd.kind == CommandKind::RD || cmd.kind == CommandKind::WR) rank.last_col_any = issue;
}

std::vector<Violation> check_batch_legality(const CommandBatch& batch, const RankState& rank, const DramConfig& cfg) {
  std::vector<Violation> out;
  RankState sim = rank;
  const Nanos start = rank.now;
  for (std::size_t i = 0; i < batch.entries().size(); ++i) {
    const auto& e = batch.entries()[i];
    const Nanos t = start + e.offset;
    try {
      // Overrides steer scheduling only; legality is judged against nominal.
      DramCommand nominal = e.cmd;
      if (nominal.override_trcd) {
        if (*nominal.override_trcd <= Nanos::zero() || *nominal.override_trcd > cfg.t(TimingParam::tRCD))
          throw IllegalSequence("override tRCD outside (0, nominal]");
        nominal.override_trcd.reset();
      }
      for (const auto& b : rank_bounds(sim, nominal, cfg))
        if (b.at > t) out.push_back({i, b.param, b.at - t});
      apply_command(sim, e.cmd, cfg, t);
    } catch (const IllegalSequence&) {
      out.push_back({i, std::nullopt, Nanos::zero()});
    }
  }
  return out;
}

}  // namespace edsim
