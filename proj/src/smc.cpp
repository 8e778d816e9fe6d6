#include "edsim/smc.hpp"

namespace edsim {

std::string_view to_string(MapScheme s) { return s == MapScheme::RowBankCol ? "RowBankCol" : "BankRowCol"; }

MapScheme map_scheme_from_string(const std::string& s) {
  if (s == "RowBankCol") return MapScheme::RowBankCol;
  if (s == "BankRowCol") return MapScheme::BankRowCol;
  throw ConfigError("unknown address map scheme '" + s + "'");
}

AddressMap::AddressMap(const DramConfig& cfg, MapScheme scheme)
    : scheme_(scheme),
      line_(cfg.cache_line_bytes),
      lines_per_row_(cfg.lines_per_row()),
      row_size_(cfg.row_size_bytes()),
      bank_groups_(cfg.bank_groups),
      banks_per_group_(cfg.banks_per_group),
      banks_(cfg.total_banks()),
      rows_(cfg.rows_per_bank),
      capacity_(cfg.capacity_bytes()) {}

DramAddress AddressMap::map(std::uint64_t phys) const {
  if (phys >= capacity_) throw OutOfRange("physical address beyond capacity");
  const std::uint64_t chunk = phys / row_size_;
  const auto col = static_cast<std::uint32_t>((phys % row_size_) / line_);
  std::uint32_t bank_index, row;
  if (scheme_ == MapScheme::RowBankCol) {
    bank_index = static_cast<std::uint32_t>(chunk % banks_);
    row = static_cast<std::uint32_t>(chunk / banks_);
  } else {
    bank_index = static_cast<std::uint32_t>(chunk / rows_);
    row = static_cast<std::uint32_t>(chunk % rows_);
  }
  return {bank_index % bank_groups_, bank_index / bank_groups_, row, col};
}

std::uint64_t AddressMap::unmap(const DramAddress& a) const {
  if (a.bank_group >= bank_groups_ || a.bank >= banks_per_group_ || a.row >= rows_ || a.column >= lines_per_row_)
    throw OutOfRange("DRAM address outside the device");
  const std::uint64_t bank_index = flat_bank(a);
  const std::uint64_t chunk =
      scheme_ == MapScheme::RowBankCol ? std::uint64_t{a.row} * banks_ + bank_index : bank_index * rows_ + a.row;
  return chunk * row_size_ + std::uint64_t{a.column} * line_;
}

void RequestTable::add(MemRequest req) {
  for (const auto& e : entries_)
    if (e.req.id == req.id) throw DuplicateId("request id " + std::to_string(req.id) + " already in table");
  entries_.push_back({std::move(req), next_arrival_++});
}

TableEntry RequestTable::take(std::size_t index) {
  TableEntry e = std::move(entries_.at(index));
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(index));
  return e;
}

std::optional<MemRequest> get_request(HwFifo<MemRequest>& hw) { return hw.pop(); }

std::string_view to_string(SchedulerKind k) { return k == SchedulerKind::FCFS ? "fcfs" : "frfcfs"; }

SchedulerKind scheduler_from_string(const std::string& s) {
  if (s == "fcfs" || s == "FCFS") return SchedulerKind::FCFS;
  if (s == "frfcfs" || s == "FRFCFS" || s == "fr-fcfs") return SchedulerKind::FRFCFS;
  throw ConfigError("unknown scheduler '" + s + "'");
}

bool is_technique_request(RequestKind k) {
  return k == RequestKind::RowCloneCopy || k == RequestKind::RowCloneInit || k == RequestKind::Profiling;
}

std::optional<std::size_t> select_fcfs(const RequestTable& table) {
  if (table.empty()) return std::nullopt;
  return 0;
}

std::optional<std::size_t> select_frfcfs(const RequestTable& table, const RankState& rank, const DramConfig& cfg,
                                        const AddressMap& map) {
  if (table.empty()) return std::nullopt;
  const auto& es = table.entries();
  for (std::size_t i = 0; i < es.size(); ++i) {
    if (is_technique_request(es[i].req.kind)) break;
    const auto a = map.map(es[i].req.phys_addr);
    const auto& open = rank.bank(cfg, a).open_row;
    if (open && *open == a.row) return i;
  }
  return 0;
}

Nanos stage_legal(BatchBuilder& b, RankState& sim, const DramCommand& cmd, const DramConfig& cfg, Nanos batch_start,
                  Nanos not_before) {
  Nanos t = earliest_legal_issue(sim, cmd, cfg, not_before);
  if (!b.empty()) t = max(t, batch_start + b.batch().last_offset() + Nanos::from_ps(1));
  b.stage(cmd, b.empty() ? t - batch_start : t - batch_start - b.batch().last_offset());
  apply_command(sim, cmd, cfg, t);
  return t;
}

CommandBatch build_access_batch(const MemRequest& req, const RankState& rank, const DramConfig& cfg,
                                const AddressMap& map, Nanos now, std::optional<Nanos> act_trcd) {
  const auto a = map.map(req.phys_addr);
  RankState sim = rank;
  BatchBuilder b(true);
  const auto& bank = rank.bank(cfg, a);
  bool opened = false;
  if (bank.open_row && *bank.open_row != a.row) stage_legal(b, sim, DramCommand::pre(a), cfg, now, now);
  if (!bank.open_row || *bank.open_row != a.row) {
    stage_legal(b, sim, DramCommand::act(a), cfg, now, now);
    opened = true;
  }
  DramCommand col;
  switch (req.kind) {
    case RequestKind::Read:
      col = DramCommand::rd(a, opened ? act_trcd : std::nullopt);
      if (col.override_trcd && *col.override_trcd >= cfg.t(TimingParam::tRCD)) col.override_trcd.reset();
      break;
    case RequestKind::Write:
    case RequestKind::Flush:
      col = DramCommand::wr(a, req.payload);
      break;
    default:
      throw std::invalid_argument("build_access_batch handles only Read/Write/Flush");
  }
  stage_legal(b, sim, col, cfg, now, now);
  auto batch = b.take();
  // A reduced-tRCD read is deliberately below nominal.
  if (col.override_trcd) batch.set_strict(false);
  return batch;
}

namespace {

std::optional<Scheduled> schedule_with(std::optional<std::size_t> idx, const RequestTable& table,
                                       const RankState& rank, const DramConfig& cfg, const AddressMap& map,
                                       Nanos now) {
  if (!idx) return std::nullopt;
  return Scheduled{*idx, build_access_batch(table.entries()[*idx].req, rank, cfg, map, now)};
}

}  // namespace

std::optional<Scheduled> schedule_fcfs(const RequestTable& table, const RankState& rank, const DramConfig& cfg,
                                       const AddressMap& map, Nanos now) {
  return schedule_with(select_fcfs(table), table, rank, cfg, map, now);
}

std::optional<Scheduled> schedule_frfcfs(const RequestTable& table, const RankState& rank, const DramConfig& cfg,
                                         const AddressMap& map, Nanos now) {
  return schedule_with(select_frfcfs(table, rank, cfg, map), table, rank, cfg, map, now);
}

void set_scheduling_state(TimeScaleState& ts, bool critical, bool pending) {
  if (critical) {
    if (!ts.critical()) ts.enter_critical();
  } else {
    ts.exit_critical(pending);
  }
}

}  // namespace edsim
