#include "edsim/command_engine.hpp"

#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "edsim/rng.hpp"

namespace edsim {

void CommandBatch::push(DramCommand cmd, Nanos offset) {
  if (offset < Nanos::zero()) throw BatchOrderError("negative batch offset");
  if (!entries_.empty() && offset <= entries_.back().offset)
    throw BatchOrderError("batch offsets must be strictly increasing (" + offset.str() +
                          " after " + entries_.back().offset.str() + ")");
  entries_.push_back({std::move(cmd), offset});
}

std::size_t CommandBatch::read_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.cmd.kind == CommandKind::RD;
  return n;
}

BatchBuilder& BatchBuilder::stage(DramCommand cmd, Nanos delay) {
  if (delay < Nanos::zero()) throw BatchOrderError("negative stage delay");
  batch_.push(std::move(cmd), batch_.empty() ? delay : batch_.last_offset() + delay);
  return *this;
}

CommandBatch BatchBuilder::take() {
  CommandBatch out = std::move(batch_);
  batch_ = CommandBatch(out.strict());
  return out;
}

namespace {

std::string describe(const std::vector<Violation>& v) {
  std::string s = "strict batch violates timing:";
  for (const auto& x : v)
    s += " [" + std::to_string(x.index) + "] " + (x.parameter ? std::string(to_string(*x.parameter)) : "sequence") +
         " by " + x.deficit.str() + "ns";
  return s;
}

}  // namespace

StrictViolation::StrictViolation(std::vector<Violation> v)
    : std::runtime_error(describe(v)), violations_(std::move(v)) {}

Nanos completion_latency(CommandKind kind, const DramConfig& cfg) {
  using P = TimingParam;
  switch (kind) {
    case CommandKind::RD: return cfg.t(P::tCL) + cfg.burst();
    case CommandKind::WR: return cfg.t(P::tCL) + cfg.burst() + cfg.t(P::tWR);
    case CommandKind::PRE: return cfg.t(P::tRP);
    case CommandKind::ACT: return cfg.t(P::tRCD);
    case CommandKind::REF: return cfg.t(P::tRFC);
  }
  return Nanos::zero();
}

std::vector<RowCloneCandidate> rowclone_detect(const CommandBatch& batch, const DramConfig& cfg) {
  // Per bank, the last ACT and the PRE that followed it (if any).
  struct Pending {
    std::optional<std::size_t> act;
    std::optional<std::size_t> pre;
  };
  std::map<std::uint32_t, Pending> banks;
  std::vector<RowCloneCandidate> out;
  const auto& es = batch.entries();
  for (std::size_t i = 0; i < es.size(); ++i) {
    const auto& cmd = es[i].cmd;
    if (cmd.kind == CommandKind::REF) {
      banks.clear();
      continue;
    }
    auto& p = banks[cmd.addr.flat_bank(cfg)];
    switch (cmd.kind) {
      case CommandKind::ACT:
        if (p.act && p.pre) {
          const bool short_ras = es[*p.pre].offset - es[*p.act].offset < cfg.t(TimingParam::tRAS);
          const bool short_rp = es[i].offset - es[*p.pre].offset < cfg.t(TimingParam::tRP);
          if (short_ras || short_rp)
            out.push_back({cmd.addr.flat_bank(cfg), es[*p.act].cmd.addr.row, cmd.addr.row, i});
        }
        p = {i, std::nullopt};
        break;
      case CommandKind::PRE:
        if (p.act && !p.pre)
          p.pre = i;
        else
          p = {};
        break;
      default:
        // Column commands between ACT and PRE are fine; after PRE they break the idiom.
        if (p.pre) p = {};
        break;
    }
  }
  return out;
}

CommandEngine::CommandEngine(DramConfig cfg, std::shared_ptr<const ChipProfile> profile, std::uint64_t fill_seed,
                             std::uint64_t corruption_seed)
    : cfg_(std::move(cfg)),
      profile_(std::move(profile)),
      data_(cfg_, fill_seed),
      rank_(cfg_),
      corruption_seed_(corruption_seed) {}

ExecutionResult CommandEngine::flush(const CommandBatch& batch) {
  if (batch.empty()) throw BatchOrderError("cannot flush an empty batch");
  ExecutionResult res;
  res.violations = check_batch_legality(batch, rank_, cfg_);
  for (const auto& v : res.violations) {
    if (!v.parameter) {
      // Re-run on a scratch copy to surface the exact message.
      RankState scratch = rank_;
      for (std::size_t i = 0; i <= v.index; ++i)
        apply_command(scratch, batch.entries()[i].cmd, cfg_, rank_.now + batch.entries()[i].offset);
      throw IllegalSequence("batch entry " + std::to_string(v.index) + " is structurally illegal");
    }
  }
  for (const auto& e : batch.entries())
    if (e.cmd.kind == CommandKind::WR && e.cmd.payload.size() != cfg_.cache_line_bytes)
      throw IllegalSequence("WR payload must be exactly one cache line");
  if (batch.strict() && !res.violations.empty()) throw StrictViolation(res.violations);

  std::map<std::size_t, RowCloneCandidate> clones;
  for (const auto& c : rowclone_detect(batch, cfg_)) clones.emplace(c.second_act, c);

  const Nanos start = rank_.now;
  const auto& es = batch.entries();
  for (std::size_t i = 0; i < es.size(); ++i) {
    const auto& cmd = es[i].cmd;
    const Nanos t = start + es[i].offset;
    const std::uint32_t bank = cmd.kind == CommandKind::REF ? 0 : cmd.addr.flat_bank(cfg_);
    std::optional<Nanos> act_time;
    if (cmd.kind == CommandKind::RD) act_time = rank_.banks[bank].last_act;
    apply_command(rank_, cmd, cfg_, t);
    ++stats_.commands[static_cast<std::size_t>(cmd.kind)];

    switch (cmd.kind) {
      case CommandKind::ACT:
        if (auto it = clones.find(i); it != clones.end()) {
          const auto& c = it->second;
          const bool ok = profile_ ? rowclone_outcome(*profile_, bank, c.src_row, c.dst_row) == CloneOutcome::Success
                                   : c.src_row != c.dst_row;
          if (ok) {
            data_.copy_row(bank, c.src_row, c.dst_row);
            ++stats_.clone_success;
          } else {
            data_.corrupt_row(bank, c.dst_row, hash_of(corruption_seed_, 1, corruption_events_++));
            ++stats_.clone_fail;
          }
        }
        break;
      case CommandKind::RD: {
        const Nanos applied = t - *act_time;
        const AccessOutcome outcome =
            profile_ ? access_outcome(*profile_, cmd.addr, applied) : AccessOutcome::Correct;
        auto line = data_.read_line(bank, cmd.addr.row, cmd.addr.column);
        if (outcome == AccessOutcome::Corrupt) {
          ++stats_.corrupt_reads;
          std::uint64_t h = hash_of(corruption_seed_, 2, corruption_events_++);
          for (std::size_t b = 0; b < line.size(); ++b) {
            if (b % 8 == 0) h = splitmix64(h);
            // Force at least one flipped bit per word so a corrupt read never matches.
            line[b] ^= static_cast<std::uint8_t>(h >> (8 * (b % 8))) | (b % 8 == 0 ? 1 : 0);
          }
        }
        if (observer_) observer_(cmd.addr, applied, outcome);
        res.readback.push_back(std::move(line));
        break;
      }
      case CommandKind::WR:
        data_.write_line(bank, cmd.addr.row, cmd.addr.column, cmd.payload);
        break;
      default:
        break;
    }
  }
  res.elapsed = es.back().offset + completion_latency(es.back().cmd.kind, cfg_);
  rank_.now = start + res.elapsed;
  ++stats_.batches;
  stats_.busy += res.elapsed;
  return res;
}

void write_batch_trace(std::ostream& out, const CommandBatch& batch) {
  for (const auto& e : batch.entries()) {
    const auto& a = e.cmd.addr;
    out << e.offset.str() << ' ' << to_string(e.cmd.kind) << ' ' << a.bank_group << ' ' << a.bank << ' ' << a.row
        << ' ' << a.column;
    if (e.cmd.override_trcd) out << ' ' << e.cmd.override_trcd->str();
    out << '\n';
  }
}

CommandBatch read_batch_trace(std::istream& in, std::uint32_t line_bytes) {
  CommandBatch batch;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string off, kind, trcd;
    DramAddress a;
    if (!(ss >> off >> kind >> a.bank_group >> a.bank >> a.row >> a.column))
      throw std::invalid_argument("bad batch trace line: " + line);
    DramCommand cmd;
    if (kind == "ACT") cmd = DramCommand::act(a);
    else if (kind == "PRE") cmd = DramCommand::pre(a);
    else if (kind == "RD") cmd = DramCommand::rd(a);
    else if (kind == "WR") cmd = DramCommand::wr(a, std::vector<std::uint8_t>(line_bytes, 0));
    else if (kind == "REF") cmd = DramCommand::ref();
    else throw std::invalid_argument("unknown command kind: " + kind);
    if (ss >> trcd) cmd.override_trcd = parse_nanos(trcd);
    batch.push(std::move(cmd), parse_nanos(off));
  }
  return batch;
}

}  // namespace edsim
