#include "edsim/controller.hpp"

namespace edsim {

MemoryController::MemoryController(const DramConfig& cfg, ControllerConfig cc,
                                   std::shared_ptr<const ChipProfile> profile, std::uint64_t fill_seed,
                                   std::uint64_t corruption_seed)
    : cfg_(cfg),
      cc_(cc),
      map_(cfg, cc.map),
      engine_(cfg, std::move(profile), fill_seed, corruption_seed),
      next_refresh_(cfg.t(TimingParam::tREFI)) {}

std::vector<std::uint8_t> MemoryController::read_backing(std::uint64_t line_addr) const {
  const auto a = map_.map(line_addr);
  return engine_.data().read_line(a.flat_bank(cfg_), a.row, a.column);
}

std::uint64_t MemoryController::flush(BatchBuilder& b) {
  if (b.empty()) return 0;
  const auto batch = b.take();
  engine_.flush(batch);
  return batch.size();
}

std::uint64_t MemoryController::maybe_refresh() {
  if (!cc_.refresh) return 0;
  const Nanos now = engine_.now();
  const Nanos refi = cfg_.t(TimingParam::tREFI);
  if (now < next_refresh_) return 0;
  // Intervals that passed while the controller sat idle are assumed to have
  // been refreshed in the background.
  const std::int64_t skipped = (now - next_refresh_).ps() / refi.ps();
  next_refresh_ += refi * skipped;
  stats_.idle_refreshes += static_cast<std::uint64_t>(skipped);
  BatchBuilder b(true);
  RankState sim = engine_.rank();
  for (std::uint32_t bank = 0; bank < cfg_.total_banks(); ++bank)
    if (sim.banks[bank].open_row)
      stage_legal(b, sim, DramCommand::pre(address_of_flat_bank(cfg_, bank, *sim.banks[bank].open_row)), cfg_, now,
                  now);
  stage_legal(b, sim, DramCommand::ref(), cfg_, now, now);
  next_refresh_ += refi;
  ++stats_.refreshes;
  return flush(b);
}

MemResponse MemoryController::response_for(const MemRequest& req) const {
  MemResponse r;
  r.request_id = req.id;
  r.kind = req.kind;
  r.core = req.core;
  r.phys_addr = req.phys_addr;
  r.prefetch = req.prefetch;
  return r;
}

std::optional<ServeResult> MemoryController::serve_one(Nanos start) {
  if (table_.empty()) return std::nullopt;
  engine_.advance_to(start);
  ServeResult out;
  out.commands = maybe_refresh();
  const auto idx = cc_.scheduler == SchedulerKind::FCFS ? select_fcfs(table_)
                                                          : select_frfcfs(table_, engine_.rank(), cfg_, map_);
  const MemRequest req = table_.entries()[*idx].req;
  out.request_id = req.id;
  out.kind = req.kind;
  ++stats_.served[static_cast<std::size_t>(req.kind)];
  switch (req.kind) {
    case RequestKind::Read: serve_read(req, *idx, out); break;
    case RequestKind::Write:
    case RequestKind::Flush: serve_write(req, out); break;
    case RequestKind::Profiling: serve_profiling(req, out); break;
    case RequestKind::RowCloneCopy: serve_copy(req, out); break;
    case RequestKind::RowCloneInit: serve_init(req, out); break;
  }
  table_.take(*idx);
  out.elapsed = engine_.now() - start;
  return out;
}

void MemoryController::serve_read(const MemRequest& req, std::size_t index, ServeResult& out) {
  const std::uint64_t line = req.phys_addr - req.phys_addr % cfg_.cache_line_bytes;
  auto resp = response_for(req);
  // Newest older write to the same line wins over DRAM contents.
  const auto& es = table_.entries();
  for (std::size_t j = index; j-- > 0;) {
    const auto& o = es[j].req;
    if ((o.kind == RequestKind::Write || o.kind == RequestKind::Flush) &&
        o.phys_addr - o.phys_addr % cfg_.cache_line_bytes == line) {
      resp.data = o.payload;
      out.forwarded = true;
      ++stats_.forwarded_reads;
      out.responses.push_back(std::move(resp));
      return;
    }
  }
  const auto a = map_.map(line);
  std::optional<Nanos> act_trcd;
  const auto& bank = engine_.rank().bank(cfg_, a);
  if (trcd_ && (!bank.open_row || *bank.open_row != a.row)) act_trcd = trcd_->act_trcd(a.flat_bank(cfg_), a.row);
  MemRequest r = req;
  r.phys_addr = line;
  const auto batch = build_access_batch(r, engine_.rank(), cfg_, map_, engine_.now(), act_trcd);
  auto res = engine_.flush(batch);
  out.commands += batch.size();
  resp.data = std::move(res.readback.back());
  out.responses.push_back(std::move(resp));
}

void MemoryController::serve_write(const MemRequest& req, ServeResult& out) {
  MemRequest r = req;
  r.phys_addr = req.phys_addr - req.phys_addr % cfg_.cache_line_bytes;
  const auto a = map_.map(r.phys_addr);
  pattern_rows_.erase({a.flat_bank(cfg_), a.row});
  const auto batch = build_access_batch(r, engine_.rank(), cfg_, map_, engine_.now());
  engine_.flush(batch);
  out.commands += batch.size();
  if (!req.posted) out.responses.push_back(response_for(req));
}

void MemoryController::serve_profiling(const MemRequest& req, ServeResult& out) {
  if (req.payload.size() != cfg_.cache_line_bytes)
    throw std::invalid_argument("profiling request needs a one-line pattern");
  const Nanos nominal = cfg_.t(TimingParam::tRCD);
  const Nanos trcd = req.profiling_trcd.value_or(nominal);
  const auto a = map_.map(req.phys_addr - req.phys_addr % cfg_.cache_line_bytes);
  pattern_rows_.erase({a.flat_bank(cfg_), a.row});
  BatchBuilder b(false);
  RankState sim = engine_.rank();
  const Nanos start = engine_.now();
  if (sim.bank(cfg_, a).open_row) stage_legal(b, sim, DramCommand::pre(a), cfg_, start, start);
  stage_legal(b, sim, DramCommand::act(a), cfg_, start, start);
  stage_legal(b, sim, DramCommand::wr(a, req.payload), cfg_, start, start);
  stage_legal(b, sim, DramCommand::pre(a), cfg_, start, start);
  stage_legal(b, sim, DramCommand::act(a), cfg_, start, start);
  stage_legal(b, sim, DramCommand::rd(a, trcd < nominal ? std::optional(trcd) : std::nullopt), cfg_, start, start);
  const auto batch = b.take();
  auto res = engine_.flush(batch);
  out.commands += batch.size();
  auto resp = response_for(req);
  const bool pass = res.readback.back() == req.payload;
  resp.status = pass ? ResponseStatus::ProfilingPass : ResponseStatus::ProfilingFail;
  ++(pass ? stats_.profiling_pass : stats_.profiling_fail);
  resp.data = std::move(res.readback.back());
  out.responses.push_back(std::move(resp));
}

namespace {

void add_fallback(std::vector<FallbackSegment>& fb, FallbackSegment s) {
  if (!fb.empty() && fb.back().src + fb.back().size == s.src && fb.back().dst + fb.back().size == s.dst)
    fb.back().size += s.size;
  else
    fb.push_back(s);
}

}  // namespace

void MemoryController::serve_copy(const MemRequest& req, ServeResult& out) {
  const std::uint64_t row = cfg_.row_size_bytes();
  BatchBuilder b(false);
  RankState sim = engine_.rank();
  const Nanos start = engine_.now();
  std::vector<FallbackSegment> fb;
  for (std::uint64_t off = 0; off < req.size_bytes; off += row) {
    const std::uint64_t len = std::min(row, req.size_bytes - off);
    const std::uint64_t s = req.phys_addr + off, d = req.dst_addr + off;
    bool ok = rowclone_ && s % row == 0 && d % row == 0 && len == row;
    DramAddress as, ad;
    if (ok) {
      as = map_.map(s);
      ad = map_.map(d);
      ok = as.flat_bank(cfg_) == ad.flat_bank(cfg_) && rowclone_->verified(as.flat_bank(cfg_), as.row, ad.row);
    }
    if (ok) {
      stage_rowclone(b, sim, as, ad, cfg_, rowclone_->config(), start);
      ++stats_.rowclone_rows;
    } else {
      add_fallback(fb, {s, d, len});
      ++stats_.rowclone_fallback_rows;
    }
  }
  out.commands += flush(b);
  auto resp = response_for(req);
  resp.status = fb.empty() ? ResponseStatus::OK : ResponseStatus::FallbackUsed;
  resp.fallback = std::move(fb);
  out.responses.push_back(std::move(resp));
}

void MemoryController::serve_init(const MemRequest& req, ServeResult& out) {
  if (req.payload.size() != 8) throw std::invalid_argument("init request needs an 8-byte pattern");
  std::uint64_t word = 0;
  for (int i = 7; i >= 0; --i) word = word << 8 | req.payload[static_cast<std::size_t>(i)];
  const std::uint64_t row = cfg_.row_size_bytes();
  const auto line_pattern = pattern_bytes(word, cfg_.cache_line_bytes);
  BatchBuilder b(false);
  RankState sim = engine_.rank();
  const Nanos start = engine_.now();
  std::vector<FallbackSegment> fb;
  for (std::uint64_t off = 0; off < req.size_bytes; off += row) {
    const std::uint64_t len = std::min(row, req.size_bytes - off);
    const std::uint64_t d = req.phys_addr + off;
    std::optional<std::uint32_t> src;
    DramAddress ad;
    std::uint32_t bank = 0;
    if (rowclone_ && d % row == 0 && len == row) {
      ad = map_.map(d);
      bank = ad.flat_bank(cfg_);
      src = rowclone_->init_source(bank, rowclone_->subarray_of(ad.row));
      if (src && !rowclone_->verified(bank, *src, ad.row)) src.reset();
    }
    if (!src) {
      add_fallback(fb, {d, d, len});
      ++stats_.rowclone_fallback_rows;
      continue;
    }
    const auto as = address_of_flat_bank(cfg_, bank, *src);
    auto it = pattern_rows_.find({bank, *src});
    if (it == pattern_rows_.end() || it->second != word) {
      if (sim.bank(cfg_, as).open_row) stage_legal(b, sim, DramCommand::pre(as), cfg_, start, start);
      stage_legal(b, sim, DramCommand::act(as), cfg_, start, start);
      for (std::uint32_t l = 0; l < cfg_.lines_per_row(); ++l)
        stage_legal(b, sim, DramCommand::wr(address_of_flat_bank(cfg_, bank, *src, l), line_pattern), cfg_, start,
                    start);
      pattern_rows_[{bank, *src}] = word;
      ++stats_.init_source_writes;
    }
    stage_rowclone(b, sim, as, ad, cfg_, rowclone_->config(), start);
    ++stats_.rowclone_rows;
  }
  out.commands += flush(b);
  auto resp = response_for(req);
  resp.status = fb.empty() ? ResponseStatus::OK : ResponseStatus::FallbackUsed;
  resp.fallback = std::move(fb);
  out.responses.push_back(std::move(resp));
}

}  // namespace edsim
