#include "edsim/frontend.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "edsim/dram_timing.hpp"
#include "edsim/rng.hpp"

namespace edsim {

namespace {

constexpr std::uint64_t kPrefetchRegion = 4096;

}  // namespace

void CacheConfig::validate(const std::string& name) const {
  if (line_bytes == 0 || ways == 0 || size_bytes == 0) throw ConfigError(name + ": sizes must be positive");
  if (size_bytes % (std::uint64_t{ways} * line_bytes) != 0)
    throw ConfigError(name + ": size must be a multiple of ways * line");
  if (!std::has_single_bit(sets())) throw ConfigError(name + ": set count must be a power of two");
}

void CoreConfig::validate() const {
  l1d.validate("l1d");
  l2.validate("l2");
  if (l1d.line_bytes != l2.line_bytes) throw ConfigError("l1d and l2 line sizes differ");
  if (target_freq_hz == 0) throw ConfigError("core frequency must be positive");
}

Cache::Cache(const CacheConfig& cfg) : cfg_(cfg), sets_(cfg.sets()), lines_(std::size_t{sets_} * cfg.ways) {}

Cache::Line* Cache::lookup(std::uint64_t line_addr) {
  const std::size_t base = set_of(line_addr) * cfg_.ways;
  for (std::size_t w = 0; w < cfg_.ways; ++w) {
    auto& l = lines_[base + w];
    if (l.valid && l.addr == line_addr) {
      l.lru = ++clock_;
      return &l;
    }
  }
  return nullptr;
}

const Cache::Line* Cache::peek(std::uint64_t line_addr) const {
  const std::size_t base = set_of(line_addr) * cfg_.ways;
  for (std::size_t w = 0; w < cfg_.ways; ++w) {
    const auto& l = lines_[base + w];
    if (l.valid && l.addr == line_addr) return &l;
  }
  return nullptr;
}

std::optional<Cache::Line> Cache::insert(std::uint64_t line_addr, std::vector<std::uint8_t> data, bool dirty) {
  if (auto* l = lookup(line_addr)) {
    l->data = std::move(data);
    l->dirty = l->dirty || dirty;
    return std::nullopt;
  }
  const std::size_t base = set_of(line_addr) * cfg_.ways;
  Line* victim = &lines_[base];
  for (std::size_t w = 0; w < cfg_.ways; ++w) {
    auto& l = lines_[base + w];
    if (!l.valid) {
      victim = &l;
      break;
    }
    if (l.lru < victim->lru) victim = &l;
  }
  std::optional<Line> out;
  if (victim->valid && victim->dirty) out = std::move(*victim);
  *victim = Line{line_addr, true, dirty, ++clock_, std::move(data)};
  return out;
}

std::optional<Cache::Line> Cache::invalidate(std::uint64_t line_addr) {
  const std::size_t base = set_of(line_addr) * cfg_.ways;
  for (std::size_t w = 0; w < cfg_.ways; ++w) {
    auto& l = lines_[base + w];
    if (l.valid && l.addr == line_addr) {
      Line out = std::move(l);
      l = Line{};
      return out;
    }
  }
  return std::nullopt;
}

std::uint64_t Cache::resident_lines() const {
  return static_cast<std::uint64_t>(std::count_if(lines_.begin(), lines_.end(), [](const Line& l) { return l.valid; }));
}

CacheHierarchy::CacheHierarchy(const CoreConfig& cfg) : l1_(cfg.l1d), l2_(cfg.l2) {}

CacheHierarchy::Level CacheHierarchy::probe(std::uint64_t addr) const {
  const auto line = l1_.line_of(addr);
  if (l1_.peek(line)) return Level::L1;
  if (l2_.peek(line)) return Level::L2;
  return Level::Miss;
}

void CacheHierarchy::install_l2(std::uint64_t line_addr, std::vector<std::uint8_t> data, bool dirty,
                                std::vector<Cache::Line>& writebacks) {
  if (auto victim = l2_.insert(line_addr, std::move(data), dirty)) {
    // An L1 copy of the victim is at least as new; let it carry the data.
    if (!l1_.peek(victim->addr)) writebacks.push_back(std::move(*victim));
    else if (auto* l1line = l1_.lookup(victim->addr)) l1line->dirty = true;
  }
}

void CacheHierarchy::install_l1(std::uint64_t line_addr, std::vector<std::uint8_t> data, bool dirty,
                                std::vector<Cache::Line>& writebacks) {
  if (auto victim = l1_.insert(line_addr, std::move(data), dirty))
    install_l2(victim->addr, std::move(victim->data), true, writebacks);
}

void CacheHierarchy::promote(std::uint64_t line_addr, std::vector<Cache::Line>& writebacks) {
  auto* l = l2_.lookup(line_addr);
  if (!l) return;
  install_l1(line_addr, l->data, false, writebacks);
}

void CacheHierarchy::fill(std::uint64_t line_addr, const std::vector<std::uint8_t>& data,
                          std::vector<Cache::Line>& writebacks) {
  install_l2(line_addr, data, false, writebacks);
  install_l1(line_addr, data, false, writebacks);
}

void CacheHierarchy::fill_l2(std::uint64_t line_addr, const std::vector<std::uint8_t>& data,
                             std::vector<Cache::Line>& writebacks) {
  if (l1_.peek(line_addr) || l2_.peek(line_addr)) return;
  install_l2(line_addr, data, false, writebacks);
}

std::optional<std::vector<std::uint8_t>> CacheHierarchy::read_line(std::uint64_t line_addr) const {
  if (const auto* l = l1_.peek(line_addr)) return l->data;
  if (const auto* l = l2_.peek(line_addr)) return l->data;
  return std::nullopt;
}

void CacheHierarchy::write(std::uint64_t addr, const std::uint8_t* bytes, std::size_t n) {
  auto* l = l1_.lookup(l1_.line_of(addr));
  if (!l) throw std::logic_error("store to a line not resident in L1");
  std::memcpy(l->data.data() + (addr - l->addr), bytes, n);
  l->dirty = true;
}

std::optional<std::vector<std::uint8_t>> CacheHierarchy::flush(std::uint64_t line_addr) {
  auto a = l1_.invalidate(line_addr);
  auto b = l2_.invalidate(line_addr);
  if (a && a->dirty) return std::move(a->data);
  if (b && b->dirty) {
    // A clean L1 copy holds the same bytes as L2.
    return std::move(b->data);
  }
  return std::nullopt;
}

bool CacheHierarchy::is_dirty(std::uint64_t line_addr) const {
  const auto* a = l1_.peek(line_addr);
  const auto* b = l2_.peek(line_addr);
  return (a && a->dirty) || (b && b->dirty);
}

void CacheHierarchy::invalidate(std::uint64_t line_addr) {
  l1_.invalidate(line_addr);
  l2_.invalidate(line_addr);
}

std::vector<std::uint8_t> pattern_bytes(std::uint64_t pattern, std::size_t n) {
  std::vector<std::uint8_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::uint8_t>(pattern >> (8 * (i % 8)));
  return out;
}

// --- trace text -------------------------------------------------------------

namespace {

std::uint64_t parse_hex(const std::string& tok, std::size_t line) {
  std::string t = tok;
  if (t.rfind("0x", 0) == 0 || t.rfind("0X", 0) == 0) t = t.substr(2);
  if (t.empty() || t.size() > 16 || t.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos)
    throw TraceParseError(line, "bad hex value '" + tok + "'");
  return std::stoull(t, nullptr, 16);
}

std::uint64_t parse_dec(const std::string& tok, std::size_t line) {
  if (tok.empty() || tok.size() > 19 || tok.find_first_not_of("0123456789") != std::string::npos)
    throw TraceParseError(line, "bad decimal value '" + tok + "'");
  return std::stoull(tok);
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << v;
  return s.str();
}

}  // namespace

Trace parse_trace(std::istream& in) {
  Trace out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const auto& op = tok[0];
    auto want = [&](std::size_t lo, std::size_t hi) {
      if (tok.size() < lo || tok.size() > hi) throw TraceParseError(no, "wrong operand count for " + op);
    };
    TraceOp t;
    if (op == "LD") {
      want(3, 3);
      t = {OpKind::Load, parse_hex(tok[1], no), 0, parse_dec(tok[2], no), std::nullopt};
    } else if (op == "ST") {
      want(3, 4);
      t = {OpKind::Store, parse_hex(tok[1], no), 0, parse_dec(tok[2], no), std::nullopt};
      if (tok.size() == 4) t.pattern = parse_hex(tok[3], no);
    } else if (op == "CP") {
      want(2, 2);
      t = {OpKind::Compute, 0, 0, parse_dec(tok[1], no), std::nullopt};
    } else if (op == "FLUSH") {
      want(2, 2);
      t = {OpKind::Clflush, parse_hex(tok[1], no), 0, 0, std::nullopt};
    } else if (op == "RCCOPY") {
      want(4, 4);
      t = {OpKind::RowCloneCopy, parse_hex(tok[1], no), parse_hex(tok[2], no), parse_dec(tok[3], no), std::nullopt};
    } else if (op == "RCINIT") {
      want(4, 4);
      t = {OpKind::RowCloneInit, parse_hex(tok[1], no), 0, parse_dec(tok[2], no), parse_hex(tok[3], no)};
    } else if (op == "MARK") {
      want(1, 1);
      t = {OpKind::Mark, 0, 0, 0, std::nullopt};
    } else {
      throw TraceParseError(no, "unknown opcode '" + op + "'");
    }
    if ((t.kind == OpKind::Load || t.kind == OpKind::Store || t.kind == OpKind::RowCloneCopy ||
         t.kind == OpKind::RowCloneInit) &&
        t.size == 0)
      throw TraceParseError(no, "zero size");
    out.push_back(t);
  }
  return out;
}

Trace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace '" + path + "'");
  return parse_trace(in);
}

void write_trace(std::ostream& out, const Trace& trace) {
  for (const auto& t : trace) {
    switch (t.kind) {
      case OpKind::Load: out << "LD " << hex(t.addr) << ' ' << t.size; break;
      case OpKind::Store:
        out << "ST " << hex(t.addr) << ' ' << t.size;
        if (t.pattern) out << ' ' << hex(*t.pattern);
        break;
      case OpKind::Compute: out << "CP " << t.size; break;
      case OpKind::Clflush: out << "FLUSH " << hex(t.addr); break;
      case OpKind::RowCloneCopy: out << "RCCOPY " << hex(t.addr) << ' ' << hex(t.dst) << ' ' << t.size; break;
      case OpKind::RowCloneInit: out << "RCINIT " << hex(t.addr) << ' ' << t.size << ' ' << hex(*t.pattern); break;
      case OpKind::Mark: out << "MARK"; break;
    }
    out << '\n';
  }
}

// --- generators -------------------------------------------------------------

Trace gen_copy(std::uint64_t n, CopyVariant variant, CoherenceSetting setting, std::uint64_t src, std::uint64_t dst,
               std::uint32_t line) {
  Trace t{{OpKind::Mark, 0, 0, 0, std::nullopt}};
  if (variant == CopyVariant::CpuLdSt) {
    for (std::uint64_t off = 0; off < n; off += line) {
      const std::uint64_t len = std::min<std::uint64_t>(line, n - off);
      t.push_back({OpKind::Load, src + off, 0, len, std::nullopt});
      t.push_back({OpKind::Store, dst + off, 0, len, std::nullopt});
    }
  } else {
    if (setting == CoherenceSetting::Clflush)
      for (std::uint64_t off = 0; off < n; off += line) t.push_back({OpKind::Clflush, src + off, 0, 0, std::nullopt});
    t.push_back({OpKind::RowCloneCopy, src, dst, n, std::nullopt});
  }
  t.push_back({OpKind::Mark, 0, 0, 0, std::nullopt});
  return t;
}

Trace gen_init(std::uint64_t n, std::uint64_t pattern, CopyVariant variant, CoherenceSetting setting,
               std::uint64_t dst, std::uint32_t line) {
  Trace t{{OpKind::Mark, 0, 0, 0, std::nullopt}};
  if (variant == CopyVariant::CpuLdSt) {
    for (std::uint64_t off = 0; off < n; off += line)
      t.push_back({OpKind::Store, dst + off, 0, std::min<std::uint64_t>(line, n - off), pattern});
  } else {
    if (setting == CoherenceSetting::Clflush)
      for (std::uint64_t off = 0; off < n; off += line) t.push_back({OpKind::Clflush, dst + off, 0, 0, std::nullopt});
    t.push_back({OpKind::RowCloneInit, dst, 0, n, pattern});
  }
  t.push_back({OpKind::Mark, 0, 0, 0, std::nullopt});
  return t;
}

Trace gen_latency_chase(std::uint64_t working_set, std::uint64_t stride, std::uint64_t loads, std::uint64_t base,
                        std::uint64_t seed) {
  if (stride == 0 || working_set < stride) throw std::invalid_argument("working set must hold at least one slot");
  const std::uint64_t slots = working_set / stride;
  // Sattolo's algorithm: a single cycle through every slot.
  std::vector<std::uint64_t> next(slots);
  for (std::uint64_t i = 0; i < slots; ++i) next[i] = i;
  Rng rng(seed);
  for (std::uint64_t i = slots - 1; i > 0; --i) std::swap(next[i], next[rng.below(i)]);
  Trace t;
  std::uint64_t cur = 0;
  for (std::uint64_t i = 0; i < slots; ++i) {
    t.push_back({OpKind::Load, base + cur * stride, 0, 8, std::nullopt});
    cur = next[cur];
  }
  t.push_back({OpKind::Mark, 0, 0, 0, std::nullopt});
  for (std::uint64_t i = 0; i < loads; ++i) {
    t.push_back({OpKind::Load, base + cur * stride, 0, 8, std::nullopt});
    cur = next[cur];
  }
  t.push_back({OpKind::Mark, 0, 0, 0, std::nullopt});
  return t;
}

// --- core -------------------------------------------------------------------

Core::Core(std::uint32_t id, const CoreConfig& cfg, Trace trace, std::uint64_t id_base)
    : id_(id), cfg_(cfg), trace_(std::move(trace)), next_id_(id_base), caches_(cfg) {}

MemRequest Core::make_request(RequestKind k, std::uint64_t addr, std::uint64_t size) {
  MemRequest r;
  r.id = next_id_++;
  r.kind = k;
  r.phys_addr = addr;
  r.size_bytes = size;
  r.core = id_;
  return r;
}

void Core::queue_writebacks(std::vector<Cache::Line>& wbs) {
  for (auto& l : wbs) {
    auto r = make_request(RequestKind::Write, l.addr, cfg_.l1d.line_bytes);
    r.payload = std::move(l.data);
    r.posted = true;
    pending_.push_back(std::move(r));
    ++stats_.writebacks;
  }
  wbs.clear();
}

void Core::maybe_prefetch(std::uint64_t line_addr) {
  if (cfg_.l2_prefetch_degree == 0) return;
  const std::uint64_t line = cfg_.l1d.line_bytes;
  const std::uint64_t page = line_addr / kPrefetchRegion;
  auto it = stream_last_miss_.find(page);
  const bool streaming = it != stream_last_miss_.end() && it->second + line == line_addr;
  stream_last_miss_[page] = line_addr;
  if (!streaming) return;
  for (std::uint32_t d = 1; d <= cfg_.l2_prefetch_degree; ++d) {
    const std::uint64_t y = line_addr + d * line;
    if (y / kPrefetchRegion != page) break;
    if (caches_.probe(y) != CacheHierarchy::Level::Miss || inflight_prefetch_.count(y)) continue;
    auto r = make_request(RequestKind::Read, y, line);
    r.prefetch = true;
    pending_.push_back(std::move(r));
    inflight_prefetch_.insert(y);
    ++stats_.prefetches;
  }
}

bool Core::flush_pending(Cycles, const RequestSink& sink) {
  while (!pending_.empty()) {
    if (!sink(pending_.front())) return false;
    pending_.pop_front();
  }
  return true;
}

bool Core::next_micro(MicroOp& out) {
  while (micro_.empty()) {
    if (pc_ >= trace_.size()) return false;
    const auto& t = trace_[pc_++];
    const std::uint64_t line = cfg_.l1d.line_bytes;
    switch (t.kind) {
      case OpKind::Load:
      case OpKind::Store: {
        const std::uint64_t first = t.addr - t.addr % line;
        for (std::uint64_t a = first; a < t.addr + t.size; a += line)
          micro_.push_back({t.kind, a, t.pattern});
        break;
      }
      case OpKind::Compute:
        micro_.push_back({t.kind, t.size, std::nullopt});
        break;
      default:
        micro_.push_back({t.kind, t.addr, t.pattern});
        break;
    }
  }
  out = micro_.front();
  micro_.pop_front();
  return true;
}

void Core::complete_access(const MicroOp& op, Cycles) {
  const std::uint32_t line = cfg_.l1d.line_bytes;
  if (op.kind == OpKind::Load) {
    load_buffer_ = *caches_.read_line(op.addr);
    ++stats_.loads;
    return;
  }
  // Store: whole-line data from the pattern or the last loaded line.
  std::vector<std::uint8_t> data;
  if (op.pattern)
    data = pattern_bytes(*op.pattern, line);
  else if (!load_buffer_.empty())
    data = load_buffer_;
  else
    data.assign(line, 0);
  caches_.write(op.addr, data.data(), data.size());
  ++stats_.stores;
}

void Core::run_micro(const MicroOp& op, Cycles c) {
  const auto& l1 = cfg_.l1d;
  const auto& l2 = cfg_.l2;
  std::vector<Cache::Line> wbs;
  switch (op.kind) {
    case OpKind::Load:
    case OpKind::Store: {
      switch (caches_.probe(op.addr)) {
        case CacheHierarchy::Level::L1:
          ++stats_.l1_hits;
          caches_.l1().lookup(op.addr);
          complete_access(op, c);
          busy_until_ = c + l1.hit_latency;
          return;
        case CacheHierarchy::Level::L2:
          ++stats_.l2_hits;
          caches_.promote(op.addr, wbs);
          queue_writebacks(wbs);
          complete_access(op, c);
          maybe_prefetch(op.addr);
          busy_until_ = c + l1.hit_latency + l2.hit_latency;
          return;
        case CacheHierarchy::Level::Miss:
          ++stats_.misses;
          blocked_op_ = op;
          if (!inflight_prefetch_.count(op.addr))
            pending_.push_back(make_request(RequestKind::Read, op.addr, l1.line_bytes));
          maybe_prefetch(op.addr);
          wait_line_ = op.addr;
          block_after_push_ = true;
          busy_until_ = c + l1.hit_latency + l2.hit_latency;
          return;
      }
      return;
    }
    case OpKind::Compute:
      busy_until_ = c + op.addr;
      return;
    case OpKind::Clflush: {
      const std::uint64_t line_addr = op.addr - op.addr % l1.line_bytes;
      if (auto data = caches_.flush(line_addr)) {
        auto r = make_request(RequestKind::Flush, line_addr, l1.line_bytes);
        r.payload = std::move(*data);
        wait_request_ = r.id;
        pending_.push_back(std::move(r));
        block_after_push_ = true;
        ++stats_.flush_requests;
      }
      busy_until_ = c + 1;
      return;
    }
    default:
      throw std::logic_error("unexpected micro-op");
  }
}

void Core::start_op(Cycles c) {
  // RowClone and marks are handled at trace-op granularity.
  while (true) {
    if (micro_.empty() && pc_ < trace_.size()) {
      const auto& t = trace_[pc_];
      if (t.kind == OpKind::Mark) {
        stats_.marks.emplace_back(c, stats_.loads);
        ++pc_;
        continue;
      }
      if (t.kind == OpKind::RowCloneCopy || t.kind == OpKind::RowCloneInit) {
        ++pc_;
        const std::uint64_t line = cfg_.l1d.line_bytes;
        const std::uint64_t dst = t.kind == OpKind::RowCloneCopy ? t.dst : t.addr;
        for (std::uint64_t a = dst - dst % line; a < dst + t.size; a += line) caches_.invalidate(a);
        MemRequest r;
        if (t.kind == OpKind::RowCloneCopy) {
          r = make_request(RequestKind::RowCloneCopy, t.addr, t.size);
          r.dst_addr = t.dst;
        } else {
          r = make_request(RequestKind::RowCloneInit, t.addr, t.size);
          r.payload = pattern_bytes(*t.pattern, 8);
          rc_pattern_ = *t.pattern;
        }
        wait_request_ = r.id;
        pending_.push_back(std::move(r));
        block_after_push_ = true;
        ++stats_.rowclone_requests;
        busy_until_ = c + 1;
        return;
      }
    }
    MicroOp op;
    if (!next_micro(op)) {
      finished_ = true;
      stats_.finished_at = c;
      return;
    }
    run_micro(op, c);
    return;
  }
}

void Core::step(Cycles c, const RequestSink& sink) {
  if (finished_ || waiting_ != Wait::None || c < busy_until_) return;
  if (!pending_.empty() && !flush_pending(c, sink)) {
    ++stats_.fifo_stalls;
    return;
  }
  if (block_after_push_) {
    block_after_push_ = false;
    if (blocked_op_) {
      // The line may have arrived meanwhile through a prefetch.
      if (caches_.probe(wait_line_) != CacheHierarchy::Level::Miss) {
        std::vector<Cache::Line> wbs;
        if (caches_.probe(wait_line_) == CacheHierarchy::Level::L2) caches_.promote(wait_line_, wbs);
        queue_writebacks(wbs);
        complete_access(*blocked_op_, c);
        blocked_op_.reset();
      } else {
        waiting_ = Wait::Line;
        return;
      }
    } else {
      waiting_ = Wait::Request;
      return;
    }
  }
  if (!pending_.empty()) {
    // Write-backs produced by the completion above.
    if (!flush_pending(c, sink)) return;
  }
  start_op(c);
  if (!finished_ && busy_until_ <= c && waiting_ == Wait::None && !block_after_push_) {
    // Zero-latency ops (none today) would loop here; keep at least one cycle.
    busy_until_ = c + 1;
  }
}

void Core::deliver(const MemResponse& resp, Cycles c) {
  std::vector<Cache::Line> wbs;
  const std::uint64_t line = cfg_.l1d.line_bytes;
  switch (resp.kind) {
    case RequestKind::Read:
      if (resp.prefetch) {
        inflight_prefetch_.erase(resp.phys_addr);
        caches_.fill_l2(resp.phys_addr, *resp.data, wbs);
        queue_writebacks(wbs);
        if (waiting_ == Wait::Line && wait_line_ == resp.phys_addr) {
          caches_.promote(resp.phys_addr, wbs);
          queue_writebacks(wbs);
          complete_access(*blocked_op_, c);
          blocked_op_.reset();
          waiting_ = Wait::None;
          busy_until_ = c;
        }
        return;
      }
      caches_.fill(resp.phys_addr, *resp.data, wbs);
      queue_writebacks(wbs);
      if (waiting_ == Wait::Line && wait_line_ == resp.phys_addr) {
        complete_access(*blocked_op_, c);
        blocked_op_.reset();
        waiting_ = Wait::None;
        busy_until_ = c;
      }
      return;
    case RequestKind::Flush:
    case RequestKind::RowCloneCopy:
    case RequestKind::RowCloneInit:
      if (waiting_ != Wait::Request || resp.request_id != wait_request_) return;
      for (const auto& seg : resp.fallback) {
        stats_.fallback_bytes += seg.size;
        for (std::uint64_t off = 0; off < seg.size; off += line) {
          if (resp.kind == RequestKind::RowCloneCopy) {
            micro_.push_back({OpKind::Load, seg.src + off, std::nullopt});
            micro_.push_back({OpKind::Store, seg.dst + off, std::nullopt});
          } else {
            micro_.push_back({OpKind::Store, seg.dst + off, rc_pattern_});
          }
        }
      }
      waiting_ = Wait::None;
      busy_until_ = c;
      return;
    default:
      return;
  }
}

std::vector<std::uint8_t> Core::view_line(
    std::uint64_t line_addr, const std::function<std::vector<std::uint8_t>(std::uint64_t)>& backing) const {
  if (auto d = caches_.read_line(line_addr)) return *d;
  return backing(line_addr);
}

}  // namespace edsim
