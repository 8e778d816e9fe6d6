#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "edsim/request.hpp"
#include "edsim/units.hpp"

namespace edsim {

struct CacheConfig {
  std::uint64_t size_bytes = 32 * 1024;
  std::uint32_t ways = 2;
  std::uint32_t line_bytes = 64;
  Cycles hit_latency = 4;

  std::uint32_t sets() const { return static_cast<std::uint32_t>(size_bytes / (std::uint64_t{ways} * line_bytes)); }
  void validate(const std::string& name) const;
  bool operator==(const CacheConfig&) const = default;
};

struct CoreConfig {
  CacheConfig l1d{32 * 1024, 2, 64, 4};
  CacheConfig l2{512 * 1024, 8, 64, 21};
  /// Next-line stream prefetch depth, trained on L1 misses within a 4 KiB
  /// region (0 disables).
  std::uint32_t l2_prefetch_degree = 0;
  std::uint64_t target_freq_hz = 1'000'000'000;

  void validate() const;
  bool operator==(const CoreConfig&) const = default;
};

/// Set-associative, write-back, write-allocate, LRU cache holding line data.
class Cache {
 public:
  explicit Cache(const CacheConfig& cfg);

  struct Line {
    std::uint64_t addr = 0;  // line-aligned
    bool valid = false;
    bool dirty = false;
    std::uint64_t lru = 0;
    std::vector<std::uint8_t> data;
  };

  const CacheConfig& config() const { return cfg_; }
  std::uint64_t line_of(std::uint64_t addr) const { return addr - addr % cfg_.line_bytes; }

  /// Finds the line and refreshes its LRU position.
  Line* lookup(std::uint64_t line_addr);
  const Line* peek(std::uint64_t line_addr) const;
  /// Installs a line; returns the dirty victim it displaced, if any.
  std::optional<Line> insert(std::uint64_t line_addr, std::vector<std::uint8_t> data, bool dirty);
  /// Drops the line; returns it if it was present.
  std::optional<Line> invalidate(std::uint64_t line_addr);
  std::uint64_t resident_lines() const;

 private:
  std::size_t set_of(std::uint64_t line_addr) const { return (line_addr / cfg_.line_bytes) % sets_; }

  CacheConfig cfg_;
  std::uint32_t sets_;
  std::vector<Line> lines_;  // sets_ * ways
  std::uint64_t clock_ = 0;
};

/// Private L1D + L2 of one core.
class CacheHierarchy {
 public:
  explicit CacheHierarchy(const CoreConfig& cfg);

  enum class Level { L1, L2, Miss };
  /// Where a read of `addr` would hit.
  Level probe(std::uint64_t addr) const;
  /// Copies the line into L1 from L2 (L2 hit path). Dirty write-backs that
  /// fall out of L2 are appended to `writebacks`.
  void promote(std::uint64_t line_addr, std::vector<Cache::Line>& writebacks);
  /// Installs a line fetched from memory into L2 and L1.
  void fill(std::uint64_t line_addr, const std::vector<std::uint8_t>& data, std::vector<Cache::Line>& writebacks);
  /// Installs a prefetched line into L2 only (skipped if already cached).
  void fill_l2(std::uint64_t line_addr, const std::vector<std::uint8_t>& data, std::vector<Cache::Line>& writebacks);
  /// Newest cached bytes of the line, if resident anywhere.
  std::optional<std::vector<std::uint8_t>> read_line(std::uint64_t line_addr) const;
  /// Writes bytes into the L1 copy (must be resident in L1) and marks it dirty.
  void write(std::uint64_t addr, const std::uint8_t* bytes, std::size_t n);
  /// Newest data if any copy is dirty; removes the line from both levels.
  std::optional<std::vector<std::uint8_t>> flush(std::uint64_t line_addr);
  bool is_dirty(std::uint64_t line_addr) const;
  /// Drops the line everywhere, discarding dirty data.
  void invalidate(std::uint64_t line_addr);

  Cache& l1() { return l1_; }
  Cache& l2() { return l2_; }
  const Cache& l1() const { return l1_; }
  const Cache& l2() const { return l2_; }

 private:
  void install_l2(std::uint64_t line_addr, std::vector<std::uint8_t> data, bool dirty,
                  std::vector<Cache::Line>& writebacks);
  void install_l1(std::uint64_t line_addr, std::vector<std::uint8_t> data, bool dirty,
                  std::vector<Cache::Line>& writebacks);

  Cache l1_;
  Cache l2_;
};

enum class OpKind : std::uint8_t { Load, Store, Compute, Clflush, RowCloneCopy, RowCloneInit, Mark };

struct TraceOp {
  OpKind kind = OpKind::Load;
  std::uint64_t addr = 0;  // LD/ST/FLUSH address, RCCOPY source, RCINIT destination
  std::uint64_t dst = 0;   // RCCOPY destination
  std::uint64_t size = 0;  // bytes, or cycles for CP
  std::optional<std::uint64_t> pattern;  // ST override data / RCINIT pattern, as a repeated 64-bit word

  bool operator==(const TraceOp&) const = default;
};
using Trace = std::vector<TraceOp>;

class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(std::size_t line, const std::string& what)
      : std::runtime_error("trace line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

Trace parse_trace(std::istream& in);
Trace load_trace(const std::string& path);
void write_trace(std::ostream& out, const Trace& trace);

enum class CopyVariant : std::uint8_t { CpuLdSt, RowClone };
enum class CoherenceSetting : std::uint8_t { NoFlush, Clflush };

Trace gen_copy(std::uint64_t n_bytes, CopyVariant variant, CoherenceSetting setting, std::uint64_t src,
               std::uint64_t dst, std::uint32_t line_bytes = 64);
Trace gen_init(std::uint64_t n_bytes, std::uint64_t pattern, CopyVariant variant, CoherenceSetting setting,
               std::uint64_t dst, std::uint32_t line_bytes = 64);
/// Dependent loads over a random cyclic permutation of `working_set /
/// stride` slots: one warm-up lap, then `loads` measured loads between marks.
Trace gen_latency_chase(std::uint64_t working_set, std::uint64_t stride, std::uint64_t loads, std::uint64_t base,
                        std::uint64_t seed);

/// 64-bit word repeated over n bytes, little-endian.
std::vector<std::uint8_t> pattern_bytes(std::uint64_t pattern, std::size_t n);

/// Where cores put new requests; false means the hardware FIFO is full.
using RequestSink = std::function<bool(MemRequest&)>;

struct CoreStats {
  std::uint64_t loads = 0;
  std::uint64_t stores = 0;
  std::uint64_t l1_hits = 0;
  std::uint64_t l2_hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t writebacks = 0;
  std::uint64_t flush_requests = 0;
  std::uint64_t prefetches = 0;
  std::uint64_t fifo_stalls = 0;
  std::uint64_t fallback_bytes = 0;
  std::uint64_t rowclone_requests = 0;
  std::vector<std::pair<Cycles, std::uint64_t>> marks;  // (cycle, loads so far)
  std::optional<Cycles> finished_at;
};

/// In-order core that blocks on demand misses.
class Core {
 public:
  Core(std::uint32_t id, const CoreConfig& cfg, Trace trace, std::uint64_t id_base);

  /// Executes processor cycle `c`. New requests go to `sink` (tag them there).
  void step(Cycles c, const RequestSink& sink);
  /// Hands a released response to the core at cycle `c` (before step(c)).
  void deliver(const MemResponse& resp, Cycles c);
  bool done() const { return finished_; }
  /// True when the core can make progress without a response.
  bool waiting_on_memory() const { return waiting_ != Wait::None; }
  const CoreStats& stats() const { return stats_; }
  const CacheHierarchy& caches() const { return caches_; }
  CacheHierarchy& caches() { return caches_; }
  std::uint32_t id() const { return id_; }
  /// Earliest cycle at which step() may do anything (for idle skipping).
  Cycles busy_until() const { return busy_until_; }

  /// Architectural view of one line: newest cached data, else `backing`.
  std::vector<std::uint8_t> view_line(std::uint64_t line_addr,
                                      const std::function<std::vector<std::uint8_t>(std::uint64_t)>& backing) const;

 private:
  enum class Wait : std::uint8_t { None, Line, Request };
  struct MicroOp {
    OpKind kind;
    std::uint64_t addr;
    std::optional<std::uint64_t> pattern;
  };

  void start_op(Cycles c);
  bool next_micro(MicroOp& out);
  void run_micro(const MicroOp& op, Cycles c);
  void complete_access(const MicroOp& op, Cycles c);
  MemRequest make_request(RequestKind k, std::uint64_t addr, std::uint64_t size);
  void queue_writebacks(std::vector<Cache::Line>& wbs);
  void maybe_prefetch(std::uint64_t line_addr);
  bool flush_pending(Cycles c, const RequestSink& sink);

  std::uint32_t id_;
  CoreConfig cfg_;
  Trace trace_;
  std::size_t pc_ = 0;
  std::deque<MicroOp> micro_;  // expansion of the current trace op
  std::optional<MicroOp> blocked_op_;
  std::uint64_t next_id_;
  CacheHierarchy caches_;
  Cycles busy_until_ = 0;
  Wait waiting_ = Wait::None;
  std::uint64_t wait_line_ = 0;
  std::uint64_t wait_request_ = 0;
  std::deque<MemRequest> pending_;  // ready to push to the FIFO
  bool block_after_push_ = false;
  std::unordered_set<std::uint64_t> inflight_prefetch_;
  std::unordered_map<std::uint64_t, std::uint64_t> stream_last_miss_;  // region -> last L1-missing line
  std::vector<std::uint8_t> load_buffer_;
  std::uint64_t rc_pattern_ = 0;  // pattern of the outstanding RCINIT
  bool finished_ = false;
  CoreStats stats_;
};

}  // namespace edsim
