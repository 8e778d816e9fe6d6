#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "edsim/command_engine.hpp"
#include "edsim/dram_device.hpp"
#include "edsim/frontend.hpp"
#include "edsim/smc.hpp"

namespace edsim {

class OutOfRows : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RowCloneConfig {
  Nanos t1 = Nanos::from_ns(3.0);  // ACT src -> PRE
  Nanos t2 = Nanos::from_ns(3.0);  // PRE -> ACT dst
  std::uint32_t verify_trials = 1000;
  bool operator==(const RowCloneConfig&) const = default;
};

/// A row as the command engine sees it: flat bank = bg * banks_per_group + bank.
struct RowRef {
  std::uint32_t bank = 0;
  std::uint32_t row = 0;
  auto operator<=>(const RowRef&) const = default;
};

struct CloneOp {
  RowRef src;
  RowRef dst;
  bool verified = false;
  bool operator==(const CloneOp&) const = default;
};

struct RowClonePlan {
  std::uint64_t src_addr = 0;  // copy source range (unused for init)
  std::uint64_t dst_addr = 0;
  std::uint64_t size = 0;      // bytes requested
  std::uint64_t rows = 0;      // whole rows reserved per range
  std::vector<CloneOp> operations;  // verified pairs only
  std::vector<RowRef> fallback_rows;  // destination rows the CPU must write
  std::vector<RowRef> source_rows;    // init: one pattern row per touched (bank, subarray)
};

/// Reserves whole DRAM rows for bulk copy/init buffers. Copy buffers are
/// placed so that the i-th source and destination rows share bank and
/// subarray.
class RowAllocator {
 public:
  RowAllocator(const DramConfig& cfg, const AddressMap& map, std::uint32_t subarray_rows = 512);

  /// Physical (src, dst) base addresses of two row-aligned ranges of n rows.
  std::pair<std::uint64_t, std::uint64_t> allocate_pair(std::uint64_t n_rows);
  /// Physical base address of one row-aligned range of n rows.
  std::uint64_t allocate(std::uint64_t n_rows);
  /// A free row in (bank, subarray); OutOfRows when the subarray is full.
  RowRef allocate_row_in(std::uint32_t bank, std::uint32_t subarray);
  /// Moves the bump cursor (row stripe index), e.g. to start near a subarray edge.
  void set_cursor(std::uint32_t stripe) { cursor_ = stripe; }
  bool used(RowRef r) const { return used_.count(r) != 0; }
  std::uint32_t subarray_rows() const { return sub_; }

  RowRef row_of(std::uint64_t phys) const;

 private:
  /// Lanes: banks a row stripe spans (all banks for RowBankCol, one for BankRowCol).
  std::uint32_t lanes() const;
  std::uint64_t phys_of(std::uint32_t lane, std::uint32_t stripe) const;
  RowRef ref_of(std::uint32_t lane, std::uint32_t stripe) const;
  bool stripe_range_free(std::uint32_t first, std::uint32_t count, std::uint64_t chunks) const;
  void reserve(std::uint32_t first, std::uint64_t chunks);

  DramConfig cfg_;
  AddressMap map_;
  std::uint32_t sub_;
  std::uint32_t cursor_ = 0;
  std::set<RowRef> used_;
};

/// Builds [ACT src @0, PRE @t1, ACT dst @t1+t2] for one bank.
CommandBatch issue_rowclone(const DramAddress& src, const DramAddress& dst, const RowCloneConfig& rc);

/// Stages a clone into `b` on top of `sim`: legal PRE if the bank is open,
/// legal ACT src, then the short PRE/ACT pair. Returns the second ACT's time.
Nanos stage_rowclone(BatchBuilder& b, RankState& sim, const DramAddress& src, const DramAddress& dst,
                     const DramConfig& cfg, const RowCloneConfig& rc, Nanos batch_start);

/// `trials` rounds of fill-source, clone, compare on `engine`; false at the
/// first mismatch.
bool verify_clonable(CommandEngine& engine, std::uint32_t bank, std::uint32_t src_row, std::uint32_t dst_row,
                     std::uint32_t trials, const RowCloneConfig& rc, std::uint64_t seed = 0);

/// Registry of verified pairs and init source rows, shared between planning
/// (host side) and the memory controller.
class RowCloneTechnique {
 public:
  RowCloneTechnique(const DramConfig& cfg, std::shared_ptr<const ChipProfile> profile, RowCloneConfig rc,
                    std::uint64_t seed = 0);

  /// Verifies on a scratch copy of the chip (cached per pair).
  bool verify(std::uint32_t bank, std::uint32_t src, std::uint32_t dst);
  bool verified(std::uint32_t bank, std::uint32_t src, std::uint32_t dst) const;
  void set_init_source(std::uint32_t bank, std::uint32_t subarray, std::uint32_t row);
  std::optional<std::uint32_t> init_source(std::uint32_t bank, std::uint32_t subarray) const;
  std::uint32_t subarray_of(std::uint32_t row) const { return row / subarray_rows_; }
  const RowCloneConfig& config() const { return rc_; }
  std::uint64_t verifications() const { return verifications_; }

 private:
  DramConfig cfg_;
  RowCloneConfig rc_;
  std::uint32_t subarray_rows_;
  std::uint64_t seed_;
  CommandEngine scratch_;
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, bool> pairs_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> init_sources_;
  std::uint64_t verifications_ = 0;
};

RowClonePlan plan_bulk_copy(std::uint64_t size_bytes, RowAllocator& alloc, RowCloneTechnique& tech,
                            const DramConfig& cfg);
RowClonePlan plan_bulk_init(std::uint64_t size_bytes, RowAllocator& alloc, RowCloneTechnique& tech,
                            const DramConfig& cfg);

struct CoherenceActions {
  std::vector<MemRequest> flushes;       // dirty source lines, with data
  std::vector<std::uint64_t> invalidates;  // resident destination lines dropped
};
/// Flushes dirty source lines and invalidates resident destination lines.
CoherenceActions coherence_flush(CacheHierarchy& caches, std::uint64_t src, std::uint64_t dst, std::uint64_t size,
                                 std::uint32_t line_bytes = 64);

// --- tRCD reduction ---------------------------------------------------------

inline const std::vector<Nanos>& default_trcd_ladder() {
  static const std::vector<Nanos> ladder = {Nanos::from_ns(6.0),  Nanos::from_ns(7.5),  Nanos::from_ns(9.0),
                                            Nanos::from_ns(10.5), Nanos::from_ns(12.0), Nanos::from_ns(13.5)};
  return ladder;
}

/// Per-line minimum tRCD measured by write-pattern, reduced-tRCD read,
/// compare, over an ascending ladder. Lines that fail every step get nominal.
ChipProfile profile_chip(CommandEngine& engine, const std::vector<Nanos>& ladder, std::uint32_t subarray_rows = 512);

/// Per-row safe tRCD: the weakest line's requirement.
class RowTrcdTable {
 public:
  RowTrcdTable() = default;
  RowTrcdTable(std::uint32_t banks, std::uint32_t rows_per_bank, Nanos fill);
  static RowTrcdTable from_profile(const ChipProfile& p);

  std::uint32_t banks() const { return banks_; }
  std::uint32_t rows_per_bank() const { return rows_; }
  Nanos value(std::uint32_t bank, std::uint32_t row) const { return values_[std::size_t{bank} * rows_ + row]; }
  void set(std::uint32_t bank, std::uint32_t row, Nanos v) { values_[std::size_t{bank} * rows_ + row] = v; }
  std::vector<RowRef> rows_above(Nanos threshold) const;
  bool operator==(const RowTrcdTable&) const = default;

 private:
  std::uint32_t banks_ = 0;
  std::uint32_t rows_ = 0;
  std::vector<Nanos> values_;
};

class HeatmapParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// `bank,row,min_trcd_ns` header plus one line per bank x row.
void write_heatmap(std::ostream& out, const RowTrcdTable& table);
RowTrcdTable read_heatmap(std::istream& in);

inline std::uint64_t row_key(std::uint32_t bank, std::uint32_t row, std::uint32_t rows_per_bank) {
  return std::uint64_t{bank} * rows_per_bank + row;
}

/// Bloom filter over row keys; membership means "possibly weak".
class WeakRowFilter {
 public:
  WeakRowFilter() = default;
  WeakRowFilter(std::uint64_t m_bits, std::vector<std::uint64_t> seeds);
  static WeakRowFilter with_seed(std::uint64_t m_bits, std::uint32_t k, std::uint64_t seed);

  void insert(std::uint64_t key);
  bool possibly_contains(std::uint64_t key) const;
  std::uint64_t m() const { return m_; }
  std::uint32_t k() const { return static_cast<std::uint32_t>(seeds_.size()); }
  const std::vector<std::uint64_t>& seeds() const { return seeds_; }
  std::uint64_t inserted() const { return inserted_; }
  std::uint64_t bits_set() const;
  bool operator==(const WeakRowFilter&) const = default;

  /// `BLOOM m k n`, `SEEDS` hex list, `BITS` hex dump (word 0 first).
  void write(std::ostream& out) const;
  static WeakRowFilter read(std::istream& in);

 private:
  std::uint64_t index(std::uint64_t key, std::size_t i) const;

  std::uint64_t m_ = 0;
  std::vector<std::uint64_t> seeds_;
  std::vector<std::uint64_t> bits_;
  std::uint64_t inserted_ = 0;
};

/// (1 - e^(-kn/m))^k.
double expected_fp_rate(std::uint64_t m, std::uint32_t k, std::uint64_t n);

struct FilterParams {
  Nanos threshold = kStrongTrcdThreshold;
  std::uint32_t bits_per_row = 16;
  std::uint32_t k = 4;
  std::uint64_t seed = 0;
};
/// Inserts every row whose value exceeds the threshold.
WeakRowFilter build_weak_filter(const RowTrcdTable& table, const FilterParams& params = {});

Nanos trcd_for_row(const WeakRowFilter& filter, std::uint64_t key, Nanos reduced = Nanos::from_ns(9.0),
                   Nanos nominal = Nanos::from_ns(13.5));

struct TrcdStats {
  std::uint64_t activations = 0;
  std::uint64_t reduced_activations = 0;
  std::uint64_t filter_false_positives = 0;  // strong rows kept at nominal
};

/// Controller-side tRCD selection.
class TrcdReduction {
 public:
  TrcdReduction(WeakRowFilter filter, RowTrcdTable truth, Nanos reduced, Nanos nominal, Nanos threshold);

  /// tRCD for a read that opens (bank, row); nullopt means nominal.
  std::optional<Nanos> act_trcd(std::uint32_t bank, std::uint32_t row);
  const TrcdStats& stats() const { return stats_; }
  const WeakRowFilter& filter() const { return filter_; }
  const RowTrcdTable& table() const { return truth_; }

 private:
  WeakRowFilter filter_;
  RowTrcdTable truth_;
  Nanos reduced_, nominal_, threshold_;
  TrcdStats stats_;
};

/// Watches every RD on an engine and counts reads whose applied tRCD is
/// below the row's safe value.
class TrcdSafetyMonitor {
 public:
  TrcdSafetyMonitor(RowTrcdTable table, Nanos nominal);
  void attach(CommandEngine& engine);

  std::uint64_t reads() const { return reads_; }
  std::uint64_t reduced_reads() const { return reduced_; }
  std::uint64_t violations() const { return violations_; }
  std::uint64_t corrupt_reads() const { return corrupt_; }

 private:
  RowTrcdTable table_;
  Nanos nominal_;
  std::uint32_t banks_per_group_ = 1;
  std::uint64_t reads_ = 0, reduced_ = 0, violations_ = 0, corrupt_ = 0;
};

}  // namespace edsim
