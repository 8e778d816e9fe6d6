#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "edsim/dram_timing.hpp"

namespace edsim {

/// Lines readable at or below this tRCD are strong; above are weak.
inline constexpr Nanos kStrongTrcdThreshold = Nanos::from_ps(9000);

/// Discrete minimum-tRCD steps of the modeled chip. The top step sits one
/// picosecond under nominal so every line works below nominal.
inline constexpr Nanos kStrongTrcdLevels[] = {Nanos::from_ps(6000), Nanos::from_ps(7500), Nanos::from_ps(8250),
                                             Nanos::from_ps(9000)};
inline constexpr Nanos kWeakTrcdLevels[] = {Nanos::from_ps(10500), Nanos::from_ps(12000), Nanos::from_ps(13499)};

struct ProfileGeometry {
  std::uint32_t bank_groups = 4;
  std::uint32_t banks_per_group = 4;
  std::uint32_t rows = 32768;
  std::uint32_t lines_per_row = 128;
  std::uint32_t subarray_rows = 512;

  static ProfileGeometry of(const DramConfig& cfg, std::uint32_t subarray_rows = 512);
  std::uint32_t banks() const { return bank_groups * banks_per_group; }
  std::uint64_t total_lines() const { return std::uint64_t{banks()} * rows * lines_per_row; }
  bool operator==(const ProfileGeometry&) const = default;
};

/// Symmetric, irreflexive, intra-subarray relation of row pairs for which
/// in-DRAM copy works. Generated relations are a seeded hash rule; loaded or
/// hand-built ones list pairs explicitly. Both may coexist.
class ClonableRelation {
 public:
  void set_rule(std::uint64_t seed, std::uint64_t threshold) { rule_ = Rule{seed, threshold}; }
  void set_rule_rate(std::uint64_t seed, double rate);
  void add(std::uint32_t bank, std::uint32_t a, std::uint32_t b);
  void remove(std::uint32_t bank, std::uint32_t a, std::uint32_t b);

  bool contains(std::uint32_t bank, std::uint32_t a, std::uint32_t b, std::uint32_t subarray_rows) const;

  struct Rule {
    std::uint64_t seed;
    std::uint64_t threshold;  // pair clonable iff hash < threshold (UINT64_MAX = all)
    bool operator==(const Rule&) const = default;
  };
  const std::optional<Rule>& rule() const { return rule_; }
  const std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>>& explicit_pairs() const { return pairs_; }
  const std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>>& excluded_pairs() const { return excluded_; }
  bool operator==(const ClonableRelation&) const = default;

 private:
  std::optional<Rule> rule_;
  std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> pairs_;
  std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> excluded_;
};

/// The modeled chip's reliability: per-line minimum reliable tRCD and the
/// clonable-pair relation.
class ChipProfile {
 public:
  ChipProfile() = default;
  ChipProfile(ProfileGeometry g, std::uint64_t seed);

  const ProfileGeometry& geometry() const { return geom_; }
  std::uint64_t seed() const { return seed_; }

  Nanos min_trcd(std::uint32_t flat_bank, std::uint32_t row, std::uint32_t line) const {
    return Nanos::from_ps(trcd_ps_[index(flat_bank, row, line)]);
  }
  void set_min_trcd(std::uint32_t flat_bank, std::uint32_t row, std::uint32_t line, Nanos v);
  /// Weakest line of the row: the smallest tRCD safe for every line.
  Nanos row_trcd(std::uint32_t flat_bank, std::uint32_t row) const;

  std::uint32_t subarray_of(std::uint32_t row) const { return row / geom_.subarray_rows; }
  bool clonable(std::uint32_t flat_bank, std::uint32_t src, std::uint32_t dst) const {
    return clonable_.contains(flat_bank, src, dst, geom_.subarray_rows);
  }
  ClonableRelation& clonable_relation() { return clonable_; }
  const ClonableRelation& clonable_relation() const { return clonable_; }

  bool operator==(const ChipProfile&) const = default;

 private:
  std::size_t index(std::uint32_t bank, std::uint32_t row, std::uint32_t line) const {
    return (std::size_t{bank} * geom_.rows + row) * geom_.lines_per_row + line;
  }

  ProfileGeometry geom_{};
  std::uint64_t seed_ = 0;
  std::vector<std::uint16_t> trcd_ps_;
  ClonableRelation clonable_;
};

/// Builds a profile whose strong-line fraction matches `strong_fraction` to
/// within one line, with weak lines packed into contiguous row runs.
ChipProfile generate_profile(const ProfileGeometry& geom, double strong_fraction, double clonable_success_rate,
                             std::uint64_t seed);

enum class AccessOutcome { Correct, Corrupt };
AccessOutcome access_outcome(const ChipProfile& profile, const DramAddress& addr, Nanos applied_trcd);

enum class CloneOutcome { Success, Fail };
CloneOutcome rowclone_outcome(const ChipProfile& profile, std::uint32_t flat_bank, std::uint32_t src_row,
                              std::uint32_t dst_row);

class ProfileParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_profile(std::ostream& out, const ChipProfile& profile);
ChipProfile read_profile(std::istream& in);

/// Backing store for row contents. Untouched rows read as a deterministic
/// seeded fill and are only materialized on first write.
class RowData {
 public:
  RowData(std::uint32_t row_size_bytes, std::uint32_t line_bytes, std::uint32_t rows_per_bank, std::uint64_t fill_seed);
  explicit RowData(const DramConfig& cfg, std::uint64_t fill_seed = 0);

  std::uint32_t row_size() const { return row_size_; }
  std::uint32_t line_size() const { return line_size_; }

  std::vector<std::uint8_t> read_row(std::uint32_t bank, std::uint32_t row) const;
  std::vector<std::uint8_t> read_line(std::uint32_t bank, std::uint32_t row, std::uint32_t line) const;
  void write_row(std::uint32_t bank, std::uint32_t row, std::span<const std::uint8_t> bytes);
  void write_line(std::uint32_t bank, std::uint32_t row, std::uint32_t line, std::span<const std::uint8_t> bytes);
  void copy_row(std::uint32_t bank, std::uint32_t src, std::uint32_t dst);
  /// Replaces the row with seeded pseudo-random bytes.
  void corrupt_row(std::uint32_t bank, std::uint32_t row, std::uint64_t seed);

  /// Order-independent digest over every materialized row.
  std::uint64_t digest() const;
  bool operator==(const RowData& o) const { return digest() == o.digest(); }

 private:
  std::uint64_t key(std::uint32_t bank, std::uint32_t row) const { return std::uint64_t{bank} * rows_per_bank_ + row; }
  std::vector<std::uint8_t>& materialize(std::uint32_t bank, std::uint32_t row);
  void fill(std::uint64_t row_key, std::span<std::uint8_t> out) const;

  std::uint32_t row_size_;
  std::uint32_t line_size_;
  std::uint32_t rows_per_bank_;
  std::uint64_t fill_seed_;
  std::unordered_map<std::uint64_t, std::vector<std::uint8_t>> rows_;
};

}  // namespace edsim
