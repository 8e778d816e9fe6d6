#include "edsim/dram_device.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "edsim/rng.hpp"

namespace edsim {

namespace {

auto ordered(std::uint32_t bank, std::uint32_t a, std::uint32_t b) {
  return std::make_tuple(bank, std::min(a, b), std::max(a, b));
}

// Draws `count` distinct values in [lo, hi] and returns them sorted.
std::vector<std::uint64_t> distinct_sorted(Rng& rng, std::uint64_t count, std::uint64_t lo, std::uint64_t hi) {
  std::set<std::uint64_t> picked;
  while (picked.size() < count) picked.insert(lo + rng.below(hi - lo + 1));
  return {picked.begin(), picked.end()};
}

}  // namespace

ProfileGeometry ProfileGeometry::of(const DramConfig& cfg, std::uint32_t subarray_rows) {
  return {cfg.bank_groups, cfg.banks_per_group, cfg.rows_per_bank, cfg.lines_per_row(), subarray_rows};
}

void ClonableRelation::set_rule_rate(std::uint64_t seed, double rate) {
  std::uint64_t threshold;
  if (rate >= 1.0)
    threshold = UINT64_MAX;
  else if (rate <= 0.0)
    threshold = 0;
  else
    threshold = static_cast<std::uint64_t>(std::ldexp(rate, 64));
  set_rule(seed, threshold);
}

void ClonableRelation::add(std::uint32_t bank, std::uint32_t a, std::uint32_t b) {
  if (a == b) return;
  excluded_.erase(ordered(bank, a, b));
  pairs_.insert(ordered(bank, a, b));
}

void ClonableRelation::remove(std::uint32_t bank, std::uint32_t a, std::uint32_t b) {
  pairs_.erase(ordered(bank, a, b));
  excluded_.insert(ordered(bank, a, b));
}

bool ClonableRelation::contains(std::uint32_t bank, std::uint32_t a, std::uint32_t b,
                                std::uint32_t subarray_rows) const {
  if (a == b || a / subarray_rows != b / subarray_rows) return false;
  const auto key = ordered(bank, a, b);
  if (pairs_.count(key)) return true;
  if (excluded_.count(key) || !rule_) return false;
  if (rule_->threshold == UINT64_MAX) return true;
  return hash_of(rule_->seed, bank, std::get<1>(key), std::get<2>(key)) < rule_->threshold;
}

ChipProfile::ChipProfile(ProfileGeometry g, std::uint64_t seed)
    : geom_(g), seed_(seed), trcd_ps_(g.total_lines(), static_cast<std::uint16_t>(kStrongTrcdLevels[0].ps())) {
  if (g.subarray_rows == 0) throw ConfigError("subarray_rows must be positive");
}

void ChipProfile::set_min_trcd(std::uint32_t flat_bank, std::uint32_t row, std::uint32_t line, Nanos v) {
  if (v.ps() <= 0 || v.ps() > UINT16_MAX) throw std::out_of_range("min tRCD outside the representable range");
  trcd_ps_[index(flat_bank, row, line)] = static_cast<std::uint16_t>(v.ps());
}

Nanos ChipProfile::row_trcd(std::uint32_t flat_bank, std::uint32_t row) const {
  const auto first = trcd_ps_.begin() + static_cast<std::ptrdiff_t>(index(flat_bank, row, 0));
  return Nanos::from_ps(*std::max_element(first, first + geom_.lines_per_row));
}

ChipProfile generate_profile(const ProfileGeometry& geom, double strong_fraction, double clonable_success_rate,
                             std::uint64_t seed) {
  if (!(strong_fraction >= 0.0 && strong_fraction <= 1.0))
    throw std::invalid_argument("strong_fraction must be in [0, 1]");
  if (!(clonable_success_rate >= 0.0 && clonable_success_rate <= 1.0))
    throw std::invalid_argument("clonable_success_rate must be in [0, 1]");

  ChipProfile p(geom, seed);
  Rng rng(seed);
  const std::uint64_t total = geom.total_lines();
  const std::uint64_t L = geom.lines_per_row;
  const std::uint64_t row_slots = std::uint64_t{geom.banks()} * geom.rows;
  const auto weak_lines =
      std::min<std::uint64_t>(total, static_cast<std::uint64_t>(std::llround((1.0 - strong_fraction) * total)));

  // Weak lines fill whole rows, grouped into runs of about 64 rows placed at
  // random positions over the bank-major row space.
  std::vector<bool> weak_row(row_slots, false);
  std::uint64_t partial_row = row_slots;
  const std::uint64_t full_rows = weak_lines / L;
  const std::uint64_t partial = weak_lines % L;
  const std::uint64_t weak_rows = full_rows + (partial ? 1 : 0);
  if (weak_rows > 0) {
    const std::uint64_t runs = std::clamp<std::uint64_t>(weak_rows / 64, 1, weak_rows);
    std::vector<std::uint64_t> lengths;
    std::uint64_t prev = 0;
    for (auto cut : distinct_sorted(rng, runs - 1, 1, weak_rows - 1)) {
      lengths.push_back(cut - prev);
      prev = cut;
    }
    lengths.push_back(weak_rows - prev);

    const std::uint64_t free_rows = row_slots - weak_rows;
    std::vector<std::uint64_t> marks(runs);
    for (auto& m : marks) m = rng.below(free_rows + 1);
    std::sort(marks.begin(), marks.end());
    std::uint64_t pos = 0;
    std::uint64_t gap_base = 0;
    for (std::uint64_t r = 0; r < runs; ++r) {
      pos += marks[r] - gap_base;
      gap_base = marks[r];
      for (std::uint64_t i = 0; i < lengths[r]; ++i) weak_row[pos++] = true;
    }
    if (partial) partial_row = pos - 1;
  }

  std::uint64_t slot = 0;
  for (std::uint32_t bank = 0; bank < geom.banks(); ++bank) {
    for (std::uint32_t row = 0; row < geom.rows; ++row, ++slot) {
      const std::uint64_t weak_in_row = !weak_row[slot] ? 0 : (slot == partial_row ? partial : L);
      for (std::uint32_t line = 0; line < L; ++line) {
        const bool weak = line < weak_in_row;
        const Nanos v = weak ? kWeakTrcdLevels[rng.below(std::size(kWeakTrcdLevels))]
                             : kStrongTrcdLevels[rng.below(std::size(kStrongTrcdLevels))];
        p.set_min_trcd(bank, row, line, v);
      }
    }
  }
  p.clonable_relation().set_rule_rate(hash_of(seed, 0xC10AE), clonable_success_rate);
  return p;
}

AccessOutcome access_outcome(const ChipProfile& profile, const DramAddress& addr, Nanos applied_trcd) {
  const std::uint32_t bank = addr.bank_group * profile.geometry().banks_per_group + addr.bank;
  return applied_trcd >= profile.min_trcd(bank, addr.row, addr.column) ? AccessOutcome::Correct
                                                                       : AccessOutcome::Corrupt;
}

CloneOutcome rowclone_outcome(const ChipProfile& profile, std::uint32_t flat_bank, std::uint32_t src_row,
                              std::uint32_t dst_row) {
  return profile.clonable(flat_bank, src_row, dst_row) ? CloneOutcome::Success : CloneOutcome::Fail;
}

void write_profile(std::ostream& out, const ChipProfile& profile) {
  const auto& g = profile.geometry();
  out << "EDSIM-PROFILE 1\n";
  out << "GEOMETRY " << g.bank_groups << ' ' << g.banks_per_group << ' ' << g.rows << ' ' << g.lines_per_row << ' '
      << g.subarray_rows << '\n';
  out << "SEED " << profile.seed() << '\n';
  for (std::uint32_t bg = 0; bg < g.bank_groups; ++bg)
    for (std::uint32_t b = 0; b < g.banks_per_group; ++b)
      for (std::uint32_t row = 0; row < g.rows; ++row)
        for (std::uint32_t line = 0; line < g.lines_per_row; ++line)
          out << bg << ' ' << b << ' ' << row << ' ' << line << ' '
              << profile.min_trcd(bg * g.banks_per_group + b, row, line).str() << '\n';
  const auto& rel = profile.clonable_relation();
  if (rel.rule()) out << "CLONABLE_RULE " << rel.rule()->seed << ' ' << rel.rule()->threshold << '\n';
  for (const auto& [bank, a, b] : rel.explicit_pairs()) out << "CLONABLE " << bank << ' ' << a << ' ' << b << '\n';
  for (const auto& [bank, a, b] : rel.excluded_pairs())
    out << "NOT_CLONABLE " << bank << ' ' << a << ' ' << b << '\n';
}

ChipProfile read_profile(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) -> ProfileParseError {
    return ProfileParseError("profile line " + std::to_string(lineno) + ": " + why);
  };
  auto next = [&]() {
    ++lineno;
    return static_cast<bool>(std::getline(in, line));
  };
  if (!next() || line != "EDSIM-PROFILE 1") throw fail("missing EDSIM-PROFILE 1 header");
  ProfileGeometry g;
  std::uint64_t seed = 0;
  {
    if (!next()) throw fail("missing GEOMETRY");
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag >> g.bank_groups >> g.banks_per_group >> g.rows >> g.lines_per_row >> g.subarray_rows) ||
        tag != "GEOMETRY" || g.subarray_rows == 0)
      throw fail("bad GEOMETRY");
  }
  {
    if (!next()) throw fail("missing SEED");
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag >> seed) || tag != "SEED") throw fail("bad SEED");
  }
  ChipProfile p(g, seed);
  std::uint64_t seen = 0;
  while (next()) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string first;
    ss >> first;
    if (first == "CLONABLE_RULE") {
      std::uint64_t s, t;
      if (!(ss >> s >> t)) throw fail("bad CLONABLE_RULE");
      p.clonable_relation().set_rule(s, t);
    } else if (first == "CLONABLE" || first == "NOT_CLONABLE") {
      std::uint32_t bank, a, b;
      if (!(ss >> bank >> a >> b) || bank >= g.banks() || a >= g.rows || b >= g.rows) throw fail("bad " + first);
      if (first == "CLONABLE")
        p.clonable_relation().add(bank, a, b);
      else
        p.clonable_relation().remove(bank, a, b);
    } else {
      std::uint32_t bank, row, l;
      std::string ns;
      std::uint32_t bg;
      try {
        bg = static_cast<std::uint32_t>(std::stoul(first));
      } catch (const std::exception&) {
        throw fail("unrecognized record '" + first + "'");
      }
      if (!(ss >> bank >> row >> l >> ns)) throw fail("bad line record");
      if (bg >= g.bank_groups || bank >= g.banks_per_group || row >= g.rows || l >= g.lines_per_row)
        throw fail("line record out of range");
      try {
        p.set_min_trcd(bg * g.banks_per_group + bank, row, l, parse_nanos(ns));
      } catch (const std::exception& e) {
        throw fail(e.what());
      }
      ++seen;
    }
  }
  if (seen != g.total_lines()) throw ProfileParseError("profile lists " + std::to_string(seen) + " lines, expected " +
                                                       std::to_string(g.total_lines()));
  return p;
}

RowData::RowData(std::uint32_t row_size_bytes, std::uint32_t line_bytes, std::uint32_t rows_per_bank,
                 std::uint64_t fill_seed)
    : row_size_(row_size_bytes), line_size_(line_bytes), rows_per_bank_(rows_per_bank), fill_seed_(fill_seed) {}

RowData::RowData(const DramConfig& cfg, std::uint64_t fill_seed)
    : RowData(cfg.row_size_bytes(), cfg.cache_line_bytes, cfg.rows_per_bank, fill_seed) {}

void RowData::fill(std::uint64_t row_key, std::span<std::uint8_t> out) const {
  const std::uint64_t base = hash_of(fill_seed_, row_key);
  for (std::size_t i = 0; i < out.size(); i += 8) {
    std::uint64_t w = splitmix64(base + i / 8);
    for (std::size_t j = 0; j < 8 && i + j < out.size(); ++j, w >>= 8) out[i + j] = static_cast<std::uint8_t>(w);
  }
}

std::vector<std::uint8_t>& RowData::materialize(std::uint32_t bank, std::uint32_t row) {
  const auto k = key(bank, row);
  auto it = rows_.find(k);
  if (it != rows_.end()) return it->second;
  std::vector<std::uint8_t> bytes(row_size_);
  fill(k, bytes);
  return rows_.emplace(k, std::move(bytes)).first->second;
}

std::vector<std::uint8_t> RowData::read_row(std::uint32_t bank, std::uint32_t row) const {
  const auto k = key(bank, row);
  if (auto it = rows_.find(k); it != rows_.end()) return it->second;
  std::vector<std::uint8_t> bytes(row_size_);
  fill(k, bytes);
  return bytes;
}

std::vector<std::uint8_t> RowData::read_line(std::uint32_t bank, std::uint32_t row, std::uint32_t line) const {
  const auto k = key(bank, row);
  if (auto it = rows_.find(k); it != rows_.end()) {
    const auto first = it->second.begin() + static_cast<std::ptrdiff_t>(line) * line_size_;
    return {first, first + line_size_};
  }
  auto bytes = read_row(bank, row);
  const auto first = bytes.begin() + static_cast<std::ptrdiff_t>(line) * line_size_;
  return {first, first + line_size_};
}

void RowData::write_row(std::uint32_t bank, std::uint32_t row, std::span<const std::uint8_t> bytes) {
  if (bytes.size() != row_size_) throw std::invalid_argument("row write must be exactly one row");
  auto& dst = materialize(bank, row);
  std::copy(bytes.begin(), bytes.end(), dst.begin());
}

void RowData::write_line(std::uint32_t bank, std::uint32_t row, std::uint32_t line,
                         std::span<const std::uint8_t> bytes) {
  if (bytes.size() != line_size_) throw std::invalid_argument("line write must be exactly one line");
  auto& dst = materialize(bank, row);
  std::copy(bytes.begin(), bytes.end(), dst.begin() + static_cast<std::ptrdiff_t>(line) * line_size_);
}

void RowData::copy_row(std::uint32_t bank, std::uint32_t src, std::uint32_t dst) {
  auto bytes = read_row(bank, src);
  write_row(bank, dst, bytes);
}

void RowData::corrupt_row(std::uint32_t bank, std::uint32_t row, std::uint64_t seed) {
  auto& dst = materialize(bank, row);
  RowData noise(row_size_, line_size_, rows_per_bank_, seed);
  noise.fill(key(bank, row), dst);
}

std::uint64_t RowData::digest() const {
  // Rows equal to their default fill are skipped so materialization by a
  // read-modify-write of identical bytes does not change the digest.
  std::uint64_t acc = 0;
  std::vector<std::uint8_t> def(row_size_);
  for (const auto& [k, bytes] : rows_) {
    fill(k, def);
    if (def == bytes) continue;
    std::uint64_t h = splitmix64(k);
    for (std::size_t i = 0; i < bytes.size(); i += 8) {
      std::uint64_t w = 0;
      for (std::size_t j = 0; j < 8 && i + j < bytes.size(); ++j) w |= std::uint64_t{bytes[i + j]} << (8 * j);
      h = hash_combine(h, w);
    }
    acc += h;
  }
  return acc;
}

}  // namespace edsim
