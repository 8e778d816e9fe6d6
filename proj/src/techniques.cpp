#include "edsim/techniques.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "edsim/rng.hpp"

namespace edsim {

// --- allocation -------------------------------------------------------------

RowAllocator::RowAllocator(const DramConfig& cfg, const AddressMap& map, std::uint32_t subarray_rows)
    : cfg_(cfg), map_(map), sub_(subarray_rows) {
  if (sub_ == 0 || cfg.rows_per_bank % sub_ != 0)
    throw ConfigError("rows per bank must be a multiple of the subarray size");
}

std::uint32_t RowAllocator::lanes() const {
  return map_.scheme() == MapScheme::RowBankCol ? cfg_.total_banks() : 1;
}

std::uint64_t RowAllocator::phys_of(std::uint32_t lane, std::uint32_t stripe) const {
  return (std::uint64_t{stripe} * lanes() + lane) * map_.row_size();
}

RowRef RowAllocator::ref_of(std::uint32_t lane, std::uint32_t stripe) const { return row_of(phys_of(lane, stripe)); }

RowRef RowAllocator::row_of(std::uint64_t phys) const {
  const auto a = map_.map(phys);
  return {a.flat_bank(cfg_), a.row};
}

bool RowAllocator::stripe_range_free(std::uint32_t first, std::uint32_t count, std::uint64_t chunks) const {
  const std::uint64_t stripes = map_.capacity() / map_.row_size() / lanes();
  if (std::uint64_t{first} + count > stripes) return false;
  for (std::uint64_t i = 0; i < chunks; ++i)
    if (used(ref_of(static_cast<std::uint32_t>(i % lanes()), first + static_cast<std::uint32_t>(i / lanes()))))
      return false;
  return true;
}

void RowAllocator::reserve(std::uint32_t first, std::uint64_t chunks) {
  for (std::uint64_t i = 0; i < chunks; ++i)
    used_.insert(ref_of(static_cast<std::uint32_t>(i % lanes()), first + static_cast<std::uint32_t>(i / lanes())));
}

std::pair<std::uint64_t, std::uint64_t> RowAllocator::allocate_pair(std::uint64_t n_rows) {
  if (n_rows == 0) throw std::invalid_argument("allocation of zero rows");
  const std::uint64_t stripes = map_.capacity() / map_.row_size() / lanes();
  const auto span = static_cast<std::uint32_t>((n_rows + lanes() - 1) / lanes());
  for (std::uint64_t a = cursor_; a + 2ull * span <= stripes; ++a) {
    const auto s = static_cast<std::uint32_t>(a);
    // Both ranges inside one subarray; ranges larger than half a subarray
    // start on a boundary and accept some cross-subarray (fallback) rows.
    if (2 * span <= sub_ ? s % sub_ + 2 * span > sub_ : s % sub_ != 0) continue;
    if (!stripe_range_free(s, span, n_rows) || !stripe_range_free(s + span, span, n_rows)) continue;
    reserve(s, n_rows);
    reserve(s + span, n_rows);
    cursor_ = s + 2 * span;
    return {phys_of(0, s), phys_of(0, s + span)};
  }
  throw OutOfRows("no room for a " + std::to_string(n_rows) + "-row copy pair");
}

std::uint64_t RowAllocator::allocate(std::uint64_t n_rows) {
  if (n_rows == 0) throw std::invalid_argument("allocation of zero rows");
  const std::uint64_t stripes = map_.capacity() / map_.row_size() / lanes();
  const auto span = static_cast<std::uint32_t>((n_rows + lanes() - 1) / lanes());
  for (std::uint64_t a = cursor_; a + span <= stripes; ++a) {
    const auto s = static_cast<std::uint32_t>(a);
    if (!stripe_range_free(s, span, n_rows)) continue;
    reserve(s, n_rows);
    cursor_ = s + span;
    return phys_of(0, s);
  }
  throw OutOfRows("no room for " + std::to_string(n_rows) + " rows");
}

RowRef RowAllocator::allocate_row_in(std::uint32_t bank, std::uint32_t subarray) {
  const std::uint32_t lo = subarray * sub_;
  if (lo >= cfg_.rows_per_bank) throw OutOfRows("subarray index out of range");
  // Take rows from the top so the bump cursor rarely collides with them.
  for (std::uint32_t r = lo + sub_; r-- > lo;) {
    RowRef ref{bank, r};
    if (!used(ref)) {
      used_.insert(ref);
      return ref;
    }
  }
  throw OutOfRows("subarray " + std::to_string(subarray) + " of bank " + std::to_string(bank) + " is full");
}

// --- RowClone ---------------------------------------------------------------

CommandBatch issue_rowclone(const DramAddress& src, const DramAddress& dst, const RowCloneConfig& rc) {
  BatchBuilder b(false);
  b.stage(DramCommand::act(src), Nanos::zero());
  b.stage(DramCommand::pre(src), rc.t1);
  b.stage(DramCommand::act(dst), rc.t2);
  return b.take();
}

Nanos stage_rowclone(BatchBuilder& b, RankState& sim, const DramAddress& src, const DramAddress& dst,
                     const DramConfig& cfg, const RowCloneConfig& rc, Nanos batch_start) {
  if (sim.bank(cfg, src).open_row) stage_legal(b, sim, DramCommand::pre(src), cfg, batch_start, batch_start);
  const Nanos t0 = stage_legal(b, sim, DramCommand::act(src), cfg, batch_start, batch_start);
  b.stage(DramCommand::pre(src), rc.t1);
  apply_command(sim, DramCommand::pre(src), cfg, t0 + rc.t1);
  b.stage(DramCommand::act(dst), rc.t2);
  apply_command(sim, DramCommand::act(dst), cfg, t0 + rc.t1 + rc.t2);
  return t0 + rc.t1 + rc.t2;
}

bool verify_clonable(CommandEngine& engine, std::uint32_t bank, std::uint32_t src_row, std::uint32_t dst_row,
                     std::uint32_t trials, const RowCloneConfig& rc, std::uint64_t seed) {
  const auto& cfg = engine.config();
  const auto src = address_of_flat_bank(cfg, bank, src_row);
  const auto dst = address_of_flat_bank(cfg, bank, dst_row);
  std::vector<std::uint8_t> fill(cfg.row_size_bytes());
  for (std::uint32_t t = 0; t < trials; ++t) {
    std::uint64_t h = hash_of(seed, t);
    for (std::size_t i = 0; i < fill.size(); ++i) {
      if (i % 8 == 0) h = splitmix64(h);
      fill[i] = static_cast<std::uint8_t>(h >> (8 * (i % 8)));
    }
    engine.data().write_row(bank, src_row, fill);
    BatchBuilder b(false);
    RankState sim = engine.rank();
    stage_rowclone(b, sim, src, dst, cfg, rc, engine.now());
    engine.flush(b.take());
    if (engine.data().read_row(bank, dst_row) != fill) return false;
  }
  return true;
}

RowCloneTechnique::RowCloneTechnique(const DramConfig& cfg, std::shared_ptr<const ChipProfile> profile,
                                     RowCloneConfig rc, std::uint64_t seed)
    : cfg_(cfg),
      rc_(rc),
      subarray_rows_(profile ? profile->geometry().subarray_rows : 512),
      seed_(seed),
      scratch_(cfg, std::move(profile), hash_of(seed, 0x5C7A), hash_of(seed, 0xC0))
{}

bool RowCloneTechnique::verify(std::uint32_t bank, std::uint32_t src, std::uint32_t dst) {
  const auto key = std::make_tuple(bank, src, dst);
  if (auto it = pairs_.find(key); it != pairs_.end()) return it->second;
  bool ok = false;
  if (src != dst && subarray_of(src) == subarray_of(dst)) {
    ++verifications_;
    ok = verify_clonable(scratch_, bank, src, dst, rc_.verify_trials, rc_, hash_of(seed_, bank, src, dst));
  }
  pairs_.emplace(key, ok);
  return ok;
}

bool RowCloneTechnique::verified(std::uint32_t bank, std::uint32_t src, std::uint32_t dst) const {
  auto it = pairs_.find(std::make_tuple(bank, src, dst));
  return it != pairs_.end() && it->second;
}

void RowCloneTechnique::set_init_source(std::uint32_t bank, std::uint32_t subarray, std::uint32_t row) {
  init_sources_[{bank, subarray}] = row;
}

std::optional<std::uint32_t> RowCloneTechnique::init_source(std::uint32_t bank, std::uint32_t subarray) const {
  auto it = init_sources_.find({bank, subarray});
  if (it == init_sources_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::uint64_t rows_for(std::uint64_t size, const DramConfig& cfg) {
  if (size == 0) throw std::invalid_argument("bulk operation of zero bytes");
  return (size + cfg.row_size_bytes() - 1) / cfg.row_size_bytes();
}

}  // namespace

RowClonePlan plan_bulk_copy(std::uint64_t size_bytes, RowAllocator& alloc, RowCloneTechnique& tech,
                            const DramConfig& cfg) {
  RowClonePlan plan;
  plan.size = size_bytes;
  plan.rows = rows_for(size_bytes, cfg);
  std::tie(plan.src_addr, plan.dst_addr) = alloc.allocate_pair(plan.rows);
  for (std::uint64_t i = 0; i < plan.rows; ++i) {
    const RowRef s = alloc.row_of(plan.src_addr + i * cfg.row_size_bytes());
    const RowRef d = alloc.row_of(plan.dst_addr + i * cfg.row_size_bytes());
    if (s.bank == d.bank && tech.verify(s.bank, s.row, d.row))
      plan.operations.push_back({s, d, true});
    else
      plan.fallback_rows.push_back(d);
  }
  return plan;
}

RowClonePlan plan_bulk_init(std::uint64_t size_bytes, RowAllocator& alloc, RowCloneTechnique& tech,
                            const DramConfig& cfg) {
  RowClonePlan plan;
  plan.size = size_bytes;
  plan.rows = rows_for(size_bytes, cfg);
  plan.dst_addr = alloc.allocate(plan.rows);
  for (std::uint64_t i = 0; i < plan.rows; ++i) {
    const RowRef d = alloc.row_of(plan.dst_addr + i * cfg.row_size_bytes());
    const std::uint32_t sub = tech.subarray_of(d.row);
    auto src = tech.init_source(d.bank, sub);
    if (!src) {
      try {
        src = alloc.allocate_row_in(d.bank, sub).row;
      } catch (const OutOfRows&) {
        plan.fallback_rows.push_back(d);
        continue;
      }
      tech.set_init_source(d.bank, sub, *src);
    }
    const RowRef s{d.bank, *src};
    if (std::find(plan.source_rows.begin(), plan.source_rows.end(), s) == plan.source_rows.end())
      plan.source_rows.push_back(s);
    if (tech.verify(d.bank, s.row, d.row))
      plan.operations.push_back({s, d, true});
    else
      plan.fallback_rows.push_back(d);
  }
  return plan;
}

CoherenceActions coherence_flush(CacheHierarchy& caches, std::uint64_t src, std::uint64_t dst, std::uint64_t size,
                                 std::uint32_t line_bytes) {
  CoherenceActions out;
  std::uint64_t id = 0;
  for (std::uint64_t a = src - src % line_bytes; a < src + size; a += line_bytes) {
    if (!caches.is_dirty(a)) continue;
    MemRequest r;
    r.id = id++;
    r.kind = RequestKind::Flush;
    r.phys_addr = a;
    r.size_bytes = line_bytes;
    r.payload = *caches.flush(a);
    out.flushes.push_back(std::move(r));
  }
  for (std::uint64_t a = dst - dst % line_bytes; a < dst + size; a += line_bytes) {
    if (caches.probe(a) == CacheHierarchy::Level::Miss) continue;
    caches.invalidate(a);
    out.invalidates.push_back(a);
  }
  return out;
}

// --- tRCD profiling ---------------------------------------------------------

ChipProfile profile_chip(CommandEngine& engine, const std::vector<Nanos>& ladder, std::uint32_t subarray_rows) {
  const auto& cfg = engine.config();
  const Nanos nominal = cfg.t(TimingParam::tRCD);
  std::vector<Nanos> steps = ladder;
  std::sort(steps.begin(), steps.end());
  ChipProfile out(ProfileGeometry::of(cfg, subarray_rows), 0);
  const std::uint32_t lines = cfg.lines_per_row();

  for (std::uint32_t bank = 0; bank < cfg.total_banks(); ++bank) {
    for (std::uint32_t row = 0; row < cfg.rows_per_bank; ++row) {
      auto pattern = [&](std::uint32_t line) {
        return pattern_bytes(hash_of(0x9A77E2, bank, row, line), cfg.cache_line_bytes);
      };
      {
        BatchBuilder b(true);
        RankState sim = engine.rank();
        const Nanos start = engine.now();
        const auto a = address_of_flat_bank(cfg, bank, row);
        if (sim.bank(cfg, a).open_row) stage_legal(b, sim, DramCommand::pre(a), cfg, start, start);
        stage_legal(b, sim, DramCommand::act(a), cfg, start, start);
        for (std::uint32_t l = 0; l < lines; ++l)
          stage_legal(b, sim, DramCommand::wr(address_of_flat_bank(cfg, bank, row, l), pattern(l)), cfg, start, start);
        stage_legal(b, sim, DramCommand::pre(a), cfg, start, start);
        engine.flush(b.take());
      }
      std::vector<std::uint32_t> pending(lines);
      for (std::uint32_t l = 0; l < lines; ++l) pending[l] = l;
      for (const Nanos trcd : steps) {
        if (pending.empty()) break;
        BatchBuilder b(false);
        RankState sim = engine.rank();
        const Nanos start = engine.now();
        for (const auto l : pending) {
          const auto a = address_of_flat_bank(cfg, bank, row, l);
          stage_legal(b, sim, DramCommand::act(a), cfg, start, start);
          stage_legal(b, sim, DramCommand::rd(a, trcd < nominal ? std::optional(trcd) : std::nullopt), cfg, start,
                      start);
          stage_legal(b, sim, DramCommand::pre(a), cfg, start, start);
        }
        const auto res = engine.flush(b.take());
        std::vector<std::uint32_t> still;
        for (std::size_t i = 0; i < pending.size(); ++i) {
          if (res.readback[i] == pattern(pending[i]))
            out.set_min_trcd(bank, row, pending[i], trcd);
          else
            still.push_back(pending[i]);
        }
        pending = std::move(still);
      }
      for (const auto l : pending) out.set_min_trcd(bank, row, l, nominal);
    }
  }
  return out;
}

RowTrcdTable::RowTrcdTable(std::uint32_t banks, std::uint32_t rows_per_bank, Nanos fill)
    : banks_(banks), rows_(rows_per_bank), values_(std::size_t{banks} * rows_per_bank, fill) {}

RowTrcdTable RowTrcdTable::from_profile(const ChipProfile& p) {
  const auto& g = p.geometry();
  RowTrcdTable t(g.banks(), g.rows, Nanos::zero());
  for (std::uint32_t b = 0; b < g.banks(); ++b)
    for (std::uint32_t r = 0; r < g.rows; ++r) t.set(b, r, p.row_trcd(b, r));
  return t;
}

std::vector<RowRef> RowTrcdTable::rows_above(Nanos threshold) const {
  std::vector<RowRef> out;
  for (std::uint32_t b = 0; b < banks_; ++b)
    for (std::uint32_t r = 0; r < rows_; ++r)
      if (value(b, r) > threshold) out.push_back({b, r});
  return out;
}

void write_heatmap(std::ostream& out, const RowTrcdTable& table) {
  out << "bank,row,min_trcd_ns\n";
  for (std::uint32_t b = 0; b < table.banks(); ++b)
    for (std::uint32_t r = 0; r < table.rows_per_bank(); ++r) out << b << ',' << r << ',' << table.value(b, r).str() << '\n';
}

RowTrcdTable read_heatmap(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "bank,row,min_trcd_ns") throw HeatmapParseError("missing heatmap header");
  std::vector<std::tuple<std::uint32_t, std::uint32_t, Nanos>> recs;
  std::uint32_t banks = 0, rows = 0;
  std::size_t no = 1;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string b, r, v;
    if (!std::getline(ss, b, ',') || !std::getline(ss, r, ',') || !std::getline(ss, v))
      throw HeatmapParseError("heatmap line " + std::to_string(no) + ": expected three fields");
    try {
      recs.emplace_back(static_cast<std::uint32_t>(std::stoul(b)), static_cast<std::uint32_t>(std::stoul(r)),
                        parse_nanos(v));
    } catch (const std::exception&) {
      throw HeatmapParseError("heatmap line " + std::to_string(no) + ": bad value");
    }
    banks = std::max(banks, std::get<0>(recs.back()) + 1);
    rows = std::max(rows, std::get<1>(recs.back()) + 1);
  }
  if (recs.size() != std::size_t{banks} * rows) throw HeatmapParseError("heatmap does not cover every bank and row");
  RowTrcdTable t(banks, rows, Nanos::zero());
  for (const auto& [b, r, v] : recs) t.set(b, r, v);
  return t;
}

// --- Bloom filter -----------------------------------------------------------

WeakRowFilter::WeakRowFilter(std::uint64_t m_bits, std::vector<std::uint64_t> seeds)
    : m_(m_bits), seeds_(std::move(seeds)), bits_((m_bits + 63) / 64, 0) {
  if (m_ == 0 || seeds_.empty()) throw ConfigError("Bloom filter needs m > 0 and k > 0");
}

WeakRowFilter WeakRowFilter::with_seed(std::uint64_t m_bits, std::uint32_t k, std::uint64_t seed) {
  std::vector<std::uint64_t> seeds(k);
  for (std::uint32_t i = 0; i < k; ++i) seeds[i] = hash_of(seed, 0xB1008, i);
  return WeakRowFilter(m_bits, std::move(seeds));
}

std::uint64_t WeakRowFilter::index(std::uint64_t key, std::size_t i) const { return hash_of(seeds_[i], key) % m_; }

void WeakRowFilter::insert(std::uint64_t key) {
  for (std::size_t i = 0; i < seeds_.size(); ++i) {
    const auto b = index(key, i);
    bits_[b / 64] |= std::uint64_t{1} << (b % 64);
  }
  ++inserted_;
}

bool WeakRowFilter::possibly_contains(std::uint64_t key) const {
  for (std::size_t i = 0; i < seeds_.size(); ++i) {
    const auto b = index(key, i);
    if (!(bits_[b / 64] >> (b % 64) & 1)) return false;
  }
  return true;
}

std::uint64_t WeakRowFilter::bits_set() const {
  std::uint64_t n = 0;
  for (auto w : bits_) n += static_cast<std::uint64_t>(__builtin_popcountll(w));
  return n;
}

void WeakRowFilter::write(std::ostream& out) const {
  out << "BLOOM " << m_ << ' ' << seeds_.size() << ' ' << inserted_ << "\nSEEDS";
  out << std::hex << std::setfill('0');
  for (auto s : seeds_) out << ' ' << std::setw(16) << s;
  out << "\nBITS ";
  for (auto w : bits_) out << std::setw(16) << w;
  out << std::dec << std::setfill(' ') << '\n';
}

WeakRowFilter WeakRowFilter::read(std::istream& in) {
  std::string tag;
  std::uint64_t m = 0, n = 0;
  std::size_t k = 0;
  if (!(in >> tag) || tag != "BLOOM" || !(in >> m >> k >> n)) throw std::invalid_argument("bad Bloom filter header");
  if (!(in >> tag) || tag != "SEEDS") throw std::invalid_argument("missing Bloom filter seeds");
  std::vector<std::uint64_t> seeds(k);
  for (auto& s : seeds)
    if (!(in >> std::hex >> s >> std::dec)) throw std::invalid_argument("bad Bloom filter seed");
  WeakRowFilter f(m, std::move(seeds));
  std::string hex;
  if (!(in >> tag) || tag != "BITS" || !(in >> hex) || hex.size() != f.bits_.size() * 16)
    throw std::invalid_argument("bad Bloom filter bit dump");
  for (std::size_t i = 0; i < f.bits_.size(); ++i) f.bits_[i] = std::stoull(hex.substr(i * 16, 16), nullptr, 16);
  f.inserted_ = n;
  return f;
}

double expected_fp_rate(std::uint64_t m, std::uint32_t k, std::uint64_t n) {
  return std::pow(1.0 - std::exp(-static_cast<double>(k) * static_cast<double>(n) / static_cast<double>(m)), k);
}

WeakRowFilter build_weak_filter(const RowTrcdTable& table, const FilterParams& params) {
  const auto weak = table.rows_above(params.threshold);
  const std::uint64_t m = std::max<std::uint64_t>(64, std::uint64_t{params.bits_per_row} * weak.size());
  auto f = WeakRowFilter::with_seed(m, params.k, params.seed);
  for (const auto& r : weak) f.insert(row_key(r.bank, r.row, table.rows_per_bank()));
  return f;
}

Nanos trcd_for_row(const WeakRowFilter& filter, std::uint64_t key, Nanos reduced, Nanos nominal) {
  return filter.possibly_contains(key) ? nominal : reduced;
}

TrcdReduction::TrcdReduction(WeakRowFilter filter, RowTrcdTable truth, Nanos reduced, Nanos nominal, Nanos threshold)
    : filter_(std::move(filter)), truth_(std::move(truth)), reduced_(reduced), nominal_(nominal), threshold_(threshold) {}

std::optional<Nanos> TrcdReduction::act_trcd(std::uint32_t bank, std::uint32_t row) {
  ++stats_.activations;
  const Nanos t = trcd_for_row(filter_, row_key(bank, row, truth_.rows_per_bank()), reduced_, nominal_);
  if (t >= nominal_) {
    if (truth_.value(bank, row) <= threshold_) ++stats_.filter_false_positives;
    return std::nullopt;
  }
  ++stats_.reduced_activations;
  return t;
}

TrcdSafetyMonitor::TrcdSafetyMonitor(RowTrcdTable table, Nanos nominal) : table_(std::move(table)), nominal_(nominal) {}

void TrcdSafetyMonitor::attach(CommandEngine& engine) {
  banks_per_group_ = engine.config().banks_per_group;
  engine.set_read_observer([this](const DramAddress& a, Nanos applied, AccessOutcome outcome) {
    ++reads_;
    if (applied < nominal_) ++reduced_;
    if (applied < table_.value(a.bank_group * banks_per_group_ + a.bank, a.row)) ++violations_;
    if (outcome == AccessOutcome::Corrupt) ++corrupt_;
  });
}

}  // namespace edsim
