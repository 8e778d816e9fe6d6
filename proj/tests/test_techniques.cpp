#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "edsim/rng.hpp"
#include "edsim/techniques.hpp"

using namespace edsim;
using P = TimingParam;

namespace {

Nanos ns(double v) { return Nanos::from_ns(v); }

DramConfig small_cfg(std::uint32_t rows = 1024) {
  auto cfg = DramConfig::ddr4_1333();
  cfg.bank_groups = 1;
  cfg.banks_per_group = 2;
  cfg.rows_per_bank = rows;
  return cfg;
}

std::shared_ptr<ChipProfile> all_clonable(const DramConfig& cfg) {
  auto p = std::make_shared<ChipProfile>(ProfileGeometry::of(cfg), 1);
  p->clonable_relation().set_rule(1, UINT64_MAX);
  return p;
}

DramAddress row_addr(const DramConfig& cfg, std::uint32_t bank, std::uint32_t row) {
  return {bank % cfg.bank_groups, bank / cfg.bank_groups, row, 0};
}

}  // namespace

TEST(IssueRowClone, DefaultOffsets) {
  const auto cfg = small_cfg();
  const auto b = issue_rowclone(row_addr(cfg, 0, 1), row_addr(cfg, 0, 2), RowCloneConfig{});
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b.entries()[0].cmd.kind, CommandKind::ACT);
  EXPECT_EQ(b.entries()[1].cmd.kind, CommandKind::PRE);
  EXPECT_EQ(b.entries()[2].cmd.kind, CommandKind::ACT);
  EXPECT_EQ(b.entries()[0].offset, ns(0));
  EXPECT_EQ(b.entries()[1].offset, ns(3));
  EXPECT_EQ(b.entries()[2].offset, ns(6));
  EXPECT_FALSE(b.strict());
}

TEST(IssueRowClone, StrictFlushRejectedAndNonStrictCopies) {
  const auto cfg = small_cfg();
  CommandEngine eng(cfg, all_clonable(cfg), 5);
  auto strict = issue_rowclone(row_addr(cfg, 0, 1), row_addr(cfg, 0, 2), RowCloneConfig{});
  strict.set_strict(true);
  EXPECT_THROW(eng.flush(strict), StrictViolation);
  const auto src = eng.data().read_row(0, 1);
  EXPECT_NE(eng.data().read_row(0, 2), src);
  eng.flush(issue_rowclone(row_addr(cfg, 0, 1), row_addr(cfg, 0, 2), RowCloneConfig{}));
  EXPECT_EQ(eng.data().read_row(0, 2), src);
}

TEST(VerifyClonable, RelationDecides) {
  const auto cfg = small_cfg();
  auto prof = std::make_shared<ChipProfile>(ProfileGeometry::of(cfg), 1);
  prof->clonable_relation().add(0, 3, 9);
  CommandEngine eng(cfg, prof, 1);
  EXPECT_TRUE(verify_clonable(eng, 0, 3, 9, 1000, RowCloneConfig{}));
  EXPECT_TRUE(verify_clonable(eng, 0, 9, 3, 10, RowCloneConfig{}));
  EXPECT_FALSE(verify_clonable(eng, 0, 3, 10, 1000, RowCloneConfig{}));
  EXPECT_EQ(eng.stats().clone_fail, 1u);  // stopped at the first trial
  // Same relation, but across a subarray boundary.
  prof->clonable_relation().set_rule(2, UINT64_MAX);
  EXPECT_FALSE(verify_clonable(eng, 0, 3, 600, 5, RowCloneConfig{}));
}

TEST(RowCloneTechnique, CachesAndRejectsCrossSubarray) {
  const auto cfg = small_cfg();
  RowCloneConfig rc;
  rc.verify_trials = 20;
  RowCloneTechnique tech(cfg, all_clonable(cfg), rc);
  EXPECT_FALSE(tech.verified(1, 4, 5));
  EXPECT_TRUE(tech.verify(1, 4, 5));
  EXPECT_TRUE(tech.verified(1, 4, 5));
  const auto n = tech.verifications();
  EXPECT_TRUE(tech.verify(1, 4, 5));
  EXPECT_EQ(tech.verifications(), n);
  EXPECT_FALSE(tech.verify(1, 4, 700));
}

TEST(RowAllocator, PairsShareBankAndSubarray) {
  const auto cfg = small_cfg();
  for (auto scheme : {MapScheme::RowBankCol, MapScheme::BankRowCol}) {
    AddressMap map(cfg, scheme);
    RowAllocator alloc(cfg, map, 512);
    std::set<RowRef> seen;
    for (int k = 0; k < 6; ++k) {
      const std::uint64_t n = 1 + k * 7;
      const auto [s, d] = alloc.allocate_pair(n);
      EXPECT_EQ(s % cfg.row_size_bytes(), 0u);
      EXPECT_EQ(d % cfg.row_size_bytes(), 0u);
      for (std::uint64_t i = 0; i < n; ++i) {
        const auto rs = alloc.row_of(s + i * cfg.row_size_bytes());
        const auto rd = alloc.row_of(d + i * cfg.row_size_bytes());
        EXPECT_EQ(rs.bank, rd.bank);
        EXPECT_EQ(rs.row / 512, rd.row / 512);
        EXPECT_TRUE(alloc.used(rs));
        EXPECT_TRUE(seen.insert(rs).second);
        EXPECT_TRUE(seen.insert(rd).second);
      }
    }
  }
}

TEST(RowAllocator, RowInSubarrayAndExhaustion) {
  const auto cfg = small_cfg(1024);
  AddressMap map(cfg);
  RowAllocator alloc(cfg, map, 512);
  std::set<std::uint32_t> rows;
  for (int i = 0; i < 512; ++i) {
    const auto r = alloc.allocate_row_in(1, 1);
    EXPECT_EQ(r.bank, 1u);
    EXPECT_EQ(r.row / 512, 1u);
    rows.insert(r.row);
  }
  EXPECT_EQ(rows.size(), 512u);
  EXPECT_THROW(alloc.allocate_row_in(1, 1), OutOfRows);
}

TEST(PlanBulkCopy, Examples) {
  const auto cfg = small_cfg();
  AddressMap map(cfg);
  RowCloneConfig rc;
  rc.verify_trials = 10;
  {
    auto prof = all_clonable(cfg);
    RowCloneTechnique tech(cfg, prof, rc);
    RowAllocator alloc(cfg, map);
    const auto one = plan_bulk_copy(cfg.row_size_bytes(), alloc, tech, cfg);
    EXPECT_EQ(one.operations.size(), 1u);
    EXPECT_TRUE(one.fallback_rows.empty());
    const auto half = plan_bulk_copy(cfg.row_size_bytes() / 2, alloc, tech, cfg);
    EXPECT_EQ(half.rows, 1u);
    EXPECT_EQ(half.operations.size(), 1u);
  }
  {
    // Knock out the third pair the allocator is about to hand out.
    auto prof = all_clonable(cfg);
    RowAllocator alloc(cfg, map);
    RowAllocator peek = alloc;
    const auto [s, d] = peek.allocate_pair(4);
    const auto rs = peek.row_of(s + 2 * cfg.row_size_bytes());
    const auto rd = peek.row_of(d + 2 * cfg.row_size_bytes());
    prof->clonable_relation().remove(rs.bank, rs.row, rd.row);
    RowCloneTechnique tech(cfg, prof, rc);
    const auto plan = plan_bulk_copy(4 * cfg.row_size_bytes(), alloc, tech, cfg);
    EXPECT_EQ(plan.operations.size(), 3u);
    ASSERT_EQ(plan.fallback_rows.size(), 1u);
    EXPECT_EQ(plan.fallback_rows[0], rd);
  }
}

TEST(PlanBulkInit, SourceRowPerSubarray) {
  const auto cfg = small_cfg();
  AddressMap map(cfg, MapScheme::BankRowCol);  // consecutive rows stay in one bank
  RowCloneConfig rc;
  rc.verify_trials = 5;
  RowCloneTechnique tech(cfg, all_clonable(cfg), rc);
  RowAllocator alloc(cfg, map, 512);
  const auto within = plan_bulk_init(4 * cfg.row_size_bytes(), alloc, tech, cfg);
  EXPECT_EQ(within.source_rows.size(), 1u);
  EXPECT_EQ(within.operations.size(), 4u);
  RowCloneTechnique tech2(cfg, all_clonable(cfg), rc);
  RowAllocator edge(cfg, map, 512);
  edge.set_cursor(510);
  const auto across = plan_bulk_init(4 * cfg.row_size_bytes(), edge, tech2, cfg);
  EXPECT_EQ(across.source_rows.size(), 2u);
  std::set<RowRef> dsts;
  for (const auto& op : across.operations) {
    EXPECT_EQ(op.src.row / 512, op.dst.row / 512);
    EXPECT_TRUE(dsts.insert(op.dst).second);  // each destination row once
  }

  auto none = std::make_shared<ChipProfile>(ProfileGeometry::of(cfg), 1);
  RowCloneTechnique no_tech(cfg, none, rc);
  RowAllocator alloc2(cfg, map, 512);
  const auto fb = plan_bulk_init(3 * cfg.row_size_bytes(), alloc2, no_tech, cfg);
  EXPECT_TRUE(fb.operations.empty());
  EXPECT_EQ(fb.fallback_rows.size(), 3u);
}

TEST(CoherenceFlush, Examples) {
  CoreConfig cc;
  CacheHierarchy h(cc);
  std::vector<Cache::Line> wbs;
  auto empty = coherence_flush(h, 0, 0x10000, 256);
  EXPECT_TRUE(empty.flushes.empty());
  EXPECT_TRUE(empty.invalidates.empty());
  for (std::uint64_t a = 0; a < 256; a += 64) {
    h.fill(a, std::vector<std::uint8_t>(64, 1), wbs);
    const std::vector<std::uint8_t> d(64, static_cast<std::uint8_t>(a));
    h.write(a, d.data(), d.size());
  }
  h.fill(0x10040, std::vector<std::uint8_t>(64, 2), wbs);
  const auto acts = coherence_flush(h, 0, 0x10000, 256);
  ASSERT_EQ(acts.flushes.size(), 4u);
  EXPECT_EQ(acts.flushes[1].kind, RequestKind::Flush);
  EXPECT_EQ(acts.flushes[1].payload, std::vector<std::uint8_t>(64, 64));
  EXPECT_EQ(acts.invalidates, std::vector<std::uint64_t>{0x10040});
  EXPECT_EQ(h.probe(0x10040), CacheHierarchy::Level::Miss);
  EXPECT_EQ(h.probe(0), CacheHierarchy::Level::Miss);
}

TEST(RowTrcdTable, WeakestLineOracle) {
  const auto cfg = small_cfg(64);
  const auto prof = generate_profile(ProfileGeometry::of(cfg, 32), 0.845, 1.0, 9);
  const auto t = RowTrcdTable::from_profile(prof);
  for (std::uint32_t b = 0; b < 2; ++b)
    for (std::uint32_t r = 0; r < 64; ++r) {
      Nanos worst{};
      for (std::uint32_t l = 0; l < cfg.lines_per_row(); ++l) worst = max(worst, prof.min_trcd(b, r, l));
      EXPECT_EQ(t.value(b, r), worst);
    }
  for (const auto& rr : t.rows_above(kStrongTrcdThreshold)) EXPECT_GT(t.value(rr.bank, rr.row), kStrongTrcdThreshold);
}

TEST(ProfileChip, RoundTripsGeneratedProfile) {
  const auto cfg = small_cfg(256);
  auto truth = std::make_shared<ChipProfile>(generate_profile(ProfileGeometry::of(cfg, 128), 0.845, 1.0, 4));
  CommandEngine eng(cfg, truth, 2);
  std::vector<Nanos> ladder;
  for (auto v : kStrongTrcdLevels) ladder.push_back(v);
  for (auto v : kWeakTrcdLevels) ladder.push_back(v);
  const auto measured = profile_chip(eng, ladder, 128);
  for (std::uint32_t b = 0; b < 2; ++b)
    for (std::uint32_t r = 0; r < 256; ++r)
      for (std::uint32_t l = 0; l < cfg.lines_per_row(); ++l)
        ASSERT_EQ(measured.min_trcd(b, r, l), truth->min_trcd(b, r, l)) << b << ' ' << r << ' ' << l;

  std::stringstream csv;
  write_heatmap(csv, RowTrcdTable::from_profile(measured));
  const auto text = csv.str();
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), 1u + 2 * 256);
  EXPECT_EQ(read_heatmap(csv), RowTrcdTable::from_profile(*truth));
}

TEST(ProfileChip, AllStrongChip) {
  const auto cfg = small_cfg(32);
  auto truth = std::make_shared<ChipProfile>(generate_profile(ProfileGeometry::of(cfg, 16), 1.0, 1.0, 4));
  CommandEngine eng(cfg, truth, 2);
  const auto t = RowTrcdTable::from_profile(profile_chip(eng, default_trcd_ladder(), 16));
  EXPECT_TRUE(t.rows_above(ns(9.0)).empty());
}

TEST(Heatmap, ParseErrors) {
  std::istringstream bad_header("bank,row,trcd\n0,0,13.5\n");
  EXPECT_THROW(read_heatmap(bad_header), HeatmapParseError);
  std::istringstream bad_value("bank,row,min_trcd_ns\n0,0,x\n");
  EXPECT_THROW(read_heatmap(bad_value), HeatmapParseError);
}

TEST(WeakRowFilter, NoFalseNegativesProperty) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    auto f = WeakRowFilter::with_seed(64 + rng.below(4096), 1 + static_cast<std::uint32_t>(rng.below(8)), trial);
    std::vector<std::uint64_t> keys;
    for (int i = 0; i < 1000; ++i) {
      keys.push_back(rng.next());
      f.insert(keys.back());
    }
    for (auto k : keys) ASSERT_TRUE(f.possibly_contains(k));
  }
}

TEST(WeakRowFilter, FalsePositiveRateMatchesFormula) {
  // Brute force: count hits over keys never inserted.
  struct Setting {
    std::uint64_t m;
    std::uint32_t k;
    std::uint64_t n;
  };
  for (const auto s : {Setting{16000, 4, 1000}, Setting{8000, 3, 1000}, Setting{20000, 6, 2000}}) {
    auto f = WeakRowFilter::with_seed(s.m, s.k, 17);
    for (std::uint64_t i = 0; i < s.n; ++i) f.insert(i);
    std::uint64_t fp = 0;
    const std::uint64_t queries = 200000;
    for (std::uint64_t i = 0; i < queries; ++i) fp += f.possibly_contains(s.n + i) ? 1 : 0;
    const double rate = double(fp) / double(queries);
    const double expect = std::pow(1.0 - std::exp(-double(s.k) * double(s.n) / double(s.m)), double(s.k));
    EXPECT_DOUBLE_EQ(expected_fp_rate(s.m, s.k, s.n), expect);
    EXPECT_NEAR(rate, expect, 0.2 * expect) << s.m << ' ' << s.k << ' ' << s.n;
  }
}

TEST(WeakRowFilter, SerializeRoundTrip) {
  auto f = WeakRowFilter::with_seed(1000, 3, 5);
  for (std::uint64_t i = 0; i < 50; ++i) f.insert(i * 7);
  std::stringstream s;
  f.write(s);
  EXPECT_EQ(WeakRowFilter::read(s), f);
}

TEST(BuildWeakFilter, InsertsRowsAboveThreshold) {
  RowTrcdTable t(2, 100, ns(7.5));
  t.set(0, 5, ns(12));
  t.set(1, 99, ns(10.5));
  t.set(1, 50, ns(9.0));  // at the threshold: strong
  const auto f = build_weak_filter(t);
  EXPECT_EQ(f.inserted(), 2u);
  EXPECT_EQ(f.m(), 64u);
  EXPECT_EQ(f.k(), 4u);
  EXPECT_TRUE(f.possibly_contains(row_key(0, 5, 100)));
  EXPECT_TRUE(f.possibly_contains(row_key(1, 99, 100)));
  EXPECT_EQ(build_weak_filter(RowTrcdTable(1, 10, ns(6))).bits_set(), 0u);
}

TEST(TrcdForRow, Examples) {
  auto f = WeakRowFilter::with_seed(4096, 4, 3);
  f.insert(42);
  EXPECT_EQ(trcd_for_row(f, 42), ns(13.5));
  // Strong rows: reduced unless the filter reports a false positive.
  std::uint64_t fps = 0;
  for (std::uint64_t k = 100; k < 1100; ++k) {
    const auto v = trcd_for_row(f, k);
    if (f.possibly_contains(k)) {
      EXPECT_EQ(v, ns(13.5));
      ++fps;
    } else {
      EXPECT_EQ(v, ns(9.0));
    }
  }
  EXPECT_LT(fps, 10u);
}

TEST(TrcdReduction, CountsAndFalsePositives) {
  RowTrcdTable truth(1, 64, ns(7.5));
  truth.set(0, 3, ns(12));
  auto f = build_weak_filter(truth);
  TrcdReduction red(f, truth, ns(9), ns(13.5), ns(9));
  EXPECT_FALSE(red.act_trcd(0, 3));
  std::uint64_t reduced = 0;
  for (std::uint32_t r = 0; r < 64; ++r)
    if (r != 3 && red.act_trcd(0, r)) ++reduced;
  EXPECT_EQ(red.stats().activations, 64u);
  EXPECT_EQ(red.stats().reduced_activations, reduced);
  EXPECT_EQ(red.stats().filter_false_positives, 63u - reduced);
}

TEST(TrcdSafetyMonitor, FlagsUnsafeReads) {
  const auto cfg = small_cfg(32);
  auto prof = std::make_shared<ChipProfile>(ProfileGeometry::of(cfg, 16), 1);
  for (std::uint32_t l = 0; l < cfg.lines_per_row(); ++l) prof->set_min_trcd(0, 1, l, ns(12));
  CommandEngine eng(cfg, prof, 1);
  TrcdSafetyMonitor mon(RowTrcdTable::from_profile(*prof), cfg.t(P::tRCD));
  mon.attach(eng);
  auto read = [&](std::uint32_t row, double trcd) {
    BatchBuilder b(false);
    const DramAddress a{0, 0, row, 0};
    b.stage(DramCommand::act(a), ns(0)).stage(DramCommand::rd(a, ns(trcd)), ns(trcd));
    b.stage(DramCommand::pre(a), ns(40));
    eng.flush(b.take());
  };
  read(1, 9);   // weak row at reduced tRCD
  read(2, 9);   // strong row
  read(1, 13.5);
  EXPECT_EQ(mon.reads(), 3u);
  EXPECT_EQ(mon.reduced_reads(), 2u);
  EXPECT_EQ(mon.violations(), 1u);
  EXPECT_EQ(mon.corrupt_reads(), 1u);
}
