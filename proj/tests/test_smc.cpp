#include <gtest/gtest.h>

#include <algorithm>

#include "edsim/rng.hpp"
#include "edsim/smc.hpp"

using namespace edsim;
using P = TimingParam;

namespace {

Nanos ns(double v) { return Nanos::from_ns(v); }

DramConfig small_cfg(std::uint32_t bank_groups = 4, std::uint32_t banks_per_group = 4) {
  auto cfg = DramConfig::ddr4_1333();
  cfg.bank_groups = bank_groups;
  cfg.banks_per_group = banks_per_group;
  cfg.rows_per_bank = 256;
  return cfg;
}

MemRequest read_at(std::uint64_t id, std::uint64_t phys) {
  MemRequest r;
  r.id = id;
  r.kind = RequestKind::Read;
  r.phys_addr = phys;
  r.size_bytes = 64;
  return r;
}

MemRequest write_at(std::uint64_t id, std::uint64_t phys) {
  auto r = read_at(id, phys);
  r.kind = RequestKind::Write;
  r.payload.assign(64, static_cast<std::uint8_t>(id));
  return r;
}

// Opens `row` in every bank listed, through legal commands.
RankState open_rows(const DramConfig& cfg, const std::vector<std::pair<DramAddress, std::uint32_t>>& opens) {
  RankState rank(cfg);
  Nanos t{};
  for (const auto& [a, row] : opens) {
    DramAddress at = a;
    at.row = row;
    const auto cmd = DramCommand::act(at);
    t = earliest_legal_issue(rank, cmd, cfg, t);
    apply_command(rank, cmd, cfg, t);
  }
  rank.now = t + ns(100);
  return rank;
}

}  // namespace

TEST(AddressMap, Examples) {
  const auto cfg = DramConfig::ddr4_1333();
  AddressMap m(cfg);
  EXPECT_EQ(m.map(0), (DramAddress{0, 0, 0, 0}));
  // One row's worth of bytes later: next bank (bank group first), row 0.
  EXPECT_EQ(m.map(cfg.row_size_bytes()), (DramAddress{1, 0, 0, 0}));
  EXPECT_EQ(m.map(cfg.row_size_bytes() * cfg.bank_groups), (DramAddress{0, 1, 0, 0}));
  EXPECT_EQ(m.map(cfg.row_size_bytes() * cfg.total_banks()), (DramAddress{0, 0, 1, 0}));
  EXPECT_EQ(m.map(64 * 3 + 5), (DramAddress{0, 0, 0, 3}));
  AddressMap br(cfg, MapScheme::BankRowCol);
  EXPECT_EQ(br.map(cfg.row_size_bytes()), (DramAddress{0, 0, 1, 0}));
  EXPECT_THROW(m.map(m.capacity()), OutOfRange);
  EXPECT_THROW(m.unmap(DramAddress{4, 0, 0, 0}), OutOfRange);
}

TEST(AddressMap, RoundTripProperty) {
  const auto cfg = DramConfig::ddr4_1333();
  Rng rng(3);
  for (auto scheme : {MapScheme::RowBankCol, MapScheme::BankRowCol}) {
    AddressMap m(cfg, scheme);
    for (int i = 0; i < 20000; ++i) {
      const std::uint64_t phys = rng.below(m.capacity()) & ~std::uint64_t{63};
      EXPECT_EQ(m.unmap(m.map(phys)), phys);
    }
  }
  EXPECT_EQ(map_scheme_from_string("BankRowCol"), MapScheme::BankRowCol);
  EXPECT_THROW(map_scheme_from_string("x"), ConfigError);
}

TEST(HwFifo, GetRequestOrder) {
  HwFifo<MemRequest> hw(2);
  EXPECT_FALSE(get_request(hw));
  EXPECT_TRUE(hw.push(read_at(1, 0)));
  EXPECT_TRUE(hw.push(read_at(2, 64)));
  EXPECT_FALSE(hw.push(read_at(3, 128)));  // full: producer must stall
  EXPECT_EQ(get_request(hw)->id, 1u);
  EXPECT_EQ(get_request(hw)->id, 2u);
  EXPECT_FALSE(get_request(hw));
}

TEST(RequestTable, AddAndDuplicate) {
  RequestTable t;
  t.add(read_at(1, 0));
  EXPECT_EQ(t.size(), 1u);
  EXPECT_THROW(t.add(read_at(1, 64)), DuplicateId);
  RequestTable big;
  for (std::uint64_t i = 0; i < 1000; ++i) big.add(read_at(i + 10, i * 64));
  for (std::uint64_t i = 0; i < 1000; ++i) {
    EXPECT_EQ(big.entries()[i].req.id, i + 10);
    EXPECT_EQ(big.entries()[i].arrival, i);
  }
}

TEST(ScheduleFcfs, BatchShapes) {
  const auto cfg = small_cfg();
  AddressMap map(cfg);
  RequestTable t;
  EXPECT_FALSE(schedule_fcfs(t, RankState(cfg), cfg, map, Nanos{}));
  t.add(read_at(1, 0));
  const auto s = schedule_fcfs(t, RankState(cfg), cfg, map, Nanos{});
  ASSERT_TRUE(s);
  ASSERT_EQ(s->batch.size(), 2u);
  EXPECT_EQ(s->batch.entries()[0].cmd.kind, CommandKind::ACT);
  EXPECT_EQ(s->batch.entries()[1].cmd.kind, CommandKind::RD);
  EXPECT_EQ(s->batch.entries()[1].offset, cfg.t(P::tRCD));

  // Row conflict: PRE, ACT after tRP, RD after tRCD.
  const auto rank = open_rows(cfg, {{map.map(0), 7}});
  const auto c = schedule_fcfs(t, rank, cfg, map, rank.now);
  ASSERT_EQ(c->batch.size(), 3u);
  EXPECT_EQ(c->batch.entries()[0].cmd.kind, CommandKind::PRE);
  EXPECT_EQ(c->batch.entries()[1].cmd.kind, CommandKind::ACT);
  EXPECT_EQ(c->batch.entries()[1].offset, cfg.t(P::tRP));
  EXPECT_EQ(c->batch.entries()[2].offset - c->batch.entries()[1].offset, cfg.t(P::tRCD));
}

TEST(ScheduleFrfcfs, RowHitFirst) {
  const auto cfg = small_cfg();
  AddressMap map(cfg);
  const std::uint64_t row_stride = std::uint64_t{cfg.row_size_bytes()} * cfg.total_banks();
  RequestTable t;
  t.add(read_at(1, 7 * row_stride));
  t.add(read_at(2, 5 * row_stride));
  const auto rank = open_rows(cfg, {{map.map(0), 5}});
  EXPECT_EQ(*select_frfcfs(t, rank, cfg, map), 1u);
  EXPECT_EQ(*select_frfcfs(t, RankState(cfg), cfg, map), 0u);
  const auto s = schedule_frfcfs(t, rank, cfg, map, rank.now);
  ASSERT_EQ(s->batch.size(), 1u);
  EXPECT_EQ(s->batch.entries()[0].cmd.kind, CommandKind::RD);
}

TEST(ScheduleFrfcfs, TechniqueRequestIsBarrier) {
  const auto cfg = small_cfg();
  AddressMap map(cfg);
  const std::uint64_t row_stride = std::uint64_t{cfg.row_size_bytes()} * cfg.total_banks();
  RequestTable t;
  t.add(read_at(1, 7 * row_stride));
  MemRequest copy;
  copy.id = 2;
  copy.kind = RequestKind::RowCloneCopy;
  t.add(copy);
  t.add(read_at(3, 5 * row_stride));
  const auto rank = open_rows(cfg, {{map.map(0), 5}});
  EXPECT_EQ(*select_frfcfs(t, rank, cfg, map), 0u);
}

// Exhaustive oracle: the maximum of (row_hit, -arrival) over the table.
TEST(ScheduleFrfcfs, MatchesLexicographicOracle) {
  Rng rng(2024);
  for (int inst = 0; inst < 10000; ++inst) {
    const std::uint32_t banks = 1 + static_cast<std::uint32_t>(rng.below(4));
    const auto cfg = small_cfg(1, banks == 3 ? 4 : banks);
    AddressMap map(cfg);
    std::vector<std::pair<DramAddress, std::uint32_t>> opens;
    for (std::uint32_t b = 0; b < banks; ++b)
      if (rng.below(2)) opens.push_back({DramAddress{0, b, 0, 0}, static_cast<std::uint32_t>(rng.below(4))});
    const auto rank = open_rows(cfg, opens);
    RequestTable t;
    const auto n = 1 + rng.below(8);
    for (std::uint64_t i = 0; i < n; ++i) {
      DramAddress a{0, static_cast<std::uint32_t>(rng.below(banks)), static_cast<std::uint32_t>(rng.below(4)),
                    static_cast<std::uint32_t>(rng.below(cfg.lines_per_row()))};
      t.add(rng.below(2) ? read_at(i, map.unmap(a)) : write_at(i, map.unmap(a)));
    }
    std::size_t best = 0;
    std::pair<int, std::int64_t> best_key{-1, 0};
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto a = map.map(t.entries()[i].req.phys_addr);
      const auto& open = rank.banks[a.flat_bank(cfg)].open_row;
      const std::pair<int, std::int64_t> key{open && *open == a.row ? 1 : 0,
                                             -static_cast<std::int64_t>(t.entries()[i].arrival)};
      if (key > best_key) {
        best_key = key;
        best = i;
      }
    }
    ASSERT_EQ(*select_frfcfs(t, rank, cfg, map), best) << "instance " << inst;
    ASSERT_EQ(*select_fcfs(t), 0u);
  }
}

TEST(ScheduleFrfcfs, EqualsFcfsWithoutRowHits) {
  const auto cfg = small_cfg();
  AddressMap map(cfg);
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    RequestTable t;
    for (std::uint64_t j = 0; j < 6; ++j) t.add(read_at(j, rng.below(map.capacity()) & ~std::uint64_t{63}));
    EXPECT_EQ(select_frfcfs(t, RankState(cfg), cfg, map), select_fcfs(t));
  }
}

// Any batch the schedulers produce from any reachable state is legal.
TEST(Schedulers, StrictLegalityFuzz) {
  const auto cfg = small_cfg(2, 2);
  AddressMap map(cfg);
  Rng rng(99);
  for (int inst = 0; inst < 3000; ++inst) {
    RankState rank(cfg);
    Nanos t{};
    for (int k = 0; k < 6; ++k) {
      const DramAddress a{static_cast<std::uint32_t>(rng.below(2)), static_cast<std::uint32_t>(rng.below(2)),
                          static_cast<std::uint32_t>(rng.below(8)), 0};
      const auto& bank = rank.banks[a.flat_bank(cfg)];
      DramCommand cmd = bank.open_row ? (rng.below(2) ? DramCommand::pre(a) : DramCommand::rd({a.bank_group, a.bank,
                                                                                               *bank.open_row, 0}))
                                      : DramCommand::act(a);
      t = earliest_legal_issue(rank, cmd, cfg, t + Nanos::from_ps(static_cast<std::int64_t>(rng.below(20000))));
      apply_command(rank, cmd, cfg, t);
    }
    rank.now = t + Nanos::from_ps(static_cast<std::int64_t>(rng.below(60000)));
    RequestTable table;
    for (std::uint64_t j = 0; j < 4; ++j) {
      const DramAddress a{static_cast<std::uint32_t>(rng.below(2)), static_cast<std::uint32_t>(rng.below(2)),
                          static_cast<std::uint32_t>(rng.below(8)), static_cast<std::uint32_t>(rng.below(8))};
      table.add(rng.below(2) ? read_at(j, map.unmap(a)) : write_at(j, map.unmap(a)));
    }
    for (const auto& s : {schedule_fcfs(table, rank, cfg, map, rank.now),
                          schedule_frfcfs(table, rank, cfg, map, rank.now)}) {
      ASSERT_TRUE(s);
      EXPECT_TRUE(s->batch.strict());
      ASSERT_TRUE(check_batch_legality(s->batch, rank, cfg).empty()) << "instance " << inst;
    }
  }
}

TEST(BuildAccessBatch, ReducedTrcdOnlyWhenOpening) {
  const auto cfg = small_cfg();
  AddressMap map(cfg);
  const auto b = build_access_batch(read_at(1, 0), RankState(cfg), cfg, map, Nanos{}, ns(9));
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b.entries()[1].offset, ns(9));
  EXPECT_FALSE(b.strict());
  const auto open = open_rows(cfg, {{map.map(0), 0}});
  const auto hit = build_access_batch(read_at(1, 0), open, cfg, map, open.now, ns(9));
  ASSERT_EQ(hit.size(), 1u);
  EXPECT_FALSE(hit.entries()[0].cmd.override_trcd);
  // An override at or above nominal is dropped.
  const auto nom = build_access_batch(read_at(1, 0), RankState(cfg), cfg, map, Nanos{}, ns(13.5));
  EXPECT_TRUE(nom.strict());
}

TEST(SetSchedulingState, DelegatesToTimescale) {
  TimeScaleState ts;
  set_scheduling_state(ts, true, false);
  EXPECT_TRUE(ts.critical());
  set_scheduling_state(ts, true, false);
  EXPECT_TRUE(ts.critical());
  EXPECT_THROW(set_scheduling_state(ts, false, true), ProtocolError);
  set_scheduling_state(ts, false, false);
  EXPECT_FALSE(ts.critical());
}

TEST(Scheduler, ParseNames) {
  EXPECT_EQ(scheduler_from_string("fcfs"), SchedulerKind::FCFS);
  EXPECT_EQ(scheduler_from_string("fr-fcfs"), SchedulerKind::FRFCFS);
  EXPECT_THROW(scheduler_from_string("parbs"), ConfigError);
}
