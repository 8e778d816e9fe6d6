#include <gtest/gtest.h>

#include "edsim/command_engine.hpp"
#include "edsim/dram_timing.hpp"
#include "edsim/rng.hpp"

using namespace edsim;
using P = TimingParam;

namespace {

Nanos ns(double v) { return Nanos::from_ns(v); }
DramAddress at(std::uint32_t row, std::uint32_t col = 0, std::uint32_t bg = 0, std::uint32_t bank = 0) {
  return {bg, bank, row, col};
}

CommandBatch batch_of(std::initializer_list<std::pair<DramCommand, double>> items) {
  CommandBatch b;
  for (const auto& [c, off] : items) b.push(c, ns(off));
  return b;
}

}  // namespace

TEST(DramConfig, DefaultIsValidDdr4_1333) {
  const auto cfg = DramConfig::ddr4_1333();
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.total_banks(), 16u);
  EXPECT_EQ(cfg.rows_per_bank, 32768u);
  EXPECT_EQ(cfg.t(P::tRCD), ns(13.5));
  EXPECT_EQ(cfg.t(P::tREFI), ns(7800));
  EXPECT_EQ(cfg.t(P::tREFW), ns(64'000'000));
  EXPECT_EQ(cfg.tCK(), ns(1.5));
  EXPECT_EQ(cfg.burst(), ns(6.0));
  EXPECT_EQ(cfg.row_size_bytes(), 8192u);
  EXPECT_EQ(cfg.lines_per_row(), 128u);
}

TEST(DramConfig, ValidateRejectsBrokenInvariants) {
  auto cfg = DramConfig::ddr4_1333();
  cfg.bank_groups = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = DramConfig::ddr4_1333();
  cfg.set(P::tRC, ns(40));
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = DramConfig::ddr4_1333();
  cfg.set(P::tREFI, ns(7'900'000));
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = DramConfig::ddr4_1333();
  cfg.cache_line_bytes = 16384;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = DramConfig::ddr4_1333();
  cfg.ranks = 2;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(TimingParam, NamesRoundTrip) {
  for (std::size_t i = 0; i < kTimingParamCount; ++i) {
    const auto p = static_cast<TimingParam>(i);
    EXPECT_EQ(timing_param_from_string(to_string(p)), p);
  }
  EXPECT_FALSE(timing_param_from_string("tFAW"));
}

TEST(EarliestLegalIssue, ActAfterPrecharge) {
  const auto cfg = DramConfig::ddr4_1333();
  BankState s = initial_bank_state(cfg);
  s.last_pre = ns(0);
  EXPECT_EQ(earliest_legal_issue(s, DramCommand::act(at(3)), cfg, ns(0)), ns(13.5));
  EXPECT_EQ(earliest_legal_issue(s, DramCommand::act(at(3)), cfg, ns(20)), ns(20));
}

TEST(EarliestLegalIssue, ReadGatedByTrcd) {
  const auto cfg = DramConfig::ddr4_1333();
  auto s = apply_command(initial_bank_state(cfg), DramCommand::act(at(4)), cfg, ns(0));
  EXPECT_EQ(earliest_legal_issue(s, DramCommand::rd(at(4)), cfg, ns(10)), ns(13.5));
  EXPECT_EQ(earliest_legal_issue(s, DramCommand::rd(at(4), ns(9.0)), cfg, ns(0)), ns(9.0));
}

TEST(EarliestLegalIssue, StructuralErrors) {
  const auto cfg = DramConfig::ddr4_1333();
  const auto closed = initial_bank_state(cfg);
  const auto open = apply_command(closed, DramCommand::act(at(4)), cfg, ns(0));
  EXPECT_THROW(earliest_legal_issue(open, DramCommand::act(at(5)), cfg, ns(0)), IllegalSequence);
  EXPECT_THROW(earliest_legal_issue(closed, DramCommand::rd(at(5)), cfg, ns(0)), IllegalSequence);
  EXPECT_THROW(earliest_legal_issue(open, DramCommand::rd(at(5)), cfg, ns(0)), IllegalSequence);
  EXPECT_THROW(earliest_legal_issue(closed, DramCommand::pre(at(5)), cfg, ns(0)), IllegalSequence);
  EXPECT_THROW(earliest_legal_issue(open, DramCommand::rd(at(4), ns(14)), cfg, ns(0)), IllegalSequence);
  EXPECT_THROW(earliest_legal_issue(open, DramCommand::rd(at(4), ns(0)), cfg, ns(0)), IllegalSequence);
}

TEST(ApplyCommand, StampsState) {
  const auto cfg = DramConfig::ddr4_1333();
  auto s = apply_command(initial_bank_state(cfg), DramCommand::act(at(7)), cfg, ns(20));
  EXPECT_EQ(s.open_row, 7u);
  EXPECT_EQ(s.last_act, ns(20));
  s = apply_command(s, DramCommand::pre(at(7)), cfg, ns(50));
  EXPECT_FALSE(s.open_row);
  EXPECT_EQ(s.last_pre, ns(50));
}

TEST(ApplyCommand, RefreshAdvancesDeadlineAndNeedsClosedBanks) {
  const auto cfg = DramConfig::ddr4_1333();
  RankState rank(cfg);
  apply_command(rank, DramCommand::ref(), cfg, ns(100));
  for (const auto& b : rank.banks) EXPECT_EQ(b.refresh_deadline, cfg.t(P::tREFI) * 2);
  apply_command(rank, DramCommand::act(at(1, 0, 2, 1)), cfg, ns(500));
  EXPECT_THROW(apply_command(rank, DramCommand::ref(), cfg, ns(600)), IllegalSequence);
  EXPECT_EQ(earliest_legal_issue(RankState(cfg), DramCommand::ref(), cfg, ns(3)), ns(3));
}

TEST(RankTiming, CrossBankConstraints) {
  const auto cfg = DramConfig::ddr4_1333();
  RankState rank(cfg);
  apply_command(rank, DramCommand::act(at(1, 0, 0, 0)), cfg, ns(0));
  EXPECT_EQ(earliest_legal_issue(rank, DramCommand::act(at(1, 0, 1, 0)), cfg, ns(0)), cfg.t(P::tRRD));
  apply_command(rank, DramCommand::act(at(1, 0, 1, 0)), cfg, ns(6));
  apply_command(rank, DramCommand::rd(at(1, 0, 0, 0)), cfg, ns(20));
  EXPECT_EQ(earliest_legal_issue(rank, DramCommand::rd(at(1, 0, 1, 0)), cfg, ns(20)), ns(20) + cfg.t(P::tCCD));
}

TEST(CheckBatchLegality, NominalReadIsLegal) {
  const auto cfg = DramConfig::ddr4_1333();
  auto b = batch_of({{DramCommand::act(at(5)), 0}, {DramCommand::rd(at(5)), 13.5}});
  EXPECT_TRUE(check_batch_legality(b, RankState(cfg), cfg).empty());
}

TEST(CheckBatchLegality, ReducedTrcdDeficit) {
  const auto cfg = DramConfig::ddr4_1333();
  auto b = batch_of({{DramCommand::act(at(5)), 0}, {DramCommand::rd(at(5)), 9.0}});
  const auto v = check_batch_legality(b, RankState(cfg), cfg);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], (Violation{1, P::tRCD, ns(4.5)}));
}

TEST(CheckBatchLegality, RowCloneIdiomDeficitsFromConfig) {
  const auto cfg = DramConfig::ddr4_1333();
  const Nanos pre_at = ns(3), act_at = ns(6);
  auto b = batch_of({{DramCommand::act(at(1)), 0}, {DramCommand::pre(at(1)), 3}, {DramCommand::act(at(2)), 6}});
  const auto v = check_batch_legality(b, RankState(cfg), cfg);
  std::vector<Violation> expect = {
      {1, P::tRAS, cfg.t(P::tRAS) - pre_at},
      {2, P::tRP, pre_at + cfg.t(P::tRP) - act_at},
      {2, P::tRC, cfg.t(P::tRC) - act_at},
  };
  EXPECT_EQ(v, expect);
  EXPECT_EQ(v[0].deficit, ns(29.5));
  EXPECT_EQ(v[1].deficit, ns(10.5));
}

TEST(CheckBatchLegality, StructuralViolationHasNoParameter) {
  const auto cfg = DramConfig::ddr4_1333();
  auto b = batch_of({{DramCommand::rd(at(5)), 0}});
  const auto v = check_batch_legality(b, RankState(cfg), cfg);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_FALSE(v[0].parameter);
}

// Random walk over legal commands: earliest_legal_issue is monotone in now,
// idempotent, and never lets RD/WR precede last ACT + tRCD.
TEST(EarliestLegalIssue, PropertyMonotoneIdempotentTrcdGate) {
  const auto cfg = DramConfig::ddr4_1333();
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    RankState rank(cfg);
    Nanos now = ns(0);
    CommandBatch issued;
    for (int step = 0; step < 60; ++step) {
      const std::uint32_t bank = static_cast<std::uint32_t>(rng.below(cfg.total_banks()));
      auto addr = address_of_flat_bank(cfg, bank, static_cast<std::uint32_t>(rng.below(64)),
                                       static_cast<std::uint32_t>(rng.below(128)));
      const auto& bs = rank.banks[bank];
      DramCommand cmd;
      if (!bs.open_row) {
        cmd = rng.below(8) == 0 && rank.all_closed() ? DramCommand::ref() : DramCommand::act(addr);
      } else {
        addr.row = *bs.open_row;
        const auto r = rng.below(3);
        cmd = r == 0 ? DramCommand::pre(addr)
                     : r == 1 ? DramCommand::rd(addr)
                              : DramCommand::wr(addr, std::vector<std::uint8_t>(64));
      }
      const Nanos t = earliest_legal_issue(rank, cmd, cfg, now);
      ASSERT_GE(t, now);
      const Nanos later = now + Nanos::from_ps(static_cast<std::int64_t>(rng.below(20'000)));
      ASSERT_GE(earliest_legal_issue(rank, cmd, cfg, later), t);
      ASSERT_EQ(earliest_legal_issue(rank, cmd, cfg, t), t);
      if ((cmd.kind == CommandKind::RD || cmd.kind == CommandKind::WR))
        ASSERT_GE(t, *rank.banks[bank].last_act + cfg.t(P::tRCD));
      const Nanos issue = t + Nanos::from_ps(static_cast<std::int64_t>(rng.below(4) * 1500));
      apply_command(rank, cmd, cfg, issue);
      issued.push(cmd, issue);
      // Re-querying the same kind right away needs at least one more step.
      if (cmd.kind == CommandKind::RD) {
        ASSERT_GE(earliest_legal_issue(rank, cmd, cfg, issue), issue + cfg.t(P::tCCD));
      }
      now = issue + Nanos::from_ps(1);
    }
    // Everything generated at legal times passes the batch checker.
    ASSERT_TRUE(check_batch_legality(issued, RankState(cfg), cfg).empty());
  }
}
