#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "edsim/dram_timing.hpp"
#include "edsim/frontend.hpp"
#include "edsim/rng.hpp"

using namespace edsim;

namespace {

std::vector<std::uint8_t> line_of(std::uint8_t v) { return std::vector<std::uint8_t>(64, v); }

// Fixed-latency memory for driving a core without the controller.
struct FlatMemory {
  Cycles latency = 50;
  std::map<std::uint64_t, std::vector<std::uint8_t>> lines;
  std::vector<MemRequest> seen;
  std::size_t max_outstanding = 0;

  std::vector<std::uint8_t> get(std::uint64_t a) const {
    auto it = lines.find(a);
    return it == lines.end() ? std::vector<std::uint8_t>(64, 0) : it->second;
  }

  Cycles run(Core& core, Cycles limit = 10'000'000) {
    std::multimap<Cycles, MemResponse> due;
    Cycles c = 0;
    const RequestSink sink = [&](MemRequest& r) {
      r.tag_cycle = c;
      seen.push_back(r);
      MemResponse resp;
      resp.request_id = r.id;
      resp.kind = r.kind;
      resp.phys_addr = r.phys_addr;
      resp.prefetch = r.prefetch;
      switch (r.kind) {
        case RequestKind::Read: resp.data = get(r.phys_addr); break;
        case RequestKind::Write:
        case RequestKind::Flush: lines[r.phys_addr] = r.payload; break;
        case RequestKind::RowCloneCopy:
          // Everything falls back to the core.
          resp.status = ResponseStatus::FallbackUsed;
          resp.fallback.push_back({r.phys_addr, r.dst_addr, r.size_bytes});
          break;
        case RequestKind::RowCloneInit:
          resp.status = ResponseStatus::FallbackUsed;
          resp.fallback.push_back({r.phys_addr, r.phys_addr, r.size_bytes});
          break;
        default: break;
      }
      if (!r.posted) due.emplace(c + latency, std::move(resp));
      std::size_t demand = 0;
      for (const auto& [t, x] : due) demand += x.prefetch ? 0 : 1;
      max_outstanding = std::max(max_outstanding, demand);
      return true;
    };
    for (; !core.done() || !due.empty(); ++c) {
      if (c > limit) throw std::runtime_error("core did not finish");
      while (!due.empty() && due.begin()->first <= c) {
        core.deliver(due.begin()->second, c);
        due.erase(due.begin());
      }
      core.step(c, sink);
    }
    return c;
  }
};

CoreConfig small_core(std::uint32_t prefetch = 0) {
  CoreConfig cc;
  cc.l1d = {1024, 2, 64, 4};
  cc.l2 = {4096, 4, 64, 10};
  cc.l2_prefetch_degree = prefetch;
  return cc;
}

double cycles_per_load(const CoreStats& s) {
  const auto& m = s.marks;
  return double(m[1].first - m[0].first) / double(m[1].second - m[0].second);
}

}  // namespace

TEST(CacheConfig, Validation) {
  EXPECT_NO_THROW(CoreConfig{}.validate());
  CoreConfig bad;
  bad.l1d.ways = 3;
  EXPECT_THROW(bad.validate(), ConfigError);
  CoreConfig l2line;
  l2line.l2.line_bytes = 128;
  EXPECT_THROW(l2line.validate(), ConfigError);
  EXPECT_EQ(CoreConfig{}.l2.size_bytes, 512u * 1024);
  EXPECT_EQ(CoreConfig{}.l2.ways, 8u);
}

TEST(Cache, LruEvictionReturnsDirtyVictim) {
  Cache c({256, 2, 64, 1});  // 2 sets
  EXPECT_EQ(c.config().sets(), 2u);
  EXPECT_FALSE(c.insert(0, line_of(1), true));
  EXPECT_FALSE(c.insert(128, line_of(2), false));
  c.lookup(0);  // 128 becomes LRU
  EXPECT_FALSE(c.insert(256, line_of(3), false));  // clean victim 128
  EXPECT_EQ(c.peek(128), nullptr);
  c.lookup(256);
  auto v = c.insert(384, line_of(4), false);  // dirty victim 0
  ASSERT_TRUE(v);
  EXPECT_EQ(v->addr, 0u);
  EXPECT_EQ(v->data, line_of(1));
  EXPECT_EQ(c.resident_lines(), 2u);
  EXPECT_TRUE(c.invalidate(256));
  EXPECT_FALSE(c.invalidate(256));
}

TEST(CacheHierarchy, WriteFlushAndDirtyVictims) {
  CacheHierarchy h(small_core());
  std::vector<Cache::Line> wbs;
  h.fill(0, line_of(7), wbs);
  EXPECT_TRUE(wbs.empty());
  EXPECT_EQ(h.probe(0), CacheHierarchy::Level::L1);
  const auto data = line_of(9);
  h.write(0, data.data(), data.size());
  EXPECT_TRUE(h.is_dirty(0));
  EXPECT_EQ(*h.read_line(0), line_of(9));
  auto f = h.flush(0);
  ASSERT_TRUE(f);
  EXPECT_EQ(*f, line_of(9));
  EXPECT_EQ(h.probe(0), CacheHierarchy::Level::Miss);
  EXPECT_FALSE(h.flush(0));
  // Clean lines flush without data.
  h.fill(64, line_of(1), wbs);
  EXPECT_FALSE(h.flush(64));
  EXPECT_EQ(h.probe(64), CacheHierarchy::Level::Miss);
}

TEST(PatternBytes, LittleEndianRepeat) {
  EXPECT_EQ(pattern_bytes(0x0102030405060708ULL, 10),
            (std::vector<std::uint8_t>{8, 7, 6, 5, 4, 3, 2, 1, 8, 7}));
}

TEST(Trace, RoundTrip) {
  const Trace t = {{OpKind::Load, 0x1000, 0, 64, std::nullopt},
                   {OpKind::Store, 0x2040, 0, 8, std::nullopt},
                   {OpKind::Store, 0x2080, 0, 64, 0xdeadbeefULL},
                   {OpKind::Compute, 0, 0, 17, std::nullopt},
                   {OpKind::Clflush, 0x1000, 0, 0, std::nullopt},
                   {OpKind::RowCloneCopy, 0x10000, 0x20000, 8192, std::nullopt},
                   {OpKind::RowCloneInit, 0x30000, 0, 8192, 0x55ULL},
                   {OpKind::Mark, 0, 0, 0, std::nullopt}};
  std::stringstream s;
  write_trace(s, t);
  EXPECT_EQ(parse_trace(s), t);
}

TEST(Trace, ParseDetails) {
  std::istringstream empty("");
  EXPECT_TRUE(parse_trace(empty).empty());
  std::istringstream commented("# header\n\nLD 40 64   # trailing\n");
  const auto t = parse_trace(commented);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].addr, 0x40u);
  auto line_of_error = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_trace(in);
    } catch (const TraceParseError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  EXPECT_EQ(line_of_error("LD 0 64\nJMP 4\n"), 2u);
  EXPECT_EQ(line_of_error("LD 0 64\nLD 0 64\nLD zz 64\n"), 3u);
  EXPECT_EQ(line_of_error("LD 0 0\n"), 1u);
  EXPECT_EQ(line_of_error("LD 0\n"), 1u);
  EXPECT_EQ(line_of_error("CP 1x\n"), 1u);
}

TEST(Generators, CopyCounts) {
  auto count = [](const Trace& t, OpKind k) {
    return std::count_if(t.begin(), t.end(), [&](const TraceOp& o) { return o.kind == k; });
  };
  const auto cpu = gen_copy(8192, CopyVariant::CpuLdSt, CoherenceSetting::NoFlush, 0, 0x10000);
  EXPECT_EQ(count(cpu, OpKind::Load), 128);
  EXPECT_EQ(count(cpu, OpKind::Store), 128);
  const auto rc = gen_copy(8192, CopyVariant::RowClone, CoherenceSetting::NoFlush, 0, 0x10000);
  EXPECT_EQ(count(rc, OpKind::RowCloneCopy), 1);
  EXPECT_EQ(count(rc, OpKind::Clflush), 0);
  const auto fl = gen_copy(8192, CopyVariant::RowClone, CoherenceSetting::Clflush, 0, 0x10000);
  EXPECT_LE(count(fl, OpKind::Clflush), 128);
  EXPECT_GT(count(fl, OpKind::Clflush), 0);
  const auto init = gen_init(8192, 0xAB, CopyVariant::CpuLdSt, CoherenceSetting::NoFlush, 0);
  EXPECT_EQ(count(init, OpKind::Store), 128);
  EXPECT_EQ(count(init, OpKind::Load), 0);
  EXPECT_EQ(count(gen_init(8192, 0xAB, CopyVariant::RowClone, CoherenceSetting::NoFlush, 0), OpKind::RowCloneInit), 1);
}

TEST(Generators, ChaseIsSingleCycle) {
  const auto t = gen_latency_chase(64 * 100, 64, 250, 0x1000, 3);
  std::vector<std::uint64_t> warm;
  std::size_t i = 0;
  for (; t[i].kind == OpKind::Load; ++i) warm.push_back(t[i].addr);
  EXPECT_EQ(warm.size(), 100u);
  EXPECT_EQ(std::set<std::uint64_t>(warm.begin(), warm.end()).size(), 100u);
  EXPECT_EQ(t[i].kind, OpKind::Mark);
  std::size_t loads = 0;
  for (++i; t[i].kind == OpKind::Load; ++i) {
    // The measured lap continues the same cycle.
    EXPECT_EQ(t[i].addr, warm[loads % 100]);
    ++loads;
  }
  EXPECT_EQ(loads, 250u);
  EXPECT_THROW(gen_latency_chase(32, 64, 1, 0, 0), std::invalid_argument);
}

TEST(Core, HitLatenciesAndBlockingMiss) {
  FlatMemory mem;
  Trace t = {{OpKind::Load, 0, 0, 8, std::nullopt},
             {OpKind::Mark, 0, 0, 0, std::nullopt},
             {OpKind::Load, 0, 0, 8, std::nullopt},
             {OpKind::Load, 0, 0, 8, std::nullopt},
             {OpKind::Mark, 0, 0, 0, std::nullopt}};
  Core core(0, small_core(), t, 0);
  mem.run(core);
  EXPECT_EQ(mem.seen.size(), 1u);
  EXPECT_EQ(mem.seen[0].kind, RequestKind::Read);
  EXPECT_DOUBLE_EQ(cycles_per_load(core.stats()), 4.0);
  EXPECT_EQ(core.stats().misses, 1u);
  EXPECT_EQ(core.stats().l1_hits, 2u);
}

TEST(Core, ComputeCostsStatedCycles) {
  FlatMemory mem;
  Trace t = {{OpKind::Mark, 0, 0, 0, std::nullopt},
             {OpKind::Compute, 0, 0, 37, std::nullopt},
             {OpKind::Mark, 0, 0, 0, std::nullopt}};
  Core core(0, small_core(), t, 0);
  mem.run(core);
  EXPECT_EQ(core.stats().marks[1].first - core.stats().marks[0].first, 37u);
}

TEST(Core, ChasePlateaus) {
  // Working set inside L1, inside L2, far beyond L2.
  const auto cc = small_core();
  auto cpl = [&](std::uint64_t ws) {
    FlatMemory mem;
    Core core(0, cc, gen_latency_chase(ws, 64, 400, 0, 11), 0);
    mem.run(core);
    return cycles_per_load(core.stats());
  };
  EXPECT_DOUBLE_EQ(cpl(512), 4.0);
  EXPECT_DOUBLE_EQ(cpl(2048), 14.0);
  // l1 + l2 lookup, the memory round trip, then the fill.
  EXPECT_DOUBLE_EQ(cpl(64 * 1024), 14.0 + 50.0);
}

TEST(Core, ClflushDirtyLineSendsFlush) {
  FlatMemory mem;
  Trace t = {{OpKind::Store, 0x40, 0, 64, 0x1111ULL},
             {OpKind::Clflush, 0x40, 0, 0, std::nullopt},
             {OpKind::Clflush, 0x80, 0, 0, std::nullopt}};
  Core core(0, small_core(), t, 0);
  mem.run(core);
  ASSERT_EQ(core.stats().flush_requests, 1u);
  const auto& f = mem.seen.back();
  EXPECT_EQ(f.kind, RequestKind::Flush);
  EXPECT_EQ(f.payload, pattern_bytes(0x1111, 64));
  EXPECT_EQ(mem.get(0x40), pattern_bytes(0x1111, 64));
  EXPECT_EQ(core.caches().probe(0x40), CacheHierarchy::Level::Miss);
}

TEST(Core, RowCloneFallbackExpandsToLoadsAndStores) {
  FlatMemory mem;
  mem.lines[0] = line_of(5);
  mem.lines[64] = line_of(6);
  Core core(0, small_core(), gen_copy(128, CopyVariant::RowClone, CoherenceSetting::NoFlush, 0, 0x1000), 0);
  mem.run(core);
  EXPECT_EQ(core.stats().rowclone_requests, 1u);
  EXPECT_EQ(core.stats().fallback_bytes, 128u);
  auto backing = [&](std::uint64_t a) { return mem.get(a); };
  EXPECT_EQ(core.view_line(0x1000, backing), line_of(5));
  EXPECT_EQ(core.view_line(0x1040, backing), line_of(6));

  FlatMemory mem2;
  Core init(0, small_core(), gen_init(128, 0xC0FFEE, CopyVariant::RowClone, CoherenceSetting::NoFlush, 0x2000), 0);
  mem2.run(init);
  auto backing2 = [&](std::uint64_t a) { return mem2.get(a); };
  EXPECT_EQ(init.view_line(0x2040, backing2), pattern_bytes(0xC0FFEE, 64));
}

// A read returns the most recent store, whatever the cache did in between.
TEST(Property, StoreLoadConsistency) {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    Trace t;
    std::map<std::uint64_t, std::uint64_t> model;
    for (int i = 0; i < 400; ++i) {
      const std::uint64_t a = rng.below(256) * 64;
      switch (rng.below(3)) {
        case 0: {
          const std::uint64_t p = rng.next();
          t.push_back({OpKind::Store, a, 0, 64, p});
          model[a] = p;
          break;
        }
        case 1: t.push_back({OpKind::Load, a, 0, 8, std::nullopt}); break;
        default: t.push_back({OpKind::Clflush, a, 0, 0, std::nullopt}); break;
      }
    }
    FlatMemory mem;
    Core core(0, small_core(trial % 2 ? 2 : 0), t, 0);
    mem.run(core);
    auto backing = [&](std::uint64_t a) { return mem.get(a); };
    for (const auto& [a, p] : model) ASSERT_EQ(core.view_line(a, backing), pattern_bytes(p, 64)) << a;
  }
}

TEST(Property, BlockingCoreHasOneDemandRequest) {
  FlatMemory mem;
  Core core(0, small_core(), gen_latency_chase(64 * 1024, 64, 500, 0, 5), 0);
  mem.run(core);
  EXPECT_EQ(mem.max_outstanding, 1u);
}

TEST(Core, PrefetcherFillsL2Ahead) {
  const auto trace = gen_copy(16 * 1024, CopyVariant::CpuLdSt, CoherenceSetting::NoFlush, 0, 0x100000);
  FlatMemory a, b;
  Core plain(0, small_core(0), trace, 0);
  Core pf(0, small_core(4), trace, 0);
  a.run(plain);
  b.run(pf);
  EXPECT_GT(pf.stats().prefetches, 0u);
  const auto span = [](const CoreStats& s) { return s.marks[1].first - s.marks[0].first; };
  EXPECT_LT(span(pf.stats()), span(plain.stats()));
  // Same architectural result either way.
  for (std::uint64_t off = 0; off < 16 * 1024; off += 64)
    EXPECT_EQ(pf.view_line(0x100000 + off, [&](std::uint64_t x) { return b.get(x); }),
              plain.view_line(0x100000 + off, [&](std::uint64_t x) { return a.get(x); }));
}
