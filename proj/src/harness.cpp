#include "edsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "edsim/rng.hpp"

namespace edsim {

namespace fs = std::filesystem;
using nlohmann::json;

// Seed derivation tags.
enum : std::uint64_t { kProfileTag = 1, kChaseTag, kCloneTag, kFilterTag, kFillTag, kCorruptTag };

std::string_view to_string(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::Empty: return "empty";
    case WorkloadKind::Chase: return "chase";
    case WorkloadKind::Copy: return "copy";
    case WorkloadKind::Init: return "init";
    case WorkloadKind::Trace: return "trace";
  }
  return "?";
}

namespace {

// --- value parsing ----------------------------------------------------------

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::uint64_t parse_u64(const std::string& v) {
  std::string t = trim(v);
  int base = 10;
  if (t.size() > 2 && t[0] == '0' && (t[1] == 'x' || t[1] == 'X')) {
    base = 16;
    t = t.substr(2);
  }
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out, base);
  if (ec != std::errc{} || p != t.data() + t.size() || t.empty()) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

/// Integer with an optional K, M or G (binary) suffix.
std::uint64_t parse_size(const std::string& v) {
  std::string t = trim(v);
  std::uint64_t mult = 1;
  if (!t.empty()) {
    switch (t.back()) {
      case 'K': case 'k': mult = 1ULL << 10; break;
      case 'M': case 'm': mult = 1ULL << 20; break;
      case 'G': case 'g': mult = 1ULL << 30; break;
      default: break;
    }
    if (mult != 1) t.pop_back();
  }
  return parse_u64(t) * mult;
}

std::uint32_t parse_u32(const std::string& v) {
  const std::uint64_t x = parse_u64(v);
  if (x > UINT32_MAX) throw ConfigError("value out of range: '" + v + "'");
  return static_cast<std::uint32_t>(x);
}

double parse_double(const std::string& v) {
  const std::string t = trim(v);
  double out = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc{} || p != t.data() + t.size() || t.empty()) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "on" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "off" || t == "0" || t == "no") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

Nanos parse_ns(const std::string& v) {
  try {
    return parse_nanos(trim(v));
  } catch (const std::exception&) {
    throw ConfigError("expected nanoseconds, got '" + v + "'");
  }
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  const fs::path p(path);
  if (p.is_absolute() || base_dir.empty() || base_dir == ".") return p.lexically_normal().string();
  return (fs::path(base_dir) / p).lexically_normal().string();
}

WorkloadKind workload_kind_from_string(const std::string& s) {
  for (auto k : {WorkloadKind::Empty, WorkloadKind::Chase, WorkloadKind::Copy, WorkloadKind::Init, WorkloadKind::Trace})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown workload kind '" + s + "'");
}

std::string_view variant_name(CopyVariant v) { return v == CopyVariant::RowClone ? "rowclone" : "cpu"; }
CopyVariant variant_from_string(const std::string& s) {
  if (s == "cpu") return CopyVariant::CpuLdSt;
  if (s == "rowclone") return CopyVariant::RowClone;
  throw ConfigError("unknown copy variant '" + s + "'");
}

std::string_view coherence_name(CoherenceSetting c) { return c == CoherenceSetting::Clflush ? "clflush" : "noflush"; }
CoherenceSetting coherence_from_string(const std::string& s) {
  if (s == "noflush") return CoherenceSetting::NoFlush;
  if (s == "clflush") return CoherenceSetting::Clflush;
  throw ConfigError("unknown coherence setting '" + s + "'");
}

std::string fmt_double(double d) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, p);
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// --- key table --------------------------------------------------------------

struct Ctx {
  ExperimentConfig& cfg;
  const std::string& base_dir;
};
using Setter = std::function<void(Ctx&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["run.name"] = [](Ctx& c, const std::string& v) { c.cfg.name = trim(v); };
    t["run.mode"] = [](Ctx& c, const std::string& v) { c.cfg.mode = mode_from_string(trim(v)); };
    t["run.seed"] = [](Ctx& c, const std::string& v) { c.cfg.seed = parse_u64(v); };
    t["run.cores"] = [](Ctx& c, const std::string& v) { c.cfg.cores = parse_u32(v); };

    t["dram.bank_groups"] = [](Ctx& c, const std::string& v) { c.cfg.system.dram.bank_groups = parse_u32(v); };
    t["dram.banks_per_group"] = [](Ctx& c, const std::string& v) { c.cfg.system.dram.banks_per_group = parse_u32(v); };
    t["dram.rows_per_bank"] = [](Ctx& c, const std::string& v) { c.cfg.system.dram.rows_per_bank = parse_u32(v); };
    t["dram.columns_per_row"] = [](Ctx& c, const std::string& v) { c.cfg.system.dram.columns_per_row = parse_u32(v); };
    t["dram.rows_per_refresh"] = [](Ctx& c, const std::string& v) { c.cfg.system.dram.rows_per_refresh = parse_u32(v); };
    for (std::size_t i = 0; i < kTimingParamCount; ++i) {
      const auto p = static_cast<TimingParam>(i);
      t["dram." + std::string(to_string(p))] = [p](Ctx& c, const std::string& v) { c.cfg.system.dram.set(p, parse_ns(v)); };
    }

    t["controller.scheduler"] = [](Ctx& c, const std::string& v) {
      c.cfg.system.controller.scheduler = scheduler_from_string(trim(v));
    };
    t["controller.map"] = [](Ctx& c, const std::string& v) { c.cfg.system.controller.map = map_scheme_from_string(trim(v)); };
    t["controller.refresh"] = [](Ctx& c, const std::string& v) { c.cfg.system.controller.refresh = parse_bool(v); };
    t["controller.sched_model"] = [](Ctx& c, const std::string& v) {
      c.cfg.system.sched = SchedLatencyModel::parse(trim(v));
    };
    t["controller.request_fifo"] = [](Ctx& c, const std::string& v) { c.cfg.system.request_fifo_depth = parse_u32(v); };
    t["controller.response_fifo"] = [](Ctx& c, const std::string& v) { c.cfg.system.response_fifo_depth = parse_u32(v); };
    t["controller.cost_transfer"] = [](Ctx& c, const std::string& v) { c.cfg.system.costs.request_transfer = parse_u64(v); };
    t["controller.cost_scheduling"] = [](Ctx& c, const std::string& v) { c.cfg.system.costs.scheduling = parse_u64(v); };
    t["controller.cost_stage"] = [](Ctx& c, const std::string& v) { c.cfg.system.costs.stage_per_command = parse_u64(v); };
    t["controller.cost_writeback"] = [](Ctx& c, const std::string& v) {
      c.cfg.system.costs.response_writeback = parse_u64(v);
    };

    t["domain.substrate_hz"] = [](Ctx& c, const std::string& v) { c.cfg.system.domain.substrate_freq_hz = parse_u64(v); };
    t["domain.target_hz"] = [](Ctx& c, const std::string& v) { c.cfg.system.domain.target_freq_hz = parse_u64(v); };

    t["core.l1_size"] = [](Ctx& c, const std::string& v) { c.cfg.system.core.l1d.size_bytes = parse_size(v); };
    t["core.l1_ways"] = [](Ctx& c, const std::string& v) { c.cfg.system.core.l1d.ways = parse_u32(v); };
    t["core.l1_latency"] = [](Ctx& c, const std::string& v) { c.cfg.system.core.l1d.hit_latency = parse_u64(v); };
    t["core.l2_size"] = [](Ctx& c, const std::string& v) { c.cfg.system.core.l2.size_bytes = parse_size(v); };
    t["core.l2_ways"] = [](Ctx& c, const std::string& v) { c.cfg.system.core.l2.ways = parse_u32(v); };
    t["core.l2_latency"] = [](Ctx& c, const std::string& v) { c.cfg.system.core.l2.hit_latency = parse_u64(v); };
    t["core.prefetch_degree"] = [](Ctx& c, const std::string& v) { c.cfg.system.core.l2_prefetch_degree = parse_u32(v); };

    t["profile.path"] = [](Ctx& c, const std::string& v) {
      c.cfg.profile.path = trim(v).empty() ? std::string{} : resolve(c.base_dir, trim(v));
    };
    t["profile.strong_fraction"] = [](Ctx& c, const std::string& v) { c.cfg.profile.strong_fraction = parse_double(v); };
    t["profile.clonable_rate"] = [](Ctx& c, const std::string& v) { c.cfg.profile.clonable_rate = parse_double(v); };
    t["profile.subarray_rows"] = [](Ctx& c, const std::string& v) { c.cfg.profile.subarray_rows = parse_u32(v); };
    t["profile.seed"] = [](Ctx& c, const std::string& v) {
      if (trim(v).empty())
        c.cfg.profile.seed.reset();
      else
        c.cfg.profile.seed = parse_u64(v);
    };
    t["profile.ladder"] = [](Ctx& c, const std::string& v) {
      std::vector<Nanos> ladder;
      for (const auto& s : split_list(v)) ladder.push_back(parse_ns(s));
      c.cfg.profile.ladder = std::move(ladder);
    };

    t["techniques.rowclone"] = [](Ctx& c, const std::string& v) { c.cfg.techniques.rowclone = parse_bool(v); };
    t["techniques.rowclone_t1"] = [](Ctx& c, const std::string& v) { c.cfg.techniques.rowclone_cfg.t1 = parse_ns(v); };
    t["techniques.rowclone_t2"] = [](Ctx& c, const std::string& v) { c.cfg.techniques.rowclone_cfg.t2 = parse_ns(v); };
    t["techniques.verify_trials"] = [](Ctx& c, const std::string& v) {
      c.cfg.techniques.rowclone_cfg.verify_trials = parse_u32(v);
    };
    t["techniques.trcd_reduction"] = [](Ctx& c, const std::string& v) { c.cfg.techniques.trcd_reduction = parse_bool(v); };
    t["techniques.reduced_trcd"] = [](Ctx& c, const std::string& v) { c.cfg.techniques.reduced_trcd = parse_ns(v); };
    t["techniques.heatmap"] = [](Ctx& c, const std::string& v) {
      c.cfg.techniques.trcd_heatmap = trim(v).empty() ? std::string{} : resolve(c.base_dir, trim(v));
    };
    t["techniques.filter_bits_per_row"] = [](Ctx& c, const std::string& v) {
      c.cfg.techniques.filter_bits_per_row = parse_u32(v);
    };
    t["techniques.filter_k"] = [](Ctx& c, const std::string& v) { c.cfg.techniques.filter_k = parse_u32(v); };

    t["workload.kind"] = [](Ctx& c, const std::string& v) { c.cfg.workload.kind = workload_kind_from_string(trim(v)); };
    t["workload.size"] = [](Ctx& c, const std::string& v) { c.cfg.workload.size = parse_size(v); };
    t["workload.stride"] = [](Ctx& c, const std::string& v) { c.cfg.workload.stride = parse_size(v); };
    t["workload.loads"] = [](Ctx& c, const std::string& v) { c.cfg.workload.loads = parse_u64(v); };
    t["workload.base"] = [](Ctx& c, const std::string& v) { c.cfg.workload.base = parse_size(v); };
    t["workload.variant"] = [](Ctx& c, const std::string& v) { c.cfg.workload.variant = variant_from_string(trim(v)); };
    t["workload.coherence"] = [](Ctx& c, const std::string& v) {
      c.cfg.workload.coherence = coherence_from_string(trim(v));
    };
    t["workload.pattern"] = [](Ctx& c, const std::string& v) { c.cfg.workload.pattern = parse_u64(v); };
    t["workload.traces"] = [](Ctx& c, const std::string& v) {
      c.cfg.workload.traces.clear();
      for (const auto& s : split_list(v)) c.cfg.workload.traces.push_back(resolve(c.base_dir, s));
    };

    t["sweep.baseline"] = [](Ctx& c, const std::string& v) { c.cfg.sweep_baseline = trim(v); };
    return t;
  }();
  return table;
}

}  // namespace

// --- config -----------------------------------------------------------------

void ExperimentConfig::validate() const {
  system.dram.validate();
  system.domain.validate();
  CoreConfig cc = system.core;
  cc.target_freq_hz = system.domain.target_freq_hz;
  cc.validate();
  if (cc.l1d.line_bytes != system.dram.cache_line_bytes) throw ConfigError("cache line size differs from DRAM line size");
  if (cores == 0 || cores > 64) throw ConfigError("cores must be in 1..64");
  if (system.request_fifo_depth == 0 || system.response_fifo_depth == 0) throw ConfigError("FIFO depth must be positive");
  if (!(profile.strong_fraction >= 0 && profile.strong_fraction <= 1))
    throw ConfigError("profile.strong_fraction must be in [0, 1]");
  if (!(profile.clonable_rate >= 0 && profile.clonable_rate <= 1))
    throw ConfigError("profile.clonable_rate must be in [0, 1]");
  if (profile.subarray_rows == 0 || system.dram.rows_per_bank % profile.subarray_rows != 0)
    throw ConfigError("profile.subarray_rows must divide rows_per_bank");
  if (profile.ladder.empty() || !std::is_sorted(profile.ladder.begin(), profile.ladder.end()))
    throw ConfigError("profile.ladder must be a non-empty ascending list");
  if (techniques.rowclone && techniques.rowclone_cfg.verify_trials == 0)
    throw ConfigError("techniques.verify_trials must be positive");
  if (techniques.trcd_reduction) {
    if (techniques.filter_bits_per_row == 0 || techniques.filter_k == 0)
      throw ConfigError("filter parameters must be positive");
    if (techniques.reduced_trcd <= Nanos::zero() || techniques.reduced_trcd > system.dram.t(TimingParam::tRCD))
      throw ConfigError("techniques.reduced_trcd must be in (0, tRCD]");
  }
  const auto& w = workload;
  switch (w.kind) {
    case WorkloadKind::Empty: break;
    case WorkloadKind::Chase:
      if (w.stride == 0 || w.size < w.stride) throw ConfigError("chase needs size >= stride > 0");
      if (w.loads == 0) throw ConfigError("chase needs loads > 0");
      break;
    case WorkloadKind::Copy:
    case WorkloadKind::Init:
      if (w.size == 0) throw ConfigError("workload.size must be positive");
      if (w.variant == CopyVariant::RowClone && !techniques.rowclone)
        throw ConfigError("the rowclone variant needs techniques.rowclone = true");
      break;
    case WorkloadKind::Trace:
      if (w.traces.empty()) throw ConfigError("trace workload needs workload.traces");
      break;
  }
}

void apply_config(ExperimentConfig& cfg, std::istream& in, const std::string& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  Ctx ctx{cfg, base_dir};
  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      auto it = table.find(full);
      if (it == table.end()) throw ConfigError("config: unknown key [" + section + "] " + key);
      try {
        it->second(ctx, value.data());
      } catch (const ConfigError& e) {
        throw ConfigError("config: [" + section + "] " + key + ": " + e.what());
      }
    }
  }
}

ExperimentConfig parse_config(std::istream& in, const std::string& base_dir) {
  ExperimentConfig cfg;
  apply_config(cfg, in, base_dir);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(in, fs::path(path).parent_path().string());
}

std::string canonical_config(const ExperimentConfig& c) {
  std::ostringstream o;
  const auto& s = c.system;
  o << "[run]\n"
    << "name = " << c.name << "\nmode = " << to_string(c.mode) << "\nseed = " << c.seed << "\ncores = " << c.cores
    << "\n\n[dram]\n"
    << "bank_groups = " << s.dram.bank_groups << "\nbanks_per_group = " << s.dram.banks_per_group
    << "\nrows_per_bank = " << s.dram.rows_per_bank << "\ncolumns_per_row = " << s.dram.columns_per_row
    << "\nrows_per_refresh = " << s.dram.rows_per_refresh << "\n";
  for (std::size_t i = 0; i < kTimingParamCount; ++i) {
    const auto p = static_cast<TimingParam>(i);
    o << to_string(p) << " = " << s.dram.t(p).str() << "\n";
  }
  o << "\n[controller]\n"
    << "scheduler = " << to_string(s.controller.scheduler) << "\nmap = " << to_string(s.controller.map)
    << "\nrefresh = " << (s.controller.refresh ? "true" : "false") << "\nsched_model = " << s.sched.str()
    << "\nrequest_fifo = " << s.request_fifo_depth << "\nresponse_fifo = " << s.response_fifo_depth
    << "\ncost_transfer = " << s.costs.request_transfer << "\ncost_scheduling = " << s.costs.scheduling
    << "\ncost_stage = " << s.costs.stage_per_command << "\ncost_writeback = " << s.costs.response_writeback
    << "\n\n[domain]\n"
    << "substrate_hz = " << s.domain.substrate_freq_hz << "\ntarget_hz = " << s.domain.target_freq_hz
    << "\n\n[core]\n"
    << "l1_size = " << s.core.l1d.size_bytes << "\nl1_ways = " << s.core.l1d.ways
    << "\nl1_latency = " << s.core.l1d.hit_latency << "\nl2_size = " << s.core.l2.size_bytes
    << "\nl2_ways = " << s.core.l2.ways << "\nl2_latency = " << s.core.l2.hit_latency
    << "\nprefetch_degree = " << s.core.l2_prefetch_degree << "\n\n[profile]\n"
    << "path = " << c.profile.path << "\nstrong_fraction = " << fmt_double(c.profile.strong_fraction)
    << "\nclonable_rate = " << fmt_double(c.profile.clonable_rate) << "\nsubarray_rows = " << c.profile.subarray_rows
    << "\nseed = " << (c.profile.seed ? std::to_string(*c.profile.seed) : std::string{}) << "\nladder = ";
  for (std::size_t i = 0; i < c.profile.ladder.size(); ++i) o << (i ? ", " : "") << c.profile.ladder[i].str();
  const auto& t = c.techniques;
  o << "\n\n[techniques]\n"
    << "rowclone = " << (t.rowclone ? "true" : "false") << "\nrowclone_t1 = " << t.rowclone_cfg.t1.str()
    << "\nrowclone_t2 = " << t.rowclone_cfg.t2.str() << "\nverify_trials = " << t.rowclone_cfg.verify_trials
    << "\ntrcd_reduction = " << (t.trcd_reduction ? "true" : "false") << "\nreduced_trcd = " << t.reduced_trcd.str()
    << "\nheatmap = " << t.trcd_heatmap << "\nfilter_bits_per_row = " << t.filter_bits_per_row
    << "\nfilter_k = " << t.filter_k << "\n\n[workload]\n";
  const auto& w = c.workload;
  o << "kind = " << to_string(w.kind) << "\nsize = " << w.size << "\nstride = " << w.stride << "\nloads = " << w.loads
    << "\nbase = " << w.base << "\nvariant = " << variant_name(w.variant)
    << "\ncoherence = " << coherence_name(w.coherence) << "\npattern = " << hex64(w.pattern) << "\ntraces = ";
  for (std::size_t i = 0; i < w.traces.size(); ++i) o << (i ? ", " : "") << w.traces[i];
  o << "\n\n[sweep]\nbaseline = " << c.sweep_baseline << "\n";
  return o.str();
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string out;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    out += buf;
  }
  return out;
}

std::string config_digest(const ExperimentConfig& cfg) { return sha256_hex(canonical_config(cfg)); }

// --- profile ----------------------------------------------------------------

std::shared_ptr<const ChipProfile> build_profile(const ExperimentConfig& cfg) {
  const auto geom = ProfileGeometry::of(cfg.system.dram, cfg.profile.subarray_rows);
  if (!cfg.profile.path.empty()) {
    std::ifstream in(cfg.profile.path);
    if (!in) throw ConfigError("cannot open chip profile '" + cfg.profile.path + "'");
    ChipProfile p;
    try {
      p = read_profile(in);
    } catch (const ProfileParseError& e) {
      throw ConfigError(cfg.profile.path + ": " + e.what());
    }
    if (!(p.geometry() == geom)) throw ConfigError("chip profile geometry differs from the configured DRAM");
    return std::make_shared<const ChipProfile>(std::move(p));
  }
  const std::uint64_t seed = cfg.profile.seed.value_or(hash_of(cfg.seed, kProfileTag));
  return std::make_shared<const ChipProfile>(
      generate_profile(geom, cfg.profile.strong_fraction, cfg.profile.clonable_rate, seed));
}

RowTrcdTable profile_rows(const ExperimentConfig& cfg, std::shared_ptr<const ChipProfile> profile) {
  CommandEngine engine(cfg.system.dram, std::move(profile), hash_of(cfg.seed, kFillTag),
                       hash_of(cfg.seed, kCorruptTag));
  return RowTrcdTable::from_profile(profile_chip(engine, cfg.profile.ladder, cfg.profile.subarray_rows));
}

// --- run --------------------------------------------------------------------

namespace {

struct Workload {
  std::vector<Trace> traces;
  struct Check {
    std::uint64_t src = 0, dst = 0, size = 0;
    bool init = false;
    std::uint64_t pattern = 0;
  };
  std::vector<Check> checks;
  std::uint64_t plan_operations = 0;
  std::uint64_t plan_fallback_rows = 0;
};

std::uint64_t rows_for(std::uint64_t size, const DramConfig& d) {
  return std::max<std::uint64_t>(1, (size + d.row_size_bytes() - 1) / d.row_size_bytes());
}

Workload build_workload(const ExperimentConfig& cfg, RowAllocator& alloc, RowCloneTechnique* rc) {
  Workload w;
  const auto& spec = cfg.workload;
  const auto& dram = cfg.system.dram;
  const std::uint32_t line = dram.cache_line_bytes;
  switch (spec.kind) {
    case WorkloadKind::Empty: w.traces.assign(cfg.cores, Trace{}); break;
    case WorkloadKind::Chase: {
      const std::uint64_t span = (spec.size + (1ULL << 20) - 1) >> 20 << 20;
      if (spec.base + span * cfg.cores > dram.capacity_bytes()) throw ConfigError("chase working sets exceed DRAM capacity");
      for (std::uint32_t c = 0; c < cfg.cores; ++c)
        w.traces.push_back(gen_latency_chase(spec.size, spec.stride, spec.loads, spec.base + span * c,
                                             hash_of(cfg.seed, kChaseTag, c)));
      break;
    }
    case WorkloadKind::Copy:
      for (std::uint32_t c = 0; c < cfg.cores; ++c) {
        std::uint64_t src, dst;
        if (rc) {
          const auto plan = plan_bulk_copy(spec.size, alloc, *rc, dram);
          src = plan.src_addr;
          dst = plan.dst_addr;
          w.plan_operations += plan.operations.size();
          w.plan_fallback_rows += plan.fallback_rows.size();
        } else {
          std::tie(src, dst) = alloc.allocate_pair(rows_for(spec.size, dram));
        }
        w.traces.push_back(gen_copy(spec.size, spec.variant, spec.coherence, src, dst, line));
        w.checks.push_back({src, dst, spec.size, false, 0});
      }
      break;
    case WorkloadKind::Init:
      for (std::uint32_t c = 0; c < cfg.cores; ++c) {
        std::uint64_t dst;
        if (rc) {
          const auto plan = plan_bulk_init(spec.size, alloc, *rc, dram);
          dst = plan.dst_addr;
          w.plan_operations += plan.operations.size();
          w.plan_fallback_rows += plan.fallback_rows.size();
        } else {
          dst = alloc.allocate(rows_for(spec.size, dram));
        }
        w.traces.push_back(gen_init(spec.size, spec.pattern, spec.variant, spec.coherence, dst, line));
        w.checks.push_back({0, dst, spec.size, true, spec.pattern});
      }
      break;
    case WorkloadKind::Trace:
      for (const auto& path : spec.traces) {
        try {
          w.traces.push_back(load_trace(path));
        } catch (const std::runtime_error& e) {  // parse errors and unreadable files
          throw ConfigError(path + ": " + e.what());
        }
      }
      break;
  }
  return w;
}

json request_json(const SystemResult& res) {
  std::map<std::string, std::uint64_t> by_kind;
  for (auto k : {RequestKind::Read, RequestKind::Write, RequestKind::Flush, RequestKind::Profiling,
                 RequestKind::RowCloneCopy, RequestKind::RowCloneInit})
    by_kind[std::string(to_string(k))] = 0;
  std::uint64_t prefetches = 0, posted = 0, answered = 0, total_latency = 0, max_latency = 0;
  std::vector<std::uint64_t> hist;
  for (const auto& r : res.requests) {
    ++by_kind[std::string(to_string(r.kind))];
    prefetches += r.prefetch;
    if (r.posted) {
      ++posted;
      continue;
    }
    const std::uint64_t lat = r.release - r.tag;
    ++answered;
    total_latency += lat;
    max_latency = std::max(max_latency, lat);
    std::size_t bucket = 0;
    while (bucket < 63 && (std::uint64_t{2} << bucket) <= lat) ++bucket;
    if (hist.size() <= bucket) hist.resize(bucket + 1, 0);
    ++hist[bucket];
  }
  json h = json::array();
  for (std::size_t b = 0; b < hist.size(); ++b)
    h.push_back({{"lo", b == 0 ? 0 : std::uint64_t{1} << b}, {"hi", (std::uint64_t{2} << b) - 1}, {"count", hist[b]}});
  json j;
  j["total"] = res.requests.size();
  j["by_kind"] = by_kind;
  j["prefetches"] = prefetches;
  j["posted"] = posted;
  j["latency"] = {{"answered", answered},
                  {"mean", answered ? static_cast<double>(total_latency) / static_cast<double>(answered) : 0.0},
                  {"max", max_latency},
                  {"histogram_log2", h}};
  return j;
}

json core_json(const CoreStats& s) {
  json j = {{"loads", s.loads},
            {"stores", s.stores},
            {"l1_hits", s.l1_hits},
            {"l2_hits", s.l2_hits},
            {"misses", s.misses},
            {"writebacks", s.writebacks},
            {"flush_requests", s.flush_requests},
            {"prefetches", s.prefetches},
            {"fifo_stalls", s.fifo_stalls},
            {"fallback_bytes", s.fallback_bytes},
            {"rowclone_requests", s.rowclone_requests},
            {"finished_at", s.finished_at.value_or(0)}};
  if (s.marks.size() >= 2) {
    const Cycles region = s.marks[1].first - s.marks[0].first;
    const std::uint64_t loads = s.marks[1].second - s.marks[0].second;
    j["region_cycles"] = region;
    j["region_loads"] = loads;
    j["cycles_per_load"] = loads ? static_cast<double>(region) / static_cast<double>(loads) : 0.0;
  }
  return j;
}

}  // namespace

RunReport run(const ExperimentConfig& cfg) { return run(cfg, build_profile(cfg)); }

RunReport run(const ExperimentConfig& cfg, std::shared_ptr<const ChipProfile> profile) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  SystemConfig sc = cfg.system;
  sc.fill_seed = hash_of(cfg.seed, kFillTag);
  sc.corruption_seed = hash_of(cfg.seed, kCorruptTag);
  const AddressMap map(sc.dram, sc.controller.map);
  RowAllocator alloc(sc.dram, map, profile->geometry().subarray_rows);

  std::shared_ptr<RowCloneTechnique> rc;
  if (cfg.techniques.rowclone)
    rc = std::make_shared<RowCloneTechnique>(sc.dram, profile, cfg.techniques.rowclone_cfg, hash_of(cfg.seed, kCloneTag));

  Workload w;
  try {
    w = build_workload(cfg, alloc, rc.get());
  } catch (const OutOfRows& e) {
    throw ConfigError(std::string("workload does not fit in DRAM: ") + e.what());
  }

  SimSystem sys(cfg.mode, sc, profile, std::move(w.traces));
  if (rc) sys.controller().set_rowclone(rc);

  std::shared_ptr<TrcdReduction> trcd;
  std::optional<TrcdSafetyMonitor> monitor;
  if (cfg.techniques.trcd_reduction) {
    const Nanos nominal = sc.dram.t(TimingParam::tRCD);
    const RowTrcdTable truth = RowTrcdTable::from_profile(*profile);
    RowTrcdTable table = truth;
    if (!cfg.techniques.trcd_heatmap.empty()) {
      std::ifstream in(cfg.techniques.trcd_heatmap);
      if (!in) throw ConfigError("cannot open heatmap '" + cfg.techniques.trcd_heatmap + "'");
      try {
        table = read_heatmap(in);
      } catch (const HeatmapParseError& e) {
        throw ConfigError(cfg.techniques.trcd_heatmap + ": " + e.what());
      }
      if (table.banks() != truth.banks() || table.rows_per_bank() != truth.rows_per_bank())
        throw ConfigError("heatmap geometry differs from the configured DRAM");
    }
    FilterParams fp;
    fp.bits_per_row = cfg.techniques.filter_bits_per_row;
    fp.k = cfg.techniques.filter_k;
    fp.seed = hash_of(cfg.seed, kFilterTag);
    trcd = std::make_shared<TrcdReduction>(build_weak_filter(table, fp), table, cfg.techniques.reduced_trcd, nominal,
                                           kStrongTrcdThreshold);
    sys.controller().set_trcd(trcd);
    monitor.emplace(truth, nominal);
    monitor->attach(sys.controller().engine());
  }

  const SystemResult res = sys.run();

  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["name"] = cfg.name;
  j["mode"] = to_string(cfg.mode);
  j["seed"] = cfg.seed;
  j["config_digest"] = config_digest(cfg);
  j["domain"] = {{"substrate_hz", sys.domain().substrate_freq_hz},
                 {"target_hz", sys.domain().target_freq_hz},
                 {"sched_model", sys.sched().str()}};

  Cycles measured = 0;
  bool marked = false;
  for (const auto& c : res.cores)
    if (c.marks.size() >= 2) {
      measured = std::max(measured, c.marks[1].first - c.marks[0].first);
      marked = true;
    }
  j["cycles"] = {{"emulated", res.emulated_cycles},
                 {"substrate", res.substrate_cycles},
                 {"decisions", res.decisions},
                 {"measured", marked ? measured : res.emulated_cycles}};
  j["requests"] = request_json(res);

  const auto& es = sys.controller().engine().stats();
  json cmds;
  for (std::size_t k = 0; k < kCommandKindCount; ++k)
    cmds[std::string(to_string(static_cast<CommandKind>(k)))] = es.commands[k];
  cmds["batches"] = es.batches;
  cmds["corrupt_reads"] = es.corrupt_reads;
  j["dram_commands"] = cmds;

  const auto& cs = sys.controller().stats();
  j["controller"] = {{"forwarded_reads", cs.forwarded_reads},
                     {"refreshes", cs.refreshes},
                     {"idle_refreshes", cs.idle_refreshes},
                     {"profiling_pass", cs.profiling_pass},
                     {"profiling_fail", cs.profiling_fail}};

  json cores = json::array();
  for (const auto& c : res.cores) cores.push_back(core_json(c));
  j["cores"] = cores;

  json tech;
  tech["rowclone"] = {{"enabled", cfg.techniques.rowclone},
                      {"plan_operations", w.plan_operations},
                      {"plan_fallback_rows", w.plan_fallback_rows},
                      {"verifications", rc ? rc->verifications() : 0},
                      {"cloned_rows", cs.rowclone_rows},
                      {"fallback_rows", cs.rowclone_fallback_rows},
                      {"init_source_writes", cs.init_source_writes},
                      {"clone_success", es.clone_success},
                      {"clone_fail", es.clone_fail}};
  json tj = {{"enabled", cfg.techniques.trcd_reduction}};
  if (trcd) {
    const auto& ts = trcd->stats();
    tj["activations"] = ts.activations;
    tj["reduced_activations"] = ts.reduced_activations;
    tj["filter_false_positives"] = ts.filter_false_positives;
    tj["filter_bits"] = trcd->filter().m();
    tj["filter_weak_rows"] = trcd->filter().inserted();
    tj["monitor"] = {{"reads", monitor->reads()},
                     {"reduced_reads", monitor->reduced_reads()},
                     {"violations", monitor->violations()},
                     {"corrupt_reads", monitor->corrupt_reads()}};
  }
  tech["trcd"] = tj;
  j["techniques"] = tech;

  std::string check = w.checks.empty() ? "none" : "pass";
  for (const auto& c : w.checks) {
    const auto expect_init = pattern_bytes(c.pattern, sc.dram.cache_line_bytes);
    for (std::uint64_t off = 0; off < c.size && check == "pass"; off += sc.dram.cache_line_bytes) {
      const auto got = sys.read_line(c.dst + off);
      if (got != (c.init ? expect_init : sys.read_line(c.src + off))) check = "fail";
    }
  }
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(sys.controller().engine().data().digest()));
  j["data"] = {{"check", check}, {"dram_digest", digest}};

  RunReport r;
  r.json = std::move(j);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string report_text(const json& j) { return j.dump(2) + "\n"; }

void write_report_summary(std::ostream& out, const RunReport& r) {
  const auto& j = r.json;
  out << "run " << j.at("name").get<std::string>() << " (" << j.at("mode").get<std::string>() << ", seed "
      << j.at("seed").get<std::uint64_t>() << ")\n"
      << "  emulated cycles   " << r.emulated_cycles() << "\n"
      << "  measured cycles   " << r.measured_cycles() << "\n"
      << "  substrate cycles  " << j.at("cycles").at("substrate").get<Cycles>() << "\n"
      << "  requests          " << j.at("requests").at("total").get<std::uint64_t>() << " (mean latency "
      << std::fixed << std::setprecision(2) << r.mean_latency() << ")\n";
  out << "  dram commands    ";
  for (std::size_t k = 0; k < kCommandKindCount; ++k) {
    const std::string name(to_string(static_cast<CommandKind>(k)));
    out << " " << name << "=" << j.at("dram_commands").at(name).get<std::uint64_t>();
  }
  out << "\n  data check        " << j.at("data").at("check").get<std::string>() << "\n"
      << "  config digest     " << j.at("config_digest").get<std::string>().substr(0, 16) << "\n"
      << "  wall time         " << std::setprecision(3) << r.wall_seconds << " s\n";
  out.unsetf(std::ios::floatfield);
}

// --- compare ----------------------------------------------------------------

namespace {

std::vector<std::pair<std::string, const json*>> report_list(const json& j) {
  std::vector<std::pair<std::string, const json*>> out;
  if (j.contains("runs")) {
    for (const auto& r : j.at("runs")) out.emplace_back(r.at("name").get<std::string>(), &r.at("report"));
  } else if (j.contains("cycles")) {
    out.emplace_back(j.value("name", std::string("run")), &j);
  } else {
    throw ConfigError("not a run report or sweep result");
  }
  return out;
}

double pct(double a, double b) { return a == 0 ? (b == 0 ? 0.0 : 100.0) : (b - a) / a * 100.0; }

}  // namespace

Comparison compare(const json& a, const json& b) {
  const auto la = report_list(a);
  const auto lb = report_list(b);
  Comparison c;
  const bool single = la.size() == 1 && lb.size() == 1;
  for (const auto& [name, ra] : la) {
    const json* rb = nullptr;
    if (single) {
      rb = lb.front().second;
    } else {
      for (const auto& [nb, r] : lb)
        if (nb == name) rb = r;
      if (!rb) continue;
    }
    CompareRow row;
    row.name = name;
    row.a_cycles = ra->at("cycles").at("measured").get<Cycles>();
    row.b_cycles = rb->at("cycles").at("measured").get<Cycles>();
    row.delta_pct = pct(static_cast<double>(row.a_cycles), static_cast<double>(row.b_cycles));
    row.latency_delta_pct = pct(ra->at("requests").at("latency").at("mean").get<double>(),
                                rb->at("requests").at("latency").at("mean").get<double>());
    c.rows.push_back(row);
  }
  if (c.rows.empty()) throw ConfigError("compare: no runs in common");
  for (const auto& r : c.rows) {
    c.mean_abs_delta_pct += std::abs(r.delta_pct);
    c.max_abs_delta_pct = std::max(c.max_abs_delta_pct, std::abs(r.delta_pct));
    c.mean_abs_latency_delta_pct += std::abs(r.latency_delta_pct);
    c.max_abs_latency_delta_pct = std::max(c.max_abs_latency_delta_pct, std::abs(r.latency_delta_pct));
  }
  c.mean_abs_delta_pct /= static_cast<double>(c.rows.size());
  c.mean_abs_latency_delta_pct /= static_cast<double>(c.rows.size());
  return c;
}

json to_json(const Comparison& c) {
  json rows = json::array();
  for (const auto& r : c.rows)
    rows.push_back({{"name", r.name},
                    {"a_cycles", r.a_cycles},
                    {"b_cycles", r.b_cycles},
                    {"exec_time_delta_pct", r.delta_pct},
                    {"latency_delta_pct", r.latency_delta_pct}});
  return {{"per_benchmark", rows},
          {"exec_time_delta_pct", {{"mean_abs", c.mean_abs_delta_pct}, {"max_abs", c.max_abs_delta_pct}}},
          {"latency_delta_pct", {{"mean_abs", c.mean_abs_latency_delta_pct}, {"max_abs", c.max_abs_latency_delta_pct}}}};
}

// --- sweep ------------------------------------------------------------------

std::vector<SweepItem> load_workloads(const ExperimentConfig& base, const std::string& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec))
    if (e.is_regular_file() && e.path().extension() == ".ini") files.push_back(e.path());
  if (ec) throw ConfigError("cannot read workload directory '" + dir + "'");
  std::sort(files.begin(), files.end());
  std::vector<SweepItem> items;
  for (const auto& f : files) {
    SweepItem item{f.stem().string(), base};
    item.cfg.name = item.name;
    std::ifstream in(f);
    if (!in) throw ConfigError("cannot open '" + f.string() + "'");
    try {
      apply_config(item.cfg, in, dir);
      item.cfg.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(f.string() + ": " + e.what());
    }
    items.push_back(std::move(item));
  }
  return items;
}

SweepResult sweep(const std::vector<SweepItem>& items, const std::string& baseline, unsigned workers) {
  const auto base_it =
      std::find_if(items.begin(), items.end(), [&](const SweepItem& i) { return i.name == baseline; });
  if (base_it == items.end()) throw ConfigError("sweep baseline '" + baseline + "' is not among the workloads");

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(items.size()));
  std::vector<std::optional<RunReport>> reports(items.size());
  std::vector<std::exception_ptr> errors(items.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i; (i = next.fetch_add(1)) < items.size();) {
        try {
          reports[i] = run(items[i].cfg);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    }));
  for (auto& f : pool) f.get();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  SweepResult out;
  out.baseline = baseline;
  for (std::size_t i = 0; i < items.size(); ++i) out.runs.emplace_back(items[i].name, std::move(*reports[i]));
  const double base_cycles = static_cast<double>(out.runs[base_it - items.begin()].second.measured_cycles());
  for (const auto& [name, r] : out.runs) {
    const double v = static_cast<double>(r.measured_cycles());
    out.speedups.emplace_back(name, v == 0 ? 0.0 : base_cycles / v);
  }
  return out;
}

json to_json(const SweepResult& s) {
  json runs = json::array();
  for (const auto& [name, r] : s.runs) runs.push_back({{"name", name}, {"report", r.json}});
  json sp = json::array();
  for (const auto& [name, v] : s.speedups) sp.push_back({{"name", name}, {"speedup", v}});
  return {{"schema_version", kReportSchemaVersion}, {"baseline", s.baseline}, {"runs", runs}, {"speedups", sp}};
}

void write_sweep_csv(std::ostream& out, const SweepResult& s) {
  out << "name,mode,emulated_cycles,measured_cycles,mean_latency,speedup\n";
  for (std::size_t i = 0; i < s.runs.size(); ++i) {
    const auto& r = s.runs[i].second;
    out << s.runs[i].first << "," << r.json.at("mode").get<std::string>() << "," << r.emulated_cycles() << ","
        << r.measured_cycles() << "," << fmt_double(r.mean_latency()) << "," << fmt_double(s.speedups[i].second)
        << "\n";
  }
}

}  // namespace edsim
