#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "edsim/command_engine.hpp"
#include "edsim/smc.hpp"
#include "edsim/techniques.hpp"

namespace edsim {

struct ControllerConfig {
  SchedulerKind scheduler = SchedulerKind::FRFCFS;
  MapScheme map = MapScheme::RowBankCol;
  bool refresh = true;
  bool operator==(const ControllerConfig&) const = default;
};

struct ServeResult {
  std::uint64_t request_id = 0;
  RequestKind kind = RequestKind::Read;
  std::vector<MemResponse> responses;  // empty for posted writes
  Nanos elapsed{};                     // device time from the requested start to completion
  std::uint64_t commands = 0;          // DRAM commands issued, refresh included
  bool forwarded = false;
};

struct ControllerStats {
  std::array<std::uint64_t, 6> served{};  // by RequestKind
  std::uint64_t forwarded_reads = 0;
  std::uint64_t refreshes = 0;
  std::uint64_t idle_refreshes = 0;  // intervals that elapsed while idle
  std::uint64_t rowclone_rows = 0;
  std::uint64_t rowclone_fallback_rows = 0;
  std::uint64_t init_source_writes = 0;
  std::uint64_t profiling_pass = 0;
  std::uint64_t profiling_fail = 0;
};

/// The controller's request table, scheduler and technique plugins on top
/// of one command engine. Time-free: callers decide when a decision starts.
class MemoryController {
 public:
  MemoryController(const DramConfig& cfg, ControllerConfig cc, std::shared_ptr<const ChipProfile> profile,
                   std::uint64_t fill_seed = 0, std::uint64_t corruption_seed = 0);

  void add(MemRequest r) { table_.add(std::move(r)); }
  bool idle() const { return table_.empty(); }
  const RequestTable& table() const { return table_; }

  /// Picks one request and serves it starting no earlier than `start`.
  std::optional<ServeResult> serve_one(Nanos start);

  void set_rowclone(std::shared_ptr<RowCloneTechnique> t) { rowclone_ = std::move(t); }
  void set_trcd(std::shared_ptr<TrcdReduction> t) { trcd_ = std::move(t); }
  const std::shared_ptr<RowCloneTechnique>& rowclone() const { return rowclone_; }
  const std::shared_ptr<TrcdReduction>& trcd() const { return trcd_; }

  CommandEngine& engine() { return engine_; }
  const CommandEngine& engine() const { return engine_; }
  const AddressMap& map() const { return map_; }
  const DramConfig& config() const { return cfg_; }
  const ControllerStats& stats() const { return stats_; }

  /// Backing-store bytes of one line.
  std::vector<std::uint8_t> read_backing(std::uint64_t line_addr) const;

 private:
  std::uint64_t maybe_refresh();
  ServeResult serve(const MemRequest& req, std::size_t index);
  void serve_read(const MemRequest& req, std::size_t index, ServeResult& out);
  void serve_write(const MemRequest& req, ServeResult& out);
  void serve_profiling(const MemRequest& req, ServeResult& out);
  void serve_copy(const MemRequest& req, ServeResult& out);
  void serve_init(const MemRequest& req, ServeResult& out);
  MemResponse response_for(const MemRequest& req) const;
  std::uint64_t flush(BatchBuilder& b);

  DramConfig cfg_;
  ControllerConfig cc_;
  AddressMap map_;
  CommandEngine engine_;
  RequestTable table_;
  Nanos next_refresh_;
  std::shared_ptr<RowCloneTechnique> rowclone_;
  std::shared_ptr<TrcdReduction> trcd_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> pattern_rows_;  // init source contents
  ControllerStats stats_;
};

}  // namespace edsim
