#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "edsim/command_engine.hpp"
#include "edsim/dram_timing.hpp"
#include "edsim/request.hpp"
#include "edsim/timescale.hpp"

namespace edsim {

class OutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class DuplicateId : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// RowBankCol: |row|bank|column|offset| with the bank group in the lowest
/// bank bits, so consecutive rows' worth of bytes rotate through bank groups.
/// BankRowCol: |bank|row|column|offset|.
enum class MapScheme : std::uint8_t { RowBankCol, BankRowCol };
std::string_view to_string(MapScheme s);
MapScheme map_scheme_from_string(const std::string& s);

class AddressMap {
 public:
  AddressMap(const DramConfig& cfg, MapScheme scheme = MapScheme::RowBankCol);

  DramAddress map(std::uint64_t phys) const;
  /// Line-aligned physical address of `a`.
  std::uint64_t unmap(const DramAddress& a) const;
  std::uint64_t capacity() const { return capacity_; }
  MapScheme scheme() const { return scheme_; }
  std::uint32_t row_size() const { return row_size_; }
  std::uint32_t line_size() const { return line_; }
  std::uint32_t flat_bank(const DramAddress& a) const { return a.bank * bank_groups_ + a.bank_group; }

 private:
  MapScheme scheme_;
  std::uint32_t line_, lines_per_row_, row_size_, bank_groups_, banks_per_group_, banks_, rows_;
  std::uint64_t capacity_;
};

struct TableEntry {
  MemRequest req;
  std::uint64_t arrival = 0;
};

/// Software request table, ordered by arrival.
class RequestTable {
 public:
  void add(MemRequest req);
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<TableEntry>& entries() const { return entries_; }
  TableEntry take(std::size_t index);

 private:
  std::vector<TableEntry> entries_;
  std::uint64_t next_arrival_ = 0;
};

/// Bounded hardware FIFO between the processor and the controller.
template <typename T>
class HwFifo {
 public:
  explicit HwFifo(std::size_t depth = 16) : depth_(depth) {}
  bool full() const { return q_.size() >= depth_; }
  bool empty() const { return q_.empty(); }
  std::size_t size() const { return q_.size(); }
  std::size_t depth() const { return depth_; }
  bool push(T v) {
    if (full()) return false;
    q_.push_back(std::move(v));
    return true;
  }
  std::optional<T> pop() {
    if (q_.empty()) return std::nullopt;
    T v = std::move(q_.front());
    q_.pop_front();
    return v;
  }
  const std::deque<T>& items() const { return q_; }
  std::deque<T>& items() { return q_; }

 private:
  std::size_t depth_;
  std::deque<T> q_;
};

/// Pops the FIFO head.
std::optional<MemRequest> get_request(HwFifo<MemRequest>& hw);

enum class SchedulerKind : std::uint8_t { FCFS, FRFCFS };
std::string_view to_string(SchedulerKind k);
SchedulerKind scheduler_from_string(const std::string& s);

bool is_technique_request(RequestKind k);

/// Index of the request FCFS would serve next.
std::optional<std::size_t> select_fcfs(const RequestTable& table);
/// Oldest row hit, else oldest. Row hits are only taken from requests older
/// than the oldest technique request, which acts as an ordering barrier.
std::optional<std::size_t> select_frfcfs(const RequestTable& table, const RankState& rank, const DramConfig& cfg,
                                        const AddressMap& map);

/// Minimal legal command sequence for a single-line Read/Write/Flush at or
/// after `now`: PRE on conflict, ACT if closed, then the column command.
/// A read that opens the row uses `act_trcd` when given (reduced tRCD).
CommandBatch build_access_batch(const MemRequest& req, const RankState& rank, const DramConfig& cfg,
                                const AddressMap& map, Nanos now, std::optional<Nanos> act_trcd = std::nullopt);

struct Scheduled {
  std::size_t index;
  CommandBatch batch;
};
std::optional<Scheduled> schedule_fcfs(const RequestTable& table, const RankState& rank, const DramConfig& cfg,
                                       const AddressMap& map, Nanos now);
std::optional<Scheduled> schedule_frfcfs(const RequestTable& table, const RankState& rank, const DramConfig& cfg,
                                         const AddressMap& map, Nanos now);

/// Critical-mode register: true enters, false exits (ProtocolError while
/// work is pending).
void set_scheduling_state(TimeScaleState& ts, bool critical, bool pending);

/// Stages `cmd` at its earliest legal time on `sim` (not before `not_before`),
/// applies it to `sim` and returns the issue time.
Nanos stage_legal(BatchBuilder& b, RankState& sim, const DramCommand& cmd, const DramConfig& cfg, Nanos batch_start,
                  Nanos not_before);

}  // namespace edsim
