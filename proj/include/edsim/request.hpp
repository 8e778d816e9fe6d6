#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "edsim/units.hpp"

namespace edsim {

enum class RequestKind : std::uint8_t { Read, Write, Flush, Profiling, RowCloneCopy, RowCloneInit };
std::string_view to_string(RequestKind k);

struct MemRequest {
  std::uint64_t id = 0;
  RequestKind kind = RequestKind::Read;
  std::uint64_t phys_addr = 0;  // source for RowCloneCopy, destination for RowCloneInit
  std::uint64_t size_bytes = 0;
  std::vector<std::uint8_t> payload;  // Write/Flush data; RowCloneInit pattern row
  Cycles tag_cycle = 0;
  std::optional<Nanos> profiling_trcd;
  std::uint64_t dst_addr = 0;  // RowCloneCopy destination
  std::uint32_t core = 0;
  bool prefetch = false;
  bool posted = false;  // no response is routed back (evictions, prefetch-free writes)
};

enum class ResponseStatus : std::uint8_t { OK, ProfilingPass, ProfilingFail, FallbackUsed };
std::string_view to_string(ResponseStatus s);

/// Byte range the processor must handle itself after a partial in-DRAM operation.
struct FallbackSegment {
  std::uint64_t src = 0;  // unused for init
  std::uint64_t dst = 0;
  std::uint64_t size = 0;
  bool operator==(const FallbackSegment&) const = default;
};

struct MemResponse {
  std::uint64_t request_id = 0;
  RequestKind kind = RequestKind::Read;
  std::uint32_t core = 0;
  std::uint64_t phys_addr = 0;
  bool prefetch = false;
  ResponseStatus status = ResponseStatus::OK;
  std::optional<std::vector<std::uint8_t>> data;
  std::vector<FallbackSegment> fallback;
  Cycles release_at = 0;
};

}  // namespace edsim
