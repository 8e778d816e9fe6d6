#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <string>

namespace edsim {

/// Device-side time with 1 ps (0.001 ns) resolution.
class Nanos {
 public:
  constexpr Nanos() = default;

  static constexpr Nanos from_ps(std::int64_t ps) { return Nanos(ps); }
  /// Rounds to the nearest picosecond.
  static constexpr Nanos from_ns(double ns) {
    const double ps = ns * 1000.0;
    return Nanos(static_cast<std::int64_t>(ps >= 0 ? ps + 0.5 : ps - 0.5));
  }
  static constexpr Nanos zero() { return Nanos(0); }
  static constexpr Nanos max() { return Nanos(std::numeric_limits<std::int64_t>::max() / 4); }

  constexpr std::int64_t ps() const { return ps_; }
  constexpr double ns() const { return static_cast<double>(ps_) / 1000.0; }

  constexpr Nanos operator+(Nanos o) const { return Nanos(ps_ + o.ps_); }
  constexpr Nanos operator-(Nanos o) const { return Nanos(ps_ - o.ps_); }
  constexpr Nanos operator*(std::int64_t k) const { return Nanos(ps_ * k); }
  constexpr Nanos& operator+=(Nanos o) {
    ps_ += o.ps_;
    return *this;
  }
  constexpr Nanos& operator-=(Nanos o) {
    ps_ -= o.ps_;
    return *this;
  }
  constexpr auto operator<=>(const Nanos&) const = default;

  /// Exact decimal rendering, e.g. "13.500".
  std::string str() const;

 private:
  constexpr explicit Nanos(std::int64_t ps) : ps_(ps) {}
  std::int64_t ps_ = 0;
};

constexpr Nanos max(Nanos a, Nanos b) { return a < b ? b : a; }
constexpr Nanos min(Nanos a, Nanos b) { return a < b ? a : b; }

/// Parses a decimal nanosecond literal ("13.5", "9", "8.250") exactly.
Nanos parse_nanos(const std::string& text);

/// Emulated clock cycles of some domain.
using Cycles = std::uint64_t;

/// Smallest cycle count at `hz` covering `t` (ceil). Never lets emulated
/// completion precede physical completion.
Cycles ns_to_cycles_ceil(Nanos t, std::uint64_t hz);

/// Start time of `cycle` at `hz` in device time (floor to ps).
Nanos cycles_to_ns(Cycles cycle, std::uint64_t hz);

}  // namespace edsim
