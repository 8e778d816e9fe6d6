#include "edsim/units.hpp"

#include <cctype>
#include <cstdio>
#include <stdexcept>

namespace edsim {

std::string Nanos::str() const {
  const std::int64_t mag = ps_ < 0 ? -ps_ : ps_;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%lld.%03lld", ps_ < 0 ? "-" : "",
                static_cast<long long>(mag / 1000), static_cast<long long>(mag % 1000));
  return buf;
}

Nanos parse_nanos(const std::string& text) {
  std::size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  bool neg = false;
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) neg = text[i++] == '-';
  std::int64_t whole = 0;
  std::int64_t frac = 0;
  int frac_digits = 0;
  bool any = false;
  for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {
    whole = whole * 10 + (text[i] - '0');
    any = true;
  }
  if (i < text.size() && text[i] == '.') {
    ++i;
    for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {
      any = true;
      if (frac_digits < 3) {
        frac = frac * 10 + (text[i] - '0');
        ++frac_digits;
      } else if (text[i] != '0') {
        throw std::invalid_argument("sub-picosecond precision in '" + text + "'");
      }
    }
  }
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  if (!any || i != text.size()) throw std::invalid_argument("not a nanosecond value: '" + text + "'");
  while (frac_digits < 3) {
    frac *= 10;
    ++frac_digits;
  }
  const std::int64_t ps = whole * 1000 + frac;
  return Nanos::from_ps(neg ? -ps : ps);
}

Cycles ns_to_cycles_ceil(Nanos t, std::uint64_t hz) {
  if (t.ps() <= 0) return 0;
  const unsigned __int128 num = static_cast<unsigned __int128>(t.ps()) * hz;
  const unsigned __int128 den = 1'000'000'000'000ULL;
  return static_cast<Cycles>((num + den - 1) / den);
}

Nanos cycles_to_ns(Cycles cycle, std::uint64_t hz) {
  const unsigned __int128 num = static_cast<unsigned __int128>(cycle) * 1'000'000'000'000ULL;
  return Nanos::from_ps(static_cast<std::int64_t>(num / hz));
}

}  // namespace edsim
