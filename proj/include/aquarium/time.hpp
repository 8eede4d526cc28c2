#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace aquarium {

using Millis = std::chrono::milliseconds;
using Timestamp = std::chrono::sys_time<Millis>;

/// Scenario time zero maps to this wall-clock instant unless configured otherwise.
inline constexpr Timestamp kDefaultEpoch =
    std::chrono::sys_days{std::chrono::year{2025} / 1 / 1};

inline constexpr Millis seconds_to_millis(double seconds) {
  return Millis{static_cast<std::int64_t>(seconds * 1000.0 + (seconds >= 0 ? 0.5 : -0.5))};
}

inline constexpr double to_seconds(Millis d) { return static_cast<double>(d.count()) / 1000.0; }

inline double seconds_between(Timestamp from, Timestamp to) { return to_seconds(to - from); }

inline Timestamp at_sim_time(Timestamp epoch, double sim_seconds) {
  return epoch + seconds_to_millis(sim_seconds);
}

/// Formats as `YYYY-MM-DDTHH:MM:SS.mmmZ`.
inline std::string to_iso8601(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const auto ms_of_day = (t - day).count();
  const auto h = ms_of_day / 3'600'000;
  const auto m = (ms_of_day / 60'000) % 60;
  const auto s = (ms_of_day / 1000) % 60;
  const auto ms = ms_of_day % 1000;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u" "T%02lld:%02lld:%02lld.%03lldZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<long long>(h),
                static_cast<long long>(m), static_cast<long long>(s), static_cast<long long>(ms));
  return buf;
}

namespace detail {

inline int parse_digits(std::string_view text, std::size_t pos, std::size_t count) {
  if (pos + count > text.size()) throw std::invalid_argument("timestamp too short");
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + count, value);
  if (ec != std::errc{} || ptr != text.data() + pos + count)
    throw std::invalid_argument("bad digits in timestamp: " + std::string(text));
  return value;
}

inline void expect_char(std::string_view text, std::size_t pos, char c) {
  if (pos >= text.size() || text[pos] != c)
    throw std::invalid_argument("malformed timestamp: " + std::string(text));
}

}  // namespace detail

/// Accepts `YYYY-MM-DDTHH:MM:SS[.fff]Z`. Fractions beyond milliseconds are truncated.
inline Timestamp parse_iso8601(std::string_view text) {
  using namespace std::chrono;
  const int y = detail::parse_digits(text, 0, 4);
  detail::expect_char(text, 4, '-');
  const int mo = detail::parse_digits(text, 5, 2);
  detail::expect_char(text, 7, '-');
  const int d = detail::parse_digits(text, 8, 2);
  detail::expect_char(text, 10, 'T');
  const int hh = detail::parse_digits(text, 11, 2);
  detail::expect_char(text, 13, ':');
  const int mm = detail::parse_digits(text, 14, 2);
  detail::expect_char(text, 16, ':');
  const int ss = detail::parse_digits(text, 17, 2);
  std::size_t pos = 19;
  int ms = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    int scale = 100;
    std::size_t digits = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (digits < 3) ms += (text[pos] - '0') * scale;
      scale /= 10;
      ++digits;
      ++pos;
    }
    if (digits == 0) throw std::invalid_argument("empty fraction in timestamp");
  }
  detail::expect_char(text, pos, 'Z');
  if (pos + 1 != text.size()) throw std::invalid_argument("trailing characters in timestamp");

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60)
    throw std::invalid_argument("timestamp out of range: " + std::string(text));
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} + Millis{ms};
}

/// Parses a duration such as `26s`, `10m`, `6h`, `2d`, a compound like
/// `23h0m37s`, or a bare number of seconds.
inline double parse_duration_seconds(std::string_view token) {
  if (token.empty()) throw std::invalid_argument("empty duration");
  double total = 0.0;
  bool bare = true;
  while (!token.empty()) {
    double value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || !std::isfinite(value))
      throw std::invalid_argument("bad duration: " + std::string(token));
    token.remove_prefix(static_cast<std::size_t>(ptr - token.data()));
    if (token.empty()) {
      if (!bare) throw std::invalid_argument("duration component without unit");
      return value;
    }
    double scale = 0.0;
    switch (token.front()) {
      case 's': scale = 1.0; break;
      case 'm': scale = 60.0; break;
      case 'h': scale = 3600.0; break;
      case 'd': scale = 86400.0; break;
      default: throw std::invalid_argument("bad duration unit: " + std::string(token));
    }
    token.remove_prefix(1);
    total += value * scale;
    bare = false;
  }
  return total;
}

}  // namespace aquarium
