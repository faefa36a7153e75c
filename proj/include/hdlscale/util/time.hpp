#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <string>
#include <string_view>

#include "hdlscale/core/error.hpp"

namespace hdlscale {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

inline Timestamp now_utc() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

// 2024-05-01T12:34:56.789Z
inline std::string format_timestamp(Timestamp ts) {
  auto ms = ts.time_since_epoch().count();
  std::time_t secs = static_cast<std::time_t>(ms / 1000);
  int frac = static_cast<int>(ms % 1000);
  if (frac < 0) {
    frac += 1000;
    secs -= 1;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
  return buf;
}

inline Timestamp parse_timestamp(std::string_view text) {
  std::tm tm{};
  int frac = 0;
  std::string s(text);
  int n = std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ", &tm.tm_year, &tm.tm_mon,
                      &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &frac);
  if (n < 6) throw Error(Errc::Io, "bad timestamp '" + s + "'");
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  std::time_t secs = timegm(&tm);
  return Timestamp(std::chrono::milliseconds(static_cast<long long>(secs) * 1000 + frac));
}

}  // namespace hdlscale
