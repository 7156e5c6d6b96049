#ifndef POOLID_TIMEUTIL_HPP
#define POOLID_TIMEUTIL_HPP

#include <cstdint>
#include <string>

namespace poolid {

// Unix time in seconds, always UTC. No time zones, no leap seconds.
using UnixTime = std::int64_t;

// Parses "YYYY-MM-DDTHH:MM:SSZ" (trailing Z optional). Throws DataError on
// malformed input.
UnixTime parse_iso8601(const std::string& s);

// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_iso8601(UnixTime t);

// Days since 1970-01-01 for a civil date (proleptic Gregorian).
std::int64_t days_from_civil(int y, int m, int d);
void civil_from_days(std::int64_t z, int& y, int& m, int& d);

// Seconds since midnight UTC.
inline int seconds_of_day(UnixTime t) {
  std::int64_t s = t % 86400;
  if (s < 0) s += 86400;
  return static_cast<int>(s);
}

// Shortest decimal representation that round-trips a double, for
// deterministic text output.
std::string format_double(double v);

}  // namespace poolid

#endif
