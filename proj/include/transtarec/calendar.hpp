// Civil-calendar conversions and timestamp string parsing. All instants are
// carried as UTC seconds since the Unix epoch; TimeKeys are computed in the
// record's local time via an explicit minute offset.
#pragma once

#include "transtarec/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace transtarec {

struct CivilTime {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31
  int hour = 0;
  int minute = 0;
  int second = 0;
};

// An instant plus the zone it was written in (minutes east of UTC).
struct ParsedInstant {
  std::int64_t utc_seconds = 0;
  int tz_offset_minutes = 0;
};

// Seconds since epoch for civil fields interpreted in the given zone.
// Returns nullopt for invalid calendar dates (e.g. Feb 30).
std::optional<std::int64_t> civil_to_epoch(const CivilTime& civil, int tz_offset_minutes);

// (month, weekday, hour) of the instant shifted into local time.
TimeKey decompose_time(std::int64_t utc_seconds, int tz_offset_minutes);

// "YYYY-MM-DDTHH:MM:SS" with optional zone suffix Z, +HH:MM, -HH:MM or +HHMM.
// A missing suffix means UTC.
std::optional<ParsedInstant> parse_iso8601(std::string_view text);

// Inverse of parse_iso8601: local civil time plus Z or +HH:MM suffix.
std::string format_iso8601(std::int64_t utc_seconds, int tz_offset_minutes);

// Check-in dump time string, e.g. "Tue Apr 03 18:00:09 +0000 2012".
std::optional<std::int64_t> parse_checkin_time(std::string_view text);

}  // namespace transtarec
