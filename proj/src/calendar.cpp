#include "transtarec/calendar.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace transtarec {

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

// Zone suffix: "Z", "+HH:MM", "-HH:MM", "+HHMM", "+HH". Empty means UTC.
bool parse_zone(std::string_view s, int& offset_minutes) {
  offset_minutes = 0;
  if (s.empty()) return true;
  if (s == "Z" || s == "z") return true;
  if (s[0] != '+' && s[0] != '-') return false;
  const int sign = s[0] == '-' ? -1 : 1;
  s.remove_prefix(1);
  int hh = 0, mm = 0;
  if (s.size() == 2) {
    if (!parse_int(s, hh)) return false;
  } else if (s.size() == 4) {
    if (!parse_int(s.substr(0, 2), hh) || !parse_int(s.substr(2, 2), mm)) return false;
  } else if (s.size() == 5 && s[2] == ':') {
    if (!parse_int(s.substr(0, 2), hh) || !parse_int(s.substr(3, 2), mm)) return false;
  } else {
    return false;
  }
  if (hh > 23 || mm > 59) return false;
  offset_minutes = sign * (hh * 60 + mm);
  return true;
}

}  // namespace

std::optional<std::int64_t> civil_to_epoch(const CivilTime& c, int tz_offset_minutes) {
  using namespace std::chrono;
  if (c.month < 1 || c.month > 12 || c.day < 1 || c.day > 31) return std::nullopt;
  if (c.hour < 0 || c.hour > 23 || c.minute < 0 || c.minute > 59 || c.second < 0 ||
      c.second > 60) {
    return std::nullopt;
  }
  const year_month_day ymd{year{c.year}, month{static_cast<unsigned>(c.month)},
                           day{static_cast<unsigned>(c.day)}};
  if (!ymd.ok()) return std::nullopt;
  const std::int64_t days = sys_days{ymd}.time_since_epoch().count();
  const std::int64_t local = days * kSecondsPerDay + c.hour * 3600 + c.minute * 60 + c.second;
  return local - std::int64_t{60} * tz_offset_minutes;
}

TimeKey decompose_time(std::int64_t utc_seconds, int tz_offset_minutes) {
  using namespace std::chrono;
  const std::int64_t local = utc_seconds + std::int64_t{60} * tz_offset_minutes;
  std::int64_t day = local / kSecondsPerDay;
  if (local % kSecondsPerDay < 0) --day;  // floor for pre-epoch instants
  const int second_of_day = static_cast<int>(local - day * kSecondsPerDay);

  const sys_days date{days{day}};
  const year_month_day ymd{date};
  const weekday wd{date};
  TimeKey key;
  key.month = static_cast<int>(unsigned{ymd.month()});
  key.weekday = static_cast<int>(wd.iso_encoding()) - 1;  // ISO: Mon=1 .. Sun=7
  key.hour = second_of_day / 3600;
  return key;
}

std::optional<ParsedInstant> parse_iso8601(std::string_view text) {
  // Fixed prefix "YYYY-MM-DDTHH:MM:SS" is 19 chars; suffix is the zone.
  if (text.size() < 19) return std::nullopt;
  if (text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':') {
    return std::nullopt;
  }
  CivilTime c;
  if (!parse_int(text.substr(0, 4), c.year) || !parse_int(text.substr(5, 2), c.month) ||
      !parse_int(text.substr(8, 2), c.day) || !parse_int(text.substr(11, 2), c.hour) ||
      !parse_int(text.substr(14, 2), c.minute) || !parse_int(text.substr(17, 2), c.second)) {
    return std::nullopt;
  }
  int offset = 0;
  if (!parse_zone(text.substr(19), offset)) return std::nullopt;
  const auto utc = civil_to_epoch(c, offset);
  if (!utc) return std::nullopt;
  return ParsedInstant{*utc, offset};
}

std::string format_iso8601(std::int64_t utc_seconds, int tz_offset_minutes) {
  using namespace std::chrono;
  const std::int64_t local = utc_seconds + std::int64_t{60} * tz_offset_minutes;
  std::int64_t day = local / kSecondsPerDay;
  if (local % kSecondsPerDay < 0) --day;
  const int sod = static_cast<int>(local - day * kSecondsPerDay);
  const year_month_day ymd{sys_days{days{day}}};

  char buf[64];
  const int y = static_cast<int>(ymd.year());
  const unsigned m = unsigned{ymd.month()};
  const unsigned d = unsigned{ymd.day()};
  if (tz_offset_minutes == 0) {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", y, m, d, sod / 3600,
                  (sod / 60) % 60, sod % 60);
  } else {
    const char sign = tz_offset_minutes < 0 ? '-' : '+';
    const int abs_off = tz_offset_minutes < 0 ? -tz_offset_minutes : tz_offset_minutes;
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d%c%02d:%02d", y, m, d,
                  sod / 3600, (sod / 60) % 60, sod % 60, sign, abs_off / 60, abs_off % 60);
  }
  return buf;
}

std::optional<std::int64_t> parse_checkin_time(std::string_view text) {
  // "Www Mmm DD HH:MM:SS +ZZZZ YYYY", fixed English month names.
  static constexpr std::string_view kMonthNames[12] = {
      "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

  std::string_view parts[6];
  int n = 0;
  std::size_t pos = 0;
  while (pos < text.size() && n < 6) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    std::size_t end = pos;
    while (end < text.size() && text[end] != ' ') ++end;
    if (end > pos) parts[n++] = text.substr(pos, end - pos);
    pos = end;
  }
  while (pos < text.size() && text[pos] == ' ') ++pos;
  if (n != 6 || pos != text.size()) return std::nullopt;

  CivilTime c;
  c.month = 0;
  for (int i = 0; i < 12; ++i) {
    if (parts[1] == kMonthNames[i]) {
      c.month = i + 1;
      break;
    }
  }
  if (c.month == 0) return std::nullopt;
  const std::string_view hms = parts[3];
  if (hms.size() != 8 || hms[2] != ':' || hms[5] != ':') return std::nullopt;
  if (!parse_int(parts[2], c.day) || !parse_int(hms.substr(0, 2), c.hour) ||
      !parse_int(hms.substr(3, 2), c.minute) || !parse_int(hms.substr(6, 2), c.second) ||
      !parse_int(parts[5], c.year)) {
    return std::nullopt;
  }
  int zone = 0;
  if (!parse_zone(parts[4], zone)) return std::nullopt;
  return civil_to_epoch(c, zone);
}

}  // namespace transtarec
