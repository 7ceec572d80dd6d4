#include "ocpq/time.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>

namespace ocpq {

namespace {

class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}

  bool done() const { return pos_ == s_.size(); }
  char peek() const { return done() ? '\0' : s_[pos_]; }
  void skip() { ++pos_; }

  bool consume(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }

  // Exactly `width` decimal digits.
  std::optional<int> fixed(int width) {
    if (pos_ + width > s_.size()) return std::nullopt;
    int v = 0;
    for (int i = 0; i < width; ++i) {
      char c = s_[pos_ + i];
      if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
      v = v * 10 + (c - '0');
    }
    pos_ += width;
    return v;
  }

  // One or more digits.
  std::optional<std::int64_t> number() {
    if (!std::isdigit(static_cast<unsigned char>(peek()))) return std::nullopt;
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc()) return std::nullopt;
    pos_ = static_cast<std::size_t>(ptr - s_.data());
    return v;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::optional<Timestamp> parse_rfc3339(std::string_view text) {
  using namespace std::chrono;
  Cursor c(text);
  auto y = c.fixed(4);
  if (!y || !c.consume('-')) return std::nullopt;
  auto mo = c.fixed(2);
  if (!mo || !c.consume('-')) return std::nullopt;
  auto d = c.fixed(2);
  if (!d) return std::nullopt;
  year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)}, day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  Timestamp t{sys_days{ymd}};
  if (c.done()) return t;

  if (!(c.consume('T') || c.consume('t') || c.consume(' '))) return std::nullopt;
  auto hh = c.fixed(2);
  if (!hh || !c.consume(':')) return std::nullopt;
  auto mm = c.fixed(2);
  if (!mm || *hh > 23 || *mm > 59) return std::nullopt;
  int ss = 0;
  int ms = 0;
  if (c.consume(':')) {
    auto s = c.fixed(2);
    if (!s || *s > 60) return std::nullopt;
    ss = *s;
    if (c.consume('.') || c.consume(',')) {
      int digits = 0;
      while (std::isdigit(static_cast<unsigned char>(c.peek()))) {
        if (digits < 3) ms = ms * 10 + (c.peek() - '0');
        ++digits;
        c.skip();
      }
      if (digits == 0) return std::nullopt;
      for (int i = digits; i < 3; ++i) ms *= 10;
    }
  }
  t += hours{*hh} + minutes{*mm} + seconds{ss} + milliseconds{ms};

  if (c.done() || c.consume('Z') || c.consume('z')) return c.done() ? std::optional(t) : std::nullopt;
  int sign = 0;
  if (c.consume('+')) sign = 1;
  else if (c.consume('-')) sign = -1;
  else return std::nullopt;
  auto oh = c.fixed(2);
  if (!oh) return std::nullopt;
  c.consume(':');
  auto om = c.fixed(2);
  if (!om || !c.done() || *oh > 23 || *om > 59) return std::nullopt;
  // Local time = UTC + offset.
  t -= sign * (hours{*oh} + minutes{*om});
  return t;
}

std::string format_rfc3339(Timestamp t) {
  using namespace std::chrono;
  auto day_point = floor<days>(t);
  year_month_day ymd{day_point};
  hh_mm_ss<milliseconds> tod{t - day_point};
  std::array<char, 40> buf{};
  int n = std::snprintf(buf.data(), buf.size(), "%04d-%02u-%02uT%02lld:%02lld:%02lld",
                        static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                        static_cast<unsigned>(ymd.day()), static_cast<long long>(tod.hours().count()),
                        static_cast<long long>(tod.minutes().count()),
                        static_cast<long long>(tod.seconds().count()));
  std::string out(buf.data(), static_cast<std::size_t>(n));
  if (auto ms = tod.subseconds().count(); ms != 0) {
    std::snprintf(buf.data(), buf.size(), ".%03lld", static_cast<long long>(ms));
    out += buf.data();
  }
  out += 'Z';
  return out;
}

namespace {

constexpr std::int64_t kSecond = 1000;
constexpr std::int64_t kMinute = 60 * kSecond;
constexpr std::int64_t kHour = 60 * kMinute;
constexpr std::int64_t kDay = 24 * kHour;
constexpr std::int64_t kWeek = 7 * kDay;

std::optional<std::int64_t> parse_iso_duration(Cursor& c) {
  std::int64_t total = 0;
  bool in_time = false;
  bool any = false;
  while (!c.done()) {
    if (!in_time && c.consume('T')) {
      in_time = true;
      continue;
    }
    auto whole = c.number();
    if (!whole) return std::nullopt;
    std::int64_t frac_ms = 0;
    bool has_frac = false;
    if (c.consume('.') || c.consume(',')) {
      has_frac = true;
      int digits = 0;
      while (std::isdigit(static_cast<unsigned char>(c.peek()))) {
        if (digits < 3) frac_ms = frac_ms * 10 + (c.peek() - '0');
        ++digits;
        c.skip();
      }
      if (digits == 0) return std::nullopt;
      for (int i = digits; i < 3; ++i) frac_ms *= 10;
    }
    char unit = static_cast<char>(std::toupper(static_cast<unsigned char>(c.peek())));
    c.skip();
    std::int64_t scale = 0;
    if (!in_time && unit == 'W') scale = kWeek;
    else if (!in_time && unit == 'D') scale = kDay;
    else if (in_time && unit == 'H') scale = kHour;
    else if (in_time && unit == 'M') scale = kMinute;
    else if (in_time && unit == 'S') scale = kSecond;
    else return std::nullopt;
    if (has_frac && unit != 'S') return std::nullopt;
    total += *whole * scale + frac_ms;
    any = true;
  }
  if (!any) return std::nullopt;
  return total;
}

std::optional<std::int64_t> parse_shorthand(Cursor& c) {
  std::int64_t total = 0;
  bool any = false;
  while (!c.done()) {
    auto n = c.number();
    if (!n) return std::nullopt;
    std::int64_t scale = 0;
    switch (std::tolower(static_cast<unsigned char>(c.peek()))) {
      case 'w': scale = kWeek; c.skip(); break;
      case 'd': scale = kDay; c.skip(); break;
      case 'h': scale = kHour; c.skip(); break;
      case 's': scale = kSecond; c.skip(); break;
      case 'm':
        c.skip();
        if (std::tolower(static_cast<unsigned char>(c.peek())) == 's') {
          c.skip();
          scale = 1;
        } else {
          scale = kMinute;
        }
        break;
      case '\0':
        // Unit-less trailing number: milliseconds, only as the sole component.
        if (any) return std::nullopt;
        scale = 1;
        break;
      default: return std::nullopt;
    }
    total += *n * scale;
    any = true;
  }
  if (!any) return std::nullopt;
  return total;
}

}  // namespace

std::optional<Duration> parse_duration(std::string_view text) {
  Cursor c(text);
  std::int64_t sign = 1;
  if (c.consume('-')) sign = -1;
  else c.consume('+');
  std::optional<std::int64_t> v;
  if (c.consume('P') || c.consume('p')) v = parse_iso_duration(c);
  else v = parse_shorthand(c);
  if (!v) return std::nullopt;
  return Duration{sign * *v};
}

std::string format_duration(Duration d) {
  std::int64_t v = d.count();
  if (v == 0) return "0s";
  std::string sign = v < 0 ? "-" : "";
  std::int64_t a = v < 0 ? -v : v;
  struct Unit {
    std::int64_t scale;
    const char* suffix;
  };
  static constexpr Unit units[] = {{kWeek, "w"}, {kDay, "d"}, {kHour, "h"},
                                   {kMinute, "m"}, {kSecond, "s"}, {1, "ms"}};
  for (const auto& u : units) {
    if (a % u.scale == 0) return sign + std::to_string(a / u.scale) + u.suffix;
  }
  return sign + std::to_string(a) + "ms";
}

}  // namespace ocpq
