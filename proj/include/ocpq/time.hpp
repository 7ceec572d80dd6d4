#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace ocpq {

/// Absolute instant at millisecond resolution (UTC epoch based).
using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;
/// Signed difference of two timestamps.
using Duration = std::chrono::milliseconds;

/// Parses an RFC 3339 date-time ("2016-01-06T14:15:00Z", "2016-01-06T14:15:00.250+01:00").
/// Seconds and the zone designator may be omitted (zone defaults to UTC), and a
/// bare date is read as midnight UTC. Sub-millisecond digits are truncated.
std::optional<Timestamp> parse_rfc3339(std::string_view text);

/// Formats as RFC 3339 UTC; the ".mmm" fraction is only written when non-zero.
std::string format_rfc3339(Timestamp t);

/// Accepts ISO-8601 durations restricted to fixed-length units ("P4W", "P1DT2H",
/// "PT0.5S", "-P1D") and the shorthand form ("4w", "1d12h", "500ms", "-2h").
/// A bare integer is taken as milliseconds. Calendar units (years, months) are
/// rejected because they have no fixed length.
std::optional<Duration> parse_duration(std::string_view text);

/// Shorthand rendering using the largest unit that divides exactly ("4w", "36h", "0s").
std::string format_duration(Duration d);

}  // namespace ocpq
