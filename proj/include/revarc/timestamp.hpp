#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace revarc {

// Parses an ISO-8601 UTC instant ("2021-03-04T05:06:07Z", optionally with a
// fractional-second part, which is ignored). Returns seconds since the Unix
// epoch, or nullopt if the string is not a valid instant.
std::optional<std::int64_t> parse_utc_timestamp(std::string_view s);

// Inverse of parse_utc_timestamp for whole seconds: "YYYY-MM-DDTHH:MM:SSZ".
std::string format_utc_timestamp(std::int64_t epoch_seconds);

// Current wall-clock time in the format above.
std::string now_utc_timestamp();

}  // namespace revarc
