#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "revarc/json.hpp"

namespace revarc {

// Per-article sidecar record: identity, revision counters, and the byte
// coordinates of the article's compressed frame inside its warehouse file.
struct SegmentMetadata {
  std::string warehouse;  // file name (not path) of the warehouse holding the frame
  std::string article_id;
  std::string title;
  std::optional<std::int64_t> ns;
  std::uint64_t byte_start = 0;
  std::uint64_t byte_length = 0;
  std::uint64_t uncompressed_bytes = 0;
  std::uint64_t num_revisions = 0;
  std::optional<std::string> first_timestamp;
  std::optional<std::string> last_timestamp;
  Json custom = Json::object();  // profile-attached article-level data

  bool operator==(const SegmentMetadata&) const = default;
};

Json metadata_to_json(const SegmentMetadata& m);

// One uncompressed JSONL line, LF-terminated, fixed key order.
std::string serialize_metadata_line(const SegmentMetadata& m);

// Throws ValidationError on malformed lines.
SegmentMetadata parse_metadata_line(std::string_view line);

}  // namespace revarc
