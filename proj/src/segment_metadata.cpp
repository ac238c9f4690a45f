#include "revarc/segment_metadata.hpp"

#include "revarc/errors.hpp"

namespace revarc {

Json metadata_to_json(const SegmentMetadata& m) {
  Json j = Json::object();
  j["warehouse"] = m.warehouse;
  j["article_id"] = m.article_id;
  j["title"] = m.title;
  if (m.ns) j["namespace"] = *m.ns;
  j["byte_start"] = m.byte_start;
  j["byte_length"] = m.byte_length;
  j["uncompressed_bytes"] = m.uncompressed_bytes;
  j["num_revisions"] = m.num_revisions;
  if (m.first_timestamp) j["first_timestamp"] = *m.first_timestamp;
  if (m.last_timestamp) j["last_timestamp"] = *m.last_timestamp;
  if (!m.custom.empty()) j["custom"] = m.custom;
  return j;
}

std::string serialize_metadata_line(const SegmentMetadata& m) {
  std::string line = metadata_to_json(m).dump();
  line.push_back('\n');
  return line;
}

SegmentMetadata parse_metadata_line(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("unparseable metadata line: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("metadata line is not a JSON object");

  SegmentMetadata m;
  try {
    m.warehouse = j.at("warehouse").get<std::string>();
    m.article_id = j.at("article_id").get<std::string>();
    m.title = j.at("title").get<std::string>();
    if (j.contains("namespace")) m.ns = j["namespace"].get<std::int64_t>();
    m.byte_start = j.at("byte_start").get<std::uint64_t>();
    m.byte_length = j.at("byte_length").get<std::uint64_t>();
    m.uncompressed_bytes = j.at("uncompressed_bytes").get<std::uint64_t>();
    m.num_revisions = j.at("num_revisions").get<std::uint64_t>();
    if (j.contains("first_timestamp"))
      m.first_timestamp = j["first_timestamp"].get<std::string>();
    if (j.contains("last_timestamp")) m.last_timestamp = j["last_timestamp"].get<std::string>();
    if (j.contains("custom")) {
      if (!j["custom"].is_object()) throw ValidationError("metadata custom must be an object");
      m.custom = j["custom"];
    }
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("invalid metadata line: ") + e.what());
  }
  return m;
}

}  // namespace revarc
