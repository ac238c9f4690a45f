#include "revarc/block.hpp"

#include <sstream>

#include "revarc/timestamp.hpp"

namespace revarc {

namespace {

bool is_decimal(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

bool is_positive_decimal(std::string_view s) {
  if (!is_decimal(s)) return false;
  for (char c : s)
    if (c != '0') return true;
  return false;
}

std::string join_violations(const std::vector<Violation>& vs) {
  std::ostringstream os;
  os << "block schema violation:";
  for (const auto& v : vs) os << " [" << v.field << ": " << v.rule << "]";
  return os.str();
}

// Pulls a known optional string field out of j, recording a violation on a
// type mismatch.
void take_string(Json& j, const char* key, std::optional<std::string>& out,
                 std::vector<Violation>& violations) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_string()) {
    violations.push_back({key, "must be a string"});
  } else {
    out = it->get<std::string>();
  }
  j.erase(it);
}

}  // namespace

BlockSchemaError::BlockSchemaError(std::vector<Violation> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

Json block_to_json(const Block& b) {
  Json j = Json::object();
  j["article_id"] = b.article_id;
  j["revision_id"] = b.revision_id;
  j["timestamp"] = b.timestamp;

  Json c = Json::object();
  if (b.contributor.username) c["username"] = *b.contributor.username;
  if (b.contributor.id) c["id"] = *b.contributor.id;
  if (b.contributor.ip) c["ip"] = *b.contributor.ip;
  for (const auto& [k, v] : b.contributor.extra.items()) c[k] = v;
  j["contributor"] = std::move(c);

  if (b.comment) j["comment"] = *b.comment;
  if (b.format) j["format"] = *b.format;

  Json t = Json::object();
  if (b.text.bytes) t["@bytes"] = *b.text.bytes;
  t["#text"] = b.text.text;
  if (b.text.deleted) t["deleted"] = true;
  for (const auto& [k, v] : b.text.extra.items()) t[k] = v;
  j["text"] = std::move(t);

  if (b.sha1) j["sha1"] = *b.sha1;
  for (const auto& [k, v] : b.extra.items()) j[k] = v;
  return j;
}

std::string serialize_block(const Block& b) {
  std::string line = block_to_json(b).dump();
  line.push_back('\n');
  return line;
}

Block parse_block_line(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw BlockParseError(e.what(), e.byte);
  }
  if (!j.is_object())
    throw BlockSchemaError(std::vector<Violation>{{"$", "line is not a JSON object"}});

  Block b;
  std::vector<Violation> violations;

  auto require_string = [&](const char* key, std::string& out) {
    auto it = j.find(key);
    if (it == j.end()) {
      violations.push_back({key, "missing"});
      return;
    }
    if (!it->is_string()) {
      violations.push_back({key, "must be a string"});
    } else {
      out = it->get<std::string>();
    }
    j.erase(it);
  };

  require_string("article_id", b.article_id);
  require_string("revision_id", b.revision_id);
  require_string("timestamp", b.timestamp);

  if (auto it = j.find("contributor"); it != j.end()) {
    if (!it->is_object()) {
      violations.push_back({"contributor", "must be an object"});
    } else {
      Json c = std::move(*it);
      take_string(c, "username", b.contributor.username, violations);
      take_string(c, "id", b.contributor.id, violations);
      take_string(c, "ip", b.contributor.ip, violations);
      b.contributor.extra = std::move(c);
    }
    j.erase(it);
  }

  take_string(j, "comment", b.comment, violations);
  take_string(j, "format", b.format, violations);

  if (auto it = j.find("text"); it != j.end()) {
    if (!it->is_object()) {
      violations.push_back({"text", "must be an object"});
    } else {
      Json t = std::move(*it);
      take_string(t, "@bytes", b.text.bytes, violations);
      if (auto ti = t.find("#text"); ti != t.end()) {
        if (!ti->is_string()) {
          violations.push_back({"text.#text", "must be a string"});
        } else {
          b.text.text = ti->get<std::string>();
        }
        t.erase(ti);
      } else {
        violations.push_back({"text.#text", "missing"});
      }
      if (auto di = t.find("deleted"); di != t.end()) {
        if (!di->is_boolean()) {
          violations.push_back({"text.deleted", "must be a boolean"});
        } else {
          b.text.deleted = di->get<bool>();
        }
        t.erase(di);
      }
      b.text.extra = std::move(t);
    }
    j.erase(it);
  } else {
    violations.push_back({"text", "missing"});
  }

  take_string(j, "sha1", b.sha1, violations);

  if (!violations.empty()) throw BlockSchemaError(std::move(violations));

  b.extra = std::move(j);
  return b;
}

std::vector<Violation> validate_block(const Block& b) {
  std::vector<Violation> out;
  if (!is_positive_decimal(b.article_id))
    out.push_back({"article_id", "must parse as a positive integer"});
  if (!is_positive_decimal(b.revision_id))
    out.push_back({"revision_id", "must parse as a positive integer"});
  if (!parse_utc_timestamp(b.timestamp))
    out.push_back({"timestamp", "not an ISO-8601 UTC instant"});

  const bool registered = b.contributor.username.has_value() || b.contributor.id.has_value();
  const bool complete_registered =
      b.contributor.username.has_value() && b.contributor.id.has_value();
  const bool anonymous = b.contributor.ip.has_value();
  if (registered && anonymous) {
    out.push_back({"contributor", "ambiguous identity: both registered user and ip present"});
  } else if (registered && !complete_registered) {
    out.push_back({"contributor", "incomplete registered identity: need both username and id"});
  } else if (!registered && !anonymous) {
    out.push_back({"contributor", "no identity: neither registered user nor ip present"});
  }

  if (b.text.bytes && !is_decimal(*b.text.bytes))
    out.push_back({"text.@bytes", "must parse as a non-negative integer"});
  return out;
}

}  // namespace revarc
