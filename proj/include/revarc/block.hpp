#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "revarc/json.hpp"

namespace revarc {

// One revision author. Dumps record either a registered user (username+id)
// or a bare IP; both empty means the contributor was suppressed.
struct Contributor {
  std::optional<std::string> username;
  std::optional<std::string> id;
  std::optional<std::string> ip;
  Json extra = Json::object();  // unknown keys, preserved verbatim

  bool operator==(const Contributor&) const = default;
};

struct TextPayload {
  std::optional<std::string> bytes;  // "@bytes" attribute from the dump, verbatim
  std::string text;                  // "#text", may be empty
  bool deleted = false;              // <text deleted="deleted"/>
  Json extra = Json::object();

  bool operator==(const TextPayload&) const = default;
};

// The atomic storage unit: one revision of one article, serialized as a
// single JSONL line with a fixed key order.
struct Block {
  std::string article_id;
  std::string revision_id;
  std::string timestamp;  // ISO-8601 UTC, verbatim from the dump
  Contributor contributor;
  std::optional<std::string> comment;
  std::optional<std::string> format;
  TextPayload text;
  std::optional<std::string> sha1;
  Json extra = Json::object();

  bool operator==(const Block&) const = default;
};

struct Violation {
  std::string field;
  std::string rule;

  bool operator==(const Violation&) const = default;
};

class BlockParseError : public std::runtime_error {
 public:
  BlockParseError(const std::string& msg, std::size_t byte_offset)
      : std::runtime_error(msg), byte_offset_(byte_offset) {}
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

class BlockSchemaError : public std::runtime_error {
 public:
  explicit BlockSchemaError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

// One UTF-8 JSON line terminated by a single LF. Keys are emitted in schema
// order (article_id, revision_id, timestamp, contributor, comment, format,
// text, sha1); absent optional fields omit their keys entirely.
std::string serialize_block(const Block& block);

Json block_to_json(const Block& block);

// Inverse of serialize_block. Unknown keys land in the extra maps. Throws
// BlockParseError (malformed JSON, with byte offset) or BlockSchemaError
// (missing/mis-typed schema fields, all offenders listed).
Block parse_block_line(std::string_view line);

// Total function: empty result iff all invariants hold.
std::vector<Violation> validate_block(const Block& block);

}  // namespace revarc
