#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "revarc/block.hpp"
#include "revarc/errors.hpp"

namespace revarc {

enum class DumpCodec { PlainXml, Bz2Stream, GzipStream };

struct DumpSource {
  std::filesystem::path path;
  DumpCodec codec = DumpCodec::PlainXml;
  // Set when extension and magic bytes disagree (magic wins) or the
  // extension was unrecognized.
  std::optional<std::string> codec_warning;
};

// Sniffs codec from the file extension and magic bytes. Throws UsageError if
// the file is unreadable or neither signal identifies a supported codec.
DumpSource detect_dump_source(const std::filesystem::path& path);

struct ArticleStart {
  std::string article_id;
  std::string title;
  std::optional<std::int64_t> ns;
};
struct RevisionEvent {
  Block block;
};
struct ArticleEnd {
  std::string article_id;
};
struct DumpEnd {};

// Well-bracketed: ArticleStart ... Revision* ... ArticleEnd per page, and a
// single trailing DumpEnd, on every input (including after skip-article
// recovery).
using DumpEvent = std::variant<ArticleStart, RevisionEvent, ArticleEnd, DumpEnd>;

struct DumpError {
  std::uint64_t byte_offset = 0;  // offset in the decompressed XML stream
  std::string article_id;         // enclosing page when known
  std::string message;
};

class MalformedXmlError : public std::runtime_error {
 public:
  MalformedXmlError(const DumpError& err)
      : std::runtime_error("malformed XML at byte " + std::to_string(err.byte_offset) +
                           (err.article_id.empty() ? "" : " (article " + err.article_id + ")") +
                           ": " + err.message),
        err_(err) {}
  const DumpError& detail() const { return err_; }

 private:
  DumpError err_;
};

struct DumpReaderOptions {
  // Pages whose namespace is not in the set are skipped entirely; a missing
  // <ns> element counts as namespace 0. nullopt keeps every namespace.
  std::optional<std::set<std::int64_t>> keep_namespaces = std::set<std::int64_t>{0};
  // Default is skip-article recovery: malformed XML drops the enclosing page,
  // records a DumpError, and resumes at the next <page>. When false, next()
  // throws MalformedXmlError instead.
  bool skip_malformed = true;
};

// Pull-based streaming parser over one (possibly compressed) revision-history
// XML dump. Memory stays bounded by one revision plus fixed buffers; no
// decompressed copy ever touches disk. Single-consumer; not shareable.
class DumpReader {
 public:
  explicit DumpReader(DumpSource source, DumpReaderOptions options = {});
  ~DumpReader();

  DumpReader(const DumpReader&) = delete;
  DumpReader& operator=(const DumpReader&) = delete;

  // Returns events in document order. After DumpEnd has been returned,
  // further calls are a usage error.
  DumpEvent next();

  // Errors recovered from so far (skipped pages, dropped revisions).
  const std::vector<DumpError>& errors() const;

  const DumpSource& source() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace revarc
