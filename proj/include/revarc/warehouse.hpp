#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "revarc/config.hpp"
#include "revarc/errors.hpp"
#include "revarc/json.hpp"
#include "revarc/segment_metadata.hpp"

namespace revarc {

class StoreUsageError : public UsageError {
 public:
  using UsageError::UsageError;
};

// I/O failure while writing warehouse files (treated as fatal by callers:
// a build cannot make progress once the disk misbehaves).
class StoreIoError : public FatalError {
 public:
  using FatalError::FatalError;
};

class OversizeLineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A frame failed its integrity check or its coordinates are out of range.
class CorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DatasetError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Writes one warehouse sequence: concatenated per-segment gzip members plus
// an uncompressed metadata sidecar. Exclusively owned by one worker.
//
// File naming: block_{worker:03}_{seq:05}.jsonl.gz paired with
// block_{worker:03}_{seq:05}.metadata.jsonl. A warehouse is sealed at the
// first end_segment that pushes its compressed size past the limit; segments
// never split across warehouses.
class WarehouseWriter {
 public:
  WarehouseWriter(std::filesystem::path dataset_dir, int worker_tag, const BuildConfig& config,
                  int start_sequence = 0);
  ~WarehouseWriter();

  WarehouseWriter(const WarehouseWriter&) = delete;
  WarehouseWriter& operator=(const WarehouseWriter&) = delete;

  void begin_segment(std::string article_id, std::string title, std::optional<std::int64_t> ns);

  // line must be one LF-terminated JSONL line. The optional timestamp feeds
  // the segment's first/last trackers.
  void append_line(std::string_view line, std::optional<std::string_view> timestamp);

  // Finalizes the frame, appends the sidecar record, and rotates the
  // warehouse when the size limit has been reached.
  SegmentMetadata end_segment(Json custom = Json::object());

  // Discards the open frame; the file is truncated back to the last
  // finalized segment.
  void abort_segment();

  // Seals the current warehouse so the next segment opens a fresh file.
  // No-op when the current file holds no finalized segments.
  void roll();

  // Seals and closes everything; empty trailing file pairs are removed.
  void close();

  bool segment_open() const;
  int next_sequence() const;
  std::uint64_t bytes_written_total() const;   // finalized compressed bytes, all files
  std::uint64_t warehouses_written() const;    // non-empty file pairs created
  // Warehouse file names created so far (for rollback on failure).
  const std::vector<std::string>& files_created() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Random access to one segment: decodes exactly byte_length bytes starting
// at byte_start and yields the frame's lines in order. Memory stays bounded
// by one line plus decoder buffers.
class SegmentReader {
 public:
  SegmentReader(const std::filesystem::path& warehouse_path, std::uint64_t byte_start,
                std::uint64_t byte_length);
  ~SegmentReader();

  SegmentReader(const SegmentReader&) = delete;
  SegmentReader& operator=(const SegmentReader&) = delete;

  // False at clean end of frame. Throws CorruptionError on a failed
  // integrity check, truncated frame, or trailing garbage.
  bool next_line(std::string& out);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Sequential scan of a whole warehouse file without using the sidecar:
// decodes every gzip member in order, tracking member boundaries.
class WarehouseScanner {
 public:
  explicit WarehouseScanner(const std::filesystem::path& warehouse_path);
  ~WarehouseScanner();

  WarehouseScanner(const WarehouseScanner&) = delete;
  WarehouseScanner& operator=(const WarehouseScanner&) = delete;

  // Yields the next line and the index of the member it came from.
  bool next_line(std::string& out, std::size_t& member_index);

  // (byte_start, byte_length) of each member seen so far; complete once
  // next_line has returned false.
  const std::vector<std::pair<std::uint64_t, std::uint64_t>>& member_spans() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct WarehouseGroup {
  std::string warehouse;  // file name
  std::filesystem::path warehouse_path;
  std::filesystem::path sidecar_path;
  std::uint64_t file_size = 0;
  std::vector<SegmentMetadata> segments;
};

struct DatasetMetadata {
  std::vector<WarehouseGroup> warehouses;
  std::vector<std::string> violations;  // contiguity / consistency findings

  std::size_t total_segments() const;
  std::uint64_t total_revisions() const;
};

// Reads every sidecar in the dataset directory and verifies the frame
// contiguity invariant per warehouse. Throws DatasetError when the directory
// holds no warehouses or a sidecar is missing/unparseable; softer invariant
// violations are reported in the result.
DatasetMetadata read_metadata(const std::filesystem::path& dataset_dir);

struct StructureReport {
  std::uint64_t warehouse_count = 0;
  std::uint64_t segment_count = 0;
  std::uint64_t total_revisions = 0;
  std::uint64_t compressed_bytes = 0;
  std::uint64_t uncompressed_bytes = 0;
  std::size_t sampled_blocks = 0;
  std::set<std::string> key_paths;  // union over the sampled blocks
  std::vector<std::string> violations;

  Json to_json() const;
};

// Dataset structure preview: counters from the sidecars plus the union of
// JSON key paths over the first sample_n blocks (decodes only what it needs).
StructureReport inspect_structure(const std::filesystem::path& dataset_dir,
                                  std::size_t sample_n);

// Collects key paths of one JSON value into out ("text.#text", "changes[].type", ...).
void collect_key_paths(const Json& value, const std::string& prefix,
                       std::set<std::string>& out);

inline constexpr const char* kManifestName = "manifest.json";

void write_manifest(const std::filesystem::path& dataset_dir, const Json& manifest);
std::optional<Json> read_manifest(const std::filesystem::path& dataset_dir);

}  // namespace revarc
