#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "revarc/config.hpp"
#include "revarc/json.hpp"

namespace revarc {

struct WorkItem {
  std::filesystem::path path;
  std::uint64_t size_bytes = 0;
};

// Lists candidate dump files (by extension: .xml, .bz2, .gz) with their
// sizes, ordered largest-first. File contents are not touched.
std::vector<WorkItem> preload_dumps(const std::filesystem::path& input_dir);

// Explicit file list; every path must exist.
std::vector<WorkItem> preload_dumps(const std::vector<std::filesystem::path>& files);

struct BuildFileFailure {
  std::string path;
  std::string error;
  int attempts = 0;
};

struct XmlErrorRecord {
  std::string file;
  std::uint64_t byte_offset = 0;
  std::string article_id;
  std::string message;
};

struct WorkerSummary {
  int worker = 0;
  std::uint64_t files = 0;
  std::uint64_t articles = 0;
  std::uint64_t revisions = 0;
};

struct BuildReport {
  std::uint64_t files_processed = 0;
  std::vector<BuildFileFailure> files_failed;
  std::uint64_t articles_written = 0;
  std::uint64_t revisions_written = 0;
  std::uint64_t warehouses_written = 0;
  std::uint64_t bytes_in_compressed = 0;   // input file bytes consumed
  std::uint64_t bytes_out_compressed = 0;  // warehouse bytes produced
  double wall_time_seconds = 0;
  std::vector<WorkerSummary> workers;
  // Recovered ingest errors (skipped pages / dropped revisions), capped.
  std::vector<XmlErrorRecord> xml_errors;
  std::uint64_t xml_error_count = 0;

  Json to_json() const;
};

struct BuildOptions {
  // Namespace filter forwarded to the ingest reader; nullopt keeps all.
  std::optional<std::set<std::int64_t>> keep_namespaces = std::set<std::int64_t>{0};
  bool overwrite = false;
  // Cap on the summed size of in-flight input files; smaller files are
  // assigned out of order (or a worker waits) when the cap would be exceeded.
  std::optional<std::uint64_t> max_inflight_input_bytes;
  std::size_t heartbeat_every = 500;  // articles per worker between log lines
};

// Runs the building process: every file consumed by exactly one worker, each
// worker streaming events through its private warehouse sequence. The block
// multiset and per-article order are independent of num_workers.
BuildReport build(const std::vector<WorkItem>& worklist, const BuildConfig& config,
                  const BuildOptions& options = {});

// Largest-first pick honoring the in-flight cap; exposed for tests.
class Scheduler {
 public:
  Scheduler(std::vector<WorkItem> items, std::optional<std::uint64_t> max_inflight_bytes);
  ~Scheduler();

  // Blocks while nothing fits under the cap but work is still in flight.
  // Returns nullopt when the worklist is exhausted.
  std::optional<WorkItem> acquire();
  void release(const WorkItem& item);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace revarc
