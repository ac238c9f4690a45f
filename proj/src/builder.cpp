#include "revarc/builder.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <thread>

#include "revarc/block.hpp"
#include "revarc/dump_reader.hpp"
#include "revarc/log.hpp"
#include "revarc/timestamp.hpp"
#include "revarc/warehouse.hpp"

namespace fs = std::filesystem;

namespace revarc {

namespace {

constexpr std::size_t kMaxReportedXmlErrors = 100;
constexpr const char* kIncompleteMarker = "_INCOMPLETE.json";
constexpr const char* kToolVersion = "0.1.0";

bool dump_like(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".xml" || ext == ".bz2" || ext == ".gz";
}

void sort_worklist(std::vector<WorkItem>& items) {
  std::sort(items.begin(), items.end(), [](const WorkItem& a, const WorkItem& b) {
    if (a.size_bytes != b.size_bytes) return a.size_bytes > b.size_bytes;
    return a.path < b.path;
  });
}

}  // namespace

std::vector<WorkItem> preload_dumps(const fs::path& input_dir) {
  if (!fs::exists(input_dir) || !fs::is_directory(input_dir))
    throw ValidationError("input directory not found: " + input_dir.string());
  std::vector<WorkItem> items;
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    if (!entry.is_regular_file()) continue;
    if (!dump_like(entry.path())) continue;
    items.push_back({entry.path(), entry.file_size()});
  }
  if (items.empty())
    throw ValidationError("no dump files (.xml/.bz2/.gz) found in " + input_dir.string());
  sort_worklist(items);
  return items;
}

std::vector<WorkItem> preload_dumps(const std::vector<fs::path>& files) {
  std::vector<WorkItem> items;
  for (const auto& p : files) {
    if (!fs::exists(p) || !fs::is_regular_file(p))
      throw ValidationError("input file not found: " + p.string());
    items.push_back({p, fs::file_size(p)});
  }
  if (items.empty()) throw ValidationError("empty worklist");
  sort_worklist(items);
  return items;
}

// ---------------------------------------------------------------------------
// Scheduler

struct Scheduler::Impl {
  std::mutex mutex;
  std::condition_variable cv;
  std::vector<WorkItem> items;  // sorted largest-first
  std::optional<std::uint64_t> cap;
  std::uint64_t inflight = 0;
};

Scheduler::Scheduler(std::vector<WorkItem> items, std::optional<std::uint64_t> max_inflight_bytes)
    : impl_(std::make_unique<Impl>()) {
  sort_worklist(items);
  impl_->items = std::move(items);
  impl_->cap = max_inflight_bytes;
}

Scheduler::~Scheduler() = default;

std::optional<WorkItem> Scheduler::acquire() {
  auto& im = *impl_;
  std::unique_lock<std::mutex> lock(im.mutex);
  while (true) {
    if (im.items.empty()) return std::nullopt;
    // Largest item that fits under the cap; when nothing is in flight the
    // largest is taken unconditionally so oversized files still progress.
    for (std::size_t i = 0; i < im.items.size(); ++i) {
      const WorkItem& cand = im.items[i];
      if (!im.cap || im.inflight == 0 || im.inflight + cand.size_bytes <= *im.cap) {
        WorkItem item = cand;
        im.items.erase(im.items.begin() + static_cast<std::ptrdiff_t>(i));
        im.inflight += item.size_bytes;
        return item;
      }
    }
    im.cv.wait(lock);
  }
}

void Scheduler::release(const WorkItem& item) {
  std::lock_guard<std::mutex> lock(impl_->mutex);
  impl_->inflight -= item.size_bytes;
  impl_->cv.notify_all();
}

// ---------------------------------------------------------------------------
// Build

namespace {

struct SharedState {
  std::mutex mutex;
  BuildReport report;
  std::atomic<bool> fatal{false};
  std::string fatal_message;
};

struct FileOutcome {
  std::uint64_t articles = 0;
  std::uint64_t revisions = 0;
  std::uint64_t warehouses = 0;
  std::uint64_t bytes_out = 0;
  std::vector<DumpError> xml_errors;
};

// Streams one dump file into a fresh warehouse sequence. Throws on failure;
// the caller rolls back the files this attempt created.
FileOutcome process_file(const WorkItem& item, int worker, const BuildOptions& opts,
                         WarehouseWriter& writer) {
  FileOutcome out;
  Logger::global().info("file_start", {{"worker", worker},
                                       {"file", item.path.string()},
                                       {"size", item.size_bytes}});

  DumpReaderOptions ropts;
  ropts.keep_namespaces = opts.keep_namespaces;
  ropts.skip_malformed = true;
  DumpReader reader(detect_dump_source(item.path), ropts);

  std::size_t since_heartbeat = 0;
  bool done = false;
  while (!done) {
    DumpEvent ev = reader.next();
    if (auto* start = std::get_if<ArticleStart>(&ev)) {
      writer.begin_segment(start->article_id, start->title, start->ns);
    } else if (auto* rev = std::get_if<RevisionEvent>(&ev)) {
      const std::string line = serialize_block(rev->block);
      try {
        writer.append_line(line, rev->block.timestamp);
        ++out.revisions;
      } catch (const OversizeLineError& e) {
        out.xml_errors.push_back(
            {0, rev->block.article_id, std::string("oversize revision dropped: ") + e.what()});
      }
    } else if (std::get_if<ArticleEnd>(&ev)) {
      writer.end_segment();
      ++out.articles;
      if (++since_heartbeat >= opts.heartbeat_every) {
        since_heartbeat = 0;
        Logger::global().info("progress", {{"worker", worker},
                                           {"file", item.path.filename().string()},
                                           {"articles", out.articles},
                                           {"revisions", out.revisions}});
      }
    } else {
      done = true;
    }
  }
  writer.close();  // warehouses never span input files

  for (const auto& e : reader.errors())
    out.xml_errors.push_back({e.byte_offset, e.article_id, e.message});

  out.warehouses = writer.warehouses_written();
  out.bytes_out = writer.bytes_written_total();
  Logger::global().info("file_done", {{"worker", worker},
                                      {"file", item.path.string()},
                                      {"articles", out.articles},
                                      {"revisions", out.revisions}});
  return out;
}

void rollback_attempt(const fs::path& out_dir, const std::vector<std::string>& files) {
  for (const auto& name : files) {
    std::error_code ec;
    fs::remove(out_dir / name, ec);
    const std::string sidecar =
        name.substr(0, name.size() - std::string(".jsonl.gz").size()) + ".metadata.jsonl";
    fs::remove(out_dir / sidecar, ec);
  }
}

void worker_main(int worker, Scheduler& sched, const BuildConfig& cfg, const BuildOptions& opts,
                 SharedState& shared) {
  WorkerSummary summary;
  summary.worker = worker;
  int seq = 0;

  while (!shared.fatal.load()) {
    auto item = sched.acquire();
    if (!item) break;

    bool ok = false;
    std::string last_error;
    const int max_attempts = 2;  // a failed file is retried once, then surfaced
    int attempt = 0;
    for (; attempt < max_attempts && !ok; ++attempt) {
      auto writer = std::make_unique<WarehouseWriter>(cfg.output_dir, worker, cfg, seq);
      try {
        FileOutcome out = process_file(*item, worker, opts, *writer);
        seq = writer->next_sequence();
        ok = true;

        std::lock_guard<std::mutex> lock(shared.mutex);
        auto& r = shared.report;
        r.files_processed += 1;
        r.articles_written += out.articles;
        r.revisions_written += out.revisions;
        r.warehouses_written += out.warehouses;
        r.bytes_in_compressed += item->size_bytes;
        r.bytes_out_compressed += out.bytes_out;
        r.xml_error_count += out.xml_errors.size();
        for (const auto& e : out.xml_errors) {
          if (r.xml_errors.size() >= kMaxReportedXmlErrors) break;
          r.xml_errors.push_back({item->path.string(), e.byte_offset, e.article_id, e.message});
        }
        summary.files += 1;
        summary.articles += out.articles;
        summary.revisions += out.revisions;
      } catch (const FatalError& e) {
        if (writer->segment_open()) writer->abort_segment();
        shared.fatal.store(true);
        std::lock_guard<std::mutex> lock(shared.mutex);
        shared.fatal_message = e.what();
        break;
      } catch (const std::exception& e) {
        last_error = e.what();
        try {
          if (writer->segment_open()) writer->abort_segment();
          writer->close();
        } catch (...) {
        }
        rollback_attempt(cfg.output_dir, writer->files_created());
        Logger::global().warn("file_attempt_failed", {{"worker", worker},
                                                      {"file", item->path.string()},
                                                      {"attempt", attempt + 1},
                                                      {"error", last_error}});
      }
    }
    if (!ok && !shared.fatal.load()) {
      std::lock_guard<std::mutex> lock(shared.mutex);
      shared.report.files_failed.push_back({item->path.string(), last_error, attempt});
    }
    sched.release(*item);
  }

  std::lock_guard<std::mutex> lock(shared.mutex);
  shared.report.workers.push_back(summary);
}

}  // namespace

BuildReport build(const std::vector<WorkItem>& worklist, const BuildConfig& config,
                  const BuildOptions& options) {
  config.validate();
  if (worklist.empty()) throw ValidationError("empty worklist");

  const fs::path& out = config.output_dir;
  if (fs::exists(out)) {
    if (!fs::is_directory(out)) throw ValidationError(out.string() + " is not a directory");
    if (!fs::is_empty(out)) {
      if (!options.overwrite)
        throw ValidationError("output directory " + out.string() +
                              " is not empty (pass overwrite to replace it)");
      fs::remove_all(out);
    }
  }
  fs::create_directories(out);

  const auto t0 = std::chrono::steady_clock::now();
  SharedState shared;
  Scheduler sched(worklist, options.max_inflight_input_bytes);

  const int nworkers =
      static_cast<int>(std::min<std::size_t>(config.num_workers, worklist.size()));
  std::vector<std::thread> threads;
  threads.reserve(nworkers);
  for (int w = 0; w < nworkers; ++w)
    threads.emplace_back(worker_main, w, std::ref(sched), std::cref(config),
                         std::cref(options), std::ref(shared));
  for (auto& t : threads) t.join();

  shared.report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::sort(shared.report.workers.begin(), shared.report.workers.end(),
            [](const WorkerSummary& a, const WorkerSummary& b) { return a.worker < b.worker; });

  if (shared.fatal.load()) {
    Json marker = Json::object();
    marker["reason"] = shared.fatal_message;
    marker["partial_output"] = true;
    std::ofstream mf(out / kIncompleteMarker, std::ios::trunc);
    mf << marker.dump(2) << "\n";
    throw FatalError("build aborted: " + shared.fatal_message);
  }

  // Run-level manifest: config, inputs, totals, tool version.
  Json manifest = Json::object();
  manifest["tool"] = "revarc";
  manifest["version"] = kToolVersion;
  manifest["kind"] = "build";
  manifest["created"] = now_utc_timestamp();
  manifest["config"] = config.to_json();
  Json inputs = Json::array();
  for (const auto& w : worklist) {
    Json f = Json::object();
    f["path"] = w.path.string();
    f["size_bytes"] = w.size_bytes;
    inputs.push_back(std::move(f));
  }
  manifest["inputs"] = std::move(inputs);
  manifest["totals"] = shared.report.to_json();
  write_manifest(out, manifest);

  Logger::global().info("build_done", {{"files", shared.report.files_processed},
                                       {"articles", shared.report.articles_written},
                                       {"revisions", shared.report.revisions_written},
                                       {"warehouses", shared.report.warehouses_written},
                                       {"seconds", shared.report.wall_time_seconds}});
  return shared.report;
}

Json BuildReport::to_json() const {
  Json j = Json::object();
  j["files_processed"] = files_processed;
  Json failed = Json::array();
  for (const auto& f : files_failed) {
    Json e = Json::object();
    e["path"] = f.path;
    e["error"] = f.error;
    e["attempts"] = f.attempts;
    failed.push_back(std::move(e));
  }
  j["files_failed"] = std::move(failed);
  j["articles_written"] = articles_written;
  j["revisions_written"] = revisions_written;
  j["warehouses_written"] = warehouses_written;
  j["bytes_in_compressed"] = bytes_in_compressed;
  j["bytes_out_compressed"] = bytes_out_compressed;
  j["wall_time_seconds"] = wall_time_seconds;
  Json ws = Json::array();
  for (const auto& w : workers) {
    Json e = Json::object();
    e["worker"] = w.worker;
    e["files"] = w.files;
    e["articles"] = w.articles;
    e["revisions"] = w.revisions;
    ws.push_back(std::move(e));
  }
  j["workers"] = std::move(ws);
  j["xml_error_count"] = xml_error_count;
  Json xe = Json::array();
  for (const auto& e : xml_errors) {
    Json o = Json::object();
    o["file"] = e.file;
    o["byte_offset"] = e.byte_offset;
    o["article_id"] = e.article_id;
    o["message"] = e.message;
    xe.push_back(std::move(o));
  }
  j["xml_errors"] = std::move(xe);
  return j;
}

}  // namespace revarc
