#include "revarc/modifier.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <thread>

#include "revarc/errors.hpp"
#include "revarc/log.hpp"
#include "revarc/timestamp.hpp"
#include "revarc/warehouse.hpp"

namespace fs = std::filesystem;

namespace revarc {

namespace {

constexpr std::size_t kMaxReportedErrors = 100;
constexpr const char* kToolVersion = "0.1.0";

// Signals a strict-mode abort up through the worker loop.
struct StrictAbort {
  ModifyErrorRecord record;
};

struct SharedState {
  std::mutex mutex;
  ModifyReport report;
  std::map<std::string, double> profile_seconds;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> fatal{false};
  ModifyErrorRecord fatal_record;
};

std::optional<std::string> top_level_timestamp(const Json& content) {
  if (!content.is_object()) return std::nullopt;
  auto it = content.find("timestamp");
  if (it == content.end() || !it->is_string()) return std::nullopt;
  std::string ts = it->get<std::string>();
  if (!parse_utc_timestamp(ts)) return std::nullopt;
  return ts;
}

}  // namespace

std::vector<ModifyWorkItem> modify_preload(const fs::path& dataset_dir) {
  DatasetMetadata meta = read_metadata(dataset_dir);
  if (!meta.violations.empty()) {
    std::string msg = "dataset " + dataset_dir.string() + " fails validation:";
    for (const auto& v : meta.violations) msg += "\n  " + v;
    throw DatasetError(msg);
  }
  std::vector<ModifyWorkItem> items;
  for (auto& w : meta.warehouses)
    for (auto& s : w.segments) items.push_back({w.warehouse_path, std::move(s)});
  return items;
}

std::optional<Json> apply_chain(Json content, SegmentMetadata& meta,
                                const std::vector<std::unique_ptr<ModifierProfile>>& chain) {
  std::optional<Json> cur = std::move(content);
  for (const auto& p : chain) {
    cur = p->block(std::move(*cur), meta);
    if (!cur) return std::nullopt;  // dropped; later block hooks are skipped
  }
  return cur;
}

namespace {

struct WorkerResult {
  std::uint64_t segments_in = 0, segments_out = 0;
  std::uint64_t blocks_in = 0, blocks_out = 0, blocks_dropped = 0;
  std::uint64_t warehouses = 0;
  std::map<std::string, double> profile_seconds;
  std::vector<ModifyErrorRecord> errors;
  std::uint64_t error_count = 0;
};

class TimedChain {
 public:
  TimedChain(const std::vector<ProfileFactory>& factories, WorkerResult& result)
      : result_(result) {
    chain_.reserve(factories.size());
    for (const auto& f : factories) chain_.push_back(f());
  }

  std::vector<std::unique_ptr<ModifierProfile>>& profiles() { return chain_; }

  void start_hooks(SegmentMetadata& meta) {
    for (auto& p : chain_) timed(*p, [&] { p->on_segment_start(meta); });
  }
  void end_hooks(SegmentMetadata& meta) {
    for (auto& p : chain_) timed(*p, [&] { p->on_segment_end(meta); });
  }

  // Applies the chain with per-profile timing; rethrows profile failures
  // wrapped with the failing profile's name.
  std::optional<Json> apply(Json content, SegmentMetadata& meta, std::string& failed_profile) {
    std::optional<Json> cur = std::move(content);
    for (auto& p : chain_) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        cur = p->block(std::move(*cur), meta);
      } catch (...) {
        failed_profile = p->name();
        record(*p, t0);
        throw;
      }
      record(*p, t0);
      if (!cur) return std::nullopt;
    }
    return cur;
  }

 private:
  template <class F>
  void timed(ModifierProfile& p, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    record(p, t0);
  }
  void record(ModifierProfile& p, std::chrono::steady_clock::time_point t0) {
    result_.profile_seconds[p.name()] +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  std::vector<std::unique_ptr<ModifierProfile>> chain_;
  WorkerResult& result_;
};

void record_error(WorkerResult& r, ModifyErrorRecord rec) {
  ++r.error_count;
  if (r.errors.size() < kMaxReportedErrors) r.errors.push_back(std::move(rec));
}

void process_segment(const ModifyWorkItem& item, const std::vector<ProfileFactory>& factories,
                     WarehouseWriter& writer, const ModifyOptions& opts, WorkerResult& result) {
  // Fresh profile instances per segment: state never leaks across articles.
  TimedChain chain(factories, result);

  SegmentMetadata meta = item.meta;
  chain.start_hooks(meta);

  writer.begin_segment(meta.article_id, meta.title, meta.ns);
  // Counters commit only when the whole segment lands, so a corrupted
  // segment that gets skipped leaves blocks_in = out + dropped intact.
  std::uint64_t seg_in = 0, seg_out = 0, seg_dropped = 0;

  SegmentReader reader(item.warehouse_path, item.meta.byte_start, item.meta.byte_length);
  std::string line;
  while (reader.next_line(line)) {
    ++seg_in;
    Json content;
    try {
      content = Json::parse(line);
    } catch (const Json::parse_error& e) {
      ModifyErrorRecord rec{item.meta.warehouse, item.meta.article_id, "",
                            std::string("unparseable block line: ") + e.what()};
      if (opts.strict) throw StrictAbort{std::move(rec)};
      record_error(result, std::move(rec));
      ++seg_dropped;
      continue;
    }

    std::optional<Json> outcome;
    std::string failed_profile;
    try {
      outcome = chain.apply(std::move(content), meta, failed_profile);
    } catch (const std::exception& e) {
      ModifyErrorRecord rec{item.meta.warehouse, item.meta.article_id, failed_profile, e.what()};
      if (opts.strict) throw StrictAbort{std::move(rec)};
      record_error(result, std::move(rec));
      ++seg_dropped;  // record-and-drop policy
      continue;
    }

    if (outcome) {
      std::string out_line = outcome->dump();
      out_line.push_back('\n');
      const auto ts = top_level_timestamp(*outcome);
      writer.append_line(out_line, ts ? std::optional<std::string_view>(*ts) : std::nullopt);
      ++seg_out;
    } else {
      ++seg_dropped;
    }
  }

  chain.end_hooks(meta);

  if (seg_out == 0 && opts.omit_empty_segments) {
    writer.abort_segment();
  } else {
    writer.end_segment(meta.custom);
    ++result.segments_out;
  }
  ++result.segments_in;
  result.blocks_in += seg_in;
  result.blocks_out += seg_out;
  result.blocks_dropped += seg_dropped;
}

void worker_main(int worker, const std::vector<ModifyWorkItem>& worklist,
                 const std::vector<ProfileFactory>& factories, const BuildConfig& cfg,
                 const ModifyOptions& opts, SharedState& shared) {
  WorkerResult result;
  WarehouseWriter writer(cfg.output_dir, worker, cfg, 0);
  std::size_t since_heartbeat = 0;

  while (!shared.fatal.load()) {
    const std::size_t idx = shared.next.fetch_add(1);
    if (idx >= worklist.size()) break;
    const ModifyWorkItem& item = worklist[idx];
    try {
      process_segment(item, factories, writer, opts, result);
    } catch (const StrictAbort& abort) {
      if (writer.segment_open()) writer.abort_segment();
      shared.fatal.store(true);
      std::lock_guard<std::mutex> lock(shared.mutex);
      shared.fatal_record = abort.record;
      break;
    } catch (const CorruptionError& e) {
      // Corrupted input segment: recorded and skipped.
      if (writer.segment_open()) writer.abort_segment();
      record_error(result, {item.meta.warehouse, item.meta.article_id, "", e.what()});
      ++result.segments_in;
    }
    if (++since_heartbeat >= opts.heartbeat_every) {
      since_heartbeat = 0;
      Logger::global().info("progress", {{"worker", worker},
                                         {"segments", result.segments_in},
                                         {"blocks", result.blocks_in}});
    }
  }
  writer.close();
  result.warehouses = writer.warehouses_written();

  std::lock_guard<std::mutex> lock(shared.mutex);
  auto& r = shared.report;
  r.segments_in += result.segments_in;
  r.segments_out += result.segments_out;
  r.blocks_in += result.blocks_in;
  r.blocks_out += result.blocks_out;
  r.blocks_dropped += result.blocks_dropped;
  r.warehouses_written += result.warehouses;
  r.error_count += result.error_count;
  for (auto& e : result.errors)
    if (r.errors.size() < kMaxReportedErrors) r.errors.push_back(std::move(e));
  for (const auto& [name, secs] : result.profile_seconds) shared.profile_seconds[name] += secs;
}

}  // namespace

ModifyReport modify_start(const std::vector<ModifyWorkItem>& worklist,
                          const std::vector<ProfileFactory>& profiles, const BuildConfig& config,
                          const ModifyOptions& options) {
  config.validate();
  if (profiles.empty()) throw UsageError("at least one profile is required");
  if (worklist.empty()) throw ValidationError("empty modify worklist");

  const fs::path& out = config.output_dir;
  for (const auto& item : worklist) {
    std::error_code ec;
    if (fs::equivalent(item.warehouse_path.parent_path(), out, ec))
      throw ValidationError("in-place modification is unsupported: output " + out.string() +
                            " is the input dataset directory");
    break;  // all items share one dataset dir
  }
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

  const int nworkers =
      static_cast<int>(std::min<std::size_t>(config.num_workers, worklist.size()));
  std::vector<std::thread> threads;
  threads.reserve(nworkers);
  for (int w = 0; w < nworkers; ++w)
    threads.emplace_back(worker_main, w, std::cref(worklist), std::cref(profiles),
                         std::cref(config), std::cref(options), std::ref(shared));
  for (auto& t : threads) t.join();

  if (shared.fatal.load()) {
    // Strict mode leaves no partial output behind.
    std::error_code ec;
    fs::remove_all(out, ec);
    const auto& rec = shared.fatal_record;
    throw FatalError("modify aborted (strict): article " + rec.article_id + " in " +
                     rec.warehouse + (rec.profile.empty() ? "" : " profile " + rec.profile) +
                     ": " + rec.message);
  }

  auto& report = shared.report;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& [name, secs] : shared.profile_seconds)
    report.profile_seconds.emplace_back(name, secs);

  Json manifest = Json::object();
  manifest["tool"] = "revarc";
  manifest["version"] = kToolVersion;
  manifest["kind"] = "modify";
  manifest["created"] = now_utc_timestamp();
  manifest["config"] = config.to_json();
  Json names = Json::array();
  {
    // Factory-made instances only exist per segment; sample names once.
    for (const auto& f : profiles) names.push_back(f()->name());
  }
  manifest["profiles"] = std::move(names);
  manifest["totals"] = report.to_json();
  write_manifest(out, manifest);

  Logger::global().info("modify_done", {{"segments", report.segments_in},
                                        {"blocks_in", report.blocks_in},
                                        {"blocks_out", report.blocks_out},
                                        {"seconds", report.wall_time_seconds}});
  return report;
}

Json ModifyReport::to_json() const {
  Json j = Json::object();
  j["segments_in"] = segments_in;
  j["segments_out"] = segments_out;
  j["blocks_in"] = blocks_in;
  j["blocks_out"] = blocks_out;
  j["blocks_dropped"] = blocks_dropped;
  j["warehouses_written"] = warehouses_written;
  j["wall_time_seconds"] = wall_time_seconds;
  Json ps = Json::object();
  for (const auto& [name, secs] : profile_seconds) ps[name] = secs;
  j["profile_seconds"] = std::move(ps);
  j["error_count"] = error_count;
  Json errs = Json::array();
  for (const auto& e : errors) {
    Json o = Json::object();
    o["warehouse"] = e.warehouse;
    o["article_id"] = e.article_id;
    o["profile"] = e.profile;
    o["message"] = e.message;
    errs.push_back(std::move(o));
  }
  j["errors"] = std::move(errs);
  return j;
}

}  // namespace revarc
