#include <doctest.h>

#include <map>
#include <set>

#include "revarc/builder.hpp"
#include "revarc/dump_reader.hpp"
#include "revarc/log.hpp"
#include "revarc/warehouse.hpp"
#include "test_util.hpp"

using namespace revarc;
using namespace testutil;

namespace {

BuildConfig build_config(const std::filesystem::path& out, int workers = 1) {
  BuildConfig cfg;
  cfg.output_dir = out;
  cfg.num_workers = workers;
  cfg.compression_level = 1;
  return cfg;
}

// Writes a small two-file corpus; returns (articles, revisions) as counted
// by an independent pass over the fixtures.
std::pair<std::uint64_t, std::uint64_t> write_fixture_corpus(const std::filesystem::path& dir) {
  PageFixture a1{"1", "Alpha", 0, {}};
  a1.revisions.push_back({.id = "11", .timestamp = "2020-01-01T00:00:00Z", .ip = "1.1.1.1", .text = "a"});
  a1.revisions.push_back({.id = "12", .timestamp = "2020-01-02T00:00:00Z", .ip = "1.1.1.1", .text = "b"});
  a1.revisions.push_back({.id = "13", .timestamp = "2020-01-03T00:00:00Z", .ip = "1.1.1.1", .text = "c"});
  PageFixture a2{"2", "Beta", 0, {}};
  a2.revisions.push_back({.id = "21", .timestamp = "2020-02-01T00:00:00Z", .ip = "1.1.1.2", .text = "d"});
  a2.revisions.push_back({.id = "22", .timestamp = "2020-02-02T00:00:00Z", .ip = "1.1.1.2", .text = "e"});
  write_bz2(dir / "one.xml.bz2", mediawiki_xml({a1, a2}));

  PageFixture b1{"3", "Gamma", 0, {}};
  b1.revisions.push_back({.id = "31", .timestamp = "2021-01-01T00:00:00Z", .ip = "1.1.1.3", .text = "f"});
  b1.revisions.push_back({.id = "32", .timestamp = "2021-01-02T00:00:00Z", .ip = "1.1.1.3", .text = "g"});
  write_file(dir / "two.xml", mediawiki_xml({b1}));
  return {3, 7};
}

// Digest of a built dataset: per-article chained line hashes plus counts.
DigestMap dataset_digests(const std::filesystem::path& dataset) {
  DigestMap digests;
  DatasetMetadata meta = read_metadata(dataset);
  REQUIRE(meta.violations.empty());
  for (const auto& w : meta.warehouses) {
    for (const auto& s : w.segments) {
      auto& d = digests[s.article_id];
      if (s.num_revisions == 0) continue;
      SegmentReader reader(w.warehouse_path, s.byte_start, s.byte_length);
      std::string line;
      while (reader.next_line(line)) d.add_line(line);
    }
  }
  return digests;
}

}  // namespace

TEST_CASE("preload lists dump files largest-first without reading them") {
  TempDir dir("builder_preload");
  write_file(dir / "small.xml", std::string(100, 'x'));
  write_file(dir / "big.bz2", std::string(5000, 'x'));
  write_file(dir / "mid.gz", std::string(2000, 'x'));
  write_file(dir / "notes.txt", "not a dump");

  auto items = preload_dumps(dir.path());
  REQUIRE(items.size() == 3);
  CHECK(items[0].path.filename() == "big.bz2");
  CHECK(items[1].path.filename() == "mid.gz");
  CHECK(items[2].path.filename() == "small.xml");
}

TEST_CASE("preload: directory without dump-like files is an error") {
  TempDir dir("builder_preload_empty");
  write_file(dir / "readme.md", "hi");
  CHECK_THROWS_AS(preload_dumps(dir.path()), ValidationError);
}

TEST_CASE("preload: explicit list with a missing path names it") {
  TempDir dir("builder_preload_missing");
  write_file(dir / "ok.xml", "<mediawiki/>");
  try {
    preload_dumps(std::vector<std::filesystem::path>{dir / "ok.xml", dir / "gone.xml"});
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("gone.xml") != std::string::npos);
  }
}

TEST_CASE("scheduler assigns largest-first") {
  std::vector<WorkItem> items;
  for (auto s : {9, 7, 2, 1}) items.push_back({"f" + std::to_string(s), std::uint64_t(s)});
  Scheduler sched(items, std::nullopt);
  CHECK(sched.acquire()->size_bytes == 9);
  CHECK(sched.acquire()->size_bytes == 7);
  CHECK(sched.acquire()->size_bytes == 2);
  CHECK(sched.acquire()->size_bytes == 1);
  CHECK(!sched.acquire().has_value());
}

TEST_CASE("scheduler honors the in-flight byte cap") {
  std::vector<WorkItem> items;
  for (auto s : {9, 7, 2, 1}) items.push_back({"f" + std::to_string(s), std::uint64_t(s)});
  Scheduler sched(items, std::uint64_t{10});

  auto first = sched.acquire();
  CHECK(first->size_bytes == 9);
  // 7 would exceed the cap of 10; the largest fitting file is 1.
  auto second = sched.acquire();
  CHECK(second->size_bytes == 1);
  sched.release(*second);
  sched.release(*first);
  // With 9 released, 7 fits again.
  CHECK(sched.acquire()->size_bytes == 7);
  CHECK(sched.acquire()->size_bytes == 2);
}

TEST_CASE("scheduler lets an oversized file through when nothing is in flight") {
  std::vector<WorkItem> items{{"huge", 100}};
  Scheduler sched(items, std::uint64_t{10});
  CHECK(sched.acquire()->size_bytes == 100);
}

TEST_CASE("build counts match an independent count over the fixtures") {
  TempDir input("builder_counts_in");
  TempDir output("builder_counts_out");
  const auto [articles, revisions] = write_fixture_corpus(input.path());

  auto worklist = preload_dumps(input.path());
  BuildConfig cfg = build_config(output / "ds", 2);
  BuildReport report = build(worklist, cfg);

  CHECK(report.files_processed == 2);
  CHECK(report.files_failed.empty());
  CHECK(report.articles_written == articles);
  CHECK(report.revisions_written == revisions);
  CHECK(report.warehouses_written >= 2);  // one sequence per input file
  CHECK(report.bytes_in_compressed > 0);
  CHECK(report.bytes_out_compressed > 0);

  // Cross-check against the sidecars.
  DatasetMetadata meta = read_metadata(output / "ds");
  CHECK(meta.total_segments() == articles);
  CHECK(meta.total_revisions() == revisions);
  CHECK(read_manifest(output / "ds").has_value());
}

TEST_CASE("dataset content is independent of the worker count") {
  TempDir input("builder_det_in");
  Rng rng(77);
  // Several files with varied content; unique article ids across files.
  for (int f = 0; f < 5; ++f) {
    std::vector<PageFixture> pages;
    for (int a = 0; a < 6; ++a)
      pages.push_back(synth_page(rng, 1000 + f * 100 + a, rng.range(1, 6), rng.range(2, 8)));
    write_bz2(input.path() / ("f" + std::to_string(f) + ".xml.bz2"), mediawiki_xml(pages));
  }
  auto worklist = preload_dumps(input.path());

  std::optional<DigestMap> reference;
  for (int workers : {1, 4}) {
    TempDir out("builder_det_out_w" + std::to_string(workers));
    BuildReport report = build(worklist, build_config(out / "ds", workers));
    CHECK(report.files_failed.empty());
    DigestMap digests = dataset_digests(out / "ds");
    if (!reference) {
      reference = std::move(digests);
    } else {
      CHECK(digests == *reference);  // same blocks, same per-article order
    }
  }
}

TEST_CASE("a crashing file is retried, marked failed, and isolated") {
  TempDir input("builder_crash_in");
  TempDir output("builder_crash_out");
  write_fixture_corpus(input.path());
  // A file whose root is wrong fails both attempts (not skip-recoverable).
  write_file(input / "poison.xml", "<notmediawiki><page/></notmediawiki>");

  auto worklist = preload_dumps(input.path());
  BuildReport report = build(worklist, build_config(output / "ds", 2));

  REQUIRE(report.files_failed.size() == 1);
  CHECK(report.files_failed[0].path.find("poison.xml") != std::string::npos);
  CHECK(report.files_failed[0].attempts == 2);
  CHECK(report.files_processed == 2);
  CHECK(report.articles_written == 3);
  CHECK(report.revisions_written == 7);

  // The failed file's partial output was rolled back: dataset still valid.
  DatasetMetadata meta = read_metadata(output / "ds");
  CHECK(meta.violations.empty());
  CHECK(meta.total_segments() == 3);
}

TEST_CASE("non-empty output directory is refused without overwrite") {
  TempDir input("builder_overwrite_in");
  TempDir output("builder_overwrite_out");
  write_fixture_corpus(input.path());
  write_file(output / "existing.txt", "precious");

  auto worklist = preload_dumps(input.path());
  CHECK_THROWS_AS(build(worklist, build_config(output.path(), 1)), ValidationError);

  BuildOptions opts;
  opts.overwrite = true;
  BuildReport report = build(worklist, build_config(output.path(), 1), opts);
  CHECK(report.files_processed == 2);
  CHECK(!std::filesystem::exists(output / "existing.txt"));
}

TEST_CASE("config validation rejects out-of-range values") {
  BuildConfig cfg = build_config("/tmp/x", 0);
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.num_workers = 1;
  cfg.warehouse_size_limit = 1024;  // < 1 MiB
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}

TEST_CASE("namespace filter flows through the build") {
  TempDir input("builder_ns_in");
  TempDir output("builder_ns_out");
  PageFixture talk{"50", "Talk:X", 1, {{.id = "1", .text = "t"}}};
  PageFixture main_ns{"51", "X", 0, {{.id = "2", .text = "m"}}};
  write_file(input / "d.xml", mediawiki_xml({talk, main_ns}));

  auto worklist = preload_dumps(input.path());
  BuildReport report = build(worklist, build_config(output / "ds", 1));
  CHECK(report.articles_written == 1);

  BuildOptions all;
  all.keep_namespaces = std::nullopt;
  all.overwrite = true;
  BuildReport report_all = build(worklist, build_config(output / "ds", 1), all);
  CHECK(report_all.articles_written == 2);
}

TEST_CASE("recovered xml errors land in the report") {
  TempDir input("builder_xmlerr_in");
  TempDir output("builder_xmlerr_out");
  std::string xml = "<mediawiki>";
  xml += page_xml(PageFixture{"1", "Ok", 0, {{.id = "11", .text = "a"}}});
  xml += "<page><title>Bad</title><ns>0</ns><id>2</id><revision><id>21</id>"
         "<timestamp>2020-01-01T00:00:00Z</timestamp><text>t</broken></revision></page>";
  xml += page_xml(PageFixture{"3", "Ok2", 0, {{.id = "31", .text = "c"}}});
  xml += "</mediawiki>";
  write_file(input / "d.xml", xml);

  BuildReport report = build(preload_dumps(input.path()), build_config(output / "ds", 1));
  CHECK(report.files_processed == 1);
  CHECK(report.files_failed.empty());
  CHECK(report.xml_error_count == 1);
  REQUIRE(report.xml_errors.size() == 1);
  CHECK(report.xml_errors[0].article_id == "2");
  CHECK(report.articles_written == 3);  // broken page closes empty but counted
}

TEST_CASE("a heartbeat log line is emitted at least once per N articles") {
  TempDir input("builder_heartbeat_in");
  TempDir output("builder_heartbeat_out");
  write_fixture_corpus(input.path());

  auto events = std::make_shared<std::vector<std::string>>();
  auto& logger = revarc::Logger::global();
  const auto old_level = logger.level();
  logger.set_level(revarc::LogLevel::Info);
  logger.set_sink([events](const std::string& line) { events->push_back(line); });

  BuildOptions opts;
  opts.heartbeat_every = 1;  // every article
  BuildReport report = build(preload_dumps(input.path()), build_config(output / "ds", 1), opts);

  logger.set_sink(nullptr);
  logger.set_level(old_level);

  std::size_t progress_lines = 0;
  for (const auto& line : *events) {
    const Json j = Json::parse(line);  // every log line is one JSON object
    if (j["event"] == "progress") ++progress_lines;
  }
  CHECK(progress_lines >= report.articles_written);
}

TEST_CASE("per-article line order in the warehouse matches the dump order") {
  TempDir input("builder_order_in");
  TempDir output("builder_order_out");
  Rng rng(88);
  auto page = synth_page(rng, 9, 10, 5);
  write_file(input / "d.xml", mediawiki_xml({page}));

  build(preload_dumps(input.path()), build_config(output / "ds", 1));

  DatasetMetadata meta = read_metadata(output / "ds");
  REQUIRE(meta.total_segments() == 1);
  const auto& w = meta.warehouses[0];
  SegmentReader reader(w.warehouse_path, w.segments[0].byte_start, w.segments[0].byte_length);
  std::string line;
  std::vector<std::string> rev_ids;
  while (reader.next_line(line)) {
    rev_ids.push_back(parse_block_line(line).revision_id);
  }
  std::vector<std::string> expected;
  for (const auto& r : page.revisions) expected.push_back(r.id);
  CHECK(rev_ids == expected);
}
