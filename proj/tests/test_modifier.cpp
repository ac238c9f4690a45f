#include <doctest.h>

#include <map>

#include "revarc/builder.hpp"
#include "revarc/modifier.hpp"
#include "revarc/profiles.hpp"
#include "revarc/warehouse.hpp"
#include "test_util.hpp"

using namespace revarc;
using namespace testutil;

namespace {

BuildConfig out_config(const std::filesystem::path& out, int workers = 1) {
  BuildConfig cfg;
  cfg.output_dir = out;
  cfg.num_workers = workers;
  cfg.compression_level = 1;
  return cfg;
}

// Builds a small dataset from synthetic pages and returns its directory.
void build_fixture_dataset(const std::filesystem::path& input_dir,
                           const std::filesystem::path& dataset_dir, int pages = 8,
                           std::uint64_t seed = 7) {
  Rng rng(seed);
  std::vector<PageFixture> fixtures;
  for (int a = 0; a < pages; ++a)
    fixtures.push_back(synth_page(rng, 100 + a, rng.range(2, 8), rng.range(2, 6)));
  write_file(input_dir / "d.xml", mediawiki_xml(fixtures));
  build(preload_dumps(input_dir), out_config(dataset_dir));
}

class IdentityProfile final : public ModifierProfile {
 public:
  std::string name() const override { return "identity"; }
  std::optional<Json> block(Json content, SegmentMetadata&) override { return content; }
};

class DropAllProfile final : public ModifierProfile {
 public:
  std::string name() const override { return "dropall"; }
  std::optional<Json> block(Json, SegmentMetadata&) override { return std::nullopt; }
};

// Counts how many blocks each instance saw; proves per-segment isolation.
class CountingProfile final : public ModifierProfile {
 public:
  explicit CountingProfile(std::vector<std::uint64_t>* log) : log_(log) {}
  std::string name() const override { return "counting"; }
  std::optional<Json> block(Json content, SegmentMetadata& meta) override {
    ++seen_;
    content["seen_by_this_instance"] = seen_;
    meta.custom["blocks"] = seen_;
    return content;
  }
  void on_segment_end(SegmentMetadata&) override { log_->push_back(seen_); }

 private:
  std::vector<std::uint64_t>* log_;
  std::uint64_t seen_ = 0;
};

class PoisonProfile final : public ModifierProfile {
 public:
  std::string name() const override { return "poison"; }
  std::optional<Json> block(Json content, SegmentMetadata&) override {
    if (content.contains("revision_id") && content["revision_id"] == "poison")
      throw ProfileError("poisoned block");
    return content;
  }
};

std::multiset<std::string> all_lines(const std::filesystem::path& dataset) {
  std::multiset<std::string> lines;
  DatasetMetadata meta = read_metadata(dataset);
  for (const auto& w : meta.warehouses) {
    WarehouseScanner scan(w.warehouse_path);
    std::string line;
    std::size_t member;
    while (scan.next_line(line, member)) lines.insert(line);
  }
  return lines;
}

}  // namespace

TEST_CASE("preload returns one work item per segment; chained datasets reload") {
  TempDir input("mod_preload_in");
  TempDir ds("mod_preload_ds");
  build_fixture_dataset(input.path(), ds / "d", 5);

  auto items = modify_preload(ds / "d");
  CHECK(items.size() == 5);

  // A modified dataset preloads just as well (standardized protocol).
  TempDir out("mod_preload_out");
  modify_start(items, {[] { return std::make_unique<IdentityProfile>(); }},
               out_config(out / "d2"));
  auto items2 = modify_preload(out / "d2");
  CHECK(items2.size() == 5);
}

TEST_CASE("preload refuses a dataset with contiguity violations") {
  TempDir input("mod_corrupt_in");
  TempDir ds("mod_corrupt_ds");
  build_fixture_dataset(input.path(), ds / "d", 3);

  // Shift one sidecar record to break contiguity.
  DatasetMetadata meta = read_metadata(ds / "d");
  const auto sidecar = meta.warehouses[0].sidecar_path;
  auto segments = meta.warehouses[0].segments;
  segments[1].byte_start += 3;
  std::string content;
  for (const auto& s : segments) content += serialize_metadata_line(s);
  write_file(sidecar, content);

  CHECK_THROWS_AS(modify_preload(ds / "d"), DatasetError);
}

TEST_CASE("apply_chain: identity passes blocks through; drop short-circuits") {
  SegmentMetadata meta;
  std::vector<std::unique_ptr<ModifierProfile>> chain;
  chain.push_back(std::make_unique<IdentityProfile>());

  Json block = Json::parse("{\"a\":1}");
  auto out = apply_chain(block, meta, chain);
  REQUIRE(out.has_value());
  CHECK(*out == block);

  chain.push_back(std::make_unique<DropAllProfile>());
  chain.push_back(std::make_unique<IdentityProfile>());
  CHECK(!apply_chain(block, meta, chain).has_value());
}

TEST_CASE("identity modify preserves every block byte-for-byte") {
  TempDir input("mod_identity_in");
  TempDir ds("mod_identity_ds");
  TempDir out("mod_identity_out");
  build_fixture_dataset(input.path(), ds / "d", 6);

  auto items = modify_preload(ds / "d");
  ModifyReport report = modify_start(items, {[] { return std::make_unique<IdentityProfile>(); }},
                                     out_config(out / "d2", 2));

  CHECK(report.blocks_in == report.blocks_out);
  CHECK(report.blocks_dropped == 0);
  CHECK(report.segments_in == report.segments_out);
  CHECK(all_lines(ds / "d") == all_lines(out / "d2"));
}

TEST_CASE("drop-all still emits every segment's metadata") {
  TempDir input("mod_dropall_in");
  TempDir ds("mod_dropall_ds");
  TempDir out("mod_dropall_out");
  build_fixture_dataset(input.path(), ds / "d", 4);

  auto items = modify_preload(ds / "d");
  ModifyReport report = modify_start(
      items,
      {[] { return std::make_unique<IdentityProfile>(); },
       [] { return std::make_unique<DropAllProfile>(); }},
      out_config(out / "d2"));

  CHECK(report.blocks_out == 0);
  CHECK(report.blocks_dropped == report.blocks_in);
  CHECK(report.segments_out == 4);

  DatasetMetadata meta = read_metadata(out / "d2");
  CHECK(meta.violations.empty());
  CHECK(meta.total_segments() == 4);
  for (const auto& w : meta.warehouses)
    for (const auto& s : w.segments) {
      CHECK(s.num_revisions == 0);
      CHECK(!s.first_timestamp.has_value());
    }
}

TEST_CASE("omit_empty_segments removes drop-emptied segments entirely") {
  TempDir input("mod_omit_in");
  TempDir ds("mod_omit_ds");
  TempDir out("mod_omit_out");
  build_fixture_dataset(input.path(), ds / "d", 4);

  auto items = modify_preload(ds / "d");
  ModifyOptions opts;
  opts.omit_empty_segments = true;
  ModifyReport report = modify_start(
      items, {[] { return std::make_unique<DropAllProfile>(); }}, out_config(out / "d2"), opts);
  CHECK(report.segments_out == 0);
  // All segments dropped and omitted: the dataset directory has no warehouses.
  CHECK_THROWS_AS(read_metadata(out / "d2"), DatasetError);
}

TEST_CASE("profile state is scoped to one segment") {
  TempDir input("mod_state_in");
  TempDir ds("mod_state_ds");
  TempDir out("mod_state_out");
  build_fixture_dataset(input.path(), ds / "d", 5);

  auto counts = std::make_shared<std::vector<std::uint64_t>>();
  auto items = modify_preload(ds / "d");
  modify_start(items, {[counts] { return std::make_unique<CountingProfile>(counts.get()); }},
               out_config(out / "d2"));

  // One log entry per segment, each matching that segment's block count:
  // a fresh instance saw each segment.
  DatasetMetadata meta = read_metadata(ds / "d");
  std::multiset<std::uint64_t> expected;
  for (const auto& w : meta.warehouses)
    for (const auto& s : w.segments) expected.insert(s.num_revisions);
  CHECK(std::multiset<std::uint64_t>(counts->begin(), counts->end()) == expected);

  // Custom metadata written by the profile landed in the output sidecar.
  DatasetMetadata meta_out = read_metadata(out / "d2");
  for (const auto& w : meta_out.warehouses)
    for (const auto& s : w.segments)
      CHECK(s.custom["blocks"] == s.num_revisions);
}

TEST_CASE("stateful profile output for a segment is independent of earlier segments") {
  // Process articles A then B through one engine run, and B alone through
  // another; B's output must match.
  TempDir input_ab("mod_iso_in_ab");
  TempDir input_b("mod_iso_in_b");
  TempDir ds_ab("mod_iso_ds_ab");
  TempDir ds_b("mod_iso_ds_b");
  TempDir out_ab("mod_iso_out_ab");
  TempDir out_b("mod_iso_out_b");

  Rng rng_a(100), rng_b(200);
  PageFixture a = synth_page(rng_a, 1, 6, 4);
  Rng rng_b2(200);
  PageFixture b = synth_page(rng_b2, 2, 6, 4);
  write_file(input_ab / "d.xml", mediawiki_xml({a, b}));
  write_file(input_b / "d.xml", mediawiki_xml({b}));
  build(preload_dumps(input_ab.path()), out_config(ds_ab / "d"));
  build(preload_dumps(input_b.path()), out_config(ds_b / "d"));

  auto factory = [] { return parse_profile_spec("editdiff")(); };
  modify_start(modify_preload(ds_ab / "d"), {factory}, out_config(out_ab / "d"));
  modify_start(modify_preload(ds_b / "d"), {factory}, out_config(out_b / "d"));

  // Extract article 2's lines from both outputs.
  auto lines_of_article = [](const std::filesystem::path& dataset, const std::string& id) {
    std::vector<std::string> lines;
    DatasetMetadata meta = read_metadata(dataset);
    for (const auto& w : meta.warehouses)
      for (const auto& s : w.segments) {
        if (s.article_id != id || s.num_revisions == 0) continue;
        SegmentReader reader(w.warehouse_path, s.byte_start, s.byte_length);
        std::string line;
        while (reader.next_line(line)) lines.push_back(line);
      }
    return lines;
  };
  CHECK(lines_of_article(out_ab / "d", "2") == lines_of_article(out_b / "d", "2"));
}

TEST_CASE("conservation: blocks_in = blocks_out + blocks_dropped under a snapshot") {
  TempDir input("mod_cons_in");
  TempDir ds("mod_cons_ds");
  TempDir out("mod_cons_out");
  build_fixture_dataset(input.path(), ds / "d", 10, 99);

  auto items = modify_preload(ds / "d");
  ModifyReport report =
      modify_start(items, {parse_profile_spec("snapshot:180")}, out_config(out / "d2", 3));
  CHECK(report.blocks_in == report.blocks_out + report.blocks_dropped);
  CHECK(report.segments_in == report.segments_out);
  CHECK(report.blocks_dropped > 0);  // fixture has sub-180-day gaps
  CHECK(report.error_count == 0);
}

TEST_CASE("snapshot through the engine matches an in-memory filter per article") {
  TempDir input("mod_snap_in");
  TempDir ds("mod_snap_ds");
  TempDir out("mod_snap_out");
  Rng rng(555);
  std::vector<PageFixture> pages;
  for (int a = 0; a < 3; ++a) pages.push_back(synth_page(rng, 700 + a, 12, 3));
  write_file(input / "d.xml", mediawiki_xml(pages));
  build(preload_dumps(input.path()), out_config(ds / "d"));

  modify_start(modify_preload(ds / "d"), {parse_profile_spec("snapshot:180")},
               out_config(out / "d2"));

  // Oracle: filter each fixture article's timestamps directly.
  std::map<std::string, std::vector<std::string>> expected;
  for (const auto& p : pages) {
    std::optional<std::int64_t> last;
    for (const auto& r : p.revisions) {
      const auto t = *revarc::parse_utc_timestamp(r.timestamp);
      if (!last || t >= *last + 180 * 86400) {
        last = t;
        expected[p.id].push_back(r.id);
      }
    }
  }

  std::map<std::string, std::vector<std::string>> got;
  DatasetMetadata meta = read_metadata(out / "d2");
  for (const auto& w : meta.warehouses)
    for (const auto& s : w.segments) {
      if (s.num_revisions == 0) continue;
      SegmentReader reader(w.warehouse_path, s.byte_start, s.byte_length);
      std::string line;
      while (reader.next_line(line))
        got[s.article_id].push_back(Json::parse(line)["revision_id"].get<std::string>());
    }
  CHECK(got == expected);
}

TEST_CASE("output block multiset is independent of the worker count") {
  TempDir input("mod_det_in");
  TempDir ds("mod_det_ds");
  build_fixture_dataset(input.path(), ds / "d", 12, 123);
  auto items = modify_preload(ds / "d");

  std::optional<std::multiset<std::string>> reference;
  for (int workers : {1, 4}) {
    TempDir out("mod_det_out_w" + std::to_string(workers));
    modify_start(items, {parse_profile_spec("urldiff")}, out_config(out / "d2", workers));
    auto lines = all_lines(out / "d2");
    if (!reference) {
      reference = std::move(lines);
    } else {
      CHECK(lines == *reference);
    }
  }
}

TEST_CASE("default error policy records and drops; blocks keep flowing") {
  TempDir input("mod_err_in");
  TempDir ds("mod_err_ds");
  TempDir out("mod_err_out");
  PageFixture p{"1", "T", 0, {}};
  p.revisions.push_back({.id = "1", .timestamp = "2020-01-01T00:00:00Z", .ip = "1.1.1.1", .text = "a"});
  p.revisions.push_back({.id = "poison", .timestamp = "2020-01-02T00:00:00Z", .ip = "1.1.1.1", .text = "b"});
  p.revisions.push_back({.id = "3", .timestamp = "2020-01-03T00:00:00Z", .ip = "1.1.1.1", .text = "c"});
  write_file(input / "d.xml", mediawiki_xml({p}));
  build(preload_dumps(input.path()), out_config(ds / "d"));

  auto items = modify_preload(ds / "d");
  ModifyReport report = modify_start(
      items, {[] { return std::make_unique<PoisonProfile>(); }}, out_config(out / "d2"));
  CHECK(report.blocks_in == 3);
  CHECK(report.blocks_out == 2);
  CHECK(report.blocks_dropped == 1);
  CHECK(report.error_count == 1);
  REQUIRE(report.errors.size() == 1);
  CHECK(report.errors[0].profile == "poison");
}

TEST_CASE("strict mode aborts and leaves no partial output directory") {
  TempDir input("mod_strict_in");
  TempDir ds("mod_strict_ds");
  TempDir out("mod_strict_out");
  PageFixture p{"1", "T", 0, {}};
  p.revisions.push_back({.id = "1", .timestamp = "2020-01-01T00:00:00Z", .ip = "1.1.1.1", .text = "a"});
  p.revisions.push_back({.id = "poison", .timestamp = "2020-01-02T00:00:00Z", .ip = "1.1.1.1", .text = "b"});
  write_file(input / "d.xml", mediawiki_xml({p}));
  build(preload_dumps(input.path()), out_config(ds / "d"));

  ModifyOptions opts;
  opts.strict = true;
  CHECK_THROWS_AS(modify_start(modify_preload(ds / "d"),
                               {[] { return std::make_unique<PoisonProfile>(); }},
                               out_config(out / "d2"), opts),
                  FatalError);
  CHECK(!std::filesystem::exists(out / "d2"));
}

TEST_CASE("in-place modification is refused") {
  TempDir input("mod_inplace_in");
  TempDir ds("mod_inplace_ds");
  build_fixture_dataset(input.path(), ds / "d", 2);
  auto items = modify_preload(ds / "d");
  ModifyOptions opts;
  opts.overwrite = true;
  CHECK_THROWS_AS(modify_start(items, {[] { return std::make_unique<IdentityProfile>(); }},
                               out_config(ds / "d"), opts),
                  ValidationError);
}

TEST_CASE("profiles must be nonempty") {
  TempDir input("mod_nochain_in");
  TempDir ds("mod_nochain_ds");
  TempDir out("mod_nochain_out");
  build_fixture_dataset(input.path(), ds / "d", 2);
  CHECK_THROWS_AS(modify_start(modify_preload(ds / "d"), {}, out_config(out / "d2")),
                  UsageError);
}

TEST_CASE("timestamps are recomputed only when outputs still carry them") {
  TempDir input("mod_ts_in");
  TempDir ds("mod_ts_ds");
  TempDir out_links("mod_ts_out1");
  TempDir out_diff("mod_ts_out2");
  build_fixture_dataset(input.path(), ds / "d", 3, 321);
  auto items = modify_preload(ds / "d");

  // links output has no timestamp key: metadata omits first/last.
  modify_start(items, {parse_profile_spec("links")}, out_config(out_links / "d"));
  DatasetMetadata links_meta = read_metadata(out_links / "d");
  for (const auto& w : links_meta.warehouses)
    for (const auto& s : w.segments) CHECK(!s.first_timestamp.has_value());

  // urldiff keeps timestamps: metadata carries them again.
  modify_start(items, {parse_profile_spec("urldiff")}, out_config(out_diff / "d"));
  DatasetMetadata diff_meta = read_metadata(out_diff / "d");
  for (const auto& w : diff_meta.warehouses)
    for (const auto& s : w.segments)
      CHECK(s.first_timestamp.has_value() == (s.num_revisions > 0));
}
