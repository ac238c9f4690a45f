#include <doctest.h>

#include <unordered_set>

#include "revarc/line_diff.hpp"
#include "revarc/profiles.hpp"
#include "revarc/timestamp.hpp"
#include "revarc/wikitext.hpp"
#include "test_util.hpp"

using namespace revarc;
using namespace testutil;

namespace {

Json text_block(const std::string& text, const std::string& ts = "2020-01-01T00:00:00Z",
                const std::string& rev = "1") {
  Json b = Json::object();
  b["article_id"] = "9";
  b["revision_id"] = rev;
  b["timestamp"] = ts;
  Json t = Json::object();
  t["@bytes"] = std::to_string(text.size());
  t["#text"] = text;
  b["text"] = std::move(t);
  return b;
}

// Runs a fresh profile over blocks built from the given texts/timestamps;
// returns the emitted outputs.
std::vector<Json> run_profile(ModifierProfile& p, const std::vector<Json>& blocks) {
  SegmentMetadata meta;
  std::vector<Json> out;
  p.on_segment_start(meta);
  for (const auto& b : blocks) {
    auto r = p.block(b, meta);
    if (r) out.push_back(std::move(*r));
  }
  p.on_segment_end(meta);
  return out;
}

std::string day_ts(int day) { return format_utc_timestamp(1577836800 + std::int64_t(day) * 86400); }

}  // namespace

// --- snapshot ---------------------------------------------------------------

TEST_CASE("snapshot: days 0/100/200 keep 0 and 200") {
  auto p = make_snapshot_profile();
  std::vector<Json> blocks{text_block("a", day_ts(0), "1"), text_block("b", day_ts(100), "2"),
                           text_block("c", day_ts(200), "3")};
  auto out = run_profile(*p, blocks);
  REQUIRE(out.size() == 2);
  CHECK(out[0]["revision_id"] == "1");
  CHECK(out[1]["revision_id"] == "3");
  CHECK(out[0] == blocks[0]);  // kept blocks pass through unchanged
}

TEST_CASE("snapshot: a single revision is kept") {
  auto p = make_snapshot_profile();
  auto out = run_profile(*p, {text_block("only", day_ts(5))});
  CHECK(out.size() == 1);
}

TEST_CASE("snapshot: the 180-day boundary is inclusive for keeping") {
  auto p = make_snapshot_profile();
  auto out = run_profile(*p, {text_block("a", day_ts(0), "1"), text_block("b", day_ts(180), "2")});
  CHECK(out.size() == 2);

  auto p2 = make_snapshot_profile();
  auto out2 =
      run_profile(*p2, {text_block("a", day_ts(0), "1"), text_block("b", day_ts(179), "2")});
  CHECK(out2.size() == 1);
}

TEST_CASE("snapshot: custom interval and validation") {
  auto p = make_snapshot_profile({.interval_days = 30});
  auto out = run_profile(*p, {text_block("a", day_ts(0)), text_block("b", day_ts(31))});
  CHECK(out.size() == 2);
  CHECK_THROWS_AS(make_snapshot_profile({.interval_days = 0}), UsageError);
}

TEST_CASE("snapshot: missing timestamp raises a profile error") {
  auto p = make_snapshot_profile();
  SegmentMetadata meta;
  Json no_ts = Json::object();
  no_ts["text"] = {{"#text", "x"}};
  CHECK_THROWS_AS(p->block(no_ts, meta), ProfileError);
  CHECK_THROWS_AS(p->block(text_block("x", "yesterday"), meta), ProfileError);
}

TEST_CASE("snapshot idempotence: reapplying to its own output changes nothing") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Json> blocks;
    int day = 0;
    const int n = rng.range(1, 25);
    for (int i = 0; i < n; ++i) {
      blocks.push_back(text_block("t", day_ts(day), std::to_string(i)));
      day += rng.range(0, 400);
    }
    auto p1 = make_snapshot_profile();
    auto once = run_profile(*p1, blocks);
    auto p2 = make_snapshot_profile();
    auto twice = run_profile(*p2, once);
    CHECK(once == twice);
  }
}

TEST_CASE("snapshot oracle equivalence on random timestamp sequences") {
  Rng rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Json> blocks;
    std::vector<std::int64_t> times;
    std::int64_t t = 946684800 + static_cast<std::int64_t>(rng.below(86400u * 365));
    const int n = rng.range(1, 30);
    for (int i = 0; i < n; ++i) {
      blocks.push_back(text_block("x", format_utc_timestamp(t), std::to_string(i)));
      times.push_back(t);
      t += static_cast<std::int64_t>(rng.below(86400u * 400));
    }
    // Brute-force oracle over raw epoch seconds.
    std::vector<std::string> expected;
    std::optional<std::int64_t> last;
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (!last || times[i] >= *last + 180 * 86400) {
        last = times[i];
        expected.push_back(std::to_string(i));
      }
    }
    auto p = make_snapshot_profile();
    auto out = run_profile(*p, blocks);
    std::vector<std::string> got;
    for (const auto& b : out) got.push_back(b["revision_id"].get<std::string>());
    REQUIRE(got == expected);
  }
}

// --- link extraction ----------------------------------------------------------

TEST_CASE("links: internal and bracketed external links") {
  const auto ex = extract_links("See [[Apple]] and [https://x.org X].");
  CHECK(ex.internal_links == std::vector<std::string>{"Apple"});
  CHECK(ex.external_links == std::vector<std::string>{"https://x.org"});
  CHECK(ex.images.empty());
  CHECK(ex.clean_text == "See Apple and X.");
}

TEST_CASE("links: images vanish from clean text") {
  const auto ex = extract_links("[[File:Cat.jpg|thumb]]");
  CHECK(ex.images == std::vector<std::string>{"File:Cat.jpg"});
  CHECK(ex.internal_links.empty());
  CHECK(ex.clean_text.empty());

  const auto ex2 = extract_links("[[Image:Dog.png]] and [[Dog]]");
  CHECK(ex2.images == std::vector<std::string>{"Image:Dog.png"});
  CHECK(ex2.internal_links == std::vector<std::string>{"Dog"});
  CHECK(ex2.clean_text == " and Dog");
}

TEST_CASE("links: empty text gives empty everything") {
  const auto ex = extract_links("");
  CHECK(ex.clean_text.empty());
  CHECK(ex.external_links.empty());
  CHECK(ex.internal_links.empty());
  CHECK(ex.images.empty());
}

TEST_CASE("links: labels replace targets in clean text") {
  const auto ex = extract_links("[[Apple|the fruit]] beats [https://x.org/page a site]");
  CHECK(ex.internal_links == std::vector<std::string>{"Apple"});
  CHECK(ex.external_links == std::vector<std::string>{"https://x.org/page"});
  CHECK(ex.clean_text == "the fruit beats a site");
}

TEST_CASE("links: bare URLs are collected and kept in clean text") {
  const auto ex = extract_links("go to https://bare.example/x now");
  CHECK(ex.external_links == std::vector<std::string>{"https://bare.example/x"});
  CHECK(ex.clean_text == "go to https://bare.example/x now");
}

TEST_CASE("links: templates and refs are stripped") {
  const auto ex = extract_links(
      "{{Infobox|name=[[Hidden]]}}Before<ref name=\"a\">[[AlsoHidden]]</ref> after "
      "{{outer{{inner}}}}end<ref/>.");
  CHECK(ex.internal_links.empty());
  CHECK(ex.clean_text == "Before after end.");
}

TEST_CASE("links: duplicates keep first-occurrence order") {
  const auto ex = extract_links("[[B]] [[A]] [[B]] [https://x.org] [https://x.org]");
  CHECK(ex.internal_links == std::vector<std::string>{"B", "A"});
  CHECK(ex.external_links == std::vector<std::string>{"https://x.org"});
}

TEST_CASE("links: clean text has no recognized link markup left") {
  Rng rng(37);
  for (int i = 0; i < 100; ++i) {
    std::string text = join(synth_lines(rng, rng.range(1, 10)));
    const auto ex = extract_links(text);
    CHECK(ex.clean_text.find("[[") == std::string::npos);
    CHECK(ex.clean_text.find("[http") == std::string::npos);
  }
}

TEST_CASE("links profile emits the output schema in order") {
  auto p = make_link_extract_profile();
  SegmentMetadata meta;
  auto out = p->block(text_block("See [[Apple]]", day_ts(0), "42"), meta);
  REQUIRE(out.has_value());
  std::vector<std::string> keys;
  for (const auto& [k, v] : out->items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"revision_id", "clean_text", "external_links",
                                         "internal_links", "images"});
  CHECK((*out)["revision_id"] == "42");
  // No timestamp key in the output schema.
  CHECK(!out->contains("timestamp"));
}

TEST_CASE("links profile requires text.#text") {
  auto p = make_link_extract_profile();
  SegmentMetadata meta;
  Json b = Json::object();
  b["revision_id"] = "1";
  CHECK_THROWS_AS(p->block(b, meta), ProfileError);
}

// --- urldiff ------------------------------------------------------------------

TEST_CASE("urldiff: identical revisions emit empty diffs") {
  auto p = make_url_diff_profile();
  auto out = run_profile(*p, {text_block("see [[A]]", day_ts(0), "1"),
                              text_block("see [[A]]", day_ts(1), "2")});
  REQUIRE(out.size() == 2);
  CHECK(out[1]["added_urls"] == Json::array());
  CHECK(out[1]["removed_urls"] == Json::array());
}

TEST_CASE("urldiff: first revision adds everything") {
  auto p = make_url_diff_profile();
  auto out = run_profile(*p, {text_block("[[A]] and [http://x.org/b]", day_ts(0), "1")});
  REQUIRE(out.size() == 1);
  CHECK(out[0]["added_urls"] == Json::array({"http://x.org/b", "A"}));
  CHECK(out[0]["removed_urls"] == Json::array());
  CHECK(out[0]["article_id"] == "9");
  CHECK(out[0]["timestamp"] == day_ts(0));
}

TEST_CASE("urldiff: set differences against the previous revision") {
  auto p = make_url_diff_profile();
  auto out = run_profile(*p, {text_block("[[A]]", day_ts(0), "1"),
                              text_block("[[A]] [[B]]", day_ts(1), "2"),
                              text_block("[[B]] [[C]]", day_ts(2), "3")});
  REQUIRE(out.size() == 3);
  CHECK(out[1]["added_urls"] == Json::array({"B"}));
  CHECK(out[1]["removed_urls"] == Json::array());
  CHECK(out[2]["added_urls"] == Json::array({"C"}));
  CHECK(out[2]["removed_urls"] == Json::array({"A"}));
}

TEST_CASE("urldiff conservation: prev - removed + added == curr as sets") {
  Rng rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    auto p = make_url_diff_profile();
    SegmentMetadata meta;
    std::unordered_set<std::string> prev;
    const int n = rng.range(1, 8);
    for (int i = 0; i < n; ++i) {
      const std::string text = join(synth_lines(rng, rng.range(1, 6)));
      std::unordered_set<std::string> curr;
      for (const auto& u : extract_urls(text)) curr.insert(u);

      auto out = p->block(text_block(text, day_ts(i), std::to_string(i)), meta);
      REQUIRE(out.has_value());
      std::unordered_set<std::string> reconstructed = prev;
      for (const auto& u : (*out)["removed_urls"]) reconstructed.erase(u.get<std::string>());
      for (const auto& u : (*out)["added_urls"]) reconstructed.insert(u.get<std::string>());
      REQUIRE(reconstructed == curr);
      prev = std::move(curr);
    }
  }
}

// --- line diff / editdiff -------------------------------------------------------

TEST_CASE("split/join are exact inverses") {
  for (const std::string s : {"", "a", "a\nb", "a\nb\n", "\n", "\n\n", "x\n\ny"}) {
    CHECK(join_lines(split_lines(s)) == s);
  }
}

TEST_CASE("diff: remove-then-add for a changed line") {
  auto changes = diff_lines({"a", "b"}, {"a", "c"});
  REQUIRE(changes.size() == 2);
  CHECK(changes[0] == ChangeEntry{ChangeEntry::Type::Remove, "b"});
  CHECK(changes[1] == ChangeEntry{ChangeEntry::Type::Add, "c"});
}

TEST_CASE("diff: identical texts produce no changes") {
  CHECK(diff_lines({"a", "b"}, {"a", "b"}).empty());
  CHECK(diff_lines({}, {}).empty());
}

TEST_CASE("diff soundness on randomized line edits") {
  Rng rng(53);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> prev = synth_lines(rng, rng.range(0, 30));
    std::vector<std::string> curr = prev;
    // Duplicate lines on purpose: the replay anchoring has to cope.
    if (!prev.empty() && rng.range(0, 1)) curr.push_back(prev[rng.below(prev.size())]);
    mutate_lines(rng, curr);
    const auto changes = diff_lines(prev, curr);
    REQUIRE(replay_changes(prev, changes) == curr);
  }
}

TEST_CASE("diff handles duplicate-heavy sequences") {
  const std::vector<std::string> prev{"b", "x", "b"}, curr{"b", "x"};
  CHECK(replay_changes(prev, diff_lines(prev, curr)) == curr);

  const std::vector<std::string> p2{"a"}, c2{"a", "b"};
  CHECK(replay_changes(p2, diff_lines(p2, c2)) == c2);

  const std::vector<std::string> p3{"x", "a"}, c3{"a", "x"};
  CHECK(replay_changes(p3, diff_lines(p3, c3)) == c3);

  const std::vector<std::string> p4{"x", "c", "x", "c"}, c4{"x", "c", "x", "c", "Z"};
  CHECK(replay_changes(p4, diff_lines(p4, c4)) == c4);
}

TEST_CASE("editdiff: first revision is consumed and dropped") {
  auto p = make_edit_diff_profile();
  auto out = run_profile(*p, {text_block("a\nb", day_ts(0), "1")});
  CHECK(out.empty());
}

TEST_CASE("editdiff: emits the change schema with a null summary") {
  auto p = make_edit_diff_profile();
  auto out = run_profile(*p, {text_block("a\nb", day_ts(0), "1"),
                              text_block("a\nc", day_ts(1), "2")});
  REQUIRE(out.size() == 1);
  std::vector<std::string> keys;
  for (const auto& [k, v] : out[0].items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"changes", "summary", "timestamp"});
  CHECK(out[0]["summary"].is_null());
  CHECK(out[0]["timestamp"] == day_ts(1));
  CHECK(out[0]["changes"] ==
        Json::parse(R"([{"type":"remove","content":"b"},{"type":"add","content":"c"}])"));
}

TEST_CASE("editdiff: identical adjacent revisions emit empty changes") {
  auto p = make_edit_diff_profile();
  auto out = run_profile(*p, {text_block("same\ntext", day_ts(0), "1"),
                              text_block("same\ntext", day_ts(1), "2")});
  REQUIRE(out.size() == 1);
  CHECK(out[0]["changes"] == Json::array());
}

TEST_CASE("editdiff changes replay to the target text across a revision chain") {
  Rng rng(59);
  auto p = make_edit_diff_profile();
  SegmentMetadata meta;
  std::vector<std::string> lines = synth_lines(rng, 10);
  std::string prev_text = join(lines);
  p->block(text_block(prev_text, day_ts(0), "0"), meta);
  for (int i = 1; i < 20; ++i) {
    mutate_lines(rng, lines);
    const std::string curr_text = join(lines);
    auto out = p->block(text_block(curr_text, day_ts(i), std::to_string(i)), meta);
    REQUIRE(out.has_value());
    const auto changes = changes_from_json((*out)["changes"]);
    CHECK(join_lines(replay_changes(split_lines(prev_text), changes)) == curr_text);
    prev_text = curr_text;
  }
}

// --- registry -------------------------------------------------------------------

TEST_CASE("profile registry parses names and arguments") {
  CHECK(parse_profile_spec("snapshot")()->name() == "snapshot");
  CHECK(parse_profile_spec("snapshot:90")()->name() == "snapshot");
  CHECK(parse_profile_spec("links")()->name() == "links");
  CHECK(parse_profile_spec("urldiff")()->name() == "urldiff");
  CHECK(parse_profile_spec("editdiff")()->name() == "editdiff");
  CHECK_THROWS_AS(parse_profile_spec("nosuch"), UnknownProfileError);
  CHECK_THROWS_AS(parse_profile_spec("snapshot:zero"), UnknownProfileError);
  CHECK_THROWS_AS(parse_profile_spec("snapshot:0"), UnknownProfileError);
  CHECK_THROWS_AS(parse_profile_spec("links:arg"), UnknownProfileError);
  try {
    parse_profile_spec("bogus");
  } catch (const UnknownProfileError& e) {
    CHECK(std::string(e.what()).find("snapshot") != std::string::npos);
    CHECK(std::string(e.what()).find("editdiff") != std::string::npos);
  }
}
