#include "revarc/profiles.hpp"

#include <unordered_set>

#include "revarc/line_diff.hpp"
#include "revarc/timestamp.hpp"
#include "revarc/wikitext.hpp"

namespace revarc {

namespace {

std::string require_text(const Json& content, const char* profile) {
  if (content.is_object()) {
    auto it = content.find("text");
    if (it != content.end() && it->is_object()) {
      auto ti = it->find("#text");
      if (ti != it->end() && ti->is_string()) return ti->get<std::string>();
    }
  }
  throw ProfileError(std::string(profile) + ": block has no text.#text field");
}

std::string require_timestamp(const Json& content, const char* profile) {
  if (content.is_object()) {
    auto it = content.find("timestamp");
    if (it != content.end() && it->is_string()) return it->get<std::string>();
  }
  throw ProfileError(std::string(profile) + ": block has no timestamp field");
}

void copy_if_present(const Json& from, Json& to, const char* key) {
  auto it = from.find(key);
  if (it != from.end()) to[key] = *it;
}

class SnapshotProfile final : public ModifierProfile {
 public:
  explicit SnapshotProfile(SnapshotConfig cfg)
      : interval_seconds_(static_cast<std::int64_t>(cfg.interval_days) * 86400) {}

  std::string name() const override { return "snapshot"; }

  std::optional<Json> block(Json content, SegmentMetadata&) override {
    const std::string ts = require_timestamp(content, "snapshot");
    const auto t = parse_utc_timestamp(ts);
    if (!t) throw ProfileError("snapshot: unparseable timestamp: " + ts);
    if (last_kept_ && *t < *last_kept_ + interval_seconds_) return std::nullopt;
    last_kept_ = *t;
    return content;  // kept blocks pass through unchanged
  }

 private:
  std::int64_t interval_seconds_;
  std::optional<std::int64_t> last_kept_;
};

class LinkExtractProfile final : public ModifierProfile {
 public:
  std::string name() const override { return "links"; }

  std::optional<Json> block(Json content, SegmentMetadata&) override {
    const std::string text = require_text(content, "links");
    LinkExtraction ex = extract_links(text);
    Json out = Json::object();
    copy_if_present(content, out, "revision_id");
    out["clean_text"] = std::move(ex.clean_text);
    out["external_links"] = ex.external_links;
    out["internal_links"] = ex.internal_links;
    out["images"] = ex.images;
    return out;
  }
};

class UrlDiffProfile final : public ModifierProfile {
 public:
  std::string name() const override { return "urldiff"; }

  std::optional<Json> block(Json content, SegmentMetadata&) override {
    const std::string text = require_text(content, "urldiff");
    std::vector<std::string> urls = extract_urls(text);
    std::unordered_set<std::string> curr_set(urls.begin(), urls.end());

    Json added = Json::array();
    for (const auto& u : urls)
      if (!prev_set_.contains(u)) added.push_back(u);
    Json removed = Json::array();
    for (const auto& u : prev_urls_)
      if (!curr_set.contains(u)) removed.push_back(u);

    Json out = Json::object();
    copy_if_present(content, out, "article_id");
    copy_if_present(content, out, "revision_id");
    copy_if_present(content, out, "timestamp");
    out["added_urls"] = std::move(added);
    out["removed_urls"] = std::move(removed);

    prev_urls_ = std::move(urls);
    prev_set_ = std::move(curr_set);
    return out;
  }

 private:
  std::vector<std::string> prev_urls_;
  std::unordered_set<std::string> prev_set_;
};

class EditDiffProfile final : public ModifierProfile {
 public:
  std::string name() const override { return "editdiff"; }

  std::optional<Json> block(Json content, SegmentMetadata&) override {
    std::string text = require_text(content, "editdiff");
    const std::string ts = require_timestamp(content, "editdiff");
    if (!last_text_) {
      // The first revision only seeds the comparison state.
      last_text_ = std::move(text);
      return std::nullopt;
    }
    const auto changes = diff_lines(split_lines(*last_text_), split_lines(text));
    Json out = Json::object();
    out["changes"] = changes_to_json(changes);
    out["summary"] = nullptr;
    out["timestamp"] = ts;
    last_text_ = std::move(text);
    return out;
  }

 private:
  std::optional<std::string> last_text_;
};

}  // namespace

std::unique_ptr<ModifierProfile> make_snapshot_profile(SnapshotConfig config) {
  if (config.interval_days < 1) throw UsageError("snapshot interval_days must be >= 1");
  return std::make_unique<SnapshotProfile>(config);
}

std::unique_ptr<ModifierProfile> make_link_extract_profile() {
  return std::make_unique<LinkExtractProfile>();
}

std::unique_ptr<ModifierProfile> make_url_diff_profile() {
  return std::make_unique<UrlDiffProfile>();
}

std::unique_ptr<ModifierProfile> make_edit_diff_profile() {
  return std::make_unique<EditDiffProfile>();
}

std::vector<std::string> builtin_profile_names() {
  return {"snapshot[:days]", "links", "urldiff", "editdiff"};
}

ProfileFactory parse_profile_spec(const std::string& spec) {
  std::string name = spec;
  std::string arg;
  if (const auto colon = spec.find(':'); colon != std::string::npos) {
    name = spec.substr(0, colon);
    arg = spec.substr(colon + 1);
  }

  auto no_arg = [&](const char* profile) {
    if (!arg.empty())
      throw UnknownProfileError(std::string(profile) + " takes no argument: " + spec);
  };

  if (name == "snapshot") {
    SnapshotConfig cfg;
    if (!arg.empty()) {
      try {
        cfg.interval_days = std::stoi(arg);
      } catch (...) {
        throw UnknownProfileError("snapshot: invalid day count: " + arg);
      }
    }
    if (cfg.interval_days < 1) throw UnknownProfileError("snapshot: days must be >= 1");
    return [cfg] { return make_snapshot_profile(cfg); };
  }
  if (name == "links") {
    no_arg("links");
    return [] { return make_link_extract_profile(); };
  }
  if (name == "urldiff") {
    no_arg("urldiff");
    return [] { return make_url_diff_profile(); };
  }
  if (name == "editdiff") {
    no_arg("editdiff");
    return [] { return make_edit_diff_profile(); };
  }

  std::string msg = "unknown profile '" + name + "'; built-ins:";
  for (const auto& n : builtin_profile_names()) msg += " " + n;
  throw UnknownProfileError(msg);
}

}  // namespace revarc
