#pragma once

#include <memory>
#include <string>
#include <vector>

#include "revarc/errors.hpp"
#include "revarc/modifier.hpp"

namespace revarc {

// Keeps the first block of each segment, then only blocks at least
// interval_days past the last kept one. Kept blocks pass through unchanged.
struct SnapshotConfig {
  int interval_days = 180;
};
std::unique_ptr<ModifierProfile> make_snapshot_profile(SnapshotConfig config = {});

// Rewrites each block to {revision_id, clean_text, external_links,
// internal_links, images} using the simplified wikitext extractor.
std::unique_ptr<ModifierProfile> make_link_extract_profile();

// Emits per-revision URL-set differences against the previous revision:
// {article_id, revision_id, timestamp, added_urls, removed_urls}.
std::unique_ptr<ModifierProfile> make_url_diff_profile();

// Emits line diffs between adjacent revisions: {changes, summary, timestamp}
// with summary always null. The first revision of a segment only seeds the
// state and is dropped.
std::unique_ptr<ModifierProfile> make_edit_diff_profile();

class UnknownProfileError : public UsageError {
 public:
  using UsageError::UsageError;
};

// CLI-facing registry: "snapshot[:days]", "links", "urldiff", "editdiff".
// Throws UnknownProfileError (listing the built-ins) for anything else.
ProfileFactory parse_profile_spec(const std::string& spec);

std::vector<std::string> builtin_profile_names();

}  // namespace revarc
