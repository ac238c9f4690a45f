#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "revarc/json.hpp"

namespace revarc {

// Line-based diffing between adjacent revision texts. The emitted change
// list contains only {add, remove} entries and is constructed so that
// replay_changes can rebuild the target text from the source text alone:
// a remove entry copies source lines forward until it matches, then skips
// the match; an add entry appends its content. Where a minimal diff would
// be ambiguous under that replay rule (insertions after unflushed common
// lines, duplicate-line collisions), the preceding common lines are
// re-anchored as remove+add pairs.

struct ChangeEntry {
  enum class Type { Add, Remove };
  Type type;
  std::string content;

  bool operator==(const ChangeEntry&) const = default;
};

// Exact inverse pair: join_lines(split_lines(s)) == s for every string.
std::vector<std::string> split_lines(std::string_view text);
std::string join_lines(const std::vector<std::string>& lines);

std::vector<ChangeEntry> diff_lines(const std::vector<std::string>& prev,
                                    const std::vector<std::string>& curr);

// Applies changes to prev; throws ValidationError when a remove entry finds
// no matching line.
std::vector<std::string> replay_changes(const std::vector<std::string>& prev,
                                        const std::vector<ChangeEntry>& changes);

Json changes_to_json(const std::vector<ChangeEntry>& changes);
std::vector<ChangeEntry> changes_from_json(const Json& j);

}  // namespace revarc
