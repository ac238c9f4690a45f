#include "revarc/line_diff.hpp"

#include <algorithm>
#include <cstddef>

#include "revarc/errors.hpp"

namespace revarc {

namespace {

enum class Op { Keep, Remove, Add };

struct ScriptEntry {
  Op op;
  std::size_t index;  // index into prev (Keep/Remove) or curr (Add)
};

// Beyond this many diagonal steps the diff degrades to a full rewrite, which
// stays replay-sound, just not minimal. Keeps the trace under ~16 MB.
constexpr std::size_t kMaxEditDistance = 1024;

// Greedy forward Myers diff with a full trace. Inputs are the trimmed
// middles (common prefix/suffix removed by the caller).
bool myers_script(const std::vector<std::string>& a, const std::vector<std::string>& b,
                  std::vector<ScriptEntry>& out) {
  const std::size_t n = a.size(), m = b.size();
  const std::size_t max_d = std::min(n + m, kMaxEditDistance);
  const std::size_t width = 2 * max_d + 1;
  const std::size_t offset = max_d;

  std::vector<std::vector<long>> trace;
  std::vector<long> v(width, 0);

  long found_d = -1;
  for (std::size_t d = 0; d <= max_d; ++d) {
    for (long k = -static_cast<long>(d); k <= static_cast<long>(d); k += 2) {
      long x;
      if (k == -static_cast<long>(d) ||
          (k != static_cast<long>(d) && v[offset + k - 1] < v[offset + k + 1])) {
        x = v[offset + k + 1];
      } else {
        x = v[offset + k - 1] + 1;
      }
      long y = x - k;
      while (x < static_cast<long>(n) && y < static_cast<long>(m) &&
             a[static_cast<std::size_t>(x)] == b[static_cast<std::size_t>(y)]) {
        ++x;
        ++y;
      }
      v[offset + k] = x;
      if (x >= static_cast<long>(n) && y >= static_cast<long>(m)) {
        found_d = static_cast<long>(d);
        break;
      }
    }
    trace.push_back(v);
    if (found_d >= 0) break;
  }
  if (found_d < 0) return false;

  // Backtrack from (n, m).
  std::vector<ScriptEntry> rev;
  long x = static_cast<long>(n), y = static_cast<long>(m);
  for (long d = found_d; d > 0; --d) {
    const auto& pv = trace[static_cast<std::size_t>(d - 1)];
    const long k = x - y;
    long prev_k;
    if (k == -d || (k != d && pv[offset + k - 1] < pv[offset + k + 1])) {
      prev_k = k + 1;
    } else {
      prev_k = k - 1;
    }
    const long px = pv[offset + prev_k];
    const long py = px - prev_k;
    while (x > px && y > py) {
      rev.push_back({Op::Keep, static_cast<std::size_t>(x - 1)});
      --x;
      --y;
    }
    if (x == px) {
      rev.push_back({Op::Add, static_cast<std::size_t>(y - 1)});  // down: insert b[py]
      --y;
    } else {
      rev.push_back({Op::Remove, static_cast<std::size_t>(x - 1)});  // right: delete a[px]
      --x;
    }
  }
  while (x > 0 && y > 0) {
    rev.push_back({Op::Keep, static_cast<std::size_t>(x - 1)});
    --x;
    --y;
  }
  while (x > 0) {
    rev.push_back({Op::Remove, static_cast<std::size_t>(x - 1)});
    --x;
  }
  while (y > 0) {
    rev.push_back({Op::Add, static_cast<std::size_t>(y - 1)});
    --y;
  }
  out.assign(rev.rbegin(), rev.rend());
  return true;
}

}  // namespace

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      return out;
    }
    out.emplace_back(text.substr(start, nl - start));
    start = nl + 1;
  }
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out.push_back('\n');
    out += lines[i];
  }
  return out;
}

std::vector<ChangeEntry> diff_lines(const std::vector<std::string>& prev,
                                    const std::vector<std::string>& curr) {
  // Trim common prefix and suffix; they never appear in the change list.
  std::size_t pre = 0;
  while (pre < prev.size() && pre < curr.size() && prev[pre] == curr[pre]) ++pre;
  std::size_t suf = 0;
  while (suf < prev.size() - pre && suf < curr.size() - pre &&
         prev[prev.size() - 1 - suf] == curr[curr.size() - 1 - suf])
    ++suf;

  const std::vector<std::string> a(prev.begin() + pre, prev.end() - suf);
  const std::vector<std::string> b(curr.begin() + pre, curr.end() - suf);

  std::vector<ScriptEntry> script;
  if (!myers_script(a, b, script)) {
    // Edit distance too large: full rewrite of the middle.
    script.clear();
    for (std::size_t i = 0; i < a.size(); ++i) script.push_back({Op::Remove, i});
    for (std::size_t j = 0; j < b.size(); ++j) script.push_back({Op::Add, j});
  }

  // Compile the script into replayable changes. `commons` holds the kept
  // prev lines seen since the last hunk; a hunk whose removes would collide
  // with them (or that has no removes at all while commons are pending)
  // re-anchors by emitting remove+add pairs for the offending prefix.
  std::vector<ChangeEntry> out;
  std::vector<const std::string*> commons;
  // The prefix context counts as flushed: replay copies it only via the tail
  // rule or remove scans, and scans start at index 0 of prev, so prefix lines
  // are unflushed commons too.
  for (std::size_t i = 0; i < pre; ++i) commons.push_back(&prev[i]);

  std::size_t si = 0;
  while (si < script.size()) {
    if (script[si].op == Op::Keep) {
      commons.push_back(&a[script[si].index]);
      ++si;
      continue;
    }
    // A hunk: maximal run of non-keeps, removes before adds.
    std::vector<const std::string*> dels, adds;
    while (si < script.size() && script[si].op != Op::Keep) {
      if (script[si].op == Op::Remove)
        dels.push_back(&a[script[si].index]);
      else
        adds.push_back(&b[script[si].index]);
      ++si;
    }

    if (dels.empty()) {
      // Pure insertion: all pending commons must be re-anchored or the adds
      // would land before them on replay.
      for (const auto* c : commons) {
        out.push_back({ChangeEntry::Type::Remove, *c});
        out.push_back({ChangeEntry::Type::Add, *c});
      }
    } else {
      // The replay scan for the first remove stops at the first match; any
      // pending common equal to it must be re-anchored first.
      std::size_t flush_through = 0;  // count of commons to re-anchor
      for (std::size_t t = 0; t < commons.size(); ++t)
        if (*commons[t] == *dels.front()) flush_through = t + 1;
      for (std::size_t t = 0; t < flush_through; ++t) {
        out.push_back({ChangeEntry::Type::Remove, *commons[t]});
        out.push_back({ChangeEntry::Type::Add, *commons[t]});
      }
    }
    commons.clear();
    for (const auto* d : dels) out.push_back({ChangeEntry::Type::Remove, *d});
    for (const auto* ad : adds) out.push_back({ChangeEntry::Type::Add, *ad});
  }
  return out;
}

std::vector<std::string> replay_changes(const std::vector<std::string>& prev,
                                        const std::vector<ChangeEntry>& changes) {
  std::vector<std::string> out;
  std::size_t i = 0;
  for (const auto& ch : changes) {
    if (ch.type == ChangeEntry::Type::Remove) {
      while (i < prev.size() && prev[i] != ch.content) {
        out.push_back(prev[i]);
        ++i;
      }
      if (i == prev.size())
        throw ValidationError("replay: remove entry not found in source text: " + ch.content);
      ++i;  // skip the removed line
    } else {
      out.push_back(ch.content);
    }
  }
  for (; i < prev.size(); ++i) out.push_back(prev[i]);
  return out;
}

Json changes_to_json(const std::vector<ChangeEntry>& changes) {
  Json arr = Json::array();
  for (const auto& ch : changes) {
    Json e = Json::object();
    e["type"] = ch.type == ChangeEntry::Type::Add ? "add" : "remove";
    e["content"] = ch.content;
    arr.push_back(std::move(e));
  }
  return arr;
}

std::vector<ChangeEntry> changes_from_json(const Json& j) {
  std::vector<ChangeEntry> out;
  if (!j.is_array()) throw ValidationError("changes must be an array");
  for (const auto& e : j) {
    const std::string type = e.at("type").get<std::string>();
    ChangeEntry ch;
    ch.type = type == "add" ? ChangeEntry::Type::Add : ChangeEntry::Type::Remove;
    if (type != "add" && type != "remove")
      throw ValidationError("unknown change type: " + type);
    ch.content = e.at("content").get<std::string>();
    out.push_back(std::move(ch));
  }
  return out;
}

}  // namespace revarc
