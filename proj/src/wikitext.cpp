#include "revarc/wikitext.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace revarc {

namespace {

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i])))
      return false;
  return true;
}

std::string strip_templates(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  int depth = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (i + 1 < text.size() && text[i] == '{' && text[i + 1] == '{') {
      ++depth;
      i += 2;
      continue;
    }
    if (depth > 0 && i + 1 < text.size() && text[i] == '}' && text[i + 1] == '}') {
      --depth;
      i += 2;
      continue;
    }
    if (depth == 0) out.push_back(text[i]);
    ++i;
  }
  // An unclosed {{ swallows the rest of the text.
  return out;
}

std::string strip_refs(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '<' && starts_with_ci(text.substr(i), "<ref") &&
        (i + 4 >= text.size() || !std::isalnum(static_cast<unsigned char>(text[i + 4])))) {
      const std::size_t close = text.find('>', i);
      if (close == std::string_view::npos) return out;  // unclosed tag: drop the rest
      if (text[close - 1] == '/') {
        i = close + 1;  // <ref ... />
        continue;
      }
      // <ref ...> ... </ref>
      std::size_t end = close + 1;
      while (end < text.size()) {
        if (text[end] == '<' && starts_with_ci(text.substr(end), "</ref")) {
          const std::size_t gt = text.find('>', end);
          end = (gt == std::string_view::npos) ? text.size() : gt + 1;
          break;
        }
        ++end;
      }
      i = end;
      continue;
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_url_char(char c) {
  if (std::isspace(static_cast<unsigned char>(c))) return false;
  switch (c) {
    case '<': case '>': case '[': case ']': case '"': case '{': case '}':
    case '|': case '\\': case '^': case '`':
      return false;
    default:
      return true;
  }
}

struct UniqueList {
  std::vector<std::string>* out;
  std::unordered_set<std::string> seen;

  void add(std::string_view v) {
    if (v.empty()) return;
    std::string s(v);
    if (seen.insert(s).second) out->push_back(std::move(s));
  }
};

}  // namespace

LinkExtraction extract_links(std::string_view wikitext) {
  LinkExtraction r;
  if (wikitext.empty()) return r;

  const std::string no_templates = strip_templates(wikitext);
  const std::string text = strip_refs(no_templates);

  UniqueList externals{&r.external_links, {}};
  UniqueList internals{&r.internal_links, {}};
  UniqueList images{&r.images, {}};

  std::string& clean = r.clean_text;
  clean.reserve(text.size());

  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    // [[Target|label]] — internal link or image
    if (i + 1 < n && text[i] == '[' && text[i + 1] == '[') {
      const std::size_t close = text.find("]]", i + 2);
      if (close == std::string_view::npos) {
        clean.append(text, i, 2);
        i += 2;
        continue;
      }
      const std::string_view inner(text.data() + i + 2, close - (i + 2));
      const std::size_t bar = inner.find('|');
      const std::string_view target =
          trim(bar == std::string_view::npos ? inner : inner.substr(0, bar));
      const std::string_view label =
          bar == std::string_view::npos ? std::string_view{} : trim(inner.substr(bar + 1));
      if (starts_with_ci(target, "File:") || starts_with_ci(target, "Image:")) {
        images.add(target);  // images contribute nothing to the clean text
      } else if (!target.empty()) {
        internals.add(target);
        clean.append(label.empty() ? target : label);
      }
      i = close + 2;
      continue;
    }
    // [http(s)://target label] — bracketed external link
    if (text[i] == '[' &&
        (starts_with_ci(text.substr(i), "[http://") || starts_with_ci(text.substr(i), "[https://"))) {
      const std::size_t close = text.find(']', i + 1);
      if (close == std::string_view::npos) {
        clean.push_back(text[i]);
        ++i;
        continue;
      }
      const std::string_view inner = trim(std::string_view(text.data() + i + 1, close - (i + 1)));
      const std::size_t sp = inner.find(' ');
      const std::string_view target = inner.substr(0, sp);
      const std::string_view label =
          sp == std::string_view::npos ? std::string_view{} : trim(inner.substr(sp + 1));
      externals.add(target);
      clean.append(label.empty() ? target : label);
      i = close + 1;
      continue;
    }
    // bare URL
    if ((text[i] == 'h' || text[i] == 'H') &&
        (starts_with_ci(text.substr(i), "http://") || starts_with_ci(text.substr(i), "https://"))) {
      std::size_t end = i;
      while (end < n && is_url_char(text[end])) ++end;
      const std::string_view url(text.data() + i, end - i);
      externals.add(url);
      clean.append(url);
      i = end;
      continue;
    }
    clean.push_back(text[i]);
    ++i;
  }
  return r;
}

std::vector<std::string> extract_urls(std::string_view wikitext) {
  const LinkExtraction r = extract_links(wikitext);
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& u : r.external_links)
    if (seen.insert(u).second) out.push_back(u);
  for (const auto& u : r.internal_links)
    if (seen.insert(u).second) out.push_back(u);
  return out;
}

}  // namespace revarc
