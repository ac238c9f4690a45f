#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace revarc {

// Simplified wikitext link extraction. Recognized markup:
//   [[Target]] / [[Target|label]]          internal links
//   [[File:...]] / [[Image:...]]           images
//   [http(s)://target label] / bare URLs   external links
// Templates {{...}} are stripped wholesale, <ref> tags are removed, nested
// links are not supported. Lists are deduplicated in first-occurrence order.
struct LinkExtraction {
  std::string clean_text;
  std::vector<std::string> external_links;
  std::vector<std::string> internal_links;
  std::vector<std::string> images;
};

LinkExtraction extract_links(std::string_view wikitext);

// External + internal link targets in first-occurrence order (externals
// first), deduplicated. The URL universe used by the URL-diff profile.
std::vector<std::string> extract_urls(std::string_view wikitext);

}  // namespace revarc
