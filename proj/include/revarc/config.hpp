#pragma once

#include <cstdint>
#include <filesystem>

#include "revarc/json.hpp"

namespace revarc {

inline constexpr std::uint64_t kDefaultWarehouseSizeLimit = std::uint64_t{1} << 30;
inline constexpr std::uint64_t kMinWarehouseSizeLimit = std::uint64_t{1} << 20;
inline constexpr std::uint64_t kDefaultMaxLineBytes = std::uint64_t{512} << 20;

// Shared knobs for the building and modifying processes. The warehouse size
// limit is measured in compressed output bytes; rotation happens at segment
// boundaries once the limit is reached.
struct BuildConfig {
  std::filesystem::path output_dir;
  int num_workers = 1;
  std::uint64_t warehouse_size_limit = kDefaultWarehouseSizeLimit;
  std::uint64_t memory_budget_per_worker = std::uint64_t{1} << 30;  // advisory
  int compression_level = 6;
  std::uint64_t max_line_bytes = kDefaultMaxLineBytes;

  // Throws UsageError when a field is out of range.
  void validate() const;

  Json to_json() const;
};

}  // namespace revarc
