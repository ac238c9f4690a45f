#include "revarc/config.hpp"

#include "revarc/errors.hpp"

namespace revarc {

void BuildConfig::validate() const {
  if (output_dir.empty()) throw UsageError("output_dir must be set");
  if (num_workers < 1) throw UsageError("num_workers must be >= 1");
  if (warehouse_size_limit < kMinWarehouseSizeLimit)
    throw UsageError("warehouse_size_limit must be >= 1 MiB");
  if (compression_level < 1 || compression_level > 9)
    throw UsageError("compression_level must be in [1, 9]");
  if (memory_budget_per_worker == 0)
    throw UsageError("memory_budget_per_worker must be positive");
  if (max_line_bytes == 0) throw UsageError("max_line_bytes must be positive");
}

Json BuildConfig::to_json() const {
  Json j = Json::object();
  j["output_dir"] = output_dir.string();
  j["num_workers"] = num_workers;
  j["warehouse_size_limit"] = warehouse_size_limit;
  j["memory_budget_per_worker"] = memory_budget_per_worker;
  j["compression_level"] = compression_level;
  j["max_line_bytes"] = max_line_bytes;
  return j;
}

}  // namespace revarc
