#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "revarc/config.hpp"
#include "revarc/json.hpp"
#include "revarc/segment_metadata.hpp"

namespace revarc {

// Per-block transformation with a per-segment lifecycle. Blocks flow as
// generic JSON objects so chained datasets with diverging schemas keep
// working. Returning nullopt from block() drops the block; metadata still
// flows. A profile instance's mutable state is scoped to one segment: the
// engine instantiates a fresh chain at every segment boundary.
class ModifierProfile {
 public:
  virtual ~ModifierProfile() = default;

  virtual std::string name() const = 0;

  virtual void on_segment_start(SegmentMetadata& meta) { (void)meta; }
  virtual std::optional<Json> block(Json content, SegmentMetadata& meta) = 0;
  virtual void on_segment_end(SegmentMetadata& meta) { (void)meta; }
};

using ProfileFactory = std::function<std::unique_ptr<ModifierProfile>()>;

// Raised by profiles on per-block failures; routed through the error policy
// (record-and-drop by default, abort in strict mode).
class ProfileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModifyWorkItem {
  std::filesystem::path warehouse_path;
  SegmentMetadata meta;
};

// Segment coordinates of an existing dataset: the unit of parallel work.
// Refuses datasets whose sidecars violate the contiguity invariant.
std::vector<ModifyWorkItem> modify_preload(const std::filesystem::path& dataset_dir);

struct ModifyErrorRecord {
  std::string warehouse;
  std::string article_id;
  std::string profile;  // empty for store-level errors
  std::string message;
};

struct ModifyReport {
  std::uint64_t segments_in = 0;
  std::uint64_t segments_out = 0;
  std::uint64_t blocks_in = 0;
  std::uint64_t blocks_out = 0;
  std::uint64_t blocks_dropped = 0;
  std::uint64_t warehouses_written = 0;
  double wall_time_seconds = 0;
  std::vector<std::pair<std::string, double>> profile_seconds;  // per profile, summed
  std::vector<ModifyErrorRecord> errors;
  std::uint64_t error_count = 0;

  Json to_json() const;
};

struct ModifyOptions {
  bool strict = false;               // abort the run on the first block error
  bool omit_empty_segments = false;  // drop segments whose blocks all dropped
  bool overwrite = false;
  std::size_t heartbeat_every = 500;
};

// Applies the profile chain to one block, in registration order. A drop
// short-circuits the remaining block hooks; metadata keeps flowing. Throws
// whatever the failing profile threw.
std::optional<Json> apply_chain(Json content, SegmentMetadata& meta,
                                const std::vector<std::unique_ptr<ModifierProfile>>& chain);

// Runs the modifying process over the worklist, writing a new dataset into
// config.output_dir. The output block multiset is independent of the worker
// count. In strict mode a failing block aborts and removes the output dir.
ModifyReport modify_start(const std::vector<ModifyWorkItem>& worklist,
                          const std::vector<ProfileFactory>& profiles, const BuildConfig& config,
                          const ModifyOptions& options = {});

}  // namespace revarc
