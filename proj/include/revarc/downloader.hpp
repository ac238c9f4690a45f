#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "revarc/errors.hpp"
#include "revarc/json.hpp"

namespace revarc {

struct DumpFileDescriptor {
  std::string url;        // absolute http(s) URL
  std::string file_name;  // no path separators
  std::optional<std::uint64_t> size_bytes;
  std::optional<std::string> sha1;  // lowercase hex, when advertised
  std::string job_name;
};

class UnknownPatternError : public UsageError {
 public:
  using UsageError::UsageError;
};

class JobNotFinishedError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class HttpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fetches {base_url}/{wiki}/{date}/dumpstatus.json and selects the files of
// the full edit-history job. Pattern "ehd" matches file names containing
// "pages-meta-history" with a .bz2 suffix; the owning job must be done.
std::vector<DumpFileDescriptor> list_files(const std::string& base_url, const std::string& wiki,
                                           const std::string& date, const std::string& pattern);

std::vector<std::string> supported_patterns();

struct DownloadResult {
  enum class Status { Downloaded, Skipped, Failed };
  DumpFileDescriptor descriptor;
  std::filesystem::path path;
  Status status = Status::Failed;
  std::uint64_t bytes_transferred = 0;  // body bytes actually received
  std::string error;
};

struct DownloadOptions {
  int workers = 3;  // hard-capped at 3 in-flight transfers regardless
  int max_503_retries = 6;
  std::chrono::milliseconds backoff_base{250};
  std::chrono::seconds read_timeout{120};
  std::chrono::seconds connect_timeout{15};
};

// Downloads each descriptor into out_dir with at most min(workers, 3)
// transfers in flight. Files are fetched to a temp name, sha1-verified when
// advertised, then renamed; complete files are skipped; partial transfers
// resume via byte ranges when the server cooperates. Results come back in
// descriptor order.
std::vector<DownloadResult> download(const std::vector<DumpFileDescriptor>& descriptors,
                                     const std::filesystem::path& out_dir,
                                     const DownloadOptions& options = {});

Json download_results_to_json(const std::vector<DownloadResult>& results);

// Lowercase hex SHA-1 helpers (OpenSSL-backed).
std::string sha1_hex(std::string_view data);
std::string sha1_hex_file(const std::filesystem::path& path);

}  // namespace revarc
