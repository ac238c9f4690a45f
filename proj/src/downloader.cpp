#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "revarc/downloader.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include "revarc/log.hpp"

namespace fs = std::filesystem;

namespace revarc {

namespace {

// --- SHA-1 -----------------------------------------------------------------

struct Sha1Stream {
  EVP_MD_CTX* ctx;
  Sha1Stream() : ctx(EVP_MD_CTX_new()) { EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr); }
  ~Sha1Stream() { EVP_MD_CTX_free(ctx); }
  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx, data, n); }
  void reset() { EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr); }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    static const char* digits = "0123456789abcdef";
    std::string out(len * 2, '0');
    for (unsigned i = 0; i < len; ++i) {
      out[2 * i] = digits[md[i] >> 4];
      out[2 * i + 1] = digits[md[i] & 0xf];
    }
    return out;
  }
};

// --- URL handling ------------------------------------------------------------

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;    // possibly empty, no trailing slash
};

UrlParts split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw UsageError("not an absolute http(s) URL: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw UsageError("unsupported URL scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  UrlParts parts;
  if (path_start == std::string::npos) {
    parts.origin = url;
  } else {
    parts.origin = url.substr(0, path_start);
    parts.path = url.substr(path_start);
    while (!parts.path.empty() && parts.path.back() == '/') parts.path.pop_back();
  }
  return parts;
}

std::unique_ptr<httplib::Client> make_client(const std::string& origin,
                                             const DownloadOptions& opts) {
  auto cli = std::make_unique<httplib::Client>(origin);
  cli->set_connection_timeout(opts.connect_timeout);
  cli->set_read_timeout(opts.read_timeout);
  cli->set_follow_location(true);
  for (const char* var : {"https_proxy", "HTTPS_PROXY", "http_proxy", "HTTP_PROXY"}) {
    if (const char* proxy = std::getenv(var)) {
      try {
        const UrlParts p = split_url(proxy);
        const auto colon = p.origin.rfind(':');
        const auto host_start = p.origin.find("://") + 3;
        if (colon != std::string::npos && colon > host_start) {
          cli->set_proxy(p.origin.substr(host_start, colon - host_start),
                         std::stoi(p.origin.substr(colon + 1)));
        }
      } catch (...) {
        // Unparseable proxy setting: ignore.
      }
      break;
    }
  }
  return cli;
}

// --- pattern registry --------------------------------------------------------

struct PatternRule {
  std::string substring;
  std::string suffix;
};

std::optional<PatternRule> pattern_rule(const std::string& pattern) {
  if (pattern == "ehd") return PatternRule{"pages-meta-history", ".bz2"};
  return std::nullopt;
}

}  // namespace

std::vector<std::string> supported_patterns() { return {"ehd"}; }

std::string sha1_hex(std::string_view data) {
  Sha1Stream h;
  h.update(data.data(), data.size());
  return h.hex();
}

std::string sha1_hex_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  Sha1Stream h;
  char buf[64 * 1024];
  while (in) {
    in.read(buf, sizeof(buf));
    const auto got = in.gcount();
    if (got > 0) h.update(buf, static_cast<std::size_t>(got));
  }
  return h.hex();
}

std::vector<DumpFileDescriptor> list_files(const std::string& base_url, const std::string& wiki,
                                           const std::string& date, const std::string& pattern) {
  if (date.size() != 8 || !std::all_of(date.begin(), date.end(),
                                       [](char c) { return c >= '0' && c <= '9'; }))
    throw UsageError("date must be YYYYMMDD, got: " + date);

  const auto rule = pattern_rule(pattern);
  if (!rule) {
    std::string msg = "unknown pattern '" + pattern + "'; supported:";
    for (const auto& p : supported_patterns()) msg += " " + p;
    throw UnknownPatternError(msg);
  }

  const UrlParts base = split_url(base_url);
  const std::string index_path = base.path + "/" + wiki + "/" + date + "/dumpstatus.json";

  DownloadOptions opts;
  auto cli = make_client(base.origin, opts);
  auto res = cli->Get(index_path);
  if (!res)
    throw HttpError("GET " + base.origin + index_path + " failed: " +
                    httplib::to_string(res.error()));
  if (res->status != 200)
    throw HttpError("GET " + base.origin + index_path + " returned " +
                    std::to_string(res->status));

  Json index;
  try {
    index = Json::parse(res->body);
  } catch (const Json::parse_error& e) {
    throw HttpError(std::string("invalid dump status index: ") + e.what());
  }

  std::vector<DumpFileDescriptor> out;
  const auto jobs = index.find("jobs");
  if (jobs == index.end() || !jobs->is_object())
    throw HttpError("dump status index has no jobs object");

  for (const auto& [job_name, job] : jobs->items()) {
    if (!job.is_object()) continue;
    const auto files = job.find("files");
    if (files == job.end() || !files->is_object()) continue;

    std::vector<DumpFileDescriptor> matched;
    for (const auto& [fname, finfo] : files->items()) {
      if (fname.find(rule->substring) == std::string::npos) continue;
      if (!rule->suffix.empty() && !fname.ends_with(rule->suffix)) continue;
      DumpFileDescriptor d;
      d.file_name = fs::path(fname).filename().string();
      d.job_name = job_name;
      if (finfo.is_object()) {
        if (finfo.contains("size") && finfo["size"].is_number())
          d.size_bytes = finfo["size"].get<std::uint64_t>();
        if (finfo.contains("sha1") && finfo["sha1"].is_string())
          d.sha1 = finfo["sha1"].get<std::string>();
        if (finfo.contains("url") && finfo["url"].is_string()) {
          const std::string u = finfo["url"].get<std::string>();
          d.url = u.starts_with("http") ? u : base.origin + u;
        }
      }
      if (d.url.empty())
        d.url = base.origin + base.path + "/" + wiki + "/" + date + "/" + d.file_name;
      matched.push_back(std::move(d));
    }
    if (matched.empty()) continue;

    const std::string status =
        job.contains("status") && job["status"].is_string() ? job["status"].get<std::string>() : "";
    if (status != "done")
      throw JobNotFinishedError("job " + job_name + " is not finished (status: " +
                                (status.empty() ? "unknown" : status) + ")");
    for (auto& d : matched) out.push_back(std::move(d));
  }

  if (out.empty())
    throw ValidationError("no files matching pattern '" + pattern + "' in " + wiki + "/" + date);
  std::sort(out.begin(), out.end(),
            [](const DumpFileDescriptor& a, const DumpFileDescriptor& b) {
              return a.file_name < b.file_name;
            });
  return out;
}

// ---------------------------------------------------------------------------
// download

namespace {

constexpr int kHardConnectionCap = 3;  // public mirror gateway rule

bool file_complete(const fs::path& p, const DumpFileDescriptor& d) {
  std::error_code ec;
  if (!fs::exists(p, ec)) return false;
  if (d.size_bytes && fs::file_size(p, ec) != *d.size_bytes) return false;
  if (d.sha1 && sha1_hex_file(p) != *d.sha1) return false;
  return true;
}

DownloadResult fetch_one(const DumpFileDescriptor& d, const fs::path& out_dir,
                         const DownloadOptions& opts) {
  DownloadResult result;
  result.descriptor = d;

  if (d.file_name.empty() || d.file_name.find('/') != std::string::npos ||
      d.file_name.find('\\') != std::string::npos || d.file_name == "..") {
    result.error = "unsafe file name: " + d.file_name;
    return result;
  }
  const fs::path final_path = out_dir / d.file_name;
  result.path = final_path;

  if (file_complete(final_path, d)) {
    result.status = DownloadResult::Status::Skipped;
    return result;
  }

  const fs::path part_path = out_dir / (d.file_name + ".part");
  const UrlParts url = split_url(d.url);

  int content_attempts = 0;       // full-body attempts (checksum mismatches retry once)
  int transient_retries = 0;      // 503 / network errors, exponential backoff
  while (content_attempts < 2) {
    std::uint64_t resume_from = 0;
    {
      std::error_code ec;
      if (fs::exists(part_path, ec)) resume_from = fs::file_size(part_path, ec);
    }

    Sha1Stream hasher;
    if (resume_from > 0) {
      // Hash what we already have so the final digest covers the whole body.
      std::ifstream in(part_path, std::ios::binary);
      char buf[64 * 1024];
      while (in) {
        in.read(buf, sizeof(buf));
        if (in.gcount() > 0) hasher.update(buf, static_cast<std::size_t>(in.gcount()));
      }
    }

    std::ofstream out(part_path, resume_from > 0 ? std::ios::binary | std::ios::app
                                                 : std::ios::binary | std::ios::trunc);
    if (!out) {
      result.error = "cannot open " + part_path.string();
      return result;
    }

    auto cli = make_client(url.origin, opts);
    httplib::Headers headers;
    if (resume_from > 0)
      headers.emplace("Range", "bytes=" + std::to_string(resume_from) + "-");

    std::uint64_t received = 0;
    int status = 0;
    bool range_honored = true;
    auto res = cli->Get(
        url.path, headers,
        [&](const httplib::Response& response) {
          status = response.status;
          if (status == 200 && resume_from > 0) {
            // Server ignored the range: restart the body from scratch.
            range_honored = false;
            out.close();
            out.open(part_path, std::ios::binary | std::ios::trunc);
            hasher.reset();
          }
          return status == 200 || status == 206;
        },
        [&](const char* data, std::size_t len) {
          out.write(data, static_cast<std::streamsize>(len));
          hasher.update(data, len);
          received += len;
          return out.good();
        });
    out.close();
    result.bytes_transferred += received;

    if (!res && status == 0) {
      // Network-level failure; back off and retry, keeping the partial body.
      if (++transient_retries > opts.max_503_retries) {
        result.error = "network error: " + httplib::to_string(res.error());
        return result;
      }
      std::this_thread::sleep_for(opts.backoff_base * (1 << (transient_retries - 1)));
      continue;
    }
    if (status == 503) {
      if (++transient_retries > opts.max_503_retries) {
        result.error = "server kept returning 503";
        return result;
      }
      std::this_thread::sleep_for(opts.backoff_base * (1 << (transient_retries - 1)));
      continue;
    }
    if (status == 416) {
      // Stale or oversized partial: start over without it.
      std::error_code ec;
      fs::remove(part_path, ec);
      if (++transient_retries > opts.max_503_retries) {
        result.error = "range not satisfiable and retries exhausted";
        return result;
      }
      continue;
    }
    if (status != 200 && status != 206) {
      result.error = "HTTP " + std::to_string(status) + " for " + d.url;
      return result;
    }

    ++content_attempts;
    const std::uint64_t total =
        (status == 206 && range_honored) ? resume_from + received : received;

    std::string failure;
    if (d.size_bytes && total != *d.size_bytes)
      failure = "size mismatch: got " + std::to_string(total) + ", expected " +
                std::to_string(*d.size_bytes);
    if (failure.empty() && d.sha1) {
      const std::string got = hasher.hex();
      if (got != *d.sha1) failure = "sha1 mismatch: got " + got + ", expected " + *d.sha1;
    }
    if (!failure.empty()) {
      std::error_code ec;
      fs::remove(part_path, ec);
      result.error = failure;
      Logger::global().warn("download_retry",
                            {{"file", d.file_name}, {"reason", failure},
                             {"attempt", content_attempts}});
      continue;  // retried once with a clean slate, then failed
    }

    std::error_code ec;
    fs::rename(part_path, final_path, ec);
    if (ec) {
      result.error = "rename failed: " + ec.message();
      return result;
    }
    result.status = DownloadResult::Status::Downloaded;
    result.error.clear();
    return result;
  }
  return result;  // error holds the last failure
}

}  // namespace

std::vector<DownloadResult> download(const std::vector<DumpFileDescriptor>& descriptors,
                                     const fs::path& out_dir, const DownloadOptions& options) {
  fs::create_directories(out_dir);

  // The cap is a gateway rule, not a tuning knob: never exceed 3 in-flight
  // transfers no matter what the caller asked for.
  const int workers = std::clamp(options.workers, 1, kHardConnectionCap);

  std::vector<DownloadResult> results(descriptors.size());
  std::atomic<std::size_t> next{0};

  auto run = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= descriptors.size()) break;
      results[i] = fetch_one(descriptors[i], out_dir, options);
      Logger::global().info(
          "download_file",
          {{"file", descriptors[i].file_name},
           {"status", results[i].status == DownloadResult::Status::Downloaded ? "downloaded"
                      : results[i].status == DownloadResult::Status::Skipped  ? "skipped"
                                                                              : "failed"},
           {"bytes", results[i].bytes_transferred}});
    }
  };

  std::vector<std::thread> pool;
  const int n = static_cast<int>(std::min<std::size_t>(workers, descriptors.size()));
  pool.reserve(n);
  for (int i = 0; i < n; ++i) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  return results;
}

Json download_results_to_json(const std::vector<DownloadResult>& results) {
  Json files = Json::array();
  std::uint64_t transferred = 0;
  std::size_t downloaded = 0, skipped = 0, failed = 0;
  for (const auto& r : results) {
    Json e = Json::object();
    e["file"] = r.descriptor.file_name;
    e["url"] = r.descriptor.url;
    e["path"] = r.path.string();
    switch (r.status) {
      case DownloadResult::Status::Downloaded:
        e["status"] = "downloaded";
        ++downloaded;
        break;
      case DownloadResult::Status::Skipped:
        e["status"] = "skipped";
        ++skipped;
        break;
      default:
        e["status"] = "failed";
        ++failed;
        break;
    }
    e["bytes_transferred"] = r.bytes_transferred;
    if (!r.error.empty()) e["error"] = r.error;
    transferred += r.bytes_transferred;
    files.push_back(std::move(e));
  }
  Json j = Json::object();
  j["downloaded"] = downloaded;
  j["skipped"] = skipped;
  j["failed"] = failed;
  j["bytes_transferred"] = transferred;
  j["files"] = std::move(files);
  return j;
}

}  // namespace revarc
