// revarc: converts revision-history XML dumps into size-capped, randomly
// accessible JSONL warehouses, and streams existing warehouses through
// modifier profiles to build derived datasets.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "revarc/builder.hpp"
#include "revarc/downloader.hpp"
#include "revarc/errors.hpp"
#include "revarc/log.hpp"
#include "revarc/modifier.hpp"
#include "revarc/profiles.hpp"
#include "revarc/warehouse.hpp"

namespace {

using revarc::Json;

// Exit codes: 0 success, 1 usage error, 2 input validation failure,
// 3 partial failure (outputs produced, failures in the report), 4 fatal.
enum ExitCode {
  kOk = 0,
  kUsage = 1,
  kValidation = 2,
  kPartial = 3,
  kFatal = 4,
};

void emit_report(const Json& report, const std::string& report_path) {
  if (report_path.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    std::ofstream out(report_path, std::ios::trunc);
    if (!out) throw revarc::FatalError("cannot write report to " + report_path);
    out << report.dump(2) << "\n";
  }
}

std::optional<std::set<std::int64_t>> parse_namespaces(const std::string& arg) {
  if (arg.empty() || arg == "all") return std::nullopt;
  std::set<std::int64_t> out;
  std::stringstream ss(arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.insert(std::stoll(tok));
    } catch (...) {
      throw revarc::UsageError("invalid namespace list: " + arg);
    }
  }
  return out;
}

int cmd_download(const std::string& base_url, const std::string& wiki, const std::string& date,
                 const std::string& pattern, const std::string& output, int workers,
                 const std::string& report_path) {
  auto files = revarc::list_files(base_url, wiki, date, pattern);
  revarc::DownloadOptions opts;
  opts.workers = workers;
  auto results = revarc::download(files, output, opts);
  Json report = revarc::download_results_to_json(results);
  emit_report(report, report_path);
  const bool any_failed = report["failed"].get<std::size_t>() > 0;
  const bool any_ok = report["downloaded"].get<std::size_t>() +
                          report["skipped"].get<std::size_t>() >
                      0;
  if (any_failed) return any_ok ? kPartial : kFatal;
  return kOk;
}

int cmd_build(const std::string& input, const revarc::BuildConfig& cfg,
              const revarc::BuildOptions& opts, std::size_t limit_files,
              const std::string& report_path) {
  auto worklist = revarc::preload_dumps(std::filesystem::path(input));
  if (limit_files > 0 && worklist.size() > limit_files) worklist.resize(limit_files);
  revarc::BuildReport report = revarc::build(worklist, cfg, opts);
  emit_report(report.to_json(), report_path);
  return report.files_failed.empty() ? kOk : kPartial;
}

int cmd_modify(const std::string& input, const std::vector<std::string>& profile_specs,
               const revarc::BuildConfig& cfg, const revarc::ModifyOptions& opts,
               const std::string& report_path) {
  std::vector<revarc::ProfileFactory> factories;
  for (const auto& spec : profile_specs) factories.push_back(revarc::parse_profile_spec(spec));
  auto worklist = revarc::modify_preload(input);
  revarc::ModifyReport report = revarc::modify_start(worklist, factories, cfg, opts);
  emit_report(report.to_json(), report_path);
  return report.error_count == 0 ? kOk : kPartial;
}

int cmd_inspect(const std::string& input, std::size_t sample_n, const std::string& article,
                bool as_json) {
  if (!article.empty()) {
    // Article lookup: random access straight through the sidecar offsets.
    auto meta = revarc::read_metadata(input);
    Json blocks = Json::array();
    bool found = false;
    for (const auto& w : meta.warehouses) {
      for (const auto& s : w.segments) {
        if (s.article_id != article) continue;
        found = true;
        if (s.num_revisions == 0 || s.byte_length == 0) continue;
        revarc::SegmentReader reader(w.warehouse_path, s.byte_start, s.byte_length);
        std::string line;
        while (reader.next_line(line)) {
          if (as_json) {
            blocks.push_back(Json::parse(line));
          } else {
            std::fwrite(line.data(), 1, line.size(), stdout);
          }
        }
      }
    }
    if (!found) throw revarc::ValidationError("article " + article + " not found in " + input);
    if (as_json) {
      Json out = Json::object();
      out["article_id"] = article;
      out["blocks"] = std::move(blocks);
      std::cout << out.dump(2) << "\n";
    }
    return kOk;
  }

  revarc::StructureReport report = revarc::inspect_structure(input, sample_n);
  if (as_json) {
    std::cout << report.to_json().dump(2) << "\n";
  } else {
    std::printf("warehouses:          %llu\n",
                static_cast<unsigned long long>(report.warehouse_count));
    std::printf("segments (articles): %llu\n",
                static_cast<unsigned long long>(report.segment_count));
    std::printf("revisions (blocks):  %llu\n",
                static_cast<unsigned long long>(report.total_revisions));
    std::printf("compressed bytes:    %llu\n",
                static_cast<unsigned long long>(report.compressed_bytes));
    std::printf("uncompressed bytes:  %llu\n",
                static_cast<unsigned long long>(report.uncompressed_bytes));
    std::printf("block key paths (from %zu sampled blocks):\n", report.sampled_blocks);
    for (const auto& p : report.key_paths) std::printf("  %s\n", p.c_str());
    if (!report.violations.empty()) {
      std::printf("violations:\n");
      for (const auto& v : report.violations) std::printf("  %s\n", v.c_str());
    }
  }
  return report.violations.empty() ? kOk : kValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"revarc: revision-history warehouse builder and modifier"};
  app.require_subcommand(1);

  // download
  auto* dl = app.add_subcommand("download", "Download revision-history dump files");
  std::string dl_wiki, dl_date, dl_pattern = "ehd", dl_output;
  std::string dl_base = "https://dumps.wikimedia.org";
  std::string dl_report;
  int dl_workers = 3;
  dl->add_option("--wiki", dl_wiki, "Wiki name, e.g. enwiki")->required();
  dl->add_option("--date", dl_date, "Snapshot date, YYYYMMDD")->required();
  dl->add_option("--pattern", dl_pattern, "File selection pattern (default: ehd)");
  dl->add_option("--output", dl_output, "Directory for downloaded files")->required();
  dl->add_option("--workers", dl_workers, "Parallel transfers (hard-capped at 3)");
  dl->add_option("--base-url", dl_base, "Dump mirror base URL");
  dl->add_option("--report", dl_report, "Write the JSON report here instead of stdout");

  // build
  auto* bd = app.add_subcommand("build", "Build warehouses from XML dumps");
  std::string bd_input, bd_output, bd_namespaces = "0", bd_report;
  int bd_workers = 1, bd_level = 6;
  std::uint64_t bd_size = revarc::kDefaultWarehouseSizeLimit;
  std::uint64_t bd_inflight = 0;
  std::size_t bd_limit_files = 0;
  bool bd_overwrite = false;
  bd->add_option("--input", bd_input, "Directory of dump files (.xml/.bz2/.gz)")->required();
  bd->add_option("--output", bd_output, "Dataset output directory")->required();
  bd->add_option("--workers", bd_workers, "Worker count (one dump file per worker)");
  bd->add_option("--warehouse-size", bd_size,
                 "Warehouse size limit in compressed bytes (accepts 512m, 1g)")
      ->transform(CLI::AsSizeValue(false));
  bd->add_option("--limit-files", bd_limit_files, "Process only the first N files");
  bd->add_option("--namespaces", bd_namespaces,
                 "Comma-separated namespaces to keep (default 0; 'all' keeps every page)");
  bd->add_option("--compression-level", bd_level, "gzip level 1-9");
  bd->add_option("--max-inflight-bytes", bd_inflight,
                 "Cap on summed size of in-flight input files")
      ->transform(CLI::AsSizeValue(false));
  bd->add_flag("--overwrite", bd_overwrite, "Replace a non-empty output directory");
  bd->add_option("--report", bd_report, "Write the JSON report here instead of stdout");

  // modify
  auto* md = app.add_subcommand("modify", "Stream a dataset through modifier profiles");
  std::string md_input, md_output, md_report;
  std::vector<std::string> md_profiles;
  int md_workers = 1, md_level = 6;
  std::uint64_t md_size = revarc::kDefaultWarehouseSizeLimit;
  bool md_strict = false, md_overwrite = false, md_omit_empty = false;
  md->add_option("--input", md_input, "Existing dataset directory")->required();
  md->add_option("--output", md_output, "New dataset directory")->required();
  md->add_option("--profile", md_profiles,
                 "Profile NAME[:ARG], applied in order (repeatable)")
      ->required();
  md->add_option("--workers", md_workers, "Worker count (one segment per worker at a time)");
  md->add_option("--warehouse-size", md_size, "Warehouse size limit in compressed bytes")
      ->transform(CLI::AsSizeValue(false));
  md->add_option("--compression-level", md_level, "gzip level 1-9");
  md->add_flag("--strict", md_strict, "Abort on the first block error");
  md->add_flag("--omit-empty-segments", md_omit_empty,
               "Drop segments whose blocks were all dropped");
  md->add_flag("--overwrite", md_overwrite, "Replace a non-empty output directory");
  md->add_option("--report", md_report, "Write the JSON report here instead of stdout");

  // inspect
  auto* in = app.add_subcommand("inspect", "Preview dataset structure or one article");
  std::string in_input, in_article;
  std::size_t in_sample = 10;
  bool in_json = false;
  in->add_option("--input", in_input, "Dataset directory")->required();
  in->add_option("--sample", in_sample, "Blocks to sample for key paths (default 10)");
  in->add_option("--article", in_article, "Print this article's blocks via offset lookup");
  in->add_flag("--json", in_json, "Emit a single JSON document on stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (dl->parsed())
      return cmd_download(dl_base, dl_wiki, dl_date, dl_pattern, dl_output, dl_workers,
                          dl_report);
    if (bd->parsed()) {
      revarc::BuildConfig cfg;
      cfg.output_dir = bd_output;
      cfg.num_workers = bd_workers;
      cfg.warehouse_size_limit = bd_size;
      cfg.compression_level = bd_level;
      revarc::BuildOptions opts;
      opts.keep_namespaces = parse_namespaces(bd_namespaces);
      opts.overwrite = bd_overwrite;
      if (bd_inflight > 0) opts.max_inflight_input_bytes = bd_inflight;
      return cmd_build(bd_input, cfg, opts, bd_limit_files, bd_report);
    }
    if (md->parsed()) {
      revarc::BuildConfig cfg;
      cfg.output_dir = md_output;
      cfg.num_workers = md_workers;
      cfg.warehouse_size_limit = md_size;
      cfg.compression_level = md_level;
      revarc::ModifyOptions opts;
      opts.strict = md_strict;
      opts.overwrite = md_overwrite;
      opts.omit_empty_segments = md_omit_empty;
      return cmd_modify(md_input, md_profiles, cfg, opts, md_report);
    }
    if (in->parsed()) return cmd_inspect(in_input, in_sample, in_article, in_json);
  } catch (const revarc::UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const revarc::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  } catch (const revarc::FatalError& e) {
    std::fprintf(stderr, "fatal: %s\n", e.what());
    return kFatal;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fatal: %s\n", e.what());
    return kFatal;
  }
  return kUsage;
}
