#include "revarc/warehouse.hpp"

#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace fs = std::filesystem;

namespace revarc {

namespace {

constexpr std::size_t kIoChunk = 64 * 1024;

std::string warehouse_name(int worker, int seq) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "block_%03d_%05d.jsonl.gz", worker, seq);
  return buf;
}

std::string sidecar_name_for(const std::string& warehouse) {
  // block_XXX_YYYYY.jsonl.gz -> block_XXX_YYYYY.metadata.jsonl
  const std::string suffix = ".jsonl.gz";
  return warehouse.substr(0, warehouse.size() - suffix.size()) + ".metadata.jsonl";
}

[[noreturn]] void throw_io(const std::string& what) {
  throw StoreIoError(what + ": " + std::strerror(errno));
}

struct FileHandle {
  FILE* f = nullptr;

  void open(const fs::path& p, const char* mode) {
    f = std::fopen(p.string().c_str(), mode);
    if (!f) throw_io("cannot open " + p.string());
  }
  void write(const void* data, std::size_t n) {
    if (n && std::fwrite(data, 1, n, f) != n) throw_io("write failed");
  }
  void flush() {
    if (std::fflush(f) != 0) throw_io("flush failed");
  }
  void close() {
    if (f) {
      if (std::fclose(f) != 0) {
        f = nullptr;
        throw_io("close failed");
      }
      f = nullptr;
    }
  }
  ~FileHandle() {
    if (f) std::fclose(f);
  }
};

// Streams one RFC 1952 gzip member into a file, counting compressed bytes.
// The header is pinned (mtime 0) so identical input produces identical frames.
class GzipMemberEncoder {
 public:
  void begin(FileHandle* out, int level) {
    out_ = out;
    std::memset(&zs_, 0, sizeof(zs_));
    if (deflateInit2(&zs_, level, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
      throw StoreIoError("deflateInit2 failed");
    std::memset(&header_, 0, sizeof(header_));
    header_.os = 3;  // unix
    deflateSetHeader(&zs_, &header_);
    compressed_ = 0;
    active_ = true;
  }

  void write(std::string_view data) {
    zs_.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs_.avail_in = static_cast<uInt>(data.size());
    pump(Z_NO_FLUSH);
  }

  std::uint64_t finish() {
    zs_.next_in = nullptr;
    zs_.avail_in = 0;
    pump(Z_FINISH);
    deflateEnd(&zs_);
    active_ = false;
    return compressed_;
  }

  void abort() {
    if (active_) {
      deflateEnd(&zs_);
      active_ = false;
    }
  }

  std::uint64_t compressed_bytes() const { return compressed_; }
  bool active() const { return active_; }

 private:
  void pump(int flush) {
    unsigned char buf[kIoChunk];
    int rc;
    do {
      zs_.next_out = buf;
      zs_.avail_out = sizeof(buf);
      rc = deflate(&zs_, flush);
      if (rc == Z_STREAM_ERROR) throw StoreIoError("deflate failed");
      const std::size_t produced = sizeof(buf) - zs_.avail_out;
      out_->write(buf, produced);
      compressed_ += produced;
    } while (zs_.avail_out == 0 || (flush == Z_FINISH && rc != Z_STREAM_END));
  }

  FileHandle* out_ = nullptr;
  z_stream zs_{};
  gz_header header_{};
  std::uint64_t compressed_ = 0;
  bool active_ = false;
};

}  // namespace

// ---------------------------------------------------------------------------
// WarehouseWriter

struct WarehouseWriter::Impl {
  fs::path dir;
  int worker;
  BuildConfig cfg;
  int seq;

  FileHandle wh;
  FileHandle sidecar;
  std::string wh_name;
  bool file_open = false;
  std::uint64_t file_bytes = 0;      // finalized compressed bytes in current file
  std::uint64_t file_segments = 0;   // finalized segments in current file
  std::uint64_t total_bytes = 0;
  std::uint64_t warehouses = 0;      // non-empty pairs
  std::vector<std::string> created;

  bool seg_open = false;
  std::string seg_article_id, seg_title;
  std::optional<std::int64_t> seg_ns;
  GzipMemberEncoder enc;
  std::uint64_t seg_uncompressed = 0;
  std::uint64_t seg_revisions = 0;
  std::optional<std::string> seg_first_ts, seg_last_ts;

  void open_file() {
    wh_name = warehouse_name(worker, seq);
    wh.open(dir / wh_name, "wb");
    sidecar.open(dir / sidecar_name_for(wh_name), "wb");
    created.push_back(wh_name);
    file_open = true;
    file_bytes = 0;
    file_segments = 0;
  }

  void seal_file() {
    wh.close();
    sidecar.close();
    if (file_segments == 0) {
      // Nothing landed here; drop the empty pair.
      std::error_code ec;
      fs::remove(dir / wh_name, ec);
      fs::remove(dir / sidecar_name_for(wh_name), ec);
      created.pop_back();
    } else {
      ++warehouses;
    }
    file_open = false;
    ++seq;
  }
};

WarehouseWriter::WarehouseWriter(fs::path dataset_dir, int worker_tag, const BuildConfig& config,
                                 int start_sequence)
    : impl_(std::make_unique<Impl>()) {
  impl_->dir = std::move(dataset_dir);
  impl_->worker = worker_tag;
  impl_->cfg = config;
  impl_->seq = start_sequence;
}

WarehouseWriter::~WarehouseWriter() {
  if (impl_ && impl_->seg_open) impl_->enc.abort();
}

void WarehouseWriter::begin_segment(std::string article_id, std::string title,
                                    std::optional<std::int64_t> ns) {
  auto& im = *impl_;
  if (im.seg_open) throw StoreUsageError("begin_segment: a segment is already open");
  if (!im.file_open) im.open_file();
  im.seg_article_id = std::move(article_id);
  im.seg_title = std::move(title);
  im.seg_ns = ns;
  im.seg_uncompressed = 0;
  im.seg_revisions = 0;
  im.seg_first_ts.reset();
  im.seg_last_ts.reset();
  im.enc.begin(&im.wh, im.cfg.compression_level);
  im.seg_open = true;
}

void WarehouseWriter::append_line(std::string_view line,
                                  std::optional<std::string_view> timestamp) {
  auto& im = *impl_;
  if (!im.seg_open) throw StoreUsageError("append_line: no open segment");
  if (line.empty() || line.back() != '\n')
    throw StoreUsageError("append_line: input must be one LF-terminated line");
  if (line.size() > im.cfg.max_line_bytes)
    throw OversizeLineError("line of " + std::to_string(line.size()) +
                            " bytes exceeds the single-line cap of " +
                            std::to_string(im.cfg.max_line_bytes));
  im.enc.write(line);
  im.seg_uncompressed += line.size();
  im.seg_revisions += 1;
  if (timestamp) {
    if (!im.seg_first_ts) im.seg_first_ts = std::string(*timestamp);
    im.seg_last_ts = std::string(*timestamp);
  }
}

SegmentMetadata WarehouseWriter::end_segment(Json custom) {
  auto& im = *impl_;
  if (!im.seg_open) throw StoreUsageError("end_segment: no open segment");

  const std::uint64_t frame_start = im.file_bytes;
  const std::uint64_t frame_len = im.enc.finish();
  im.wh.flush();
  im.seg_open = false;

  SegmentMetadata m;
  m.warehouse = im.wh_name;
  m.article_id = std::move(im.seg_article_id);
  m.title = std::move(im.seg_title);
  m.ns = im.seg_ns;
  m.byte_start = frame_start;
  m.byte_length = frame_len;
  m.uncompressed_bytes = im.seg_uncompressed;
  m.num_revisions = im.seg_revisions;
  if (im.seg_revisions > 0) {
    m.first_timestamp = im.seg_first_ts;
    m.last_timestamp = im.seg_last_ts;
  }
  m.custom = std::move(custom);

  const std::string line = serialize_metadata_line(m);
  im.sidecar.write(line.data(), line.size());
  im.sidecar.flush();

  im.file_bytes += frame_len;
  im.total_bytes += frame_len;
  im.file_segments += 1;

  if (im.file_bytes >= im.cfg.warehouse_size_limit) im.seal_file();
  return m;
}

void WarehouseWriter::abort_segment() {
  auto& im = *impl_;
  if (!im.seg_open) return;
  im.enc.abort();
  im.seg_open = false;
  // Partial frame bytes may already be on disk; cut back to the last
  // finalized segment boundary.
  im.wh.flush();
  const fs::path p = im.dir / im.wh_name;
  std::error_code ec;
  fs::resize_file(p, im.file_bytes, ec);
  if (ec) throw StoreIoError("truncate after aborted segment failed: " + ec.message());
  if (std::fseek(im.wh.f, 0, SEEK_END) != 0) throw_io("seek after truncate failed");
}

void WarehouseWriter::roll() {
  auto& im = *impl_;
  if (im.seg_open) throw StoreUsageError("roll: segment still open");
  if (im.file_open && im.file_segments > 0) im.seal_file();
}

void WarehouseWriter::close() {
  auto& im = *impl_;
  if (im.seg_open) throw StoreUsageError("close: segment still open");
  if (im.file_open) im.seal_file();
}

bool WarehouseWriter::segment_open() const { return impl_->seg_open; }
int WarehouseWriter::next_sequence() const { return impl_->seq; }
std::uint64_t WarehouseWriter::bytes_written_total() const { return impl_->total_bytes; }
std::uint64_t WarehouseWriter::warehouses_written() const { return impl_->warehouses; }
const std::vector<std::string>& WarehouseWriter::files_created() const {
  return impl_->created;
}

// ---------------------------------------------------------------------------
// Gzip member decoding

namespace {

// Shared inflate-to-lines machinery for SegmentReader and WarehouseScanner.
// In multi-member mode it restarts after every member end and records the
// compressed span plus decoded end offset of each member, so lines can be
// attributed to the member they came from.
struct InflateLines {
  std::ifstream in;
  std::string context;  // for error messages
  z_stream zs{};
  bool zinit = false;
  bool multi_member = false;
  unsigned char inbuf[kIoChunk];
  unsigned char outbuf[kIoChunk];

  std::string pending;            // decoded bytes not yet returned
  std::size_t pending_pos = 0;
  std::uint64_t pending_base = 0;  // decoded-space offset of pending[0]
  std::uint64_t decoded_total = 0;

  std::uint64_t input_limit = 0;  // total compressed bytes we may consume
  std::uint64_t input_fed = 0;    // bytes handed to inflate so far
  bool eof_input = false;
  bool all_done = false;
  bool stream_end = false;  // current member finished

  std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;  // compressed (start, len)
  std::vector<std::uint64_t> member_decoded_ends;
  std::uint64_t member_start = 0;
  std::size_t attribution_cursor = 0;

  void init(const fs::path& path, std::uint64_t offset, std::uint64_t limit, bool multi,
            std::string ctx) {
    context = std::move(ctx);
    multi_member = multi;
    in.open(path, std::ios::binary);
    if (!in) throw CorruptionError(context + ": cannot open " + path.string());
    if (offset > 0) in.seekg(static_cast<std::streamoff>(offset));
    input_limit = limit;
    std::memset(&zs, 0, sizeof(zs));
    if (inflateInit2(&zs, 15 + 16) != Z_OK)
      throw CorruptionError(context + ": inflateInit2 failed");
    zinit = true;
    if (limit == 0) all_done = true;  // empty file scans cleanly
  }

  ~InflateLines() {
    if (zinit) inflateEnd(&zs);
  }

  bool refill() {
    if (zs.avail_in > 0) return true;
    const std::uint64_t remaining = input_limit - input_fed;
    if (remaining == 0 || eof_input) return false;
    const std::size_t want =
        static_cast<std::size_t>(std::min<std::uint64_t>(remaining, kIoChunk));
    in.read(reinterpret_cast<char*>(inbuf), static_cast<std::streamsize>(want));
    const std::size_t got = static_cast<std::size_t>(in.gcount());
    if (got == 0) {
      eof_input = true;
      return false;
    }
    input_fed += got;
    zs.next_in = inbuf;
    zs.avail_in = static_cast<uInt>(got);
    return true;
  }

  // Appends more decoded bytes to pending. Returns false at the clean end of
  // all input.
  bool decode_more() {
    while (true) {
      if (all_done) return false;
      if (!refill()) {
        throw CorruptionError(context + ": frame truncated (unexpected end of input)");
      }
      zs.next_out = outbuf;
      zs.avail_out = sizeof(outbuf);
      const int rc = inflate(&zs, Z_NO_FLUSH);
      if (rc != Z_OK && rc != Z_STREAM_END && rc != Z_BUF_ERROR)
        throw CorruptionError(context + ": corrupt frame (" +
                              (zs.msg ? zs.msg : "inflate error") + ")");
      const std::size_t produced = sizeof(outbuf) - zs.avail_out;
      if (produced) {
        pending.append(reinterpret_cast<char*>(outbuf), produced);
        decoded_total += produced;
      }
      if (rc == Z_STREAM_END) {
        const std::uint64_t consumed = input_fed - zs.avail_in;
        spans.emplace_back(member_start, consumed - member_start);
        member_decoded_ends.push_back(decoded_total);
        member_start = consumed;
        if (multi_member) {
          if (zs.avail_in > 0 || refill()) {
            if (inflateReset(&zs) != Z_OK)
              throw CorruptionError(context + ": inflateReset failed");
          } else {
            all_done = true;
          }
        } else {
          if (zs.avail_in > 0 || input_fed < input_limit)
            throw CorruptionError(context + ": trailing bytes after frame end");
          all_done = true;
        }
      }
      if (produced > 0) return true;
      if (all_done) return false;
      // Otherwise we need more input; loop (refill throws at hard EOF).
    }
  }

  bool next_line(std::string& out, std::size_t* member_index) {
    while (true) {
      const auto nl = pending.find('\n', pending_pos);
      if (nl != std::string::npos) {
        out.assign(pending, pending_pos, nl - pending_pos + 1);
        const std::uint64_t line_end = pending_base + nl + 1;  // decoded-space offset
        pending_pos = nl + 1;
        if (pending_pos >= kIoChunk) {
          pending.erase(0, pending_pos);
          pending_base += pending_pos;
          pending_pos = 0;
        }
        if (member_index) {
          while (attribution_cursor < member_decoded_ends.size() &&
                 member_decoded_ends[attribution_cursor] < line_end)
            ++attribution_cursor;
          *member_index = attribution_cursor;
        }
        return true;
      }
      if (!decode_more()) {
        if (pending_pos < pending.size())
          throw CorruptionError(context + ": frame does not end with a newline");
        return false;
      }
    }
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// SegmentReader

struct SegmentReader::Impl {
  InflateLines inf;
};

SegmentReader::SegmentReader(const fs::path& warehouse_path, std::uint64_t byte_start,
                             std::uint64_t byte_length)
    : impl_(std::make_unique<Impl>()) {
  std::error_code ec;
  const std::uint64_t size = fs::file_size(warehouse_path, ec);
  if (ec) throw CorruptionError("cannot stat " + warehouse_path.string() + ": " + ec.message());
  if (byte_length == 0)
    throw CorruptionError("segment at " + warehouse_path.string() + " has zero byte_length");
  if (byte_start + byte_length > size)
    throw CorruptionError("segment coordinates out of range: " + warehouse_path.string() + " [" +
                          std::to_string(byte_start) + ", +" + std::to_string(byte_length) +
                          ") beyond file size " + std::to_string(size));
  impl_->inf.init(warehouse_path, byte_start, byte_length, /*multi=*/false,
                  "segment " + warehouse_path.filename().string() + "@" +
                      std::to_string(byte_start));
}

SegmentReader::~SegmentReader() = default;

bool SegmentReader::next_line(std::string& out) { return impl_->inf.next_line(out, nullptr); }

// ---------------------------------------------------------------------------
// WarehouseScanner

struct WarehouseScanner::Impl {
  InflateLines inf;
};

WarehouseScanner::WarehouseScanner(const fs::path& warehouse_path)
    : impl_(std::make_unique<Impl>()) {
  std::error_code ec;
  const std::uint64_t size = fs::file_size(warehouse_path, ec);
  if (ec) throw CorruptionError("cannot stat " + warehouse_path.string() + ": " + ec.message());
  impl_->inf.init(warehouse_path, 0, size, /*multi=*/true,
                  "warehouse " + warehouse_path.filename().string());
}

WarehouseScanner::~WarehouseScanner() = default;

bool WarehouseScanner::next_line(std::string& out, std::size_t& member_index) {
  return impl_->inf.next_line(out, &member_index);
}

const std::vector<std::pair<std::uint64_t, std::uint64_t>>& WarehouseScanner::member_spans()
    const {
  return impl_->inf.spans;
}

// ---------------------------------------------------------------------------
// Dataset metadata

std::size_t DatasetMetadata::total_segments() const {
  std::size_t n = 0;
  for (const auto& w : warehouses) n += w.segments.size();
  return n;
}

std::uint64_t DatasetMetadata::total_revisions() const {
  std::uint64_t n = 0;
  for (const auto& w : warehouses)
    for (const auto& s : w.segments) n += s.num_revisions;
  return n;
}

DatasetMetadata read_metadata(const fs::path& dataset_dir) {
  if (!fs::exists(dataset_dir) || !fs::is_directory(dataset_dir))
    throw DatasetError("dataset directory not found: " + dataset_dir.string());

  std::vector<fs::path> warehouses;
  for (const auto& entry : fs::directory_iterator(dataset_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > 9 && name.ends_with(".jsonl.gz")) warehouses.push_back(entry.path());
  }
  if (warehouses.empty())
    throw DatasetError("no warehouses found in " + dataset_dir.string());
  std::sort(warehouses.begin(), warehouses.end());

  DatasetMetadata out;
  for (const auto& whp : warehouses) {
    WarehouseGroup g;
    g.warehouse = whp.filename().string();
    g.warehouse_path = whp;
    g.sidecar_path = dataset_dir / sidecar_name_for(g.warehouse);
    if (!fs::exists(g.sidecar_path))
      throw DatasetError("missing metadata sidecar for " + g.warehouse);
    g.file_size = fs::file_size(whp);

    std::ifstream in(g.sidecar_path);
    if (!in) throw DatasetError("cannot open sidecar " + g.sidecar_path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      SegmentMetadata m;
      try {
        m = parse_metadata_line(line);
      } catch (const ValidationError& e) {
        throw DatasetError(g.sidecar_path.string() + ":" + std::to_string(lineno) + ": " +
                           e.what());
      }
      g.segments.push_back(std::move(m));
    }

    // Frames must tile the file exactly: ordered, contiguous, starting at 0.
    std::uint64_t expected = 0;
    for (std::size_t i = 0; i < g.segments.size(); ++i) {
      const auto& s = g.segments[i];
      if (s.warehouse != g.warehouse)
        out.violations.push_back(g.warehouse + " segment " + std::to_string(i) +
                                 " names a different warehouse: " + s.warehouse);
      if (s.byte_start != expected)
        out.violations.push_back(
            g.warehouse + ": segment " + std::to_string(i) + " (article " + s.article_id +
            ") starts at " + std::to_string(s.byte_start) + ", expected " +
            std::to_string(expected) +
            (i > 0 ? " (previous segment article " + g.segments[i - 1].article_id + ")" : ""));
      if (s.byte_length == 0)
        out.violations.push_back(g.warehouse + ": segment " + std::to_string(i) +
                                 " has zero byte_length");
      if (s.byte_start + s.byte_length > g.file_size)
        out.violations.push_back(g.warehouse + ": segment " + std::to_string(i) +
                                 " extends past end of file");
      expected = s.byte_start + s.byte_length;
    }
    if (expected != g.file_size)
      out.violations.push_back(g.warehouse + ": segments cover " + std::to_string(expected) +
                               " bytes but the file has " + std::to_string(g.file_size));

    out.warehouses.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structure preview

void collect_key_paths(const Json& value, const std::string& prefix,
                       std::set<std::string>& out) {
  if (value.is_object()) {
    for (const auto& [k, v] : value.items()) {
      const std::string path = prefix.empty() ? k : prefix + "." + k;
      out.insert(path);
      collect_key_paths(v, path, out);
    }
  } else if (value.is_array()) {
    for (const auto& v : value) collect_key_paths(v, prefix + "[]", out);
  }
}

StructureReport inspect_structure(const fs::path& dataset_dir, std::size_t sample_n) {
  const DatasetMetadata meta = read_metadata(dataset_dir);

  StructureReport r;
  r.warehouse_count = meta.warehouses.size();
  r.violations = meta.violations;
  for (const auto& w : meta.warehouses) {
    r.compressed_bytes += w.file_size;
    r.segment_count += w.segments.size();
    for (const auto& s : w.segments) {
      r.total_revisions += s.num_revisions;
      r.uncompressed_bytes += s.uncompressed_bytes;
    }
  }

  std::size_t sampled = 0;
  for (const auto& w : meta.warehouses) {
    for (const auto& s : w.segments) {
      if (sampled >= sample_n) break;
      if (s.num_revisions == 0) continue;
      SegmentReader reader(w.warehouse_path, s.byte_start, s.byte_length);
      std::string line;
      while (sampled < sample_n && reader.next_line(line)) {
        Json j = Json::parse(line, nullptr, /*allow_exceptions=*/true);
        collect_key_paths(j, "", r.key_paths);
        ++sampled;
      }
    }
    if (sampled >= sample_n) break;
  }
  r.sampled_blocks = sampled;
  return r;
}

Json StructureReport::to_json() const {
  Json j = Json::object();
  j["warehouse_count"] = warehouse_count;
  j["segment_count"] = segment_count;
  j["total_revisions"] = total_revisions;
  j["compressed_bytes"] = compressed_bytes;
  j["uncompressed_bytes"] = uncompressed_bytes;
  j["sampled_blocks"] = sampled_blocks;
  j["key_paths"] = key_paths;
  j["violations"] = violations;
  return j;
}

// ---------------------------------------------------------------------------
// Manifest

void write_manifest(const fs::path& dataset_dir, const Json& manifest) {
  const fs::path p = dataset_dir / kManifestName;
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw StoreIoError("cannot write " + p.string());
  out << manifest.dump(2) << "\n";
  if (!out.good()) throw StoreIoError("write failed: " + p.string());
}

std::optional<Json> read_manifest(const fs::path& dataset_dir) {
  const fs::path p = dataset_dir / kManifestName;
  std::ifstream in(p);
  if (!in) return std::nullopt;
  try {
    Json j;
    in >> j;
    return j;
  } catch (const Json::exception&) {
    return std::nullopt;
  }
}

}  // namespace revarc
