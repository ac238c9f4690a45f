#include "revarc/dump_reader.hpp"

#include <expat.h>

#include <boost/iostreams/filter/bzip2.hpp>
#include <boost/iostreams/filter/gzip.hpp>
#include <boost/iostreams/filtering_stream.hpp>
#include <cstring>
#include <deque>
#include <fstream>

#include "revarc/log.hpp"

namespace fs = std::filesystem;

namespace revarc {

namespace {

constexpr std::size_t kChunk = 64 * 1024;
constexpr const char* kWrapper = "<mediawiki>";
constexpr std::size_t kWrapperLen = 11;

std::optional<DumpCodec> codec_from_extension(const fs::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".bz2") return DumpCodec::Bz2Stream;
  if (ext == ".gz") return DumpCodec::GzipStream;
  if (ext == ".xml") return DumpCodec::PlainXml;
  return std::nullopt;
}

std::optional<DumpCodec> codec_from_magic(const unsigned char* b, std::size_t n) {
  if (n >= 3 && b[0] == 'B' && b[1] == 'Z' && b[2] == 'h') return DumpCodec::Bz2Stream;
  if (n >= 2 && b[0] == 0x1f && b[1] == 0x8b) return DumpCodec::GzipStream;
  // XML starts with '<' or leading whitespace / BOM.
  std::size_t i = 0;
  if (n >= 3 && b[0] == 0xef && b[1] == 0xbb && b[2] == 0xbf) i = 3;
  while (i < n && (b[i] == ' ' || b[i] == '\t' || b[i] == '\r' || b[i] == '\n')) ++i;
  if (i < n && b[i] == '<') return DumpCodec::PlainXml;
  return std::nullopt;
}

const char* codec_name(DumpCodec c) {
  switch (c) {
    case DumpCodec::Bz2Stream: return "bz2";
    case DumpCodec::GzipStream: return "gzip";
    default: return "plain-xml";
  }
}

bool is_page_boundary(char c) {
  return c == '>' || c == ' ' || c == '\t' || c == '\r' || c == '\n';
}

}  // namespace

DumpSource detect_dump_source(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open dump file: " + path.string());
  unsigned char head[8] = {};
  in.read(reinterpret_cast<char*>(head), sizeof(head));
  const std::size_t got = static_cast<std::size_t>(in.gcount());

  const auto by_ext = codec_from_extension(path);
  const auto by_magic = codec_from_magic(head, got);

  DumpSource src;
  src.path = path;
  if (by_magic && by_ext) {
    src.codec = *by_magic;
    if (*by_magic != *by_ext)
      src.codec_warning = std::string("extension suggests ") + codec_name(*by_ext) +
                          " but magic bytes say " + codec_name(*by_magic) +
                          "; using magic bytes";
  } else if (by_magic) {
    src.codec = *by_magic;
  } else if (by_ext) {
    src.codec = *by_ext;
    src.codec_warning = "magic bytes unrecognized; trusting extension";
  } else {
    throw UsageError("unrecognized codec for " + path.string() +
                     " (expected plain XML, bz2, or gzip)");
  }
  return src;
}

// ---------------------------------------------------------------------------

struct DumpReader::Impl {
  DumpSource source;
  DumpReaderOptions opts;

  std::ifstream file;
  boost::iostreams::filtering_istream in;

  XML_Parser parser = nullptr;
  std::deque<DumpEvent> events;
  std::vector<DumpError> errors;

  bool done = false;            // DumpEnd queued
  bool end_returned = false;
  bool input_eof = false;
  std::uint64_t stream_consumed = 0;  // decompressed bytes read so far
  std::int64_t parser_bias = 0;       // stream offset of the parser's byte 0

  // Recovery state: scanning raw bytes for the next <page.
  bool resyncing = false;
  std::string resync_buf;
  std::uint64_t resync_base = 0;

  enum class Abort { None, BadRoot };
  Abort abort = Abort::None;

  // --- element state machine ---
  enum class Field {
    None,
    PageTitle,
    PageNs,
    PageId,
    RevId,
    RevTimestamp,
    RevComment,
    RevFormat,
    RevText,
    RevSha1,
    CtrUsername,
    CtrId,
    CtrIp
  };
  int depth = 0;
  int skip_depth = 0;  // >0: ignoring a subtree rooted at that depth
  Field field = Field::None;

  bool in_page = false, in_revision = false, in_contributor = false;
  std::string page_id, page_title, page_ns_text;
  std::optional<std::int64_t> page_ns;
  bool header_done = false, page_filtered = false, article_emitted = false;

  std::string rev_id, rev_timestamp, rev_comment, rev_format, rev_text, rev_sha1;
  std::string ctr_username, ctr_id, ctr_ip;
  std::optional<std::string> text_bytes;
  bool text_deleted = false;
  bool has_comment = false, has_format = false, has_sha1 = false;
  bool has_username = false, has_ctr_id = false, has_ip = false;

  ~Impl() {
    if (parser) XML_ParserFree(parser);
  }

  void reset_element_state() {
    depth = 0;
    skip_depth = 0;
    field = Field::None;
    in_page = in_revision = in_contributor = false;
    header_done = page_filtered = article_emitted = false;
  }

  void reset_page_state() {
    page_id.clear();
    page_title.clear();
    page_ns_text.clear();
    page_ns.reset();
    header_done = page_filtered = article_emitted = false;
    reset_revision_state();
  }

  void reset_revision_state() {
    rev_id.clear();
    rev_timestamp.clear();
    rev_comment.clear();
    rev_format.clear();
    rev_text.clear();
    rev_sha1.clear();
    ctr_username.clear();
    ctr_id.clear();
    ctr_ip.clear();
    text_bytes.reset();
    text_deleted = false;
    has_comment = has_format = has_sha1 = false;
    has_username = has_ctr_id = has_ip = false;
  }

  void create_parser() {
    if (parser) XML_ParserFree(parser);
    parser = XML_ParserCreate(nullptr);
    if (!parser) throw FatalError("XML_ParserCreate failed");
    XML_SetUserData(parser, this);
    XML_SetElementHandler(parser, &Impl::on_start, &Impl::on_end);
    XML_SetCharacterDataHandler(parser, &Impl::on_text);
    reset_element_state();
  }

  std::uint64_t current_offset() const {
    const std::int64_t idx = parser ? static_cast<std::int64_t>(XML_GetCurrentByteIndex(parser)) : 0;
    const std::int64_t off = parser_bias + (idx < 0 ? 0 : idx);
    return off < 0 ? 0 : static_cast<std::uint64_t>(off);
  }

  // --- expat callbacks ---

  static void XMLCALL on_start(void* ud, const XML_Char* name, const XML_Char** atts) {
    static_cast<Impl*>(ud)->start_element(name, atts);
  }
  static void XMLCALL on_end(void* ud, const XML_Char* name) {
    static_cast<Impl*>(ud)->end_element(name);
  }
  static void XMLCALL on_text(void* ud, const XML_Char* s, int len) {
    static_cast<Impl*>(ud)->character_data(s, len);
  }

  static bool attr_deleted(const XML_Char** atts) {
    for (int i = 0; atts[i]; i += 2)
      if (std::strcmp(atts[i], "deleted") == 0) return true;
    return false;
  }

  void start_element(const XML_Char* name, const XML_Char** atts) {
    ++depth;
    if (skip_depth > 0) return;

    if (depth == 1) {
      if (std::strcmp(name, "mediawiki") != 0) {
        abort = Abort::BadRoot;
        XML_StopParser(parser, XML_FALSE);
      }
      return;
    }

    if (depth == 2) {
      if (std::strcmp(name, "page") == 0) {
        in_page = true;
        reset_page_state();
      } else {
        skip_depth = depth;  // siteinfo and friends
      }
      return;
    }

    if (!in_page) {
      skip_depth = depth;
      return;
    }

    if (depth == 3) {
      if (std::strcmp(name, "title") == 0) {
        field = Field::PageTitle;
      } else if (std::strcmp(name, "ns") == 0) {
        field = Field::PageNs;
      } else if (std::strcmp(name, "id") == 0) {
        field = Field::PageId;
      } else if (std::strcmp(name, "revision") == 0) {
        finalize_page_header();
        if (page_filtered) {
          skip_depth = depth;
        } else {
          in_revision = true;
          reset_revision_state();
        }
      } else {
        skip_depth = depth;  // redirect, restrictions, ...
      }
      return;
    }

    if (depth == 4 && in_revision) {
      if (std::strcmp(name, "id") == 0) {
        field = Field::RevId;
      } else if (std::strcmp(name, "timestamp") == 0) {
        field = Field::RevTimestamp;
      } else if (std::strcmp(name, "comment") == 0) {
        if (!attr_deleted(atts)) {
          has_comment = true;
          field = Field::RevComment;
        }
      } else if (std::strcmp(name, "format") == 0) {
        has_format = true;
        field = Field::RevFormat;
      } else if (std::strcmp(name, "sha1") == 0) {
        has_sha1 = true;
        field = Field::RevSha1;
      } else if (std::strcmp(name, "text") == 0) {
        field = Field::RevText;
        for (int i = 0; atts[i]; i += 2) {
          if (std::strcmp(atts[i], "bytes") == 0) text_bytes = std::string(atts[i + 1]);
          if (std::strcmp(atts[i], "deleted") == 0) text_deleted = true;
        }
      } else if (std::strcmp(name, "contributor") == 0) {
        in_contributor = true;
        // A deleted contributor carries no identity children.
      } else {
        skip_depth = depth;  // parentid, minor, model, origin, slots, ...
      }
      return;
    }

    if (depth == 5 && in_contributor) {
      if (std::strcmp(name, "username") == 0) {
        has_username = true;
        field = Field::CtrUsername;
      } else if (std::strcmp(name, "id") == 0) {
        has_ctr_id = true;
        field = Field::CtrId;
      } else if (std::strcmp(name, "ip") == 0) {
        has_ip = true;
        field = Field::CtrIp;
      } else {
        skip_depth = depth;
      }
      return;
    }

    skip_depth = depth;
  }

  void end_element(const XML_Char* name) {
    if (skip_depth > 0) {
      if (depth == skip_depth) skip_depth = 0;
      --depth;
      return;
    }

    if (depth == 4 && in_contributor && std::strcmp(name, "contributor") == 0)
      in_contributor = false;

    if (depth == 3 && in_revision && std::strcmp(name, "revision") == 0) {
      finalize_revision();
      in_revision = false;
    }

    if (depth == 2 && in_page && std::strcmp(name, "page") == 0) finalize_page();

    field = Field::None;
    --depth;
  }

  void character_data(const XML_Char* s, int len) {
    if (skip_depth > 0 || len <= 0) return;
    switch (field) {
      case Field::PageTitle: page_title.append(s, len); break;
      case Field::PageNs: page_ns_text.append(s, len); break;
      case Field::PageId: page_id.append(s, len); break;
      case Field::RevId: rev_id.append(s, len); break;
      case Field::RevTimestamp: rev_timestamp.append(s, len); break;
      case Field::RevComment: rev_comment.append(s, len); break;
      case Field::RevFormat: rev_format.append(s, len); break;
      case Field::RevText: rev_text.append(s, len); break;
      case Field::RevSha1: rev_sha1.append(s, len); break;
      case Field::CtrUsername: ctr_username.append(s, len); break;
      case Field::CtrId: ctr_id.append(s, len); break;
      case Field::CtrIp: ctr_ip.append(s, len); break;
      default: break;
    }
  }

  // --- event production ---

  void finalize_page_header() {
    if (header_done) return;
    header_done = true;

    if (!page_ns_text.empty()) {
      try {
        page_ns = std::stoll(page_ns_text);
      } catch (...) {
        page_ns.reset();
      }
    }
    if (page_id.empty()) {
      errors.push_back({current_offset(), page_title, "page is missing its <id>; skipped"});
      page_filtered = true;
      return;
    }
    // A missing <ns> counts as the main namespace.
    if (opts.keep_namespaces && !opts.keep_namespaces->contains(page_ns.value_or(0))) {
      page_filtered = true;
      return;
    }
    events.push_back(ArticleStart{page_id, page_title, page_ns});
    article_emitted = true;
  }

  void finalize_revision() {
    if (rev_id.empty() || rev_timestamp.empty()) {
      errors.push_back({current_offset(), page_id,
                        "revision is missing <id> or <timestamp>; dropped"});
      reset_revision_state();
      return;
    }
    Block b;
    b.article_id = page_id;
    b.revision_id = std::move(rev_id);
    b.timestamp = std::move(rev_timestamp);
    if (has_username) b.contributor.username = std::move(ctr_username);
    if (has_ctr_id) b.contributor.id = std::move(ctr_id);
    if (has_ip) b.contributor.ip = std::move(ctr_ip);
    if (has_comment) b.comment = std::move(rev_comment);
    if (has_format) b.format = std::move(rev_format);
    b.text.bytes = std::move(text_bytes);
    b.text.text = std::move(rev_text);
    b.text.deleted = text_deleted;
    if (has_sha1) b.sha1 = std::move(rev_sha1);
    events.push_back(RevisionEvent{std::move(b)});
    reset_revision_state();
  }

  void finalize_page() {
    if (!header_done) finalize_page_header();  // zero-revision page
    if (article_emitted) events.push_back(ArticleEnd{page_id});
    in_page = false;
    article_emitted = false;
  }

  // --- input pumping ---

  void pump() {
    if (resyncing) {
      resync_step();
      return;
    }
    std::string chunk(kChunk, '\0');
    std::streamsize got = 0;
    try {
      in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
      got = in.gcount();
    } catch (const std::exception& e) {
      throw FatalError("decompression failed for " + source.path.string() + ": " + e.what());
    }
    chunk.resize(static_cast<std::size_t>(got));
    const std::uint64_t base = stream_consumed;
    stream_consumed += static_cast<std::uint64_t>(got);
    if (got == 0) input_eof = true;
    feed(chunk, base, input_eof);
  }

  void feed(std::string_view data, std::uint64_t base, bool final) {
    const XML_Status st =
        XML_Parse(parser, data.data(), static_cast<int>(data.size()), final ? 1 : 0);
    if (abort == Abort::BadRoot)
      throw UsageError("root element is not <mediawiki>: " + source.path.string());
    if (st == XML_STATUS_ERROR) {
      handle_xml_error(data, base);
      return;
    }
    if (final && !done) {
      done = true;
      events.push_back(DumpEnd{});
    }
  }

  void handle_xml_error(std::string_view data, std::uint64_t base) {
    DumpError err;
    err.byte_offset = current_offset();
    err.article_id = page_id;
    err.message = XML_ErrorString(XML_GetErrorCode(parser));
    if (!opts.skip_malformed) throw MalformedXmlError(err);

    errors.push_back(err);
    Logger::global().warn("xml_error", {{"file", source.path.string()},
                                        {"offset", err.byte_offset},
                                        {"article_id", err.article_id},
                                        {"message", err.message}});
    if (article_emitted) events.push_back(ArticleEnd{page_id});
    reset_page_state();
    in_page = false;

    // Resume scanning just past the error position.
    std::uint64_t rel = err.byte_offset > base ? err.byte_offset - base : 0;
    if (rel > data.size()) rel = data.size();
    resync_buf.assign(data.substr(static_cast<std::size_t>(rel)));
    resync_base = base + rel;
    resyncing = true;
  }

  void resync_step() {
    // Look for the next "<page" followed by '>' or whitespace.
    std::size_t search_from = 0;
    while (true) {
      const std::size_t p = resync_buf.find("<page", search_from);
      if (p != std::string::npos && p + 5 < resync_buf.size()) {
        if (is_page_boundary(resync_buf[p + 5])) {
          resume_at(p);
          return;
        }
        search_from = p + 1;
        continue;
      }
      break;
    }
    if (input_eof) {
      resyncing = false;
      resync_buf.clear();
      if (!done) {
        done = true;
        events.push_back(DumpEnd{});
      }
      return;
    }
    // Keep a small tail so a boundary split across chunks still matches.
    if (resync_buf.size() > 8) {
      const std::size_t drop = resync_buf.size() - 8;
      resync_buf.erase(0, drop);
      resync_base += drop;
    }
    std::string chunk(kChunk, '\0');
    std::streamsize got = 0;
    try {
      in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
      got = in.gcount();
    } catch (const std::exception& e) {
      throw FatalError("decompression failed for " + source.path.string() + ": " + e.what());
    }
    if (got == 0) {
      input_eof = true;
      return;  // next call finishes up
    }
    stream_consumed += static_cast<std::uint64_t>(got);
    resync_buf.append(chunk.data(), static_cast<std::size_t>(got));
  }

  void resume_at(std::size_t p) {
    create_parser();
    parser_bias = static_cast<std::int64_t>(resync_base + p) -
                  static_cast<std::int64_t>(kWrapperLen);
    resyncing = false;
    std::string rest = resync_buf.substr(p);
    const std::uint64_t rest_base = resync_base + p;
    resync_buf.clear();

    if (XML_Parse(parser, kWrapper, static_cast<int>(kWrapperLen), 0) == XML_STATUS_ERROR)
      throw FatalError("internal: wrapper parse failed");
    feed(rest, rest_base, false);
  }
};

DumpReader::DumpReader(DumpSource source, DumpReaderOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->source = std::move(source);
  impl_->opts = std::move(options);

  impl_->file.open(impl_->source.path, std::ios::binary);
  if (!impl_->file) throw UsageError("cannot open dump file: " + impl_->source.path.string());

  namespace io = boost::iostreams;
  switch (impl_->source.codec) {
    case DumpCodec::Bz2Stream: impl_->in.push(io::bzip2_decompressor()); break;
    case DumpCodec::GzipStream: impl_->in.push(io::gzip_decompressor()); break;
    case DumpCodec::PlainXml: break;
  }
  impl_->in.push(impl_->file);
  impl_->in.exceptions(std::ios::badbit);

  if (impl_->source.codec_warning)
    Logger::global().warn("codec_mismatch", {{"file", impl_->source.path.string()},
                                             {"detail", *impl_->source.codec_warning}});

  impl_->create_parser();
  // Validate the root (and the codec) eagerly.
  impl_->pump();
}

DumpReader::~DumpReader() = default;

DumpEvent DumpReader::next() {
  auto& im = *impl_;
  if (im.end_returned)
    throw UsageError("next() called after DumpEnd: " + im.source.path.string());
  while (im.events.empty()) im.pump();
  DumpEvent ev = std::move(im.events.front());
  im.events.pop_front();
  if (std::holds_alternative<DumpEnd>(ev)) im.end_returned = true;
  return ev;
}

const std::vector<DumpError>& DumpReader::errors() const { return impl_->errors; }

const DumpSource& DumpReader::source() const { return impl_->source; }

}  // namespace revarc
