#include "revarc/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <mutex>

#include "revarc/timestamp.hpp"

namespace revarc {

namespace {

std::mutex g_log_mutex;

const char* level_name(LogLevel l) {
  switch (l) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warn: return "warn";
    case LogLevel::Error: return "error";
    default: return "off";
  }
}

LogLevel level_from_env() {
  const char* v = std::getenv("REVARC_LOG");
  if (!v) return LogLevel::Info;
  std::string s(v);
  if (s == "debug") return LogLevel::Debug;
  if (s == "info") return LogLevel::Info;
  if (s == "warn") return LogLevel::Warn;
  if (s == "error") return LogLevel::Error;
  if (s == "off" || s == "none") return LogLevel::Off;
  return LogLevel::Info;
}

}  // namespace

Logger::Logger() : level_(level_from_env()) {}

Logger& Logger::global() {
  static Logger instance;
  return instance;
}

void Logger::set_level(LogLevel level) { level_ = level; }

void Logger::set_sink(std::function<void(const std::string&)> sink) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  sink_ = std::move(sink);
}

void Logger::event(LogLevel level, std::string_view name, Json fields) {
  if (level < level_) return;
  Json line = Json::object();
  line["ts"] = now_utc_timestamp();
  line["level"] = level_name(level);
  line["event"] = std::string(name);
  for (auto& [k, v] : fields.items()) line[k] = std::move(v);
  std::string out = line.dump();
  std::lock_guard<std::mutex> lock(g_log_mutex);
  if (sink_) {
    sink_(out);
  } else {
    std::fprintf(stderr, "%s\n", out.c_str());
    std::fflush(stderr);
  }
}

}  // namespace revarc
