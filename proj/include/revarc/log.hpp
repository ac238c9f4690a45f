#pragma once

#include <functional>
#include <string>
#include <string_view>

#include "revarc/json.hpp"

namespace revarc {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

// Structured progress log: one JSON object per line, written to stderr by
// default so stdout stays reserved for machine-readable reports.
// Level comes from the REVARC_LOG environment variable (debug, info, warn,
// error, off); default is info.
class Logger {
 public:
  static Logger& global();

  void set_level(LogLevel level);
  LogLevel level() const { return level_; }
  void set_sink(std::function<void(const std::string&)> sink);

  void event(LogLevel level, std::string_view name, Json fields = Json::object());

  void debug(std::string_view name, Json fields = Json::object()) {
    event(LogLevel::Debug, name, std::move(fields));
  }
  void info(std::string_view name, Json fields = Json::object()) {
    event(LogLevel::Info, name, std::move(fields));
  }
  void warn(std::string_view name, Json fields = Json::object()) {
    event(LogLevel::Warn, name, std::move(fields));
  }
  void error(std::string_view name, Json fields = Json::object()) {
    event(LogLevel::Error, name, std::move(fields));
  }

 private:
  Logger();
  LogLevel level_ = LogLevel::Info;
  std::function<void(const std::string&)> sink_;
};

}  // namespace revarc
