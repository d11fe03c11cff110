#include "rasr/logging.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <mutex>

namespace rasr::log {

namespace {

std::atomic<Level> g_min_level{Level::Info};
std::mutex g_mutex;

const char* level_name(Level l) {
  switch (l) {
    case Level::Debug:
      return "debug";
    case Level::Info:
      return "info";
    case Level::Warn:
      return "warn";
    case Level::Error:
      return "error";
  }
  return "info";
}

std::string timestamp() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()) % 1000;
  const std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, static_cast<int>(ms.count()));
  return buf;
}

}  // namespace

void set_min_level(Level level) { g_min_level.store(level); }

void event(Level level, std::string_view name, nlohmann::json fields) {
  if (static_cast<int>(level) < static_cast<int>(g_min_level.load())) return;
  nlohmann::json record;
  record["ts"] = timestamp();
  record["level"] = level_name(level);
  record["event"] = std::string(name);
  if (fields.is_object()) {
    for (auto& [k, v] : fields.items()) record[k] = std::move(v);
  }
  const std::string line = record.dump();
  std::lock_guard<std::mutex> lock(g_mutex);
  std::fprintf(stderr, "%s\n", line.c_str());
}

}  // namespace rasr::log
