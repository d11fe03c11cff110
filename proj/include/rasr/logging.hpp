#pragma once

#include <string_view>

#include <nlohmann/json.hpp>

namespace rasr::log {

enum class Level { Debug, Info, Warn, Error };

/// Emits one structured line to stderr: {"ts":...,"level":...,"event":...,...}.
/// Extra fields are merged into the record; "utterance_id" is the conventional
/// key for per-utterance events.
void event(Level level, std::string_view name, nlohmann::json fields = {});

void set_min_level(Level level);

inline void info(std::string_view name, nlohmann::json fields = {}) {
  event(Level::Info, name, std::move(fields));
}
inline void warn(std::string_view name, nlohmann::json fields = {}) {
  event(Level::Warn, name, std::move(fields));
}
inline void error(std::string_view name, nlohmann::json fields = {}) {
  event(Level::Error, name, std::move(fields));
}

}  // namespace rasr::log
