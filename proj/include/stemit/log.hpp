// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <iostream>
#include <string>
#include <string_view>
#include <utility>

namespace stemit::log {

enum class Level { info, warn };

using Sink = std::function<void(Level, std::string_view)>;

inline Sink& sink() {
  static Sink s = [](Level lvl, std::string_view msg) {
    std::cerr << (lvl == Level::warn ? "[warn] " : "[info] ") << msg << '\n';
  };
  return s;
}

/// Replaces the process-wide sink and returns the previous one.
inline Sink set_sink(Sink s) { return std::exchange(sink(), std::move(s)); }

inline void warn(std::string_view msg) { sink()(Level::warn, msg); }
inline void info(std::string_view msg) { sink()(Level::info, msg); }

/// RAII helper used by tests and the CLI to capture or silence messages.
class ScopedSink {
 public:
  explicit ScopedSink(Sink s) : previous_(set_sink(std::move(s))) {}
  ~ScopedSink() { set_sink(std::move(previous_)); }
  ScopedSink(const ScopedSink&) = delete;
  ScopedSink& operator=(const ScopedSink&) = delete;

 private:
  Sink previous_;
};

}  // namespace stemit::log
