#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <utility>

namespace autocomp {

using LogSink = std::function<void(const std::string&)>;

namespace detail {
inline LogSink& warning_sink() {
  static LogSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}
inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

// Replaces the warning sink and returns the previous one.
inline LogSink set_warning_sink(LogSink sink) {
  std::lock_guard lock(detail::log_mutex());
  return std::exchange(detail::warning_sink(), std::move(sink));
}

inline void warn(const std::string& msg) {
  std::lock_guard lock(detail::log_mutex());
  if (detail::warning_sink()) detail::warning_sink()(msg);
}

}  // namespace autocomp
