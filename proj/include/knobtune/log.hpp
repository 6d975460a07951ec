#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace knobtune::log {

using Sink = std::function<void(std::string_view)>;

/// Emit a warning through the current sink (stderr by default).
void warn(std::string_view message);

/// Replace the warning sink; returns the previous one. Pass an empty
/// function to silence warnings.
Sink set_sink(Sink sink);

/// Restores the previous sink on scope exit.
class ScopedSink {
 public:
  explicit ScopedSink(Sink sink) : previous_(set_sink(std::move(sink))) {}
  ~ScopedSink() { set_sink(std::move(previous_)); }
  ScopedSink(const ScopedSink&) = delete;
  ScopedSink& operator=(const ScopedSink&) = delete;

 private:
  Sink previous_;
};

}  // namespace knobtune::log
