#pragma once

#include <chrono>
#include <cstdint>
#include <functional>

namespace n2sky {

using TimePoint = std::chrono::system_clock::time_point;

// Injectable time source; tests substitute a manual clock.
using Clock = std::function<TimePoint()>;

inline Clock system_clock() {
  return [] { return std::chrono::system_clock::now(); };
}

inline std::int64_t to_unix_ms(TimePoint t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             t.time_since_epoch())
      .count();
}

inline TimePoint from_unix_ms(std::int64_t ms) {
  return TimePoint(std::chrono::milliseconds(ms));
}

}  // namespace n2sky
