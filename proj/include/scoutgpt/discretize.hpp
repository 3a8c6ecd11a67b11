#ifndef SCOUTGPT_DISCRETIZE_HPP_
#define SCOUTGPT_DISCRETIZE_HPP_

#include <algorithm>
#include <cmath>
#include <string>

#include "scoutgpt/error.hpp"

namespace scoutgpt {

enum class Attribute { x, y, delta_t, robv, minute, counter };

inline constexpr int kXBins = 105;
inline constexpr int kYBins = 68;
inline constexpr int kDeltaBins = 61;
inline constexpr int kRobvBins = 201;
inline constexpr int kMinuteBins = 131;
inline constexpr int kCountBins = 16;
inline constexpr double kRobvStep = 0.01;

inline int bin_count(Attribute kind) {
  switch (kind) {
    case Attribute::x: return kXBins;
    case Attribute::y: return kYBins;
    case Attribute::delta_t: return kDeltaBins;
    case Attribute::robv: return kRobvBins;
    case Attribute::minute: return kMinuteBins;
    case Attribute::counter: return kCountBins;
  }
  return 0;
}

// x, y: 1 m floor bins. delta_t: whole seconds capped at 60. rOBV: 0.01 steps
// over [-1, 1]. minute and counters: clipped integers.
inline int discretize(Attribute kind, double value) {
  if (!std::isfinite(value)) {
    throw Error(Errc::domain, "cannot discretize a non-finite value");
  }
  const int top = bin_count(kind) - 1;
  auto clip_floor = [top](double v) {
    return static_cast<int>(std::clamp(std::floor(v), 0.0, static_cast<double>(top)));
  };
  switch (kind) {
    case Attribute::x:
    case Attribute::y:
    case Attribute::minute:
    case Attribute::counter:
      return clip_floor(value);
    case Attribute::delta_t:
      return static_cast<int>(std::clamp(std::round(value), 0.0, static_cast<double>(top)));
    case Attribute::robv: {
      double v = std::clamp(value, -1.0, 1.0);
      return static_cast<int>(std::clamp(std::round((v + 1.0) * 100.0), 0.0,
                                         static_cast<double>(top)));
    }
  }
  return 0;
}

// Bin center on the original scale.
inline double undiscretize(Attribute kind, int bin) {
  if (bin < 0 || bin >= bin_count(kind)) {
    throw Error(Errc::domain, "bin " + std::to_string(bin) + " out of range");
  }
  switch (kind) {
    case Attribute::x:
    case Attribute::y:
      return bin + 0.5;
    case Attribute::robv:
      return static_cast<double>(bin - kRobvBins / 2) / 100.0;
    case Attribute::delta_t:
    case Attribute::minute:
    case Attribute::counter:
      return static_cast<double>(bin);
  }
  return 0.0;
}

}  // namespace scoutgpt

#endif  // SCOUTGPT_DISCRETIZE_HPP_
