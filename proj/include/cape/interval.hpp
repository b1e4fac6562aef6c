#pragma once

namespace cape {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

}  // namespace cape
