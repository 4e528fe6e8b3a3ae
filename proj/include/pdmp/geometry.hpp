#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>

namespace pdmp {

template <std::size_t D>
using Point = std::array<double, D>;

template <std::size_t D>
Point<D> operator-(const Point<D>& a, const Point<D>& b) {
  Point<D> out;
  for (std::size_t i = 0; i < D; ++i) out[i] = a[i] - b[i];
  return out;
}

template <std::size_t D>
Point<D> operator/(const Point<D>& a, double s) {
  Point<D> out;
  for (std::size_t i = 0; i < D; ++i) out[i] = a[i] / s;
  return out;
}

template <std::size_t D>
double norm(const Point<D>& a) {
  if constexpr (D == 1) {
    return std::fabs(a[0]);
  } else {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
  }
}

template <std::size_t D>
double distance(const Point<D>& a, const Point<D>& b) {
  return norm(a - b);
}

/// Points closer than this to a face count as lying on the boundary.
inline constexpr double kBoundaryTolerance = 1e-9;

/// Axis-aligned open box E = prod_i (lower_i, upper_i).
///
/// Other open sets would need their own distance and snapping rules; the
/// estimators only rely on `contains` and `distance_to_boundary`.
template <std::size_t D>
class Box {
 public:
  Box(const Point<D>& lower, const Point<D>& upper) : lower_(lower), upper_(upper) {
    for (std::size_t i = 0; i < D; ++i) {
      if (!(lower_[i] < upper_[i])) {
        throw std::invalid_argument("box requires lower < upper in every coordinate");
      }
    }
  }

  static constexpr std::size_t dimension = D;

  const Point<D>& lower() const { return lower_; }
  const Point<D>& upper() const { return upper_; }

  bool contains(const Point<D>& x) const {
    for (std::size_t i = 0; i < D; ++i) {
      if (!(x[i] > lower_[i] && x[i] < upper_[i])) return false;
    }
    return true;
  }

  bool contains_closure(const Point<D>& x) const {
    for (std::size_t i = 0; i < D; ++i) {
      if (!(x[i] >= lower_[i] && x[i] <= upper_[i])) return false;
    }
    return true;
  }

  /// Euclidean distance from x to the boundary of the box.
  double distance_to_boundary(const Point<D>& x) const {
    if (contains_closure(x)) {
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < D; ++i) {
        d = std::min({d, x[i] - lower_[i], upper_[i] - x[i]});
      }
      return d;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < D; ++i) {
      const double excess = std::max({lower_[i] - x[i], x[i] - upper_[i], 0.0});
      s += excess * excess;
    }
    return std::sqrt(s);
  }

  bool on_boundary(const Point<D>& x, double tol = kBoundaryTolerance) const {
    return distance_to_boundary(x) <= tol;
  }

  /// Moves every coordinate within `tol` of a face exactly onto that face.
  Point<D> snap_to_boundary(Point<D> x, double tol = kBoundaryTolerance) const {
    for (std::size_t i = 0; i < D; ++i) {
      if (std::fabs(x[i] - lower_[i]) <= tol) x[i] = lower_[i];
      if (std::fabs(x[i] - upper_[i]) <= tol) x[i] = upper_[i];
    }
    return x;
  }

 private:
  Point<D> lower_;
  Point<D> upper_;
};

}  // namespace pdmp
