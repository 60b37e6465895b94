#ifndef GRADFIELD_GEOMETRY_HPP
#define GRADFIELD_GEOMETRY_HPP

#include <cmath>
#include <stdexcept>
#include <string>

namespace gradfield {

struct Location {
  double s1 = 0.0;
  double s2 = 0.0;

  void validate() const {
    if (!std::isfinite(s1) || !std::isfinite(s2))
      throw std::invalid_argument("Location: coordinates must be finite");
  }
};

inline double distance(const Location& a, const Location& b) {
  return std::hypot(a.s1 - b.s1, a.s2 - b.s2);
}

struct SeparationVector {
  double d1 = 0.0;
  double d2 = 0.0;

  double length() const { return std::hypot(d1, d2); }

  void validate() const {
    if (!std::isfinite(d1) || !std::isfinite(d2))
      throw std::invalid_argument("SeparationVector: components must be finite");
  }
};

inline SeparationVector separation(const Location& a, const Location& b) {
  return {a.s1 - b.s1, a.s2 - b.s2};
}

struct UnitVector {
  double u1 = 1.0;
  double u2 = 0.0;

  UnitVector() = default;

  // Normalizes on construction; rejects the zero vector.
  UnitVector(double a, double b) {
    const double n = std::hypot(a, b);
    if (!std::isfinite(n) || n == 0.0)
      throw std::invalid_argument("UnitVector: cannot normalize zero or non-finite vector");
    u1 = a / n;
    u2 = b / n;
  }

  void validate() const {
    if (std::abs(u1 * u1 + u2 * u2 - 1.0) > 1e-12)
      throw std::invalid_argument("UnitVector: not unit length");
  }
};

// Axis-aligned rectangular window.
struct Window {
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }

  bool contains(const Location& s) const {
    return s.s1 >= x_min && s.s1 <= x_max && s.s2 >= y_min && s.s2 <= y_max;
  }

  void validate() const {
    if (!(x_min < x_max) || !(y_min < y_max))
      throw std::invalid_argument("Window: min must be strictly below max in each coordinate");
  }
};

}  // namespace gradfield

#endif
