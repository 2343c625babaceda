#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include "kinreg/vec3.hpp"

namespace kinreg {

struct BoundaryPoint {
  Point point;
  Vec3 normal;  // unit, outward
};

/// Bounded convex body with exact ray exits. Ball and ellipsoid use closed
/// forms; generic bodies are given by a convex level function (negative
/// inside) and use bisection along rays.
class ConvexDomain {
 public:
  enum class Kind { Ball, Ellipsoid, Generic };
  using LevelFunction = std::function<double(const Point&)>;

  static ConvexDomain ball(const Point& center, double radius);
  static ConvexDomain ellipsoid(const Point& center, const Vec3& semi_axes);
  /// `inner` must be interior and the body must fit in the ball (inner, reach).
  static ConvexDomain generic(LevelFunction level, const Point& inner, double reach);

  Kind kind() const { return kind_; }
  std::string shape_name() const;
  const Point& center() const { return center_; }
  const Vec3& semi_axes() const { return axes_; }
  double diameter() const { return diameter_; }
  Point box_lo() const { return box_lo_; }
  Point box_hi() const { return box_hi_; }

  /// Negative strictly inside, zero on the boundary. For ball and ellipsoid this is
  /// |A^{-1}(x-c)|^2 - 1 with A = diag(semi-axes).
  double level(const Point& x) const;
  bool contains(const Point& x) const { return level(x) < 0.0; }
  /// Outward unit normal at (or near) a boundary point.
  Vec3 normal(const Point& x) const;

  /// Smallest t > 0 with x - t zeta on the boundary.
  double exit_time(const Point& x, const Velocity& zeta) const;
  BoundaryPoint exit_point(const Point& x, const Velocity& zeta) const;
  /// Forward exit along x + t u for unit u; x may be on the boundary.
  double ray_length(const Point& x, const Vec3& u) const;
  double distance_to_boundary(const Point& x) const;
  /// True when the closed box meets the open body.
  bool intersects_box(const Point& lo, const Point& hi) const;

  /// Uniform interior point by rejection from the bounding box.
  Point sample_interior(std::mt19937_64& rng) const;
  /// Uniform point with distance to the boundary at least `margin`.
  Point sample_interior(std::mt19937_64& rng, double margin) const;

 private:
  ConvexDomain() = default;
  double ellipsoid_distance(const Point& x) const;
  double generic_distance(const Point& x) const;

  Kind kind_ = Kind::Ball;
  Point center_;
  Vec3 axes_{1.0, 1.0, 1.0};
  double diameter_ = 2.0;
  Point box_lo_;
  Point box_hi_;
  LevelFunction level_;
  double reach_ = 1.0;
};

double exit_time(const ConvexDomain& domain, const Point& x, const Velocity& zeta);
BoundaryPoint exit_point(const ConvexDomain& domain, const Point& x, const Velocity& zeta);
double distance_to_boundary(const ConvexDomain& domain, const Point& x);

/// Angle x0-y-x1 in [0, pi]. Throws DomainError when y coincides with x0 or x1.
double parallax_angle(const Point& x0, const Point& x1, const Point& y);

/// Rotates `v` by `angle` about the unit axis (Rodrigues).
Vec3 rotate(const Vec3& v, const Vec3& axis, double angle);

}  // namespace kinreg
