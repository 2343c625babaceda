#include "kinreg/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <boost/math/tools/roots.hpp>

#include "kinreg/error.hpp"
#include "kinreg/random.hpp"

namespace kinreg {

namespace {

Vec3 scale(const Vec3& v, const Vec3& s) { return {v.x / s.x, v.y / s.y, v.z / s.z}; }

// Positive root of |y - t w|^2 = 1 for |y| < 1 (numerically stable form).
double unit_ball_exit(const Vec3& y, const Vec3& w) {
  const double a = norm2(w);
  const double b = -2.0 * dot(y, w);
  const double c = norm2(y) - 1.0;
  const double disc = std::max(0.0, b * b - 4.0 * a * c);
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  const double r1 = q / a;
  const double r2 = c / q;
  return std::max(r1, r2);
}

void require_point(const Point& x) {
  if (!is_finite(x)) throw DomainError("point coordinates must be finite");
}

}  // namespace

ConvexDomain ConvexDomain::ball(const Point& center, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw DomainError("ball radius must be positive");
  require_point(center);
  ConvexDomain d;
  d.kind_ = Kind::Ball;
  d.center_ = center;
  d.axes_ = {radius, radius, radius};
  d.diameter_ = 2.0 * radius;
  d.box_lo_ = center - d.axes_;
  d.box_hi_ = center + d.axes_;
  d.reach_ = radius;
  return d;
}

ConvexDomain ConvexDomain::ellipsoid(const Point& center, const Vec3& semi_axes) {
  require_point(center);
  if (!(semi_axes.x > 0.0 && semi_axes.y > 0.0 && semi_axes.z > 0.0) || !is_finite(semi_axes)) {
    throw DomainError("ellipsoid semi_axes must be positive");
  }
  ConvexDomain d;
  d.kind_ = Kind::Ellipsoid;
  d.center_ = center;
  d.axes_ = semi_axes;
  d.diameter_ = 2.0 * std::max({semi_axes.x, semi_axes.y, semi_axes.z});
  d.box_lo_ = center - semi_axes;
  d.box_hi_ = center + semi_axes;
  d.reach_ = 0.5 * d.diameter_;
  return d;
}

ConvexDomain ConvexDomain::generic(LevelFunction level, const Point& inner, double reach) {
  require_point(inner);
  if (!level) throw DomainError("generic domain needs a level function");
  if (!(reach > 0.0)) throw DomainError("generic domain reach must be positive");
  if (!(level(inner) < 0.0)) throw DomainError("generic domain: reference point is not interior");
  ConvexDomain d;
  d.kind_ = Kind::Generic;
  d.center_ = inner;
  d.level_ = std::move(level);
  d.reach_ = reach;
  // Tight bounding box and diameter from exits along a direction sphere.
  d.box_lo_ = inner;
  d.box_hi_ = inner;
  std::vector<Point> hull;
  const int n = 400;
  for (int i = 0; i < n; ++i) {
    // Fibonacci sphere
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double phi = i * std::numbers::pi * (3.0 - std::sqrt(5.0));
    const double rr = std::sqrt(1.0 - z * z);
    const Vec3 u{rr * std::cos(phi), rr * std::sin(phi), z};
    const Point p = inner + d.ray_length(inner, u) * u;
    hull.push_back(p);
    for (int k = 0; k < 3; ++k) {
      d.box_lo_[k] = std::min(d.box_lo_[k], p[k]);
      d.box_hi_[k] = std::max(d.box_hi_[k], p[k]);
    }
  }
  double diam = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    for (std::size_t j = i + 1; j < hull.size(); ++j) diam = std::max(diam, norm(hull[i] - hull[j]));
  }
  d.diameter_ = diam;
  return d;
}

std::string ConvexDomain::shape_name() const {
  switch (kind_) {
    case Kind::Ball: return "ball";
    case Kind::Ellipsoid: return "ellipsoid";
    case Kind::Generic: return "generic";
  }
  return "generic";
}

double ConvexDomain::level(const Point& x) const {
  if (kind_ == Kind::Generic) return level_(x);
  return norm2(scale(x - center_, axes_)) - 1.0;
}

Vec3 ConvexDomain::normal(const Point& x) const {
  if (kind_ != Kind::Generic) {
    const Vec3 y = x - center_;
    return normalized(Vec3{y.x / (axes_.x * axes_.x), y.y / (axes_.y * axes_.y), y.z / (axes_.z * axes_.z)});
  }
  const double h = 1e-6 * reach_;
  Vec3 g;
  for (int k = 0; k < 3; ++k) {
    Vec3 e{};
    e[k] = h;
    g[k] = (level_(x + e) - level_(x - e)) / (2.0 * h);
  }
  return normalized(g);
}

double ConvexDomain::ray_length(const Point& x, const Vec3& u) const {
  if (kind_ != Kind::Generic) {
    return unit_ball_exit(scale(x - center_, axes_), -scale(u, axes_));
  }
  // Bisection on the level function along the ray to 1e-12 of the reach.
  double lo = 0.0;
  double hi = 2.0 * reach_ + norm(x - center_);
  if (level_(x + hi * u) <= 0.0) throw DomainError("generic domain extends beyond its declared reach");
  const double tol = 1e-12 * reach_;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (level_(x + mid * u) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double ConvexDomain::exit_time(const Point& x, const Velocity& zeta) const {
  require_point(x);
  if (!is_finite(zeta)) throw DomainError("velocity must be finite");
  const double speed = norm(zeta);
  if (speed == 0.0) throw NoTrajectoryError("zero velocity has no backward trajectory");
  if (!contains(x)) throw DomainError("exit_time needs an interior point");
  if (kind_ != Kind::Generic) return unit_ball_exit(scale(x - center_, axes_), scale(zeta, axes_));
  return ray_length(x, -zeta / speed) / speed;
}

BoundaryPoint ConvexDomain::exit_point(const Point& x, const Velocity& zeta) const {
  const double t = exit_time(x, zeta);
  const Point p = x - t * zeta;
  return {p, normal(p)};
}

double ConvexDomain::distance_to_boundary(const Point& x) const {
  require_point(x);
  if (!contains(x)) throw DomainError("distance_to_boundary needs an interior point");
  switch (kind_) {
    case Kind::Ball: return axes_.x - norm(x - center_);
    case Kind::Ellipsoid: return ellipsoid_distance(x);
    case Kind::Generic: return generic_distance(x);
  }
  return 0.0;
}

// Nearest boundary point of an ellipsoid from inside: with axes sorted
// e0 >= e1 >= e2 and y in the first octant, the nearest point is
// e_i^2 y_i / (t + e_i^2) where t in (-e2^2, 0] solves sum (e_i y_i / (t + e_i^2))^2 = 1.
// Zero coordinates along the short axes need the reduced problems.
double ConvexDomain::ellipsoid_distance(const Point& x) const {
  const Vec3 rel = x - center_;
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) { return axes_[a] > axes_[b]; });
  std::array<double, 3> e{};
  std::array<double, 3> y{};
  for (int i = 0; i < 3; ++i) {
    e[static_cast<std::size_t>(i)] = axes_[order[static_cast<std::size_t>(i)]];
    y[static_cast<std::size_t>(i)] = std::abs(rel[order[static_cast<std::size_t>(i)]]);
  }
  // The distance is 1-Lipschitz, so flushing near-zero coordinates to the reduced
  // problems costs at most 1e-12 e_i and avoids an unresolvable bracket.
  for (std::size_t i = 0; i < 3; ++i) {
    if (y[i] < 1e-12 * e[i]) y[i] = 0.0;
  }

  auto solve = [](const double* ee, const double* yy, int n, double* out) {
    // Root in the shift s = t + e_{n-1}^2 in (e_{n-1} y_{n-1}, e_{n-1}^2], where the
    // lower end makes the last term exactly 1 (no cancellation for tiny y_{n-1}).
    const double en = ee[n - 1];
    auto denom = [&](int i, double sh) { return sh + (ee[i] * ee[i] - en * en); };
    auto f = [&](double sh) {
      double acc = -1.0;
      for (int i = 0; i < n; ++i) {
        const double r = ee[i] * yy[i] / denom(i, sh);
        acc += r * r;
      }
      return acc;
    };
    double lo = en * yy[n - 1];
    double hi = en * en;
    if (f(hi) >= 0.0) {
      lo = hi;
    } else if (f(lo) > 0.0) {
      boost::uintmax_t iters = 200;
      const auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52),
                                                       iters);
      lo = 0.5 * (r.first + r.second);
    }
    for (int i = 0; i < n; ++i) out[i] = ee[i] * ee[i] * yy[i] / denom(i, lo);
  };

  std::array<double, 3> q{};
  if (y[2] > 0.0) {
    solve(e.data(), y.data(), 3, q.data());
  } else if (e[0] > e[2] && e[1] > e[2] &&
             [&] {
               const double n0 = e[0] * y[0] / (e[0] * e[0] - e[2] * e[2]);
               const double n1 = e[1] * y[1] / (e[1] * e[1] - e[2] * e[2]);
               return n0 * n0 + n1 * n1 < 1.0;
             }()) {
    q[0] = e[0] * e[0] * y[0] / (e[0] * e[0] - e[2] * e[2]);
    q[1] = e[1] * e[1] * y[1] / (e[1] * e[1] - e[2] * e[2]);
    q[2] = e[2] * std::sqrt(std::max(0.0, 1.0 - (q[0] / e[0]) * (q[0] / e[0]) - (q[1] / e[1]) * (q[1] / e[1])));
  } else if (y[1] > 0.0) {
    solve(e.data(), y.data(), 2, q.data());
    q[2] = 0.0;
  } else if (e[0] > e[1] && e[0] * y[0] / (e[0] * e[0] - e[1] * e[1]) < 1.0) {
    q[0] = e[0] * e[0] * y[0] / (e[0] * e[0] - e[1] * e[1]);
    q[1] = e[1] * std::sqrt(std::max(0.0, 1.0 - (q[0] / e[0]) * (q[0] / e[0])));
    q[2] = 0.0;
  } else {
    q = {e[0], 0.0, 0.0};
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < 3; ++i) acc += (q[i] - y[i]) * (q[i] - y[i]);
  return std::sqrt(acc);
}

// For a convex body the distance is the shortest ray from x to the boundary:
// coarse search over a direction sphere, then a shrinking-step local descent.
double ConvexDomain::generic_distance(const Point& x) const {
  const int n = 200;
  double best = std::numeric_limits<double>::infinity();
  Vec3 best_u{1, 0, 0};
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double phi = i * std::numbers::pi * (3.0 - std::sqrt(5.0));
    const double rr = std::sqrt(1.0 - z * z);
    const Vec3 u{rr * std::cos(phi), rr * std::sin(phi), z};
    const double t = ray_length(x, u);
    if (t < best) {
      best = t;
      best_u = u;
    }
  }
  double step = 0.2;
  while (step > 1e-9) {
    bool improved = false;
    Vec3 e1;
    Vec3 e2;
    orthonormal_frame(best_u, e1, e2);
    for (const Vec3& d : {e1, -e1, e2, -e2}) {
      const Vec3 u = normalized(best_u + step * d);
      const double t = ray_length(x, u);
      if (t < best) {
        best = t;
        best_u = u;
        improved = true;
      }
    }
    if (!improved) step *= 0.5;
  }
  return best;
}

bool ConvexDomain::intersects_box(const Point& lo, const Point& hi) const {
  if (kind_ != Kind::Generic) {
    // In coordinates scaled by the semi-axes the body is the unit ball and the box stays a box.
    const Vec3 a = scale(lo - center_, axes_);
    const Vec3 b = scale(hi - center_, axes_);
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double c = std::clamp(0.0, a[k], b[k]);
      d2 += c * c;
    }
    return d2 <= 1.0 + 1e-9;
  }
  const int m = 6;
  for (int i = 0; i <= m; ++i) {
    for (int j = 0; j <= m; ++j) {
      for (int k = 0; k <= m; ++k) {
        const Point p{lo.x + (hi.x - lo.x) * i / m, lo.y + (hi.y - lo.y) * j / m, lo.z + (hi.z - lo.z) * k / m};
        if (contains(p)) return true;
      }
    }
  }
  return false;
}

Point ConvexDomain::sample_interior(std::mt19937_64& rng) const {
  for (;;) {
    const Point p{uniform(rng, box_lo_.x, box_hi_.x), uniform(rng, box_lo_.y, box_hi_.y),
                  uniform(rng, box_lo_.z, box_hi_.z)};
    if (contains(p)) return p;
  }
}

Point ConvexDomain::sample_interior(std::mt19937_64& rng, double margin) const {
  for (int attempt = 0; attempt < 1000000; ++attempt) {
    const Point p = sample_interior(rng);
    if (distance_to_boundary(p) >= margin) return p;
  }
  throw DomainError("no interior point found at the requested distance from the boundary");
}

double exit_time(const ConvexDomain& domain, const Point& x, const Velocity& zeta) {
  return domain.exit_time(x, zeta);
}

BoundaryPoint exit_point(const ConvexDomain& domain, const Point& x, const Velocity& zeta) {
  return domain.exit_point(x, zeta);
}

double distance_to_boundary(const ConvexDomain& domain, const Point& x) {
  return domain.distance_to_boundary(x);
}

double parallax_angle(const Point& x0, const Point& x1, const Point& y) {
  require_point(x0);
  require_point(x1);
  require_point(y);
  if (x0 == y || x1 == y) throw DomainError("parallax angle undefined when the observer is an endpoint");
  return angle_between(x0 - y, x1 - y);
}

Vec3 rotate(const Vec3& v, const Vec3& axis, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return c * v + s * cross(axis, v) + (1.0 - c) * dot(axis, v) * axis;
}

}  // namespace kinreg
