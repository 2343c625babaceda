#include "kinreg/geometry_checks.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "kinreg/error.hpp"
#include "kinreg/parallel.hpp"
#include "kinreg/random.hpp"

namespace kinreg {

namespace {

Json domain_json(const ConvexDomain& d) {
  Json j;
  j["shape"] = d.shape_name();
  j["center"] = {d.center().x, d.center().y, d.center().z};
  j["semi_axes"] = {d.semi_axes().x, d.semi_axes().y, d.semi_axes().z};
  j["diameter"] = d.diameter();
  return j;
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

bool grazing(const Velocity& zeta, const Vec3& normal) {
  return std::abs(dot(zeta, normal)) / norm(zeta) < kGrazingTolerance;
}

// Unit vector orthogonal to `v`.
Vec3 random_orthogonal(std::mt19937_64& rng, const Vec3& v) {
  Vec3 e1;
  Vec3 e2;
  orthonormal_frame(normalized(v), e1, e2);
  const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  return std::cos(phi) * e1 + std::sin(phi) * e2;
}

// Two-quotient sup summary shared by the constant-measuring checks.
struct QuotientSample {
  bool used = false;
  double q1 = 0.0;
  double q2 = 0.0;
  std::vector<double> row;
};

void summarize(CheckReport& rep, const std::vector<QuotientSample>& out, std::size_t half, const char* name1,
               const char* name2) {
  StableSup s1(half);
  StableSup s2(half);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i].used) {
      ++rep.excluded;
      continue;
    }
    s1.add(i, out[i].q1);
    s2.add(i, out[i].q2);
    rep.rows.push_back(out[i].row);
  }
  rep.samples = out.size();
  rep.empirical_sup = std::max(s1.sup(), s2.sup());
  rep.stability_ratio = std::max(s1.ratio(), s2.ratio());
  rep.details[std::string(name1) + "_sup"] = s1.sup();
  rep.details[std::string(name1) + "_sup_half"] = s1.half_sup();
  rep.details[std::string(name2) + "_sup"] = s2.sup();
  rep.details[std::string(name2) + "_sup_half"] = s2.half_sup();
  rep.passed = std::isfinite(rep.empirical_sup) && rep.stability_ratio <= kStabilityTolerance;
}

}  // namespace

CheckReport check_parallax_bound(std::size_t samples, double a, std::uint64_t seed) {
  if (!(a > 0.0 && a < 1.0)) throw DomainError("parallax exponent a must lie in (0, 1)");
  CheckReport rep;
  rep.check_name = "parallax";
  rep.proposition = "parallax estimate: for d = |x0-x1| <= 1 and |y-x0| > 2 d^a the angle x0-y-x1 is below (pi/4) d^(1-a)";
  rep.params = {{"a", a}, {"samples", samples}};
  rep.seed = seed;
  rep.columns = {"d", "distance_y_x0", "theta", "bound"};

  struct Out {
    int state = 0;  // 0 excluded, 1 admissible
    double d = 0, rho = 0, theta = 0, bound = 0;
  };
  std::vector<Out> out(samples);
  parallel_for(samples, [&](std::size_t i) {
    auto rng = sample_rng(seed, 0x9a11, i);
    const Point x0{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
    const double d = log_uniform(rng, 1e-6, 1.0);
    const Point x1 = x0 + d * unit_vec(rng);
    Point y;
    if (i % 2 == 0) {
      // Near the edge of the hypothesis, where the bound is tightest.
      const double rho = 2.0 * std::pow(d, a) * (1.0 + log_uniform(rng, 1e-9, 10.0));
      y = x0 + rho * unit_vec(rng);
    } else {
      y = x0 + log_uniform(rng, 1e-3, 10.0) * unit_vec(rng);
    }
    Out o;
    o.d = norm(x1 - x0);
    o.rho = norm(y - x0);
    if (o.d <= 1.0 && o.rho > 2.0 * std::pow(o.d, a)) {
      o.state = 1;
      o.theta = parallax_angle(x0, x1, y);
      o.bound = 0.25 * std::numbers::pi * std::pow(o.d, 1.0 - a);
    }
    out[i] = o;
  });
  for (const auto& o : out) {
    if (o.state == 0) {
      ++rep.excluded;
      continue;
    }
    if (!(o.theta < o.bound)) ++rep.violations;
    rep.empirical_sup = std::max(rep.empirical_sup, o.theta / o.bound);
    rep.rows.push_back({o.d, o.rho, o.theta, o.bound});
  }
  rep.samples = samples;
  rep.details["max_theta_over_bound"] = rep.empirical_sup;
  rep.passed = rep.violations == 0;
  return rep;
}

CheckReport check_exit_continuity(const ConvexDomain& domain, std::size_t samples, std::uint64_t seed) {
  CheckReport rep;
  rep.check_name = "exit_continuity";
  rep.proposition =
      "exit point and exit time are Lipschitz in the starting point: |p(x,z)-p(y,z)| and "
      "|tau(x,z)-tau(y,z)||z| are at most C (1 + 1/d0) |x-y|";
  rep.params = {{"domain", domain_json(domain)}, {"samples", samples}};
  rep.seed = seed;
  rep.columns = {"d0", "separation", "exit_point_quotient", "exit_time_quotient"};
  const std::size_t total = 2 * samples;
  const double R = domain.diameter();
  std::vector<QuotientSample> out(total);
  parallel_for(total, [&](std::size_t i) {
    auto rng = sample_rng(seed, 0xe417, i);
    const Point x = domain.sample_interior(rng);
    const Velocity zeta = gaussian_vec(rng);
    const double delta = R * log_uniform(rng, 1e-6, 0.1);
    // Every fifth pair moves along the velocity, where the exit point is shared.
    const Vec3 u = (i % 5 == 0) ? normalized(zeta) : unit_vec(rng);
    const Point y = x + delta * u;
    if (!domain.contains(y)) return;
    const BoundaryPoint px = domain.exit_point(x, zeta);
    const BoundaryPoint py = domain.exit_point(y, zeta);
    if (grazing(zeta, px.normal) || grazing(zeta, py.normal)) return;
    const double d0 = std::min(domain.distance_to_boundary(x), domain.distance_to_boundary(y));
    const double sep = norm(x - y);
    const double w = (1.0 + 1.0 / d0) * sep;
    QuotientSample s;
    s.used = true;
    s.q1 = norm(px.point - py.point) / w;
    s.q2 = std::abs(domain.exit_time(x, zeta) - domain.exit_time(y, zeta)) * norm(zeta) / w;
    s.row = {d0, sep, s.q1, s.q2};
    out[i] = std::move(s);
  });
  summarize(rep, out, samples, "exit_point", "exit_time");
  return rep;
}

CheckReport check_angle_continuity(const ConvexDomain& domain, std::size_t samples, std::uint64_t seed) {
  CheckReport rep;
  rep.check_name = "angle_continuity";
  rep.proposition =
      "exit point depends Lipschitz on the direction: |P1-P2| and ||xP1|-|xP2|| are at most "
      "C (1 + 1/d0) theta for velocities at angle theta";
  rep.params = {{"domain", domain_json(domain)}, {"samples", samples}};
  rep.seed = seed;
  rep.columns = {"d0", "theta", "exit_point_quotient", "path_length_quotient"};
  const std::size_t total = 2 * samples;
  std::vector<QuotientSample> out(total);
  parallel_for(total, [&](std::size_t i) {
    auto rng = sample_rng(seed, 0xa91e, i);
    const Point x = domain.sample_interior(rng);
    const Velocity z1 = gaussian_vec(rng);
    const double theta = log_uniform(rng, 1e-6, 0.5);
    const Velocity z2 = uniform(rng, 0.5, 2.0) * rotate(z1, random_orthogonal(rng, z1), theta);
    const BoundaryPoint p1 = domain.exit_point(x, z1);
    const BoundaryPoint p2 = domain.exit_point(x, z2);
    if (grazing(z1, p1.normal) || grazing(z2, p2.normal)) return;
    const double d0 = domain.distance_to_boundary(x);
    const double th = angle_between(z1, z2);
    if (!(th > 0.0)) return;
    const double w = (1.0 + 1.0 / d0) * th;
    QuotientSample s;
    s.used = true;
    s.q1 = norm(p1.point - p2.point) / w;
    s.q2 = std::abs(norm(x - p1.point) - norm(x - p2.point)) / w;
    s.row = {d0, th, s.q1, s.q2};
    out[i] = std::move(s);
  });
  summarize(rep, out, samples, "exit_point", "path_length");
  return rep;
}

CheckReport check_segment_distance(const ConvexDomain& domain, std::size_t samples, std::uint64_t seed) {
  CheckReport rep;
  rep.check_name = "segment_distance";
  rep.proposition =
      "for z on the chord from x to its exit point X, |zX| <= (R/d0) d(z, boundary) with R the "
      "diameter and d0 = d(x, boundary)";
  rep.params = {{"domain", domain_json(domain)}, {"samples", samples}};
  rep.seed = seed;
  rep.columns = {"d0", "t", "zX", "bound"};
  const double R = domain.diameter();
  const double slack = 1e-9 * R;  // floating-point allowance near the boundary end
  struct Out {
    double d0, t, zx, bound;
  };
  std::vector<Out> out(samples);
  parallel_for(samples, [&](std::size_t i) {
    auto rng = sample_rng(seed, 0x5e91, i);
    const Point x = domain.sample_interior(rng);
    const Velocity zeta = gaussian_vec(rng);
    const Point X = domain.exit_point(x, zeta).point;
    double t = uniform(rng);
    if (i % 50 == 0) t = 0.0;
    if (i % 50 == 1) t = 1.0;
    const Point z = x + t * (X - x);
    const double d0 = domain.distance_to_boundary(x);
    const double dz = domain.contains(z) ? domain.distance_to_boundary(z) : 0.0;
    out[i] = {d0, t, norm(z - X), R / d0 * dz};
  });
  for (const auto& o : out) {
    if (o.zx > o.bound + slack) ++rep.violations;
    if (o.bound > slack) rep.empirical_sup = std::max(rep.empirical_sup, o.zx / o.bound);
    rep.rows.push_back({o.d0, o.t, o.zx, o.bound});
  }
  rep.samples = samples;
  rep.passed = rep.violations == 0;
  return rep;
}

}  // namespace kinreg
