#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>

#include "doctest.h"
#include "kinreg/error.hpp"
#include "kinreg/random.hpp"
#include "kinreg/transport.hpp"

using namespace kinreg;

namespace {

PotentialModel gas(double gamma, double c1) {
  PotentialModel m;
  m.gamma = gamma;
  m.c1 = c1;
  return m;
}

PhaseGridSpec small_grid() {
  PhaseGridSpec s;
  s.spatial_nodes = 7;
  s.radial_nodes = 8;
  s.angular_nodes = 24;
  s.collision_radial = 12;
  s.collision_polar = 12;
  s.collision_azimuth = 12;
  return s;
}

std::shared_ptr<TransportProblem> make_problem(double gamma, double c1, const BoundaryDatum& datum,
                                               const PhaseGridSpec& spec = small_grid()) {
  const auto ball = ConvexDomain::ball({0, 0, 0}, 1.0);
  return std::make_shared<TransportProblem>(ball, CollisionKernel(gas(gamma, c1)), datum, spec);
}

struct AnalyticSource final : CollisionSource {
  double operator()(const Point& y, const Velocity& z) const override {
    return std::exp(-0.5 * norm2(z)) * (1.0 + 0.3 * y.x + 0.2 * y.y * y.z);
  }
};

}  // namespace

TEST_CASE("boundary datum families") {
  const auto ball = ConvexDomain::ball({0, 0, 0}, 1.0);
  const auto d = BoundaryDatum::holder_family(ball, 1.0, 1.0, 0.4, 7);
  CHECK(d.holder_m() > 0.0);
  CHECK(d.holder_sigma() == doctest::Approx(0.4));
  // Declared M dominates fresh samples; envelope dominates values.
  CHECK(sampled_holder_quotient(d, ball, 4000, 99, 0.4) <= d.holder_m());
  auto rng = sample_rng(3, 0, 0);
  for (int n = 0; n < 500; ++n) {
    const Point x = ball.sample_interior(rng);
    const Velocity eta = gaussian_vec(rng, 1.5);
    const BoundaryPoint X = ball.exit_point(x, eta);
    CHECK(std::abs(d(X, eta)) <= d.envelope(eta));
  }
  CHECK(BoundaryDatum::constant(2.0).holder_m() == 0.0);
  CHECK(BoundaryDatum::zero().is_zero());
  CHECK_THROWS_AS(BoundaryDatum::holder_family(ball, 1.0, 1.0, 0.5), DomainError);
}

TEST_CASE("spatial grid") {
  const auto ball = ConvexDomain::ball({0, 0, 0}, 1.0);
  const SpatialGrid g(ball, 11);
  double vol = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(g.weight(i) >= 0.0);
    CHECK(ball.contains(g.evaluation_point(i)));
    vol += g.weight(i);
  }
  CHECK(vol == doctest::Approx(4.0 * M_PI / 3.0).epsilon(5e-3));

  // Trilinear interpolation reproduces affine functions.
  auto rng = sample_rng(5, 0, 0);
  for (int n = 0; n < 200; ++n) {
    const Point y = ball.sample_interior(rng);
    const auto st = g.locate(y);
    double acc = 0.0;
    double wsum = 0.0;
    for (int c = 0; c < 8; ++c) {
      const Point p = g.position(st.node[static_cast<std::size_t>(c)]);
      acc += st.weight[static_cast<std::size_t>(c)] * (1.0 + 2.0 * p.x - p.y + 0.5 * p.z);
      wsum += st.weight[static_cast<std::size_t>(c)];
    }
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(acc == doctest::Approx(1.0 + 2.0 * y.x - y.y + 0.5 * y.z).epsilon(1e-12));
  }
}

TEST_CASE("velocity hat interpolant") {
  const auto q = VelocityQuadrature::with_angular_count(12.0, 8, 24);
  const VelocityInterpolant interp(q);
  std::array<std::uint32_t, 8> idx;
  std::array<double, 8> w;
  for (std::size_t j = 0; j < q.size(); j += 7) {
    const int n = interp.weights(q.node(j), idx, w);
    double at_j = 0.0;
    for (int c = 0; c < n; ++c) {
      if (idx[static_cast<std::size_t>(c)] == j) at_j += w[static_cast<std::size_t>(c)];
    }
    CHECK(at_j == doctest::Approx(1.0).epsilon(1e-12));
  }
  auto rng = sample_rng(8, 0, 0);
  for (int n = 0; n < 500; ++n) {
    const Velocity v = gaussian_vec(rng, 4.0);
    const int m = interp.weights(v, idx, w);
    double sum = 0.0;
    for (int c = 0; c < m; ++c) sum += w[static_cast<std::size_t>(c)];
    if (norm(v) <= 12.0) CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    else CHECK(m == 0);
  }
}

TEST_CASE("discrete collision rows sum to K(1)") {
  // Hat functions sum to one on the truncation ball, so rows whose collision
  // support stays inside it reproduce K(1); the fastest nodes lose the outside part.
  auto p = make_problem(0.5, 1.0, BoundaryDatum::zero());
  const auto row_sum = [&](std::size_t k) {
    double sum = 0.0;
    for (std::size_t j = 0; j < p->velocity_size(); ++j) sum += p->collision_row(k)[j];
    return sum;
  };
  const auto k_one = [&](std::size_t k) {
    return apply_K(p->kernel(), [](const Velocity&) { return 1.0; }, p->grid().collision, p->grid().velocity.node(k));
  };
  for (std::size_t k = 0; k < p->velocity_size(); k += 5) {
    if (p->grid().velocity.speed(k) > 3.0) continue;
    CHECK(row_sum(k) == doctest::Approx(k_one(k)).epsilon(1e-6));
  }
  const std::size_t last = p->velocity_size() - 1;
  CHECK(row_sum(last) < k_one(last));
}

TEST_CASE("damped transport right-hand side") {
  const auto ball = ConvexDomain::ball({0, 0, 0}, 1.0);
  auto p = make_problem(0.5, 0.15, BoundaryDatum::zero());
  const DistributionField zero(p);
  CHECK(damped_transport_rhs(zero, BoundaryDatum::zero(), p->kernel(), ball, {0.1, 0.2, 0.0}, {1, 0, 0}) == 0.0);

  const CollisionKernel null_k(gas(0.5, 0.0));
  const Point x{0.3, -0.2, 0.1};
  const Velocity z{0.4, 1.1, -0.3};
  const double expected = std::exp(-collision_frequency(null_k.model(), norm(z)) * ball.exit_time(x, z));
  CHECK(damped_transport_rhs(zero, BoundaryDatum::constant(1.0), null_k, ball, x, z) ==
        doctest::Approx(expected).epsilon(1e-10));

  const auto g = BoundaryDatum::holder_family(ball, 1.0, 1.0, 0.4);
  CHECK(damped_transport_rhs(zero, g, p->kernel(), ball, x, z) == evaluate_I(g, p->kernel(), ball, x, z));
}

TEST_CASE("evaluate_I limits") {
  const auto ball = ConvexDomain::ball({0, 0, 0}, 1.0);
  const CollisionKernel k(gas(0.5, 0.15));
  const auto g = BoundaryDatum::holder_family(ball, 1.0, 1.0, 0.4);
  const Velocity z{0.6, -0.2, 0.5};
  // Approaching the exit point along -zeta.
  const BoundaryPoint X = ball.exit_point({0, 0, 0}, z);
  const double near = evaluate_I(g, k, ball, X.point + 1e-9 * z, z);
  CHECK(near == doctest::Approx(g(X, z)).epsilon(1e-7));
  // Slow velocities: e^{-nu tau} -> 0.
  double prev = 1.0;
  for (double s : {1.0, 0.3, 0.1, 0.03, 0.01}) {
    const double v = evaluate_I(BoundaryDatum::constant(1.0), k, ball, {0.2, 0, 0}, z * (s / norm(z)));
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 1e-100);
  for (double s : {0.5, 1.0, 3.0}) {
    const Velocity v{0, 0, s};
    CHECK(evaluate_I(BoundaryDatum::constant(1.0), k, ball, {0, 0, 0}, v) ==
          doctest::Approx(std::exp(-k.frequency(s) / s)).epsilon(1e-13));
  }
  // Damping monotonicity along a fixed direction.
  prev = 0.0;
  for (double t = -0.9; t < 0.95; t += 0.1) {
    const double v = evaluate_I(BoundaryDatum::constant(1.0), k, ball, {t, 0, 0}, {-1, 0, 0});
    CHECK(v >= prev);
    prev = v;
  }
  CHECK_THROWS_AS(evaluate_I(g, k, ball, {0, 0, 0}, {0, 0, 0}), NoTrajectoryError);
  CHECK_THROWS_AS(evaluate_I(g, k, ball, {2, 0, 0}, {1, 0, 0}), DomainError);
}

TEST_CASE("picard with zero data converges at once") {
  auto p = make_problem(0.5, 0.15, BoundaryDatum::zero());
  const auto r = picard_solve(p, 1e-10, 20);
  CHECK(r.report.status == "converged");
  CHECK(r.report.iterations == 1);
  CHECK(r.field.is_zero());
}

TEST_CASE("pure transport limit") {
  const auto ball = ConvexDomain::ball({0, 0, 0}, 1.0);
  const auto g = BoundaryDatum::holder_family(ball, 1.0, 1.0, 0.4);
  auto p = make_problem(0.5, 0.0, g);
  const auto r = picard_solve(p, 1e-12, 20);
  CHECK(r.report.status == "converged");
  CHECK(r.report.iterations == 2);
  double worst = 0.0;
  for (std::size_t i = 0; i < p->spatial_size(); ++i) {
    const Point x = p->grid().space.evaluation_point(i);
    for (std::size_t k = 0; k < p->velocity_size(); ++k) {
      const Velocity z = p->grid().velocity.node(k);
      const double nu = collision_frequency(p->kernel().model(), norm(z));
      const double tau = ball.exit_time(x, z);
      const double exact = g(ball.exit_point(x, z), z) * std::exp(-nu * tau);
      worst = std::max(worst, std::abs(r.field.value(i, k) - exact));
    }
  }
  CHECK(worst <= 1e-10);

  // Maximum principle for constant data.
  auto pc = make_problem(0.5, 0.0, BoundaryDatum::constant(2.0));
  const auto rc = picard_solve(pc, 1e-12, 20);
  for (double v : rc.field.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 2.0);
  }
}

TEST_CASE("picard contracts geometrically at small coupling") {
  auto p = make_problem(0.0, 0.15, BoundaryDatum::constant(1.0));
  const auto r = picard_solve(p, 1e-11, 60);
  REQUIRE(r.report.status == "converged");
  const auto& q = r.report.update_ratios;
  REQUIRE(q.size() >= 4);
  for (double v : q) CHECK(v < 1.0);
  // Late ratios settle to the contraction factor.
  const double a = q[q.size() - 2];
  const double b = q[q.size() - 3];
  CHECK(std::abs(a - b) <= 0.2 * b);
  CHECK(r.report.residual < 1e-11);
}

TEST_CASE("decomposition I + II + III reproduces the solved field") {
  const auto ball = ConvexDomain::ball({0, 0, 0}, 1.0);
  const auto g = BoundaryDatum::holder_family(ball, 1.0, 1.0, 0.4);
  auto p = make_problem(0.5, 0.15, g);
  const auto r = picard_solve(p, 1e-11, 60);
  REQUIRE(r.report.status == "converged");
  const auto B = boundary_field(p);
  auto rng = sample_rng(11, 0, 0);
  double worst = 0.0;
  int probes = 0;
  while (probes < 10) {
    const std::size_t i = rng() % p->spatial_size();
    if (!p->grid().space.is_interior(i)) continue;
    const std::size_t k = rng() % p->velocity_size();
    const Point x = p->grid().space.position(i);
    const Velocity z = p->grid().velocity.node(k);
    const double sum = evaluate_I(g, p->kernel(), ball, x, z) + evaluate_II_discrete(B, x, z) + evaluate_III(r.field, x, z);
    worst = std::max(worst, std::abs(r.field.value(i, k) - sum));
    ++probes;
  }
  CHECK(worst <= 1e-3);

  // III reads only K(f): another datum leaves it unchanged.
  auto p2 = make_problem(0.5, 0.15, BoundaryDatum::constant(3.0));
  const DistributionField same(p2, r.field.values());
  const Point x{0.1, 0.2, -0.3};
  const Velocity z{0.7, 0.1, 0.4};
  CHECK(evaluate_III(same, x, z) == doctest::Approx(evaluate_III(r.field, x, z)).epsilon(1e-14));
  const DistributionField zero(p);
  CHECK(evaluate_III(zero, x, z) == 0.0);
  CHECK(evaluate_G(zero, x, z) == 0.0);
  CHECK(evaluate_II_discrete(boundary_field(make_problem(0.5, 0.15, BoundaryDatum::zero())), x, z) == 0.0);
  CHECK(evaluate_II_pointwise(*make_problem(0.5, 0.0, g), x, z) == 0.0);

  // Off-grid evaluation agrees with the grid at nodes.
  const std::size_t i0 = 0;
  const std::size_t k0 = 17;
  const Point e = p->grid().space.evaluation_point(i0);
  CHECK(r.field.evaluate(e, p->grid().velocity.node(k0)) == doctest::Approx(r.field.value(i0, k0)).epsilon(1e-9));
}

TEST_CASE("II: interpolated form approaches the pointwise form under refinement") {
  const auto ball = ConvexDomain::ball({0, 0, 0}, 1.0);
  const auto g = BoundaryDatum::holder_family(ball, 1.0, 1.0, 0.4);
  const Point x{0.2, -0.1, 0.3};
  const Velocity z{0.9, 0.4, -0.6};
  double prev_gap = 1e300;
  double pointwise = 0.0;
  for (int n : {7, 13}) {
    auto spec = small_grid();
    spec.spatial_nodes = n;
    auto p = make_problem(0.5, 0.15, g, spec);
    const double a = evaluate_II_discrete(boundary_field(p), x, z);
    pointwise = evaluate_II_pointwise(*p, x, z);
    CHECK(a > 0.0);
    const double gap = std::abs(a - pointwise);
    CHECK(gap < 0.6 * prev_gap);
    prev_gap = gap;
  }
  // The continuous form differs only by the velocity interpolation of I.
  auto p = make_problem(0.5, 0.15, g, PhaseGridSpec{});
  const double c = evaluate_II(g, p->kernel(), ball, p->grid().collision, x, z);
  CHECK(std::abs(evaluate_II_pointwise(*p, x, z) - c) <= 0.05 * c);
}

TEST_CASE("G in velocity and spatial coordinates agree") {
  const auto ball = ConvexDomain::ball({0, 0, 0}, 1.0);
  const CollisionKernel k(gas(0.5, 0.15));
  const AnalyticSource S;
  auto rng = sample_rng(21, 0, 0);
  for (int n = 0; n < 3; ++n) {
    const Point x = ball.sample_interior(rng, 0.05);
    const Velocity z = gaussian_vec(rng, 1.0);
    const double a = evaluate_G_velocity_form(S, k, ball, x, z);
    const double b = evaluate_G_spatial_form(S, k, ball, x, z);
    CHECK(std::abs(a - b) <= 1e-4 * std::abs(b));
  }
}

TEST_CASE("checkpoint round trip") {
  const auto ball = ConvexDomain::ball({0, 0, 0}, 1.0);
  auto p = make_problem(0.5, 0.0, BoundaryDatum::holder_family(ball, 1.0, 1.0, 0.4));
  const auto r = picard_solve(p, 1e-12, 5);
  const auto dir = std::filesystem::temp_directory_path() / "kinreg_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(r.field, (dir / "f.json").string(), (dir / "f.csv").string());
  const auto back = load_checkpoint(p, (dir / "f.json").string(), (dir / "f.csv").string());
  for (std::size_t n = 0; n < back.values().size(); ++n) CHECK(back.values()[n] == r.field.values()[n]);
  auto other = make_problem(0.5, 0.0, BoundaryDatum::zero(), PhaseGridSpec{});
  CHECK_THROWS(load_checkpoint(other, (dir / "f.json").string(), (dir / "f.csv").string()));
  std::filesystem::remove_all(dir);
}
