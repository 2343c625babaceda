#include <cmath>
#include <memory>
#include <numbers>

#include "doctest.h"
#include "kinreg/analysis.hpp"
#include "kinreg/error.hpp"
#include "kinreg/random.hpp"

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

const ConvexDomain& unit_ball() {
  static const ConvexDomain b = ConvexDomain::ball({0, 0, 0}, 1.0);
  return b;
}

std::shared_ptr<TransportProblem> make_problem(double gamma, double c1, const BoundaryDatum& datum) {
  return std::make_shared<TransportProblem>(unit_ball(), CollisionKernel(gas(gamma, c1)), datum, small_grid());
}

// Solved small-grid field shared by the field checks.
const SolveResult& solved() {
  static const SolveResult r =
      picard_solve(make_problem(0.5, 0.15, BoundaryDatum::holder_family(unit_ball(), 1.0, 1.0, 0.4)), 1e-10, 60);
  return r;
}

HolderSampling few_pairs(std::size_t half) {
  HolderSampling s;
  s.half = half;
  return s;
}

}  // namespace

TEST_CASE("velocity L* norm") {
  const CollisionKernel maxwell(gas(0.0, 1.0));
  const VelocityQuadrature q(12.0, 12, 12, 24);
  CHECK(lstar_norm_velocity([](const Velocity&) { return 0.0; }, maxwell, q) == 0.0);
  // nu is constant at gamma = 0, and the radial rule integrates r^2 exactly.
  const double ball = 4.0 / 3.0 * std::numbers::pi * 12.0 * 12.0 * 12.0;
  const double one = lstar_norm_velocity([](const Velocity&) { return 1.0; }, maxwell, q);
  CHECK(one == doctest::Approx(std::sqrt(std::pow(std::numbers::pi, 1.5) * ball)).epsilon(1e-12));
  CHECK(lstar_norm_velocity([](const Velocity&) { return 1.0; }, maxwell, q.refined()) ==
        doctest::Approx(one).epsilon(1e-12));

  const CollisionKernel k(gas(0.5, 1.0));
  const VelocityFunction g = [](const Velocity& z) { return std::exp(-norm2(z)) * (1.0 + z.x); };
  const VelocityFunction h = [](const Velocity& z) { return std::cos(z.y) * std::exp(-0.5 * norm2(z)); };
  const double ng = lstar_norm_velocity(g, k, q);
  CHECK(lstar_norm_velocity([&](const Velocity& z) { return -3.5 * g(z); }, k, q) ==
        doctest::Approx(3.5 * ng).epsilon(1e-14));
  CHECK(lstar_norm_velocity([&](const Velocity& z) { return g(z) + h(z); }, k, q) <=
        ng + lstar_norm_velocity(h, k, q) + 1e-12);
}

TEST_CASE("field norms on random fields") {
  auto p = make_problem(0.5, 0.15, BoundaryDatum::zero());
  const std::size_t n = p->spatial_size() * p->velocity_size();
  std::vector<double> a(n);
  std::vector<double> b(n);
  auto rng = sample_rng(5, 0, 0);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = uniform(rng, -1.0, 1.0);
    b[i] = uniform(rng, -2.0, 2.0);
  }
  std::vector<double> sum(n);
  std::vector<double> scaled(n);
  for (std::size_t i = 0; i < n; ++i) {
    sum[i] = a[i] + b[i];
    scaled[i] = -2.5 * a[i];
  }
  const NormReport na = field_norms(DistributionField(p, a));
  const NormReport nb = field_norms(DistributionField(p, b));
  const NormReport ns = field_norms(DistributionField(p, sum));
  const NormReport nc = field_norms(DistributionField(p, scaled));
  CHECK(nc.lstar_phase == doctest::Approx(2.5 * na.lstar_phase).epsilon(1e-14));
  CHECK(nc.linf_x_lstar_zeta == doctest::Approx(2.5 * na.linf_x_lstar_zeta).epsilon(1e-14));
  CHECK(nc.linf_phase == doctest::Approx(2.5 * na.linf_phase).epsilon(1e-14));
  CHECK(ns.lstar_phase <= na.lstar_phase + nb.lstar_phase + 1e-12);
  CHECK(ns.lstar_zeta <= na.lstar_zeta + nb.lstar_zeta + 1e-12);
  CHECK(ns.linf_x_lstar_zeta <= na.linf_x_lstar_zeta + nb.linf_x_lstar_zeta + 1e-12);
  CHECK(ns.linf_phase <= na.linf_phase + nb.linf_phase + 1e-12);

  // sup_x ||f(x,.)||_{L*} <= sup|f| (int nu dz)^(1/2).
  const auto& vq = p->grid().velocity;
  double nu_mass = 0.0;
  for (std::size_t k = 0; k < vq.size(); ++k) nu_mass += vq.weight(k) * p->nu(k);
  for (const auto* r : {&na, &nb, &ns, &nc}) CHECK(r->linf_x_lstar_zeta <= r->linf_phase * std::sqrt(nu_mass));

  const NormReport zero = field_norms(DistributionField(p));
  CHECK(zero.lstar_phase == 0.0);
  CHECK(zero.linf_phase == 0.0);
}

TEST_CASE("weighted Hoelder sampling") {
  const auto& ball = unit_ball();
  const HolderReport flat = weighted_holder([](const Point&, const Velocity&) { return 2.0; }, ball, 0.4, 3,
                                            few_pairs(200));
  CHECK(flat.weighted_sup == 0.0);
  CHECK(flat.raw_sup == 0.0);
  CHECK(flat.stability_ratio == 1.0);
  CHECK(flat.pairs == 400);
  CHECK(flat.rows.size() + flat.excluded == 400);

  // Lipschitz function with constant sqrt(2): the sigma-quotient is at most sqrt(2) d^(1-sigma).
  const HolderReport lip = weighted_holder([](const Point& x, const Velocity& z) { return x.x + z.y; }, ball, 0.4,
                                           2, few_pairs(500));
  CHECK(lip.raw_sup > 0.0);
  CHECK(lip.raw_sup <= std::sqrt(2.0) + 1e-12);
  for (const auto& row : lip.rows) {
    CHECK(row[12] >= 0.1);           // d0 respects the interior-only rule
    CHECK(row[13] <= 1.0 + 1e-12);   // separation within the sampled range
    CHECK(row[14] >= 0.0);
    CHECK(row[15] <= row[14] / 4.0);  // (1 + 1/d0)^2 >= 4 inside the unit ball
  }
  CHECK_FALSE(lip.growing);
  const CheckReport rep = lip.to_check("lipschitz", "test", 1);
  CHECK(rep.passed);
  CHECK(rep.columns.size() == rep.rows.front().size());

  CHECK_THROWS_AS(holder_modulus(solved().field, 0.5, few_pairs(10)), DomainError);
}

TEST_CASE("kernel checks") {
  CHECK(nu_exactness_check(1.0).passed);
  const auto nu2 = nu_exactness_check(2.0);
  CHECK(nu2.passed);
  CHECK(nu2.empirical_sup < 1e-10);

  const CollisionKernel k(gas(0.5, 1.0));
  const auto fb = frequency_bounds_check(k, 200, 3);
  CHECK(fb.passed);
  CHECK(fb.violations == 0);
  CHECK(fb.samples == 200);

  const auto cd = caflisch_decay_check(1.0, 0.25, 0.25);
  CHECK(cd.passed);
  CHECK(cd.details["tail_max_over_min"].get<double>() <= 3.0);

  auto hard = gas(1.0, 1.0);
  const auto nd = nu_derivative_check(hard, 20.0, 81);
  CHECK(nd.passed);
  // d/ds of the closed form at s = 20: pi^(3/2) (1 - 1/(2 s^2)) up to e^{-400}.
  CHECK(nd.empirical_sup == doctest::Approx(std::pow(std::numbers::pi, 1.5) * (1.0 - 1.0 / 800.0)).epsilon(1e-6));
  CHECK(nu_derivative_check(gas(0.0, 1.0), 20.0, 21).empirical_sup < 1e-8);

  const auto gk = grad_K_check(k, VelocityQuadrature(12.0, 8, 8, 8), VelocityQuadrature(4.0, 3, 3, 6),
                               NormExponent::Two, 6, 7);
  CHECK(gk.passed);
  CHECK(gk.excluded == 1);  // the zero member

  for (double g : {0.0, 0.5}) {
    const auto kd = k_decay_check(CollisionKernel(gas(g, 1.0)), VelocityQuadrature(12.0, 12, 12, 12));
    CHECK(kd.passed);
    CHECK(kd.details["gaussian_argmax_speed"].get<double>() <= 2.0);
    CHECK(kd.details["gaussian_tail_slope"].get<double>() <= -(3.0 - g) / 2.0 + 0.2);
  }
}

TEST_CASE("mixing and velocity-Lipschitz probes of G") {
  const auto& r = solved();
  REQUIRE(r.report.status == "converged");
  const DistributionField zero(r.field.problem_ptr());
  const auto mz = mixing_holder_check(zero, {0.6, -0.3, 0.5}, {0, 0, 0}, 6, 8, 1);
  CHECK(mz.passed);
  CHECK(mz.empirical_sup == 0.0);

  const auto m = mixing_holder_check(r.field, {0.6, -0.3, 0.5}, {0, 0, 0}, 6, 8, 1);
  CHECK(m.rows.size() == 6);
  for (const auto& row : m.rows) CHECK(row[1] >= row[4]);  // the anchored pairs are part of the sup
  CHECK(std::isfinite(m.empirical_sup));
  CHECK(m.empirical_sup > 0.0);
  CHECK_THROWS_AS(mixing_holder_check(r.field, {1, 0, 0}, {0.95, 0, 0}, 4, 8, 1), DomainError);

  const auto gl = g_velocity_lipschitz_check(r.field, {0.1, 0.05, -0.1}, 12, 3);
  CHECK(gl.passed);
  CHECK(gl.rows.size() == 12);
  CHECK(gl.details["shrinking_separation"].size() == 10);
}

TEST_CASE("convolution gain, embedding, decomposition") {
  const auto& r = solved();
  const auto cg = convolution_gain_check(r.field, 0.5, 5, 2);
  CHECK(cg.passed);
  CHECK(cg.empirical_sup > 0.0);
  CHECK_THROWS_AS(convolution_gain_check(r.field, 1.0, 1, 2), DomainError);
  const auto cz = convolution_gain_check(DistributionField(r.field.problem_ptr()), 0.5, 2, 2);
  CHECK(cz.empirical_sup == 0.0);

  const auto em = embedding_check(r.field, 200, 4);
  CHECK(em.passed);
  CHECK(em.violations == 0);

  const auto dc = decomposition_check(r.field, 5, 1e-3, 5);
  CHECK(dc.passed);
  CHECK(dc.rows.size() == 5);

  const auto pt = pure_transport_check(r.field.problem(), 1e-10);
  CHECK(pt.passed);
  CHECK(pt.details["iterations"].get<int>() == 2);
}

TEST_CASE("G dual form check") {
  const auto gd = g_dual_form_check(solved().field, 2, 1e-4, 6);
  CHECK(gd.passed);
  CHECK(gd.rows.size() == 2);
}

TEST_CASE("boundary preservation and main modulus") {
  // Constant data without collisions: only the damping difference contributes.
  auto free = make_problem(0.5, 0.0, BoundaryDatum::constant(1.0));
  const auto bc = boundary_preservation_check(free, 0.4, few_pairs(2000));
  INFO(bc.details.dump());
  CHECK(bc.passed);
  CHECK(bc.details["II_weighted_sup"].get<double>() == 0.0);
  CHECK(bc.details["I_weighted_sup"].get<double>() > 0.0);
  CHECK(bc.details["characteristic_pairs_max_error"].get<double>() <= 1e-12);

  const auto& r = solved();
  const auto bp = boundary_preservation_check(r.field.problem_ptr(), 0.4, few_pairs(200));
  CHECK(std::isfinite(bp.empirical_sup));
  CHECK(bp.details["II_weighted_sup"].get<double>() > 0.0);

  const HolderReport h = holder_modulus(r.field, 0.4, few_pairs(200));
  CHECK(std::isfinite(h.weighted_sup));
  CHECK(h.weighted_sup > 0.0);
  CHECK(h.trend.size() == 10);
}
