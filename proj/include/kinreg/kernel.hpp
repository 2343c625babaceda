#pragma once

#include <cstdint>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <memory>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "kinreg/quadrature.hpp"
#include "kinreg/vec3.hpp"

namespace kinreg {

/// Cutoff potential parameters. `beta0` is the integral of the angular factor
/// over [0, pi/2]; `c1`, `c2` are the kernel and kernel-gradient amplitudes.
struct PotentialModel {
  double gamma = 0.5;
  double delta = 0.5;
  double beta0 = 1.0;
  double c1 = 1.0;
  double c2 = 1.0;

  /// Throws DomainError naming the offending parameter. c1 = 0 is accepted and
  /// switches the collision operator off (pure damped transport).
  void validate() const;
  /// Rate a in the Gaussian factor exp(-a (r^2 + ((|z|^2-|z*|^2)/r)^2)).
  double gaussian_rate() const { return 0.25 * (1.0 - delta); }
};

/// Isotropic kernel shape k(zeta, zeta*) written as a function of |zeta|, |zeta*|
/// and |zeta - zeta*|. Alternative kernels plug in through this interface.
class KernelFunction {
 public:
  virtual ~KernelFunction() = default;
  virtual double operator()(double speed, double speed_star, double separation) const = 0;
  /// Decay rate of the Gaussian envelope in the separation; drives truncation choices.
  virtual double gaussian_rate() const = 0;
};

/// c1 |z-z*|^-1 (1+|z|+|z*|)^-(1-gamma) exp(-a(|z-z*|^2 + ((|z|^2-|z*|^2)/|z-z*|)^2)).
/// Saturates the standard cutoff bound: symmetric, 1/r singular, Gaussian decay.
class ModelKernel final : public KernelFunction {
 public:
  explicit ModelKernel(const PotentialModel& m);
  double operator()(double speed, double speed_star, double separation) const override;
  double gaussian_rate() const override { return rate_; }

 private:
  double c1_;
  double soft_exponent_;  // 1 - gamma
  double rate_;
};

/// Collision frequency nu(|zeta|) = beta0 int exp(-|eta|^2) |eta - zeta|^gamma d eta,
/// reduced to a radial integral (the angular part is analytic) and evaluated by
/// adaptive Gauss-Kronrod quadrature.
double collision_frequency(const PotentialModel& model, double speed);

/// Two-sided constants nu0 (1+s)^gamma <= nu(s) <= nu1 (1+s)^gamma on [0, s_max].
struct FrequencyBounds {
  double lower = 0.0;
  double upper = 0.0;
};
FrequencyBounds fit_frequency_bounds(const PotentialModel& model, double s_max = 50.0, int sweep = 2001);

/// Immutable (nu, k) evaluator pair. Safe to share across threads.
class CollisionKernel {
 public:
  explicit CollisionKernel(const PotentialModel& model);
  CollisionKernel(const PotentialModel& model, std::shared_ptr<const KernelFunction> shape);

  const PotentialModel& model() const { return model_; }
  double gamma() const { return model_.gamma; }

  /// nu(speed) from a cubic B-spline table (exact quadrature beyond the table).
  double frequency(double speed) const;
  double nu_lower() const { return bounds_.lower; }
  double nu_upper() const { return bounds_.upper; }
  const FrequencyBounds& frequency_bounds() const { return bounds_; }

  /// k(zeta, zeta*). Throws SingularityError on the diagonal.
  double value(const Velocity& zeta, const Velocity& zeta_star) const;
  double radial_value(double speed, double speed_star, double separation) const {
    return (*shape_)(speed, speed_star, separation);
  }
  double gaussian_rate() const { return shape_->gaussian_rate(); }
  bool is_null() const { return model_.c1 == 0.0; }

 private:
  struct FrequencyTable;
  PotentialModel model_;
  std::shared_ptr<const KernelFunction> shape_;
  std::shared_ptr<const FrequencyTable> table_;
  FrequencyBounds bounds_;
};

/// Spec-level operation names; thin wrappers over the methods above.
double collision_frequency(const CollisionKernel& kernel, double speed);
double kernel_value(const CollisionKernel& kernel, const Velocity& zeta, const Velocity& zeta_star);

using VelocityFunction = std::function<double(const Velocity&)>;

/// Upper bound of the kernel's Gaussian tail mass dropped by truncating the
/// separation at `r_max`.
double truncation_tail(const CollisionKernel& kernel, double r_max);

/// Visits the nodes of the collision quadrature centered at `zeta`:
/// visit(zeta_star, k(zeta, zeta_star) * weight). Spherical coordinates about
/// zeta absorb the 1/|zeta - zeta*| pole; the polar axis is zeta/|zeta|.
/// Requires the kernel to carry exp(-a ((|zeta|^2-|zeta*|^2)/r)^2) with
/// a = gaussian_rate(); the polar rule divides that factor out and integrates it exactly.
template <class Visit>
void for_each_collision_node(const CollisionKernel& kernel, const VelocityQuadrature& quad, const Velocity& zeta,
                             Visit&& visit);

/// K(g)(zeta) = int k(zeta, zeta*) g(zeta*) d zeta*.
double apply_K(const CollisionKernel& kernel, const VelocityFunction& g, const VelocityQuadrature& quad,
               const Velocity& zeta);

/// int |eta - z|^-(3-eps) exp(-a1 |eta-z|^2 - a2 (|eta|^2-|z|^2)^2 / |eta-z|^2) dz.
/// The polar integral is done in closed form (error functions) in coordinates
/// centered at eta; the remaining radial integral is adaptive.
double caflisch_integral(const Velocity& eta, double epsilon, double a1, double a2);

/// Central finite difference of the exact collision frequency.
double nu_derivative(const CollisionKernel& kernel, double speed, double step = 1e-3);

enum class NormExponent { One, Two, Infinity };

struct GradKReport {
  NormExponent p = NormExponent::Infinity;
  std::vector<double> ratios;  // ||grad K f||_p / ||f||_p per family member (zero-norm members skipped)
  double max_ratio = 0.0;
  double min_ratio = 0.0;
  double median_ratio = 0.0;
  std::size_t skipped = 0;
  bool bounded = false;  // finite, and no member beyond 10x the median
};

/// Finite-difference gradient of K(f) on the nodes of `outer` for a seeded family of
/// random bounded Gaussian mixtures (plus any extra members supplied).
GradKReport grad_K_norm_check(const CollisionKernel& kernel, const VelocityQuadrature& inner,
                              const VelocityQuadrature& outer, NormExponent p, int family_size, std::uint64_t seed,
                              const std::vector<VelocityFunction>& extra = {}, double fd_step = 1e-2);

// ---------------------------------------------------------------------------

template <class Visit>
void for_each_collision_node(const CollisionKernel& kernel, const VelocityQuadrature& quad, const Velocity& zeta,
                             Visit&& visit) {
  if (kernel.is_null()) return;
  const double s = norm(zeta);
  Vec3 axis{0.0, 0.0, 1.0};
  if (s > 1e-12) axis = zeta / s;
  Vec3 e1;
  Vec3 e2;
  orthonormal_frame(axis, e1, e2);

  const double a = kernel.gaussian_rate();
  const double sqa = std::sqrt(a);
  const double window = 5.0 / sqa;  // exp(-a u^2) < 1.4e-11 outside
  const double jac = 0.5 * std::sqrt(std::numbers::pi) / sqa;
  const Rule1D& radial = quad.radial();
  const Rule1D& polar = quad.polar();
  const int n_phi = quad.azimuth_count();
  const double w_phi = quad.azimuth_weight();

  // Azimuthal directions are shared by every (r, mu).
  std::vector<Vec3> ring(static_cast<std::size_t>(n_phi));
  for (int p = 0; p < n_phi; ++p) {
    const double phi = quad.azimuth_angle(p);
    ring[static_cast<std::size_t>(p)] = std::cos(phi) * e1 + std::sin(phi) * e2;
  }

  auto emit = [&](double r, double mu, double w_rm) {
    const double st = std::sqrt(std::max(0.0, 1.0 - mu * mu));
    const Vec3 along = zeta + (r * mu) * axis;
    const double s_star = std::sqrt(std::max(0.0, s * s + 2.0 * s * r * mu + r * r));
    const double k = kernel.radial_value(s, s_star, r);
    if (k == 0.0) return;
    const double wk = k * w_rm * w_phi;
    for (int p = 0; p < n_phi; ++p) visit(along + (r * st) * ring[static_cast<std::size_t>(p)], wk);
  };

  // |zeta*| has a cusp at zeta* = 0, reached on the sphere r = |zeta|; the radial
  // rule is split there so both pieces see a smooth integrand.
  const int n_r = quad.radial_count();
  std::vector<std::pair<double, double>> radial_nodes;  // (r, weight incl. r^2)
  auto add_piece = [&](int n, double lo, double hi) {
    const Rule1D& ref = gauss_legendre_reference(n);
    const double m = 0.5 * (lo + hi);
    const double h = 0.5 * (hi - lo);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const double r = m + h * ref.nodes[i];
      radial_nodes.emplace_back(r, h * ref.weights[i] * r * r);
    }
  };
  if (s > 1e-12 && s < quad.r_max()) {
    const int n_in = std::clamp(static_cast<int>(std::ceil(n_r * s / quad.r_max())) + 2, 3, n_r);
    add_piece(n_in, 0.0, s);
    add_piece(n_r, s, quad.r_max());
  } else {
    for (std::size_t ir = 0; ir < radial.size(); ++ir) radial_nodes.emplace_back(radial.nodes[ir], radial.weights[ir]);
  }

  for (const auto& [r, wr] : radial_nodes) {
    if (s <= 1e-12) {
      for (std::size_t im = 0; im < polar.size(); ++im) emit(r, polar.nodes[im], wr * polar.weights[im]);
      continue;
    }
    // u = 2 s mu + r = (|zeta*|^2 - |zeta|^2) / r carries the factor exp(-a u^2). The
    // substitution v = erf(sqrt(a) u) absorbs it, so the rule follows the ridge
    // |zeta*| ~ |zeta| at any speed.
    const double u_lo = std::max(r - 2.0 * s, -window);
    const double u_hi = std::min(r + 2.0 * s, window);
    if (u_lo >= u_hi) continue;
    const double v_lo = std::erf(sqa * u_lo);
    const double v_hi = std::erf(sqa * u_hi);
    const double span = v_hi - v_lo;
    if (!(span > 0.0)) continue;
    // At mu = -1, |zeta*| = sqrt((r-s)^2 + 2 r s (1+mu)) behaves like a square root
    // when r ~ s; v = v_lo + span w^2 makes it smooth in w.
    const bool cusp_end = u_lo == r - 2.0 * s;
    for (std::size_t im = 0; im < polar.size(); ++im) {
      const double x = 0.5 * (1.0 + polar.nodes[im]);
      double v = v_lo + span * x;
      double dv = 0.5 * span * polar.weights[im];
      if (cusp_end) {
        v = v_lo + span * x * x;
        dv *= 2.0 * x;
      }
      const double u = std::clamp(boost::math::erf_inv(v) / sqa, u_lo, u_hi);
      const double mu = std::clamp((u - r) / (2.0 * s), -1.0, 1.0);
      const double dmu = dv * jac * std::exp(a * u * u) / (2.0 * s);
      emit(r, mu, wr * dmu);
    }
  }
}

}  // namespace kinreg
