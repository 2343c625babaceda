#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kinreg/kernel.hpp"
#include "kinreg/report.hpp"
#include "kinreg/transport.hpp"

namespace kinreg {

// ---------------------------------------------------------------------------
// Norms

/// (int |g|^2 nu dz)^(1/2) over the truncation ball of `quad`.
double lstar_norm_velocity(const VelocityFunction& g, const CollisionKernel& kernel, const VelocityQuadrature& quad);

struct NormReport {
  double lstar_zeta = 0.0;         // ||f(x_ref, .)||_{L*} at the node nearest x_ref
  double lstar_phase = 0.0;        // (int_Omega ||f(x, .)||^2_{L*} dx)^(1/2)
  double linf_x_lstar_zeta = 0.0;  // sup_x ||f(x, .)||_{L*}
  double linf_phase = 0.0;         // sup |f|
  Json to_json() const;
};

/// ||f(x_i, .)||^2_{L*} at every spatial node.
std::vector<double> node_lstar_squared(const DistributionField& field);
NormReport field_norms(const DistributionField& field, const Point& x_ref = {0.0, 0.0, 0.0});

// ---------------------------------------------------------------------------
// Weighted Hoelder moduli

/// Phase-space function to probe: (x, zeta) -> value.
using PhaseFunction = std::function<double(const Point&, const Velocity&)>;

struct HolderReport {
  double sigma = 0.0;
  int weight_power = 3;
  std::size_t pairs = 0;      // evaluated pairs (2N, prefix-shared)
  std::size_t excluded = 0;
  double weighted_sup = 0.0;  // sup of quotient / (1 + 1/d0)^power
  double weighted_sup_half = 0.0;
  double stability_ratio = 1.0;
  double raw_sup = 0.0;  // sup of the unweighted quotient
  /// Sup of the weighted quotient per dyadic separation band [2^-(j+1), 2^-j).
  std::vector<double> trend;
  bool growing = false;  // band sups increasing toward small separations by more than 10x
  std::vector<std::vector<double>> rows;  // x(3), zeta(3), y(3), xi(3), d0, separation, quotient, weighted
  CheckReport to_check(const std::string& name, const std::string& proposition, std::uint64_t seed) const;
};

struct HolderSampling {
  std::size_t half = 5000;   // N; 2N pairs are evaluated
  double d0_min = 0.1;
  double speed_scale = 1.0;  // velocities ~ N(0, speed_scale^2 I)
  double min_separation = 1e-3;
  double max_separation = 1.0;
  std::uint64_t seed = 1;
};

/// Random interior pairs (x, zeta), (y, xi) with d0 = min(d(x), d(y)) >= d0_min; the
/// quotient |f(x,zeta) - f(y,xi)| / (|zeta-xi|^2 + |x-y|^2)^(sigma/2) divided by
/// (1 + 1/d0)^power.
HolderReport weighted_holder(const PhaseFunction& f, const ConvexDomain& domain, double sigma, int power,
                             const HolderSampling& sampling);

/// Main-theorem modulus of the solved field (weight power 3).
HolderReport holder_modulus(const DistributionField& field, double sigma, const HolderSampling& sampling);

// ---------------------------------------------------------------------------
// Checks

/// Collision frequency against the closed forms at gamma = 0 and (gamma = 1, s = 0).
CheckReport nu_exactness_check(double beta0 = 1.0);
/// Fitted (nu0, nu1) re-asserted on fresh speeds in [0, 50].
CheckReport frequency_bounds_check(const CollisionKernel& kernel, std::size_t fresh, std::uint64_t seed);
/// (1+|eta|) I(eta) over integer |eta| in [0, 20]: max/min over [5, 20] <= 3 and
/// non-increasing there within 1%.
CheckReport caflisch_decay_check(double epsilon, double a1, double a2);
/// |nu'(s)| (1+s)^(1-gamma) over a speed sweep: finite, no growth in the tail.
/// Takes the model so gamma = 1 (hard spheres) can be probed.
CheckReport nu_derivative_check(const PotentialModel& model, double s_max, int points);
/// ||grad K f||_p / ||f||_p over a random family, on the given rule and its refinement.
CheckReport grad_K_check(const CollisionKernel& kernel, const VelocityQuadrature& inner,
                         const VelocityQuadrature& outer, NormExponent p, int family_size, std::uint64_t seed);
/// |K f(zeta)| (1+|zeta|)^((3-gamma)/2) / ||f||_{L*} over |zeta| in [0, 20] for a fixed
/// family, and the log-log slope of |K f| on [10, 20] for the Gaussian member.
CheckReport k_decay_check(const CollisionKernel& kernel, const VelocityQuadrature& quad);

/// sup |G(x0, zeta) - G(x1, zeta)| / (||f||_inf d^(1/2)) over sampled pairs with
/// |x0 - x1| = d, for d = 2^-1 .. 2^-levels. The pairs anchored at `base` are also
/// reported on their own.
CheckReport mixing_holder_check(const DistributionField& field, const Velocity& zeta, const Point& base,
                                int levels, std::size_t pairs, std::uint64_t seed);
/// |G(x0, z1) - G(x0, z2)| / (||f||_inf |z1 - z2|) over random pairs, with the
/// collision rule and its refinement, plus a shrinking-separation sequence.
CheckReport g_velocity_lipschitz_check(const DistributionField& field, const Point& x0, std::size_t pairs,
                                       std::uint64_t seed);
/// ||f~(x,.)||^2_{L*} against the convolution of |x|^-(2-alpha) with ||f(x,.)||^2_{L*},
/// where f~ is the collided part of f. The convolution is computed with a given
/// resolution and with twice that resolution.
CheckReport convolution_gain_check(const DistributionField& field, double alpha, std::size_t probes,
                                   std::uint64_t seed);
/// Weighted Hoelder sups of I (power 2) and II (power 3) for the problem's datum.
CheckReport boundary_preservation_check(std::shared_ptr<const TransportProblem> problem, double sigma,
                                        const HolderSampling& sampling);
/// |f(X, zeta)| <= 2 (3/(4 pi nu0))^(s/(3+2s)) M^(3/(3+2s)) ||f||^(2s/(3+2s))_{L^inf_x L*} at
/// sampled incoming boundary points.
CheckReport embedding_check(const DistributionField& field, std::size_t samples, std::uint64_t seed);

/// Self-consistency of a solved field: I + II + III against f at random grid nodes.
CheckReport decomposition_check(const DistributionField& field, std::size_t probes, double tolerance,
                                std::uint64_t seed);
/// The two parametrizations of G on an analytic source with the field's kernel and
/// domain.
CheckReport g_dual_form_check(const DistributionField& field, std::size_t probes, double tolerance,
                              std::uint64_t seed);
/// c1 = 0 version of the problem: the solver reproduces e^{-nu tau} times the datum.
CheckReport pure_transport_check(const TransportProblem& problem, double tolerance);

}  // namespace kinreg
