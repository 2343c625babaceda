#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "kinreg/geometry.hpp"
#include "kinreg/kernel.hpp"
#include "kinreg/quadrature.hpp"
#include "kinreg/report.hpp"

namespace kinreg {

/// Incoming data on the set of boundary phase points with zeta . n < 0, with a
/// declared envelope |f(X, eta)| <= phi(|eta|) and Hoelder data (M, sigma) in the
/// product metric (|eta-omega|^2 + |X-Y|^2)^(1/2).
class BoundaryDatum {
 public:
  using Evaluator = std::function<double(const BoundaryPoint&, const Velocity&)>;
  using Envelope = std::function<double(const Velocity&)>;

  BoundaryDatum(std::string name, Evaluator value, Envelope envelope, double holder_m, double holder_sigma,
                Json params = Json::object());

  static BoundaryDatum zero();
  static BoundaryDatum constant(double c);
  /// A e^{-|eta|^2} (1 + B (|X-X*|^2 + |eta-eta*|^2)^(sigma/2)) with X* the boundary
  /// point in direction e1 from the domain center and eta* = (-1, 0, 0). M is the
  /// largest sampled Hoelder quotient times 1.25.
  static BoundaryDatum holder_family(const ConvexDomain& domain, double amplitude, double bump, double sigma,
                                     std::uint64_t seed = 1);

  double operator()(const BoundaryPoint& X, const Velocity& eta) const { return value_(X, eta); }
  double envelope(const Velocity& eta) const { return envelope_(eta); }
  double holder_m() const { return m_; }
  double holder_sigma() const { return sigma_; }
  const std::string& name() const { return name_; }
  const Json& params() const { return params_; }
  bool is_zero() const { return name_ == "zero"; }

 private:
  std::string name_;
  Evaluator value_;
  Envelope envelope_;
  double m_;
  double sigma_;
  Json params_;
};

/// Largest Hoelder quotient of the datum over random pairs of incoming boundary
/// phase points (half of them at small separation).
double sampled_holder_quotient(const BoundaryDatum& datum, const ConvexDomain& domain, std::size_t pairs,
                               std::uint64_t seed, double sigma);

/// Uniform lattice over the domain's bounding box. Active nodes are the corners of
/// cells meeting the closed body; corners outside the body ("ghost" nodes) take
/// values at a point pulled just inside along the ray from the domain center.
class SpatialGrid {
 public:
  SpatialGrid(const ConvexDomain& domain, int nodes_per_axis);

  int nodes_per_axis() const { return n_; }
  std::size_t size() const { return positions_.size(); }
  const Vec3& spacing() const { return h_; }
  /// Lattice position of an active node.
  const Point& position(std::size_t i) const { return positions_[i]; }
  /// Interior point where the node's value is evaluated (the node itself when interior).
  const Point& evaluation_point(std::size_t i) const { return eval_points_[i]; }
  bool is_interior(std::size_t i) const { return interior_[i] != 0; }
  /// Integration weight: integral over the body of the node's trilinear hat function.
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<double>& weights() const { return weights_; }

  struct Stencil {
    std::array<std::uint32_t, 8> node;
    std::array<double, 8> weight;
  };
  /// Trilinear stencil at a point of the closed body.
  Stencil locate(const Point& x) const;

 private:
  int lattice(int i, int j, int k) const { return (i * n_ + j) * n_ + k; }

  int n_;
  Point lo_;
  Vec3 h_;
  std::vector<int> active_;  // lattice -> active index or -1
  std::vector<Point> positions_;
  std::vector<Point> eval_points_;
  std::vector<char> interior_;
  std::vector<double> weights_;
};

/// Hat-function interpolation on the (speed, polar cosine, azimuth) lattice of a
/// velocity grid: piecewise linear in each coordinate, constant beyond the first
/// and last speed and polar nodes, periodic in the azimuth, zero beyond r_max.
class VelocityInterpolant {
 public:
  explicit VelocityInterpolant(const VelocityQuadrature& grid);
  /// Writes up to 8 (index, weight) pairs; returns the count.
  int weights(const Velocity& v, std::array<std::uint32_t, 8>& index, std::array<double, 8>& weight) const;

 private:
  const VelocityQuadrature* grid_;
};

struct PhaseGridSpec {
  int spatial_nodes = 11;  // per axis
  double r_max = 12.0;
  int radial_nodes = 12;
  int angular_nodes = 48;
  int collision_radial = 16;
  int collision_polar = 16;
  int collision_azimuth = 16;
  int path_order = 4;
  int path_panels = 4;
  /// Velocities slower than this carry no boundary term (the damping underflows).
  double small_speed = 1e-3;
};

struct PhaseGrid {
  PhaseGrid(const ConvexDomain& domain, const PhaseGridSpec& spec);

  PhaseGridSpec spec;
  SpatialGrid space;
  VelocityQuadrature velocity;
  VelocityQuadrature collision;  // inner rule of the collision integral
  PathRule path;
};

/// Everything fixed by a scenario: body, gas, data and discretization, plus the
/// discrete collision operator K_h[g](zeta) = int k(zeta, z) (Pi g)(z) dz, where Pi
/// is the velocity hat interpolant of grid values.
class TransportProblem {
 public:
  TransportProblem(ConvexDomain domain, CollisionKernel kernel, BoundaryDatum datum, const PhaseGridSpec& spec);

  const ConvexDomain& domain() const { return domain_; }
  const CollisionKernel& kernel() const { return kernel_; }
  const BoundaryDatum& datum() const { return datum_; }
  const PhaseGrid& grid() const { return grid_; }
  std::size_t spatial_size() const { return grid_.space.size(); }
  std::size_t velocity_size() const { return grid_.velocity.size(); }

  /// Collision frequency at velocity node k (exact quadrature, cached).
  double nu(std::size_t k) const { return nu_[k]; }
  /// Row of K_h at a grid velocity: weights over grid values.
  const double* collision_row(std::size_t k) const { return &matrix_[k * velocity_size()]; }
  /// K_h weights at an arbitrary velocity.
  std::vector<double> collision_weights(const Velocity& zeta) const;
  /// Same with another collision rule (refinement studies).
  std::vector<double> collision_weights(const Velocity& zeta, const VelocityQuadrature& rule) const;

  /// Boundary term f(p(x,zeta), zeta) e^{-nu tau}; zero for slow velocities.
  double boundary_term(const Point& x, const Velocity& zeta, double nu) const;
  double boundary_term(const Point& x, const Velocity& zeta) const;

 private:
  ConvexDomain domain_;
  CollisionKernel kernel_;
  BoundaryDatum datum_;
  PhaseGrid grid_;
  VelocityInterpolant interp_;
  std::vector<double> nu_;
  std::vector<double> matrix_;  // row-major (velocity x velocity)
};

/// Field values f(x_i, zeta_k) on the phase grid, stored spatial-major, together with
/// the collision source h = K_h f at the nodes (stored velocity-major for path sweeps).
/// Off-grid values use the integral equation itself: boundary term plus the damped
/// path integral of the trilinearly interpolated source, re-quadratured at the
/// requested velocity.
class DistributionField {
 public:
  explicit DistributionField(std::shared_ptr<const TransportProblem> problem);
  DistributionField(std::shared_ptr<const TransportProblem> problem, std::vector<double> values);

  const TransportProblem& problem() const { return *problem_; }
  std::shared_ptr<const TransportProblem> problem_ptr() const { return problem_; }
  std::size_t spatial_size() const { return problem_->spatial_size(); }
  std::size_t velocity_size() const { return problem_->velocity_size(); }

  double value(std::size_t i, std::size_t k) const { return values_[i * velocity_size() + k]; }
  const std::vector<double>& values() const { return values_; }
  /// K_h f at spatial node i, velocity node k.
  double source(std::size_t i, std::size_t k) const { return source_[k * spatial_size() + i]; }

  /// Trilinear interpolant of K_h f at velocity node k.
  double source_at(const Point& y, std::size_t k) const;
  /// Collided part at velocity node k: int_0^tau e^{-nu s} (K_h f)(y - zeta_k s, zeta_k) ds.
  double collided(const Point& y, std::size_t k) const;
  /// Collided part at an arbitrary velocity, given its K_h weights.
  double collided(const Point& y, const Velocity& zeta, const std::vector<double>& weights) const;
  /// f(y, zeta) at any interior point and velocity.
  double evaluate(const Point& y, const Velocity& zeta) const;
  /// f(y, zeta_k) for a grid velocity.
  double evaluate_node_velocity(const Point& y, std::size_t k) const;
  bool is_zero() const;

 private:
  void compute_source();

  std::shared_ptr<const TransportProblem> problem_;
  std::vector<double> values_;
  std::vector<double> source_;
};

struct ConvergenceReport {
  std::string status;  // "converged" or "diverged"
  int iterations = 0;
  std::vector<double> update_history;  // sup |f_{n+1} - f_n|
  std::vector<double> update_ratios;   // successive update quotients
  double residual = 0.0;               // sup |f - RHS(f)| over the grid
  double seconds = 0.0;
  Json to_json() const;
};

struct SolveResult {
  DistributionField field;
  ConvergenceReport report;
};

/// One Jacobi sweep f -> I + T(K_h f) over every phase node.
std::vector<double> transport_sweep(const TransportProblem& problem, const DistributionField& f);

/// Picard iteration from f = 0 until the sup-norm update drops below tol.
SolveResult picard_solve(std::shared_ptr<const TransportProblem> problem, double tol, int max_iter);

/// f(p)e^{-nu tau} + int_0^tau e^{-nu s} K(f)(x - zeta s, zeta) ds with K(f) read from the field.
double damped_transport_rhs(const DistributionField& field, const BoundaryDatum& bdry, const CollisionKernel& kernel,
                            const ConvexDomain& domain, const Point& x, const Velocity& zeta);

/// I(x, zeta) = f(p(x,zeta), zeta) e^{-nu tau(x,zeta)}.
double evaluate_I(const BoundaryDatum& bdry, const CollisionKernel& kernel, const ConvexDomain& domain,
                  const Point& x, const Velocity& zeta);
/// II(x, zeta) = int_0^tau e^{-nu s} K[I](x - zeta s, zeta) ds with the collision
/// integral taken by `quad` centered at zeta.
double evaluate_II(const BoundaryDatum& bdry, const CollisionKernel& kernel, const ConvexDomain& domain,
                   const VelocityQuadrature& quad, const Point& x, const Velocity& zeta,
                   const PathRule& path = PathRule());
/// Grid values of I on the phase grid, as a field (its source is K_h I).
DistributionField boundary_field(std::shared_ptr<const TransportProblem> problem);
/// II as the solver represents it: damped path integral of the trilinear
/// interpolant of K_h I. `boundary` comes from boundary_field().
double evaluate_II_discrete(const DistributionField& boundary, const Point& x, const Velocity& zeta);
/// II with K_h applied to I at the exact path points (no spatial interpolation).
/// The gap to evaluate_II_discrete measures the spatial discretization error.
double evaluate_II_pointwise(const TransportProblem& problem, const Point& x, const Velocity& zeta);

/// G(x0, zeta) = int k(zeta, z) int_0^tau(x0,z) e^{-nu(z) s} K(f)(x0 - z s, z) ds dz with the
/// discrete collision operator (velocity form).
double evaluate_G(const DistributionField& field, const Point& x0, const Velocity& zeta);
double evaluate_G(const DistributionField& field, const Point& x0, const Velocity& zeta,
                  const std::vector<double>& weights);
/// III(x, zeta) = int_0^tau e^{-nu s} G(x - zeta s, zeta) ds.
double evaluate_III(const DistributionField& field, const Point& x, const Velocity& zeta);

/// Collision source S(y, z) standing for K(f)(y, z) in the G integral.
class CollisionSource {
 public:
  virtual ~CollisionSource() = default;
  virtual double operator()(const Point& y, const Velocity& zeta) const = 0;
};

/// K_h f read from a solved field: trilinear in space, velocity hat interpolation
/// of the grid values in the velocity.
class FieldSource final : public CollisionSource {
 public:
  explicit FieldSource(const DistributionField& field) : field_(&field) {}
  double operator()(const Point& y, const Velocity& zeta) const override;

 private:
  const DistributionField* field_;
};

struct GQuadrature {
  VelocityQuadrature collision{12.0, 16, 16, 16};  // velocity form: rule centered at zeta
  PathRule path{4, 4};
  // Spatial form: adaptive Gauss-Kronrod in the polar angle about zeta and in the
  // speed (split at |zeta|), uniform azimuth, damped path rule along each ray.
  double tolerance = 1e-8;
  int azimuth_nodes = 16;
};

/// G in the original (s, zeta') coordinates: collision rule centered at zeta, damped
/// path rule in s.
double evaluate_G_velocity_form(const CollisionSource& source, const CollisionKernel& kernel,
                                const ConvexDomain& domain, const Point& x0, const Velocity& zeta,
                                const GQuadrature& q = GQuadrature());
/// G in spatial coordinates centered at x0: y = x0 - r w, zeta' = rho w, whose
/// Jacobian rho r^2 cancels the |x0 - y|^-2 factor. The speed rule is split at |zeta|
/// and the direction rule uses zeta/|zeta| as polar axis with nodes clustered at the
/// kernel singularity.
double evaluate_G_spatial_form(const CollisionSource& source, const CollisionKernel& kernel,
                               const ConvexDomain& domain, const Point& x0, const Velocity& zeta,
                               const GQuadrature& q = GQuadrature());

/// Field checkpoint: JSON header describing the grid, CSV rows x1,x2,x3,z1,z2,z3,value.
void save_checkpoint(const DistributionField& field, const std::string& header_path, const std::string& csv_path);
/// Reads values back into a field over `problem` (grid must match the header).
DistributionField load_checkpoint(std::shared_ptr<const TransportProblem> problem, const std::string& header_path,
                                  const std::string& csv_path);

}  // namespace kinreg
