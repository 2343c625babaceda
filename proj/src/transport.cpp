#include "kinreg/transport.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <Eigen/Core>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kinreg/error.hpp"
#include "kinreg/parallel.hpp"
#include "kinreg/random.hpp"

namespace kinreg {

namespace {

constexpr double kPi = std::numbers::pi;

double pow_sigma(double dist2, double sigma) { return std::pow(dist2, 0.5 * sigma); }

// Random incoming boundary phase point: exit of a random interior ray, velocity
// flipped to point inward if needed.
std::pair<BoundaryPoint, Velocity> random_incoming(const ConvexDomain& domain, std::mt19937_64& rng) {
  for (;;) {
    const Point x = domain.sample_interior(rng);
    const Velocity eta = gaussian_vec(rng, 1.0);
    if (norm(eta) < 1e-6) continue;
    const BoundaryPoint X = domain.exit_point(x, eta);
    if (dot(eta, X.normal) < 0.0) return {X, eta};
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Boundary data

BoundaryDatum::BoundaryDatum(std::string name, Evaluator value, Envelope envelope, double holder_m,
                             double holder_sigma, Json params)
    : name_(std::move(name)),
      value_(std::move(value)),
      envelope_(std::move(envelope)),
      m_(holder_m),
      sigma_(holder_sigma),
      params_(std::move(params)) {
  if (!(holder_m >= 0.0) || !std::isfinite(holder_m)) throw DomainError("holder_m must be finite and >= 0");
  if (!(holder_sigma > 0.0 && holder_sigma < 0.5)) throw DomainError("holder_sigma must lie in (0, 1/2)");
}

BoundaryDatum BoundaryDatum::zero() {
  return BoundaryDatum(
      "zero", [](const BoundaryPoint&, const Velocity&) { return 0.0; }, [](const Velocity&) { return 0.0; }, 0.0,
      0.4);
}

BoundaryDatum BoundaryDatum::constant(double c) {
  if (!std::isfinite(c)) throw DomainError("constant boundary value must be finite");
  return BoundaryDatum(
      "constant", [c](const BoundaryPoint&, const Velocity&) { return c; },
      [c](const Velocity&) { return std::abs(c); }, 0.0, 0.4, Json{{"value", c}});
}

BoundaryDatum BoundaryDatum::holder_family(const ConvexDomain& domain, double amplitude, double bump, double sigma,
                                           std::uint64_t seed) {
  if (!(sigma > 0.0 && sigma < 0.5)) throw DomainError("holder_sigma must lie in (0, 1/2)");
  if (!std::isfinite(amplitude) || !(bump >= 0.0)) throw DomainError("holder family needs finite A and B >= 0");
  const Point x_star = domain.center() + domain.ray_length(domain.center(), {1.0, 0.0, 0.0}) * Vec3{1.0, 0.0, 0.0};
  const Velocity eta_star{-1.0, 0.0, 0.0};
  const double diam = domain.diameter();
  auto value = [=](const BoundaryPoint& X, const Velocity& eta) {
    const double d2 = norm2(X.point - x_star) + norm2(eta - eta_star);
    return amplitude * std::exp(-norm2(eta)) * (1.0 + bump * pow_sigma(d2, sigma));
  };
  auto envelope = [=](const Velocity& eta) {
    const double s = norm(eta);
    return std::abs(amplitude) * std::exp(-s * s) * (1.0 + bump * pow_sigma(diam * diam + (s + 1.0) * (s + 1.0), sigma));
  };
  Json params{{"amplitude", amplitude}, {"bump", bump}, {"sigma", sigma}};
  // Placeholder M so the sampler can evaluate the datum; replaced below.
  BoundaryDatum probe("holder", value, envelope, 0.0, sigma, params);
  const double m = 1.25 * sampled_holder_quotient(probe, domain, 20000, seed, sigma);
  params["holder_m"] = m;
  return BoundaryDatum("holder", value, envelope, m, sigma, params);
}

double sampled_holder_quotient(const BoundaryDatum& datum, const ConvexDomain& domain, std::size_t pairs,
                               std::uint64_t seed, double sigma) {
  std::vector<double> q(pairs, 0.0);
  parallel_for(pairs, [&](std::size_t n) {
    auto rng = sample_rng(seed, 0x401d, n);
    auto [X, eta] = random_incoming(domain, rng);
    BoundaryPoint Y;
    Velocity omega;
    if (n % 2 == 0) {
      std::tie(Y, omega) = random_incoming(domain, rng);
    } else {
      // Nearby partner: shift the velocity and move along the boundary.
      const double scale = std::pow(10.0, uniform(rng, -4.0, -0.5));
      omega = eta + gaussian_vec(rng, scale);
      const Point inner = X.point - 0.5 * scale * X.normal + gaussian_vec(rng, scale);
      if (!domain.contains(inner)) return;
      const Vec3 dir = inner - domain.center();
      if (norm(dir) < 1e-12) return;
      Y.point = domain.center() + domain.ray_length(domain.center(), normalized(dir)) * normalized(dir);
      Y.normal = domain.normal(Y.point);
      if (dot(omega, Y.normal) >= 0.0) return;
    }
    const double d2 = norm2(X.point - Y.point) + norm2(eta - omega);
    if (d2 <= 0.0) return;
    q[n] = std::abs(datum(X, eta) - datum(Y, omega)) / pow_sigma(d2, sigma);
  });
  return *std::max_element(q.begin(), q.end());
}

// ---------------------------------------------------------------------------
// Spatial lattice

SpatialGrid::SpatialGrid(const ConvexDomain& domain, int nodes_per_axis) : n_(nodes_per_axis) {
  if (n_ < 3) throw Error(ErrorCode::InvalidArgument, "spatial grid needs at least 3 nodes per axis");
  lo_ = domain.box_lo();
  const Point hi = domain.box_hi();
  h_ = (hi - lo_) / static_cast<double>(n_ - 1);
  const int cells = n_ - 1;
  auto node_pos = [&](int i, int j, int k) { return lo_ + Vec3{i * h_.x, j * h_.y, k * h_.z}; };

  std::vector<char> cell_on(static_cast<std::size_t>(cells * cells * cells), 0);
  active_.assign(static_cast<std::size_t>(n_ * n_ * n_), -1);
  for (int i = 0; i < cells; ++i) {
    for (int j = 0; j < cells; ++j) {
      for (int k = 0; k < cells; ++k) {
        const Point a = node_pos(i, j, k);
        const Point b = node_pos(i + 1, j + 1, k + 1);
        if (!domain.intersects_box(a, b)) continue;
        cell_on[static_cast<std::size_t>((i * cells + j) * cells + k)] = 1;
        for (int c = 0; c < 8; ++c) active_[static_cast<std::size_t>(lattice(i + (c >> 2), j + ((c >> 1) & 1), k + (c & 1)))] = 0;
      }
    }
  }
  const double hmin = std::min({h_.x, h_.y, h_.z});
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      for (int k = 0; k < n_; ++k) {
        int& slot = active_[static_cast<std::size_t>(lattice(i, j, k))];
        if (slot < 0) continue;
        slot = static_cast<int>(positions_.size());
        const Point p = node_pos(i, j, k);
        positions_.push_back(p);
        const bool inside = domain.contains(p) && domain.distance_to_boundary(p) > 1e-3 * hmin;
        interior_.push_back(inside ? 1 : 0);
        if (inside) {
          eval_points_.push_back(p);
        } else {
          Vec3 dir = p - domain.center();
          if (norm(dir) < 1e-12) dir = {1.0, 0.0, 0.0};
          dir = normalized(dir);
          const double tb = domain.ray_length(domain.center(), dir);
          eval_points_.push_back(domain.center() + std::max(0.0, tb - 1e-3 * hmin) * dir);
        }
      }
    }
  }

  // Hat-function masses by midpoint subsampling of each cell.
  weights_.assign(positions_.size(), 0.0);
  constexpr int kSub = 4;
  const double dv = h_.x * h_.y * h_.z / (kSub * kSub * kSub);
  for (int i = 0; i < cells; ++i) {
    for (int j = 0; j < cells; ++j) {
      for (int k = 0; k < cells; ++k) {
        if (!cell_on[static_cast<std::size_t>((i * cells + j) * cells + k)]) continue;
        for (int a = 0; a < kSub; ++a) {
          for (int b = 0; b < kSub; ++b) {
            for (int c = 0; c < kSub; ++c) {
              const double fx = (a + 0.5) / kSub;
              const double fy = (b + 0.5) / kSub;
              const double fz = (c + 0.5) / kSub;
              if (!domain.contains(node_pos(i, j, k) + Vec3{fx * h_.x, fy * h_.y, fz * h_.z})) continue;
              for (int corner = 0; corner < 8; ++corner) {
                const int di = corner >> 2;
                const int dj = (corner >> 1) & 1;
                const int dk = corner & 1;
                const double w = (di ? fx : 1 - fx) * (dj ? fy : 1 - fy) * (dk ? fz : 1 - fz);
                weights_[static_cast<std::size_t>(active_[static_cast<std::size_t>(lattice(i + di, j + dj, k + dk))])] += w * dv;
              }
            }
          }
        }
      }
    }
  }
}

SpatialGrid::Stencil SpatialGrid::locate(const Point& x) const {
  Stencil st{};
  int idx[3];
  double frac[3];
  for (int d = 0; d < 3; ++d) {
    const double t = (x[d] - lo_[d]) / h_[d];
    int c = static_cast<int>(std::floor(t));
    c = std::clamp(c, 0, n_ - 2);
    idx[d] = c;
    frac[d] = std::clamp(t - c, 0.0, 1.0);
  }
  double missing = 0.0;
  int last_active = -1;
  for (int corner = 0; corner < 8; ++corner) {
    const int di = corner >> 2;
    const int dj = (corner >> 1) & 1;
    const int dk = corner & 1;
    const double w = (di ? frac[0] : 1 - frac[0]) * (dj ? frac[1] : 1 - frac[1]) * (dk ? frac[2] : 1 - frac[2]);
    const int a = active_[static_cast<std::size_t>(lattice(idx[0] + di, idx[1] + dj, idx[2] + dk))];
    if (a < 0) {
      // Only reachable when a generic body's cell test missed a sliver.
      st.node[static_cast<std::size_t>(corner)] = 0;
      st.weight[static_cast<std::size_t>(corner)] = 0.0;
      missing += w;
      continue;
    }
    last_active = a;
    st.node[static_cast<std::size_t>(corner)] = static_cast<std::uint32_t>(a);
    st.weight[static_cast<std::size_t>(corner)] = w;
  }
  if (missing > 0.0) {
    if (last_active < 0) throw DomainError("point lies outside the spatial grid's active cells");
    const double keep = 1.0 - missing;
    for (auto& w : st.weight) w = keep > 0.0 ? w / keep : 0.0;
    if (!(keep > 0.0)) {
      st.node[0] = static_cast<std::uint32_t>(last_active);
      st.weight[0] = 1.0;
    }
  }
  return st;
}

// ---------------------------------------------------------------------------
// Velocity interpolation

VelocityInterpolant::VelocityInterpolant(const VelocityQuadrature& grid) : grid_(&grid) {}

namespace {

// Bracketing pair and weight of the upper node for a sorted node list, constant beyond the ends.
inline void bracket(const std::vector<double>& nodes, double t, int& lo, int& hi, double& w_hi) {
  const int n = static_cast<int>(nodes.size());
  if (n == 1 || t <= nodes.front()) {
    lo = hi = 0;
    w_hi = 0.0;
    return;
  }
  if (t >= nodes.back()) {
    lo = hi = n - 1;
    w_hi = 0.0;
    return;
  }
  hi = static_cast<int>(std::upper_bound(nodes.begin(), nodes.end(), t) - nodes.begin());
  lo = hi - 1;
  w_hi = (t - nodes[static_cast<std::size_t>(lo)]) / (nodes[static_cast<std::size_t>(hi)] - nodes[static_cast<std::size_t>(lo)]);
}

}  // namespace

int VelocityInterpolant::weights(const Velocity& v, std::array<std::uint32_t, 8>& index,
                                 std::array<double, 8>& weight) const {
  const VelocityQuadrature& g = *grid_;
  const double rho = norm(v);
  if (rho > g.r_max()) return 0;
  int r0, r1, m0, m1;
  double wr, wm;
  bracket(g.radial().nodes, rho, r0, r1, wr);
  const double mu = rho > 0.0 ? std::clamp(v.z / rho, -1.0, 1.0) : 0.0;
  bracket(g.polar().nodes, mu, m0, m1, wm);
  const int np = g.azimuth_count();
  double phi = std::atan2(v.y, v.x);
  if (phi < 0.0) phi += 2.0 * kPi;
  // Azimuth nodes sit at (p + 1/2) 2 pi / np.
  const double t = phi / (2.0 * kPi) * np - 0.5;
  const double tf = std::floor(t);
  const double wp = t - tf;
  int p0 = static_cast<int>(tf) % np;
  if (p0 < 0) p0 += np;
  const int p1 = (p0 + 1) % np;

  int count = 0;
  const int rs[2] = {r0, r1};
  const double rw[2] = {1.0 - wr, wr};
  const int ms[2] = {m0, m1};
  const double mw[2] = {1.0 - wm, wm};
  const int ps[2] = {p0, p1};
  const double pw[2] = {1.0 - wp, wp};
  for (int a = 0; a < 2; ++a) {
    if (rw[a] == 0.0) continue;
    for (int b = 0; b < 2; ++b) {
      if (mw[b] == 0.0) continue;
      for (int c = 0; c < 2; ++c) {
        if (pw[c] == 0.0) continue;
        index[static_cast<std::size_t>(count)] = static_cast<std::uint32_t>(g.index(rs[a], ms[b], ps[c]));
        weight[static_cast<std::size_t>(count)] = rw[a] * mw[b] * pw[c];
        ++count;
      }
    }
  }
  return count;
}

// ---------------------------------------------------------------------------
// Problem

PhaseGrid::PhaseGrid(const ConvexDomain& domain, const PhaseGridSpec& s)
    : spec(s),
      space(domain, s.spatial_nodes),
      velocity(VelocityQuadrature::with_angular_count(s.r_max, s.radial_nodes, s.angular_nodes)),
      collision(s.r_max, s.collision_radial, s.collision_polar, s.collision_azimuth),
      path(s.path_order, s.path_panels) {}

TransportProblem::TransportProblem(ConvexDomain domain, CollisionKernel kernel, BoundaryDatum datum,
                                   const PhaseGridSpec& spec)
    : domain_(std::move(domain)),
      kernel_(std::move(kernel)),
      datum_(std::move(datum)),
      grid_(domain_, spec),
      interp_(grid_.velocity) {
  const std::size_t nv = velocity_size();
  nu_.resize(nv);
  for (std::size_t k = 0; k < nv; ++k) nu_[k] = kernel_.frequency(grid_.velocity.speed(k));
  matrix_.assign(nv * nv, 0.0);
  parallel_for(nv, [&](std::size_t k) {
    const std::vector<double> row = collision_weights(grid_.velocity.node(k));
    std::copy(row.begin(), row.end(), matrix_.begin() + static_cast<std::ptrdiff_t>(k * nv));
  });
}

std::vector<double> TransportProblem::collision_weights(const Velocity& zeta) const {
  return collision_weights(zeta, grid_.collision);
}

std::vector<double> TransportProblem::collision_weights(const Velocity& zeta, const VelocityQuadrature& rule) const {
  std::vector<double> w(velocity_size(), 0.0);
  std::array<std::uint32_t, 8> idx;
  std::array<double, 8> hw;
  for_each_collision_node(kernel_, rule, zeta, [&](const Velocity& z, double wk) {
    const int n = interp_.weights(z, idx, hw);
    for (int c = 0; c < n; ++c) w[idx[static_cast<std::size_t>(c)]] += wk * hw[static_cast<std::size_t>(c)];
  });
  return w;
}

double TransportProblem::boundary_term(const Point& x, const Velocity& zeta, double nu) const {
  if (datum_.is_zero() || norm(zeta) < grid_.spec.small_speed) return 0.0;
  const double tau = domain_.exit_time(x, zeta);
  const double damp = std::exp(-nu * tau);
  if (damp == 0.0) return 0.0;
  const BoundaryPoint X{x - tau * zeta, domain_.normal(x - tau * zeta)};
  return datum_(X, zeta) * damp;
}

double TransportProblem::boundary_term(const Point& x, const Velocity& zeta) const {
  return boundary_term(x, zeta, kernel_.frequency(norm(zeta)));
}

// ---------------------------------------------------------------------------
// Field

DistributionField::DistributionField(std::shared_ptr<const TransportProblem> problem)
    : DistributionField(problem, std::vector<double>(problem->spatial_size() * problem->velocity_size(), 0.0)) {}

DistributionField::DistributionField(std::shared_ptr<const TransportProblem> problem, std::vector<double> values)
    : problem_(std::move(problem)), values_(std::move(values)) {
  if (values_.size() != spatial_size() * velocity_size()) {
    throw Error(ErrorCode::InvalidArgument, "field size does not match the phase grid");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw DomainError("field values must be finite");
  }
  compute_source();
}

void DistributionField::compute_source() {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto nx = static_cast<Eigen::Index>(spatial_size());
  const auto nv = static_cast<Eigen::Index>(velocity_size());
  source_.assign(spatial_size() * velocity_size(), 0.0);
  if (problem_->kernel().is_null()) return;
  Eigen::Map<const RowMat> w(problem_->collision_row(0), nv, nv);
  Eigen::Map<const Eigen::MatrixXd> ft(values_.data(), nv, nx);  // column i = f(x_i, .)
  Eigen::Map<RowMat> h(source_.data(), nv, nx);
  h.noalias() = w * ft;
}

bool DistributionField::is_zero() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

double DistributionField::source_at(const Point& y, std::size_t k) const {
  const auto st = problem_->grid().space.locate(y);
  const double* col = &source_[k * spatial_size()];
  double acc = 0.0;
  for (int c = 0; c < 8; ++c) acc += st.weight[static_cast<std::size_t>(c)] * col[st.node[static_cast<std::size_t>(c)]];
  return acc;
}

double DistributionField::collided(const Point& y, std::size_t k) const {
  if (problem_->kernel().is_null()) return 0.0;
  const Velocity zeta = problem_->grid().velocity.node(k);
  const double tau = problem_->domain().exit_time(y, zeta);
  std::vector<PathRule::Node> nodes;
  problem_->grid().path.nodes(tau, problem_->nu(k), nodes);
  double acc = 0.0;
  for (const auto& n : nodes) acc += n.weight * source_at(y - n.s * zeta, k);
  return acc;
}

double DistributionField::collided(const Point& y, const Velocity& zeta, const std::vector<double>& weights) const {
  if (problem_->kernel().is_null()) return 0.0;
  const double nu = problem_->kernel().frequency(norm(zeta));
  const double tau = problem_->domain().exit_time(y, zeta);
  std::vector<PathRule::Node> nodes;
  problem_->grid().path.nodes(tau, nu, nodes);
  const std::size_t nv = velocity_size();
  double acc = 0.0;
  for (const auto& n : nodes) {
    const auto st = problem_->grid().space.locate(y - n.s * zeta);
    double kf = 0.0;
    for (int c = 0; c < 8; ++c) {
      const double sw = st.weight[static_cast<std::size_t>(c)];
      if (sw == 0.0) continue;
      const double* row = &values_[st.node[static_cast<std::size_t>(c)] * nv];
      double dotp = 0.0;
      for (std::size_t j = 0; j < nv; ++j) dotp += weights[j] * row[j];
      kf += sw * dotp;
    }
    acc += n.weight * kf;
  }
  return acc;
}

double DistributionField::evaluate(const Point& y, const Velocity& zeta) const {
  if (norm(zeta) == 0.0) throw NoTrajectoryError("zero velocity has no backward trajectory");
  const double b = problem_->boundary_term(y, zeta);
  if (problem_->kernel().is_null()) return b;
  return b + collided(y, zeta, problem_->collision_weights(zeta));
}

double DistributionField::evaluate_node_velocity(const Point& y, std::size_t k) const {
  return problem_->boundary_term(y, problem_->grid().velocity.node(k), problem_->nu(k)) + collided(y, k);
}

// ---------------------------------------------------------------------------
// Solver

Json ConvergenceReport::to_json() const {
  Json j;
  j["status"] = status;
  j["iterations"] = iterations;
  j["update_history"] = update_history;
  j["update_ratios"] = update_ratios;
  j["residual"] = residual;
  return j;
}

namespace {

// Boundary terms at every phase node (fixed across iterations).
std::vector<double> boundary_grid(const TransportProblem& problem) {
  const std::size_t nx = problem.spatial_size();
  const std::size_t nv = problem.velocity_size();
  std::vector<double> out(nx * nv, 0.0);
  if (problem.datum().is_zero()) return out;
  const auto& space = problem.grid().space;
  const auto& vel = problem.grid().velocity;
  parallel_for(nv, [&](std::size_t k) {
    for (std::size_t i = 0; i < nx; ++i) {
      out[i * nv + k] = problem.boundary_term(space.evaluation_point(i), vel.node(k), problem.nu(k));
    }
  });
  return out;
}

std::vector<double> sweep_with(const TransportProblem& problem, const std::vector<double>& boundary,
                               const DistributionField& f) {
  const std::size_t nx = problem.spatial_size();
  const std::size_t nv = problem.velocity_size();
  std::vector<double> next(boundary);
  if (problem.kernel().is_null() || f.is_zero()) return next;
  const auto& space = problem.grid().space;
  parallel_for(nv, [&](std::size_t k) {
    for (std::size_t i = 0; i < nx; ++i) next[i * nv + k] += f.collided(space.evaluation_point(i), k);
  });
  return next;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

std::vector<double> transport_sweep(const TransportProblem& problem, const DistributionField& f) {
  return sweep_with(problem, boundary_grid(problem), f);
}

SolveResult picard_solve(std::shared_ptr<const TransportProblem> problem, double tol, int max_iter) {
  if (!(tol > 0.0)) throw DomainError("tol must be positive");
  if (max_iter < 1) throw DomainError("max_iter must be at least 1");
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> boundary = boundary_grid(*problem);
  DistributionField f(problem);
  ConvergenceReport rep;
  rep.status = "diverged";
  for (int it = 1; it <= max_iter; ++it) {
    std::vector<double> next = sweep_with(*problem, boundary, f);
    const double upd = sup_diff(next, f.values());
    rep.iterations = it;
    rep.update_history.push_back(upd);
    if (rep.update_history.size() >= 2) {
      const double prev = rep.update_history[rep.update_history.size() - 2];
      rep.update_ratios.push_back(prev > 0.0 ? upd / prev : 0.0);
    }
    bool finite = true;
    for (double v : next) finite = finite && std::isfinite(v);
    if (!finite) break;
    f = DistributionField(problem, std::move(next));
    if (upd < tol) {
      rep.status = "converged";
      break;
    }
    if (rep.update_history.size() > 3 && upd > 1e6 * rep.update_history.front()) break;
  }
  if (rep.status == "converged") {
    rep.residual = sup_diff(sweep_with(*problem, boundary, f), f.values());
  } else {
    rep.residual = rep.update_history.empty() ? 0.0 : rep.update_history.back();
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(f), std::move(rep)};
}

// ---------------------------------------------------------------------------
// Decomposition

double damped_transport_rhs(const DistributionField& field, const BoundaryDatum& bdry, const CollisionKernel& kernel,
                            const ConvexDomain& domain, const Point& x, const Velocity& zeta) {
  double out = evaluate_I(bdry, kernel, domain, x, zeta);
  if (kernel.is_null() || field.problem().kernel().is_null()) return out;
  out += field.collided(x, zeta, field.problem().collision_weights(zeta));
  return out;
}

double evaluate_I(const BoundaryDatum& bdry, const CollisionKernel& kernel, const ConvexDomain& domain,
                  const Point& x, const Velocity& zeta) {
  const double tau = domain.exit_time(x, zeta);
  if (bdry.is_zero()) return 0.0;
  const double damp = std::exp(-kernel.frequency(norm(zeta)) * tau);
  if (damp == 0.0) return 0.0;
  return bdry(domain.exit_point(x, zeta), zeta) * damp;
}

double evaluate_II(const BoundaryDatum& bdry, const CollisionKernel& kernel, const ConvexDomain& domain,
                   const VelocityQuadrature& quad, const Point& x, const Velocity& zeta, const PathRule& path) {
  const double tau = domain.exit_time(x, zeta);
  if (bdry.is_zero() || kernel.is_null()) return 0.0;
  std::vector<PathRule::Node> nodes;
  path.nodes(tau, kernel.frequency(norm(zeta)), nodes);
  double acc = 0.0;
  for (const auto& n : nodes) {
    const Point y = x - n.s * zeta;
    double k_of_i = 0.0;
    for_each_collision_node(kernel, quad, zeta, [&](const Velocity& z, double wk) {
      if (norm2(z) < 1e-24) return;
      k_of_i += wk * evaluate_I(bdry, kernel, domain, y, z);
    });
    acc += n.weight * k_of_i;
  }
  return acc;
}

DistributionField boundary_field(std::shared_ptr<const TransportProblem> problem) {
  std::vector<double> values = boundary_grid(*problem);
  return DistributionField(std::move(problem), std::move(values));
}

double evaluate_II_discrete(const DistributionField& boundary, const Point& x, const Velocity& zeta) {
  const TransportProblem& problem = boundary.problem();
  problem.domain().exit_time(x, zeta);
  if (problem.datum().is_zero() || problem.kernel().is_null()) return 0.0;
  return boundary.collided(x, zeta, problem.collision_weights(zeta));
}

double evaluate_II_pointwise(const TransportProblem& problem, const Point& x, const Velocity& zeta) {
  const double tau = problem.domain().exit_time(x, zeta);
  if (problem.datum().is_zero() || problem.kernel().is_null()) return 0.0;
  const std::vector<double> w = problem.collision_weights(zeta);
  const auto& vel = problem.grid().velocity;
  std::vector<PathRule::Node> nodes;
  problem.grid().path.nodes(tau, problem.kernel().frequency(norm(zeta)), nodes);
  double acc = 0.0;
  for (const auto& n : nodes) {
    const Point y = x - n.s * zeta;
    double k_of_i = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (w[j] != 0.0) k_of_i += w[j] * problem.boundary_term(y, vel.node(j), problem.nu(j));
    }
    acc += n.weight * k_of_i;
  }
  return acc;
}

double evaluate_G(const DistributionField& field, const Point& x0, const Velocity& /*zeta*/,
                  const std::vector<double>& weights) {
  double acc = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] != 0.0) acc += weights[j] * field.collided(x0, j);
  }
  return acc;
}

double evaluate_G(const DistributionField& field, const Point& x0, const Velocity& zeta) {
  if (!field.problem().domain().contains(x0)) throw DomainError("G needs an interior point");
  if (field.problem().kernel().is_null()) return 0.0;
  return evaluate_G(field, x0, zeta, field.problem().collision_weights(zeta));
}

double evaluate_III(const DistributionField& field, const Point& x, const Velocity& zeta) {
  const TransportProblem& problem = field.problem();
  const double tau = problem.domain().exit_time(x, zeta);
  if (problem.kernel().is_null() || field.is_zero()) return 0.0;
  const std::vector<double> w = problem.collision_weights(zeta);
  std::vector<PathRule::Node> nodes;
  problem.grid().path.nodes(tau, problem.kernel().frequency(norm(zeta)), nodes);
  double acc = 0.0;
  for (const auto& n : nodes) acc += n.weight * evaluate_G(field, x - n.s * zeta, zeta, w);
  return acc;
}

// ---------------------------------------------------------------------------
// Two parametrizations of G

double FieldSource::operator()(const Point& y, const Velocity& zeta) const {
  const TransportProblem& p = field_->problem();
  VelocityInterpolant interp(p.grid().velocity);
  std::array<std::uint32_t, 8> idx;
  std::array<double, 8> w;
  const int n = interp.weights(zeta, idx, w);
  double acc = 0.0;
  for (int c = 0; c < n; ++c) acc += w[static_cast<std::size_t>(c)] * field_->source_at(y, idx[static_cast<std::size_t>(c)]);
  return acc;
}

double evaluate_G_velocity_form(const CollisionSource& source, const CollisionKernel& kernel,
                                const ConvexDomain& domain, const Point& x0, const Velocity& zeta,
                                const GQuadrature& q) {
  if (!domain.contains(x0)) throw DomainError("G needs an interior point");
  double acc = 0.0;
  std::vector<PathRule::Node> nodes;
  for_each_collision_node(kernel, q.collision, zeta, [&](const Velocity& z, double wk) {
    const double speed = norm(z);
    if (speed < 1e-12) return;
    q.path.nodes(domain.exit_time(x0, z), kernel.frequency(speed), nodes);
    double inner = 0.0;
    for (const auto& n : nodes) inner += n.weight * source(x0 - n.s * z, z);
    acc += wk * inner;
  });
  return acc;
}

double evaluate_G_spatial_form(const CollisionSource& source, const CollisionKernel& kernel,
                               const ConvexDomain& domain, const Point& x0, const Velocity& zeta,
                               const GQuadrature& q) {
  if (!domain.contains(x0)) throw DomainError("G needs an interior point");
  if (kernel.is_null()) return 0.0;
  using boost::math::quadrature::gauss_kronrod;
  const double s = norm(zeta);
  const double r_max = q.collision.r_max();
  Vec3 axis{0.0, 0.0, 1.0};
  if (s > 1e-12) axis = zeta / s;
  Vec3 e1, e2;
  orthonormal_frame(axis, e1, e2);
  const int n_phi = q.azimuth_nodes;
  const double w_phi = 2.0 * kPi / n_phi;
  std::vector<PathRule::Node> nodes;

  // Direction w = -(x0 - y)/r is replaced by the unit vector from y toward x0; zeta' = rho w.
  auto at_direction = [&](double theta, double rho) {
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    double acc = 0.0;
    for (int p = 0; p < n_phi; ++p) {
      const double phi = (p + 0.5) * w_phi;
      const Vec3 w = ct * axis + st * (std::cos(phi) * e1 + std::sin(phi) * e2);
      const Velocity z = rho * w;
      const double sep = norm(zeta - z);
      if (sep < 1e-300) continue;
      const double k = kernel.radial_value(s, rho, sep);
      if (k == 0.0) continue;
      // y = x0 - r w ranges over the chord behind x0; the damping rate in r is nu/rho.
      const double reach = domain.ray_length(x0, -w);
      q.path.nodes(reach, kernel.frequency(rho) / rho, nodes);
      double inner = 0.0;
      for (const auto& n : nodes) inner += n.weight * source(x0 - n.s * w, z);
      acc += k * inner;
    }
    return acc * w_phi * rho * st;
  };
  auto speed_integral = [&](double theta) {
    auto f = [&](double rho) { return rho > 0.0 ? at_direction(theta, rho) : 0.0; };
    double total = 0.0;
    if (s > 1e-12 && s < r_max) {
      total += gauss_kronrod<double, 15>::integrate(f, 0.0, s, 12, q.tolerance);
      total += gauss_kronrod<double, 15>::integrate(f, s, r_max, 12, q.tolerance);
    } else {
      total += gauss_kronrod<double, 15>::integrate(f, 0.0, r_max, 12, q.tolerance);
    }
    return total;
  };
  // theta = pi t^2 clusters nodes at the pole where the kernel is singular.
  auto polar = [&](double t) { return speed_integral(kPi * t * t) * 2.0 * kPi * t; };
  return gauss_kronrod<double, 15>::integrate(polar, 0.0, 1.0, 10, q.tolerance);
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const DistributionField& field, const std::string& header_path, const std::string& csv_path) {
  const TransportProblem& p = field.problem();
  const auto& spec = p.grid().spec;
  Json h;
  h["format"] = "kinreg-field-v1";
  h["domain"] = p.domain().shape_name();
  h["spatial_nodes"] = spec.spatial_nodes;
  h["active_nodes"] = field.spatial_size();
  h["r_max"] = spec.r_max;
  h["radial_nodes"] = spec.radial_nodes;
  h["angular_nodes"] = spec.angular_nodes;
  h["velocity_nodes"] = field.velocity_size();
  h["rows"] = field.spatial_size() * field.velocity_size();
  h["columns"] = {"x1", "x2", "x3", "z1", "z2", "z3", "value"};
  h["datum"] = p.datum().name();
  std::ofstream hs(header_path);
  if (!hs) throw Error(ErrorCode::Io, "cannot write " + header_path);
  hs << h.dump(2) << "\n";

  std::FILE* out = std::fopen(csv_path.c_str(), "w");
  if (!out) throw Error(ErrorCode::Io, "cannot write " + csv_path);
  std::fputs("x1,x2,x3,z1,z2,z3,value\n", out);
  for (std::size_t i = 0; i < field.spatial_size(); ++i) {
    const Point& x = p.grid().space.position(i);
    for (std::size_t k = 0; k < field.velocity_size(); ++k) {
      const Velocity z = p.grid().velocity.node(k);
      std::fprintf(out, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", x.x, x.y, x.z, z.x, z.y, z.z, field.value(i, k));
    }
  }
  if (std::fclose(out) != 0) throw Error(ErrorCode::Io, "cannot finish " + csv_path);
}

DistributionField load_checkpoint(std::shared_ptr<const TransportProblem> problem, const std::string& header_path,
                                  const std::string& csv_path) {
  std::ifstream hs(header_path);
  if (!hs) throw Error(ErrorCode::Io, "cannot read " + header_path);
  Json h;
  try {
    hs >> h;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::Io, header_path + ": " + e.what());
  }
  const std::size_t nx = problem->spatial_size();
  const std::size_t nv = problem->velocity_size();
  if (h.value("active_nodes", std::size_t{0}) != nx || h.value("velocity_nodes", std::size_t{0}) != nv) {
    throw Error(ErrorCode::InvalidArgument, "checkpoint grid does not match the problem");
  }
  std::ifstream cs(csv_path);
  if (!cs) throw Error(ErrorCode::Io, "cannot read " + csv_path);
  std::string line;
  std::getline(cs, line);
  std::vector<double> values(nx * nv);
  for (std::size_t r = 0; r < values.size(); ++r) {
    if (!std::getline(cs, line)) throw Error(ErrorCode::Io, csv_path + ": too few rows");
    const auto pos = line.rfind(',');
    values[r] = std::strtod(line.c_str() + pos + 1, nullptr);
  }
  return DistributionField(std::move(problem), std::move(values));
}

}  // namespace kinreg
