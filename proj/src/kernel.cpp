#include "kinreg/kernel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>

#include "kinreg/error.hpp"
#include "kinreg/parallel.hpp"
#include "kinreg/random.hpp"

namespace kinreg {

namespace {

using boost::math::quadrature::gauss_kronrod;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string(what) + " must be finite");
}

constexpr double kTableMax = 64.0;
constexpr double kTableStep = 1.0 / 128.0;

}  // namespace

void PotentialModel::validate() const {
  auto fail = [](const char* name, const char* rule) {
    throw DomainError(std::string(name) + " " + rule);
  };
  if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma", "must lie in [0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) fail("delta", "must lie in (0, 1)");
  if (!(beta0 > 0.0) || !std::isfinite(beta0)) fail("beta0", "must be positive");
  if (!(c1 >= 0.0) || !std::isfinite(c1)) fail("c1", "must be nonnegative");
  if (!(c2 > 0.0) || !std::isfinite(c2)) fail("c2", "must be positive");
}

ModelKernel::ModelKernel(const PotentialModel& m)
    : c1_(m.c1), soft_exponent_(1.0 - m.gamma), rate_(m.gaussian_rate()) {}

double ModelKernel::operator()(double speed, double speed_star, double separation) const {
  if (c1_ == 0.0) return 0.0;
  const double cross = (speed - speed_star) * (speed + speed_star) / separation;
  const double expo = -rate_ * (separation * separation + cross * cross) -
                      soft_exponent_ * std::log1p(speed + speed_star);
  return c1_ * std::exp(expo) / separation;
}

// nu(s) = beta0 * 2 pi / (s (gamma+2)) * int_0^inf r e^{-r^2} [(r+s)^{gamma+2} - |r-s|^{gamma+2}] dr
// after integrating the polar cosine analytically.
double collision_frequency(const PotentialModel& model, double speed) {
  require_finite(speed, "speed");
  if (speed < 0.0) throw DomainError("speed must be nonnegative");
  const double g = model.gamma;
  const double at_rest = 2.0 * std::numbers::pi * model.beta0 * std::tgamma(0.5 * (3.0 + g));
  if (g == 0.0) return model.beta0 * std::pow(std::numbers::pi, 1.5);
  if (speed < 1e-4) return at_rest * (1.0 + g * speed * speed / 3.0);

  const double e = g + 2.0;
  auto f = [&](double r) {
    return r * std::exp(-r * r) * (std::pow(r + speed, e) - std::pow(std::abs(r - speed), e));
  };
  constexpr double r_end = 10.0;  // e^{-100} tail
  const double tol = 1e-11;
  double acc = 0.0;
  if (speed < r_end) {
    acc += gauss_kronrod<double, 31>::integrate(f, 0.0, speed, 8, tol);
    acc += gauss_kronrod<double, 31>::integrate(f, speed, r_end, 8, tol);
  } else {
    acc += gauss_kronrod<double, 31>::integrate(f, 0.0, r_end, 8, tol);
  }
  return model.beta0 * 2.0 * std::numbers::pi / (speed * e) * acc;
}

FrequencyBounds fit_frequency_bounds(const PotentialModel& model, double s_max, int sweep) {
  if (!(s_max > 0.0) || sweep < 3) throw Error(ErrorCode::InvalidArgument, "frequency sweep needs s_max > 0");
  auto q = [&](double s) { return collision_frequency(model, s) / std::pow(1.0 + s, model.gamma); };
  const double h = s_max / (sweep - 1);
  std::vector<double> vals(static_cast<std::size_t>(sweep));
  for (int i = 0; i < sweep; ++i) vals[static_cast<std::size_t>(i)] = q(i * h);
  const auto [lo_it, hi_it] = std::minmax_element(vals.begin(), vals.end());
  auto refine = [&](std::size_t i, bool minimize) {
    const double a = std::max(0.0, (static_cast<double>(i) - 1.0) * h);
    const double b = std::min(s_max, (static_cast<double>(i) + 1.0) * h);
    auto obj = [&](double s) { return minimize ? q(s) : -q(s); };
    const auto r = boost::math::tools::brent_find_minima(obj, a, b, 40);
    return minimize ? std::min(vals[i], r.second) : std::max(vals[i], -r.second);
  };
  FrequencyBounds out;
  out.lower = refine(static_cast<std::size_t>(lo_it - vals.begin()), true) * (1.0 - 1e-9);
  out.upper = refine(static_cast<std::size_t>(hi_it - vals.begin()), false) * (1.0 + 1e-9);
  // nu(s)/(1+s)^gamma tends to beta0 pi^{3/2}; include the limit so the bound also covers s > s_max.
  out.upper = std::max(out.upper, model.beta0 * std::pow(std::numbers::pi, 1.5) * (1.0 + 1e-9));
  return out;
}

struct CollisionKernel::FrequencyTable {
  boost::math::interpolators::cardinal_cubic_b_spline<double> spline;
  explicit FrequencyTable(std::vector<double> values)
      : spline(values.begin(), values.end(), 0.0, kTableStep, 0.0) {}
};

CollisionKernel::CollisionKernel(const PotentialModel& model)
    : CollisionKernel(model, std::make_shared<ModelKernel>(model)) {}

CollisionKernel::CollisionKernel(const PotentialModel& model, std::shared_ptr<const KernelFunction> shape)
    : model_(model), shape_(std::move(shape)) {
  model_.validate();
  if (!shape_) throw Error(ErrorCode::InvalidArgument, "kernel shape must not be null");
  const auto n = static_cast<std::size_t>(std::lround(kTableMax / kTableStep)) + 1;
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = collision_frequency(model_, static_cast<double>(i) * kTableStep);
  table_ = std::make_shared<FrequencyTable>(std::move(values));
  bounds_ = fit_frequency_bounds(model_);
}

double CollisionKernel::frequency(double speed) const {
  if (model_.gamma == 0.0) return model_.beta0 * std::pow(std::numbers::pi, 1.5);
  if (speed >= 0.0 && speed < kTableMax) return table_->spline(speed);
  return collision_frequency(model_, speed);
}

double CollisionKernel::value(const Velocity& zeta, const Velocity& zeta_star) const {
  if (!is_finite(zeta) || !is_finite(zeta_star)) throw DomainError("kernel arguments must be finite");
  const double r = norm(zeta - zeta_star);
  if (r == 0.0) throw SingularityError("kernel evaluated on the diagonal zeta == zeta*");
  return (*shape_)(norm(zeta), norm(zeta_star), r);
}

double collision_frequency(const CollisionKernel& kernel, double speed) {
  return collision_frequency(kernel.model(), speed);
}

double kernel_value(const CollisionKernel& kernel, const Velocity& zeta, const Velocity& zeta_star) {
  return kernel.value(zeta, zeta_star);
}

double truncation_tail(const CollisionKernel& kernel, double r_max) {
  return std::exp(-kernel.gaussian_rate() * r_max * r_max);
}

double apply_K(const CollisionKernel& kernel, const VelocityFunction& g, const VelocityQuadrature& quad,
               const Velocity& zeta) {
  static std::atomic<bool> warned{false};
  if (!kernel.is_null() && truncation_tail(kernel, quad.r_max()) > 1e-6 && !warned.exchange(true)) {
    std::ostringstream msg;
    msg << "collision quadrature radius " << quad.r_max() << " leaves Gaussian tail "
        << truncation_tail(kernel, quad.r_max());
    warn(msg.str());
  }
  double acc = 0.0;
  for_each_collision_node(kernel, quad, zeta, [&](const Velocity& z, double w) { acc += w * g(z); });
  return acc;
}

double caflisch_integral(const Velocity& eta, double epsilon, double a1, double a2) {
  if (!(epsilon > 0.0) || !(a1 > 0.0) || !(a2 > 0.0)) {
    throw DomainError("caflisch_integral needs epsilon, a1, a2 > 0");
  }
  if (!is_finite(eta)) throw DomainError("eta must be finite");
  const double s = norm(eta);
  const double b = std::sqrt(a2);
  const Rule1D mu_rule = gauss_legendre(16);
  // Polar integral int_{-1}^{1} exp(-a2 (2 s mu + r)^2) d mu.
  auto polar = [&](double r) {
    if (s * b < 1e-5) {
      double acc = 0.0;
      for (std::size_t i = 0; i < mu_rule.size(); ++i) {
        const double u = 2.0 * s * mu_rule.nodes[i] + r;
        acc += mu_rule.weights[i] * std::exp(-a2 * u * u);
      }
      return acc;
    }
    return std::sqrt(std::numbers::pi) / (4.0 * s * b) * (std::erf(b * (r + 2.0 * s)) - std::erf(b * (r - 2.0 * s)));
  };
  // r = t^{1/eps} turns r^{eps-1} dr into dt / eps.
  const double inv = 1.0 / epsilon;
  auto integrand = [&](double t) {
    const double r = std::pow(t, inv);
    return std::exp(-a1 * r * r) * polar(r);
  };
  const double r_end = std::sqrt(40.0 / a1);
  const double t_end = std::pow(r_end, epsilon);
  double acc = 0.0;
  const double r_mid = 2.0 * s;
  if (r_mid > 0.0 && r_mid < r_end) {
    const double t_mid = std::pow(r_mid, epsilon);
    acc += gauss_kronrod<double, 31>::integrate(integrand, 0.0, t_mid, 20, 1e-12);
    acc += gauss_kronrod<double, 31>::integrate(integrand, t_mid, t_end, 20, 1e-12);
  } else {
    acc += gauss_kronrod<double, 31>::integrate(integrand, 0.0, t_end, 20, 1e-12);
  }
  return 2.0 * std::numbers::pi * inv * acc;
}

double nu_derivative(const CollisionKernel& kernel, double speed, double step) {
  require_finite(speed, "speed");
  if (speed < 0.0) throw DomainError("speed must be nonnegative");
  // nu is even in the speed, so |s - h| keeps the stencil valid near zero.
  const double up = collision_frequency(kernel.model(), speed + step);
  const double down = collision_frequency(kernel.model(), std::abs(speed - step));
  return (up - down) / (2.0 * step);
}

GradKReport grad_K_norm_check(const CollisionKernel& kernel, const VelocityQuadrature& inner,
                              const VelocityQuadrature& outer, NormExponent p, int family_size, std::uint64_t seed,
                              const std::vector<VelocityFunction>& extra, double fd_step) {
  struct Bump {
    double c;
    Velocity center;
    double width;
  };
  std::vector<VelocityFunction> family = extra;
  for (int m = 0; m < family_size; ++m) {
    auto rng = sample_rng(seed, 0x6b, static_cast<std::uint64_t>(m));
    std::vector<Bump> bumps;
    for (int l = 0; l < 3; ++l) {
      Bump b;
      b.c = uniform(rng, -1.0, 1.0);
      b.center = 1.5 * gaussian_vec(rng);
      b.width = uniform(rng, 0.5, 2.0);
      bumps.push_back(b);
    }
    family.push_back([bumps](const Velocity& z) {
      double v = 0.0;
      for (const auto& b : bumps) v += b.c * std::exp(-norm2(z - b.center) / b.width);
      return v;
    });
  }

  const std::size_t nf = family.size();
  const std::size_t nodes = outer.size();
  // grad[j * nf + m] = |grad K f_m| at outer node j.
  std::vector<double> grad(nodes * nf, 0.0);
  parallel_for(nodes, [&](std::size_t j) {
    const Velocity z = outer.node(j);
    std::vector<double> plus(nf);
    std::vector<double> minus(nf);
    std::vector<double> g2(nf, 0.0);
    for (int axis = 0; axis < 3; ++axis) {
      Velocity e{};
      e[axis] = fd_step;
      std::fill(plus.begin(), plus.end(), 0.0);
      std::fill(minus.begin(), minus.end(), 0.0);
      for_each_collision_node(kernel, inner, z + e, [&](const Velocity& zs, double w) {
        for (std::size_t m = 0; m < nf; ++m) plus[m] += w * family[m](zs);
      });
      for_each_collision_node(kernel, inner, z - e, [&](const Velocity& zs, double w) {
        for (std::size_t m = 0; m < nf; ++m) minus[m] += w * family[m](zs);
      });
      for (std::size_t m = 0; m < nf; ++m) {
        const double d = (plus[m] - minus[m]) / (2.0 * fd_step);
        g2[m] += d * d;
      }
    }
    for (std::size_t m = 0; m < nf; ++m) grad[j * nf + m] = std::sqrt(g2[m]);
  });

  auto norm_of = [&](auto&& value_at) {
    double acc = 0.0;
    for (std::size_t j = 0; j < nodes; ++j) {
      const double v = std::abs(value_at(j));
      switch (p) {
        case NormExponent::One: acc += outer.weight(j) * v; break;
        case NormExponent::Two: acc += outer.weight(j) * v * v; break;
        case NormExponent::Infinity: acc = std::max(acc, v); break;
      }
    }
    return p == NormExponent::Two ? std::sqrt(acc) : acc;
  };

  GradKReport rep;
  rep.p = p;
  for (std::size_t m = 0; m < nf; ++m) {
    const double fn = norm_of([&](std::size_t j) { return family[m](outer.node(j)); });
    if (fn == 0.0) {
      ++rep.skipped;
      continue;
    }
    const double gn = norm_of([&](std::size_t j) { return grad[j * nf + m]; });
    rep.ratios.push_back(gn / fn);
  }
  if (!rep.ratios.empty()) {
    std::vector<double> sorted = rep.ratios;
    std::sort(sorted.begin(), sorted.end());
    rep.min_ratio = sorted.front();
    rep.max_ratio = sorted.back();
    rep.median_ratio = sorted[sorted.size() / 2];
    rep.bounded = std::isfinite(rep.max_ratio) && rep.max_ratio <= 10.0 * rep.median_ratio;
  } else {
    rep.bounded = true;
  }
  return rep;
}

}  // namespace kinreg
