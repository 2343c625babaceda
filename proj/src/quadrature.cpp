#include "kinreg/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <algorithm>

#include "kinreg/error.hpp"

namespace kinreg {

namespace {

// Legendre polynomial P_n(x) and its derivative.
void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0;
  double p1 = x;
  for (int k = 2; k <= n; ++k) {
    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

}  // namespace

Rule1D gauss_legendre(int n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "Gauss-Legendre rule needs at least one node");
  Rule1D rule;
  rule.nodes.assign(static_cast<std::size_t>(n), 0.0);
  rule.weights.assign(static_cast<std::size_t>(n), 0.0);
  if (n == 1) {
    rule.weights[0] = 2.0;
    return rule;
  }
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double p = 0.0;
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      legendre(n, x, p, dp);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    legendre(n, x, p, dp);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    rule.nodes[lo] = -x;
    rule.nodes[hi] = x;
    rule.weights[lo] = w;
    rule.weights[hi] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

const Rule1D& gauss_legendre_reference(int n) {
  static const std::vector<Rule1D> cache = [] {
    std::vector<Rule1D> rules(257);
    for (int i = 1; i <= 256; ++i) rules[static_cast<std::size_t>(i)] = gauss_legendre(i);
    return rules;
  }();
  if (n < 1 || n > 256) throw Error(ErrorCode::InvalidArgument, "cached Gauss-Legendre rules cover 1..256 nodes");
  return cache[static_cast<std::size_t>(n)];
}

Rule1D gauss_legendre(int n, double a, double b) {
  Rule1D rule = gauss_legendre(n);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  for (std::size_t i = 0; i < rule.size(); ++i) {
    rule.nodes[i] = mid + half * rule.nodes[i];
    rule.weights[i] *= half;
  }
  return rule;
}

VelocityQuadrature::VelocityQuadrature(double r_max, int radial_nodes, int polar_nodes, int azimuth_nodes)
    : r_max_(r_max), azimuth_(azimuth_nodes) {
  if (!(r_max > 0.0) || radial_nodes < 1 || polar_nodes < 1 || azimuth_nodes < 1) {
    throw Error(ErrorCode::InvalidArgument, "velocity quadrature needs r_max > 0 and positive node counts");
  }
  radial_ = gauss_legendre(radial_nodes, 0.0, r_max);
  for (std::size_t i = 0; i < radial_.size(); ++i) radial_.weights[i] *= radial_.nodes[i] * radial_.nodes[i];
  polar_ = gauss_legendre(polar_nodes);

  nodes_.reserve(size());
  weights_.reserve(size());
  speeds_.reserve(size());
  const double wphi = azimuth_weight();
  for (int ir = 0; ir < radial_count(); ++ir) {
    const double rho = radial_.nodes[static_cast<std::size_t>(ir)];
    for (int im = 0; im < polar_count(); ++im) {
      const double mu = polar_.nodes[static_cast<std::size_t>(im)];
      const double st = std::sqrt(1.0 - mu * mu);
      for (int ip = 0; ip < azimuth_; ++ip) {
        const double phi = azimuth_angle(ip);
        nodes_.push_back({rho * st * std::cos(phi), rho * st * std::sin(phi), rho * mu});
        weights_.push_back(radial_.weights[static_cast<std::size_t>(ir)] *
                           polar_.weights[static_cast<std::size_t>(im)] * wphi);
        speeds_.push_back(rho);
      }
    }
  }
}

VelocityQuadrature VelocityQuadrature::with_angular_count(double r_max, int radial_nodes, int angular_nodes) {
  if (angular_nodes < 2) throw Error(ErrorCode::InvalidArgument, "angular_nodes must be at least 2");
  // Largest divisor not exceeding sqrt(N/2) becomes the polar count.
  int polar = 1;
  for (int d = 1; 2 * d * d <= angular_nodes; ++d) {
    if (angular_nodes % d == 0) polar = d;
  }
  return VelocityQuadrature(r_max, radial_nodes, polar, angular_nodes / polar);
}

double VelocityQuadrature::azimuth_angle(int p) const {
  return 2.0 * std::numbers::pi * (p + 0.5) / azimuth_;
}

double VelocityQuadrature::azimuth_weight() const { return 2.0 * std::numbers::pi / azimuth_; }

VelocityQuadrature VelocityQuadrature::refined() const {
  return VelocityQuadrature(r_max_, 2 * radial_count(), 2 * polar_count(), 2 * azimuth_);
}

PathRule::PathRule(int order, int panels) : order_(order), reference_(gauss_legendre(order)) {
  if (order < 1 || panels < 1) throw Error(ErrorCode::InvalidArgument, "path rule needs positive order and panels");
  // Panel widths shrink geometrically toward both ends of the path.
  std::vector<double> widths(static_cast<std::size_t>(panels));
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const int from_edge = std::min(p, panels - 1 - p);
    widths[static_cast<std::size_t>(p)] = std::pow(2.0, from_edge);
    total += widths[static_cast<std::size_t>(p)];
  }
  breaks_.push_back(0.0);
  double acc = 0.0;
  for (double w : widths) {
    acc += w / total;
    breaks_.push_back(acc);
  }
  breaks_.back() = 1.0;
}

void PathRule::nodes(double length, double nu, std::vector<Node>& out) const {
  out.clear();
  if (!(length > 0.0)) return;
  // Beyond optical depth 40 the damping factor is below 5e-18.
  const double reach = std::min(length, kMaxOpticalDepth / nu);
  for (std::size_t p = 0; p + 1 < breaks_.size(); ++p) {
    const double b = breaks_[p + 1] * reach;
    double a = breaks_[p] * reach;
    while (a < b) {
      // Unit optical width near the start; deeper pieces carry weight <= e^{-8}
      // and may grow with the depth.
      const double depth = nu * a;
      const double limit = std::max(1.0, 0.25 * depth) / nu;
      const double end = (b - a <= limit * 1.000001) ? b : a + limit;
      const double mid = 0.5 * (a + end);
      const double half = 0.5 * (end - a);
      for (std::size_t i = 0; i < reference_.size(); ++i) {
        const double sn = mid + half * reference_.nodes[i];
        out.push_back({sn, half * reference_.weights[i] * std::exp(-nu * sn)});
      }
      a = end;
    }
  }
}

}  // namespace kinreg
