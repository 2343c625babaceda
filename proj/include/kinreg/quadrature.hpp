#pragma once

#include <cstddef>
#include <vector>

#include "kinreg/vec3.hpp"

namespace kinreg {

struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on the three-term recurrence).
Rule1D gauss_legendre(int n);
/// Cached reference rule on [-1, 1]; n <= 256. Thread-safe.
const Rule1D& gauss_legendre_reference(int n);
/// Gauss-Legendre rule mapped affinely onto [a, b].
Rule1D gauss_legendre(int n, double a, double b);

/// Product rule for velocity space in spherical coordinates about some center:
/// Gauss-Legendre in the radius on [0, r_max] (weights carry the r^2 Jacobian),
/// Gauss-Legendre in the polar cosine, uniform midpoints in the azimuth.
///
/// The same type serves as the global velocity grid (centered at the origin) and
/// as the inner rule of collision integrals (centered at the singular point).
class VelocityQuadrature {
 public:
  VelocityQuadrature() = default;
  VelocityQuadrature(double r_max, int radial_nodes, int polar_nodes, int azimuth_nodes);

  /// Splits `angular_nodes` into polar x azimuth with azimuth ~ 2 x polar.
  static VelocityQuadrature with_angular_count(double r_max, int radial_nodes, int angular_nodes);

  double r_max() const { return r_max_; }
  int radial_count() const { return static_cast<int>(radial_.size()); }
  int polar_count() const { return static_cast<int>(polar_.size()); }
  int azimuth_count() const { return azimuth_; }
  std::size_t size() const { return radial_.size() * polar_.size() * static_cast<std::size_t>(azimuth_); }

  const Rule1D& radial() const { return radial_; }
  const Rule1D& polar() const { return polar_; }
  double azimuth_angle(int p) const;
  double azimuth_weight() const;

  std::size_t index(int ir, int im, int ip) const {
    return (static_cast<std::size_t>(ir) * polar_.size() + static_cast<std::size_t>(im)) *
               static_cast<std::size_t>(azimuth_) +
           static_cast<std::size_t>(ip);
  }
  Velocity node(std::size_t j) const { return nodes_[j]; }
  double weight(std::size_t j) const { return weights_[j]; }
  double speed(std::size_t j) const { return speeds_[j]; }
  const std::vector<Velocity>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }

  /// Same layout with every node count doubled.
  VelocityQuadrature refined() const;

 private:
  double r_max_ = 0.0;
  Rule1D radial_;
  Rule1D polar_;
  int azimuth_ = 0;
  std::vector<Velocity> nodes_;
  std::vector<double> weights_;
  std::vector<double> speeds_;
};

/// Quadrature for damped path integrals  int_0^L exp(-nu s) g(s) ds.
///
/// Gauss-Legendre panels graded toward both endpoints, then split so that no
/// piece spans more than one optical length nu * ds (more once the damping has
/// already reached e^{-8}). The path is cut at optical depth kMaxOpticalDepth.
class PathRule {
 public:
  static constexpr double kMaxOpticalDepth = 40.0;

  PathRule(int order = 4, int panels = 4);

  int order() const { return order_; }
  int panels() const { return static_cast<int>(breaks_.size()) - 1; }

  struct Node {
    double s;
    double weight;  // includes exp(-nu s)
  };
  /// Nodes for length L >= 0 and damping nu > 0, written into `out`. The count
  /// grows with the optical depth nu L; L = 0 yields no nodes.
  void nodes(double length, double nu, std::vector<Node>& out) const;

  template <class F>
  double integrate(double length, double nu, F&& g) const {
    std::vector<Node> ns;
    nodes(length, nu, ns);
    double acc = 0.0;
    for (const auto& n : ns) acc += n.weight * g(n.s);
    return acc;
  }

  PathRule refined() const { return PathRule(order_ * 2, panels()); }

 private:
  int order_;
  Rule1D reference_;
  std::vector<double> breaks_;  // panel boundaries as fractions of the path length
};

}  // namespace kinreg
