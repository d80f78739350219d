#pragma once

// Reference-square polynomial machinery: Gauss rules, 1D Lagrange bases,
// tensor shape sets for the displacement and plastic-strain spaces, and the
// two-coordinate representation of symmetric trace-free 2x2 matrices.

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace plastmix {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Quadrature rule on [-1, 1].
struct LineRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  int size() const { return static_cast<int>(nodes.size()); }
};

/// n-point Gauss-Legendre rule, exact for polynomials of degree 2n-1.
/// Nodes are sorted ascending and exactly antisymmetric (x[n-1-i] == -x[i]).
LineRule gauss_legendre_line(int n);

/// n-point Gauss-Lobatto rule (n >= 2), endpoints included.
LineRule gauss_lobatto_line(int n);

/// Tensor Gauss-Legendre rule on the reference square [-1,1]^2.
/// Point k = i + n*j sits at (line.nodes[i], line.nodes[j]).
struct QuadratureRule {
  int n = 0;
  LineRule line;
  std::vector<Vec2> points;
  std::vector<double> weights;

  int size() const { return static_cast<int>(points.size()); }
};

QuadratureRule gauss_rule(int n);

/// Process-wide cached copy of gauss_rule(n); the reference stays valid.
const QuadratureRule& cached_gauss_rule(int n);

/// Lagrange polynomials through a fixed node set on [-1,1].
class LagrangeLine {
 public:
  explicit LagrangeLine(std::vector<double> nodes);

  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<double>& nodes() const { return nodes_; }

  /// Values (and optionally first/second derivatives) of all basis
  /// polynomials at x. Output spans must have size() entries or be empty.
  void eval(double x, std::span<double> values, std::span<double> d1 = {},
            std::span<double> d2 = {}) const;

  double value(int j, double x) const;

 private:
  std::vector<double> nodes_;
  std::vector<double> inv_denominator_;
};

enum class ShapeKind {
  /// Tensor Gauss-Lobatto-Lagrange basis of degree p (displacements).
  ContinuousNodal,
  /// Tensor Lagrange basis of degree p-1 through the p x p Gauss points
  /// (plastic strain and multiplier).
  GaussLagrange,
};

/// Values and reference derivatives of a shape set at the points of a rule.
/// Matrices are (points x basis functions).
struct Tabulation {
  Eigen::MatrixXd value;
  Eigen::MatrixXd d_xi;
  Eigen::MatrixXd d_eta;
  Eigen::MatrixXd d_xixi;
  Eigen::MatrixXd d_xieta;
  Eigen::MatrixXd d_etaeta;
};

class ShapeSet {
 public:
  ShapeSet(ShapeKind kind, int element_degree);

  ShapeKind kind() const { return kind_; }
  /// The element's p_T (not the polynomial degree for GaussLagrange).
  int element_degree() const { return element_degree_; }
  int polynomial_degree() const;
  int nodes_per_direction() const { return line_.size(); }
  int size() const { return line_.size() * line_.size(); }
  const LagrangeLine& line() const { return line_; }

  /// Reference coordinates of node k = i + m*j, m = nodes_per_direction().
  Vec2 node(int k) const;

  void values(const Vec2& xi, Eigen::Ref<Eigen::VectorXd> out) const;
  /// out(k, a) = d phi_k / d xi_a.
  void gradients(const Vec2& xi, Eigen::Ref<Eigen::MatrixXd> out) const;
  /// out(k, :) = (xixi, xieta, etaeta).
  void hessians(const Vec2& xi, Eigen::Ref<Eigen::MatrixXd> out) const;

  Tabulation tabulate(std::span<const Vec2> points) const;

 private:
  ShapeKind kind_;
  int element_degree_;
  LagrangeLine line_;
};

/// Cached shape sets and tabulations. References stay valid for the process
/// lifetime; safe to call from several threads.
const ShapeSet& shape_set(ShapeKind kind, int element_degree);
const Tabulation& tabulation(ShapeKind kind, int element_degree, int rule_points);

/// Symmetric trace-free 2x2 matrix a*E1 + b*E2 with E1 = [[1,0],[0,-1]] and
/// E2 = [[0,1],[1,0]]. Both basis matrices have Frobenius norm sqrt(2).
struct DevMatrix2 {
  double a = 0.0;
  double b = 0.0;

  Mat2 matrix() const;

  DevMatrix2& operator+=(const DevMatrix2& o) {
    a += o.a;
    b += o.b;
    return *this;
  }
  friend DevMatrix2 operator+(DevMatrix2 l, const DevMatrix2& r) { return l += r; }
  friend DevMatrix2 operator-(const DevMatrix2& l, const DevMatrix2& r) {
    return {l.a - r.a, l.b - r.b};
  }
  friend DevMatrix2 operator*(double s, const DevMatrix2& q) { return {s * q.a, s * q.b}; }
  friend bool operator==(const DevMatrix2&, const DevMatrix2&) = default;
};

/// Deviatoric part of a symmetric matrix. Throws std::invalid_argument if the
/// input is asymmetric beyond 1e-12 (relative to its largest entry, min 1).
DevMatrix2 dev(const Mat2& m);

/// Orthogonal projection of an arbitrary matrix onto the symmetric
/// trace-free matrices, i.e. dev(sym(m)). No symmetry check.
DevMatrix2 dev_part(const Mat2& m);

/// |q|_F = sqrt(2 (a^2 + b^2)).
double frobenius(const DevMatrix2& q);

/// q1 : q2 = 2 (a1 a2 + b1 b2).
double frobenius_inner(const DevMatrix2& q1, const DevMatrix2& q2);

}  // namespace plastmix
