#include "plastmix/basis.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace plastmix {

namespace {

// Legendre P_n(x) and P_n'(x) by the three-term recurrence.
std::pair<double, double> legendre(int n, double x) {
  if (n == 0) return {1.0, 0.0};
  double p0 = 1.0;
  double p1 = x;
  for (int k = 2; k <= n; ++k) {
    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  // P_n' = n (x P_n - P_{n-1}) / (x^2 - 1), valid away from the endpoints.
  const double dp = n * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

// Fill the upper half from the lower half so the rule is exactly symmetric.
void mirror(LineRule& rule) {
  const int n = rule.size();
  for (int i = 0; i < n / 2; ++i) {
    rule.nodes[n - 1 - i] = -rule.nodes[i];
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
}

}  // namespace

LineRule gauss_legendre_line(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre_line: n must be >= 1");
  LineRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  if (n == 1) {
    rule.weights[0] = 2.0;
    return rule;
  }
  if (n == 2) {
    const double x = 1.0 / std::sqrt(3.0);
    rule.nodes = {-x, x};
    rule.weights = {1.0, 1.0};
    return rule;
  }
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Chebyshev-like initial guess for the i-th root, ascending order.
    double x = -std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(n, x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const auto [p, dp] = legendre(n, x);
    (void)p;
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  mirror(rule);
  if (n % 2 == 1) {
    const auto [p, dp] = legendre(n, 0.0);
    (void)p;
    rule.weights[n / 2] = 2.0 / (dp * dp);
  }
  return rule;
}

LineRule gauss_lobatto_line(int n) {
  if (n < 2) throw std::invalid_argument("gauss_lobatto_line: n must be >= 2");
  const int N = n - 1;  // interior nodes are the roots of P_N'
  LineRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  rule.nodes[0] = -1.0;
  rule.weights[0] = 2.0 / (N * (N + 1.0));
  for (int i = 1; i < (n + 1) / 2; ++i) {
    double x = -std::cos(std::numbers::pi * i / N);
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(N, x);
      // (1 - x^2) P'' = 2 x P' - N (N + 1) P
      const double d2p = (2.0 * x * dp - N * (N + 1.0) * p) / (1.0 - x * x);
      const double dx = dp / d2p;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const auto [p, dp] = legendre(N, x);
    (void)dp;
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / (N * (N + 1.0) * p * p);
  }
  mirror(rule);
  if (n % 2 == 1) {
    const auto [p, dp] = legendre(N, 0.0);
    (void)dp;
    rule.weights[n / 2] = 2.0 / (N * (N + 1.0) * p * p);
  }
  return rule;
}

QuadratureRule gauss_rule(int n) {
  QuadratureRule rule;
  rule.n = n;
  rule.line = gauss_legendre_line(n);
  rule.points.reserve(static_cast<std::size_t>(n) * n);
  rule.weights.reserve(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      rule.points.emplace_back(rule.line.nodes[i], rule.line.nodes[j]);
      rule.weights.push_back(rule.line.weights[i] * rule.line.weights[j]);
    }
  }
  return rule;
}

const QuadratureRule& cached_gauss_rule(int n) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<QuadratureRule>(gauss_rule(n));
  return *slot;
}

// ---------------------------------------------------------------------------

LagrangeLine::LagrangeLine(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  const int n = size();
  inv_denominator_.assign(n, 1.0);
  for (int j = 0; j < n; ++j) {
    double d = 1.0;
    for (int m = 0; m < n; ++m) {
      if (m != j) d *= nodes_[j] - nodes_[m];
    }
    inv_denominator_[j] = 1.0 / d;
  }
}

double LagrangeLine::value(int j, double x) const {
  double v = 1.0;
  for (int m = 0; m < size(); ++m) {
    if (m != j) v *= (x - nodes_[m]) / (nodes_[j] - nodes_[m]);
  }
  return v;
}

void LagrangeLine::eval(double x, std::span<double> values, std::span<double> d1,
                        std::span<double> d2) const {
  const int n = size();
  // Products over node subsets; n stays small (<= ~10) so the O(n^4) second
  // derivative loop is cheap and, unlike monomial expansions, well conditioned.
  for (int j = 0; j < n; ++j) {
    if (!values.empty()) values[j] = value(j, x);
    if (!d1.empty()) {
      double s = 0.0;
      for (int m = 0; m < n; ++m) {
        if (m == j) continue;
        double prod = 1.0;
        for (int k = 0; k < n; ++k) {
          if (k != j && k != m) prod *= x - nodes_[k];
        }
        s += prod;
      }
      d1[j] = s * inv_denominator_[j];
    }
    if (!d2.empty()) {
      double s = 0.0;
      for (int m = 0; m < n; ++m) {
        if (m == j) continue;
        for (int l = 0; l < n; ++l) {
          if (l == j || l == m) continue;
          double prod = 1.0;
          for (int k = 0; k < n; ++k) {
            if (k != j && k != m && k != l) prod *= x - nodes_[k];
          }
          s += prod;
        }
      }
      d2[j] = s * inv_denominator_[j];
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> shape_nodes(ShapeKind kind, int p) {
  if (p < 1) throw std::invalid_argument("ShapeSet: element degree must be >= 1");
  if (kind == ShapeKind::ContinuousNodal) return gauss_lobatto_line(p + 1).nodes;
  return gauss_legendre_line(p).nodes;
}

}  // namespace

ShapeSet::ShapeSet(ShapeKind kind, int element_degree)
    : kind_(kind), element_degree_(element_degree), line_(shape_nodes(kind, element_degree)) {}

int ShapeSet::polynomial_degree() const {
  return kind_ == ShapeKind::ContinuousNodal ? element_degree_ : element_degree_ - 1;
}

Vec2 ShapeSet::node(int k) const {
  const int m = nodes_per_direction();
  return {line_.nodes()[k % m], line_.nodes()[k / m]};
}

void ShapeSet::values(const Vec2& xi, Eigen::Ref<Eigen::VectorXd> out) const {
  const int m = nodes_per_direction();
  std::vector<double> vx(m), vy(m);
  line_.eval(xi.x(), vx);
  line_.eval(xi.y(), vy);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) out[i + m * j] = vx[i] * vy[j];
}

void ShapeSet::gradients(const Vec2& xi, Eigen::Ref<Eigen::MatrixXd> out) const {
  const int m = nodes_per_direction();
  std::vector<double> vx(m), vy(m), dx(m), dy(m);
  line_.eval(xi.x(), vx, dx);
  line_.eval(xi.y(), vy, dy);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      out(i + m * j, 0) = dx[i] * vy[j];
      out(i + m * j, 1) = vx[i] * dy[j];
    }
  }
}

void ShapeSet::hessians(const Vec2& xi, Eigen::Ref<Eigen::MatrixXd> out) const {
  const int m = nodes_per_direction();
  std::vector<double> vx(m), vy(m), dx(m), dy(m), ddx(m), ddy(m);
  line_.eval(xi.x(), vx, dx, ddx);
  line_.eval(xi.y(), vy, dy, ddy);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      out(i + m * j, 0) = ddx[i] * vy[j];
      out(i + m * j, 1) = dx[i] * dy[j];
      out(i + m * j, 2) = vx[i] * ddy[j];
    }
  }
}

Tabulation ShapeSet::tabulate(std::span<const Vec2> points) const {
  const int np = static_cast<int>(points.size());
  const int nb = size();
  Tabulation t;
  t.value.resize(np, nb);
  t.d_xi.resize(np, nb);
  t.d_eta.resize(np, nb);
  t.d_xixi.resize(np, nb);
  t.d_xieta.resize(np, nb);
  t.d_etaeta.resize(np, nb);
  Eigen::VectorXd v(nb);
  Eigen::MatrixXd g(nb, 2), h(nb, 3);
  for (int q = 0; q < np; ++q) {
    values(points[q], v);
    gradients(points[q], g);
    hessians(points[q], h);
    t.value.row(q) = v.transpose();
    t.d_xi.row(q) = g.col(0).transpose();
    t.d_eta.row(q) = g.col(1).transpose();
    t.d_xixi.row(q) = h.col(0).transpose();
    t.d_xieta.row(q) = h.col(1).transpose();
    t.d_etaeta.row(q) = h.col(2).transpose();
  }
  return t;
}

const ShapeSet& shape_set(ShapeKind kind, int element_degree) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<ShapeSet>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{static_cast<int>(kind), element_degree}];
  if (!slot) slot = std::make_unique<ShapeSet>(kind, element_degree);
  return *slot;
}

const Tabulation& tabulation(ShapeKind kind, int element_degree, int rule_points) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, std::unique_ptr<Tabulation>> cache;
  const ShapeSet& set = shape_set(kind, element_degree);
  const QuadratureRule& rule = cached_gauss_rule(rule_points);
  std::lock_guard lock(mutex);
  auto& slot = cache[{static_cast<int>(kind), element_degree, rule_points}];
  if (!slot) slot = std::make_unique<Tabulation>(set.tabulate(rule.points));
  return *slot;
}

// ---------------------------------------------------------------------------

Mat2 DevMatrix2::matrix() const {
  Mat2 m;
  m << a, b, b, -a;
  return m;
}

DevMatrix2 dev(const Mat2& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (std::abs(m(0, 1) - m(1, 0)) > 1e-12 * scale) {
    throw std::invalid_argument("dev: input matrix is not symmetric");
  }
  return dev_part(m);
}

DevMatrix2 dev_part(const Mat2& m) {
  return {0.5 * (m(0, 0) - m(1, 1)), 0.5 * (m(0, 1) + m(1, 0))};
}

double frobenius(const DevMatrix2& q) { return std::sqrt(2.0 * (q.a * q.a + q.b * q.b)); }

double frobenius_inner(const DevMatrix2& q1, const DevMatrix2& q2) {
  return 2.0 * (q1.a * q2.a + q1.b * q2.b);
}

}  // namespace plastmix
