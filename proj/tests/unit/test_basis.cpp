#include <doctest.h>

#include "plastmix/basis.hpp"

#include <cmath>
#include <random>

using namespace plastmix;

TEST_SUITE("basis") {

TEST_CASE("gauss rule low orders") {
  const LineRule r1 = gauss_legendre_line(1);
  CHECK(r1.nodes[0] == 0.0);
  CHECK(r1.weights[0] == 2.0);
  const LineRule r2 = gauss_legendre_line(2);
  CHECK(r2.nodes[0] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(r2.nodes[1] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(r2.weights[0] == 1.0);
  CHECK(r2.weights[1] == 1.0);
}

TEST_CASE("three point rule integrates x^4") {
  const LineRule r = gauss_legendre_line(3);
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += r.weights[i] * std::pow(r.nodes[i], 4);
  CHECK(std::abs(s - 0.4) <= 1e-14);
}

TEST_CASE("monomial exactness up to degree 2n-1") {
  for (int n = 1; n <= 12; ++n) {
    const LineRule r = gauss_legendre_line(n);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += r.weights[i] * std::pow(r.nodes[i], k);
      const double exact = k % 2 == 0 ? 2.0 / (k + 1) : 0.0;
      CHECK(std::abs(s - exact) <= 1e-13);
    }
  }
}

TEST_CASE("random polynomials of degree 2n-1") {
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 2; n <= 9; ++n) {
    const LineRule r = gauss_legendre_line(n);
    std::vector<double> c(2 * n);
    for (auto& v : c) v = u(gen);
    double exact = 0.0;
    for (int k = 0; k < 2 * n; ++k) exact += k % 2 == 0 ? 2.0 * c[k] / (k + 1) : 0.0;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      double pv = 0.0;
      for (int k = 2 * n - 1; k >= 0; --k) pv = pv * r.nodes[i] + c[k];
      s += r.weights[i] * pv;
    }
    CHECK(std::abs(s - exact) <= 1e-12 * std::max(1.0, std::abs(exact)));
  }
}

TEST_CASE("rules are exactly symmetric and 2d weights sum to 4") {
  for (int n = 1; n <= 10; ++n) {
    const LineRule g = gauss_legendre_line(n);
    for (int i = 0; i < n; ++i) {
      CHECK(g.nodes[n - 1 - i] == -g.nodes[i]);
      CHECK(g.weights[n - 1 - i] == g.weights[i]);
      if (i > 0) CHECK(g.nodes[i] > g.nodes[i - 1]);
    }
    const QuadratureRule q = gauss_rule(n);
    double s = 0.0;
    for (double w : q.weights) s += w;
    CHECK(std::abs(s - 4.0) <= 1e-13);
    CHECK(q.points[n - 1].x() == g.nodes[n - 1]);
    CHECK(q.points[n * (n - 1)].y() == g.nodes[n - 1]);
  }
}

TEST_CASE("gauss lobatto four points") {
  const LineRule r = gauss_lobatto_line(4);
  CHECK(r.nodes[0] == -1.0);
  CHECK(r.nodes[3] == 1.0);
  CHECK(r.nodes[2] == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-15));
  CHECK(r.weights[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(r.weights[1] == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  for (int n = 2; n <= 10; ++n) {
    const LineRule l = gauss_lobatto_line(n);
    double s = 0.0;
    for (double w : l.weights) s += w;
    CHECK(std::abs(s - 2.0) <= 1e-13);
    // exact for degree 2n-3
    double m = 0.0;
    for (int i = 0; i < n; ++i) m += l.weights[i] * std::pow(l.nodes[i], 2 * n - 4);
    CHECK(std::abs(m - 2.0 / (2 * n - 3)) <= 1e-13);
  }
}

TEST_CASE("lagrange derivatives on three nodes") {
  const LagrangeLine l({-1.0, 0.0, 1.0});
  std::vector<double> v(3), d1(3), d2(3);
  const double x = 0.3;
  l.eval(x, v, d1, d2);
  CHECK(v[0] == doctest::Approx(x * (x - 1) / 2));
  CHECK(d1[0] == doctest::Approx(x - 0.5));
  CHECK(d2[0] == doctest::Approx(1.0));
  CHECK(v[1] == doctest::Approx(1 - x * x));
  CHECK(d1[1] == doctest::Approx(-2 * x));
  CHECK(d2[1] == doctest::Approx(-2.0));
}

TEST_CASE("gauss lagrange kronecker and partition of unity") {
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int p = 1; p <= 6; ++p) {
    const ShapeSet& s = shape_set(ShapeKind::GaussLagrange, p);
    CHECK(s.size() == p * p);
    CHECK(s.polynomial_degree() == p - 1);
    const QuadratureRule& rule = cached_gauss_rule(p);
    Eigen::VectorXd v(s.size());
    for (int l = 0; l < rule.size(); ++l) {
      s.values(rule.points[l], v);
      for (int k = 0; k < s.size(); ++k) CHECK(std::abs(v[k] - (k == l ? 1.0 : 0.0)) <= 1e-13);
    }
    for (int r = 0; r < 20; ++r) {
      s.values(Vec2(u(gen), u(gen)), v);
      CHECK(std::abs(v.sum() - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("continuous nodal basis edge locality") {
  for (int p = 1; p <= 5; ++p) {
    const ShapeSet& s = shape_set(ShapeKind::ContinuousNodal, p);
    Eigen::VectorXd v(s.size());
    s.values(Vec2(0.37, -1.0), v);
    for (int k = 0; k < s.size(); ++k) {
      if (k / (p + 1) != 0) CHECK(std::abs(v[k]) <= 1e-14);
    }
    s.values(Vec2(1.0, -0.61), v);
    for (int k = 0; k < s.size(); ++k) {
      if (k % (p + 1) != p) CHECK(std::abs(v[k]) <= 1e-14);
    }
  }
}

TEST_CASE("gradients and hessians match finite differences") {
  const ShapeSet& s = shape_set(ShapeKind::ContinuousNodal, 3);
  const Vec2 x(0.21, -0.43);
  const double h = 1e-6;
  Eigen::MatrixXd g(s.size(), 2), gp(s.size(), 2), gm(s.size(), 2), hs(s.size(), 3);
  Eigen::VectorXd vp(s.size()), vm(s.size());
  s.gradients(x, g);
  s.hessians(x, hs);
  s.values(x + Vec2(h, 0), vp);
  s.values(x - Vec2(h, 0), vm);
  CHECK(((vp - vm) / (2 * h) - g.col(0)).cwiseAbs().maxCoeff() <= 1e-7);
  s.gradients(x + Vec2(0, h), gp);
  s.gradients(x - Vec2(0, h), gm);
  CHECK(((gp - gm).col(0) / (2 * h) - hs.col(1)).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(((gp - gm).col(1) / (2 * h) - hs.col(2)).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("dev examples") {
  Mat2 m;
  m << 3, 1, 1, 1;
  CHECK(dev(m) == DevMatrix2{1.0, 1.0});
  CHECK(dev(4.5 * Mat2::Identity()) == DevMatrix2{0.0, 0.0});
  m << 2, 5, 5, -2;
  CHECK(dev(m) == DevMatrix2{2.0, 5.0});
  CHECK(dev(m).matrix().trace() == 0.0);
  m << 1, 2, 3, 4;
  CHECK_THROWS_AS(dev(m), std::invalid_argument);
}

TEST_CASE("frobenius norm and inner product") {
  CHECK(frobenius({1, 0}) == doctest::Approx(std::sqrt(2.0)));
  CHECK(frobenius({0, 0}) == 0.0);
  CHECK(frobenius({3, 4}) == doctest::Approx(std::sqrt(50.0)));
  std::mt19937 gen(3);
  std::normal_distribution<double> n;
  for (int i = 0; i < 100; ++i) {
    const DevMatrix2 a{n(gen), n(gen)};
    const DevMatrix2 b{n(gen), n(gen)};
    const double contraction = (a.matrix().array() * b.matrix().array()).sum();
    CHECK(std::abs(frobenius_inner(a, b) - contraction) <= 1e-12 * (1 + std::abs(contraction)));
    CHECK(std::abs(frobenius(a) * frobenius(a) - frobenius_inner(a, a)) <= 1e-12);
    CHECK(std::abs(frobenius(a) - a.matrix().norm()) <= 1e-12);
  }
}

}
