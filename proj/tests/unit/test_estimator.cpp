#include <doctest.h>

#include "plastmix/estimator.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace plastmix;

namespace {

BoundaryTag bottom_dirichlet(const Vec2& x, const Vec2& n) {
  return (n.y() < -0.5 && x.y() < -0.999) ? BoundaryTag::Dirichlet : BoundaryTag::Neumann;
}

BoundaryTag all_neumann(const Vec2&, const Vec2&) { return BoundaryTag::Neumann; }

// u = (x (1+y), (1+y)^2/2 + x (1+y)): total degree 2, zero on y = -1
Mat2 quad_grad(const Vec2& x) {
  const double s = 1.0 + x.y();
  Mat2 g;
  g << s, x.x(), s, s + x.x();
  return g;
}

ProblemData quad_problem() {
  ProblemData data;
  data.material.sigma_y = 1e9;
  const MaterialParams m = data.material;
  // -div sigma = -((lambda + mu) grad div u + mu lap u), grad div u = (1, 2), lap u = (0, 1)
  const double lm = m.lambda_lame + m.mu_lame;
  data.f = [lm, m](const Vec2&) { return Vec2(-lm, -(2.0 * lm + m.mu_lame)); };
  data.g = [m](const Vec2& x, const Vec2& n) { return Vec2(stress(m, quad_grad(x), {}) * n); };
  return data;
}

SolutionTriple solve_problem(const Mesh& mesh, const ProblemData& data) {
  const SaddleSystem sys = assemble(make_dofmap(mesh), data);
  SolverConfig cfg;
  cfg.algorithm = Algorithm::SemismoothNewton;
  return solve(sys, cfg);
}

ProblemData strip_load() {
  ProblemData data;
  data.g = [](const Vec2& x, const Vec2& n) {
    if (n.y() < 0.5) return Vec2(0, 0);
    const double m = std::min(0.0, x.x() * x.x() - 0.25);
    return Vec2(0, -400.0 * m * m);
  };
  return data;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

SolutionTriple random_triple(const DofMapPtr& dofs, std::mt19937& gen, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  SolutionTriple s;
  s.u = FieldU(dofs);
  s.p = FieldQ(dofs);
  s.lambda = FieldQ(dofs);
  for (auto& c : s.u.coef) c = 1e-3 * nd(gen);
  for (auto& c : s.p.coef) c = nd(gen);
  for (auto& c : s.lambda.coef) c = nd(gen);
  return s;
}

}  // namespace

TEST_SUITE("estimator") {

TEST_CASE("exactly represented elastic solution has zero residuals") {
  Mesh a = build_rectangle_mesh(-1, 1, -1, 1, 2, 2, 2, bottom_dirichlet);
  Mesh b = refine(a, {0});
  b = refine(b, {2});
  std::vector<int> deg(b.num_elements());
  for (int t = 0; t < b.num_elements(); ++t) deg[t] = 2 + t % 2;
  b = with_degrees(b, deg);
  MeshData skew = build_rectangle_mesh(-1, 1, -1, 1, 2, 2, 2, bottom_dirichlet).data();
  skew.vertices[4] = Vec2(0.15, 0.1);
  for (const Mesh& mesh : {a, b, Mesh(skew)}) {
    const ProblemData data = quad_problem();
    const SolutionTriple s = solve_problem(mesh, data);
    REQUIRE(s.converged);
    const EstimatorReport r = estimate(data, s);
    const double scale = 1e-20 * std::pow(5000.0, 2);
    CHECK(sum(r.element) <= scale);
    CHECK(sum(r.interior_edge) <= scale);
    CHECK(sum(r.neumann_edge) <= scale);
    CHECK(r.consistency <= scale);
    CHECK(r.cutoff == 0.0);
    CHECK(std::abs(r.bracket) <= 1e-12);
    CHECK(r.total <= 10 * scale);
  }
}

TEST_CASE("jump and neumann terms of a shear kink") {
  // u = (0, max(0, x - 1)) on (0,2)x(0,1): sigma_12 = mu on the right element
  const auto dofs = make_dofmap(build_rectangle_mesh(0, 2, 0, 1, 2, 1, 1, all_neumann));
  ProblemData data;
  data.material.mu_lame = 3.0;
  SolutionTriple s;
  s.u = interpolate([](const Vec2& x) { return Vec2(0.0, std::max(0.0, x.x() - 1.0)); }, dofs);
  s.p = FieldQ(dofs);
  s.lambda = FieldQ(dofs);
  const EstimatorReport r = estimate(data, s);
  CHECK(sum(r.element) <= 1e-24);
  CHECK(sum(r.interior_edge) == doctest::Approx(9.0).epsilon(1e-13));
  CHECK(sum(r.neumann_edge) == doctest::Approx(27.0).epsilon(1e-13));
  // local indicators: left gets half the jump, right half plus its Neumann sides
  const std::vector<double> loc = r.local();
  const int right = dofs->mesh().element_map(0).corners()[0].x() > 0.5 ? 0 : 1;
  CHECK(loc[right] == doctest::Approx(4.5 + 27.0));
  CHECK(loc[1 - right] == doctest::Approx(4.5));
}

TEST_CASE("jump on a hanging edge is measured on the fine halves") {
  const Mesh mesh = refine(build_rectangle_mesh(0, 2, 0, 1, 2, 1, 1, all_neumann), {0});
  const auto dofs = make_dofmap(mesh);
  ProblemData data;
  data.material.mu_lame = 3.0;
  SolutionTriple s;
  s.u = interpolate([](const Vec2& x) { return Vec2(0.0, std::max(0.0, x.x() - 1.0)); }, dofs);
  s.p = FieldQ(dofs);
  s.lambda = FieldQ(dofs);
  const EstimatorReport r = estimate(data, s);
  // two halves of length 1/2 with p_e = 1: 2 * (1/2 * 9 * 1/2)
  CHECK(sum(r.interior_edge) == doctest::Approx(4.5).epsilon(1e-13));
}

TEST_CASE("consistency term is the projection error of the deviatoric stress") {
  ProblemData data = strip_load();
  data.material.sigma_y = 1e9;
  const Mesh mesh = build_rectangle_mesh(-1, 1, -1, 1, 3, 3, 1, bottom_dirichlet);
  const SolutionTriple s = solve_problem(mesh, data);
  REQUIRE(s.p.coef.lpNorm<Eigen::Infinity>() == 0.0);
  const EstimatorReport r = estimate(data, s);
  // direct: per element, mean of 2 mu dev eps and the L2 distance to it
  double direct = 0.0;
  const double mu = data.material.mu_lame;
  for (int t = 0; t < mesh.num_elements(); ++t) {
    const QuadratureRule rule = gauss_rule(6);
    const ElementMap& map = mesh.element_map(t);
    DevMatrix2 mean;
    double area = 0.0;
    for (int k = 0; k < rule.size(); ++k) {
      const double w = rule.weights[k] * map.det(rule.points[k]);
      mean += (w * 2.0 * mu) * dev_part(s.u.gradient(t, rule.points[k]));
      area += w;
    }
    mean = (1.0 / area) * mean;
    for (int k = 0; k < rule.size(); ++k) {
      const double w = rule.weights[k] * map.det(rule.points[k]);
      const DevMatrix2 d = 2.0 * mu * dev_part(s.u.gradient(t, rule.points[k])) - mean;
      direct += w * frobenius_inner(d, d);
    }
  }
  CHECK(direct > 0.0);
  CHECK(r.consistency == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("cut-off multiplier") {
  const auto dofs = make_dofmap(build_rectangle_mesh(-1, 1, -1, 1, 2, 2, 2, bottom_dirichlet));
  SolutionTriple s;
  s.p = FieldQ(dofs);
  s.lambda = FieldQ(dofs);
  std::mt19937 gen(4);
  std::normal_distribution<double> nd(0.0, 3.0);
  for (auto& c : s.lambda.coef) c = nd(gen);
  s.lambda = project_onto_lambda(s.lambda, 5.0);
  CHECK((cutoff_mu_star(s, 5.0).coef - s.lambda.coef).lpNorm<Eigen::Infinity>() <= 1e-13);

  // |mu_hat|_F = 2 sigma_y at one point
  s.lambda.coef.setZero();
  s.p.coef.setZero();
  s.lambda.set(1, 2, {3.0 / std::sqrt(2.0), 4.0 / std::sqrt(2.0)});
  s.p.set(1, 2, {2.0 * 3.0 / std::sqrt(2.0), 2.0 * 4.0 / std::sqrt(2.0)});
  const FieldQ m = cutoff_mu_star(s, 5.0);
  CHECK(m.at(1, 2).a == doctest::Approx(3.0 / std::sqrt(2.0)));
  CHECK(m.at(1, 2).b == doctest::Approx(4.0 / std::sqrt(2.0)));

  // random triples against a dense per-point loop
  for (int trial = 0; trial < 20; ++trial) {
    SolutionTriple r = random_triple(dofs, gen, 4.0);
    const FieldQ ms = cutoff_mu_star(r, 5.0);
    double dist = 0.0;
    const Mesh& mesh = dofs->mesh();
    for (int t = 0; t < mesh.num_elements(); ++t) {
      for (int k = 0; k < dofs->num_q_points(t); ++k) {
        const DevMatrix2 mh = r.lambda.at(t, k) + 0.5 * r.p.at(t, k);
        const double f = std::min(1.0, 5.0 / frobenius(mh));
        const DevMatrix2 d = r.lambda.at(t, k) - f * mh;
        dist += dofs->q_weight(t, k) * frobenius_inner(d, d);
        CHECK(frobenius(ms.at(t, k)) <= 5.0 * (1 + 1e-15));
      }
    }
    const FieldQ diff(dofs, r.lambda.coef - ms.coef);
    CHECK(q_inner(diff, diff) == doctest::Approx(dist).epsilon(1e-12));
  }
}

TEST_CASE("global cut-off terms") {
  std::mt19937 gen(21);
  // p = 1: fields are constant per element, so the pointwise and Gauss
  // point cut-offs coincide
  const auto d1 = make_dofmap(build_rectangle_mesh(-1, 1, -1, 1, 3, 3, 1, bottom_dirichlet));
  for (int trial = 0; trial < 5; ++trial) {
    SolutionTriple r = random_triple(d1, gen, 4.0);
    ProblemData data;
    const EstimatorReport rep = estimate(data, r);
    const FieldQ ms = cutoff_mu_star(r, 5.0);
    const FieldQ diff(d1, r.lambda.coef - ms.coef);
    CHECK(rep.cutoff == doctest::Approx(q_inner(diff, diff)).epsilon(1e-11));
    CHECK(rep.bracket == doctest::Approx(psi_hp(r.p, 5.0) - q_inner(ms, r.p)).epsilon(1e-11));
  }
  // higher degree: bracket stays non-negative
  const auto d3 = make_dofmap(build_rectangle_mesh(-1, 1, -1, 1, 2, 2, 3, bottom_dirichlet));
  for (int trial = 0; trial < 20; ++trial) {
    SolutionTriple r = random_triple(d3, gen, 1.0 + trial);
    const EstimatorReport rep = estimate(ProblemData{}, r);
    CHECK(rep.bracket >= -1e-10);
    CHECK(rep.cutoff >= 0.0);
    double parts = sum(rep.element) + sum(rep.interior_edge) + sum(rep.neumann_edge) +
                   rep.consistency + rep.cutoff + rep.bracket;
    CHECK(rep.total == doctest::Approx(parts).epsilon(1e-12));
    CHECK(sum(rep.local()) + rep.consistency + rep.cutoff + rep.bracket ==
          doctest::Approx(rep.total).epsilon(1e-12));
  }
}

TEST_CASE("estimator decreases under uniform refinement of the strip problem") {
  const ProblemData data = strip_load();
  Mesh mesh = build_rectangle_mesh(-1, 1, -1, 1, 5, 5, 1, bottom_dirichlet);
  double last = std::numeric_limits<double>::infinity();
  for (int level = 0; level < 3; ++level) {
    const SolutionTriple s = solve_problem(mesh, data);
    const EstimatorReport r = estimate(data, s);
    CHECK(r.eta() < last);
    CHECK(r.bracket >= -1e-10);
    last = r.eta();
    mesh = refine_uniform(mesh);
  }
}

TEST_CASE("doerfler marking examples") {
  CHECK(mark_dorfler({1, 0, 2, 3}, 1.0) == std::vector<int>{0, 2, 3});
  CHECK(mark_dorfler({0.01, 0.02, 0.9 * 0.04 / 0.1, 0.01, 0.01}, 0.5) == std::vector<int>{2});
  std::vector<double> uniform(16, 0.37);
  CHECK(mark_dorfler(uniform, 0.5).size() == 4);
  CHECK(mark_dorfler(std::vector<double>(5, 0.0), 0.5).empty());
  CHECK_THROWS_AS(mark_dorfler(uniform, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(mark_dorfler(uniform, 1.5), std::invalid_argument);
}

TEST_CASE("doerfler marking is minimal") {
  std::mt19937 gen(99);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::uniform_int_distribution<int> sz(1, 200);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(sz(gen));
    for (auto& x : v) x = std::pow(ud(gen), 4);
    const double theta = 0.1 + 0.8 * ud(gen);
    const std::vector<int> m = mark_dorfler(v, theta);
    const double goal = dorfler_threshold(sum(v), theta);
    double acc = 0.0, smallest = std::numeric_limits<double>::infinity();
    for (int i : m) {
      acc += v[i];
      smallest = std::min(smallest, v[i]);
    }
    CHECK(acc >= goal);
    CHECK(acc - smallest < goal);
    // no set of the same size minus one can do better than the largest entries
    std::vector<double> sorted = v;
    std::sort(sorted.rbegin(), sorted.rend());
    CHECK(std::accumulate(sorted.begin(), sorted.begin() + (m.size() - 1), 0.0) < goal);
  }
}

TEST_CASE("hp decision") {
  const Mesh mesh = build_rectangle_mesh(0, 2, 0, 1, 2, 1, 2, all_neumann);
  HpHistory h;
  // cold start
  CHECK(decide_hp(mesh, h, {0, 1}, nullptr) ==
        std::vector<HpAction>{HpAction::HRefine, HpAction::HRefine});
  const Mesh m1 = with_degrees(mesh, {1, 1});
  h.record(m1, {1.0, 1.0});
  h.record(mesh, {0.1, 0.9});
  CHECK(decide_hp(mesh, h, {0, 1}, nullptr) ==
        std::vector<HpAction>{HpAction::PEnrich, HpAction::HRefine});
  HpOptions opt;
  opt.max_degree = 2;
  CHECK(decide_hp(mesh, h, {0}, nullptr, opt) == std::vector<HpAction>{HpAction::HRefine});

  // Legendre fallback: smooth polynomial vs a kink
  const auto dofs = make_dofmap(build_rectangle_mesh(-1, 1, -1, 1, 1, 1, 4, all_neumann));
  const FieldU smooth = interpolate([](const Vec2& x) { return Vec2(x.x() + 0.1 * x.y(), 1.0); }, dofs);
  const FieldU kink = interpolate([](const Vec2& x) { return Vec2(std::abs(x.x() - 0.1), 0.0); }, dofs);
  CHECK(legendre_decay(smooth, 0) > 5.0);
  CHECK(legendre_decay(kink, 0) < 0.69);
  HpHistory empty;
  CHECK(decide_hp(dofs->mesh(), empty, {0}, &smooth) == std::vector<HpAction>{HpAction::PEnrich});
  CHECK(decide_hp(dofs->mesh(), empty, {0}, &kink) == std::vector<HpAction>{HpAction::HRefine});
  CHECK(legendre_decay(interpolate([](const Vec2& x) { return x; },
                                   make_dofmap(build_rectangle_mesh(0, 1, 0, 1, 1, 1, 1))),
                       0) < 0.0);
}

TEST_CASE("hp actions change the mesh") {
  const Mesh mesh = build_rectangle_mesh(0, 3, 0, 1, 3, 1, 1, all_neumann);
  const Mesh m = apply_hp(mesh, {0, 2}, {HpAction::PEnrich, HpAction::HRefine});
  CHECK(m.num_elements() == 6);
  int p2 = 0;
  for (int t = 0; t < m.num_elements(); ++t) p2 += m.degree(t) == 2;
  CHECK(p2 == 1);
  CHECK_THROWS_AS(apply_hp(mesh, {0}, {}), std::invalid_argument);
}

TEST_CASE("report csv") {
  const auto dofs = make_dofmap(build_rectangle_mesh(0, 2, 0, 1, 2, 1, 1, all_neumann));
  SolutionTriple s;
  s.u = interpolate([](const Vec2& x) { return Vec2(0.0, std::max(0.0, x.x() - 1.0)); }, dofs);
  s.p = FieldQ(dofs);
  s.lambda = FieldQ(dofs);
  const EstimatorReport r = estimate(ProblemData{}, s);
  std::ostringstream os;
  write_report_csv(os, dofs->mesh(), r);
  const std::string out = os.str();
  CHECK(out.rfind("element,eta_T,", 0) == 0);
  CHECK(std::count(out.begin(), out.end(), '\n') == 3);
}

}
