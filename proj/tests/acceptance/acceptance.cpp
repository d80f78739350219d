// Acceptance checks, one PASS/FAIL line per criterion.

#include "plastmix/io.hpp"
#include "plastmix/study.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

using namespace plastmix;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Line {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

int failures = 0;

void report(int id, const std::string& name, Line l) {
  std::printf("%s criterion %d (%s): %s\n", l.pass ? "PASS" : "FAIL", id, name.c_str(),
              l.detail.c_str());
  std::fflush(stdout);
  failures += !l.pass;
}

void guarded(int id, const std::string& name, const std::function<Line()>& body) {
  try {
    report(id, name, body());
  } catch (const std::exception& e) {
    Line l;
    l.require(false, std::string("exception: ") + e.what());
    report(id, name, l);
  }
}

BoundaryTag bottom_clamped(const Vec2& x, const Vec2& n) {
  return (n.y() < -0.5 && x.y() < -1.0 + 1e-9) ? BoundaryTag::Dirichlet : BoundaryTag::Neumann;
}

SaddleSystem strip_system(int n, int p) {
  const Problem pr = strip_benchmark(n, p);
  return assemble(make_dofmap(pr.mesh), pr.data);
}

double distance(const FieldU& u1, const FieldQ& p1, const FieldU& u2, const FieldQ& p2) {
  return u_norms(FieldU(u1.dofs, u1.coef - u2.coef)).h1() + q_norm(FieldQ(p1.dofs, p1.coef - p2.coef));
}

int plastic_points(const FieldQ& p, double sigma_y) {
  int n = 0;
  for (Eigen::Index i = 0; i < p.coef.size(); i += 2)
    n += frobenius(DevMatrix2{p.coef[i], p.coef[i + 1]}) > 1e-8 * sigma_y;
  return n;
}

struct StudyRun {
  std::string label;
  StudyResult result;
  double seconds = 0.0;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plastmix acceptance checks"};
  std::string work = "acceptance_work";
  app.add_option("--work-dir", work, "directory for study outputs and the reference cache");
  CLI11_PARSE(app, argc, argv);
  const fs::path work_dir(work);
  fs::create_directories(work_dir);
  // cold references so the runtime figures are honest
  fs::remove_all(work_dir / "cache");

  constexpr double sigma_y = 5.0;

  // 1 ------------------------------------------------------------------
  guarded(1, "inf-sup constant", [&] {
    Line l;
    const auto t0 = Clock::now();
    for (auto [n, p] : {std::pair{1, 1}, {2, 1}, {2, 2}}) {
      const SaddleSystem sys = strip_system(n, p);
      const double beta = infsup_constant(sys, *sys.dofs);
      l.require(std::abs(beta - 1.0) <= 1e-8, fmt("%dx%d p=%d beta=%.3e", n, n, p, beta));
      l.note(fmt("%dx%d p=%d |beta-1|=%.1e", n, n, p, std::abs(beta - 1.0)));
    }
    const double s = since(t0);
    l.require(s < 10.0, "runtime");
    l.note(fmt("%.2f s", s));
    return l;
  });

  // studies used by criteria 2, 3, 6, 9 -------------------------------
  std::vector<StudyRun> runs;
  double study_seconds = 0.0;
  std::string study_error;
  {
    struct StudyCase {
      const char* label;
      RefinementMode mode;
      int degree;
      int levels;
      bool vtk;
    };
    const StudyCase cases[] = {{"h1", RefinementMode::UniformH, 1, 5, true},
                               {"h2", RefinementMode::UniformH, 2, 5, false},
                               {"a1", RefinementMode::AdaptiveH, 1, 22, false},
                               {"a3", RefinementMode::AdaptiveH, 3, 20, false},
                               {"hp", RefinementMode::AdaptiveHP, 2, 20, false}};
    const auto t0 = Clock::now();
    try {
      for (const StudyCase& s : cases) {
        StudyConfig cfg = default_study_config();
        cfg.mode = s.mode;
        cfg.degree = s.degree;
        cfg.levels = s.levels;
        cfg.output_dir = work_dir / s.label;
        cfg.cache_dir = work_dir / "cache";
        cfg.write_vtk = s.vtk;
        const auto t1 = Clock::now();
        StudyRun r{s.label, run_study(cfg), 0.0};
        r.seconds = since(t1);
        std::printf("  study %s: %zu levels, N up to %ld, %.1f s\n", s.label,
                    r.result.record.levels.size(), r.result.record.levels.back().dofs, r.seconds);
        std::fflush(stdout);
        runs.push_back(std::move(r));
      }
    } catch (const std::exception& e) {
      study_error = e.what();
    }
    study_seconds = since(t0);
  }
  auto strip_solutions = [&] {
    std::vector<const SolutionTriple*> out;
    for (const auto& r : runs) {
      for (const auto& s : r.result.solutions) out.push_back(&s);
      if (r.result.reference) out.push_back(&*r.result.reference);
    }
    return out;
  };

  // 2 ------------------------------------------------------------------
  guarded(2, "feasibility and complementarity", [&] {
    Line l;
    l.require(study_error.empty(), "studies: " + study_error);
    double worst_feas = 0.0, worst_comp = 0.0, worst_level_s = 0.0;
    int checked = 0;
    for (const SolutionTriple* s : strip_solutions()) {
      worst_feas = std::max(worst_feas, lambda_feasible(s->lambda, sigma_y).violation);
      const double lp = q_inner(s->lambda, s->p);
      worst_comp = std::max(worst_comp, std::abs(psi_hp(s->p, sigma_y) - lp) / std::max(1.0, std::abs(lp)));
      ++checked;
    }
    for (const auto& r : runs)
      for (const auto& lv : r.result.record.levels) worst_level_s = std::max(worst_level_s, lv.seconds);
    l.require(checked > 0, "no solutions");
    l.require(worst_feas <= 1e-10, "feasibility");
    l.require(worst_comp <= 1e-8, "complementarity");
    l.require(worst_level_s < 60.0, "level runtime");
    l.note(fmt("%d solves, max violation %.1e, max relative gap %.1e, slowest level %.1f s", checked,
               worst_feas, worst_comp, worst_level_s));
    return l;
  });

  // 3 ------------------------------------------------------------------
  guarded(3, "multiplier recovery", [&] {
    Line l;
    l.require(study_error.empty(), "studies: " + study_error);
    double worst = 0.0;
    int checked = 0;
    for (const SolutionTriple* s : strip_solutions()) {
      const MaterialParams m;
      const SaddleSystem sys = assemble(s->u.dofs, ProblemData{m, {}, strip_traction});
      // coefficients of the projection of dev(sigma - H p) = 2 mu dev eps(u) - d p
      const Eigen::VectorXd target = trial_stress(sys, s->u.coef) - m.d() * s->p.coef;
      const FieldQ proj = project_onto_lambda(FieldQ(s->u.dofs, target), m.sigma_y);
      const double rel = q_norm(FieldQ(s->u.dofs, s->lambda.coef - proj.coef)) / q_norm(s->lambda);
      worst = std::max(worst, rel);
      ++checked;
    }
    l.require(checked > 0, "no solutions");
    l.require(worst <= 1e-9, "recovery");
    l.note(fmt("%d solves, max relative defect %.1e", checked, worst));
    return l;
  });

  // 4 ------------------------------------------------------------------
  guarded(4, "oracle equivalence", [&] {
    Line l;
    const auto t0 = Clock::now();
    // 2x2 p=1 is the stated case; 4x4 p=1 adds active plastic points
    for (int n : {2, 4}) {
      const SaddleSystem sys = strip_system(n, 1);
      SolverConfig uz;
      uz.tol_outer = 1e-12;
      const SolutionTriple a = solve_uzawa(sys, uz);
      const OracleResult o = solve_oracle(sys, sigma_y, 1e-12);
      SolverConfig nc;
      nc.algorithm = Algorithm::SemismoothNewton;
      const SolutionTriple b = solve_ssn(sys, nc);
      const double d_oracle = distance(a.u, a.p, o.u, o.p);
      const double d_ssn = distance(a.u, a.p, b.u, b.p);
      l.require(a.converged && b.converged, "solver convergence");
      l.require(d_oracle <= 1e-6, fmt("%dx%d uzawa-oracle", n, n));
      l.require(d_ssn <= 1e-8, fmt("%dx%d ssn-uzawa", n, n));
      l.note(fmt("%dx%d p=1 (%d plastic points): uzawa-oracle %.1e, ssn-uzawa %.1e", n, n,
                 plastic_points(a.p, sigma_y), d_oracle, d_ssn));
    }
    const double s = since(t0);
    l.require(s < 60.0, "runtime");
    l.note(fmt("%.1f s", s));
    return l;
  });

  // 5 ------------------------------------------------------------------
  guarded(5, "elastic verification", [&] {
    Line l;
    const auto t0 = Clock::now();
    for (int p : {1, 2, 3}) {
      StudyConfig cfg = default_study_config();
      cfg.preset = ProblemPreset::ManufacturedElastic;
      cfg.degree = p;
      cfg.base_n = 2;
      cfg.levels = 4;
      cfg.output_dir = work_dir / ("manufactured_p" + std::to_string(p));
      cfg.write_vtk = false;
      const StudyResult r = run_study(cfg);
      const double eoc = r.record.rate_h.eoc_u;
      l.require(std::abs(eoc - p) <= 0.1, fmt("p=%d EOC %.3f", p, eoc));
      l.note(fmt("p=%d EOC_h(e_u) %.3f", p, eoc));
    }
    const double s = since(t0);
    l.require(s < 300.0, "runtime");
    l.note(fmt("%.1f s", s));
    return l;
  });

  // 6 ------------------------------------------------------------------
  guarded(6, "convergence rates on the benchmark", [&] {
    Line l;
    l.require(study_error.empty(), "studies: " + study_error);
    auto find = [&](const std::string& label) -> const ConvergenceRecord* {
      for (const auto& r : runs)
        if (r.label == label) return &r.result.record;
      return nullptr;
    };
    auto within = [&](const char* what, double v, double lo, double hi) {
      l.require(v >= lo && v <= hi, fmt("%s %.3f not in [%.2f, %.2f]", what, v, lo, hi));
      l.note(fmt("%s %.3f in [%.2f, %.2f]", what, v, lo, hi));
    };
    long max_dofs = 0;
    for (const auto& r : runs)
      for (const auto& lv : r.result.record.levels) max_dofs = std::max(max_dofs, lv.dofs);
    if (const auto* h1 = find("h1")) {
      within("h1 e_u", h1->rate_n.eoc_u, 0.35, 0.55);
      within("h1 e_lambda", h1->rate_n.eoc_lambda, 0.35, 0.60);
    } else {
      l.require(false, "h1 missing");
    }
    if (const auto* h2 = find("h2")) within("h2 e_u", h2->rate_n.eoc_u, 0.23, 0.45);
    else l.require(false, "h2 missing");
    if (const auto* a1 = find("a1")) within("a1 e_u", a1->rate_n.eoc_u, 0.35, 0.65);
    else l.require(false, "a1 missing");
    for (const char* label : {"a3", "hp"})
      if (const auto* r = find(label)) {
        const Rates all = compute_rates(r->levels, static_cast<int>(r->levels.size()) - 1);
        l.note(fmt("%s e_u %.3f e_p %.3f e_lambda %.3f, all levels %.3f %.3f %.3f (reported)", label,
                   r->rate_n.eoc_u, r->rate_n.eoc_p, r->rate_n.eoc_lambda, all.eoc_u, all.eoc_p,
                   all.eoc_lambda));
      }
    l.require(max_dofs <= 200000, "dof cap");
    l.require(study_seconds < 1800.0, "runtime");
    l.note(fmt("largest level %ld dofs, %.1f s", max_dofs, study_seconds));
    return l;
  });

  // 7 ------------------------------------------------------------------
  guarded(7, "independence of the initial multiplier", [&] {
    Line l;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-10.0, 10.0);
    double worst = 0.0;
    for (auto [n, p] : {std::pair{4, 1}, {2, 2}, {3, 3}}) {
      const SaddleSystem sys = strip_system(n, p);
      SolverConfig cfg;
      cfg.tol_outer = 1e-13;
      const SolutionTriple a = solve_uzawa(sys, cfg);
      for (int trial = 0; trial < 3; ++trial) {
        Eigen::VectorXd c(sys.dofs->num_q());
        for (auto& v : c) v = unif(rng);
        const FieldQ l0 = project_onto_lambda(FieldQ(sys.dofs, c), sigma_y);
        const SolutionTriple b = solve_uzawa(sys, cfg, &l0);
        l.require(a.converged && b.converged, "convergence");
        const double du = u_norms(FieldU(sys.dofs, a.u.coef - b.u.coef)).h1();
        const double dp = q_norm(FieldQ(sys.dofs, a.p.coef - b.p.coef));
        const double dl = q_norm(FieldQ(sys.dofs, a.lambda.coef - b.lambda.coef));
        worst = std::max({worst, du, dp, dl});
      }
    }
    l.require(worst <= 1e-8, "agreement");
    l.note(fmt("9 random starts on 3 meshes, max field difference %.1e", worst));
    return l;
  });

  // 8 ------------------------------------------------------------------
  guarded(8, "property suites", [&] {
    Line l;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<DofMapPtr> spaces;
    spaces.push_back(make_dofmap(build_rectangle_mesh(-1, 1, -1, 1, 2, 2, 3, bottom_clamped)));
    {
      MeshData d;
      d.vertices = {{0, 0}, {2, 0}, {2.5, 1.5}, {-0.3, 1}};
      d.elements = {{0, 1, 2, 3}};
      d.degrees = {2};
      d.lineage = {Lineage{0, {}}};
      for (auto [a, b] : {std::pair{0, 1}, {1, 2}, {2, 3}, {3, 0}})
        d.boundary[make_edge_key(a, b)] = BoundaryTag::Dirichlet;
      Mesh m = refine(Mesh(d), {0});
      m = refine(m, {2});
      std::vector<int> deg(m.num_elements());
      for (int t = 0; t < m.num_elements(); ++t) deg[t] = 1 + t % 4;
      spaces.push_back(make_dofmap(with_degrees(m, deg)));
    }
    auto random_q = [&](const DofMapPtr& dofs, double scale) {
      Eigen::VectorXd c(dofs->num_q());
      for (auto& v : c) v = scale * unif(rng);
      return FieldQ(dofs, c);
    };
    // membership representation: (mu, q) <= psi_hp(q) for mu in the set
    int violations = 0, converse_missed = 0;
    for (int i = 0; i < 500; ++i) {
      const DofMapPtr& dofs = spaces[i % spaces.size()];
      const FieldQ mu = project_onto_lambda(random_q(dofs, 3.0 * sigma_y), sigma_y);
      const FieldQ q = random_q(dofs, 1.0);
      if (q_inner(mu, q) > psi_hp(q, sigma_y) + 1e-10) ++violations;
      // an infeasible mu is separated by q concentrated at the offending point
      FieldQ bad = mu;
      const int k = static_cast<int>(rng() % (dofs->num_q() / 2));
      bad.coef[2 * k] *= 1.5;
      bad.coef[2 * k + 1] *= 1.5;
      if (frobenius(DevMatrix2{bad.coef[2 * k], bad.coef[2 * k + 1]}) > sigma_y * (1 + 1e-9)) {
        FieldQ probe(dofs);
        probe.coef[2 * k] = bad.coef[2 * k];
        probe.coef[2 * k + 1] = bad.coef[2 * k + 1];
        if (!(q_inner(bad, probe) > psi_hp(probe, sigma_y))) ++converse_missed;
      }
    }
    l.require(violations == 0 && converse_missed == 0, "set representation");
    l.note(fmt("500 pairs, %d violations, %d missed separations", violations, converse_missed));

    int idem = 0, expand = 0;
    for (int i = 0; i < 1000; ++i) {
      const DofMapPtr& dofs = spaces[i % spaces.size()];
      const FieldQ x = random_q(dofs, 3.0 * sigma_y), y = random_q(dofs, 3.0 * sigma_y);
      const FieldQ px = project_onto_lambda(x, sigma_y), py = project_onto_lambda(y, sigma_y);
      const FieldQ ppx = project_onto_lambda(px, sigma_y);
      if (q_norm(FieldQ(dofs, ppx.coef - px.coef)) > 1e-12 * std::max(1.0, q_norm(px))) ++idem;
      const double lhs = q_norm(FieldQ(dofs, px.coef - py.coef));
      const double rhs = q_norm(FieldQ(dofs, x.coef - y.coef));
      if (lhs > rhs * (1 + 1e-12)) ++expand;
    }
    l.require(idem == 0 && expand == 0, "projection");
    l.note(fmt("1000 pairs, %d idempotence and %d expansion failures", idem, expand));

    int not_minimal = 0;
    for (int i = 0; i < 100; ++i) {
      const int n = 1 + static_cast<int>(rng() % 200);
      std::vector<double> eta(n);
      std::exponential_distribution<double> ex(1.0);
      for (auto& v : eta) v = std::pow(ex(rng), 3);
      const double theta = 0.1 + 0.85 * (0.5 + 0.5 * unif(rng));
      const std::vector<int> m = mark_dorfler(eta, theta);
      const double total = std::accumulate(eta.begin(), eta.end(), 0.0);
      double sum = 0.0, smallest = std::numeric_limits<double>::infinity();
      for (int t : m) {
        sum += eta[t];
        smallest = std::min(smallest, eta[t]);
      }
      const double target = theta * theta * total * (1 - 1e-12);
      // removing any marked element, the smallest included, drops below the target
      if (!(sum >= target) || !(sum - smallest < target)) ++not_minimal;
      // no set of the same size leaves out a larger indicator
      std::vector<double> sorted = eta;
      std::sort(sorted.rbegin(), sorted.rend());
      const double best = std::accumulate(sorted.begin(), sorted.begin() + m.size(), 0.0);
      if (std::abs(best - sum) > 1e-12 * total) ++not_minimal;
      if (m.size() > 1) {
        const double best_smaller = std::accumulate(sorted.begin(), sorted.begin() + m.size() - 1, 0.0);
        if (best_smaller >= target) ++not_minimal;
      }
    }
    l.require(not_minimal == 0, "doerfler");
    l.note(fmt("100 vectors, %d non-minimal", not_minimal));
    const double s = since(t0);
    l.require(s < 60.0, "runtime");
    l.note(fmt("%.2f s", s));
    return l;
  });

  // 9 ------------------------------------------------------------------
  guarded(9, "pointwise complementarity", [&] {
    Line l;
    l.require(study_error.empty(), "studies: " + study_error);
    double worst = 0.0;
    long active = 0;
    for (const SolutionTriple* s : strip_solutions()) {
      for (Eigen::Index i = 0; i < s->p.coef.size(); i += 2) {
        const DevMatrix2 p{s->p.coef[i], s->p.coef[i + 1]};
        const DevMatrix2 lam{s->lambda.coef[i], s->lambda.coef[i + 1]};
        const double np = frobenius(p);
        if (np <= 1e-8 * sigma_y) continue;
        ++active;
        worst = std::max(worst, std::abs(frobenius_inner(p, lam) - sigma_y * np) / (sigma_y * np));
      }
    }
    l.require(active > 0, "no plastic points");
    l.require(worst <= 1e-6, "complementarity");
    l.note(fmt("%ld plastic Gauss points, max relative defect %.1e", active, worst));
    return l;
  });

  std::printf("%s: %d of 9 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
