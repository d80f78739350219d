#include "plastmix/study.hpp"

#include "plastmix/io.hpp"
#include "plastmix/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <new>
#include <sstream>
#include <map>
#include <set>
#include <stdexcept>

namespace plastmix {

namespace {

BoundaryTag bottom_clamped(const Vec2& x, const Vec2& n) {
  return (n.y() < -0.5 && x.y() < -1.0 + 1e-9) ? BoundaryTag::Dirichlet : BoundaryTag::Neumann;
}

Mat2 sigma_of(const MaterialParams& m, const Mat2& grad) {
  const Mat2 eps = 0.5 * (grad + grad.transpose());
  return m.lambda_lame * eps.trace() * Mat2::Identity() + 2.0 * m.mu_lame * eps;
}

constexpr double kManufacturedScale = 1e-3;

std::string hex64(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// side of the rectangle from the outward normal
std::string side_name(const Vec2& n) {
  if (n.x() < -0.5) return "left";
  if (n.x() > 0.5) return "right";
  return n.y() < 0 ? "bottom" : "top";
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (char& c : s)
    if (c == '-') c = '_';
  return s;
}

}  // namespace

Vec2 strip_traction(const Vec2& x, const Vec2& normal) {
  if (normal.y() < 0.5) return Vec2(0, 0);
  const double m = std::min(0.0, x.x() * x.x() - 0.25);
  return Vec2(0, -400.0 * m * m);
}

Problem strip_benchmark(int n, int p) {
  Problem pr{"strip", {}, build_rectangle_mesh(-1, 1, -1, 1, n, n, p, bottom_clamped), {}};
  pr.data.g = strip_traction;
  return pr;
}

Problem manufactured_elastic(int n, int p) {
  // u1 = s sin(x) (e^(y+1) - 1), u2 = s cos(x) sin(y+1)
  MaterialParams m;
  m.sigma_y = 1e8;
  const double s = kManufacturedScale;
  ExactSolution ex;
  ex.u = [s](const Vec2& x) {
    return Vec2(s * std::sin(x.x()) * (std::exp(x.y() + 1) - 1),
                s * std::cos(x.x()) * std::sin(x.y() + 1));
  };
  ex.grad_u = [s](const Vec2& x) {
    const double sx = std::sin(x.x()), cx = std::cos(x.x());
    const double e = std::exp(x.y() + 1), sy = std::sin(x.y() + 1), cy = std::cos(x.y() + 1);
    Mat2 g;
    g << s * cx * (e - 1), s * sx * e, -s * sx * sy, s * cx * cy;
    return g;
  };
  ProblemData data;
  data.material = m;
  data.f = [s, m](const Vec2& x) {
    const double sx = std::sin(x.x()), cx = std::cos(x.x());
    const double e = std::exp(x.y() + 1), sy = std::sin(x.y() + 1), cy = std::cos(x.y() + 1);
    // grad div u and laplacian
    const double u1xx = -sx * (e - 1), u1xy = cx * e;
    const double u2xy = -sx * cy, u2yy = -cx * sy;
    const Vec2 grad_div(u1xx + u2xy, u1xy + u2yy);
    const Vec2 lap(sx, -2.0 * cx * sy);
    return Vec2(-s * ((m.lambda_lame + m.mu_lame) * grad_div + m.mu_lame * lap));
  };
  const MatrixFunction grad = ex.grad_u;
  data.g = [grad, m](const Vec2& x, const Vec2& n) -> Vec2 { return sigma_of(m, grad(x)) * n; };
  return Problem{"manufactured-elastic", std::move(data),
                 build_rectangle_mesh(-1, 1, -1, 1, n, n, p, bottom_clamped), std::move(ex)};
}

Problem custom_problem(const std::filesystem::path& file, int p) {
  const std::string text = read_text(file);
  const std::string ext = file.extension().string();
  const nlohmann::json j = nlohmann::json::parse(ext == ".toml" ? toml_to_json(text) : text);
  static const std::set<std::string> keys{"domain", "n",       "mesh",         "dirichlet",
                                          "material", "volume_force", "traction", "load"};
  for (const auto& [k, v] : j.items())
    if (!keys.count(k)) throw std::invalid_argument("custom problem: unknown key '" + k + "'");

  const std::string name = "custom-" + hex64(fnv1a(text)) + "-p" + std::to_string(p);
  ProblemData data;
  if (j.contains("material")) {
    static const std::set<std::string> mk{"lambda", "mu", "h0", "sigma_y"};
    for (const auto& [k, v] : j["material"].items())
      if (!mk.count(k)) throw std::invalid_argument("custom problem: unknown material key '" + k + "'");
    auto& m = data.material;
    m.lambda_lame = j["material"].value("lambda", m.lambda_lame);
    m.mu_lame = j["material"].value("mu", m.mu_lame);
    m.h0 = j["material"].value("h0", m.h0);
    m.sigma_y = j["material"].value("sigma_y", m.sigma_y);
    m.validate();
  }
  auto make_mesh = [&]() {
    if (j.contains("mesh")) {
      std::filesystem::path mf = j["mesh"].get<std::string>();
      if (mf.is_relative()) mf = file.parent_path() / mf;
      return read_mesh(mf);
    }
    const auto dom = j.value("domain", std::vector<double>{-1, 1, -1, 1});
    const auto nn = j.value("n", std::vector<int>{5, 5});
    if (dom.size() != 4 || nn.size() != 2)
      throw std::invalid_argument("custom problem: domain needs 4 numbers and n needs 2");
    std::set<std::string> dir;
    for (const auto& s : j.value("dirichlet", std::vector<std::string>{"bottom"})) {
      if (s != "left" && s != "right" && s != "bottom" && s != "top")
        throw std::invalid_argument("custom problem: unknown side '" + s + "'");
      dir.insert(s);
    }
    return build_rectangle_mesh(dom[0], dom[1], dom[2], dom[3], nn[0], nn[1], p,
                                [dir](const Vec2&, const Vec2& n) {
                                  return dir.count(side_name(n)) ? BoundaryTag::Dirichlet
                                                                 : BoundaryTag::Neumann;
                                });
  };
  Mesh mesh = make_mesh();
  if (j.contains("volume_force")) {
    const auto f = j["volume_force"].get<std::vector<double>>();
    if (f.size() != 2) throw std::invalid_argument("custom problem: volume_force needs 2 numbers");
    const Vec2 fv(f[0], f[1]);
    data.f = [fv](const Vec2&) { return fv; };
  }
  std::map<std::string, Vec2> traction;
  if (j.contains("traction")) {
    for (const auto& [k, v] : j["traction"].items()) {
      const auto g = v.get<std::vector<double>>();
      if (g.size() != 2) throw std::invalid_argument("custom problem: traction needs 2 numbers");
      traction[k] = Vec2(g[0], g[1]);
    }
  }
  const bool strip = j.value("load", std::string()) == "strip";
  if (j.contains("load") && !strip) throw std::invalid_argument("custom problem: unknown load");
  if (strip || !traction.empty()) {
    data.g = [traction, strip](const Vec2& x, const Vec2& n) {
      Vec2 g = strip ? strip_traction(x, n) : Vec2(0, 0);
      if (auto it = traction.find(side_name(n)); it != traction.end()) g += it->second;
      return g;
    };
  }
  return Problem{name, std::move(data), std::move(mesh), {}};
}

void StudyConfig::validate() const {
  if (levels < 1) throw std::invalid_argument("study: levels must be >= 1");
  if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("study: theta must be in (0, 1]");
  if (degree < 1 || degree > 8) throw std::invalid_argument("study: degree must be in [1, 8]");
  if (base_n < 1) throw std::invalid_argument("study: base_n must be >= 1");
  if (max_dofs < 1) throw std::invalid_argument("study: max_dofs must be positive");
  if (preset == ProblemPreset::Custom && custom_file.empty())
    throw std::invalid_argument("study: custom preset needs a problem file");
  if (!(hp.delta > 0.0 && hp.delta < 1.0)) throw std::invalid_argument("study: hp delta must be in (0, 1)");
  solver.validate();
}

StudyConfig default_study_config() {
  StudyConfig c;
  c.solver.algorithm = Algorithm::SemismoothNewton;
  return c;
}

std::string to_string(ProblemPreset p) {
  switch (p) {
    case ProblemPreset::StripBenchmark: return "STRIP_BENCHMARK";
    case ProblemPreset::ManufacturedElastic: return "MANUFACTURED_ELASTIC";
    case ProblemPreset::Custom: return "CUSTOM";
  }
  return "?";
}

std::string to_string(RefinementMode m) {
  switch (m) {
    case RefinementMode::UniformH: return "UNIFORM_H";
    case RefinementMode::UniformP: return "UNIFORM_P";
    case RefinementMode::AdaptiveH: return "ADAPTIVE_H";
    case RefinementMode::AdaptiveHP: return "ADAPTIVE_HP";
  }
  return "?";
}

ProblemPreset parse_preset(const std::string& s) {
  const std::string u = upper(s);
  if (u == "STRIP_BENCHMARK" || u == "STRIP") return ProblemPreset::StripBenchmark;
  if (u == "MANUFACTURED_ELASTIC") return ProblemPreset::ManufacturedElastic;
  if (u == "CUSTOM") return ProblemPreset::Custom;
  throw std::invalid_argument("unknown preset '" + s + "'");
}

RefinementMode parse_mode(const std::string& s) {
  const std::string u = upper(s);
  for (auto m : {RefinementMode::UniformH, RefinementMode::UniformP, RefinementMode::AdaptiveH,
                 RefinementMode::AdaptiveHP})
    if (u == to_string(m)) return m;
  throw std::invalid_argument("unknown refinement mode '" + s + "'");
}

Problem make_problem(const StudyConfig& cfg) {
  switch (cfg.preset) {
    case ProblemPreset::StripBenchmark: return strip_benchmark(cfg.base_n, cfg.degree);
    case ProblemPreset::ManufacturedElastic: return manufactured_elastic(cfg.base_n, cfg.degree);
    case ProblemPreset::Custom: return custom_problem(cfg.custom_file, cfg.degree);
  }
  throw std::invalid_argument("unknown preset");
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y, int window) {
  if (x.size() != y.size()) throw std::invalid_argument("loglog_slope: size mismatch");
  const int n = static_cast<int>(x.size());
  const int w = std::min(window, n);
  if (w < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = n - w; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = w * sxx - sx * sx;
  if (den <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (w * sxy - sx * sy) / den;
}

Rates compute_rates(const std::vector<LevelRecord>& levels, int window) {
  std::vector<double> n, eu, ep, el, eta;
  for (const auto& l : levels) {
    n.push_back(static_cast<double>(l.dofs));
    eu.push_back(l.e_u);
    ep.push_back(l.e_p);
    el.push_back(l.e_lambda);
    eta.push_back(l.eta);
  }
  auto rate = [&](const std::vector<double>& e) {
    const double s = loglog_slope(n, e, window);
    return std::isnan(s) ? s : -s;
  };
  Rates r;
  r.eoc_u = rate(eu);
  r.eoc_p = rate(ep);
  r.eoc_lambda = rate(el);
  r.eoc_eta = rate(eta);
  return r;
}

ErrorNorms error_norms(const SolutionTriple& sol, const SolutionTriple& ref) {
  const Mesh& coarse = sol.u.dofs->mesh();
  const Mesh& fine = ref.u.dofs->mesh();
  const std::vector<NestedLocation> loc = locate_nested(coarse, fine);
  const int ne = fine.num_elements();
  std::vector<std::array<double, 4>> part(ne);
  parallel_for(ne, [&](int t) {
    const int tc = loc[t].coarse_element;
    const QuadratureRule& rule = cached_gauss_rule(fine.degree(t) + 2);
    const ElementMap& map = fine.element_map(t);
    std::array<double, 4> acc{};
    for (int k = 0; k < rule.size(); ++k) {
      const Vec2& xi = rule.points[k];
      const Vec2 xc = loc[t].embedding.apply(xi);
      const double w = rule.weights[k] * std::abs(map.det(xi));
      const Vec2 du = ref.u.value(t, xi) - sol.u.value(tc, xc);
      const Mat2 dg = ref.u.gradient(t, xi) - sol.u.gradient(tc, xc);
      const Mat2 deps = 0.5 * (dg + dg.transpose());
      const DevMatrix2 dp = ref.p.value(t, xi) - sol.p.value(tc, xc);
      const DevMatrix2 dl = ref.lambda.value(t, xi) - sol.lambda.value(tc, xc);
      acc[0] += w * du.squaredNorm();
      acc[1] += w * deps.squaredNorm();
      acc[2] += w * frobenius_inner(dp, dp);
      acc[3] += w * frobenius_inner(dl, dl);
    }
    part[t] = acc;
  });
  std::array<double, 4> s{};
  for (const auto& a : part)
    for (int i = 0; i < 4; ++i) s[i] += a[i];
  return {std::sqrt(s[0] + s[1]), std::sqrt(s[2]), std::sqrt(s[3])};
}

ErrorNorms exact_error_norms(const SolutionTriple& sol, const ExactSolution& exact,
                             const MaterialParams& m) {
  const Mesh& mesh = sol.u.dofs->mesh();
  const int ne = mesh.num_elements();
  std::vector<std::array<double, 4>> part(ne);
  parallel_for(ne, [&](int t) {
    const QuadratureRule& rule = cached_gauss_rule(mesh.degree(t) + 3);
    const ElementMap& map = mesh.element_map(t);
    std::array<double, 4> acc{};
    for (int k = 0; k < rule.size(); ++k) {
      const Vec2& xi = rule.points[k];
      const Vec2 x = map.map(xi);
      const double w = rule.weights[k] * std::abs(map.det(xi));
      const Mat2 ge = exact.grad_u(x);
      const Vec2 du = exact.u(x) - sol.u.value(t, xi);
      const Mat2 dg = ge - sol.u.gradient(t, xi);
      const Mat2 deps = 0.5 * (dg + dg.transpose());
      const DevMatrix2 dp = sol.p.value(t, xi);
      const DevMatrix2 dl = dev_part(2.0 * m.mu_lame * ge) - sol.lambda.value(t, xi);
      acc[0] += w * du.squaredNorm();
      acc[1] += w * deps.squaredNorm();
      acc[2] += w * frobenius_inner(dp, dp);
      acc[3] += w * frobenius_inner(dl, dl);
    }
    part[t] = acc;
  });
  std::array<double, 4> s{};
  for (const auto& a : part)
    for (int i = 0; i < 4; ++i) s[i] += a[i];
  return {std::sqrt(s[0] + s[1]), std::sqrt(s[2]), std::sqrt(s[3])};
}

Mesh overkill_mesh(const Mesh& finest) {
  const Mesh fine = refine_uniform(finest);
  std::vector<int> deg(fine.num_elements());
  for (int t = 0; t < fine.num_elements(); ++t) deg[t] = fine.degree(t) + 1;
  return with_degrees(fine, std::move(deg));
}

namespace {

std::string solver_key(const SolverConfig& s) {
  std::ostringstream os;
  os << std::setprecision(17) << static_cast<int>(s.algorithm) << ',' << s.rho << ','
     << s.tol_outer << ',' << s.newton_rtol << ',' << static_cast<int>(s.linear) << ',' << s.cg_tol;
  return os.str();
}

std::string material_key(const MaterialParams& m) {
  std::ostringstream os;
  os << std::setprecision(17) << m.lambda_lame << ',' << m.mu_lame << ',' << m.h0 << ','
     << m.sigma_y;
  return os.str();
}

std::size_t memory_estimate(const DofMap& dofs) {
  // factor fill of a 2D nested-dissection ordering, rough
  const double n = dofs.num_u();
  const double p = dofs.mesh().max_degree();
  return static_cast<std::size_t>(8.0 * n * (p + 1) * (p + 1) * std::max(1.0, std::log2(n)) * 4.0);
}

SolutionTriple solve_level(const SaddleSystem& sys, const SolverConfig& cfg, const std::string& what) {
  try {
    return solve(sys, cfg);
  } catch (const std::bad_alloc&) {
    std::ostringstream os;
    os << what << ": out of memory with " << sys.dofs->num_dofs() << " dofs (estimated "
       << memory_estimate(*sys.dofs) / (1 << 20) << " MiB for the factorization)";
    throw std::runtime_error(os.str());
  }
}

}  // namespace

ReferenceResult overkill_reference(const Mesh& finest, const Problem& problem,
                                   const SolverConfig& solver,
                                   const std::filesystem::path& cache_dir) {
  const Mesh mesh = overkill_mesh(finest);
  DofMapPtr dofs = make_dofmap(mesh);
  ReferenceResult out;
  if (!cache_dir.empty()) {
    const std::string key = mesh_to_json(mesh) + '|' + problem.name + '|' +
                            material_key(problem.data.material) + '|' + solver_key(solver);
    out.cache_file = cache_dir / ("reference_" + hex64(fnv1a(key)) + ".bin");
    if (std::filesystem::exists(out.cache_file)) {
      out.solution = read_solution(out.cache_file, dofs);
      out.cache_hit = true;
      return out;
    }
  }
  const SaddleSystem sys = assemble(dofs, problem.data);
  out.solution = solve_level(sys, solver, "reference solve");
  if (!out.solution.converged)
    throw std::runtime_error("reference solve did not converge: " + out.solution.diagnostic);
  if (!cache_dir.empty()) {
    std::filesystem::create_directories(cache_dir);
    write_solution(out.cache_file, out.solution);
  }
  return out;
}

namespace {

void flush(const StudyConfig& cfg, const StudyResult& res) {
  if (cfg.output_dir.empty()) return;
  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream csv(cfg.output_dir / "convergence.csv");
  write_convergence_csv(csv, res.record, cfg.deterministic);
  write_text(cfg.output_dir / "record.json", record_to_json(res.record, cfg.deterministic));
}

}  // namespace

StudyResult run_study(const StudyConfig& cfg) {
  cfg.validate();
  const Problem problem = make_problem(cfg);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  StudyResult res;
  res.record.problem = problem.name;
  res.record.mode = to_string(cfg.mode);
  res.record.degree = cfg.degree;

  Mesh mesh = problem.mesh;
  HpHistory history;
  for (int level = 0; level < cfg.levels; ++level) {
    DofMapPtr dofs = make_dofmap(mesh);
    if (dofs->num_dofs() > cfg.max_dofs) {
      if (level == 0) throw std::invalid_argument("study: initial mesh exceeds max_dofs");
      break;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const SaddleSystem sys = assemble(dofs, problem.data);
    SolutionTriple sol = solve_level(sys, cfg.solver, "level " + std::to_string(level));
    LevelRecord rec;
    rec.level = level;
    rec.dofs = dofs->num_dofs();
    rec.elements = mesh.num_elements();
    rec.iterations = sol.iterations;
    rec.algorithm = sol.algorithm;
    rec.e_u = rec.e_p = rec.e_lambda = nan;
    if (!sol.converged) {
      rec.eta = nan;
      res.record.levels.push_back(rec);
      flush(cfg, res);
      throw std::runtime_error("level " + std::to_string(level) +
                               ": solver did not converge: " + sol.diagnostic);
    }
    const EstimatorReport rep = estimate(problem.data, sol);
    rec.eta = rep.eta();
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.record.levels.push_back(rec);
    res.meshes.push_back(mesh);
    res.solutions.push_back(std::move(sol));

    if (level + 1 == cfg.levels) break;
    switch (cfg.mode) {
      case RefinementMode::UniformH: mesh = refine_uniform(mesh); break;
      case RefinementMode::UniformP: {
        if (mesh.max_degree() >= cfg.hp.max_degree) {
          level = cfg.levels;
          break;
        }
        std::vector<int> deg(mesh.num_elements());
        for (int t = 0; t < mesh.num_elements(); ++t) deg[t] = mesh.degree(t) + 1;
        mesh = with_degrees(mesh, std::move(deg));
        break;
      }
      case RefinementMode::AdaptiveH: {
        const std::vector<int> marked = mark_dorfler(rep.local(), cfg.theta);
        mesh = refine(mesh, std::set<int>(marked.begin(), marked.end()));
        break;
      }
      case RefinementMode::AdaptiveHP: {
        const std::vector<double> local = rep.local();
        history.record(mesh, local);
        const std::vector<int> marked = mark_dorfler(local, cfg.theta);
        const auto actions = decide_hp(mesh, history, marked, &res.solutions.back().u, cfg.hp);
        mesh = apply_hp(mesh, marked, actions);
        break;
      }
    }
  }

  if (problem.exact) {
    for (std::size_t i = 0; i < res.solutions.size(); ++i) {
      const ErrorNorms e = exact_error_norms(res.solutions[i], *problem.exact, problem.data.material);
      res.record.levels[i].e_u = e.e_u;
      res.record.levels[i].e_p = e.e_p;
      res.record.levels[i].e_lambda = e.e_lambda;
    }
    res.record.reference = "exact";
  } else {
    ReferenceResult ref = overkill_reference(res.meshes.back(), problem, cfg.solver, cfg.cache_dir);
    for (std::size_t i = 0; i < res.solutions.size(); ++i) {
      const ErrorNorms e = error_norms(res.solutions[i], ref.solution);
      res.record.levels[i].e_u = e.e_u;
      res.record.levels[i].e_p = e.e_p;
      res.record.levels[i].e_lambda = e.e_lambda;
    }
    res.record.reference = "overkill, " + std::to_string(ref.solution.u.dofs->num_dofs()) +
                           " dofs" + (ref.cache_hit ? ", cached" : "");
    res.reference = std::move(ref.solution);
  }
  res.record.rate_n = compute_rates(res.record.levels);
  const Rates& r = res.record.rate_n;
  res.record.rate_h = {2 * r.eoc_u, 2 * r.eoc_p, 2 * r.eoc_lambda, 2 * r.eoc_eta};

  flush(cfg, res);
  if (!cfg.output_dir.empty() && cfg.write_vtk) {
    VtkOptions vo;
    vo.elastic_threshold = cfg.elastic_threshold;
    for (std::size_t i = 0; i < res.solutions.size(); ++i) {
      std::ofstream os(cfg.output_dir / ("fields_L" + std::to_string(i) + ".vtk"));
      write_vtk(os, res.solutions[i], vo);
    }
  }
  return res;
}

}  // namespace plastmix
