#include "plastmix/estimator.hpp"

#include "plastmix/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace plastmix {

double EstimatorReport::eta() const { return std::sqrt(std::max(0.0, total)); }

namespace {

struct LocalFields {
  Eigen::MatrixX2d u;                 // nodal values
  Eigen::MatrixX2d p;                 // (a, b) per Gauss-Lagrange node
  Eigen::MatrixX2d lambda;
};

LocalFields local_fields(const SolutionTriple& sol, int t) {
  const DofMap& dofs = *sol.u.dofs;
  LocalFields lf;
  lf.u = sol.u.local(t);
  const int m = dofs.num_q_points(t);
  lf.p.resize(m, 2);
  lf.lambda.resize(m, 2);
  const int off = dofs.q_offset(t);
  for (int k = 0; k < m; ++k) {
    for (int c = 0; c < 2; ++c) {
      lf.p(k, c) = sol.p.coef[off + 2 * k + c];
      lf.lambda(k, c) = sol.lambda.coef[off + 2 * k + c];
    }
  }
  return lf;
}

DevMatrix2 q_at(const Eigen::MatrixX2d& coef, const Eigen::VectorXd& phi) {
  return {phi.dot(coef.col(0)), phi.dot(coef.col(1))};
}

// Stress at a reference point of element t.
Mat2 stress_at(const MaterialParams& m, const Mesh& mesh, int t, const LocalFields& lf,
               const Vec2& xi) {
  const int p = mesh.degree(t);
  const ShapeSet& su = shape_set(ShapeKind::ContinuousNodal, p);
  const ShapeSet& sq = shape_set(ShapeKind::GaussLagrange, p);
  Eigen::MatrixXd g(su.size(), 2);
  su.gradients(xi, g);
  Eigen::VectorXd phi(sq.size());
  sq.values(xi, phi);
  const Mat2 jinv = mesh.element_map(t).jacobian(xi).inverse();
  const Mat2 grad = lf.u.transpose() * g * jinv;
  return stress(m, grad, q_at(lf.p, phi));
}

// Reference coordinates of a physical point x on local edge e of element t.
Vec2 on_local_edge(const Mesh& mesh, int t, int e, const Vec2& x) {
  const auto& c = mesh.element_map(t).corners();
  const Vec2& a = c[e];
  const Vec2& b = c[(e + 1) % 4];
  const double s = 2.0 * (x - a).dot(b - a) / (b - a).squaredNorm() - 1.0;
  return edge_reference_point(e, s);
}

Vec2 outward_normal(const Mesh& mesh, int t, int e) {
  const auto& c = mesh.element_map(t).corners();
  const Vec2 d = c[(e + 1) % 4] - c[e];
  return Vec2(d.y(), -d.x()).normalized();
}

struct ElementTerms {
  double residual = 0.0;
  double consistency = 0.0;
  double cutoff = 0.0;
  double bracket = 0.0;
};

ElementTerms element_terms(const ProblemData& data, const SolutionTriple& sol, int t) {
  const DofMap& dofs = *sol.u.dofs;
  const Mesh& mesh = dofs.mesh();
  const MaterialParams& mat = data.material;
  const double lam = mat.lambda_lame;
  const double mu = mat.mu_lame;
  const double sy = mat.sigma_y;
  const int p = mesh.degree(t);
  const ElementMap& map = mesh.element_map(t);
  const LocalFields lf = local_fields(sol, t);
  const ShapeSet& su = shape_set(ShapeKind::ContinuousNodal, p);
  const ShapeSet& sq = shape_set(ShapeKind::GaussLagrange, p);
  const QuadratureRule& rule = cached_gauss_rule(p + 2);

  Eigen::MatrixXd g(su.size(), 2), hs(su.size(), 3), gq(sq.size(), 2);
  Eigen::VectorXd phi(sq.size());
  ElementTerms out;
  double res = 0.0;
  for (int k = 0; k < rule.size(); ++k) {
    const Vec2& xi = rule.points[k];
    const double w = rule.weights[k] * std::abs(map.det(xi));
    const Mat2 jac = map.jacobian(xi);
    const Mat2 jinv = jac.inverse();
    su.gradients(xi, g);
    su.hessians(xi, hs);
    sq.values(xi, phi);
    sq.gradients(xi, gq);

    // physical gradient G(c, a) and Hessians H_c(a, b) of each component
    const Mat2 grad = lf.u.transpose() * g * jinv;
    std::array<Mat2, 2> hess;
    for (int c = 0; c < 2; ++c) {
      Mat2 hr;
      hr(0, 0) = hs.col(0).dot(lf.u.col(c));
      hr(0, 1) = hr(1, 0) = hs.col(1).dot(lf.u.col(c));
      hr(1, 1) = hs.col(2).dot(lf.u.col(c));
      // the bilinear map has d2x/dxi deta = cross()
      const double corr = grad.row(c).dot(map.cross());
      hr(0, 1) -= corr;
      hr(1, 0) -= corr;
      hess[c] = jinv.transpose() * hr * jinv;
    }
    // derivatives of the plastic strain coordinates
    const Eigen::Matrix2d dq = (gq * jinv).transpose() * lf.p;  // rows x/y, cols a/b
    const double div_u_x = hess[0](0, 0) + hess[1](0, 1);
    const double div_u_y = hess[0](0, 1) + hess[1](1, 1);
    Vec2 div_sigma;
    div_sigma.x() = (lam + mu) * div_u_x + mu * (hess[0](0, 0) + hess[0](1, 1)) -
                    2.0 * mu * (dq(0, 0) + dq(1, 1));
    div_sigma.y() = (lam + mu) * div_u_y + mu * (hess[1](0, 0) + hess[1](1, 1)) -
                    2.0 * mu * (dq(0, 1) - dq(1, 0));
    Vec2 r = div_sigma;
    if (data.f) r += data.f(map.map(xi));
    res += w * r.squaredNorm();

    const DevMatrix2 pv = q_at(lf.p, phi);
    const DevMatrix2 lv = q_at(lf.lambda, phi);
    const DevMatrix2 cons = 2.0 * mu * dev_part(grad) - mat.d() * pv - lv;
    out.consistency += w * frobenius_inner(cons, cons);

    const DevMatrix2 mh = lv + 0.5 * pv;
    const double nm = frobenius(mh);
    const DevMatrix2 ms = nm > sy ? (sy / nm) * mh : mh;
    const DevMatrix2 dl = lv - ms;
    out.cutoff += w * frobenius_inner(dl, dl);
    out.bracket += w * (sy * frobenius(pv) - frobenius_inner(ms, pv));
  }
  const double h = mesh.h(t);
  out.residual = h * h / (p * p) * res;
  return out;
}

struct EdgeTerms {
  double jump = 0.0;
  double neumann = 0.0;
  int side0 = -1;
  int side1 = -1;
};

EdgeTerms edge_terms(const ProblemData& data, const SolutionTriple& sol,
                     const std::vector<LocalFields>& fields, int ei) {
  const Mesh& mesh = sol.u.dofs->mesh();
  const MeshEdge& e = mesh.edges()[ei];
  EdgeTerms out;
  if (e.hanging_master() || e.tag == BoundaryTag::Dirichlet) return out;

  // the two sides: (element, local edge)
  int t0 = e.elements[0], l0 = e.local_edges[0];
  int t1 = -1, l1 = -1;
  if (e.elements[1] >= 0) {
    t1 = e.elements[1];
    l1 = e.local_edges[1];
  } else if (e.hanging_slave()) {
    const MeshEdge& m = mesh.edges()[e.parent];
    t1 = m.elements[0];
    l1 = m.local_edges[0];
  } else if (e.tag != BoundaryTag::Neumann) {
    return out;
  }

  out.side0 = t0;
  out.side1 = t1;
  const Vec2& x0 = mesh.vertex(e.v0);
  const Vec2& x1 = mesh.vertex(e.v1);
  const double len = (x1 - x0).norm();
  const int pe = std::max(mesh.degree(t0), t1 >= 0 ? mesh.degree(t1) : 0);
  const QuadratureRule& rule = cached_gauss_rule(pe + 2);
  const Vec2 n0 = outward_normal(mesh, t0, l0);
  const MaterialParams& mat = data.material;
  double acc = 0.0;
  for (int k = 0; k < rule.line.size(); ++k) {
    const double s = rule.line.nodes[k];
    const double w = rule.line.weights[k] * 0.5 * len;
    const Vec2 x = 0.5 * (1.0 - s) * x0 + 0.5 * (1.0 + s) * x1;
    const Mat2 s0 = stress_at(mat, mesh, t0, fields[t0], on_local_edge(mesh, t0, l0, x));
    Vec2 r;
    if (t1 >= 0) {
      const Mat2 s1 = stress_at(mat, mesh, t1, fields[t1], on_local_edge(mesh, t1, l1, x));
      r = (s0 - s1) * n0;
    } else {
      r = s0 * n0;
      if (data.g) r -= data.g(x, n0);
    }
    acc += w * r.squaredNorm();
  }
  const double scaled = len / pe * acc;
  if (t1 >= 0) {
    out.jump = scaled;
  } else {
    out.neumann = scaled;
  }
  return out;
}

}  // namespace

EstimatorReport estimate(const ProblemData& data, const SolutionTriple& sol) {
  if (!sol.u.dofs) throw std::invalid_argument("estimate: empty solution");
  const Mesh& mesh = sol.u.dofs->mesh();
  const int ne = mesh.num_elements();
  const int nedge = static_cast<int>(mesh.edges().size());

  std::vector<LocalFields> fields(ne);
  std::vector<ElementTerms> terms(ne);
  parallel_for(ne, [&](int t) {
    fields[t] = local_fields(sol, t);
    terms[t] = element_terms(data, sol, t);
  });
  std::vector<EdgeTerms> eterms(nedge);
  parallel_for(nedge, [&](int i) { eterms[i] = edge_terms(data, sol, fields, i); });

  EstimatorReport r;
  r.element.resize(ne);
  r.consistency_element.resize(ne);
  r.cutoff_element.resize(ne);
  r.bracket_element.resize(ne);
  r.interior_edge.resize(nedge);
  r.neumann_edge.resize(nedge);
  r.jump_element.assign(ne, 0.0);
  r.neumann_element.assign(ne, 0.0);
  double sum = 0.0;
  for (int t = 0; t < ne; ++t) {
    r.element[t] = terms[t].residual;
    r.consistency_element[t] = terms[t].consistency;
    r.cutoff_element[t] = terms[t].cutoff;
    r.bracket_element[t] = terms[t].bracket;
    r.consistency += terms[t].consistency;
    r.cutoff += terms[t].cutoff;
    r.bracket += terms[t].bracket;
    sum += terms[t].residual;
  }
  for (int i = 0; i < nedge; ++i) {
    r.interior_edge[i] = eterms[i].jump;
    r.neumann_edge[i] = eterms[i].neumann;
    sum += eterms[i].jump + eterms[i].neumann;
    if (eterms[i].side1 >= 0) {
      r.jump_element[eterms[i].side0] += 0.5 * eterms[i].jump;
      r.jump_element[eterms[i].side1] += 0.5 * eterms[i].jump;
    } else if (eterms[i].side0 >= 0) {
      r.neumann_element[eterms[i].side0] += eterms[i].neumann;
    }
  }
  r.total = sum + r.consistency + r.cutoff + r.bracket;
  return r;
}

std::vector<double> EstimatorReport::local() const {
  std::vector<double> out = element;
  for (std::size_t t = 0; t < out.size(); ++t) out[t] += jump_element[t] + neumann_element[t];
  return out;
}

FieldQ cutoff_mu_star(const SolutionTriple& sol, double sigma_y) {
  FieldQ out(sol.lambda.dofs, sol.lambda.coef + 0.5 * sol.p.coef);
  for (Eigen::Index i = 0; i < out.coef.size(); i += 2) {
    const double nf = std::sqrt(2.0 * (out.coef[i] * out.coef[i] + out.coef[i + 1] * out.coef[i + 1]));
    if (nf > sigma_y) {
      out.coef[i] *= sigma_y / nf;
      out.coef[i + 1] *= sigma_y / nf;
    }
  }
  return out;
}

double dorfler_threshold(double total, double theta) {
  return theta * theta * total * (1.0 - 1e-12);
}

std::vector<int> mark_dorfler(const std::vector<double>& local, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("mark_dorfler: theta must be in (0, 1]");
  std::vector<int> order(local.size());
  std::iota(order.begin(), order.end(), 0);
  if (theta == 1.0) {
    std::vector<int> all;
    for (int i : order) {
      if (local[i] != 0.0) all.push_back(i);
    }
    return all;
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return local[a] > local[b]; });
  const double total = std::accumulate(local.begin(), local.end(), 0.0);
  const double goal = dorfler_threshold(total, theta);
  std::vector<int> out;
  double acc = 0.0;
  for (int i : order) {
    if (acc >= goal && !out.empty()) break;
    if (local[i] <= 0.0 && total > 0.0) break;
    acc += local[i];
    out.push_back(i);
  }
  if (total <= 0.0) out.clear();
  std::sort(out.begin(), out.end());
  return out;
}

void HpHistory::record(const Mesh& mesh, const std::vector<double>& local) {
  for (int t = 0; t < mesh.num_elements(); ++t) data_[mesh.lineage(t)].emplace_back(mesh.degree(t), local[t]);
}

const std::vector<std::pair<int, double>>* HpHistory::samples(const Lineage& l) const {
  const auto it = data_.find(l);
  return it == data_.end() ? nullptr : &it->second;
}

double legendre_decay(const FieldU& u, int t) {
  const Mesh& mesh = u.dofs->mesh();
  const int p = mesh.degree(t);
  if (p < 2) return -1.0;
  const QuadratureRule& rule = cached_gauss_rule(p + 1);
  const Tabulation& tu = tabulation(ShapeKind::ContinuousNodal, p, p + 1);
  const Eigen::MatrixX2d loc = u.local(t);
  const Eigen::MatrixX2d vals = tu.value * loc;
  // Legendre values at the line nodes
  const int n = rule.line.size();
  Eigen::MatrixXd leg(p + 1, n);
  for (int j = 0; j < n; ++j) {
    const double x = rule.line.nodes[j];
    leg(0, j) = 1.0;
    if (p >= 1) leg(1, j) = x;
    for (int i = 2; i <= p; ++i) leg(i, j) = ((2 * i - 1) * x * leg(i - 1, j) - (i - 1) * leg(i - 2, j)) / i;
  }
  std::vector<double> level(p + 1, 0.0);
  for (int i = 0; i <= p; ++i) {
    for (int j = 0; j <= p; ++j) {
      for (int c = 0; c < 2; ++c) {
        double s = 0.0;
        for (int k = 0; k < rule.size(); ++k) {
          s += rule.weights[k] * vals(k, c) * leg(i, k % n) * leg(j, k / n);
        }
        s *= 0.25 * (2 * i + 1) * (2 * j + 1);
        level[std::max(i, j)] = std::max(level[std::max(i, j)], std::abs(s));
      }
    }
  }
  const double scale = *std::max_element(level.begin() + 1, level.end());
  if (scale == 0.0) return std::numeric_limits<double>::infinity();
  // least-squares slope of log a_k over k = 1..p
  double sk = 0, sl = 0, skk = 0, skl = 0;
  for (int k = 1; k <= p; ++k) {
    const double l = std::log(std::max(level[k], 1e-14 * scale));
    sk += k;
    sl += l;
    skk += k * k;
    skl += k * l;
  }
  const double m = p;
  return -(m * skl - sk * sl) / (m * skk - sk * sk);
}

std::vector<HpAction> decide_hp(const Mesh& mesh, const HpHistory& history,
                                const std::vector<int>& marked, const FieldU* u,
                                const HpOptions& opt) {
  std::vector<HpAction> out;
  out.reserve(marked.size());
  for (int t : marked) {
    HpAction a = HpAction::HRefine;
    const int deg = mesh.degree(t);
    bool decided = false;
    if (const auto* s = history.samples(mesh.lineage(t)); s && !s->empty()) {
      // latest sample at the current degree against the last one below it
      const auto cur = std::find_if(s->rbegin(), s->rend(), [&](const auto& x) { return x.first == deg; });
      if (cur != s->rend()) {
        const auto prev = std::find_if(cur, s->rend(), [&](const auto& x) { return x.first < deg; });
        if (prev != s->rend()) {
          decided = true;
          if (cur->second <= opt.delta * prev->second) a = HpAction::PEnrich;
        }
      }
    }
    if (!decided && opt.legendre_fallback && u) {
      if (legendre_decay(*u, t) >= opt.smoothness) a = HpAction::PEnrich;
    }
    if (a == HpAction::PEnrich && deg >= opt.max_degree) a = HpAction::HRefine;
    out.push_back(a);
  }
  return out;
}

Mesh apply_hp(const Mesh& mesh, const std::vector<int>& marked, const std::vector<HpAction>& actions) {
  if (marked.size() != actions.size()) throw std::invalid_argument("apply_hp: size mismatch");
  std::vector<int> deg(mesh.num_elements());
  for (int t = 0; t < mesh.num_elements(); ++t) deg[t] = mesh.degree(t);
  std::set<int> hset;
  bool enrich = false;
  for (std::size_t i = 0; i < marked.size(); ++i) {
    if (actions[i] == HpAction::PEnrich) {
      ++deg[marked[i]];
      enrich = true;
    } else {
      hset.insert(marked[i]);
    }
  }
  const Mesh m = enrich ? with_degrees(mesh, deg) : mesh;
  return hset.empty() ? m : refine(m, hset);
}

void write_report_csv(std::ostream& os, const Mesh& mesh, const EstimatorReport& r) {
  os << "element,eta_T,jump_half,neumann,consistency,cutoff,bracket,local\n";
  const std::vector<double> loc = r.local();
  const auto old = os.precision(17);
  for (int t = 0; t < mesh.num_elements(); ++t) {
    os << t << ',' << r.element[t] << ',' << r.jump_element[t] << ',' << r.neumann_element[t] << ','
       << r.consistency_element[t] << ','
       << r.cutoff_element[t] << ',' << r.bracket_element[t] << ',' << loc[t] << '\n';
  }
  os.precision(old);
}

}  // namespace plastmix
