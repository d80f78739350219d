#include "plastmix/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace plastmix {

namespace {

using Combination = std::vector<std::pair<int, double>>;

void accumulate(std::map<int, double>& acc, const Combination& c, double s) {
  for (const auto& [i, v] : c) acc[i] += s * v;
}

Combination to_combination(const std::map<int, double>& acc) {
  Combination out;
  for (const auto& [i, v] : acc) {
    if (std::abs(v) > 1e-14) out.emplace_back(i, v);
  }
  return out;
}

}  // namespace

DofMap::DofMap(Mesh mesh) : mesh_(std::move(mesh)) {
  const int nv = mesh_.num_vertices();
  const int ne = mesh_.num_elements();
  const auto& edges = mesh_.edges();
  const int ned = static_cast<int>(edges.size());

  struct Raw {
    Vec2 point;
    bool dirichlet;
  };
  std::vector<Raw> raw;

  std::vector<char> used(nv, 0), dirichlet_vertex(nv, 0);
  for (int t = 0; t < ne; ++t)
    for (int v : mesh_.element(t)) used[v] = 1;
  for (const MeshEdge& e : edges) {
    if (e.tag == BoundaryTag::Dirichlet) dirichlet_vertex[e.v0] = dirichlet_vertex[e.v1] = 1;
  }
  std::vector<int> master_of(nv, -1);
  for (const HangingVertex& h : mesh_.hanging_vertices()) master_of[h.vertex] = h.master_edge;

  std::vector<int> vertex_raw(nv, -1);
  for (int v = 0; v < nv; ++v) {
    if (!used[v] || master_of[v] >= 0) continue;
    vertex_raw[v] = static_cast<int>(raw.size());
    raw.push_back({mesh_.vertex(v), dirichlet_vertex[v] != 0});
  }

  std::vector<int> edge_degree(ned, 0), edge_raw(ned, -1);
  for (int i = 0; i < ned; ++i) {
    const MeshEdge& e = edges[i];
    if (e.hanging_slave()) continue;
    int pe = mesh_.degree(e.elements[0]);
    if (e.elements[1] >= 0) pe = std::min(pe, mesh_.degree(e.elements[1]));
    if (e.hanging_master()) {
      for (int c : e.children) pe = std::min(pe, mesh_.degree(edges[c].elements[0]));
    }
    edge_degree[i] = pe;
    edge_raw[i] = static_cast<int>(raw.size());
    const LineRule gll = gauss_lobatto_line(pe + 1);
    const Vec2& x0 = mesh_.vertex(e.v0);
    const Vec2& x1 = mesh_.vertex(e.v1);
    for (int n = 1; n < pe; ++n) {
      const double tau = gll.nodes[n];
      raw.push_back({0.5 * (1.0 - tau) * x0 + 0.5 * (1.0 + tau) * x1,
                     e.tag == BoundaryTag::Dirichlet});
    }
  }

  std::vector<int> interior_raw(ne, -1);
  for (int t = 0; t < ne; ++t) {
    const int p = mesh_.degree(t);
    const auto& nodes = shape_set(ShapeKind::ContinuousNodal, p).line().nodes();
    interior_raw[t] = static_cast<int>(raw.size());
    for (int j = 1; j < p; ++j)
      for (int i = 1; i < p; ++i)
        raw.push_back({mesh_.element_map(t).map(Vec2(nodes[i], nodes[j])), false});
  }

  // vertex values as combinations of raw dofs; hanging vertices follow the
  // master edge trace, recursively
  std::vector<Combination> vertex_expr(nv);
  std::vector<char> vertex_done(nv, 0);
  std::function<const Combination&(int)> expand_vertex;
  std::function<Combination(int, double)> master_trace;
  master_trace = [&](int m, double tau) {
    const MeshEdge& e = edges[m];
    const int pe = edge_degree[m];
    const LagrangeLine line(gauss_lobatto_line(pe + 1).nodes);
    std::map<int, double> acc;
    for (int n = 0; n <= pe; ++n) {
      const double c = line.value(n, tau);
      if (std::abs(c) <= 1e-14) continue;
      if (n == 0) {
        accumulate(acc, expand_vertex(e.v0), c);
      } else if (n == pe) {
        accumulate(acc, expand_vertex(e.v1), c);
      } else {
        acc[edge_raw[m] + n - 1] += c;
      }
    }
    return to_combination(acc);
  };
  expand_vertex = [&](int v) -> const Combination& {
    if (!vertex_done[v]) {
      if (master_of[v] < 0) {
        vertex_expr[v] = {{vertex_raw[v], 1.0}};
      } else {
        vertex_expr[v] = master_trace(master_of[v], 0.0);
      }
      vertex_done[v] = 1;
    }
    return vertex_expr[v];
  };

  std::vector<int> free_index(raw.size(), -1);
  for (std::size_t r = 0; r < raw.size(); ++r) {
    if (raw[r].dirichlet) {
      ++num_dirichlet_;
      continue;
    }
    free_index[r] = num_scalar_++;
    dof_points_.push_back(raw[r].point);
  }
  num_constrained_ = static_cast<int>(mesh_.hanging_vertices().size());

  node_offset_.assign(ne + 1, 0);
  entry_offset_.clear();
  entry_offset_.push_back(0);
  auto emit = [&](const Combination& c) {
    for (const auto& [r, v] : c) {
      if (free_index[r] >= 0) entries_.push_back({free_index[r], v});
    }
    entry_offset_.push_back(static_cast<int>(entries_.size()));
  };
  for (int t = 0; t < ne; ++t) {
    const int p = mesh_.degree(t);
    const int m = p + 1;
    const auto& nodes = shape_set(ShapeKind::ContinuousNodal, p).line().nodes();
    const auto& ev = mesh_.element(t);
    node_offset_[t + 1] = node_offset_[t] + m * m;
    for (int j = 0; j <= p; ++j) {
      for (int i = 0; i <= p; ++i) {
        const bool bi = i == 0 || i == p;
        const bool bj = j == 0 || j == p;
        if (bi && bj) {
          const int corner = j == 0 ? (i == 0 ? 0 : 1) : (i == p ? 2 : 3);
          emit(expand_vertex(ev[corner]));
          continue;
        }
        if (!bi && !bj) {
          emit({{interior_raw[t] + (i - 1) + (p - 1) * (j - 1), 1.0}});
          continue;
        }
        int e = 0;
        int pos = 0;
        if (j == 0) {
          e = 0;
          pos = i;
        } else if (i == p) {
          e = 1;
          pos = j;
        } else if (j == p) {
          e = 2;
          pos = p - i;
        } else {
          e = 3;
          pos = p - j;
        }
        const double tpar = nodes[pos];
        const int ge = mesh_.element_edge(t, e);
        const int me = edges[ge].hanging_slave() ? edges[ge].parent : ge;
        const MeshEdge& master = edges[me];
        auto tau_of = [&](int v) {
          if (v == master.v0) return -1.0;
          if (v == master.v1) return 1.0;
          if (v == master.midpoint) return 0.0;
          throw std::logic_error("DofMap: vertex not on master edge");
        };
        const double ta = tau_of(ev[e]);
        const double tb = tau_of(ev[(e + 1) % 4]);
        const double tau = 0.5 * (ta + tb) + 0.5 * (tb - ta) * tpar;
        emit(master_trace(me, tau));
      }
    }
  }

  q_offset_.assign(ne + 1, 0);
  for (int t = 0; t < ne; ++t) {
    const int p = mesh_.degree(t);
    q_offset_[t + 1] = q_offset_[t] + 2 * p * p;
  }
  num_q_ = q_offset_[ne];
  q_weights_.resize(num_q_ / 2);
  for (int t = 0; t < ne; ++t) {
    const int p = mesh_.degree(t);
    const QuadratureRule& rule = cached_gauss_rule(p);
    for (int k = 0; k < rule.size(); ++k) {
      q_weights_[q_offset_[t] / 2 + k] =
          rule.weights[k] * std::abs(mesh_.element_map(t).det(rule.points[k]));
    }
  }
}

int DofMap::num_local_nodes(int t) const { return node_offset_[t + 1] - node_offset_[t]; }

std::span<const DofEntry> DofMap::node(int t, int k) const {
  const int n = node_offset_[t] + k;
  return {entries_.data() + entry_offset_[n],
          static_cast<std::size_t>(entry_offset_[n + 1] - entry_offset_[n])};
}

int DofMap::num_q_points(int t) const { return (q_offset_[t + 1] - q_offset_[t]) / 2; }

Vec2 DofMap::q_point(int t, int k) const { return cached_gauss_rule(mesh_.degree(t)).points[k]; }

DofMapPtr make_dofmap(Mesh mesh) { return std::make_shared<const DofMap>(std::move(mesh)); }

// ---------------------------------------------------------------------------

FieldU::FieldU(DofMapPtr d) : dofs(std::move(d)), coef(Eigen::VectorXd::Zero(dofs->num_u())) {}

FieldU::FieldU(DofMapPtr d, Eigen::VectorXd c) : dofs(std::move(d)), coef(std::move(c)) {
  if (coef.size() != dofs->num_u()) throw std::invalid_argument("FieldU: size mismatch");
}

Eigen::MatrixX2d FieldU::local(int t) const {
  const int n = dofs->num_local_nodes(t);
  Eigen::MatrixX2d out = Eigen::MatrixX2d::Zero(n, 2);
  for (int k = 0; k < n; ++k) {
    for (const DofEntry& e : dofs->node(t, k)) {
      out(k, 0) += e.coef * coef[2 * e.dof];
      out(k, 1) += e.coef * coef[2 * e.dof + 1];
    }
  }
  return out;
}

Vec2 FieldU::value(int t, const Vec2& xi) const {
  const ShapeSet& s = shape_set(ShapeKind::ContinuousNodal, dofs->mesh().degree(t));
  Eigen::VectorXd v(s.size());
  s.values(xi, v);
  return local(t).transpose() * v;
}

Mat2 FieldU::gradient(int t, const Vec2& xi) const {
  const ShapeSet& s = shape_set(ShapeKind::ContinuousNodal, dofs->mesh().degree(t));
  Eigen::MatrixXd g(s.size(), 2);
  s.gradients(xi, g);
  const Mat2 ref = local(t).transpose() * g;
  return ref * dofs->mesh().element_map(t).jacobian(xi).inverse();
}

FieldQ::FieldQ(DofMapPtr d) : dofs(std::move(d)), coef(Eigen::VectorXd::Zero(dofs->num_q())) {}

FieldQ::FieldQ(DofMapPtr d, Eigen::VectorXd c) : dofs(std::move(d)), coef(std::move(c)) {
  if (coef.size() != dofs->num_q()) throw std::invalid_argument("FieldQ: size mismatch");
}

DevMatrix2 FieldQ::at(int t, int k) const {
  const int i = dofs->q_offset(t) + 2 * k;
  return {coef[i], coef[i + 1]};
}

void FieldQ::set(int t, int k, const DevMatrix2& q) {
  const int i = dofs->q_offset(t) + 2 * k;
  coef[i] = q.a;
  coef[i + 1] = q.b;
}

DevMatrix2 FieldQ::value(int t, const Vec2& xi) const {
  const ShapeSet& s = shape_set(ShapeKind::GaussLagrange, dofs->mesh().degree(t));
  Eigen::VectorXd v(s.size());
  s.values(xi, v);
  DevMatrix2 out;
  for (int k = 0; k < s.size(); ++k) out += v[k] * at(t, k);
  return out;
}

// ---------------------------------------------------------------------------

FieldQ l2_project(const MatrixFunction& q, const DofMapPtr& dofs) {
  FieldQ out(dofs);
  const Mesh& mesh = dofs->mesh();
  for (int t = 0; t < mesh.num_elements(); ++t) {
    const int p = mesh.degree(t);
    const int n = p + 2;
    const QuadratureRule& rule = cached_gauss_rule(n);
    const Tabulation& tab = tabulation(ShapeKind::GaussLagrange, p, n);
    const int nb = static_cast<int>(tab.value.cols());
    Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(nb, nb);
    Eigen::MatrixX2d rhs = Eigen::MatrixX2d::Zero(nb, 2);
    const ElementMap& map = mesh.element_map(t);
    for (int k = 0; k < rule.size(); ++k) {
      const double w = rule.weights[k] * std::abs(map.det(rule.points[k]));
      const auto phi = tab.value.row(k).transpose();
      mass.noalias() += w * phi * phi.transpose();
      const DevMatrix2 d = dev_part(q(map.map(rule.points[k])));
      rhs.col(0) += w * d.a * phi;
      rhs.col(1) += w * d.b * phi;
    }
    const Eigen::MatrixX2d c = mass.ldlt().solve(rhs);
    for (int k = 0; k < nb; ++k) out.set(t, k, {c(k, 0), c(k, 1)});
  }
  return out;
}

FieldQ gauss_interpolate(const MatrixFunction& q, const DofMapPtr& dofs) {
  FieldQ out(dofs);
  const Mesh& mesh = dofs->mesh();
  for (int t = 0; t < mesh.num_elements(); ++t) {
    const ElementMap& map = mesh.element_map(t);
    for (int k = 0; k < dofs->num_q_points(t); ++k) {
      out.set(t, k, dev_part(q(map.map(dofs->q_point(t, k)))));
    }
  }
  return out;
}

FieldU interpolate(const VectorFunction& u, const DofMapPtr& dofs) {
  FieldU out(dofs);
  for (int s = 0; s < dofs->num_scalar_dofs(); ++s) {
    const Vec2 v = u(dofs->dof_point(s));
    out.coef[2 * s] = v.x();
    out.coef[2 * s + 1] = v.y();
  }
  return out;
}

Feasibility lambda_feasible(const FieldQ& lambda, double sigma_y) {
  Feasibility f;
  const Mesh& mesh = lambda.dofs->mesh();
  for (int t = 0; t < mesh.num_elements(); ++t) {
    for (int k = 0; k < lambda.dofs->num_q_points(t); ++k) {
      const double v = frobenius(lambda.at(t, k)) - sigma_y;
      if (v > f.violation) {
        f.violation = v;
        f.element = t;
        f.point = k;
      }
    }
  }
  f.feasible = f.violation <= 1e-10;
  return f;
}

DevMatrix2 project_point(const DevMatrix2& q, double sigma_y) {
  const double n = frobenius(q);
  // rounding slack keeps the projection exactly idempotent
  if (n <= sigma_y * (1.0 + 1e-14)) return q;
  return (sigma_y / n) * q;
}

FieldQ project_onto_lambda(const FieldQ& mu, double sigma_y) {
  FieldQ out(mu.dofs, mu.coef);
  const Eigen::Index np = mu.coef.size() / 2;
  for (Eigen::Index i = 0; i < np; ++i) {
    const DevMatrix2 q = project_point({mu.coef[2 * i], mu.coef[2 * i + 1]}, sigma_y);
    out.coef[2 * i] = q.a;
    out.coef[2 * i + 1] = q.b;
  }
  return out;
}

double q_inner(const DofMap& dofs, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd& w = dofs.q_weights();
  double s = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    s += w[i] * 2.0 * (a[2 * i] * b[2 * i] + a[2 * i + 1] * b[2 * i + 1]);
  }
  return s;
}

double q_inner(const FieldQ& a, const FieldQ& b) { return q_inner(*a.dofs, a.coef, b.coef); }

double q_norm(const FieldQ& a) { return std::sqrt(std::max(0.0, q_inner(a, a))); }

double psi_hp(const FieldQ& q, double sigma_y) {
  const Eigen::VectorXd& w = q.dofs->q_weights();
  double s = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    s += w[i] * sigma_y * frobenius({q.coef[2 * i], q.coef[2 * i + 1]});
  }
  return s;
}

double psi_exact(const FieldQ& q, double sigma_y, int oversample) {
  const Mesh& mesh = q.dofs->mesh();
  double s = 0.0;
  for (int t = 0; t < mesh.num_elements(); ++t) {
    const int p = mesh.degree(t);
    if (oversample < p + 2) throw std::invalid_argument("psi_exact: oversample must be >= p+2");
    const QuadratureRule& rule = cached_gauss_rule(oversample);
    const Tabulation& tab = tabulation(ShapeKind::GaussLagrange, p, oversample);
    const ElementMap& map = mesh.element_map(t);
    for (int k = 0; k < rule.size(); ++k) {
      DevMatrix2 v;
      for (int l = 0; l < tab.value.cols(); ++l) v += tab.value(k, l) * q.at(t, l);
      s += rule.weights[k] * std::abs(map.det(rule.points[k])) * sigma_y * frobenius(v);
    }
  }
  return s;
}

double UNorms::h1() const { return std::sqrt(std::max(0.0, l2_sq + strain_sq)); }

UNorms u_norms(const FieldU& u) {
  UNorms n;
  const Mesh& mesh = u.dofs->mesh();
  for (int t = 0; t < mesh.num_elements(); ++t) {
    const int p = mesh.degree(t);
    const QuadratureRule& rule = cached_gauss_rule(p + 2);
    const Tabulation& tab = tabulation(ShapeKind::ContinuousNodal, p, p + 2);
    const ElementMap& map = mesh.element_map(t);
    const Eigen::MatrixX2d loc = u.local(t);
    for (int k = 0; k < rule.size(); ++k) {
      const Mat2 jinv = map.jacobian(rule.points[k]).inverse();
      const double w = rule.weights[k] * std::abs(map.det(rule.points[k]));
      const Vec2 v = loc.transpose() * tab.value.row(k).transpose();
      Mat2 gref;
      gref.col(0) = loc.transpose() * tab.d_xi.row(k).transpose();
      gref.col(1) = loc.transpose() * tab.d_eta.row(k).transpose();
      const Mat2 g = gref * jinv;
      const Mat2 eps = 0.5 * (g + g.transpose());
      n.l2_sq += w * v.squaredNorm();
      n.strain_sq += w * eps.squaredNorm();
    }
  }
  return n;
}

}  // namespace plastmix
