#include "plastmix/assembly.hpp"

#include "plastmix/parallel.hpp"

#include <cmath>
#include <stdexcept>

namespace plastmix {

void MaterialParams::validate() const {
  if (!(mu_lame > 0.0)) throw std::invalid_argument("MaterialParams: mu must be > 0");
  if (!(lambda_lame >= 0.0)) throw std::invalid_argument("MaterialParams: lambda must be >= 0");
  if (!(h0 > 0.0)) throw std::invalid_argument("MaterialParams: h0 must be > 0");
  if (!(sigma_y > 0.0)) throw std::invalid_argument("MaterialParams: sigma_y must be > 0");
}

Mat2 stress(const MaterialParams& m, const Mat2& grad_u, const DevMatrix2& p) {
  const Mat2 eps = 0.5 * (grad_u + grad_u.transpose());
  return m.lambda_lame * eps.trace() * Mat2::Identity() + 2.0 * m.mu_lame * (eps - p.matrix());
}

namespace {

using Triplet = Eigen::Triplet<double>;

struct ElementBlocks {
  std::vector<Triplet> k;
  std::vector<Triplet> b;
  std::vector<std::pair<int, double>> f;
};

const Vec2 kEdgeDirection[4] = {Vec2(1, 0), Vec2(0, 1), Vec2(-1, 0), Vec2(0, -1)};

ElementBlocks element_blocks(const DofMap& dofs, const ProblemData& data, int t) {
  const Mesh& mesh = dofs.mesh();
  const MaterialParams& mat = data.material;
  const int p = mesh.degree(t);
  const int n = (p + 1) * (p + 1);
  const int nq = p * p;
  const ElementMap& map = mesh.element_map(t);

  Eigen::MatrixXd kloc = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  Eigen::MatrixXd bloc = Eigen::MatrixXd::Zero(2 * nq, 2 * n);
  Eigen::VectorXd floc = Eigen::VectorXd::Zero(2 * n);

  Eigen::Matrix3d cmat;
  cmat << mat.lambda_lame + 2 * mat.mu_lame, mat.lambda_lame, 0, mat.lambda_lame,
      mat.lambda_lame + 2 * mat.mu_lame, 0, 0, 0, mat.mu_lame;

  {
    const int nr = p + 1;
    const QuadratureRule& rule = cached_gauss_rule(nr);
    const Tabulation& tu = tabulation(ShapeKind::ContinuousNodal, p, nr);
    const Tabulation& tq = tabulation(ShapeKind::GaussLagrange, p, nr);
    Eigen::MatrixXd bv(3, 2 * n);
    for (int k = 0; k < rule.size(); ++k) {
      const Vec2& xi = rule.points[k];
      const Mat2 jinv = map.jacobian(xi).inverse();
      const double w = rule.weights[k] * std::abs(map.det(xi));
      bv.setZero();
      for (int a = 0; a < n; ++a) {
        const double gx = tu.d_xi(k, a) * jinv(0, 0) + tu.d_eta(k, a) * jinv(1, 0);
        const double gy = tu.d_xi(k, a) * jinv(0, 1) + tu.d_eta(k, a) * jinv(1, 1);
        bv(0, 2 * a) = gx;
        bv(2, 2 * a) = gy;
        bv(1, 2 * a + 1) = gy;
        bv(2, 2 * a + 1) = gx;
      }
      kloc.noalias() += w * bv.transpose() * cmat * bv;
      const Eigen::RowVectorXd e1 = bv.row(0) - bv.row(1);
      for (int l = 0; l < nq; ++l) {
        const double s = -2.0 * mat.mu_lame * w * tq.value(k, l);
        bloc.row(2 * l) += s * e1;
        bloc.row(2 * l + 1) += s * bv.row(2);
      }
    }
  }

  if (data.f) {
    const int nr = p + 2;
    const QuadratureRule& rule = cached_gauss_rule(nr);
    const Tabulation& tu = tabulation(ShapeKind::ContinuousNodal, p, nr);
    for (int k = 0; k < rule.size(); ++k) {
      const Vec2& xi = rule.points[k];
      const double w = rule.weights[k] * std::abs(map.det(xi));
      const Vec2 f = data.f(map.map(xi));
      for (int a = 0; a < n; ++a) {
        floc[2 * a] += w * f.x() * tu.value(k, a);
        floc[2 * a + 1] += w * f.y() * tu.value(k, a);
      }
    }
  }

  if (data.g) {
    const ShapeSet& shapes = shape_set(ShapeKind::ContinuousNodal, p);
    const LineRule line = gauss_legendre_line(p + 4);
    Eigen::VectorXd phi(n);
    for (int e = 0; e < 4; ++e) {
      const MeshEdge& edge = mesh.edges()[mesh.element_edge(t, e)];
      if (edge.tag != BoundaryTag::Neumann) continue;
      for (int k = 0; k < line.size(); ++k) {
        const Vec2 xi = edge_reference_point(e, line.nodes[k]);
        const Vec2 tangent = map.jacobian(xi) * kEdgeDirection[e];
        const double ds = tangent.norm();
        const Vec2 normal(tangent.y() / ds, -tangent.x() / ds);
        const Vec2 g = data.g(map.map(xi), normal);
        shapes.values(xi, phi);
        for (int a = 0; a < n; ++a) {
          floc[2 * a] += line.weights[k] * ds * g.x() * phi[a];
          floc[2 * a + 1] += line.weights[k] * ds * g.y() * phi[a];
        }
      }
    }
  }

  ElementBlocks out;
  const int qoff = dofs.q_offset(t);
  for (int a = 0; a < n; ++a) {
    for (const DofEntry& ea : dofs.node(t, a)) {
      for (int c = 0; c < 2; ++c) {
        const int row = 2 * ea.dof + c;
        if (floc[2 * a + c] != 0.0) out.f.emplace_back(row, ea.coef * floc[2 * a + c]);
        for (int l = 0; l < 2 * nq; ++l) {
          const double v = bloc(l, 2 * a + c);
          if (v != 0.0) out.b.emplace_back(qoff + l, row, ea.coef * v);
        }
        for (int b = 0; b < n; ++b) {
          for (const DofEntry& eb : dofs.node(t, b)) {
            for (int d = 0; d < 2; ++d) {
              const double v = kloc(2 * a + c, 2 * b + d);
              if (v != 0.0) out.k.emplace_back(row, 2 * eb.dof + d, ea.coef * eb.coef * v);
            }
          }
        }
      }
    }
  }
  return out;
}

// Exact Gram matrix of the Gauss-Lagrange basis; it must come out diagonal.
void check_mass_diagonal(const DofMap& dofs, int t) {
  const Mesh& mesh = dofs.mesh();
  const int p = mesh.degree(t);
  const int nr = p + 1;
  const QuadratureRule& rule = cached_gauss_rule(nr);
  const Tabulation& tq = tabulation(ShapeKind::GaussLagrange, p, nr);
  const ElementMap& map = mesh.element_map(t);
  const int nq = p * p;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nq, nq);
  for (int k = 0; k < rule.size(); ++k) {
    const double w = rule.weights[k] * std::abs(map.det(rule.points[k]));
    const auto phi = tq.value.row(k).transpose();
    m.noalias() += w * phi * phi.transpose();
  }
  const double scale = m.diagonal().cwiseAbs().maxCoeff();
  for (int i = 0; i < nq; ++i) {
    if (std::abs(m(i, i) - dofs.q_weight(t, i)) > 1e-12 * scale) {
      throw std::logic_error("assemble: Gauss-Lagrange mass diagonal mismatch");
    }
    for (int j = 0; j < nq; ++j) {
      if (i != j && std::abs(m(i, j)) > 1e-12 * scale) {
        throw std::logic_error("assemble: Gauss-Lagrange mass matrix is not diagonal");
      }
    }
  }
}

}  // namespace

SaddleSystem assemble(const DofMapPtr& dofs, const ProblemData& data) {
  data.material.validate();
  const Mesh& mesh = dofs->mesh();
  const int ne = mesh.num_elements();
  std::vector<ElementBlocks> blocks(ne);
  parallel_for(ne, [&](int t) {
    check_mass_diagonal(*dofs, t);
    blocks[t] = element_blocks(*dofs, data, t);
  });

  SaddleSystem sys;
  sys.dofs = dofs;
  sys.material = data.material;
  const int nu = dofs->num_u();
  const int nq = dofs->num_q();
  std::vector<Triplet> kt, bt;
  std::size_t nk = 0, nb = 0;
  for (const auto& b : blocks) {
    nk += b.k.size();
    nb += b.b.size();
  }
  kt.reserve(nk);
  bt.reserve(nb);
  sys.F = Eigen::VectorXd::Zero(nu);
  for (const auto& b : blocks) {
    kt.insert(kt.end(), b.k.begin(), b.k.end());
    bt.insert(bt.end(), b.b.begin(), b.b.end());
    for (const auto& [i, v] : b.f) sys.F[i] += v;
  }
  sys.K.resize(nu, nu);
  sys.K.setFromTriplets(kt.begin(), kt.end());
  sys.B.resize(nq, nu);
  sys.B.setFromTriplets(bt.begin(), bt.end());
  sys.M.resize(nq);
  const Eigen::VectorXd& w = dofs->q_weights();
  for (Eigen::Index i = 0; i < w.size(); ++i) sys.M[2 * i] = sys.M[2 * i + 1] = 2.0 * w[i];
  sys.D = data.material.d() * sys.M;
  return sys;
}

SparseMatrix SaddleSystem::full() const {
  const int nu = static_cast<int>(K.rows());
  const int nq = static_cast<int>(B.rows());
  std::vector<Triplet> t;
  t.reserve(K.nonZeros() + 2 * B.nonZeros() + nq);
  for (int c = 0; c < K.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(K, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (int c = 0; c < B.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(B, c); it; ++it) {
      t.emplace_back(nu + it.row(), it.col(), it.value());
      t.emplace_back(it.col(), nu + it.row(), it.value());
    }
  }
  for (int i = 0; i < nq; ++i) t.emplace_back(nu + i, nu + i, D[i]);
  SparseMatrix a(nu + nq, nu + nq);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

double bilinear(const SaddleSystem& sys, const Eigen::VectorXd& u, const Eigen::VectorXd& p,
                const Eigen::VectorXd& v, const Eigen::VectorXd& q) {
  return v.dot(sys.K * u) + v.dot(sys.B.transpose() * p) + q.dot(sys.B * u) +
         q.dot(sys.D.cwiseProduct(p));
}

double energy(const FieldU& u, const FieldQ& p, const SaddleSystem& sys, double sigma_y) {
  return 0.5 * bilinear(sys, u.coef, p.coef, u.coef, p.coef) + psi_hp(p, sigma_y) -
         sys.F.dot(u.coef);
}

Eigen::VectorXd trial_stress(const SaddleSystem& sys, const Eigen::VectorXd& u) {
  return -(sys.B * u).cwiseQuotient(sys.M);
}

}  // namespace plastmix
