#pragma once

// Degrees of freedom for the continuous displacement space and the
// discontinuous plastic-strain / multiplier space, fields over them and the
// pointwise operations on the multiplier set.

#include "plastmix/basis.hpp"
#include "plastmix/mesh.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace plastmix {

/// Contribution of one free scalar dof to an element-local node value.
struct DofEntry {
  int dof;
  double coef;
};

class DofMap {
 public:
  explicit DofMap(Mesh mesh);

  const Mesh& mesh() const { return mesh_; }

  // --- displacement space, scalar per component; global index 2*s + c
  int num_scalar_dofs() const { return num_scalar_; }
  int num_u() const { return 2 * num_scalar_; }
  /// Nodes per element: (p+1)^2 Gauss-Lobatto nodes, k = i + (p+1) j.
  int num_local_nodes(int t) const;
  /// Free dofs and coefficients forming local node k of element t.
  std::span<const DofEntry> node(int t, int k) const;
  /// Physical location of the nodal value carried by free scalar dof s.
  const Vec2& dof_point(int s) const { return dof_points_[s]; }
  int num_dirichlet_dofs() const { return num_dirichlet_; }
  int num_constrained_nodes() const { return num_constrained_; }

  // --- plastic strain / multiplier space; index q_offset(t) + 2 k + c
  int num_q() const { return num_q_; }
  int q_offset(int t) const { return q_offset_[t]; }
  /// Gauss points per element: p^2 (the midpoint for p = 1).
  int num_q_points(int t) const;
  /// Quadrature weight w_k |det J(x_k)| of point k on element t (|T| for p = 1).
  double q_weight(int t, int k) const { return q_weights_[q_offset_[t] / 2 + k]; }
  /// All weights in layout order, one per point (size num_q() / 2).
  const Eigen::VectorXd& q_weights() const { return q_weights_; }
  Vec2 q_point(int t, int k) const;

  /// N = free displacement dofs + plastic strain dofs.
  int num_dofs() const { return num_u() + num_q(); }

 private:
  Mesh mesh_;
  int num_scalar_ = 0;
  int num_dirichlet_ = 0;
  int num_constrained_ = 0;
  std::vector<int> node_offset_;
  std::vector<int> entry_offset_;
  std::vector<DofEntry> entries_;
  std::vector<Vec2> dof_points_;
  int num_q_ = 0;
  std::vector<int> q_offset_;
  Eigen::VectorXd q_weights_;
};

using DofMapPtr = std::shared_ptr<const DofMap>;
DofMapPtr make_dofmap(Mesh mesh);

/// Displacement field. coef has num_u() entries, 2*s + c.
struct FieldU {
  DofMapPtr dofs;
  Eigen::VectorXd coef;

  FieldU() = default;
  explicit FieldU(DofMapPtr d);
  FieldU(DofMapPtr d, Eigen::VectorXd c);

  /// Element-local nodal values, one row per node, columns (u_x, u_y).
  Eigen::MatrixX2d local(int t) const;
  Vec2 value(int t, const Vec2& xi) const;
  /// Physical gradient, G(c, a) = d u_c / d x_a.
  Mat2 gradient(int t, const Vec2& xi) const;
};

/// Plastic strain or multiplier field in (a, b) coordinates per Gauss point.
struct FieldQ {
  DofMapPtr dofs;
  Eigen::VectorXd coef;

  FieldQ() = default;
  explicit FieldQ(DofMapPtr d);
  FieldQ(DofMapPtr d, Eigen::VectorXd c);

  DevMatrix2 at(int t, int k) const;
  void set(int t, int k, const DevMatrix2& q);
  DevMatrix2 value(int t, const Vec2& xi) const;
};

using MatrixFunction = std::function<Mat2(const Vec2& x)>;
using VectorFunction = std::function<Vec2(const Vec2& x)>;

/// L2 projection of dev(q) onto the discrete space, (p+2)-point rule.
FieldQ l2_project(const MatrixFunction& q, const DofMapPtr& dofs);
/// Interpolation at the Gauss points.
FieldQ gauss_interpolate(const MatrixFunction& q, const DofMapPtr& dofs);
/// Nodal interpolation into the displacement space (Dirichlet values dropped).
FieldU interpolate(const VectorFunction& u, const DofMapPtr& dofs);

struct Feasibility {
  bool feasible = true;
  double violation = 0.0;
  int element = -1;
  int point = -1;
};

Feasibility lambda_feasible(const FieldQ& lambda, double sigma_y);
FieldQ project_onto_lambda(const FieldQ& mu, double sigma_y);
/// Radial projection of a single coefficient pair onto |q|_F <= sigma_y.
DevMatrix2 project_point(const DevMatrix2& q, double sigma_y);

/// Exact L2 inner product on the discrete space (the p-point Gauss rule is
/// exact for it on bilinear elements).
double q_inner(const FieldQ& a, const FieldQ& b);
double q_norm(const FieldQ& a);
/// Same on raw coefficient vectors in the layout of dofs.
double q_inner(const DofMap& dofs, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// (sigma_y |q|_F) integrated with the defining Gauss / midpoint rule.
double psi_hp(const FieldQ& q, double sigma_y);
/// High order approximation of the continuous functional.
double psi_exact(const FieldQ& q, double sigma_y, int oversample);

/// ||v||_0^2 + (eps(v), eps(v))_0 and its parts, computed with a (p+2) rule.
struct UNorms {
  double l2_sq = 0.0;
  double strain_sq = 0.0;
  double h1() const;
};
UNorms u_norms(const FieldU& u);

}  // namespace plastmix
