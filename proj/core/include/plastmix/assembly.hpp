#pragma once

// Saddle-point blocks of the mixed formulation, load vector, stresses and
// the discrete energy.

#include "plastmix/spaces.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <string>

namespace plastmix {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Isotropic elasticity C tau = lambda tr(tau) I + 2 mu tau, hardening H = h0 I.
struct MaterialParams {
  double lambda_lame = 1000.0;
  double mu_lame = 1000.0;
  double h0 = 500.0;
  double sigma_y = 5.0;

  /// Throws std::invalid_argument unless mu > 0, lambda >= 0, h0 > 0, sigma_y > 0.
  void validate() const;
  /// Coefficient of the plastic block, (C + H) q = d q for trace-free q.
  double d() const { return 2.0 * mu_lame + h0; }
};

using SurfaceLoad = std::function<Vec2(const Vec2& x, const Vec2& normal)>;

struct ProblemData {
  MaterialParams material;
  /// Volume load; empty means zero.
  VectorFunction f;
  /// Surface load on Neumann edges; empty means zero.
  SurfaceLoad g;
};

/// Blocks in the unknown ordering (u, p). D and M are diagonal in the
/// Gauss-Lagrange layout and stored as vectors.
struct SaddleSystem {
  DofMapPtr dofs;
  MaterialParams material;
  SparseMatrix K;   ///< (C eps(u), eps(v))
  SparseMatrix B;   ///< -(C eps(u), q), rows in the q layout
  Eigen::VectorXd D;  ///< ((C + H) p, q) diagonal
  Eigen::VectorXd M;  ///< (lambda, q) diagonal
  Eigen::VectorXd F;  ///< l(v)

  /// Assembled [[K, B^T], [B, D]].
  SparseMatrix full() const;
};

SaddleSystem assemble(const DofMapPtr& dofs, const ProblemData& data);

/// sigma(u, p) = C (eps(u) - p) from a displacement gradient.
Mat2 stress(const MaterialParams& m, const Mat2& grad_u, const DevMatrix2& p);

/// a((u,p),(v,q)) via the assembled blocks.
double bilinear(const SaddleSystem& sys, const Eigen::VectorXd& u, const Eigen::VectorXd& p,
                const Eigen::VectorXd& v, const Eigen::VectorXd& q);

/// 1/2 a((u,p),(u,p)) + psi_hp(p) - l(u).
double energy(const FieldU& u, const FieldQ& p, const SaddleSystem& sys, double sigma_y);

/// Trial deviatoric stress s = -M^{-1} B u: the coefficients of the L2
/// projection of 2 mu dev eps(u).
Eigen::VectorXd trial_stress(const SaddleSystem& sys, const Eigen::VectorXd& u);

}  // namespace plastmix
