#pragma once

// SPD solves for the displacement blocks: sparse Cholesky or IC(0)-CG.

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>

namespace plastmix {

enum class LinearSolverKind { Cholesky, ConjugateGradient };

class SpdSolver {
 public:
  using Matrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

  explicit SpdSolver(LinearSolverKind kind = LinearSolverKind::Cholesky, double cg_tol = 1e-12);

  LinearSolverKind kind() const { return kind_; }
  /// Symbolic analysis; reused by factorize() while the pattern is unchanged.
  void analyze(const Matrix& a);
  /// Numeric factorization (or preconditioner setup for CG). Throws
  /// std::runtime_error if the matrix is not numerically SPD.
  void factorize(const Matrix& a);
  void compute(const Matrix& a);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  /// CG iterations of the last solve (0 for Cholesky).
  int last_iterations() const { return last_iterations_; }

 private:
  LinearSolverKind kind_;
  double cg_tol_;
  bool analyzed_ = false;
  std::unique_ptr<Eigen::SimplicialLLT<Matrix, Eigen::Lower, Eigen::AMDOrdering<int>>> llt_;
  std::unique_ptr<Eigen::ConjugateGradient<Matrix, Eigen::Lower | Eigen::Upper,
                                           Eigen::IncompleteCholesky<double>>>
      cg_;
  mutable int last_iterations_ = 0;
};

}  // namespace plastmix
