#include "plastmix/linear.hpp"

#include <algorithm>
#include <stdexcept>

namespace plastmix {

SpdSolver::SpdSolver(LinearSolverKind kind, double cg_tol) : kind_(kind), cg_tol_(cg_tol) {
  if (kind_ == LinearSolverKind::Cholesky) {
    llt_ = std::make_unique<decltype(llt_)::element_type>();
  } else {
    cg_ = std::make_unique<decltype(cg_)::element_type>();
    cg_->setTolerance(cg_tol_);
  }
}

void SpdSolver::analyze(const Matrix& a) {
  if (llt_) {
    llt_->analyzePattern(a);
  } else {
    cg_->analyzePattern(a);
  }
  analyzed_ = true;
}

void SpdSolver::factorize(const Matrix& a) {
  if (!analyzed_) analyze(a);
  if (llt_) {
    llt_->factorize(a);
    if (llt_->info() != Eigen::Success) {
      throw std::runtime_error("SpdSolver: Cholesky factorization failed (matrix not SPD)");
    }
  } else {
    cg_->setMaxIterations(std::max<Eigen::Index>(1000, 10 * a.rows()));
    cg_->factorize(a);
    if (cg_->info() != Eigen::Success) {
      throw std::runtime_error("SpdSolver: incomplete Cholesky setup failed");
    }
  }
}

void SpdSolver::compute(const Matrix& a) {
  analyze(a);
  factorize(a);
}

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& b) const {
  if (llt_) {
    last_iterations_ = 0;
    return llt_->solve(b);
  }
  Eigen::VectorXd x = cg_->solve(b);
  last_iterations_ = static_cast<int>(cg_->iterations());
  if (cg_->info() != Eigen::Success) {
    throw std::runtime_error("SpdSolver: conjugate gradient did not converge");
  }
  return x;
}

}  // namespace plastmix
