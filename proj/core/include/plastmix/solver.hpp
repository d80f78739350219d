#pragma once

// Solvers for the discrete mixed problem: Uzawa with the pointwise
// projection, semismooth Newton on the reduced displacement problem, an
// accelerated proximal-gradient reference minimizer and the discrete inf-sup
// constant.

#include "plastmix/assembly.hpp"
#include "plastmix/linear.hpp"

#include <string>
#include <vector>

namespace plastmix {

enum class Algorithm { Uzawa, SemismoothNewton };

struct SolverConfig {
  Algorithm algorithm = Algorithm::Uzawa;
  /// Uzawa step; <= 0 selects h0.
  double rho = 0.0;
  /// Bound on ||lambda^{k+1} - lambda^k||_Q; <= 0 selects 1e-9 sigma_y sqrt(|Omega|).
  double tol_outer = 0.0;
  int max_outer = 20000;
  LinearSolverKind linear = LinearSolverKind::Cholesky;
  double cg_tol = 1e-12;
  /// Newton stops when ||R(u)|| <= newton_rtol * max(||F||, ||K u||).
  double newton_rtol = 1e-11;
  int max_newton = 100;

  void validate() const;
};

struct IterationLog {
  int iteration = 0;
  double residual = 0.0;
  double energy = 0.0;
};

struct SolutionTriple {
  FieldU u;
  FieldQ p;
  FieldQ lambda;
  std::vector<IterationLog> log;
  bool converged = false;
  int iterations = 0;
  /// Number of Uzawa iterations where the energy increased.
  int energy_increases = 0;
  /// Algorithm that produced the result and any notes (fallbacks, stalls).
  std::string algorithm;
  std::string diagnostic;
};

double default_tol_outer(const SaddleSystem& sys);

/// lambda0 defaults to zero; it must lie in the multiplier set.
SolutionTriple solve_uzawa(const SaddleSystem& sys, const SolverConfig& cfg,
                           const FieldQ* lambda0 = nullptr);

/// u0 is an optional warm start. Falls back to Uzawa if the line search fails.
SolutionTriple solve_ssn(const SaddleSystem& sys, const SolverConfig& cfg,
                         const FieldU* u0 = nullptr);

SolutionTriple solve(const SaddleSystem& sys, const SolverConfig& cfg);

/// ||lambda - Pi(lambda + rho p)||_Q.
double fixed_point_residual(const SolutionTriple& sol, double rho, double sigma_y);

/// Dual-norm style residual of the displacement equation, ||K u + B^T p - F||_2.
double momentum_residual(const SaddleSystem& sys, const SolutionTriple& sol);

struct OracleResult {
  FieldU u;
  FieldQ p;
  int iterations = 0;
  /// Relative first-order optimality violation at exit.
  double optimality = 0.0;
  double energy = 0.0;
};

/// Minimizes 1/2 a - l + psi_hp by restarted FISTA in a Jacobi metric. For
/// small systems only; throws std::runtime_error if max_iterations is hit.
OracleResult solve_oracle(const SaddleSystem& sys, double sigma_y, double tol,
                          int max_iterations = 2000000);

/// min over mu of sup over (v,q) of (mu,q) / ||(v,q)||, with
/// ||(v,q)||^2 = ||v||_1^2 + ||q||_0^2, from a dense generalized eigenproblem.
double infsup_constant(const SaddleSystem& sys, const DofMap& dofs);

}  // namespace plastmix
