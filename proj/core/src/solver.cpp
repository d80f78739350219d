#include "plastmix/solver.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace plastmix {

void SolverConfig::validate() const {
  if (max_outer < 1 || max_newton < 1) throw std::invalid_argument("SolverConfig: iteration caps must be >= 1");
  if (!(cg_tol > 0.0) || !(newton_rtol > 0.0)) {
    throw std::invalid_argument("SolverConfig: tolerances must be > 0");
  }
}

double default_tol_outer(const SaddleSystem& sys) {
  return 1e-9 * sys.material.sigma_y * std::sqrt(sys.dofs->mesh().total_area());
}

namespace {

SparseMatrix schur_complement(const SaddleSystem& sys) {
  const Eigen::VectorXd dinv = sys.D.cwiseInverse();
  SparseMatrix db = dinv.asDiagonal() * sys.B;
  SparseMatrix s = sys.K - SparseMatrix(sys.B.transpose() * db);
  s.prune(0.0);
  return s;
}

double rho_of(const SaddleSystem& sys, const SolverConfig& cfg) {
  return cfg.rho > 0.0 ? cfg.rho : sys.material.h0;
}

double tol_of(const SaddleSystem& sys, const SolverConfig& cfg) {
  return cfg.tol_outer > 0.0 ? cfg.tol_outer : default_tol_outer(sys);
}

// Return map at one Gauss point for the trial stress s (coordinates).
struct ReturnMap {
  double pa = 0.0, pb = 0.0;
  bool active = false;
  double ratio = 0.0;  // sigma_y / |s|_F
  double ua = 0.0, ub = 0.0;  // unit vector of s in coordinates
};

ReturnMap return_map(double sa, double sb, double sigma_y, double d) {
  ReturnMap r;
  const double nf = std::sqrt(2.0 * (sa * sa + sb * sb));
  if (nf <= sigma_y) return r;
  r.active = true;
  r.ratio = sigma_y / nf;
  const double scale = (1.0 - r.ratio) / d;
  r.pa = scale * sa;
  r.pb = scale * sb;
  const double nc = std::sqrt(sa * sa + sb * sb);
  r.ua = sa / nc;
  r.ub = sb / nc;
  return r;
}

}  // namespace

SolutionTriple solve_uzawa(const SaddleSystem& sys, const SolverConfig& cfg, const FieldQ* lambda0) {
  cfg.validate();
  const double sy = sys.material.sigma_y;
  const double d = sys.material.d();
  const double rho = rho_of(sys, cfg);
  const double tol = tol_of(sys, cfg);
  const DofMapPtr& dofs = sys.dofs;

  SpdSolver lin(cfg.linear, cfg.cg_tol);
  lin.compute(schur_complement(sys));
  const SparseMatrix bt = sys.B.transpose();

  SolutionTriple out;
  out.algorithm = "uzawa";
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(dofs->num_q());
  if (lambda0) {
    if (!lambda_feasible(*lambda0, sy).feasible) {
      throw std::invalid_argument("solve_uzawa: initial multiplier is not feasible");
    }
    lambda = lambda0->coef;
  }

  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_u, best_p, best_l;
  double prev_energy = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= cfg.max_outer; ++k) {
    const Eigen::VectorXd u = lin.solve(sys.F + bt * lambda / d);
    const Eigen::VectorXd s = trial_stress(sys, u);
    const Eigen::VectorXd p = (s - lambda) / d;
    const FieldQ next = project_onto_lambda(FieldQ(dofs, lambda + rho * p), sy);
    const double res = std::sqrt(std::max(0.0, q_inner(*dofs, next.coef - lambda, next.coef - lambda)));
    const double e = energy(FieldU(dofs, u), FieldQ(dofs, p), sys, sy);
    if (e > prev_energy + 1e-12 * std::abs(prev_energy)) ++out.energy_increases;
    prev_energy = e;
    out.log.push_back({k, res, e});
    out.iterations = k;
    if (!std::isfinite(res)) {
      out.diagnostic = "non-finite residual";
      break;
    }
    if (res < best) {
      best = res;
      best_u = u;
      best_p = p;
      best_l = lambda;
    }
    if (res <= tol) {
      out.converged = true;
      break;
    }
    if (k > 50 && res > 1e6 * best) {
      out.diagnostic = "diverging; reduce rho";
      break;
    }
    lambda = next.coef;
  }
  if (!out.converged && out.diagnostic.empty()) out.diagnostic = "max outer iterations reached";
  if (best_u.size() == 0) {
    best_u = Eigen::VectorXd::Zero(dofs->num_u());
    best_p = best_l = Eigen::VectorXd::Zero(dofs->num_q());
  }
  out.u = FieldU(dofs, best_u);
  out.p = FieldQ(dofs, best_p);
  out.lambda = FieldQ(dofs, best_l);
  return out;
}

namespace {

struct ReducedState {
  Eigen::VectorXd s;
  Eigen::VectorXd p;
  Eigen::VectorXd residual;
  double energy = 0.0;
};

ReducedState reduced_state(const SaddleSystem& sys, const Eigen::VectorXd& u) {
  const double sy = sys.material.sigma_y;
  const double d = sys.material.d();
  ReducedState st;
  st.s = trial_stress(sys, u);
  st.p = Eigen::VectorXd::Zero(st.s.size());
  const Eigen::VectorXd& w = sys.dofs->q_weights();
  double plastic = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const ReturnMap r = return_map(st.s[2 * i], st.s[2 * i + 1], sy, d);
    st.p[2 * i] = r.pa;
    st.p[2 * i + 1] = r.pb;
    if (r.active) {
      const double excess = sy / r.ratio - sy;
      plastic += w[i] * excess * excess / (2.0 * d);
    }
  }
  const Eigen::VectorXd ku = sys.K * u;
  st.residual = ku - sys.F + sys.B.transpose() * st.p;
  st.energy = 0.5 * u.dot(ku) - sys.F.dot(u) - plastic;
  return st;
}

SparseMatrix tangent(const SaddleSystem& sys, const Eigen::VectorXd& s) {
  const double sy = sys.material.sigma_y;
  const double d = sys.material.d();
  const Eigen::Index nq = s.size();
  std::vector<Eigen::Triplet<double>> tw;
  for (Eigen::Index i = 0; i < nq / 2; ++i) {
    const ReturnMap r = return_map(s[2 * i], s[2 * i + 1], sy, d);
    if (!r.active) {
      // explicit zeros keep the pattern independent of the active set
      tw.emplace_back(2 * i, 2 * i, 0.0);
      tw.emplace_back(2 * i + 1, 2 * i + 1, 0.0);
      tw.emplace_back(2 * i, 2 * i + 1, 0.0);
      tw.emplace_back(2 * i + 1, 2 * i, 0.0);
      continue;
    }
    // dp/ds = (1/d) [I - ratio (I - u u^T)], scaled by 1/m
    const double m = sys.M[2 * i];
    const double c = 1.0 / (d * m);
    const double aa = c * (1.0 - r.ratio * (1.0 - r.ua * r.ua));
    const double bb = c * (1.0 - r.ratio * (1.0 - r.ub * r.ub));
    const double ab = c * r.ratio * r.ua * r.ub;
    tw.emplace_back(2 * i, 2 * i, aa);
    tw.emplace_back(2 * i + 1, 2 * i + 1, bb);
    tw.emplace_back(2 * i, 2 * i + 1, ab);
    tw.emplace_back(2 * i + 1, 2 * i, ab);
  }
  SparseMatrix wmat(nq, nq);
  wmat.setFromTriplets(tw.begin(), tw.end());
  return sys.K - SparseMatrix(sys.B.transpose() * (wmat * sys.B));
}

SolutionTriple triple_from_u(const SaddleSystem& sys, const Eigen::VectorXd& u) {
  const ReducedState st = reduced_state(sys, u);
  SolutionTriple out;
  out.u = FieldU(sys.dofs, u);
  out.p = FieldQ(sys.dofs, st.p);
  out.lambda = FieldQ(sys.dofs, st.s - sys.material.d() * st.p);
  // lambda = sigma_y s / |s| exactly at active points
  const double sy = sys.material.sigma_y;
  for (Eigen::Index i = 0; i < st.s.size() / 2; ++i) {
    const double sa = st.s[2 * i], sb = st.s[2 * i + 1];
    const double nf = std::sqrt(2.0 * (sa * sa + sb * sb));
    if (nf > sy) {
      out.lambda.coef[2 * i] = sy * sa / nf;
      out.lambda.coef[2 * i + 1] = sy * sb / nf;
    }
  }
  return out;
}

}  // namespace

SolutionTriple solve_ssn(const SaddleSystem& sys, const SolverConfig& cfg, const FieldU* u0) {
  cfg.validate();
  Eigen::VectorXd u = u0 ? u0->coef : Eigen::VectorXd::Zero(sys.dofs->num_u());
  if (u.size() != sys.dofs->num_u()) throw std::invalid_argument("solve_ssn: warm start size mismatch");
  const double fnorm = sys.F.norm();

  SpdSolver lin(cfg.linear, cfg.cg_tol);
  std::vector<IterationLog> log;
  ReducedState st = reduced_state(sys, u);
  Eigen::Index analyzed_nnz = -1;
  std::string failure;
  int it = 0;
  for (; it <= cfg.max_newton; ++it) {
    const double scale = std::max({fnorm, (sys.K * u).norm(), std::numeric_limits<double>::min()});
    const double rnorm = st.residual.norm();
    log.push_back({it, rnorm, st.energy});
    if (rnorm <= cfg.newton_rtol * scale || (fnorm == 0.0 && rnorm == 0.0)) {
      SolutionTriple out = triple_from_u(sys, u);
      out.log = std::move(log);
      out.converged = true;
      out.iterations = it;
      out.algorithm = "semismooth-newton";
      return out;
    }
    if (it == cfg.max_newton) {
      failure = "max Newton iterations reached";
      break;
    }
    const SparseMatrix t = tangent(sys, st.s);
    if (t.nonZeros() != analyzed_nnz) {
      lin.analyze(t);
      analyzed_nnz = t.nonZeros();
    }
    lin.factorize(t);
    const Eigen::VectorXd du = lin.solve(-st.residual);
    const double slope = st.residual.dot(du);
    if (!(slope < 0.0)) {
      failure = "no descent direction";
      break;
    }
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Eigen::VectorXd trial = u + alpha * du;
      ReducedState next = reduced_state(sys, trial);
      const double allowed = st.energy + 1e-4 * alpha * slope;
      // near the solution energy differences drown in rounding; accept a
      // decrease of the residual instead
      const double noise = 1e-13 * (std::abs(st.energy) + std::abs(0.5 * u.dot(sys.K * u)));
      if (next.energy <= allowed + noise || next.residual.norm() < 0.5 * rnorm) {
        u = trial;
        st = std::move(next);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      failure = "line search failed";
      break;
    }
  }

  SolverConfig fallback = cfg;
  fallback.algorithm = Algorithm::Uzawa;
  SolutionTriple out = solve_uzawa(sys, fallback);
  out.algorithm = "uzawa (fallback)";
  out.diagnostic = "semismooth Newton: " + failure + (out.diagnostic.empty() ? "" : "; " + out.diagnostic);
  return out;
}

SolutionTriple solve(const SaddleSystem& sys, const SolverConfig& cfg) {
  return cfg.algorithm == Algorithm::Uzawa ? solve_uzawa(sys, cfg) : solve_ssn(sys, cfg);
}

double fixed_point_residual(const SolutionTriple& sol, double rho, double sigma_y) {
  const FieldQ next = project_onto_lambda(FieldQ(sol.lambda.dofs, sol.lambda.coef + rho * sol.p.coef), sigma_y);
  const Eigen::VectorXd diff = sol.lambda.coef - next.coef;
  return std::sqrt(std::max(0.0, q_inner(*sol.lambda.dofs, diff, diff)));
}

double momentum_residual(const SaddleSystem& sys, const SolutionTriple& sol) {
  return (sys.K * sol.u.coef + sys.B.transpose() * sol.p.coef - sys.F).norm();
}

// ---------------------------------------------------------------------------

OracleResult solve_oracle(const SaddleSystem& sys, double sigma_y, double tol, int max_iterations) {
  const int nu = sys.dofs->num_u();
  const int nq = sys.dofs->num_q();
  const int n = nu + nq;
  if (n > 5000) throw std::invalid_argument("solve_oracle: system too large");
  const Eigen::MatrixXd a = Eigen::MatrixXd(sys.full());
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b.head(nu) = sys.F;
  // Jacobi scaling x = P^{-1/2} y
  Eigen::VectorXd pdiag(n);
  pdiag.head(nu) = sys.K.diagonal();
  pdiag.tail(nq) = sys.D;
  const Eigen::VectorXd sinv = pdiag.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd as = sinv.asDiagonal() * a * sinv.asDiagonal();
  const Eigen::VectorXd bs = sinv.cwiseProduct(b);
  const double lip = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(as, Eigen::EigenvaluesOnly)
                         .eigenvalues()
                         .maxCoeff();
  const double step = 1.0 / lip;
  const Eigen::VectorXd& w = sys.dofs->q_weights();
  // psi in scaled coordinates: sum_k c_k ||y_k||, c_k = sigma_y sqrt(2) w_k / sqrt(D_k)
  Eigen::VectorXd c(nq / 2);
  for (int k = 0; k < nq / 2; ++k) c[k] = sigma_y * std::sqrt(2.0) * w[k] / std::sqrt(sys.D[2 * k]);

  auto prox = [&](Eigen::VectorXd& y) {
    for (int k = 0; k < nq / 2; ++k) {
      const double ya = y[nu + 2 * k], yb = y[nu + 2 * k + 1];
      const double nrm = std::sqrt(ya * ya + yb * yb);
      const double tau = step * c[k];
      const double f = nrm > tau ? (1.0 - tau / nrm) : 0.0;
      y[nu + 2 * k] = f * ya;
      y[nu + 2 * k + 1] = f * yb;
    }
  };
  // first-order optimality in original units, relative to the load scale
  auto optimality = [&](const Eigen::VectorXd& y) {
    const Eigen::VectorXd x = sinv.cwiseProduct(y);
    const Eigen::VectorXd g = a * x - b;
    double viol = g.head(nu).norm();
    for (int k = 0; k < nq / 2; ++k) {
      // -g_p / m is the multiplier; it must be sigma_y p/|p| or inside the ball
      const double m = sys.M[2 * k];
      const double la = -g[nu + 2 * k] / m, lb = -g[nu + 2 * k + 1] / m;
      const double pa = x[nu + 2 * k], pb = x[nu + 2 * k + 1];
      const double pn = std::sqrt(2.0 * (pa * pa + pb * pb));
      double e = 0.0;
      if (pn > 0.0) {
        e = std::hypot(la - sigma_y * pa / pn, lb - sigma_y * pb / pn);
      } else {
        e = std::max(0.0, std::sqrt(2.0 * (la * la + lb * lb)) - sigma_y) / std::sqrt(2.0);
      }
      viol += m * e;
    }
    const double scale = std::max(b.norm(), sigma_y * std::sqrt(sys.dofs->mesh().total_area()));
    return viol / scale;
  };

  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z = y;
  double t = 1.0;
  OracleResult out;
  for (int it = 1;; ++it) {
    Eigen::VectorXd next = z - step * (as * z - bs);
    prox(next);
    // gradient restart
    if ((z - next).dot(next - y) > 0.0) {
      t = 1.0;
      z = next;
    } else {
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      z = next + ((t - 1.0) / tn) * (next - y);
      t = tn;
    }
    y = std::move(next);
    if (it % 50 == 0) {
      const double opt = optimality(y);
      if (opt <= tol) {
        out.iterations = it;
        out.optimality = opt;
        break;
      }
    }
    if (it >= max_iterations) throw std::runtime_error("solve_oracle: iteration budget exceeded");
  }
  const Eigen::VectorXd x = sinv.cwiseProduct(y);
  out.u = FieldU(sys.dofs, x.head(nu));
  out.p = FieldQ(sys.dofs, x.tail(nq));
  out.energy = energy(out.u, out.p, sys, sigma_y);
  return out;
}

double infsup_constant(const SaddleSystem& sys, const DofMap& dofs) {
  const int nu = dofs.num_u();
  const int nq = dofs.num_q();
  if (nu + nq > 4000) throw std::invalid_argument("infsup_constant: system too large");
  const Mesh& mesh = dofs.mesh();

  // H1 Gram of the displacement space and exact Gram of the q space, both by
  // elevated quadrature
  Eigen::MatrixXd xu = Eigen::MatrixXd::Zero(nu, nu);
  Eigen::MatrixXd xq = Eigen::MatrixXd::Zero(nq, nq);
  for (int t = 0; t < mesh.num_elements(); ++t) {
    const int p = mesh.degree(t);
    const int nr = p + 2;
    const QuadratureRule& rule = cached_gauss_rule(nr);
    const Tabulation& tu = tabulation(ShapeKind::ContinuousNodal, p, nr);
    const Tabulation& tq = tabulation(ShapeKind::GaussLagrange, p, nr);
    const ElementMap& map = mesh.element_map(t);
    const int n = (p + 1) * (p + 1);
    const int m = p * p;
    Eigen::MatrixXd lu = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    Eigen::MatrixXd lq = Eigen::MatrixXd::Zero(m, m);
    for (int k = 0; k < rule.size(); ++k) {
      const Mat2 jinv = map.jacobian(rule.points[k]).inverse();
      const double w = rule.weights[k] * std::abs(map.det(rule.points[k]));
      // strain of phi_a e_c in Voigt form plus the value, for ||v||_0^2 + (eps, eps)
      Eigen::MatrixXd e(4, 2 * n);
      e.setZero();
      Eigen::MatrixXd v(2, 2 * n);
      v.setZero();
      for (int a = 0; a < n; ++a) {
        const double gx = tu.d_xi(k, a) * jinv(0, 0) + tu.d_eta(k, a) * jinv(1, 0);
        const double gy = tu.d_xi(k, a) * jinv(0, 1) + tu.d_eta(k, a) * jinv(1, 1);
        e(0, 2 * a) = gx;
        e(1, 2 * a) = 0.5 * gy;
        e(2, 2 * a) = 0.5 * gy;
        e(3, 2 * a + 1) = gy;
        e(1, 2 * a + 1) = 0.5 * gx;
        e(2, 2 * a + 1) = 0.5 * gx;
        v(0, 2 * a) = tu.value(k, a);
        v(1, 2 * a + 1) = tu.value(k, a);
      }
      lu.noalias() += w * (e.transpose() * e + v.transpose() * v);
      const auto phi = tq.value.row(k).transpose();
      lq.noalias() += w * phi * phi.transpose();
    }
    for (int a = 0; a < n; ++a)
      for (const DofEntry& ea : dofs.node(t, a))
        for (int b = 0; b < n; ++b)
          for (const DofEntry& eb : dofs.node(t, b))
            for (int c = 0; c < 2; ++c)
              for (int d = 0; d < 2; ++d)
                xu(2 * ea.dof + c, 2 * eb.dof + d) += ea.coef * eb.coef * lu(2 * a + c, 2 * b + d);
    const int off = dofs.q_offset(t);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        for (int c = 0; c < 2; ++c) xq(off + 2 * a + c, off + 2 * b + c) += 2.0 * lq(a, b);
  }
  // coupling (mu, q)_0 against (v, q): zero on v, the assembled mass on q
  Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(nu + nq, nq);
  coupling.bottomRows(nq) = sys.M.asDiagonal();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(nu + nq, nu + nq);
  x.topLeftCorner(nu, nu) = xu;
  x.bottomRightCorner(nq, nq) = xq;
  const Eigen::MatrixXd g = coupling.transpose() * x.llt().solve(coupling);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g + g.transpose()), xq);
  if (es.info() != Eigen::Success) throw std::runtime_error("infsup_constant: eigen solve failed");
  return std::sqrt(std::max(0.0, es.eigenvalues().minCoeff()));
}

}  // namespace plastmix
