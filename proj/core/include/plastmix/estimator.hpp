#pragma once

// Residual a posteriori estimator, Doerfler marking and the hp decision.

#include "plastmix/assembly.hpp"
#include "plastmix/solver.hpp"

#include <iosfwd>
#include <map>
#include <set>
#include <vector>

namespace plastmix {

struct EstimatorReport {
  /// h_T^2/p_T^2 ||f + div sigma||_T^2 per element.
  std::vector<double> element;
  /// h_e/p_e ||[sigma n]||_e^2 per mesh edge; zero unless the edge carries a
  /// jump (conforming interior edges and the fine halves of hanging edges).
  std::vector<double> interior_edge;
  /// h_e/p_e ||sigma n - g||_e^2 per mesh edge; zero off the Neumann boundary.
  std::vector<double> neumann_edge;
  /// Half of each adjacent jump edge and the full Neumann edges, per element.
  std::vector<double> jump_element;
  std::vector<double> neumann_element;
  /// Per-element parts of the global terms.
  std::vector<double> consistency_element;
  std::vector<double> cutoff_element;
  std::vector<double> bracket_element;

  double consistency = 0.0;  ///< ||dev(sigma - H p) - lambda||^2
  double cutoff = 0.0;       ///< ||lambda - mu*||^2
  double bracket = 0.0;      ///< (sigma_y, |p|_F) - (mu*, p)
  double total = 0.0;        ///< eta^2

  double eta() const;
  /// Element term plus half of each adjacent jump edge plus Neumann edges.
  std::vector<double> local() const;
};

/// All terms with Gauss rules of p_T + 2 points per direction. mu* is the
/// cut-off of lambda + p/2 evaluated at the quadrature points.
EstimatorReport estimate(const ProblemData& data, const SolutionTriple& sol);

/// Cut-off of lambda + p/2 at the Gauss points, same layout as lambda.
FieldQ cutoff_mu_star(const SolutionTriple& sol, double sigma_y);

/// theta^2 * total, with a relative slack of 1e-12 for summation order.
double dorfler_threshold(double total, double theta);

/// Greedy descending selection; ties keep the lower element id first.
/// theta = 1 returns every element with a nonzero indicator.
std::vector<int> mark_dorfler(const std::vector<double>& local, double theta);

enum class HpAction { HRefine, PEnrich };

/// Local indicator samples per element lineage and degree.
class HpHistory {
 public:
  void record(const Mesh& mesh, const std::vector<double>& local);
  /// (degree, indicator) in recording order, or nullptr.
  const std::vector<std::pair<int, double>>* samples(const Lineage& l) const;

 private:
  std::map<Lineage, std::vector<std::pair<int, double>>> data_;
};

struct HpOptions {
  /// P_ENRICH when the last p increase scaled the indicator by <= delta.
  double delta = 0.5;
  bool legendre_fallback = true;
  /// Minimum decay exponent alpha of Legendre coefficients ~ exp(-alpha k).
  double smoothness = 0.6931471805599453;
  int max_degree = 8;
};

/// Legendre decay exponent of the local displacement, or a negative value
/// when the degree is too low to tell.
double legendre_decay(const FieldU& u, int t);

/// One action per entry of marked. u feeds the Legendre fallback and may be null.
std::vector<HpAction> decide_hp(const Mesh& mesh, const HpHistory& history,
                                const std::vector<int>& marked, const FieldU* u,
                                const HpOptions& opt = {});

/// Applies the actions: degrees first, then bisection of the rest.
Mesh apply_hp(const Mesh& mesh, const std::vector<int>& marked,
              const std::vector<HpAction>& actions);

void write_report_csv(std::ostream& os, const Mesh& mesh, const EstimatorReport& r);

}  // namespace plastmix
