#pragma once

// Benchmark problems, refinement loops, overkill references, error norms and
// convergence rates.

#include "plastmix/estimator.hpp"
#include "plastmix/solver.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace plastmix {

enum class ProblemPreset { StripBenchmark, ManufacturedElastic, Custom };
enum class RefinementMode { UniformH, UniformP, AdaptiveH, AdaptiveHP };

/// Exact fields of a manufactured problem.
struct ExactSolution {
  VectorFunction u;
  MatrixFunction grad_u;
};

struct Problem {
  /// Identifies the data in reference cache keys.
  std::string name;
  ProblemData data;
  Mesh mesh;
  std::optional<ExactSolution> exact;
};

/// (-1,1)^2 clamped at y = -1, strip load on the top side, n x n squares.
Problem strip_benchmark(int n = 5, int p = 1);
/// Strip load of the benchmark, exposed for checks.
Vec2 strip_traction(const Vec2& x, const Vec2& normal);
/// Smooth displacement vanishing on y = -1, no yielding.
Problem manufactured_elastic(int n = 2, int p = 1);
/// Problem description from a JSON or TOML file (see README).
Problem custom_problem(const std::filesystem::path& file, int p = 1);

struct StudyConfig {
  ProblemPreset preset = ProblemPreset::StripBenchmark;
  std::filesystem::path custom_file;
  RefinementMode mode = RefinementMode::UniformH;
  /// Degree for the h modes; starting degree for the p and hp modes.
  int degree = 1;
  /// Squares per side of the initial mesh.
  int base_n = 5;
  int levels = 4;
  double theta = 0.5;
  /// Levels whose N would exceed this are not solved.
  long max_dofs = 200000;
  SolverConfig solver;
  HpOptions hp;
  std::filesystem::path output_dir;
  std::filesystem::path cache_dir;
  bool write_vtk = true;
  double elastic_threshold = 2.22e-15;
  /// Zero the timing column so identical runs give identical files.
  bool deterministic = false;

  void validate() const;
};

StudyConfig default_study_config();

struct LevelRecord {
  int level = 0;
  long dofs = 0;
  int elements = 0;
  double e_u = 0.0;
  double e_p = 0.0;
  double e_lambda = 0.0;
  double eta = 0.0;
  double seconds = 0.0;
  int iterations = 0;
  std::string algorithm;
};

struct Rates {
  /// -slope of log e against log N over the last three levels.
  double eoc_u = 0.0, eoc_p = 0.0, eoc_lambda = 0.0, eoc_eta = 0.0;
};

struct ConvergenceRecord {
  std::string problem;
  std::string mode;
  int degree = 1;
  std::vector<LevelRecord> levels;
  Rates rate_n;
  /// 2 x rate_n, the rate in h for uniform refinement in 2D.
  Rates rate_h;
  std::string reference;
};

/// Least-squares slope of log(y) against log(x) over the last `window` points.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y, int window = 3);
Rates compute_rates(const std::vector<LevelRecord>& levels, int window = 3);

struct ErrorNorms {
  double e_u = 0.0;
  double e_p = 0.0;
  double e_lambda = 0.0;
};

/// Coarse fields prolonged to the reference mesh, norms by reference quadrature.
/// Throws std::invalid_argument unless the meshes are nested.
ErrorNorms error_norms(const SolutionTriple& sol, const SolutionTriple& ref);
/// Errors against an exact solution; lambda is compared with 2 mu dev eps(u).
ErrorNorms exact_error_norms(const SolutionTriple& sol, const ExactSolution& exact,
                             const MaterialParams& m);

/// Uniform bisection of every element plus one degree.
Mesh overkill_mesh(const Mesh& finest);

struct ReferenceResult {
  SolutionTriple solution;
  bool cache_hit = false;
  std::filesystem::path cache_file;
};

/// Solves on overkill_mesh(finest), cached under cache_dir (if non-empty) by
/// a content hash of the mesh, data and solver settings.
ReferenceResult overkill_reference(const Mesh& finest, const Problem& problem,
                                   const SolverConfig& solver,
                                   const std::filesystem::path& cache_dir);

struct StudyResult {
  ConvergenceRecord record;
  std::vector<Mesh> meshes;
  std::vector<SolutionTriple> solutions;
  std::optional<SolutionTriple> reference;
};

/// Runs the refinement loop, computes errors and rates, and writes
/// convergence.csv, record.json and fields_L{n}.vtk if output_dir is set.
StudyResult run_study(const StudyConfig& cfg);

Problem make_problem(const StudyConfig& cfg);
std::string to_string(ProblemPreset p);
std::string to_string(RefinementMode m);
ProblemPreset parse_preset(const std::string& s);
RefinementMode parse_mode(const std::string& s);

}  // namespace plastmix
