#include "plastmix/io.hpp"
#include "plastmix/study.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>

using namespace plastmix;

namespace {

void print_record(const ConvergenceRecord& r) {
  std::printf("%s  %s  p=%d  reference: %s\n", r.problem.c_str(), r.mode.c_str(), r.degree,
              r.reference.c_str());
  std::printf("%5s %9s %12s %12s %12s %12s %9s\n", "level", "N", "e_u", "e_p", "e_lambda", "eta",
              "seconds");
  for (const auto& l : r.levels)
    std::printf("%5d %9ld %12.4e %12.4e %12.4e %12.4e %9.2f\n", l.level, l.dofs, l.e_u, l.e_p,
                l.e_lambda, l.eta, l.seconds);
  std::printf("EOC in N (last 3 levels): e_u %.3f  e_p %.3f  e_lambda %.3f  eta %.3f\n", r.rate_n.eoc_u,
              r.rate_n.eoc_p, r.rate_n.eoc_lambda, r.rate_n.eoc_eta);
  std::printf("EOC in h (2x):            e_u %.3f  e_p %.3f  e_lambda %.3f  eta %.3f\n", r.rate_h.eoc_u,
              r.rate_h.eoc_p, r.rate_h.eoc_lambda, r.rate_h.eoc_eta);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plastmix: mixed hp-FEM for elastoplasticity with hardening"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (overrides PLASTMIX_THREADS)");

  auto* run = app.add_subcommand("run", "run a convergence study");
  std::string config_file, output_override;
  bool deterministic = false;
  run->add_option("--config", config_file, "study configuration (.toml or .json)")->required();
  run->add_option("--output", output_override, "output directory");
  run->add_flag("--deterministic", deterministic, "write zero timings");

  auto* solve_cmd = app.add_subcommand("solve", "solve one problem on a mesh");
  std::string mesh_file, preset = "strip", algorithm = "ssn", vtk_file, report_file, matrix_file;
  int level = 0, degree = 0;
  solve_cmd->add_option("--mesh", mesh_file, "mesh JSON; default is the 5x5 benchmark mesh");
  solve_cmd->add_option("--level", level, "uniform refinements applied first")->check(CLI::NonNegativeNumber);
  solve_cmd->add_option("--degree", degree, "set every element to this degree")->check(CLI::Range(0, 8));
  solve_cmd->add_option("--preset", preset, "load data: strip or manufactured");
  solve_cmd->add_option("--algorithm", algorithm, "uzawa or ssn");
  solve_cmd->add_option("--vtk", vtk_file, "write fields as legacy VTK");
  solve_cmd->add_option("--report", report_file, "write estimator indicators as CSV");
  solve_cmd->add_option("--matrix", matrix_file, "write the saddle-point matrix (Matrix Market)");

  auto* eoc = app.add_subcommand("eoc", "print a convergence record");
  std::string record_file;
  eoc->add_option("--record", record_file, "record.json from a study")->required();

  auto* mesh_cmd = app.add_subcommand("mesh", "write the benchmark base mesh");
  int n = 5;
  std::string out_file;
  mesh_cmd->add_option("--n", n, "squares per side")->check(CLI::PositiveNumber);
  mesh_cmd->add_option("--degree", degree, "polynomial degree")->check(CLI::Range(1, 8));
  mesh_cmd->add_option("--out", out_file, "output file")->required();

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) setenv("PLASTMIX_THREADS", std::to_string(threads).c_str(), 1);

  try {
    if (*run) {
      StudyConfig cfg = read_study_config(config_file);
      if (!output_override.empty()) cfg.output_dir = output_override;
      if (deterministic) cfg.deterministic = true;
      if (cfg.output_dir.empty()) cfg.output_dir = "plastmix_out";
      const StudyResult res = run_study(cfg);
      print_record(res.record);
      std::printf("wrote %s\n", cfg.output_dir.string().c_str());
    } else if (*solve_cmd) {
      Problem pr = preset == "manufactured" ? manufactured_elastic() : strip_benchmark();
      if (preset != "manufactured" && preset != "strip") throw std::invalid_argument("unknown preset " + preset);
      Mesh mesh = mesh_file.empty() ? pr.mesh : read_mesh(mesh_file);
      for (int i = 0; i < level; ++i) mesh = refine_uniform(mesh);
      if (degree > 0) mesh = with_degrees(mesh, std::vector<int>(mesh.num_elements(), degree));
      SolverConfig sc;
      sc.algorithm = algorithm == "uzawa" ? Algorithm::Uzawa : Algorithm::SemismoothNewton;
      if (algorithm != "uzawa" && algorithm != "ssn") throw std::invalid_argument("unknown algorithm " + algorithm);
      const auto t0 = std::chrono::steady_clock::now();
      const SaddleSystem sys = assemble(make_dofmap(mesh), pr.data);
      const SolutionTriple sol = solve(sys, sc);
      const EstimatorReport rep = estimate(pr.data, sol);
      const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("elements %d  N %d  %s  iterations %d  converged %s\n", mesh.num_elements(),
                  sys.dofs->num_dofs(), sol.algorithm.c_str(), sol.iterations, sol.converged ? "yes" : "no");
      std::printf("eta %.6e  energy %.12e  feasibility %.3e  %.2f s\n", rep.eta(),
                  energy(sol.u, sol.p, sys, pr.data.material.sigma_y),
                  lambda_feasible(sol.lambda, pr.data.material.sigma_y).violation, sec);
      if (!sol.diagnostic.empty()) std::printf("%s\n", sol.diagnostic.c_str());
      if (!vtk_file.empty()) {
        std::ofstream os(vtk_file);
        write_vtk(os, sol);
      }
      if (!report_file.empty()) {
        std::ofstream os(report_file);
        write_report_csv(os, mesh, rep);
      }
      if (!matrix_file.empty()) {
        std::ofstream os(matrix_file);
        write_matrix_market(os, sys.full());
      }
      return sol.converged ? 0 : 2;
    } else if (*eoc) {
      print_record(record_from_json(read_text(record_file)));
    } else if (*mesh_cmd) {
      write_mesh(out_file, strip_benchmark(n, degree > 0 ? degree : 1).mesh);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "plastmix: %s\n", e.what());
    return 1;
  }
  return 0;
}
