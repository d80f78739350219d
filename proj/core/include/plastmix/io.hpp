#pragma once

// File formats: mesh JSON, study configuration (JSON or a TOML subset),
// convergence CSV and JSON records, legacy VTK, Matrix Market and the binary
// reference cache.

#include "plastmix/study.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace plastmix {

std::string mesh_to_json(const Mesh& mesh);
Mesh mesh_from_json(const std::string& text);
void write_mesh(const std::filesystem::path& file, const Mesh& mesh);
Mesh read_mesh(const std::filesystem::path& file);

/// Reads a StudyConfig; the format follows the extension (.toml or JSON).
/// Unknown keys throw std::invalid_argument.
StudyConfig read_study_config(const std::filesystem::path& file);
StudyConfig study_config_from_json(const std::string& text, const std::filesystem::path& base = {});
StudyConfig study_config_from_toml(const std::string& text, const std::filesystem::path& base = {});
std::string study_config_to_json(const StudyConfig& cfg);

/// Parses the TOML subset used by the config files (tables, strings,
/// numbers, booleans, flat arrays) into JSON text.
std::string toml_to_json(const std::string& text);

void write_convergence_csv(std::ostream& os, const ConvergenceRecord& r, bool deterministic);
std::string record_to_json(const ConvergenceRecord& r, bool deterministic);
ConvergenceRecord record_from_json(const std::string& text);

struct VtkOptions {
  double elastic_threshold = 2.22e-15;
  double displacement_scale = 10.0;
};
void write_vtk(std::ostream& os, const SolutionTriple& sol, const VtkOptions& opt = {});

void write_matrix_market(std::ostream& os, const SparseMatrix& a);

void write_solution(const std::filesystem::path& file, const SolutionTriple& sol);
/// Reads coefficients written by write_solution onto the given dofs.
SolutionTriple read_solution(const std::filesystem::path& file, const DofMapPtr& dofs);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

std::string read_text(const std::filesystem::path& file);
void write_text(const std::filesystem::path& file, const std::string& text);

}  // namespace plastmix
