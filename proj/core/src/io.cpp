#include "plastmix/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace plastmix {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

// ---------------------------------------------------------------- mesh

namespace {

const char* tag_name(BoundaryTag t) {
  switch (t) {
    case BoundaryTag::Dirichlet: return "dirichlet";
    case BoundaryTag::Neumann: return "neumann";
    case BoundaryTag::Interior: return "interior";
  }
  return "?";
}

BoundaryTag parse_tag(const std::string& s) {
  if (s == "dirichlet") return BoundaryTag::Dirichlet;
  if (s == "neumann") return BoundaryTag::Neumann;
  throw std::invalid_argument("mesh: unknown boundary tag '" + s + "'");
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected a table");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw std::invalid_argument(where + ": unknown key '" + k + "'");
  }
}

}  // namespace

std::string mesh_to_json(const Mesh& mesh) {
  const MeshData& d = mesh.data();
  json j;
  j["vertices"] = json::array();
  for (const Vec2& v : d.vertices) j["vertices"].push_back({v.x(), v.y()});
  j["elements"] = d.elements;
  j["degrees"] = d.degrees;
  j["lineage"] = json::array();
  for (const Lineage& l : d.lineage) {
    json e = json::array({l.root});
    for (auto c : l.path) e.push_back(static_cast<int>(c));
    j["lineage"].push_back(e);
  }
  j["boundary"] = json::array();
  for (const auto& [k, t] : d.boundary) j["boundary"].push_back({k.first, k.second, tag_name(t)});
  j["midpoints"] = json::array();
  for (const auto& [k, m] : d.midpoints) j["midpoints"].push_back({k.first, k.second, m});
  return j.dump();
}

Mesh mesh_from_json(const std::string& text) {
  const json j = json::parse(text);
  check_keys(j, {"vertices", "elements", "degrees", "lineage", "boundary", "midpoints"}, "mesh");
  MeshData d;
  for (const auto& v : j.at("vertices")) {
    if (v.size() != 2) throw std::invalid_argument("mesh: vertex needs 2 coordinates");
    d.vertices.emplace_back(v[0].get<double>(), v[1].get<double>());
  }
  d.elements = j.at("elements").get<std::vector<std::array<int, 4>>>();
  const int ne = static_cast<int>(d.elements.size());
  d.degrees = j.contains("degrees") ? j["degrees"].get<std::vector<int>>() : std::vector<int>(ne, 1);
  if (j.contains("lineage")) {
    for (const auto& l : j["lineage"]) {
      if (l.empty()) throw std::invalid_argument("mesh: empty lineage");
      Lineage lin;
      lin.root = l[0].get<int>();
      for (std::size_t i = 1; i < l.size(); ++i) {
        const int c = l[i].get<int>();
        if (c < 0 || c > 3) throw std::invalid_argument("mesh: lineage child out of range");
        lin.path.push_back(static_cast<std::uint8_t>(c));
      }
      d.lineage.push_back(std::move(lin));
    }
  } else {
    for (int t = 0; t < ne; ++t) d.lineage.push_back(Lineage{t, {}});
  }
  if (j.contains("boundary"))
    for (const auto& b : j["boundary"])
      d.boundary[make_edge_key(b.at(0).get<int>(), b.at(1).get<int>())] = parse_tag(b.at(2).get<std::string>());
  if (j.contains("midpoints"))
    for (const auto& m : j["midpoints"])
      d.midpoints[make_edge_key(m.at(0).get<int>(), m.at(1).get<int>())] = m.at(2).get<int>();
  return Mesh(std::move(d));
}

void write_mesh(const std::filesystem::path& file, const Mesh& mesh) {
  write_text(file, mesh_to_json(mesh));
}

Mesh read_mesh(const std::filesystem::path& file) { return mesh_from_json(read_text(file)); }

// ---------------------------------------------------------------- TOML subset

namespace {

struct TomlReader {
  const std::string& s;
  std::size_t i = 0;
  int line = 1;

  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("toml line " + std::to_string(line) + ": " + what);
  }
  void skip_ws() {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  }
  // whitespace, newlines and comments inside arrays
  void skip_all() {
    for (;;) {
      skip_ws();
      if (i < s.size() && s[i] == '#')
        while (i < s.size() && s[i] != '\n') ++i;
      if (i < s.size() && (s[i] == '\n' || s[i] == '\r')) {
        if (s[i] == '\n') ++line;
        ++i;
        continue;
      }
      return;
    }
  }
  void end_line() {
    skip_ws();
    if (i < s.size() && s[i] == '#')
      while (i < s.size() && s[i] != '\n') ++i;
    if (i < s.size() && s[i] == '\r') ++i;
    if (i < s.size() && s[i] != '\n') fail("unexpected text after value");
  }
  std::string key() {
    skip_ws();
    if (i < s.size() && (s[i] == '"' || s[i] == '\'')) return string();
    const std::size_t b = i;
    while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_' || s[i] == '-'))
      ++i;
    if (b == i) fail("expected a key");
    return s.substr(b, i - b);
  }
  std::vector<std::string> dotted_key() {
    std::vector<std::string> k{key()};
    for (;;) {
      skip_ws();
      if (i < s.size() && s[i] == '.') {
        ++i;
        k.push_back(key());
      } else {
        return k;
      }
    }
  }
  std::string string() {
    const char q = s[i++];
    std::string out;
    while (i < s.size() && s[i] != q) {
      if (s[i] == '\n') fail("unterminated string");
      if (q == '"' && s[i] == '\\') {
        ++i;
        if (i >= s.size()) fail("bad escape");
        switch (s[i]) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '\\': out += '\\'; break;
          case '"': out += '"'; break;
          default: fail("unsupported escape");
        }
        ++i;
      } else {
        out += s[i++];
      }
    }
    if (i >= s.size()) fail("unterminated string");
    ++i;
    return out;
  }
  json value() {
    skip_ws();
    if (i >= s.size()) fail("missing value");
    const char c = s[i];
    if (c == '"' || c == '\'') return string();
    if (c == '[') {
      ++i;
      json arr = json::array();
      for (;;) {
        skip_all();
        if (i < s.size() && s[i] == ']') {
          ++i;
          return arr;
        }
        arr.push_back(value());
        skip_all();
        if (i < s.size() && s[i] == ',') {
          ++i;
        } else if (i < s.size() && s[i] == ']') {
          ++i;
          return arr;
        } else {
          fail("expected ',' or ']'");
        }
      }
    }
    if (s.compare(i, 4, "true") == 0) {
      i += 4;
      return true;
    }
    if (s.compare(i, 5, "false") == 0) {
      i += 5;
      return false;
    }
    const std::size_t b = i;
    while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '+' ||
                            s[i] == '-' || s[i] == '.' || s[i] == '_'))
      ++i;
    std::string num;
    for (std::size_t k = b; k < i; ++k)
      if (s[k] != '_') num += s[k];
    if (num.empty()) fail("expected a value");
    if (num == "inf" || num == "+inf") return std::numeric_limits<double>::infinity();
    const bool is_float = num.find_first_of(".eE") != std::string::npos;
    try {
      std::size_t used = 0;
      if (is_float) {
        const double v = std::stod(num, &used);
        if (used == num.size()) return v;
      } else {
        const long long v = std::stoll(num, &used);
        if (used == num.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("bad value '" + num + "'");
  }
};

json& walk(json& root, const std::vector<std::string>& path, std::size_t n, TomlReader& r) {
  json* cur = &root;
  for (std::size_t k = 0; k < n; ++k) {
    json& next = (*cur)[path[k]];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) r.fail("key '" + path[k] + "' is not a table");
    cur = &next;
  }
  return *cur;
}

}  // namespace

std::string toml_to_json(const std::string& text) {
  json root = json::object();
  TomlReader r{text};
  json* table = &root;
  while (r.i < text.size()) {
    r.skip_ws();
    if (r.i >= text.size()) break;
    const char c = text[r.i];
    if (c == '\n') {
      ++r.line;
      ++r.i;
      continue;
    }
    if (c == '\r') {
      ++r.i;
      continue;
    }
    if (c == '#') {
      while (r.i < text.size() && text[r.i] != '\n') ++r.i;
      continue;
    }
    if (c == '[') {
      ++r.i;
      if (r.i < text.size() && text[r.i] == '[') r.fail("arrays of tables are not supported");
      const auto path = r.dotted_key();
      r.skip_ws();
      if (r.i >= text.size() || text[r.i] != ']') r.fail("expected ']'");
      ++r.i;
      table = &walk(root, path, path.size(), r);
      r.end_line();
      continue;
    }
    const auto path = r.dotted_key();
    r.skip_ws();
    if (r.i >= text.size() || text[r.i] != '=') r.fail("expected '='");
    ++r.i;
    json& parent = walk(*table, path, path.size() - 1, r);
    if (parent.contains(path.back())) r.fail("duplicate key '" + path.back() + "'");
    parent[path.back()] = r.value();
    r.end_line();
  }
  return root.dump();
}

// ---------------------------------------------------------------- study config

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path out(p);
  if (out.is_relative() && !base.empty()) out = base / out;
  return out;
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "uzawa") return Algorithm::Uzawa;
  if (s == "ssn" || s == "semismooth-newton" || s == "newton") return Algorithm::SemismoothNewton;
  throw std::invalid_argument("config: unknown algorithm '" + s + "'");
}

LinearSolverKind parse_linear(const std::string& s) {
  if (s == "cholesky") return LinearSolverKind::Cholesky;
  if (s == "cg") return LinearSolverKind::ConjugateGradient;
  throw std::invalid_argument("config: unknown linear solver '" + s + "'");
}

StudyConfig config_from(const json& j, const std::filesystem::path& base) {
  check_keys(j,
             {"preset", "problem_file", "mode", "degree", "base_n", "levels", "theta", "max_dofs",
              "output_dir", "cache_dir", "write_vtk", "elastic_threshold", "deterministic", "solver",
              "hp"},
             "config");
  StudyConfig c = default_study_config();
  if (j.contains("preset")) c.preset = parse_preset(j["preset"].get<std::string>());
  if (j.contains("problem_file")) c.custom_file = resolve(base, j["problem_file"].get<std::string>());
  if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
  c.degree = j.value("degree", c.degree);
  c.base_n = j.value("base_n", c.base_n);
  c.levels = j.value("levels", c.levels);
  c.theta = j.value("theta", c.theta);
  c.max_dofs = j.value("max_dofs", c.max_dofs);
  if (j.contains("output_dir")) c.output_dir = resolve(base, j["output_dir"].get<std::string>());
  if (j.contains("cache_dir")) c.cache_dir = resolve(base, j["cache_dir"].get<std::string>());
  c.write_vtk = j.value("write_vtk", c.write_vtk);
  c.elastic_threshold = j.value("elastic_threshold", c.elastic_threshold);
  c.deterministic = j.value("deterministic", c.deterministic);
  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s,
               {"algorithm", "rho", "tol_outer", "max_outer", "linear", "cg_tol", "newton_rtol",
                "max_newton"},
               "config.solver");
    if (s.contains("algorithm")) c.solver.algorithm = parse_algorithm(s["algorithm"].get<std::string>());
    if (s.contains("linear")) c.solver.linear = parse_linear(s["linear"].get<std::string>());
    c.solver.rho = s.value("rho", c.solver.rho);
    c.solver.tol_outer = s.value("tol_outer", c.solver.tol_outer);
    c.solver.max_outer = s.value("max_outer", c.solver.max_outer);
    c.solver.cg_tol = s.value("cg_tol", c.solver.cg_tol);
    c.solver.newton_rtol = s.value("newton_rtol", c.solver.newton_rtol);
    c.solver.max_newton = s.value("max_newton", c.solver.max_newton);
  }
  if (j.contains("hp")) {
    const json& h = j["hp"];
    check_keys(h, {"delta", "legendre_fallback", "smoothness", "max_degree"}, "config.hp");
    c.hp.delta = h.value("delta", c.hp.delta);
    c.hp.legendre_fallback = h.value("legendre_fallback", c.hp.legendre_fallback);
    c.hp.smoothness = h.value("smoothness", c.hp.smoothness);
    c.hp.max_degree = h.value("max_degree", c.hp.max_degree);
  }
  c.validate();
  return c;
}

}  // namespace

StudyConfig study_config_from_json(const std::string& text, const std::filesystem::path& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  try {
    return config_from(j, base);
  } catch (const json::type_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

StudyConfig study_config_from_toml(const std::string& text, const std::filesystem::path& base) {
  return study_config_from_json(toml_to_json(text), base);
}

StudyConfig read_study_config(const std::filesystem::path& file) {
  const std::string text = read_text(file);
  const auto base = file.parent_path();
  return file.extension() == ".toml" ? study_config_from_toml(text, base)
                                     : study_config_from_json(text, base);
}

std::string study_config_to_json(const StudyConfig& c) {
  json j;
  j["preset"] = to_string(c.preset);
  if (!c.custom_file.empty()) j["problem_file"] = c.custom_file.string();
  j["mode"] = to_string(c.mode);
  j["degree"] = c.degree;
  j["base_n"] = c.base_n;
  j["levels"] = c.levels;
  j["theta"] = c.theta;
  j["max_dofs"] = c.max_dofs;
  if (!c.output_dir.empty()) j["output_dir"] = c.output_dir.string();
  if (!c.cache_dir.empty()) j["cache_dir"] = c.cache_dir.string();
  j["write_vtk"] = c.write_vtk;
  j["elastic_threshold"] = c.elastic_threshold;
  j["deterministic"] = c.deterministic;
  j["solver"] = {{"algorithm", c.solver.algorithm == Algorithm::Uzawa ? "uzawa" : "ssn"},
                 {"rho", c.solver.rho},
                 {"tol_outer", c.solver.tol_outer},
                 {"max_outer", c.solver.max_outer},
                 {"linear", c.solver.linear == LinearSolverKind::Cholesky ? "cholesky" : "cg"},
                 {"cg_tol", c.solver.cg_tol},
                 {"newton_rtol", c.solver.newton_rtol},
                 {"max_newton", c.solver.max_newton}};
  j["hp"] = {{"delta", c.hp.delta},
             {"legendre_fallback", c.hp.legendre_fallback},
             {"smoothness", c.hp.smoothness},
             {"max_degree", c.hp.max_degree}};
  return j.dump(2);
}

// ---------------------------------------------------------------- records

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double num_of(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json rates_json(const Rates& r) {
  return {{"e_u", num(r.eoc_u)}, {"e_p", num(r.eoc_p)}, {"e_lambda", num(r.eoc_lambda)},
          {"eta", num(r.eoc_eta)}};
}

Rates rates_of(const json& j) {
  return {num_of(j.at("e_u")), num_of(j.at("e_p")), num_of(j.at("e_lambda")), num_of(j.at("eta"))};
}

}  // namespace

void write_convergence_csv(std::ostream& os, const ConvergenceRecord& r, bool deterministic) {
  os << "level,N,e_u,e_p,e_lambda,eta,seconds\n";
  os << std::setprecision(17);
  for (const LevelRecord& l : r.levels)
    os << l.level << ',' << l.dofs << ',' << l.e_u << ',' << l.e_p << ',' << l.e_lambda << ','
       << l.eta << ',' << (deterministic ? 0.0 : l.seconds) << '\n';
}

std::string record_to_json(const ConvergenceRecord& r, bool deterministic) {
  json j;
  j["problem"] = r.problem;
  j["mode"] = r.mode;
  j["degree"] = r.degree;
  j["reference"] = r.reference;
  j["levels"] = json::array();
  for (const LevelRecord& l : r.levels)
    j["levels"].push_back({{"level", l.level},
                           {"N", l.dofs},
                           {"elements", l.elements},
                           {"e_u", num(l.e_u)},
                           {"e_p", num(l.e_p)},
                           {"e_lambda", num(l.e_lambda)},
                           {"eta", num(l.eta)},
                           {"seconds", deterministic ? 0.0 : l.seconds},
                           {"iterations", l.iterations},
                           {"algorithm", l.algorithm}});
  j["eoc_N"] = rates_json(r.rate_n);
  j["eoc_h"] = rates_json(r.rate_h);
  return j.dump(2);
}

ConvergenceRecord record_from_json(const std::string& text) {
  const json j = json::parse(text);
  ConvergenceRecord r;
  r.problem = j.value("problem", std::string());
  r.mode = j.value("mode", std::string());
  r.degree = j.value("degree", 1);
  r.reference = j.value("reference", std::string());
  for (const json& l : j.at("levels")) {
    LevelRecord x;
    x.level = l.at("level").get<int>();
    x.dofs = l.at("N").get<long>();
    x.elements = l.value("elements", 0);
    x.e_u = num_of(l.at("e_u"));
    x.e_p = num_of(l.at("e_p"));
    x.e_lambda = num_of(l.at("e_lambda"));
    x.eta = num_of(l.at("eta"));
    x.seconds = l.value("seconds", 0.0);
    x.iterations = l.value("iterations", 0);
    x.algorithm = l.value("algorithm", std::string());
    r.levels.push_back(x);
  }
  if (j.contains("eoc_N")) r.rate_n = rates_of(j["eoc_N"]);
  if (j.contains("eoc_h")) r.rate_h = rates_of(j["eoc_h"]);
  return r;
}

// ---------------------------------------------------------------- VTK

void write_vtk(std::ostream& os, const SolutionTriple& sol, const VtkOptions& opt) {
  const Mesh& mesh = sol.u.dofs->mesh();
  const int nv = mesh.num_vertices();
  const int ne = mesh.num_elements();
  static const Vec2 corner[4] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};

  std::vector<Vec2> u(nv, Vec2::Zero());
  std::vector<double> pn(nv, 0.0), ln(nv, 0.0);
  std::vector<int> count(nv, 0);
  std::vector<double> pc(ne, 0.0), lc(ne, 0.0);
  for (int t = 0; t < ne; ++t) {
    const auto& el = mesh.element(t);
    for (int c = 0; c < 4; ++c) {
      const int v = el[c];
      u[v] = sol.u.value(t, corner[c]);
      pn[v] += frobenius(sol.p.value(t, corner[c]));
      ln[v] += frobenius(sol.lambda.value(t, corner[c]));
      ++count[v];
    }
    // cell values: weighted mean over the Gauss points
    const int nq = sol.u.dofs->num_q_points(t);
    double w = 0, ps = 0, ls = 0;
    for (int k = 0; k < nq; ++k) {
      const double wk = sol.u.dofs->q_weight(t, k);
      w += wk;
      ps += wk * frobenius(sol.p.at(t, k));
      ls += wk * frobenius(sol.lambda.at(t, k));
    }
    pc[t] = ps / w;
    lc[t] = ls / w;
  }
  for (int v = 0; v < nv; ++v)
    if (count[v] > 0) {
      pn[v] /= count[v];
      ln[v] /= count[v];
    }

  os << "# vtk DataFile Version 3.0\nplastmix fields\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << std::setprecision(17);
  os << "POINTS " << nv << " double\n";
  for (int v = 0; v < nv; ++v) os << mesh.vertex(v).x() << ' ' << mesh.vertex(v).y() << " 0\n";
  os << "CELLS " << ne << ' ' << 5 * ne << '\n';
  for (int t = 0; t < ne; ++t) {
    const auto& el = mesh.element(t);
    os << "4 " << el[0] << ' ' << el[1] << ' ' << el[2] << ' ' << el[3] << '\n';
  }
  os << "CELL_TYPES " << ne << '\n';
  for (int t = 0; t < ne; ++t) os << "9\n";

  os << "POINT_DATA " << nv << '\n';
  os << "VECTORS u double\n";
  for (int v = 0; v < nv; ++v) os << u[v].x() << ' ' << u[v].y() << " 0\n";
  os << "VECTORS deformed double\n";
  for (int v = 0; v < nv; ++v) {
    const Vec2 x = mesh.vertex(v) + opt.displacement_scale * u[v];
    os << x.x() << ' ' << x.y() << " 0\n";
  }
  os << "SCALARS p_norm double 1\nLOOKUP_TABLE default\n";
  for (int v = 0; v < nv; ++v) os << pn[v] << '\n';
  os << "SCALARS lambda_norm double 1\nLOOKUP_TABLE default\n";
  for (int v = 0; v < nv; ++v) os << ln[v] << '\n';
  os << "SCALARS elastic int 1\nLOOKUP_TABLE default\n";
  for (int v = 0; v < nv; ++v) os << (pn[v] <= opt.elastic_threshold ? 1 : 0) << '\n';

  os << "CELL_DATA " << ne << '\n';
  os << "SCALARS p_norm double 1\nLOOKUP_TABLE default\n";
  for (int t = 0; t < ne; ++t) os << pc[t] << '\n';
  os << "SCALARS lambda_norm double 1\nLOOKUP_TABLE default\n";
  for (int t = 0; t < ne; ++t) os << lc[t] << '\n';
  os << "SCALARS elastic int 1\nLOOKUP_TABLE default\n";
  for (int t = 0; t < ne; ++t) os << (pc[t] <= opt.elastic_threshold ? 1 : 0) << '\n';
  os << "SCALARS degree int 1\nLOOKUP_TABLE default\n";
  for (int t = 0; t < ne; ++t) os << mesh.degree(t) << '\n';
}

// ---------------------------------------------------------------- matrices, solutions

void write_matrix_market(std::ostream& os, const SparseMatrix& a) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
  os << std::setprecision(17);
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it)
      os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

namespace {

constexpr char kMagic[8] = {'P', 'L', 'M', 'X', 'S', 'O', 'L', '1'};

void put_vector(std::ostream& os, const Eigen::VectorXd& v) {
  const std::int64_t n = v.size();
  os.write(reinterpret_cast<const char*>(&n), sizeof n);
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

Eigen::VectorXd get_vector(std::istream& is, std::int64_t expected) {
  std::int64_t n = 0;
  is.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!is || n != expected) throw std::runtime_error("solution file does not match the dofs");
  Eigen::VectorXd v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw std::runtime_error("solution file truncated");
  return v;
}

}  // namespace

void write_solution(const std::filesystem::path& file, const SolutionTriple& sol) {
  const auto tmp = std::filesystem::path(file.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os.write(kMagic, sizeof kMagic);
    put_vector(os, sol.u.coef);
    put_vector(os, sol.p.coef);
    put_vector(os, sol.lambda.coef);
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

SolutionTriple read_solution(const std::filesystem::path& file, const DofMapPtr& dofs) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + file.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("not a solution file: " + file.string());
  SolutionTriple s;
  s.u = FieldU(dofs, get_vector(is, dofs->num_u()));
  s.p = FieldQ(dofs, get_vector(is, dofs->num_q()));
  s.lambda = FieldQ(dofs, get_vector(is, dofs->num_q()));
  s.converged = true;
  s.algorithm = "cached";
  return s;
}

}  // namespace plastmix
