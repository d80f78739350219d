#include "plastmix/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

namespace plastmix {

ElementMap::ElementMap(const std::array<Vec2, 4>& c) : corners_(c) {
  a0_ = 0.25 * (c[0] + c[1] + c[2] + c[3]);
  a1_ = 0.25 * (-c[0] + c[1] + c[2] - c[3]);
  a2_ = 0.25 * (-c[0] - c[1] + c[2] + c[3]);
  a3_ = 0.25 * (c[0] - c[1] + c[2] - c[3]);
}

Vec2 ElementMap::map(const Vec2& xi) const {
  return a0_ + xi.x() * a1_ + xi.y() * a2_ + xi.x() * xi.y() * a3_;
}

Mat2 ElementMap::jacobian(const Vec2& xi) const {
  Mat2 j;
  j.col(0) = a1_ + xi.y() * a3_;
  j.col(1) = a2_ + xi.x() * a3_;
  return j;
}

double ElementMap::det(const Vec2& xi) const { return jacobian(xi).determinant(); }

bool ElementMap::affine() const {
  const double scale = std::max(a1_.norm(), a2_.norm());
  return a3_.norm() <= 1e-14 * scale;
}

Vec2 ElementMap::inverse(const Vec2& x) const {
  Vec2 xi = Vec2::Zero();
  const double scale = std::max(a1_.norm(), a2_.norm());
  for (int it = 0; it < 50; ++it) {
    const Vec2 r = map(xi) - x;
    if (r.norm() <= 1e-14 * scale) return xi;
    xi -= jacobian(xi).lu().solve(r);
  }
  if ((map(xi) - x).norm() <= 1e-11 * scale) return xi;
  throw std::runtime_error("ElementMap::inverse: Newton did not converge");
}

Vec2 edge_reference_point(int e, double t) {
  switch (e) {
    case 0: return {t, -1.0};
    case 1: return {1.0, t};
    case 2: return {-t, 1.0};
    default: return {-1.0, -t};
  }
}

namespace {

const std::array<Vec2, 4> kChildOffset = {Vec2(-0.5, -0.5), Vec2(0.5, -0.5), Vec2(0.5, 0.5),
                                          Vec2(-0.5, 0.5)};

}  // namespace

ReferenceEmbedding lineage_embedding(const Lineage& ancestor, const Lineage& descendant) {
  if (ancestor.root != descendant.root || ancestor.path.size() > descendant.path.size() ||
      !std::equal(ancestor.path.begin(), ancestor.path.end(), descendant.path.begin())) {
    throw std::invalid_argument("lineage_embedding: not an ancestor");
  }
  ReferenceEmbedding emb;
  for (std::size_t i = ancestor.path.size(); i < descendant.path.size(); ++i) {
    emb.offset += emb.scale * kChildOffset[descendant.path[i]];
    emb.scale *= 0.5;
  }
  return emb;
}

// ---------------------------------------------------------------------------

Mesh::Mesh(MeshData data) : data_(std::move(data)) {
  const int ne = num_elements();
  if (static_cast<int>(data_.degrees.size()) != ne) {
    throw std::invalid_argument("Mesh: degree count does not match element count");
  }
  if (data_.lineage.empty()) {
    data_.lineage.resize(ne);
    for (int t = 0; t < ne; ++t) data_.lineage[t].root = t;
  }
  if (static_cast<int>(data_.lineage.size()) != ne) {
    throw std::invalid_argument("Mesh: lineage count does not match element count");
  }
  maps_.resize(ne);
  h_.resize(ne);
  for (int t = 0; t < ne; ++t) {
    if (data_.degrees[t] < 1) throw std::invalid_argument("Mesh: degree must be >= 1");
    std::array<Vec2, 4> c;
    for (int i = 0; i < 4; ++i) {
      const int v = data_.elements[t][i];
      if (v < 0 || v >= num_vertices()) throw std::invalid_argument("Mesh: bad vertex id");
      c[i] = data_.vertices[v];
    }
    maps_[t] = ElementMap(c);
    const std::array<Vec2, 4> ref = {Vec2(-1, -1), Vec2(1, -1), Vec2(1, 1), Vec2(-1, 1)};
    double hmax = 0.0;
    for (int i = 0; i < 4; ++i) {
      if (!(maps_[t].det(ref[i]) > 0.0)) {
        throw std::invalid_argument("Mesh: element " + std::to_string(t) +
                                    " is degenerate or not counterclockwise");
      }
      hmax = std::max(hmax, (c[(i + 1) % 4] - c[i]).norm());
    }
    h_[t] = hmax;
  }
  build_topology();
}

void Mesh::build_topology() {
  const int ne = num_elements();
  std::map<EdgeKey, std::vector<std::pair<int, int>>> users;
  std::vector<EdgeKey> order;
  for (int t = 0; t < ne; ++t) {
    for (int e = 0; e < 4; ++e) {
      const EdgeKey k = make_edge_key(data_.elements[t][e], data_.elements[t][(e + 1) % 4]);
      auto& u = users[k];
      if (u.empty()) order.push_back(k);
      u.emplace_back(t, e);
      if (u.size() > 2) throw std::invalid_argument("Mesh: edge shared by more than two elements");
    }
  }
  std::map<EdgeKey, EdgeKey> parent_of;
  for (const auto& [k, m] : data_.midpoints) {
    parent_of[make_edge_key(k.first, m)] = k;
    parent_of[make_edge_key(m, k.second)] = k;
  }

  edges_.clear();
  edge_index_.clear();
  element_edges_.assign(ne, {-1, -1, -1, -1});
  for (const EdgeKey& k : order) {
    const auto& u = users[k];
    MeshEdge edge;
    const auto [t0, e0] = u[0];
    edge.v0 = data_.elements[t0][e0];
    edge.v1 = data_.elements[t0][(e0 + 1) % 4];
    for (std::size_t i = 0; i < u.size(); ++i) {
      edge.elements[i] = u[i].first;
      edge.local_edges[i] = u[i].second;
      element_edges_[u[i].first][u[i].second] = static_cast<int>(edges_.size());
    }
    if (u.size() == 1) {
      if (auto it = data_.boundary.find(k); it != data_.boundary.end()) edge.tag = it->second;
    }
    edge_index_[k] = static_cast<int>(edges_.size());
    edges_.push_back(edge);
  }

  hanging_.clear();
  hanging_of_vertex_.assign(num_vertices(), -1);
  for (int i = 0; i < static_cast<int>(edges_.size()); ++i) {
    MeshEdge& edge = edges_[i];
    if (edge.elements[1] >= 0 || edge.boundary()) continue;
    const EdgeKey k = make_edge_key(edge.v0, edge.v1);
    if (auto mit = data_.midpoints.find(k); mit != data_.midpoints.end()) {
      const int m = mit->second;
      auto a = edge_index_.find(make_edge_key(edge.v0, m));
      auto b = edge_index_.find(make_edge_key(m, edge.v1));
      if (a != edge_index_.end() && b != edge_index_.end()) {
        edge.midpoint = m;
        edge.children = {a->second, b->second};
        edges_[a->second].parent = i;
        edges_[b->second].parent = i;
        hanging_.push_back({m, i});
        hanging_of_vertex_[m] = static_cast<int>(hanging_.size()) - 1;
        continue;
      }
    }
    if (auto pit = parent_of.find(k); pit != parent_of.end() && edge_index_.count(pit->second)) {
      continue;  // half of a hanging edge; linked from its parent
    }
    throw std::invalid_argument("Mesh: open side at edge (" + std::to_string(k.first) + "," +
                                std::to_string(k.second) +
                                "); boundary tag missing or mesh not 1-irregular");
  }
  for (const MeshEdge& edge : edges_) {
    if (edge.elements[1] < 0 && !edge.boundary() && !edge.hanging_master() &&
        !edge.hanging_slave()) {
      throw std::invalid_argument("Mesh: mesh is not 1-irregular");
    }
    if (edge.hanging_slave() && edges_[edge.parent].elements[0] < 0) {
      throw std::invalid_argument("Mesh: hanging edge without coarse side");
    }
  }
}

int Mesh::max_degree() const {
  return data_.degrees.empty() ? 0 : *std::max_element(data_.degrees.begin(), data_.degrees.end());
}

double Mesh::area(int t) const {
  // det J is bilinear-free (affine in xi), so the 2x2 Gauss rule is exact
  const auto& rule = cached_gauss_rule(2);
  double a = 0.0;
  for (int k = 0; k < rule.size(); ++k) a += rule.weights[k] * maps_[t].det(rule.points[k]);
  return a;
}

double Mesh::total_area() const {
  double a = 0.0;
  for (int t = 0; t < num_elements(); ++t) a += area(t);
  return a;
}

int Mesh::find_edge(int a, int b) const {
  auto it = edge_index_.find(make_edge_key(a, b));
  return it == edge_index_.end() ? -1 : it->second;
}

std::vector<int> Mesh::neighbors(int t) const {
  std::vector<int> out;
  for (int e = 0; e < 4; ++e) {
    const MeshEdge& edge = edges_[element_edges_[t][e]];
    for (int s : edge.elements) {
      if (s >= 0 && s != t) out.push_back(s);
    }
    if (edge.hanging_master()) {
      for (int c : edge.children) out.push_back(edges_[c].elements[0]);
    }
    if (edge.hanging_slave()) out.push_back(edges_[edge.parent].elements[0]);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool operator==(const Mesh& a, const Mesh& b) {
  const MeshData& x = a.data_;
  const MeshData& y = b.data_;
  return x.vertices == y.vertices && x.elements == y.elements && x.degrees == y.degrees &&
         x.lineage == y.lineage && x.boundary == y.boundary && x.midpoints == y.midpoints;
}

// ---------------------------------------------------------------------------

Mesh build_rectangle_mesh(double x0, double x1, double y0, double y1, int nx, int ny, int p,
                          const BoundaryPredicate& tag) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("build_rectangle_mesh: nx, ny must be >= 1");
  if (p < 1) throw std::invalid_argument("build_rectangle_mesh: p must be >= 1");
  if (!(x1 > x0) || !(y1 > y0)) throw std::invalid_argument("build_rectangle_mesh: degenerate rectangle");
  MeshData d;
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      // endpoints hit exactly, interior points by linear interpolation
      const double x = i == nx ? x1 : x0 + (x1 - x0) * i / nx;
      const double y = j == ny ? y1 : y0 + (y1 - y0) * j / ny;
      d.vertices.emplace_back(x, y);
    }
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      d.elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
      d.degrees.push_back(p);
    }
  }
  auto add = [&](int a, int b, const Vec2& normal) {
    const Vec2 mid = 0.5 * (d.vertices[a] + d.vertices[b]);
    const BoundaryTag t = tag ? tag(mid, normal) : BoundaryTag::Dirichlet;
    if (t == BoundaryTag::Interior) {
      throw std::invalid_argument("build_rectangle_mesh: boundary edge tagged interior");
    }
    d.boundary[make_edge_key(a, b)] = t;
  };
  for (int i = 0; i < nx; ++i) {
    add(id(i, 0), id(i + 1, 0), Vec2(0, -1));
    add(id(i, ny), id(i + 1, ny), Vec2(0, 1));
  }
  for (int j = 0; j < ny; ++j) {
    add(id(0, j), id(0, j + 1), Vec2(-1, 0));
    add(id(nx, j), id(nx, j + 1), Vec2(1, 0));
  }
  return Mesh(std::move(d));
}

Mesh refine(const Mesh& mesh, const std::set<int>& marked) {
  const int ne = mesh.num_elements();
  std::vector<char> refine_me(ne, 0);
  std::deque<int> queue;
  for (int t : marked) {
    if (t < 0 || t >= ne) throw std::invalid_argument("refine: element id out of range");
    if (!refine_me[t]) {
      refine_me[t] = 1;
      queue.push_back(t);
    }
  }
  while (!queue.empty()) {
    const int t = queue.front();
    queue.pop_front();
    for (int e = 0; e < 4; ++e) {
      const MeshEdge& edge = mesh.edges()[mesh.element_edge(t, e)];
      if (!edge.hanging_slave()) continue;
      const int coarse = mesh.edges()[edge.parent].elements[0];
      if (!refine_me[coarse]) {
        refine_me[coarse] = 1;
        queue.push_back(coarse);
      }
    }
  }

  const MeshData& old = mesh.data();
  MeshData d;
  d.vertices = old.vertices;
  d.boundary = old.boundary;
  d.midpoints = old.midpoints;
  auto midpoint = [&](int a, int b) {
    const EdgeKey k = make_edge_key(a, b);
    auto it = d.midpoints.find(k);
    if (it != d.midpoints.end()) return it->second;
    const int m = static_cast<int>(d.vertices.size());
    d.vertices.push_back(0.5 * (d.vertices[a] + d.vertices[b]));
    d.midpoints[k] = m;
    return m;
  };
  for (int t = 0; t < ne; ++t) {
    if (!refine_me[t]) {
      d.elements.push_back(old.elements[t]);
      d.degrees.push_back(old.degrees[t]);
      d.lineage.push_back(old.lineage[t]);
      continue;
    }
    const auto& v = old.elements[t];
    std::array<int, 4> m;
    for (int e = 0; e < 4; ++e) {
      const int a = v[e];
      const int b = v[(e + 1) % 4];
      m[e] = midpoint(a, b);
      const EdgeKey k = make_edge_key(a, b);
      if (auto it = d.boundary.find(k); it != d.boundary.end()) {
        const BoundaryTag tag = it->second;
        d.boundary.erase(it);
        d.boundary[make_edge_key(a, m[e])] = tag;
        d.boundary[make_edge_key(m[e], b)] = tag;
      }
    }
    const int c = static_cast<int>(d.vertices.size());
    d.vertices.push_back(mesh.element_map(t).map(Vec2::Zero()));
    const std::array<std::array<int, 4>, 4> children = {{{v[0], m[0], c, m[3]},
                                                         {m[0], v[1], m[1], c},
                                                         {c, m[1], v[2], m[2]},
                                                         {m[3], c, m[2], v[3]}}};
    for (int i = 0; i < 4; ++i) {
      d.elements.push_back(children[i]);
      d.degrees.push_back(old.degrees[t]);
      Lineage l = old.lineage[t];
      l.path.push_back(static_cast<std::uint8_t>(i));
      d.lineage.push_back(std::move(l));
    }
  }
  return Mesh(std::move(d));
}

Mesh refine_uniform(const Mesh& mesh) {
  std::set<int> all;
  for (int t = 0; t < mesh.num_elements(); ++t) all.insert(t);
  return refine(mesh, all);
}

Mesh with_degrees(const Mesh& mesh, std::vector<int> degrees) {
  if (static_cast<int>(degrees.size()) != mesh.num_elements()) {
    throw std::invalid_argument("with_degrees: size mismatch");
  }
  std::vector<std::pair<int, int>> pairs;
  for (const MeshEdge& e : mesh.edges()) {
    if (e.elements[1] >= 0) pairs.emplace_back(e.elements[0], e.elements[1]);
    if (e.hanging_slave()) pairs.emplace_back(e.elements[0], mesh.edges()[e.parent].elements[0]);
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [a, b] : pairs) {
      if (degrees[a] + 1 < degrees[b]) {
        degrees[a] = degrees[b] - 1;
        changed = true;
      } else if (degrees[b] + 1 < degrees[a]) {
        degrees[b] = degrees[a] - 1;
        changed = true;
      }
    }
  }
  MeshData d = mesh.data();
  d.degrees = std::move(degrees);
  return Mesh(std::move(d));
}

std::vector<NestedLocation> locate_nested(const Mesh& coarse, const Mesh& fine) {
  std::map<Lineage, int> index;
  for (int t = 0; t < coarse.num_elements(); ++t) index[coarse.lineage(t)] = t;
  std::vector<NestedLocation> out(fine.num_elements());
  for (int t = 0; t < fine.num_elements(); ++t) {
    Lineage l = fine.lineage(t);
    while (true) {
      auto it = index.find(l);
      if (it != index.end()) {
        out[t].coarse_element = it->second;
        out[t].embedding = lineage_embedding(l, fine.lineage(t));
        break;
      }
      if (l.path.empty()) throw std::invalid_argument("locate_nested: meshes are not nested");
      l.path.pop_back();
    }
  }
  return out;
}

}  // namespace plastmix
