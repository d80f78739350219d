#pragma once

// Quadrilateral meshes with 1-irregular hanging nodes, bilinear element maps
// and refinement lineage.

#include "plastmix/basis.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <utility>
#include <vector>

namespace plastmix {

enum class BoundaryTag : std::uint8_t { Interior, Dirichlet, Neumann };

/// Unordered vertex pair, stored sorted.
using EdgeKey = std::pair<int, int>;
inline EdgeKey make_edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

/// Bilinear map F(xi, eta) = a0 + a1 xi + a2 eta + a3 xi eta from [-1,1]^2.
/// Reference corners in order: (-1,-1), (1,-1), (1,1), (-1,1).
class ElementMap {
 public:
  ElementMap() = default;
  explicit ElementMap(const std::array<Vec2, 4>& corners);

  const std::array<Vec2, 4>& corners() const { return corners_; }
  Vec2 map(const Vec2& xi) const;
  /// Columns dF/dxi, dF/deta.
  Mat2 jacobian(const Vec2& xi) const;
  double det(const Vec2& xi) const;
  /// Coefficient of xi*eta; zero for parallelograms.
  const Vec2& cross() const { return a3_; }
  bool affine() const;
  /// Newton inversion of map(); throws if it fails to converge.
  Vec2 inverse(const Vec2& x) const;

 private:
  std::array<Vec2, 4> corners_{};
  Vec2 a0_ = Vec2::Zero(), a1_ = Vec2::Zero(), a2_ = Vec2::Zero(), a3_ = Vec2::Zero();
};

/// Reference point of local edge e at parameter t in [-1,1]. Edge e runs from
/// local vertex e to local vertex (e+1)%4.
Vec2 edge_reference_point(int e, double t);

/// Position of an element inside its base-mesh root: child indices from the
/// root down. Child c of a parent covers the quarter with offset
/// (-1/2,-1/2), (1/2,-1/2), (1/2,1/2), (-1/2,1/2) for c = 0..3.
struct Lineage {
  int root = 0;
  std::vector<std::uint8_t> path;

  friend bool operator==(const Lineage&, const Lineage&) = default;
  friend auto operator<=>(const Lineage&, const Lineage&) = default;
};

/// Affine map between reference squares: xi_outer = scale * xi_inner + offset.
struct ReferenceEmbedding {
  double scale = 1.0;
  Vec2 offset = Vec2::Zero();

  Vec2 apply(const Vec2& xi) const { return scale * xi + offset; }
};

/// Embedding of a descendant lineage into an ancestor lineage (path prefix).
ReferenceEmbedding lineage_embedding(const Lineage& ancestor, const Lineage& descendant);

struct MeshEdge {
  int v0 = -1;
  int v1 = -1;
  BoundaryTag tag = BoundaryTag::Interior;
  /// Elements using this edge as one of their four sides, -1 if absent.
  std::array<int, 2> elements{-1, -1};
  std::array<int, 2> local_edges{-1, -1};
  /// For the halves of a hanging edge: the coarse edge they subdivide.
  int parent = -1;
  /// For a coarse edge with a hanging midpoint: its two halves, children[0]
  /// touching v0.
  std::array<int, 2> children{-1, -1};
  int midpoint = -1;

  bool hanging_master() const { return midpoint >= 0; }
  bool hanging_slave() const { return parent >= 0; }
  bool boundary() const { return tag != BoundaryTag::Interior; }
};

struct HangingVertex {
  int vertex = -1;
  int master_edge = -1;
};

struct MeshData {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 4>> elements;
  std::vector<int> degrees;
  std::vector<Lineage> lineage;
  std::map<EdgeKey, BoundaryTag> boundary;
  /// Midpoint vertex created when an edge was split.
  std::map<EdgeKey, int> midpoints;
};

/// Immutable mesh. Construction validates orientation and builds topology.
class Mesh {
 public:
  explicit Mesh(MeshData data);

  const MeshData& data() const { return data_; }
  int num_vertices() const { return static_cast<int>(data_.vertices.size()); }
  int num_elements() const { return static_cast<int>(data_.elements.size()); }
  const Vec2& vertex(int v) const { return data_.vertices[v]; }
  const std::array<int, 4>& element(int t) const { return data_.elements[t]; }
  int degree(int t) const { return data_.degrees[t]; }
  int max_degree() const;
  const Lineage& lineage(int t) const { return data_.lineage[t]; }
  int level(int t) const { return static_cast<int>(data_.lineage[t].path.size()); }

  const ElementMap& element_map(int t) const { return maps_[t]; }
  /// Longest side.
  double h(int t) const { return h_[t]; }
  double area(int t) const;
  double total_area() const;

  const std::vector<MeshEdge>& edges() const { return edges_; }
  /// Edge used as local side e of element t.
  int element_edge(int t, int e) const { return element_edges_[t][e]; }
  int find_edge(int a, int b) const;
  const std::vector<HangingVertex>& hanging_vertices() const { return hanging_; }
  bool is_hanging(int v) const { return hanging_of_vertex_[v] >= 0; }

  /// Elements sharing a side (fully or partially) with t.
  std::vector<int> neighbors(int t) const;

  friend bool operator==(const Mesh& a, const Mesh& b);

 private:
  void build_topology();

  MeshData data_;
  std::vector<ElementMap> maps_;
  std::vector<double> h_;
  std::vector<MeshEdge> edges_;
  std::map<EdgeKey, int> edge_index_;
  std::vector<std::array<int, 4>> element_edges_;
  std::vector<HangingVertex> hanging_;
  std::vector<int> hanging_of_vertex_;
};

/// Boundary predicate: receives the edge midpoint and outward unit normal.
using BoundaryPredicate = std::function<BoundaryTag(const Vec2& midpoint, const Vec2& normal)>;

Mesh build_rectangle_mesh(double x0, double x1, double y0, double y1, int nx, int ny, int p,
                          const BoundaryPredicate& tag = {});

/// Splits every marked element into four children, plus the closure needed to
/// keep the mesh 1-irregular. Children inherit the parent's degree.
Mesh refine(const Mesh& mesh, const std::set<int>& marked);

Mesh refine_uniform(const Mesh& mesh);

/// Returns a mesh with new degrees, then raises the lower degree across every
/// side until neighboring degrees differ by at most one.
Mesh with_degrees(const Mesh& mesh, std::vector<int> degrees);

/// Finds, for each fine element, the coarse element whose lineage is a prefix
/// of the fine one. Throws std::invalid_argument for non-nested meshes.
struct NestedLocation {
  int coarse_element = -1;
  ReferenceEmbedding embedding;
};
std::vector<NestedLocation> locate_nested(const Mesh& coarse, const Mesh& fine);

}  // namespace plastmix
