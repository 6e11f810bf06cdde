#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pbmix/geometry.hpp"

namespace pbmix {

enum class Marker : std::uint8_t { None = 0, Dirichlet = 1, Neumann = 2 };

// One mesh edge. The fixed global normal is perp((v1-v0)/len): it points from
// cell_minus into cell_plus for interior facets (cell_minus < cell_plus) and
// outward for boundary facets (cell_plus == -1).
struct Facet {
  int v0 = -1, v1 = -1;
  int cell_minus = -1, cell_plus = -1;
  Marker marker = Marker::None;
};

enum class VertexClass : std::uint8_t { Interior = 0, Neumann = 1, Dirichlet = 2 };

// Conforming triangle mesh, immutable once built. Cells are ccw.
class Mesh {
 public:
  std::vector<Vec2> verts;
  std::vector<std::array<int, 3>> cells;
  std::vector<Facet> facets;
  // facet opposite local vertex i, and +1/-1 if the facet's global normal
  // is outward/inward for this cell
  std::vector<std::array<int, 3>> cell_facets;
  std::vector<std::array<int, 3>> cell_facet_sign;
  std::vector<VertexClass> vclass;
  double h_max = 0.0;

  int n_verts() const { return static_cast<int>(verts.size()); }
  int n_cells() const { return static_cast<int>(cells.size()); }
  int n_facets() const { return static_cast<int>(facets.size()); }

  double area(int c) const;
  Vec2 centroid(int c) const;
  double diameter(int c) const;  // longest edge
  double facet_length(int f) const;
  Vec2 facet_midpoint(int f) const;
  Vec2 facet_normal(int f) const;  // unit, global orientation

  // cells incident to a vertex (csr)
  const std::vector<int>& vertex_cells(int v) const;

  // barycentric coordinates of x in cell c (may be negative outside)
  std::array<double, 3> barycentric(int c, const Vec2& x) const;
  bool cell_contains(int c, const Vec2& x, double tol = 1e-12) const;

  // Build sequence: build_topology() derives facets and connectivity and
  // validates geometry and conformity; then boundary facets get markers
  // (apply_markers or direct assignment); finalize() checks every boundary
  // facet is marked and derives vertex classes and h_max.
  void build_topology();
  void apply_markers(const std::function<Marker(const Vec2&)>& rule);
  void finalize();

 private:
  std::vector<std::vector<int>> vertex_cells_;
};

using MarkerRule = std::function<Marker(const Vec2& facet_midpoint)>;

// Structured triangulation of a rectangle: nx x ny squares, each split along
// the diagonal parallel to x=y. ny defaults to nx.
Mesh generate_structured(int nx, const Rect& box, const MarkerRule& rule, int ny = 0);

// Red refinement: each cell splits into 4 via edge midpoints; children of
// cell p are cells 4p..4p+3, so ancestors after m refinements are c / 4^m.
// Boundary children inherit the parent facet's marker.
Mesh uniform_refine(const Mesh& mesh);

// Text format round trip (see README for the grammar).
Mesh read_mesh(const std::string& path);
void write_mesh(const Mesh& mesh, const std::string& path);
Mesh read_mesh_string(const std::string& text);
std::string write_mesh_string(const Mesh& mesh);

// Averaging patch for one vertex dof. For interior z the patch is the cell
// star of z itself; for a Neumann-boundary z it is the star of the smallest
// indexed interior vertex sharing a cell with z.
struct VertexPatch {
  int vertex = -1;
  int anchor = -1;  // vertex whose star forms the patch (== vertex unless redirected)
  std::vector<int> cells;
};

struct PatchSet {
  std::vector<VertexPatch> patches;
  std::vector<int> patch_of_vertex;  // -1 for vertices without a dof
};

// One patch per vertex in V0 (interior) and V_N (boundary vertices whose
// incident boundary facets are all Neumann). Dirichlet-closure vertices get
// no dof. Throws MissingInteriorNeighbour if a Neumann vertex has no interior
// vertex in any of its cells.
PatchSet vertex_patches(const Mesh& mesh);

}  // namespace pbmix
