#include "pbmix/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "pbmix/errors.hpp"

namespace pbmix {

namespace {

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * cross(b - a, c - a);
}

}  // namespace

double Mesh::area(int c) const {
  const auto& t = cells[c];
  return signed_area(verts[t[0]], verts[t[1]], verts[t[2]]);
}

Vec2 Mesh::centroid(int c) const {
  const auto& t = cells[c];
  return (verts[t[0]] + verts[t[1]] + verts[t[2]]) / 3.0;
}

double Mesh::diameter(int c) const {
  const auto& t = cells[c];
  const double a = dist(verts[t[0]], verts[t[1]]);
  const double b = dist(verts[t[1]], verts[t[2]]);
  const double d = dist(verts[t[2]], verts[t[0]]);
  return std::max({a, b, d});
}

double Mesh::facet_length(int f) const { return dist(verts[facets[f].v0], verts[facets[f].v1]); }

Vec2 Mesh::facet_midpoint(int f) const {
  return (verts[facets[f].v0] + verts[facets[f].v1]) * 0.5;
}

Vec2 Mesh::facet_normal(int f) const {
  const Vec2 t = verts[facets[f].v1] - verts[facets[f].v0];
  return perp(t) / norm(t);
}

const std::vector<int>& Mesh::vertex_cells(int v) const { return vertex_cells_[v]; }

std::array<double, 3> Mesh::barycentric(int c, const Vec2& x) const {
  const auto& t = cells[c];
  const double a = area(c);
  return {signed_area(x, verts[t[1]], verts[t[2]]) / a,
          signed_area(verts[t[0]], x, verts[t[2]]) / a,
          signed_area(verts[t[0]], verts[t[1]], x) / a};
}

bool Mesh::cell_contains(int c, const Vec2& x, double tol) const {
  const auto l = barycentric(c, x);
  return l[0] >= -tol && l[1] >= -tol && l[2] >= -tol;
}

void Mesh::build_topology() {
  const int nv = n_verts();
  const int nc = n_cells();
  if (nv < 3 || nc < 1) throw InvariantViolation("mesh needs at least one cell");

  double scale = 0.0;
  for (int c = 0; c < nc; ++c) {
    const auto& t = cells[c];
    for (int i = 0; i < 3; ++i) {
      if (t[i] < 0 || t[i] >= nv) throw InvariantViolation("cell vertex index out of range");
      if (t[i] == t[(i + 1) % 3]) throw DegenerateCell("repeated vertex in cell " + std::to_string(c));
    }
    scale = std::max(scale, diameter(c));
  }
  for (int c = 0; c < nc; ++c) {
    const double a = area(c);
    if (std::abs(a) < 1e-14 * scale * scale)
      throw DegenerateCell("cell " + std::to_string(c) + " has zero area");
    if (a < 0.0) throw InvariantViolation("cell " + std::to_string(c) + " is not ccw");
  }

  // duplicate vertex detection
  {
    std::vector<int> order(nv);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return verts[a].x != verts[b].x ? verts[a].x < verts[b].x : verts[a].y < verts[b].y;
    });
    for (int i = 0; i + 1 < nv; ++i) {
      if (dist(verts[order[i]], verts[order[i + 1]]) < 1e-12 * scale)
        throw InvariantViolation("duplicate vertex coordinates");
    }
  }

  // facets from directed cell edges; a conforming ccw pair traverses a shared
  // edge in opposite directions
  facets.clear();
  cell_facets.assign(nc, {-1, -1, -1});
  cell_facet_sign.assign(nc, {0, 0, 0});
  std::map<std::pair<int, int>, int> edge_to_facet;
  for (int c = 0; c < nc; ++c) {
    const auto& t = cells[c];
    for (int i = 0; i < 3; ++i) {
      const int a = t[(i + 1) % 3];
      const int b = t[(i + 2) % 3];  // edge opposite vertex i, ccw direction
      const auto key = std::minmax(a, b);
      auto it = edge_to_facet.find(key);
      if (it == edge_to_facet.end()) {
        Facet f;
        f.v0 = a;
        f.v1 = b;
        f.cell_minus = c;
        const int idx = static_cast<int>(facets.size());
        facets.push_back(f);
        edge_to_facet.emplace(key, idx);
        cell_facets[c][i] = idx;
      } else {
        Facet& f = facets[it->second];
        if (f.cell_plus != -1)
          throw InvariantViolation("edge shared by more than two cells");
        if (!(f.v0 == b && f.v1 == a))
          throw InvariantViolation("inconsistent edge orientation between cells");
        // keep the directed edge of the lower-indexed cell so the normal
        // points lower -> higher
        if (c < f.cell_minus) {
          f.cell_plus = f.cell_minus;
          f.cell_minus = c;
          f.v0 = b;
          f.v1 = a;
        } else {
          f.cell_plus = c;
        }
        cell_facets[c][i] = it->second;
      }
    }
  }
  for (int c = 0; c < nc; ++c)
    for (int i = 0; i < 3; ++i) {
      const int fi = cell_facets[c][i];
      cell_facet_sign[c][i] = (facets[fi].cell_minus == c || facets[fi].cell_plus == -1) ? 1 : -1;
      if (facets[fi].cell_plus == -1 && facets[fi].cell_minus != c)
        throw InvariantViolation("boundary facet bookkeeping broken");
    }

  // hanging nodes: no vertex may sit strictly inside another cell's edge.
  // bucket vertices on a uniform grid so the scan stays near linear.
  {
    Vec2 lo = verts[0], hi = verts[0];
    for (const auto& p : verts) {
      lo.x = std::min(lo.x, p.x);
      lo.y = std::min(lo.y, p.y);
      hi.x = std::max(hi.x, p.x);
      hi.y = std::max(hi.y, p.y);
    }
    const double cellsz = std::max(scale, 1e-12);
    const int gx = std::max(1, static_cast<int>((hi.x - lo.x) / cellsz) + 1);
    const int gy = std::max(1, static_cast<int>((hi.y - lo.y) / cellsz) + 1);
    std::vector<std::vector<int>> grid(static_cast<size_t>(gx) * gy);
    auto bucket = [&](const Vec2& p) {
      int ix = std::min(gx - 1, std::max(0, static_cast<int>((p.x - lo.x) / cellsz)));
      int iy = std::min(gy - 1, std::max(0, static_cast<int>((p.y - lo.y) / cellsz)));
      return iy * gx + ix;
    };
    for (int v = 0; v < nv; ++v) grid[bucket(verts[v])].push_back(v);
    for (const auto& f : facets) {
      const Vec2 a = verts[f.v0], b = verts[f.v1];
      const double len2 = dot(b - a, b - a);
      const int bx0 = std::max(0, static_cast<int>((std::min(a.x, b.x) - lo.x) / cellsz) - 1);
      const int bx1 = std::min(gx - 1, static_cast<int>((std::max(a.x, b.x) - lo.x) / cellsz) + 1);
      const int by0 = std::max(0, static_cast<int>((std::min(a.y, b.y) - lo.y) / cellsz) - 1);
      const int by1 = std::min(gy - 1, static_cast<int>((std::max(a.y, b.y) - lo.y) / cellsz) + 1);
      for (int iy = by0; iy <= by1; ++iy)
        for (int ix = bx0; ix <= bx1; ++ix)
          for (int v : grid[iy * gx + ix]) {
            if (v == f.v0 || v == f.v1) continue;
            const double t = dot(verts[v] - a, b - a) / len2;
            if (t <= 1e-10 || t >= 1.0 - 1e-10) continue;
            const Vec2 proj = a + (b - a) * t;
            if (dist(proj, verts[v]) < 1e-10 * scale)
              throw InvariantViolation("hanging node on edge");
          }
    }
  }

  vertex_cells_.assign(nv, {});
  for (int c = 0; c < nc; ++c)
    for (int i = 0; i < 3; ++i) vertex_cells_[cells[c][i]].push_back(c);
  for (auto& vc : vertex_cells_)
    if (vc.empty()) throw InvariantViolation("isolated vertex");
}

void Mesh::apply_markers(const std::function<Marker(const Vec2&)>& rule) {
  for (int f = 0; f < n_facets(); ++f) {
    if (facets[f].cell_plus != -1) continue;
    const Marker m = rule(facet_midpoint(f));
    if (m == Marker::None) throw MarkerMismatch("marker rule left a boundary facet unmarked");
    facets[f].marker = m;
  }
}

void Mesh::finalize() {
  for (int f = 0; f < n_facets(); ++f) {
    const bool boundary = facets[f].cell_plus == -1;
    if (boundary && facets[f].marker == Marker::None)
      throw MarkerMismatch("boundary facet " + std::to_string(f) + " has no marker");
    if (!boundary && facets[f].marker != Marker::None)
      throw MarkerMismatch("interior facet " + std::to_string(f) + " carries a marker");
  }
  vclass.assign(n_verts(), VertexClass::Interior);
  // a boundary vertex is Neumann only if every incident boundary facet is
  // Neumann; anything touching the Dirichlet closure is Dirichlet
  for (const auto& f : facets) {
    if (f.cell_plus != -1) continue;
    for (int v : {f.v0, f.v1}) {
      if (f.marker == Marker::Dirichlet) {
        vclass[v] = VertexClass::Dirichlet;
      } else if (vclass[v] == VertexClass::Interior) {
        vclass[v] = VertexClass::Neumann;
      }
    }
  }
  h_max = 0.0;
  for (int c = 0; c < n_cells(); ++c) h_max = std::max(h_max, diameter(c));
}

Mesh generate_structured(int nx, const Rect& box, const MarkerRule& rule, int ny) {
  if (ny <= 0) ny = nx;
  if (nx < 1) throw InvariantViolation("nx must be positive");
  if (!(box.x1 > box.x0 && box.y1 > box.y0)) throw InvariantViolation("empty domain box");
  Mesh mesh;
  const double dx = (box.x1 - box.x0) / nx;
  const double dy = (box.y1 - box.y0) / ny;
  mesh.verts.reserve(static_cast<size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.verts.push_back({box.x0 + i * dx, box.y0 + j * dy});
  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  mesh.cells.reserve(static_cast<size_t>(2) * nx * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      // split along the diagonal parallel to x=y
      mesh.cells.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      mesh.cells.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  mesh.build_topology();
  mesh.apply_markers(rule);
  mesh.finalize();
  return mesh;
}

Mesh uniform_refine(const Mesh& mesh) {
  Mesh fine;
  fine.verts = mesh.verts;
  fine.verts.reserve(mesh.verts.size() + mesh.facets.size());
  for (int f = 0; f < mesh.n_facets(); ++f) fine.verts.push_back(mesh.facet_midpoint(f));
  const int nv = mesh.n_verts();
  fine.cells.reserve(static_cast<size_t>(4) * mesh.n_cells());
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& t = mesh.cells[c];
    const int m12 = nv + mesh.cell_facets[c][0];  // midpoint of edge (v1,v2)
    const int m20 = nv + mesh.cell_facets[c][1];
    const int m01 = nv + mesh.cell_facets[c][2];
    fine.cells.push_back({t[0], m01, m20});
    fine.cells.push_back({t[1], m12, m01});
    fine.cells.push_back({t[2], m20, m12});
    fine.cells.push_back({m01, m12, m20});
  }
  fine.build_topology();
  for (auto& f : fine.facets) {
    if (f.cell_plus != -1) continue;
    // boundary children connect a parent vertex with the midpoint of a
    // parent boundary facet
    const int mid = std::max(f.v0, f.v1);
    if (mid < nv) throw InvariantViolation("refined boundary facet lacks a midpoint vertex");
    const Facet& parent = mesh.facets[mid - nv];
    if (parent.cell_plus != -1)
      throw InvariantViolation("refined boundary facet descends from an interior facet");
    f.marker = parent.marker;
  }
  fine.finalize();
  return fine;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string write_mesh_string(const Mesh& mesh) {
  std::ostringstream os;
  os << "pbmix-mesh 1\n";
  os << "vertices " << mesh.n_verts() << "\n";
  for (const auto& p : mesh.verts) os << fmt_double(p.x) << " " << fmt_double(p.y) << "\n";
  os << "cells " << mesh.n_cells() << "\n";
  for (const auto& t : mesh.cells) os << t[0] << " " << t[1] << " " << t[2] << "\n";
  int nb = 0;
  for (const auto& f : mesh.facets) nb += f.cell_plus == -1 ? 1 : 0;
  os << "boundary " << nb << "\n";
  for (const auto& f : mesh.facets) {
    if (f.cell_plus != -1) continue;
    os << f.v0 << " " << f.v1 << " " << (f.marker == Marker::Dirichlet ? "D" : "N") << "\n";
  }
  return os.str();
}

void write_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open " + path + " for writing");
  os << write_mesh_string(mesh);
}

Mesh read_mesh_string(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  auto next_line = [&](std::istringstream& fields) {
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::istringstream probe(line);
      std::string tok;
      if (probe >> tok) {
        fields.clear();
        fields.str(line);
        return true;
      }
    }
    return false;
  };
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError("line " + std::to_string(lineno) + ": " + what);
  };

  std::istringstream fields;
  if (!next_line(fields)) throw fail("empty mesh file");
  std::string magic;
  int version = 0;
  if (!(fields >> magic >> version) || magic != "pbmix-mesh" || version != 1)
    throw fail("expected header 'pbmix-mesh 1'");

  auto read_count = [&](const std::string& keyword) {
    std::istringstream f;
    if (!next_line(f)) throw fail("expected '" + keyword + " <count>'");
    std::string kw;
    long n = -1;
    if (!(f >> kw >> n) || kw != keyword || n < 0)
      throw fail("expected '" + keyword + " <count>'");
    return n;
  };

  Mesh mesh;
  const long nv = read_count("vertices");
  mesh.verts.reserve(nv);
  for (long i = 0; i < nv; ++i) {
    std::istringstream f;
    if (!next_line(f)) throw fail("missing vertex line");
    double x, y;
    if (!(f >> x >> y)) throw fail("bad vertex line");
    mesh.verts.push_back({x, y});
  }
  const long nc = read_count("cells");
  mesh.cells.reserve(nc);
  for (long i = 0; i < nc; ++i) {
    std::istringstream f;
    if (!next_line(f)) throw fail("missing cell line");
    int a, b, c;
    if (!(f >> a >> b >> c)) throw fail("bad cell line");
    mesh.cells.push_back({a, b, c});
  }
  const long nb = read_count("boundary");
  std::vector<std::array<int, 3>> records;
  records.reserve(nb);
  for (long i = 0; i < nb; ++i) {
    std::istringstream f;
    if (!next_line(f)) throw fail("missing boundary line");
    int a, b;
    std::string m;
    if (!(f >> a >> b >> m) || (m != "D" && m != "N")) throw fail("bad boundary line");
    records.push_back({a, b, m == "D" ? 1 : 2});
  }
  {
    std::istringstream f;
    if (next_line(f)) throw fail("trailing content after boundary section");
  }

  mesh.build_topology();
  std::map<std::pair<int, int>, int> boundary_facets;
  for (int f = 0; f < mesh.n_facets(); ++f)
    if (mesh.facets[f].cell_plus == -1)
      boundary_facets.emplace(std::minmax(mesh.facets[f].v0, mesh.facets[f].v1), f);
  for (const auto& r : records) {
    auto it = boundary_facets.find(std::minmax(r[0], r[1]));
    if (it == boundary_facets.end())
      throw MarkerMismatch("boundary record (" + std::to_string(r[0]) + "," +
                           std::to_string(r[1]) + ") is not a boundary facet");
    Facet& f = mesh.facets[it->second];
    const Marker m = r[2] == 1 ? Marker::Dirichlet : Marker::Neumann;
    if (f.marker != Marker::None && f.marker != m)
      throw MarkerMismatch("conflicting markers for one boundary facet");
    f.marker = m;
  }
  mesh.finalize();
  return mesh;
}

Mesh read_mesh(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return read_mesh_string(buf.str());
}

PatchSet vertex_patches(const Mesh& mesh) {
  PatchSet ps;
  ps.patch_of_vertex.assign(mesh.n_verts(), -1);
  for (int v = 0; v < mesh.n_verts(); ++v) {
    if (mesh.vclass[v] == VertexClass::Dirichlet) continue;
    VertexPatch patch;
    patch.vertex = v;
    if (mesh.vclass[v] == VertexClass::Interior) {
      patch.anchor = v;
    } else {
      int anchor = -1;
      for (int c : mesh.vertex_cells(v))
        for (int w : mesh.cells[c])
          if (mesh.vclass[w] == VertexClass::Interior && (anchor == -1 || w < anchor)) anchor = w;
      if (anchor == -1)
        throw MissingInteriorNeighbour("Neumann vertex " + std::to_string(v) +
                                       " shares no cell with an interior vertex");
      patch.anchor = anchor;
    }
    patch.cells = mesh.vertex_cells(patch.anchor);
    ps.patch_of_vertex[v] = static_cast<int>(ps.patches.size());
    ps.patches.push_back(std::move(patch));
  }
  return ps;
}

}  // namespace pbmix
