#include "pbmix/loads.hpp"

#include <algorithm>
#include <cmath>

#include "pbmix/errors.hpp"
#include "pbmix/quadrature.hpp"

namespace pbmix {

namespace {

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double len2 = dot(d, d);
  double t = len2 > 0.0 ? dot(p - a, d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return dist(p, a + d * t);
}

// parametric clip of segment a-b against one ccw cell; returns false if the
// overlap is empty
bool clip_segment(const Mesh& mesh, int cell, const Vec2& a, const Vec2& b, double& t0,
                  double& t1) {
  t0 = 0.0;
  t1 = 1.0;
  const auto& t = mesh.cells[cell];
  for (int i = 0; i < 3; ++i) {
    const Vec2 p = mesh.verts[t[i]];
    const Vec2 e = mesh.verts[t[(i + 1) % 3]] - p;
    // snap near-zero cross products so segments lying on an edge count as
    // inside for both adjacent cells (the owner rule picks one)
    const double tol = 1e-12 * norm(e) * (norm(a - p) + norm(b - p) + 1.0);
    double da = cross(e, a - p);
    double db = cross(e, b - p);
    if (std::abs(da) <= tol) da = 0.0;
    if (std::abs(db) <= tol) db = 0.0;
    if (da < 0.0 && db < 0.0) return false;
    if (da >= 0.0 && db >= 0.0) continue;
    const double ts = da / (da - db);
    if (da < 0.0)
      t0 = std::max(t0, ts);
    else
      t1 = std::min(t1, ts);
  }
  return t0 < t1 - 1e-14;
}

}  // namespace

LoadContext make_load_context(const LoadFunctional& g, const Mesh& mesh) {
  LoadContext ctx;
  if (const auto* line = std::get_if<LineDirac>(&g)) {
    const Vec2 a = line->a, b = line->b;
    if (dist(a, b) < 1e-14) throw InvariantViolation("zero-length Dirac segment");
    const double lox = std::min(a.x, b.x) - 1e-12, hix = std::max(a.x, b.x) + 1e-12;
    const double loy = std::min(a.y, b.y) - 1e-12, hiy = std::max(a.y, b.y) + 1e-12;
    struct Interval {
      int cell;
      double t0, t1;
    };
    std::vector<Interval> intervals;
    std::vector<double> cuts{0.0, 1.0};
    for (int c = 0; c < mesh.n_cells(); ++c) {
      const auto& t = mesh.cells[c];
      double cx0 = mesh.verts[t[0]].x, cx1 = cx0, cy0 = mesh.verts[t[0]].y, cy1 = cy0;
      for (int i = 1; i < 3; ++i) {
        cx0 = std::min(cx0, mesh.verts[t[i]].x);
        cx1 = std::max(cx1, mesh.verts[t[i]].x);
        cy0 = std::min(cy0, mesh.verts[t[i]].y);
        cy1 = std::max(cy1, mesh.verts[t[i]].y);
      }
      if (cx1 < lox || cx0 > hix || cy1 < loy || cy0 > hiy) continue;
      double t0, t1;
      if (!clip_segment(mesh, c, a, b, t0, t1)) continue;
      intervals.push_back({c, t0, t1});
      cuts.push_back(t0);
      cuts.push_back(t1);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double x, double y) { return std::abs(x - y) < 1e-13; }),
               cuts.end());
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double tm = 0.5 * (cuts[i] + cuts[i + 1]);
      if (tm < 0.0 || tm > 1.0) continue;
      int owner = -1;
      for (const auto& iv : intervals)
        if (iv.t0 - 1e-12 <= tm && tm <= iv.t1 + 1e-12 && (owner == -1 || iv.cell < owner))
          owner = iv.cell;
      if (owner == -1)
        throw InvariantViolation("Dirac segment leaves the mesh");
      ctx.line.push_back({owner, a + (b - a) * cuts[i], a + (b - a) * cuts[i + 1]});
    }
  } else if (const auto* pt = std::get_if<PointDirac>(&g)) {
    const double tol = 1e-12 * std::max(mesh.h_max, 1.0);
    for (const auto& f : mesh.facets) {
      if (f.marker != Marker::Dirichlet) continue;
      if (point_segment_distance(pt->x0, mesh.verts[f.v0], mesh.verts[f.v1]) < tol)
        throw PointOnDirichletBoundary("Dirac point sits on the Dirichlet boundary");
    }
    for (int c = 0; c < mesh.n_cells(); ++c)
      if (mesh.cell_contains(c, pt->x0, 1e-10)) ctx.point_cells.push_back(c);
    if (ctx.point_cells.empty()) throw InvariantViolation("Dirac point outside the mesh");
  }
  return ctx;
}

double eval_load(const LoadFunctional& g, const Mesh& mesh, const LoadContext& ctx,
                 const TestFn& v, const QuadSpec& quad) {
  if (const auto* density = std::get_if<DensityL2>(&g)) {
    const auto& rule = triangle_rule(quad.degree);
    double s = 0.0;
    for (int c : v.cells) {
      const bool ref = quad.refine && quad.refine(mesh, c);
      for_each_qp(mesh, c, rule, ref,
                  [&](const Vec2& x, double w) { s += w * density->f(x) * v.value(c, x); });
    }
    return s;
  }
  if (const auto* wf = std::get_if<WeakFormLoad>(&g)) {
    const auto& rule = triangle_rule(quad.degree);
    double s = 0.0;
    for (int c : v.cells) {
      const bool ref = quad.refine && quad.refine(mesh, c);
      for_each_qp(mesh, c, rule, ref, [&](const Vec2& x, double w) {
        const double psi = wf->psi(x);
        const Vec2 zeta = wf->grad_psi(x) * wf->eps(x) - wf->u(x) * psi;
        s += w * (wf->kappa(x) * psi * v.value(c, x) + dot(zeta, v.grad(c, x)));
      });
      // subtract the Neumann pairing so the action matches <g, v> for v that
      // need not vanish on the Neumann part
      for (int i = 0; i < 3; ++i) {
        const int fi = mesh.cell_facets[c][i];
        const Facet& f = mesh.facets[fi];
        if (f.cell_plus != -1 || f.marker != Marker::Neumann) continue;
        if (!wf->zeta_n) throw InvariantViolation("Neumann facet but no normal-trace datum");
        const auto& lr = line_rule(quad.line_points);
        const Vec2 a = mesh.verts[f.v0], b = mesh.verts[f.v1];
        const double len = mesh.facet_length(fi);
        for (size_t q = 0; q < lr.points.size(); ++q) {
          const Vec2 x = a + (b - a) * lr.points[q];
          s -= lr.weights[q] * len * wf->zeta_n(x) * v.value(c, x);
        }
      }
    }
    return s;
  }
  if (const auto* line = std::get_if<LineDirac>(&g)) {
    const auto& lr = line_rule(quad.line_points);
    double s = 0.0;
    for (const auto& seg : ctx.line) {
      if (std::find(v.cells.begin(), v.cells.end(), seg.cell) == v.cells.end()) continue;
      const double len = dist(seg.a, seg.b);
      for (size_t q = 0; q < lr.points.size(); ++q)
        s += lr.weights[q] * len * v.value(seg.cell, seg.a + (seg.b - seg.a) * lr.points[q]);
    }
    return s * line->intensity;
  }
  const auto& pt = std::get<PointDirac>(g);
  for (int c : ctx.point_cells)
    if (std::find(v.cells.begin(), v.cells.end(), c) != v.cells.end())
      return pt.weight * v.value(c, pt.x0);
  return 0.0;
}

TestFn hat_testfn(const Mesh& mesh, int vertex) {
  TestFn fn;
  fn.cells = mesh.vertex_cells(vertex);
  auto support = fn.cells;
  fn.value = [&mesh, vertex, support](int c, const Vec2& x) {
    if (std::find(support.begin(), support.end(), c) == support.end()) return 0.0;
    return hat_value(mesh, c, vertex, x);
  };
  fn.grad = [&mesh, vertex, support](int c, const Vec2& x) {
    (void)x;
    if (std::find(support.begin(), support.end(), c) == support.end()) return Vec2{0, 0};
    return hat_grad(mesh, c, vertex);
  };
  return fn;
}

TestFn dual_bubble_testfn(const Mesh& mesh, int cell, const DualBubbleBasis& dual, int j) {
  TestFn fn;
  fn.cells = {cell};
  fn.value = [&mesh, cell, &dual, j](int c, const Vec2& x) {
    return c == cell ? dual_bubble_value(mesh, cell, dual, j, x) : 0.0;
  };
  fn.grad = [&mesh, cell, &dual, j](int c, const Vec2& x) {
    return c == cell ? dual_bubble_grad(mesh, cell, dual, j, x) : Vec2{0, 0};
  };
  return fn;
}

TestFn pk_basis_testfn(const Mesh& mesh, int cell, int k, int j) {
  TestFn fn;
  fn.cells = {cell};
  fn.value = [&mesh, cell, k, j](int c, const Vec2& x) {
    if (c != cell) return 0.0;
    double m[28];
    pk_eval(mesh, cell, k, x, m);
    return m[j];
  };
  fn.grad = [&mesh, cell, k, j](int c, const Vec2& x) {
    if (c != cell) return Vec2{0, 0};
    Vec2 gm[28];
    pk_grad(mesh, cell, k, x, gm);
    return gm[j];
  };
  return fn;
}

}  // namespace pbmix
