#include <cmath>
#include <random>

#include "doctest.h"
#include "pbmix/elements.hpp"
#include "pbmix/errors.hpp"

using namespace pbmix;

namespace {

constexpr double kPi = 3.14159265358979323846;

Marker all_d(const Vec2&) { return Marker::Dirichlet; }

Mesh tilted_mesh() {
  // one skewed triangle pair, nothing axis aligned
  Mesh m;
  m.verts = {{0.1, -0.05}, {1.3, 0.2}, {0.9, 1.1}, {-0.2, 0.8}};
  m.cells = {{0, 1, 2}, {0, 2, 3}};
  m.build_topology();
  m.apply_markers(all_d);
  m.finalize();
  return m;
}

}  // namespace

TEST_SUITE("elements") {
  TEST_CASE("monomial basis: first function is 1, gradients match differences") {
    const Mesh m = tilted_mesh();
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int c = 0; c < m.n_cells(); ++c) {
      for (int k : {0, 1, 2, 3}) {
        const int n = pk_dim(k);
        CHECK(n == (k + 1) * (k + 2) / 2);
        std::vector<double> vals(n), vx(n), vy(n);
        std::vector<Vec2> grads(n);
        const Vec2 x{m.centroid(c).x + 0.05 * unif(rng), m.centroid(c).y + 0.05 * unif(rng)};
        const double step = 1e-7;
        pk_eval(m, c, k, x, vals.data());
        CHECK(vals[0] == 1.0);
        pk_grad(m, c, k, x, grads.data());
        pk_eval(m, c, k, {x.x + step, x.y}, vx.data());
        pk_eval(m, c, k, {x.x, x.y + step}, vy.data());
        for (int j = 0; j < n; ++j) {
          CHECK(grads[j].x == doctest::Approx((vx[j] - vals[j]) / step).epsilon(1e-5));
          CHECK(grads[j].y == doctest::Approx((vy[j] - vals[j]) / step).epsilon(1e-5));
        }
      }
    }
  }

  TEST_CASE("hats: kronecker at vertices, partition of unity, constant gradients") {
    const Mesh m = tilted_mesh();
    for (int c = 0; c < m.n_cells(); ++c) {
      for (int vi : m.cells[c])
        for (int vj : m.cells[c])
          CHECK(hat_value(m, c, vi, m.verts[vj]) == doctest::Approx(vi == vj ? 1.0 : 0.0));
      const Vec2 x = m.centroid(c);
      double s = 0.0;
      Vec2 gs{0, 0};
      for (int v : m.cells[c]) {
        s += hat_value(m, c, v, x);
        gs += hat_grad(m, c, v);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(norm(gs) < 1e-13);
    }
  }

  TEST_CASE("bubble integrates to area/60 and vanishes on the boundary") {
    const Mesh m = tilted_mesh();
    const TriangleRule& rule = triangle_rule(3);
    for (int c = 0; c < m.n_cells(); ++c) {
      double s = 0.0;
      for_each_qp(m, c, rule, false, [&](const Vec2& x, double w) { s += w * bubble_value(m, c, x); });
      CHECK(s == doctest::Approx(m.area(c) / 60.0).epsilon(1e-13));
      const Vec2 a = m.verts[m.cells[c][0]], b = m.verts[m.cells[c][1]];
      CHECK(std::abs(bubble_value(m, c, a * 0.3 + b * 0.7)) < 1e-15);
    }
  }

  TEST_CASE("dual bubbles: biorthogonal to the monomials") {
    const Mesh m = tilted_mesh();
    for (int c = 0; c < m.n_cells(); ++c) {
      for (int k : {0, 1, 2}) {
        const DualBubbleBasis dual = dual_bubble(m, c, k);
        const int n = pk_dim(k);
        const TriangleRule& rule = triangle_rule(3 + 2 * k);
        std::vector<double> mono(n);
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for_each_qp(m, c, rule, false, [&](const Vec2& x, double w) {
              pk_eval(m, c, k, x, mono.data());
              s += w * dual_bubble_value(m, c, dual, j, x) * mono[i];
            });
            CHECK(s == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
          }
      }
      // k = 0 closed form: 60 * bubble / |K|
      const DualBubbleBasis dual0 = dual_bubble(m, c, 0);
      const Vec2 x = m.centroid(c);
      CHECK(dual_bubble_value(m, c, dual0, 0, x) ==
            doctest::Approx(60.0 * bubble_value(m, c, x) / m.area(c)).epsilon(1e-13));
    }
  }

  TEST_CASE("lowest-order flux basis: unit normal moments, constant divergence") {
    const Mesh m = tilted_mesh();
    const LineRule& lr = line_rule(4);
    for (int c = 0; c < m.n_cells(); ++c)
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          const int fj = m.cell_facets[c][j];
          const Vec2 a = m.verts[m.facets[fj].v0], b = m.verts[m.facets[fj].v1];
          double s = 0.0;
          for (size_t q = 0; q < lr.points.size(); ++q)
            s += lr.weights[q] * m.facet_length(fj) *
                 dot(rt0_eval(m, c, i, a + (b - a) * lr.points[q]), m.facet_normal(fj));
          CHECK(s == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-13));
        }
        // divergence theorem on the cell: int div = outward normal moment
        CHECK(rt0_div(m, c, i) * m.area(c) ==
              doctest::Approx(static_cast<double>(m.cell_facet_sign[c][i])).epsilon(1e-13));
      }
  }

  TEST_CASE("flux interpolation reproduces constants and respects moments") {
    const Mesh m = generate_structured(3, {0, 0, 1, 1}, all_d);
    const FluxField f = rt0_interpolate(m, [](const Vec2&) { return Vec2{1.5, -2.0}; });
    for (int c = 0; c < m.n_cells(); ++c) {
      const Vec2 v = f.value(c, m.centroid(c));
      CHECK(v.x == doctest::Approx(1.5).epsilon(1e-13));
      CHECK(v.y == doctest::Approx(-2.0).epsilon(1e-13));
      CHECK(f.div(c) == doctest::Approx(0.0).epsilon(1e-12));
    }
    // a linear field: facet normal moments of the interpolant match the field
    auto lin = [](const Vec2& p) { return Vec2{2.0 * p.x + p.y, -3.0 * p.y}; };
    const FluxField g = rt0_interpolate(m, lin);
    const LineRule& lr = line_rule(4);
    for (int fi = 0; fi < m.n_facets(); ++fi) {
      const Vec2 a = m.verts[m.facets[fi].v0], b = m.verts[m.facets[fi].v1];
      double s = 0.0;
      for (size_t q = 0; q < lr.points.size(); ++q)
        s += lr.weights[q] * m.facet_length(fi) *
             dot(lin(a + (b - a) * lr.points[q]), m.facet_normal(fi));
      CHECK(g.coef[fi] == doctest::Approx(s).epsilon(1e-12));
    }
  }

  TEST_CASE("projections reproduce polynomials of matching degree") {
    const Mesh m = tilted_mesh();
    auto f = [](const Vec2& p) { return 0.5 - 2.0 * p.x + 3.0 * p.y; };
    const ScalarField pr = l2_project(m, 1, f, 4);
    const ScalarField pr0 = l2_project(m, 0, f, 4);
    for (int c = 0; c < m.n_cells(); ++c) {
      const Vec2 x = m.centroid(c) * 0.7 + m.verts[m.cells[c][1]] * 0.3;
      CHECK(pr.value(c, x) == doctest::Approx(f(x)).epsilon(1e-13));
      CHECK(pr0.at(c, 0) == doctest::Approx(f(m.centroid(c))).epsilon(1e-13));
    }
    const VectorField vf = l2_project_vec(
        m, 1, [](const Vec2& p) { return Vec2{p.x - p.y, 2.0 * p.y}; }, 4);
    for (int c = 0; c < m.n_cells(); ++c) {
      const Vec2 x = m.centroid(c);
      CHECK(vf.value(c, x).x == doctest::Approx(x.x - x.y).epsilon(1e-13));
      CHECK(vf.value(c, x).y == doctest::Approx(2.0 * x.y).epsilon(1e-13));
    }
  }

  TEST_CASE("cellwise norms against closed forms") {
    const Mesh m = generate_structured(16, {0, 0, 1, 1}, all_d);
    auto f = [](int, const Vec2& p) { return std::sin(kPi * p.x) * std::sin(kPi * p.y); };
    // int sin^2 = 1/4 per axis pair
    CHECK(lp_norm_cellwise(m, 12, 2.0, nullptr, f) == doctest::Approx(0.5).epsilon(1e-12));
    // int sin^4 = 3/8 per axis, so the fourth-power integral is 9/64
    CHECK(lp_norm_cellwise(m, 12, 4.0, nullptr, f) ==
          doctest::Approx(std::pow(9.0 / 64.0, 0.25)).epsilon(1e-12));
    auto g = [](int, const Vec2& p) { return p.x * p.x * p.x; };
    // |x^3|^(4/3) = x^4 integrates to 1/5 over the square
    CHECK(lp_norm_cellwise(m, 12, 4.0 / 3.0, nullptr, g) ==
          doctest::Approx(std::pow(0.2, 0.75)).epsilon(1e-12));
  }

  TEST_CASE("quadrature sweep weights sum to the cell area, with and without subdivision") {
    const Mesh m = tilted_mesh();
    const TriangleRule& rule = triangle_rule(4);
    for (int c = 0; c < m.n_cells(); ++c)
      for (bool refine : {false, true}) {
        double s = 0.0, sx = 0.0;
        for_each_qp(m, c, rule, refine, [&](const Vec2& x, double w) {
          s += w;
          sx += w * x.x * x.x;  // degree 2, must be identical either way
        });
        CHECK(s == doctest::Approx(m.area(c)).epsilon(1e-14));
        const TriangleRule& r2 = triangle_rule(2);
        double sx2 = 0.0;
        for_each_qp(m, c, r2, false, [&](const Vec2& x, double w) { sx2 += w * x.x * x.x; });
        CHECK(sx == doctest::Approx(sx2).epsilon(1e-13));
      }
  }

  TEST_CASE("dof bookkeeping matches the reported problem sizes") {
    const Mesh m2 = generate_structured(2, {0, 0, 1, 1}, all_d);
    CHECK(make_dofmap(m2, 0).n_total() == 24);
    CHECK(make_dofmap(m2, 1).n_total() == 16 + 8 * 3);
    const Mesh m128 = generate_structured(128, {0, 0, 1, 1}, all_d);
    CHECK(make_dofmap(m128, 0).n_total() == 82176);
    CHECK_THROWS_AS(make_dofmap(m2, kMaxDegree), UnsupportedOrder);
  }
}
