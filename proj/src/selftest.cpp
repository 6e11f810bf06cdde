#include "pbmix/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "pbmix/cases.hpp"
#include "pbmix/convergence.hpp"
#include "pbmix/errors.hpp"
#include "pbmix/parallel.hpp"
#include "pbmix/postprocess.hpp"
#include "pbmix/regularizer.hpp"
#include "pbmix/system.hpp"

namespace pbmix {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

Marker all_dirichlet(const Vec2&) { return Marker::Dirichlet; }
Marker right_neumann(const Vec2& m) {
  return m.x > 1.0 - 1e-9 ? Marker::Neumann : Marker::Dirichlet;
}
Marker right_neumann_wide(const Vec2& m) {
  return m.x > 2.0 - 1e-9 ? Marker::Neumann : Marker::Dirichlet;
}

Mesh unit_square(int nx, const MarkerRule& rule) { return generate_structured(nx, {0, 0, 1, 1}, rule); }

// structured mesh with deterministically shifted interior vertices, to keep
// orientation/sign code honest on non-axis-aligned cells
Mesh jiggled_mesh(int nx) {
  Mesh m = unit_square(nx, all_dirichlet);
  Mesh j;
  j.verts = m.verts;
  j.cells = m.cells;
  const double h = 1.0 / nx;
  for (int v = 0; v < m.n_verts(); ++v) {
    if (m.vclass[v] != VertexClass::Interior) continue;
    j.verts[v].x += 0.18 * h * std::sin(7.0 * v + 1.0);
    j.verts[v].y += 0.18 * h * std::cos(13.0 * v + 2.0);
  }
  j.build_topology();
  j.apply_markers(all_dirichlet);
  j.finalize();
  return j;
}

ScalarField random_field(const Mesh& mesh, int k, std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  ScalarField f = ScalarField::zeros(mesh, k);
  for (auto& c : f.coef) c = dist(rng);
  return f;
}

double q_projection_defect(const Mesh& mesh, int k, const ClementWeights& cw,
                           const ScalarField& f) {
  LoadFunctional g = DensityL2{[&](const Vec2& x) {
    for (int c = 0; c < mesh.n_cells(); ++c)
      if (mesh.cell_contains(c, x, 1e-12)) return f.value(c, x);
    return 0.0;
  }};
  ScalarField qf = apply_q(mesh, k, cw, g, {}, QuadSpec{12, nullptr, 5});
  double worst = 0.0;
  for (size_t i = 0; i < f.coef.size(); ++i) worst = std::max(worst, std::abs(qf.coef[i] - f.coef[i]));
  return worst;
}

struct Pipeline {
  std::shared_ptr<Mesh> mesh;
  CoefficientSet coeffs;
  ScalarField qg;
  SaddleSystem sys;
  Solution sol;
  ScalarField post;
};

Pipeline run_pipeline(std::shared_ptr<Mesh> mesh, const CaseDef& cd, int qa, int qe) {
  Pipeline p;
  p.mesh = std::move(mesh);
  p.coeffs.eps = cd.eps;
  p.coeffs.eps_lo = cd.eps_lo;
  p.coeffs.eps_hi = cd.eps_hi;
  p.coeffs.kappa = cd.kappa;
  p.coeffs.u_h = l2_project_vec(*p.mesh, 1, cd.u, qa);
  const ClementWeights cw = compute_weights(*p.mesh);
  const LoadContext ctx = make_load_context(cd.load, *p.mesh);
  p.qg = apply_q(*p.mesh, 0, cw, cd.load, ctx, QuadSpec{qe, cd.quad_refine, 5});
  p.sys = assemble(*p.mesh, 0, p.coeffs, DiscreteSource{&p.qg}, qa);
  apply_bc(p.sys, {cd.psi_d, cd.zeta_n}, 5);
  p.sol = solve(p.sys);
  p.post = postprocess_potential(*p.mesh, 0, p.coeffs, p.sol.zeta, p.sol.psi, qa);
  return p;
}

using CheckFn = std::function<std::pair<bool, std::string>()>;

CheckResult run_check(const std::string& name, const CheckFn& fn) {
  CheckResult r;
  r.name = name;
  try {
    auto [ok, detail] = fn();
    r.passed = ok;
    r.detail = detail;
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  return r;
}

}  // namespace

std::vector<CheckResult> run_selftest() {
  std::vector<CheckResult> results;
  auto add = [&](const std::string& name, const CheckFn& fn) {
    results.push_back(run_check(name, fn));
  };

  add("quadrature-exactness", []() {
    double worst = 0.0;
    for (int d = 0; d <= 12; ++d) {
      const auto& rule = triangle_rule(d);
      double wsum = 0.0;
      for (size_t q = 0; q < rule.weights.size(); ++q) {
        wsum += rule.weights[q];
        if (rule.weights[q] <= 0.0) return std::make_pair(false, std::string("nonpositive weight"));
        for (double l : rule.bary[q])
          if (l <= 0.0 || l >= 1.0) return std::make_pair(false, std::string("point not interior"));
      }
      worst = std::max(worst, std::abs(wsum - 0.5));
      for (int a = 0; a + 0 <= d; ++a)
        for (int b = 0; a + b <= d; ++b) {
          double s = 0.0;
          for (size_t q = 0; q < rule.weights.size(); ++q)
            s += rule.weights[q] * std::pow(rule.bary[q][1], a) * std::pow(rule.bary[q][2], b);
          const double exact = factorial(a) * factorial(b) / factorial(a + b + 2);
          worst = std::max(worst, std::abs(s - exact));
        }
    }
    return std::make_pair(worst <= 1e-13, "max monomial defect " + fmt(worst));
  });

  add("line-rule-exactness", []() {
    double worst = 0.0;
    for (int n = 1; n <= 10; ++n) {
      const auto& lr = line_rule(n);
      for (int p = 0; p <= 2 * n - 1; ++p) {
        double s = 0.0;
        for (size_t q = 0; q < lr.points.size(); ++q) s += lr.weights[q] * std::pow(lr.points[q], p);
        worst = std::max(worst, std::abs(s - 1.0 / (p + 1)));
      }
    }
    return std::make_pair(worst <= 1e-13, "max moment defect " + fmt(worst));
  });

  add("structured-mesh-invariants", []() {
    const Mesh m = unit_square(2, right_neumann);
    if (m.n_verts() != 9 || m.n_cells() != 8 || m.n_facets() != 16)
      return std::make_pair(false, std::string("counts off"));
    if (m.n_verts() - m.n_facets() + m.n_cells() != 1)
      return std::make_pair(false, std::string("Euler relation violated"));
    double area = 0.0;
    for (int c = 0; c < m.n_cells(); ++c) area += m.area(c);
    double worst = std::abs(area - 1.0);
    worst = std::max(worst, std::abs(m.h_max - std::sqrt(0.5)));
    for (int f = 0; f < m.n_facets(); ++f) {
      const auto& fc = m.facets[f];
      const Vec2 n = m.facet_normal(f);
      const Vec2 d = m.facet_midpoint(f) - m.centroid(fc.cell_minus);
      if (dot(n, d) <= 0.0) return std::make_pair(false, std::string("normal orientation broken"));
      if (fc.cell_plus != -1 && fc.cell_plus < fc.cell_minus)
        return std::make_pair(false, std::string("adjacent cell order broken"));
    }
    return std::make_pair(worst <= 1e-12, "area/h defect " + fmt(worst));
  });

  add("refinement-inheritance", []() {
    const Mesh m = unit_square(2, right_neumann);
    const Mesh f = uniform_refine(m);
    if (f.n_cells() != 4 * m.n_cells()) return std::make_pair(false, std::string("cell count"));
    const Mesh direct = unit_square(4, right_neumann);
    if (f.n_verts() != direct.n_verts() || f.n_facets() != direct.n_facets())
      return std::make_pair(false, std::string("refined counts differ from direct generation"));
    int neumann = 0;
    for (const auto& fc : f.facets) {
      if (fc.cell_plus != -1 && fc.marker != Marker::None)
        return std::make_pair(false, std::string("interior facet marked"));
      if (fc.cell_plus == -1) {
        const bool right = f.facet_midpoint(&fc - f.facets.data()).x > 1.0 - 1e-9;
        if (right != (fc.marker == Marker::Neumann))
          return std::make_pair(false, std::string("marker not inherited"));
        neumann += fc.marker == Marker::Neumann ? 1 : 0;
      }
    }
    return std::make_pair(neumann == 4, std::string("neumann facets ") + std::to_string(neumann));
  });

  add("mesh-io-roundtrip", []() {
    const Mesh m = jiggled_mesh(3);
    const std::string text = write_mesh_string(m);
    const Mesh back = read_mesh_string(text);
    if (write_mesh_string(back) != text)
      return std::make_pair(false, std::string("round trip not byte-stable"));
    try {
      read_mesh_string("pbmix-mesh 2\n");
      return std::make_pair(false, std::string("bad header accepted"));
    } catch (const ParseError&) {
    }
    return std::make_pair(true, std::string("ok"));
  });

  add("rt0-flux-duality", []() {
    const Mesh m = jiggled_mesh(3);
    const auto& lr = line_rule(4);
    double worst = 0.0;
    for (int c = 0; c < m.n_cells(); ++c)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          const int fj = m.cell_facets[c][j];
          const Vec2 a = m.verts[m.facets[fj].v0], b = m.verts[m.facets[fj].v1];
          const Vec2 n = m.facet_normal(fj);
          double s = 0.0;
          for (size_t q = 0; q < lr.points.size(); ++q)
            s += lr.weights[q] * m.facet_length(fj) *
                 dot(rt0_eval(m, c, i, a + (b - a) * lr.points[q]), n);
          worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
        }
    const FluxField constant = rt0_interpolate(m, [](const Vec2&) { return Vec2{0.7, -0.3}; });
    for (int c = 0; c < m.n_cells(); ++c) {
      const Vec2 v = constant.value(c, m.centroid(c));
      worst = std::max({worst, std::abs(v.x - 0.7), std::abs(v.y + 0.3), std::abs(constant.div(c))});
    }
    return std::make_pair(worst <= 1e-12, "max defect " + fmt(worst));
  });

  add("projection-identities", []() {
    const Mesh m = jiggled_mesh(3);
    const ScalarField cx = l2_project(m, 0, [](const Vec2& p) { return p.x; }, 4);
    double worst = 0.0;
    for (int c = 0; c < m.n_cells(); ++c) worst = std::max(worst, std::abs(cx.at(c, 0) - m.centroid(c).x));
    // projecting a P1 field reproduces it pointwise
    const ScalarField lin = l2_project(m, 1, [](const Vec2& p) { return 2.0 * p.x - 3.0 * p.y + 0.5; }, 6);
    for (int c = 0; c < m.n_cells(); ++c) {
      const Vec2 x = m.centroid(c) + Vec2{0.01, -0.02};
      worst = std::max(worst, std::abs(lin.value(c, x) - (2.0 * x.x - 3.0 * x.y + 0.5)));
    }
    return std::make_pair(worst <= 1e-12, "max defect " + fmt(worst));
  });

  add("hat-and-bubble-identities", []() {
    const Mesh m = jiggled_mesh(3);
    double worst = 0.0;
    for (int c = 0; c < m.n_cells(); ++c) {
      const Vec2 x = m.centroid(c) * 0.9 + m.verts[m.cells[c][0]] * 0.1;
      double s = 0.0;
      for (int v : m.cells[c]) s += hat_value(m, c, v, x);
      worst = std::max(worst, std::abs(s - 1.0));
      const auto dual0 = dual_bubble(m, c, 0);
      worst = std::max(worst, std::abs(dual_bubble_value(m, c, dual0, 0, x) -
                                       60.0 * bubble_value(m, c, x) / m.area(c)));
      const auto dual1 = dual_bubble(m, c, 1);
      const auto& rule = triangle_rule(5);
      double gram[3][3] = {};
      double mm[3];
      for_each_qp(m, c, rule, false, [&](const Vec2& p, double w) {
        pk_eval(m, c, 1, p, mm);
        for (int j = 0; j < 3; ++j)
          for (int i = 0; i < 3; ++i) gram[j][i] += w * dual_bubble_value(m, c, dual1, j, p) * mm[i];
      });
      for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(gram[j][i] - (i == j ? 1.0 : 0.0)));
    }
    return std::make_pair(worst <= 1e-12, "max defect " + fmt(worst));
  });

  add("load-actions", []() {
    const Mesh m = unit_square(2, all_dirichlet);
    int center = -1;
    for (int v = 0; v < m.n_verts(); ++v)
      if (dist(m.verts[v], {0.5, 0.5}) < 1e-12) center = v;
    const LoadFunctional one = DensityL2{[](const Vec2&) { return 1.0; }};
    const double act = eval_load(one, m, {}, hat_testfn(m, center), QuadSpec{4, nullptr, 5});
    double worst = std::abs(act - 0.25);  // patch area 0.75, hat integrates to a third of it
    int facet = -1;
    for (int f = 0; f < m.n_facets(); ++f) {
      const Vec2 a = m.verts[m.facets[f].v0], b = m.verts[m.facets[f].v1];
      if (norm(a) < 1e-12 && dist(b, {0.0, 0.5}) < 1e-12) facet = f;
      if (norm(b) < 1e-12 && dist(a, {0.0, 0.5}) < 1e-12) facet = f;
    }
    const double moment =
        dirichlet_moment(m, facet, [](const Vec2& p) { return std::sin(kPi * p.y); }, 5);
    worst = std::max(worst, std::abs(moment - 2.0 / kPi));
    return std::make_pair(worst <= 1e-10, "max defect " + fmt(worst));
  });

  add("dirac-segment-partition", []() {
    const Mesh m = unit_square(3, all_dirichlet);
    const LineDirac gamma{{0.1, 0.05}, {0.9, 0.55}, 1.0};
    const LoadContext ctx = make_load_context(gamma, m);
    double len = 0.0;
    for (const auto& seg : ctx.line) len += dist(seg.a, seg.b);
    double worst = std::abs(len - dist(gamma.a, gamma.b));

    const Mesh m2 = unit_square(2, all_dirichlet);
    const LineDirac edge{{0.5, 0.5}, {1.0, 1.0}, 1.0};
    const LoadContext ctx2 = make_load_context(edge, m2);
    int center = -1;
    for (int v = 0; v < m2.n_verts(); ++v)
      if (dist(m2.verts[v], {0.5, 0.5}) < 1e-12) center = v;
    const double act = eval_load(edge, m2, ctx2, hat_testfn(m2, center), QuadSpec{});
    worst = std::max(worst, std::abs(act - 0.5 * std::sqrt(0.5)));
    // bubble duals vanish on cell boundaries, so an edge-aligned segment
    // sees exactly zero
    for (int c = 0; c < m2.n_cells(); ++c) {
      const auto dual = dual_bubble(m2, c, 0);
      worst = std::max(worst, std::abs(eval_load(edge, m2, ctx2, dual_bubble_testfn(m2, c, dual, 0), QuadSpec{})));
    }
    return std::make_pair(worst <= 1e-12, "max defect " + fmt(worst));
  });

  add("patch-weight-constraints", []() {
    const Mesh m = unit_square(2, all_dirichlet);
    const ClementWeights cw = compute_weights(m);
    double worst = 0.0;
    for (size_t p = 0; p < cw.patches.patches.size(); ++p)
      if (cw.patches.patches[p].cells.size() == 6)
        for (double a : cw.alpha[p]) worst = std::max(worst, std::abs(a - 1.0 / 6.0));
    // mixed markers: every Neumann vertex must borrow an interior patch
    const Mesh mn = unit_square(4, right_neumann);
    const ClementWeights cwn = compute_weights(mn);
    for (const auto& patch : cwn.patches.patches) {
      if (mn.vclass[patch.vertex] == VertexClass::Neumann &&
          mn.vclass[patch.anchor] != VertexClass::Interior)
        return std::make_pair(false, std::string("redirected anchor not interior"));
    }
    compute_weights(generate_structured(6, {0, 0, 2, 1}, right_neumann_wide, 3));
    return std::make_pair(worst <= 1e-12, "uniform-weight defect " + fmt(worst));
  });

  add("regulariser-projection", []() {
    std::mt19937 rng(7);
    double worst = 0.0;
    const Mesh meshes[] = {unit_square(3, all_dirichlet), unit_square(4, right_neumann),
                           generate_structured(6, {0, 0, 2, 1}, right_neumann_wide, 3)};
    for (const Mesh& m : meshes) {
      const ClementWeights cw = compute_weights(m);
      for (int k = 0; k <= 1; ++k)
        for (int rep = 0; rep < 3; ++rep)
          worst = std::max(worst, q_projection_defect(m, k, cw, random_field(m, k, rng)));
    }
    return std::make_pair(worst <= 1e-11, "max coefficient defect " + fmt(worst));
  });

  add("regulariser-constant-and-dirac", []() {
    const Mesh m = unit_square(4, right_neumann);
    const ClementWeights cw = compute_weights(m);
    const ScalarField q1 =
        apply_q(m, 0, cw, DensityL2{[](const Vec2&) { return 1.0; }}, {}, QuadSpec{});
    double worst = 0.0;
    for (int c = 0; c < m.n_cells(); ++c) worst = std::max(worst, std::abs(q1.at(c, 0) - 1.0));

    int z = -1;
    for (int v = 0; v < m.n_verts(); ++v)
      if (m.vclass[v] == VertexClass::Interior) { z = v; break; }
    const LoadFunctional dirac = PointDirac{m.verts[z], 1.0};
    const LoadContext ctx = make_load_context(dirac, m);
    const ScalarField qd = apply_q(m, 0, cw, dirac, ctx, QuadSpec{});
    const int p = cw.patches.patch_of_vertex[z];
    ScalarField expected = ScalarField::zeros(m, 0);
    const auto& patch = cw.patches.patches[p];
    for (size_t i = 0; i < patch.cells.size(); ++i)
      expected.at(patch.cells[i], 0) = cw.alpha[p][i] / m.area(patch.cells[i]);
    for (int c = 0; c < m.n_cells(); ++c)
      worst = std::max(worst, std::abs(qd.at(c, 0) - expected.at(c, 0)));
    return std::make_pair(worst <= 1e-12, "max defect " + fmt(worst));
  });

  add("regulariser-adjoint-duality", []() {
    std::mt19937 rng(11);
    const Mesh m = unit_square(4, right_neumann);
    const ClementWeights cw = compute_weights(m);
    auto v = [](const Vec2& p) { return std::sin(1.7 * p.x + 0.3) * std::cos(1.1 * p.y); };
    double worst = 0.0;
    for (int k = 0; k <= 1; ++k) {
      const ScalarField f = random_field(m, k, rng);
      LoadFunctional g = DensityL2{[&](const Vec2& x) {
        for (int c = 0; c < m.n_cells(); ++c)
          if (m.cell_contains(c, x, 1e-12)) return f.value(c, x);
        return 0.0;
      }};
      const ScalarField qf = apply_q(m, k, cw, g, {}, QuadSpec{12, nullptr, 5});
      const ScalarField qtv = apply_q_adjoint(m, k, cw, v, QuadSpec{12, nullptr, 5});
      const auto& rule = triangle_rule(12);
      double lhs = 0.0, rhs = 0.0;
      for (int c = 0; c < m.n_cells(); ++c)
        for_each_qp(m, c, rule, false, [&](const Vec2& x, double w) {
          lhs += w * qf.value(c, x) * v(x);
          rhs += w * f.value(c, x) * qtv.value(c, x);
        });
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    return std::make_pair(worst <= 1e-10, "duality gap " + fmt(worst));
  });

  add("adjoint-approximation-order", []() {
    auto phi = [](const Vec2& p) { return std::sin(kPi * p.x) * std::sin(kPi * p.y); };
    double prev = 0.0;
    double worst_eoc = 10.0;
    for (int lvl = 0; lvl < 3; ++lvl) {
      const int nx = 4 << lvl;
      const Mesh m = unit_square(nx, all_dirichlet);
      const ClementWeights cw = compute_weights(m);
      const ScalarField qtphi = apply_q_adjoint(m, 0, cw, phi, QuadSpec{12, nullptr, 5});
      const double err = lp_norm_cellwise(m, 12, 2.0, nullptr, [&](int c, const Vec2& x) {
        return phi(x) - qtphi.value(c, x);
      });
      if (lvl > 0) worst_eoc = std::min(worst_eoc, std::log(prev / err) / std::log(2.0));
      prev = err;
    }
    return std::make_pair(worst_eoc >= 0.9, "min eoc " + fmt(worst_eoc));
  });

  add("constant-solution-pipeline", []() {
    CaseDef cd;
    cd.eps = [](const Vec2&) { return 1.0; };
    cd.eps_lo = cd.eps_hi = 1.0;
    cd.kappa = [](const Vec2&) { return 1.0; };
    cd.u = [](const Vec2&) { return Vec2{0, 0}; };
    cd.load = DensityL2{[](const Vec2&) { return 1.0; }};
    cd.psi_d = [](const Vec2&) { return 1.0; };
    cd.zeta_n = [](const Vec2&) { return 0.0; };
    auto mesh = std::make_shared<Mesh>(unit_square(3, right_neumann));
    const Pipeline p = run_pipeline(mesh, cd, 6, 8);
    double worst = 0.0;
    for (int c = 0; c < mesh->n_cells(); ++c) {
      worst = std::max(worst, std::abs(p.sol.psi.at(c, 0) - 1.0));
      worst = std::max(worst, std::abs(p.post.value(c, mesh->centroid(c)) - 1.0));
    }
    for (double z : p.sol.zeta.coef) worst = std::max(worst, std::abs(z));
    return std::make_pair(worst <= 1e-10, "max defect " + fmt(worst));
  });

  add("discrete-equation-residuals", []() {
    const CaseDef cd = builtin_case("ex1-smooth");
    auto mesh = std::make_shared<Mesh>(uniform_refine(cd.start_mesh()));
    const Pipeline p = run_pipeline(mesh, cd, 6, 12);
    const Mesh& m = *mesh;
    const auto& rule = triangle_rule(9);
    double worst = 0.0;
    // scalar equation, re-integrated without the assembled matrix
    for (int c = 0; c < m.n_cells(); ++c) {
      double b = p.sol.zeta.div(c) * m.area(c);
      double cc = 0.0, g = 0.0;
      for_each_qp(m, c, rule, false, [&](const Vec2& x, double w) {
        cc += w * cd.kappa(x) * p.sol.psi.value(c, x);
        g += -w * p.qg.value(c, x);
      });
      worst = std::max(worst, std::abs(b - cc - g));
    }
    // flux equation on free dofs, Dirichlet data re-integrated at higher order
    std::vector<double> resid(m.n_facets(), 0.0);
    for (int c = 0; c < m.n_cells(); ++c)
      for_each_qp(m, c, rule, false, [&](const Vec2& x, double w) {
        const Vec2 z = p.sol.zeta.value(c, x);
        const Vec2 uh = p.coeffs.u_h.value(c, x);
        const double psi = p.sol.psi.value(c, x);
        for (int i = 0; i < 3; ++i) {
          const Vec2 phi = rt0_eval(m, c, i, x);
          resid[m.cell_facets[c][i]] +=
              w * (dot(phi, z) + psi * rt0_div(m, c, i) + dot(uh, phi) * psi);
        }
      });
    for (int f = 0; f < m.n_facets(); ++f) {
      if (p.sys.flux_constrained[f]) continue;
      double rhs = 0.0;
      if (m.facets[f].cell_plus == -1 && m.facets[f].marker == Marker::Dirichlet)
        rhs = dirichlet_moment(m, f, cd.psi_d, 10);
      worst = std::max(worst, std::abs(resid[f] - rhs));
    }
    return std::make_pair(worst <= 1e-9, "max residual " + fmt(worst));
  });

  add("postprocess-local-identities", []() {
    std::mt19937 rng(3);
    const Mesh m = jiggled_mesh(3);
    CoefficientSet coeffs;
    coeffs.eps = [](const Vec2&) { return 1.0; };
    coeffs.kappa = [](const Vec2&) { return 1.0; };
    coeffs.u_h = VectorField::zeros(m, 1);
    ScalarField psi = random_field(m, 0, rng);
    FluxField zeta = FluxField::zeros(m);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (auto& c : zeta.coef) c = unif(rng);
    const ScalarField post = postprocess_potential(m, 0, coeffs, zeta, psi, 6);
    double worst = 0.0;
    for (int c = 0; c < m.n_cells(); ++c) {
      // mean constraint
      const auto& rule = triangle_rule(4);
      double mean = 0.0;
      for_each_qp(m, c, rule, false,
                  [&](const Vec2& x, double w) { mean += w * (post.value(c, x) - psi.value(c, x)); });
      worst = std::max(worst, std::abs(mean) / m.area(c));
      // with eps = 1 the recovered gradient is the cell average of zeta
      Vec2 gsum{0, 0};
      for_each_qp(m, c, rule, false,
                  [&](const Vec2& x, double w) { gsum += zeta.value(c, x) * w; });
      gsum = gsum / m.area(c);
      Vec2 gm[3];
      pk_grad(m, c, 1, m.centroid(c), gm);
      Vec2 grad{0, 0};
      for (int j = 0; j < 3; ++j) grad += gm[j] * post.at(c, j);
      worst = std::max(worst, dist(grad, gsum));
    }
    // locality: perturbing one facet coefficient only touches its cells
    FluxField zeta2 = zeta;
    int pf = -1;
    for (int f = 0; f < m.n_facets(); ++f)
      if (m.facets[f].cell_plus != -1) { pf = f; break; }
    zeta2.coef[pf] += 1.0;
    const ScalarField post2 = postprocess_potential(m, 0, coeffs, zeta2, psi, 6);
    for (int c = 0; c < m.n_cells(); ++c) {
      const bool touched = c == m.facets[pf].cell_minus || c == m.facets[pf].cell_plus;
      double diff = 0.0;
      for (int j = 0; j < 3; ++j) diff = std::max(diff, std::abs(post2.at(c, j) - post.at(c, j)));
      if (!touched && diff > 1e-13) return std::make_pair(false, std::string("nonlocal update"));
      if (touched && diff == 0.0) return std::make_pair(false, std::string("adjacent cell unchanged"));
    }
    return std::make_pair(worst <= 1e-11, "max defect " + fmt(worst));
  });

  add("case-definitions", []() {
    const CaseDef ex1 = builtin_case("ex1-smooth");
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> unif(0.05, 0.95);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
      const Vec2 p{unif(rng), unif(rng)};
      const double step = 1e-6;
      const double div = (ex1.u({p.x + step, p.y}).x - ex1.u({p.x - step, p.y}).x +
                          ex1.u({p.x, p.y + step}).y - ex1.u({p.x, p.y - step}).y) /
                         (2 * step);
      worst = std::max(worst, std::abs(div));
    }
    builtin_case("ex2");  // construction runs the finite-difference cross-check
    const CaseDef rough = builtin_case("ex1-rough");
    worst = std::max(worst, std::abs(rough.psi_ex({0.37, 0.37})));
    try {
      builtin_case("nope");
      return std::make_pair(false, std::string("unknown case accepted"));
    } catch (const UnknownCase&) {
    }
    return std::make_pair(worst <= 1e-5, "max defect " + fmt(worst));
  });

  add("determinism", []() {
    RunConfig rc;
    rc.case_name = "ex1-smooth";
    rc.levels = 2;
    const int saved = thread_count();
    rc.threads = 1;
    const std::string a = run_convergence(rc).csv();
    rc.threads = 4;
    const std::string b = run_convergence(rc).csv();
    const std::string c = run_convergence(rc).csv();
    set_thread_count(saved);
    return std::make_pair(a == b && b == c, std::string(a == b ? "byte-identical" : "thread-count dependent"));
  });

  add("eoc-recomputation", []() {
    RunConfig rc;
    rc.case_name = "ex1-smooth";
    rc.levels = 3;
    const ConvergenceReport rep = run_convergence(rc);
    double worst = 0.0;
    for (size_t i = 1; i < rep.rows.size(); ++i) {
      const double expect = eoc(rep.rows[i - 1].err.e_psi_l4, rep.rows[i].err.e_psi_l4,
                                rep.rows[i - 1].h, rep.rows[i].h);
      worst = std::max(worst, std::abs(expect - *rep.rows[i].eoc_psi));
    }
    return std::make_pair(worst <= 1e-13, "max defect " + fmt(worst));
  });

  return results;
}

}  // namespace pbmix
