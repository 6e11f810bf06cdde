// Acceptance gate: full refinement studies plus the independent-oracle checks,
// one line per criterion. The last criterion is advisory (no exact solution,
// reference-based orders wobble more) and does not affect the exit code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pbmix/convergence.hpp"
#include "pbmix/errors.hpp"
#include "pbmix/postprocess.hpp"
#include "pbmix/regularizer.hpp"
#include "pbmix/system.hpp"

using namespace pbmix;

namespace {

constexpr double kPi = 3.14159265358979323846;

Marker all_d(const Vec2&) { return Marker::Dirichlet; }
Marker right_n(const Vec2& m) {
  return m.x > 1.0 - 1e-9 ? Marker::Neumann : Marker::Dirichlet;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double get(const std::optional<double>& o) {
  return o ? *o : std::numeric_limits<double>::quiet_NaN();
}

RunConfig study(const std::string& name, int levels, bool use_q = true) {
  RunConfig rc;
  rc.case_name = name;
  rc.levels = levels;
  rc.use_q = use_q;
  return rc;
}

Mesh jiggled(int nx, const MarkerRule& rule) {
  const Mesh m = generate_structured(nx, {0, 0, 1, 1}, rule);
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
  j.apply_markers(rule);
  j.finalize();
  return j;
}

ScalarField random_field(const Mesh& mesh, int k, std::mt19937& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  ScalarField f = ScalarField::zeros(mesh, k);
  for (auto& c : f.coef) c = unif(rng);
  return f;
}

DensityL2 as_density(const Mesh& mesh, const ScalarField& f) {
  return DensityL2{[&mesh, &f](const Vec2& x) {
    for (int c = 0; c < mesh.n_cells(); ++c)
      if (mesh.cell_contains(c, x, 1e-12)) return f.value(c, x);
    return 0.0;
  }};
}

// accumulates "label=value" clauses and window verdicts for one criterion
struct Verdict {
  bool ok = true;
  std::string detail;

  void clause(const std::string& text) {
    if (!detail.empty()) detail += ", ";
    detail += text;
  }
  void expect(const std::string& label, double v, double lo, double hi) {
    clause(label + "=" + fmt(v));
    if (!(v >= lo && v <= hi)) {
      ok = false;
      detail += " outside [" + fmt(lo) + "," + fmt(hi) + "]";
    }
  }
  void check(const std::string& label, bool cond) {
    clause(label + (cond ? "" : " FAILED"));
    ok = ok && cond;
  }
};

// ---------------------------------------------------------------- criteria

// smooth manufactured solution: first-order scalar and flux, second-order
// recovered potential, plus a frozen absolute accuracy pin
Verdict smooth_benchmark_orders() {
  const ConvergenceReport rep = run_convergence(study("ex1-smooth", 7));
  Verdict v;
  for (int l = 4; l <= 7; ++l)
    v.expect("eoc_psi(L" + std::to_string(l) + ")", get(rep.rows[l - 1].eoc_psi), 0.95, 1.05);
  v.expect("eoc_post(L7)", get(rep.rows[6].eoc_post), 1.9, 2.1);
  v.expect("eoc_flux(L7)", get(rep.rows[6].eoc_flux), 0.70, 1.05);
  v.expect("e_psi(L4)", rep.rows[3].err.e_psi_l4, 4.36e-2 * 0.9, 4.36e-2 * 1.1);
  return v;
}

// kinked solution driven through the functional-only load: reduced flux
// order, full scalar order, intermediate recovered-potential order
Verdict rough_load_orders() {
  const ConvergenceReport rep = run_convergence(study("ex1-rough", 7));
  Verdict v;
  v.expect("eoc_flux(L7)", get(rep.rows[6].eoc_flux), 0.20, 0.35);
  v.expect("eoc_psi(L7)", get(rep.rows[6].eoc_psi), 0.90, 1.05);
  v.expect("eoc_post(L7)", get(rep.rows[6].eoc_post), 1.0, 1.5);
  return v;
}

// the load smoothing restores the quadratic recovered-potential rate that
// the plain-density assembly loses on the low-regularity density
Verdict regularisation_effect() {
  const ConvergenceReport with = run_convergence(study("ex2", 7, true));
  const ConvergenceReport plain = run_convergence(study("ex2", 7, false));
  Verdict v;
  v.expect("smoothed_eoc_post(L6)", get(with.rows[5].eoc_post), 1.90, 2.30);
  v.expect("smoothed_eoc_post(L7)", get(with.rows[6].eoc_post), 1.90, 2.30);
  v.expect("smoothed_eoc_psi(L7)", get(with.rows[6].eoc_psi), 0.95, 1.05);
  v.expect("plain_eoc_post(L7)", get(plain.rows[6].eoc_post), 1.50, 1.75);
  v.expect("plain_eoc_psi(L7)", get(plain.rows[6].eoc_psi), 0.95, 1.05);
  v.check("smoothed final e_post below plain", with.rows[6].err.e_post_l2 < plain.rows[6].err.e_post_l2);
  return v;
}

// algebraic identities of the smoothing operator and its adjoint
Verdict smoothing_operator_identities() {
  std::mt19937 rng(2718);
  Verdict v;
  const Mesh meshes[3] = {generate_structured(3, {0, 0, 1, 1}, all_d),
                          generate_structured(4, {0, 0, 1, 1}, right_n), jiggled(5, all_d)};

  double proj = 0.0;
  for (const Mesh& m : meshes) {
    const ClementWeights cw = compute_weights(m);
    for (int k : {0, 1})
      for (int rep = 0; rep < 20; ++rep) {
        const ScalarField f = random_field(m, k, rng);
        const ScalarField qf = apply_q(m, k, cw, as_density(m, f), {}, QuadSpec{12, nullptr, 5});
        for (size_t i = 0; i < f.coef.size(); ++i)
          proj = std::max(proj, std::abs(qf.coef[i] - f.coef[i]));
      }
  }
  v.expect("max|Qp-p| on piecewise polynomials", proj, 0.0, 1e-11);

  {
    const Mesh& m = meshes[1];
    const ClementWeights cw = compute_weights(m);
    const ScalarField q1 =
        apply_q(m, 0, cw, DensityL2{[](const Vec2&) { return 1.0; }}, {}, QuadSpec{});
    double d = 0.0;
    for (int c = 0; c < m.n_cells(); ++c) d = std::max(d, std::abs(q1.at(c, 0) - 1.0));
    v.expect("max|Q1-1|", d, 0.0, 1e-12);
  }

  {
    // a Dirac at a free vertex returns exactly that vertex's weight function
    const Mesh& m = meshes[0];
    const ClementWeights cw = compute_weights(m);
    int z = -1;
    for (int vv = 0; vv < m.n_verts(); ++vv)
      if (m.vclass[vv] == VertexClass::Interior) {
        z = vv;
        break;
      }
    const LoadFunctional dirac = PointDirac{m.verts[z], 1.0};
    const ScalarField qd = apply_q(m, 0, cw, dirac, make_load_context(dirac, m), QuadSpec{});
    const int p = cw.patches.patch_of_vertex[z];
    const auto& patch = cw.patches.patches[p];
    double d = 0.0;
    for (int c = 0; c < m.n_cells(); ++c) {
      double expect = 0.0;
      for (size_t i = 0; i < patch.cells.size(); ++i)
        if (patch.cells[i] == c) expect = cw.alpha[p][i] / m.area(c);
      d = std::max(d, std::abs(qd.at(c, 0) - expect));
    }
    v.expect("max|Q(dirac)-weight_fn|", d, 0.0, 1e-12);
  }

  {
    // <Qf, v> = <f, Q'v> for random discrete f and a fixed smooth v
    const Mesh& m = meshes[1];
    const ClementWeights cw = compute_weights(m);
    auto w = [](const Vec2& p) { return std::sin(1.3 * p.x + 0.7) * std::cos(0.9 * p.y - 0.2); };
    double d = 0.0;
    for (int k : {0, 1}) {
      const ScalarField f = random_field(m, k, rng);
      const ScalarField qf = apply_q(m, k, cw, as_density(m, f), {}, QuadSpec{12, nullptr, 5});
      const ScalarField qtv = apply_q_adjoint(m, k, cw, w, QuadSpec{12, nullptr, 5});
      const TriangleRule& rule = triangle_rule(12);
      double lhs = 0.0, rhs = 0.0;
      for (int c = 0; c < m.n_cells(); ++c)
        for_each_qp(m, c, rule, false, [&](const Vec2& x, double wt) {
          lhs += wt * qf.value(c, x) * w(x);
          rhs += wt * f.value(c, x) * qtv.value(c, x);
        });
      d = std::max(d, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    v.expect("adjoint pairing defect", d, 0.0, 1e-10);
  }

  {
    // (1 - Q') must vanish at first order on a smooth function
    auto phi = [](const Vec2& p) { return std::sin(kPi * p.x) * std::sin(kPi * p.y); };
    double prev = 0.0, worst = std::numeric_limits<double>::infinity();
    for (int lvl = 0; lvl < 3; ++lvl) {
      const Mesh m = generate_structured(4 << lvl, {0, 0, 1, 1}, all_d);
      const ClementWeights cw = compute_weights(m);
      const ScalarField qt = apply_q_adjoint(m, 0, cw, phi, QuadSpec{12, nullptr, 5});
      const double err = lp_norm_cellwise(m, 12, 2.0, nullptr, [&](int c, const Vec2& x) {
        return phi(x) - qt.value(c, x);
      });
      if (lvl > 0) worst = std::min(worst, std::log(prev / err) / std::log(2.0));
      prev = err;
    }
    v.expect("adjoint approximation order", worst, 0.9, 3.0);
  }
  return v;
}

// compatible constant data must be reproduced to solver precision through
// the full pipeline (smoothing, assembly, both boundary paths, recovery)
Verdict constant_solution_exactness() {
  const Mesh m = jiggled(3, right_n);
  CoefficientSet coeffs;
  coeffs.eps = [](const Vec2&) { return 1.0; };
  coeffs.kappa = [](const Vec2&) { return 1.0; };
  coeffs.u_h = VectorField::zeros(m, 1);
  const ClementWeights cw = compute_weights(m);
  const LoadFunctional g = DensityL2{[](const Vec2&) { return 1.0; }};
  const ScalarField qg = apply_q(m, 0, cw, g, make_load_context(g, m), QuadSpec{});
  SaddleSystem sys = assemble(m, 0, coeffs, DiscreteSource{&qg}, 6);
  apply_bc(sys, {[](const Vec2&) { return 1.0; }, [](const Vec2&) { return 0.0; }}, 5);
  const Solution sol = solve(sys);
  const ScalarField post = postprocess_potential(m, 0, coeffs, sol.zeta, sol.psi, 6);

  double worst = 0.0;
  for (int c = 0; c < m.n_cells(); ++c) {
    worst = std::max(worst, std::abs(sol.psi.at(c, 0) - 1.0));
    worst = std::max(worst, std::abs(post.value(c, m.centroid(c)) - 1.0));
    for (int i = 0; i < 3; ++i)
      worst = std::max(worst, std::abs(post.value(c, m.verts[m.cells[c][i]]) - 1.0));
  }
  for (double z : sol.zeta.coef) worst = std::max(worst, std::abs(z));
  Verdict v;
  v.expect("max defect", worst, 0.0, 1e-10);
  return v;
}

// plain Gaussian elimination with partial pivoting, no library calls
std::vector<double> dense_solve(std::vector<std::vector<double>> M, std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(M[r][col]) > std::abs(M[piv][col])) piv = r;
    std::swap(M[piv], M[col]);
    std::swap(b[piv], b[col]);
    if (std::abs(M[col][col]) <= 1e-14) throw SingularSystem("oracle pivot breakdown");
    for (int r = col + 1; r < n; ++r) {
      const double f = M[r][col] / M[col][col];
      for (int c2 = col; c2 < n; ++c2) M[r][c2] -= f * M[col][c2];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c2 = r + 1; c2 < n; ++c2) s -= M[r][c2] * x[c2];
    x[r] = s / M[r][r];
  }
  return x;
}

// global solve and local recovery, each against a from-scratch dense route
Verdict dense_oracle_agreement() {
  Verdict v;

  {
    // two-cell mesh, variable coefficients, inhomogeneous data on both
    // boundary kinds, constant advection
    const Mesh m = generate_structured(1, {0, 0, 1, 1}, right_n);
    auto eps = [](const Vec2& p) { return 2.0 + 0.4 * p.x; };
    auto kappa = [](const Vec2& p) { return 3.0 + p.y; };
    auto g = [](const Vec2& p) { return 1.0 + p.x + 2.0 * p.y; };
    auto psi_d = [](const Vec2& p) { return p.x - 0.5 * p.y; };
    auto zeta_n = [](const Vec2& p) { return 0.7 - 0.2 * p.y; };
    CoefficientSet coeffs;
    coeffs.eps = eps;
    coeffs.eps_lo = 2.0;
    coeffs.eps_hi = 2.4;
    coeffs.kappa = kappa;
    coeffs.u_h = l2_project_vec(m, 1, [](const Vec2&) { return Vec2{0.3, -0.2}; }, 4);

    SaddleSystem sys = assemble(m, 0, coeffs, DensitySource{g, QuadSpec{10, nullptr, 5}}, 10);
    apply_bc(sys, {psi_d, zeta_n}, 8);
    const Solution sol = solve(sys);

    const int nf = 5, n = nf + 2;
    std::vector<std::vector<double>> M(n, std::vector<double>(n, 0.0));
    std::vector<double> rhs(n, 0.0);
    const TriangleRule& rule = triangle_rule(10);
    for (int c = 0; c < 2; ++c) {
      const Vec2 p0 = m.verts[m.cells[c][0]], p1 = m.verts[m.cells[c][1]],
                 p2 = m.verts[m.cells[c][2]];
      const double jac = cross(p1 - p0, p2 - p0);
      for (size_t q = 0; q < rule.weights.size(); ++q) {
        const auto& l = rule.bary[q];
        const Vec2 x{l[0] * p0.x + l[1] * p1.x + l[2] * p2.x,
                     l[0] * p0.y + l[1] * p1.y + l[2] * p2.y};
        const double w = rule.weights[q] * jac;
        const Vec2 u{0.3, -0.2};
        for (int i = 0; i < 3; ++i) {
          const int fi = m.cell_facets[c][i];
          const Vec2 phi_i = rt0_eval(m, c, i, x);
          for (int j = 0; j < 3; ++j)
            M[fi][m.cell_facets[c][j]] += w * dot(phi_i, rt0_eval(m, c, j, x)) / eps(x);
          M[fi][nf + c] += w * rt0_div(m, c, i) + w * dot(u, phi_i) / eps(x);
          M[nf + c][fi] += w * rt0_div(m, c, i);
        }
        M[nf + c][nf + c] -= w * kappa(x);
        rhs[nf + c] -= w * g(x);
      }
    }
    int neumann_facet = -1;
    const LineRule& lr = line_rule(8);
    for (int f = 0; f < nf; ++f) {
      if (m.facets[f].cell_plus != -1) continue;
      const Vec2 a = m.verts[m.facets[f].v0], b = m.verts[m.facets[f].v1];
      if (m.facets[f].marker == Marker::Neumann) {
        neumann_facet = f;
        continue;
      }
      for (size_t q = 0; q < lr.points.size(); ++q)
        rhs[f] += lr.weights[q] * psi_d(a + (b - a) * lr.points[q]);
    }
    double nv = 0.0;
    {
      const Vec2 a = m.verts[m.facets[neumann_facet].v0],
                 b = m.verts[m.facets[neumann_facet].v1];
      for (size_t q = 0; q < lr.points.size(); ++q)
        nv += lr.weights[q] * dist(a, b) * zeta_n(a + (b - a) * lr.points[q]);
    }
    for (int r = 0; r < n; ++r) {
      if (r == neumann_facet) continue;
      rhs[r] -= M[r][neumann_facet] * nv;
      M[r][neumann_facet] = 0.0;
    }
    for (int c2 = 0; c2 < n; ++c2) M[neumann_facet][c2] = 0.0;
    M[neumann_facet][neumann_facet] = 1.0;
    rhs[neumann_facet] = nv;

    const std::vector<double> x = dense_solve(M, rhs);
    double d = 0.0;
    for (int f = 0; f < nf; ++f) d = std::max(d, std::abs(sol.zeta.coef[f] - x[f]));
    for (int c = 0; c < 2; ++c) d = std::max(d, std::abs(sol.psi.at(c, 0) - x[nf + c]));
    v.expect("solve vs dense oracle", d, 0.0, 1e-10);
    v.expect("constrained facet value", std::abs(sol.zeta.coef[neumann_facet] - nv), 0.0, 1e-12);
  }

  {
    // local recovery against the null-space route: eliminate the multiplier,
    // solve the 2x2 gradient system by Cramer, restore the mean afterwards
    const Mesh m = jiggled(3, all_d);
    auto eps = [](const Vec2& p) { return 1.0 + 0.3 * p.x + 0.1 * p.y; };
    CoefficientSet coeffs;
    coeffs.eps = eps;
    coeffs.eps_lo = 0.9;
    coeffs.eps_hi = 1.5;
    coeffs.kappa = [](const Vec2&) { return 1.0; };
    coeffs.u_h = l2_project_vec(m, 1, [](const Vec2& p) { return Vec2{0.4 - 0.2 * p.y, 0.1 * p.x}; }, 4);

    std::mt19937 rng(555);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const TriangleRule& rule = triangle_rule(6);
    double dval = 0.0, dmean = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      FluxField zeta = FluxField::zeros(m);
      for (auto& c : zeta.coef) c = unif(rng);
      ScalarField psi = random_field(m, 0, rng);
      const ScalarField post = postprocess_potential(m, 0, coeffs, zeta, psi, 6);
      for (int c = 0; c < m.n_cells(); ++c) {
        double K11 = 0, K12 = 0, K22 = 0, r1 = 0, r2 = 0, m1 = 0, m2 = 0, area = 0;
        for_each_qp(m, c, rule, false, [&](const Vec2& x, double w) {
          Vec2 gr[3];
          double val[3];
          pk_grad(m, c, 1, x, gr);
          pk_eval(m, c, 1, x, val);
          const double e = eps(x);
          K11 += w * e * dot(gr[1], gr[1]);
          K12 += w * e * dot(gr[1], gr[2]);
          K22 += w * e * dot(gr[2], gr[2]);
          const Vec2 z = zeta.value(c, x);
          const double ps = psi.value(c, x);
          const Vec2 uh = coeffs.u_h.value(c, x);
          r1 += w * (dot(z, gr[1]) + dot(uh, gr[1]) * ps);
          r2 += w * (dot(z, gr[2]) + dot(uh, gr[2]) * ps);
          m1 += w * val[1];
          m2 += w * val[2];
          area += w;
        });
        const double det = K11 * K22 - K12 * K12;
        const double c1 = (r1 * K22 - r2 * K12) / det;
        const double c2 = (K11 * r2 - K12 * r1) / det;
        const double c0 = psi.at(c, 0) - (c1 * m1 + c2 * m2) / area;
        auto oracle = [&](const Vec2& x) {
          double val[3];
          pk_eval(m, c, 1, x, val);
          return c0 * val[0] + c1 * val[1] + c2 * val[2];
        };
        const Vec2 probes[4] = {m.centroid(c), m.verts[m.cells[c][0]], m.verts[m.cells[c][1]],
                                m.verts[m.cells[c][2]]};
        for (const Vec2& x : probes)
          dval = std::max(dval, std::abs(post.value(c, x) - oracle(x)));
        // P1 means coincide with the centroid value, so the constraint
        // residual needs no quadrature
        dmean = std::max(dmean, std::abs(post.value(c, m.centroid(c)) - psi.at(c, 0)));
      }
    }
    v.expect("recovery vs dense oracle", dval, 0.0, 1e-11);
    v.expect("mean constraint residual", dmean, 0.0, 1e-12);
  }
  return v;
}

// no closed-form solution here; orders come from a two-levels-deeper
// reference, so this stays advisory
Verdict line_source_study() {
  const ConvergenceReport rep = run_convergence(study("ex3-line", 5));
  Verdict v;
  bool mono = true;
  for (size_t i = 1; i < rep.rows.size(); ++i)
    mono = mono && rep.rows[i].err.e_post_l2 < rep.rows[i - 1].err.e_post_l2;
  v.check("e_post decreases on all 5 levels", mono);
  v.expect("eoc_post(L5)", get(rep.rows[4].eoc_post), 1.0, 3.0);
  return v;
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    Verdict (*fn)();
    bool gating;
  };
  const Entry entries[] = {
      {"smooth-benchmark-orders", smooth_benchmark_orders, true},
      {"rough-load-orders", rough_load_orders, true},
      {"regularisation-effect", regularisation_effect, true},
      {"smoothing-operator-identities", smoothing_operator_identities, true},
      {"constant-solution-exactness", constant_solution_exactness, true},
      {"dense-oracle-agreement", dense_oracle_agreement, true},
      {"line-source-study", line_source_study, false},
  };
  const int total = static_cast<int>(std::size(entries));
  int failed = 0, index = 0;
  for (const Entry& e : entries) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = e.fn();
    } catch (const std::exception& ex) {
      v.ok = false;
      v.detail = std::string("exception: ") + ex.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %d/%d %s%s: %s  (%.1fs)\n", v.ok ? "PASS" : "FAIL", index, total, e.name,
                e.gating ? "" : " [advisory]", v.detail.c_str(), secs);
    std::fflush(stdout);
    if (!v.ok && e.gating) ++failed;
  }
  if (failed == 0)
    std::printf("acceptance: all gating criteria passed\n");
  else
    std::printf("acceptance: %d gating criteria FAILED\n", failed);
  return failed == 0 ? 0 : 1;
}
