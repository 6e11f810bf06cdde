#include "pbmix/convergence.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "pbmix/errors.hpp"
#include "pbmix/parallel.hpp"
#include "pbmix/regularizer.hpp"

namespace pbmix {

double eoc(double e_coarse, double e_fine, double h_coarse, double h_fine) {
  return std::log(e_fine / e_coarse) / std::log(h_fine / h_coarse);
}

LevelSolution solve_level(const CaseDef& cd, std::shared_ptr<Mesh> mesh, const RunConfig& rc) {
  LevelSolution out;
  out.mesh = std::move(mesh);
  const Mesh& m = *out.mesh;

  CoefficientSet coeffs;
  coeffs.eps = cd.eps;
  coeffs.eps_lo = cd.eps_lo;
  coeffs.eps_hi = cd.eps_hi;
  coeffs.kappa = cd.kappa;
  coeffs.u_h = l2_project_vec(m, 1, cd.u, rc.quad_assembly);
  out.u_h = coeffs.u_h;

  QuadSpec quad{rc.quad_error, cd.quad_refine, rc.line_points};
  SaddleSystem sys = [&]() {
    if (rc.use_q) {
      const ClementWeights cw = compute_weights(m);
      const LoadContext ctx = make_load_context(cd.load, m);
      const ScalarField qg = apply_q(m, rc.k, cw, cd.load, ctx, quad);
      return assemble(m, rc.k, coeffs, DiscreteSource{&qg}, rc.quad_assembly);
    }
    if (!cd.density)
      throw InvariantViolation("case " + cd.name + " has no plain density; the load is functional-only");
    return assemble(m, rc.k, coeffs, DensitySource{cd.density, quad}, rc.quad_assembly);
  }();

  apply_bc(sys, BoundaryData{cd.psi_d, cd.zeta_n}, rc.line_points);
  Solution sol = solve(sys);
  out.zeta = std::move(sol.zeta);
  out.psi = std::move(sol.psi);
  out.rel_residual = sol.rel_residual;
  out.post = postprocess_potential(m, rc.k, coeffs, out.zeta, out.psi, rc.quad_assembly);
  out.dofs = make_dofmap(m, rc.k).n_total();
  out.u_h_l4 = advection_l4_norm(m, coeffs.u_h, rc.quad_assembly + 2);
  return out;
}

ErrorRecord compute_errors(const CaseDef& cd, const LevelSolution& sol, int quad_error) {
  if (!cd.psi_ex) throw UndefinedNorm("case " + cd.name + " has no exact solution");
  const Mesh& m = *sol.mesh;
  ErrorRecord rec;
  rec.e_flux_l2 = lp_norm_cellwise(m, quad_error, 2.0, cd.quad_refine, [&](int c, const Vec2& x) {
    return norm(sol.zeta.value(c, x) - cd.zeta_ex(x));
  });
  if (cd.div_zeta_ex) {
    rec.e_flux_div43 =
        lp_norm_cellwise(m, quad_error, 4.0 / 3.0, cd.quad_refine, [&](int c, const Vec2& x) {
          return sol.zeta.div(c) - cd.div_zeta_ex(x);
        });
  }
  rec.e_psi_l4 = lp_norm_cellwise(m, quad_error, 4.0, cd.quad_refine, [&](int c, const Vec2& x) {
    return sol.psi.value(c, x) - cd.psi_ex(x);
  });
  rec.e_post_l2 = lp_norm_cellwise(m, quad_error, 2.0, cd.quad_refine, [&](int c, const Vec2& x) {
    return sol.post.value(c, x) - cd.psi_ex(x);
  });
  return rec;
}

ErrorRecord compare_to_reference(const LevelSolution& coarse, const LevelSolution& ref, int gap,
                                 int quad_error) {
  const Mesh& mr = *ref.mesh;
  const Mesh& mc = *coarse.mesh;
  long scale = 1;
  for (int i = 0; i < gap; ++i) scale *= 4;
  if (mr.n_cells() != mc.n_cells() * scale)
    throw MeshMismatch("reference mesh is not the expected refinement of the coarse mesh");
  // children of cell p occupy the index block [4p, 4p+4) at every refinement
  std::vector<int> ancestor(mr.n_cells());
  for (int c = 0; c < mr.n_cells(); ++c) {
    ancestor[c] = static_cast<int>(c / scale);
    if (!mc.cell_contains(ancestor[c], mr.centroid(c), 1e-9))
      throw MeshMismatch("reference cell does not descend from its ancestor");
  }
  ErrorRecord rec;
  rec.e_flux_l2 = lp_norm_cellwise(mr, quad_error, 2.0, nullptr, [&](int c, const Vec2& x) {
    return norm(coarse.zeta.value(ancestor[c], x) - ref.zeta.value(c, x));
  });
  rec.e_psi_l4 = lp_norm_cellwise(mr, quad_error, 4.0, nullptr, [&](int c, const Vec2& x) {
    return coarse.psi.value(ancestor[c], x) - ref.psi.value(c, x);
  });
  rec.e_post_l2 = lp_norm_cellwise(mr, quad_error, 2.0, nullptr, [&](int c, const Vec2& x) {
    return coarse.post.value(ancestor[c], x) - ref.post.value(c, x);
  });
  return rec;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

std::string ConvergenceReport::csv() const {
  std::ostringstream os;
  os << "level,h,dofs,e_flux_l2,e_flux_div43,e_psi_l4,e_post_l2,eoc_flux,eoc_psi,eoc_post\n";
  for (const auto& r : rows) {
    os << r.level << ',' << fmt(r.h) << ',' << r.dofs << ',' << fmt(r.err.e_flux_l2) << ','
       << fmt_opt(r.err.e_flux_div43) << ',' << fmt(r.err.e_psi_l4) << ','
       << fmt(r.err.e_post_l2) << ',' << fmt_opt(r.eoc_flux) << ',' << fmt_opt(r.eoc_psi) << ','
       << fmt_opt(r.eoc_post) << '\n';
  }
  return os.str();
}

ConvergenceReport run_convergence(const RunConfig& rc) {
  if (rc.threads > 0) set_thread_count(rc.threads);
  const CaseDef cd = builtin_case(rc.case_name);

  ConvergenceReport report;
  report.case_name = rc.case_name;
  report.used_q = rc.use_q;

  std::vector<std::shared_ptr<Mesh>> meshes;
  meshes.push_back(std::make_shared<Mesh>(cd.start_mesh(rc.mesh_path)));
  for (int l = 1; l < rc.levels; ++l)
    meshes.push_back(std::make_shared<Mesh>(uniform_refine(*meshes.back())));

  std::vector<LevelSolution> sols;
  sols.reserve(rc.levels);
  for (int l = 0; l < rc.levels; ++l) sols.push_back(solve_level(cd, meshes[l], rc));

  std::vector<ErrorRecord> errs(rc.levels);
  if (cd.regularity == CaseDef::Regularity::NoExact) {
    // no closed-form solution: compare against a solve two levels deeper
    const int gap = 2;
    auto ref_mesh = std::make_shared<Mesh>(uniform_refine(uniform_refine(*meshes.back())));
    const LevelSolution ref = solve_level(cd, ref_mesh, rc);
    for (int l = 0; l < rc.levels; ++l)
      errs[l] = compare_to_reference(sols[l], ref, rc.levels - l - 1 + gap, rc.quad_error);
  } else {
    for (int l = 0; l < rc.levels; ++l) errs[l] = compute_errors(cd, sols[l], rc.quad_error);
  }

  for (int l = 0; l < rc.levels; ++l) {
    LevelRow row;
    row.level = l + 1;
    row.h = meshes[l]->h_max;
    row.dofs = sols[l].dofs;
    row.err = errs[l];
    if (l > 0) {
      const double h0 = meshes[l - 1]->h_max, h1 = meshes[l]->h_max;
      const double f0 = errs[l - 1].e_flux_div43 ? *errs[l - 1].e_flux_div43 : errs[l - 1].e_flux_l2;
      const double f1 = errs[l].e_flux_div43 ? *errs[l].e_flux_div43 : errs[l].e_flux_l2;
      row.eoc_flux = eoc(f0, f1, h0, h1);
      row.eoc_psi = eoc(errs[l - 1].e_psi_l4, errs[l].e_psi_l4, h0, h1);
      row.eoc_post = eoc(errs[l - 1].e_post_l2, errs[l].e_post_l2, h0, h1);
    }
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace pbmix
