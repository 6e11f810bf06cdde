#include "pbmix/system.hpp"

#include <cmath>

#include <Eigen/SparseLU>

#include "pbmix/errors.hpp"
#include "pbmix/parallel.hpp"
#include "pbmix/quadrature.hpp"

namespace pbmix {

Eigen::SparseMatrix<double> SaddleSystem::full_matrix() const {
  const int n = n_flux + n_scalar;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(tA.size() + 2 * tB.size() + tD.size() + tC.size());
  for (int j = 0; j < A.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it)
      trip.emplace_back(it.row(), it.col(), it.value());
  for (int j = 0; j < B.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(B, j); it; ++it) {
      trip.emplace_back(n_flux + it.row(), it.col(), it.value());   // B
      trip.emplace_back(it.col(), n_flux + it.row(), it.value());  // B^T
    }
  for (int j = 0; j < D.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(D, j); it; ++it)
      trip.emplace_back(it.row(), n_flux + it.col(), it.value());
  for (int j = 0; j < C.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(C, j); it; ++it)
      trip.emplace_back(n_flux + it.row(), n_flux + it.col(), -it.value());
  Eigen::SparseMatrix<double> M(n, n);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

Eigen::VectorXd SaddleSystem::full_rhs() const {
  Eigen::VectorXd rhs(n_flux + n_scalar);
  rhs.head(n_flux) = F;
  rhs.tail(n_scalar) = G;
  return rhs;
}

SaddleSystem assemble(const Mesh& mesh, int k, const CoefficientSet& coeffs,
                      const SystemSource& source, int quad_degree) {
  if (k != 0)
    throw UnsupportedOrder("assembly supports the lowest-order pair only (k = 0)");
  if (coeffs.u_h.mesh != &mesh) throw MeshMismatch("advection field lives on a different mesh");

  SaddleSystem sys;
  sys.mesh = &mesh;
  sys.k = k;
  const DofMap dm = make_dofmap(mesh, k);
  sys.n_flux = dm.n_flux;
  sys.n_scalar = dm.n_scalar();
  const int nd = dm.per_cell();
  const int nc = mesh.n_cells();

  struct CellBlock {
    double A[3][3], B[1][3], D[3][1], C[1][1], G[1];
  };
  std::vector<CellBlock> blocks(nc);
  const auto& rule = triangle_rule(quad_degree);
  const double bound_tol = 1e-12;

  parallel_for(nc, [&](std::int64_t ci) {
    const int c = static_cast<int>(ci);
    CellBlock& blk = blocks[c];
    for (int i = 0; i < 3; ++i) {
      blk.D[i][0] = 0.0;
      for (int j = 0; j < 3; ++j) blk.A[i][j] = 0.0;
    }
    blk.C[0][0] = 0.0;
    blk.G[0] = 0.0;
    double m[28];
    for_each_qp(mesh, c, rule, false, [&](const Vec2& x, double w) {
      const double eps = coeffs.eps(x);
      const double kap = coeffs.kappa(x);
      if (eps < coeffs.eps_lo - bound_tol || eps > coeffs.eps_hi + bound_tol)
        throw CoefficientBoundViolation("eps out of stated bounds at quadrature point");
      if (kap < -bound_tol)
        throw CoefficientBoundViolation("kappa negative at quadrature point");
      const Vec2 u = coeffs.u_h.value(c, x);
      pk_eval(mesh, c, k, x, m);
      Vec2 phi[3];
      for (int i = 0; i < 3; ++i) phi[i] = rt0_eval(mesh, c, i, x);
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) blk.A[i][j] += w * dot(phi[i], phi[j]) / eps;
        blk.D[i][0] += w * dot(u, phi[i]) * m[0] / eps;
      }
      blk.C[0][0] += w * kap * m[0] * m[0];
    });
    // b-form is exact: div phi_i is constant and int_K m_0 = |K|
    for (int i = 0; i < 3; ++i) blk.B[0][i] = rt0_div(mesh, c, i) * mesh.area(c) * 1.0;

    if (const auto* ds = std::get_if<DiscreteSource>(&source)) {
      if (ds->field->mesh != &mesh) throw MeshMismatch("source field lives on a different mesh");
      // exact: both factors piecewise P_k
      const auto& grule = triangle_rule(2 * k + 1);
      double s = 0.0;
      for_each_qp(mesh, c, grule, false, [&](const Vec2& x, double w) {
        pk_eval(mesh, c, k, x, m);
        s += w * ds->field->value(c, x) * m[0];
      });
      blk.G[0] = -s;
    } else {
      const auto& dens = std::get<DensitySource>(source);
      const auto& grule = triangle_rule(dens.quad.degree);
      const bool ref = dens.quad.refine && dens.quad.refine(mesh, c);
      double s = 0.0;
      for_each_qp(mesh, c, grule, ref, [&](const Vec2& x, double w) {
        pk_eval(mesh, c, k, x, m);
        s += w * dens.f(x) * m[0];
      });
      blk.G[0] = -s;
    }
  });

  // deterministic serial accumulation in cell order
  sys.tA.reserve(static_cast<size_t>(nc) * 9);
  sys.tB.reserve(static_cast<size_t>(nc) * 3);
  sys.tD.reserve(static_cast<size_t>(nc) * 3);
  sys.tC.reserve(nc);
  sys.G = Eigen::VectorXd::Zero(sys.n_scalar);
  sys.F = Eigen::VectorXd::Zero(sys.n_flux);
  for (int c = 0; c < nc; ++c) {
    const auto& fi = mesh.cell_facets[c];
    const CellBlock& blk = blocks[c];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) sys.tA.emplace_back(fi[i], fi[j], blk.A[i][j]);
      sys.tB.emplace_back(c * nd, fi[i], blk.B[0][i]);
      sys.tD.emplace_back(fi[i], c * nd, blk.D[i][0]);
    }
    sys.tC.emplace_back(c * nd, c * nd, blk.C[0][0]);
    sys.G(c * nd) += blk.G[0];
  }
  sys.flux_constrained.assign(sys.n_flux, 0);
  sys.flux_value.assign(sys.n_flux, 0.0);

  sys.A.resize(sys.n_flux, sys.n_flux);
  sys.A.setFromTriplets(sys.tA.begin(), sys.tA.end());
  sys.B.resize(sys.n_scalar, sys.n_flux);
  sys.B.setFromTriplets(sys.tB.begin(), sys.tB.end());
  sys.D.resize(sys.n_flux, sys.n_scalar);
  sys.D.setFromTriplets(sys.tD.begin(), sys.tD.end());
  sys.C.resize(sys.n_scalar, sys.n_scalar);
  sys.C.setFromTriplets(sys.tC.begin(), sys.tC.end());
  return sys;
}

double dirichlet_moment(const Mesh& mesh, int facet,
                        const std::function<double(const Vec2&)>& psi_d, int line_points) {
  const auto& lr = line_rule(line_points);
  const Facet& fc = mesh.facets[facet];
  const Vec2 a = mesh.verts[fc.v0], b = mesh.verts[fc.v1];
  double s = 0.0;
  for (size_t q = 0; q < lr.points.size(); ++q)
    s += lr.weights[q] * psi_d(a + (b - a) * lr.points[q]);
  return s;  // basis normal trace is 1/|F|, so <phi_f . n, psi_d> = mean of psi_d
}

double neumann_moment(const Mesh& mesh, int facet,
                      const std::function<double(const Vec2&)>& zeta_n, int line_points) {
  const auto& lr = line_rule(line_points);
  const Facet& fc = mesh.facets[facet];
  const Vec2 a = mesh.verts[fc.v0], b = mesh.verts[fc.v1];
  const double len = mesh.facet_length(facet);
  double s = 0.0;
  for (size_t q = 0; q < lr.points.size(); ++q)
    s += lr.weights[q] * len * zeta_n(a + (b - a) * lr.points[q]);
  return s;
}

void apply_bc(SaddleSystem& sys, const BoundaryData& bdata, int line_points) {
  const Mesh& mesh = *sys.mesh;

  for (int f = 0; f < mesh.n_facets(); ++f) {
    const Facet& fc = mesh.facets[f];
    if (fc.cell_plus != -1) continue;
    if (fc.marker == Marker::Dirichlet) {
      if (!bdata.psi_d) throw InvariantViolation("Dirichlet facet but no potential datum");
      sys.F(f) += dirichlet_moment(mesh, f, bdata.psi_d, line_points);
    } else {
      if (!bdata.zeta_n) throw InvariantViolation("Neumann facet but no normal-trace datum");
      sys.flux_constrained[f] = 1;
      sys.flux_value[f] = neumann_moment(mesh, f, bdata.zeta_n, line_points);
    }
  }

  // rebuild blocks with constrained rows/columns eliminated and lifted
  const auto& con = sys.flux_constrained;
  std::vector<Eigen::Triplet<double>> fA, fB, fD;
  fA.reserve(sys.tA.size());
  fB.reserve(sys.tB.size());
  fD.reserve(sys.tD.size());
  for (const auto& t : sys.tA) {
    if (con[t.row()]) continue;
    if (con[t.col()])
      sys.F(t.row()) -= t.value() * sys.flux_value[t.col()];
    else
      fA.push_back(t);
  }
  for (int f = 0; f < sys.n_flux; ++f)
    if (con[f]) {
      fA.emplace_back(f, f, 1.0);
      sys.F(f) = sys.flux_value[f];
    }
  for (const auto& t : sys.tB) {
    if (con[t.col()])
      sys.G(t.row()) -= t.value() * sys.flux_value[t.col()];
    else
      fB.push_back(t);
  }
  for (const auto& t : sys.tD)
    if (!con[t.row()]) fD.push_back(t);

  sys.A.setFromTriplets(fA.begin(), fA.end());
  sys.B.setFromTriplets(fB.begin(), fB.end());
  sys.D.setFromTriplets(fD.begin(), fD.end());
  sys.tA = std::move(fA);
  sys.tB = std::move(fB);
  sys.tD = std::move(fD);
  sys.bc_applied = true;
}

Solution solve(const SaddleSystem& sys) {
  if (!sys.bc_applied) throw InvariantViolation("solve before apply_bc");
  const Eigen::SparseMatrix<double> M = sys.full_matrix();
  const Eigen::VectorXd rhs = sys.full_rhs();

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(M);
  lu.factorize(M);
  if (lu.info() != Eigen::Success) throw SingularSystem("sparse LU factorisation failed");
  Eigen::VectorXd x = lu.solve(rhs);

  const double rhs_norm = std::max(rhs.norm(), 1e-300);
  double rel = (M * x - rhs).norm() / rhs_norm;
  if (rel > 1e-12) {
    x += lu.solve(rhs - M * x);  // one refinement sweep
    rel = (M * x - rhs).norm() / rhs_norm;
  }
  if (!(rel <= 1e-10)) throw SingularSystem("relative residual " + std::to_string(rel));

  Solution sol;
  sol.rel_residual = rel;
  sol.zeta = FluxField::zeros(*sys.mesh);
  for (int f = 0; f < sys.n_flux; ++f) sol.zeta.coef[f] = x(f);
  sol.psi = ScalarField::zeros(*sys.mesh, sys.k);
  for (int i = 0; i < sys.n_scalar; ++i) sol.psi.coef[i] = x(sys.n_flux + i);
  return sol;
}

double advection_l4_norm(const Mesh& mesh, const VectorField& u_h, int quad_degree) {
  return lp_norm_cellwise(mesh, quad_degree, 4.0, nullptr,
                          [&](int c, const Vec2& x) { return norm(u_h.value(c, x)); });
}

}  // namespace pbmix
