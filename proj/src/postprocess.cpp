#include "pbmix/postprocess.hpp"

#include <Eigen/Dense>

#include "pbmix/errors.hpp"
#include "pbmix/parallel.hpp"
#include "pbmix/quadrature.hpp"

namespace pbmix {

ScalarField postprocess_potential(const Mesh& mesh, int k, const CoefficientSet& coeffs,
                                  const FluxField& zeta, const ScalarField& psi,
                                  int quad_degree) {
  if (zeta.mesh != &mesh || psi.mesh != &mesh)
    throw MeshMismatch("postprocess inputs live on a different mesh");
  if (psi.degree != k) throw InvariantViolation("potential degree does not match k");

  const int degree = k + 1;
  const int n = pk_dim(degree);
  ScalarField out = ScalarField::zeros(mesh, degree);
  const auto& rule = triangle_rule(std::max(quad_degree, 2 * degree));

  parallel_for(mesh.n_cells(), [&](std::int64_t ci) {
    const int c = static_cast<int>(ci);
    // KKT system [S m; m^T 0][c; lambda] = [r; int psi]: S is only
    // semidefinite (constants), the multiplier pins the mean
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + 1, n + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    Vec2 gm[28];
    for_each_qp(mesh, c, rule, false, [&](const Vec2& x, double w) {
      const double eps = coeffs.eps(x);
      pk_grad(mesh, c, degree, x, gm);
      const Vec2 zx = zeta.value(c, x);
      const Vec2 ux = coeffs.u_h.value(c, x);
      const double px = psi.value(c, x);
      double m[28];
      pk_eval(mesh, c, degree, x, m);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) K(i, j) += w * eps * dot(gm[i], gm[j]);
        K(i, n) += w * m[i];
        rhs(i) += w * (dot(zx, gm[i]) + dot(ux, gm[i]) * px);
      }
      rhs(n) += w * psi.value(c, x);
    });
    for (int i = 0; i < n; ++i) K(n, i) = K(i, n);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible())
      throw LocalSingular("postprocess system on cell " + std::to_string(c));
    Eigen::VectorXd sol = lu.solve(rhs);
    for (int i = 0; i < n; ++i) out.at(c, i) = sol(i);
  });
  return out;
}

}  // namespace pbmix
