#include "pbmix/regularizer.hpp"

#include <cmath>

#include "pbmix/errors.hpp"
#include "pbmix/parallel.hpp"

#include <Eigen/Dense>

namespace pbmix {

ClementWeights compute_weights(const Mesh& mesh) {
  ClementWeights cw;
  cw.patches = vertex_patches(mesh);
  cw.alpha.resize(cw.patches.patches.size());
  for (size_t p = 0; p < cw.patches.patches.size(); ++p) {
    const VertexPatch& patch = cw.patches.patches[p];
    const int m = static_cast<int>(patch.cells.size());
    const Vec2 z = mesh.verts[patch.vertex];
    double scale = 0.0;
    for (int c : patch.cells) scale = std::max(scale, dist(mesh.centroid(c), z));
    if (scale <= 0.0) scale = 1.0;
    // constraints: sum alpha (s_K - z)/scale = 0, sum alpha = 1; row scaling
    // keeps the 3x3 normal matrix well conditioned without changing the
    // solution set, so the minimum-norm alpha is unaffected
    Eigen::MatrixXd A(3, m);
    for (int i = 0; i < m; ++i) {
      const Vec2 s = mesh.centroid(patch.cells[i]);
      A(0, i) = (s.x - z.x) / scale;
      A(1, i) = (s.y - z.y) / scale;
      A(2, i) = 1.0;
    }
    Eigen::Matrix3d AAt = A * A.transpose();
    Eigen::FullPivLU<Eigen::Matrix3d> lu(AAt);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible())
      throw CollinearCentroids("patch of vertex " + std::to_string(patch.vertex) +
                               " has collinear cell centroids");
    Eigen::Vector3d rhs(0.0, 0.0, 1.0);
    Eigen::VectorXd alpha = A.transpose() * lu.solve(rhs);

    Vec2 centroid_sum{0, 0};
    double mass = 0.0;
    for (int i = 0; i < m; ++i) {
      centroid_sum += mesh.centroid(patch.cells[i]) * alpha(i);
      mass += alpha(i);
    }
    const double h = mesh.h_max;
    if (std::abs(mass - 1.0) > 1e-12 || dist(centroid_sum, z) > 1e-12 * std::max(h, 1.0))
      throw InvariantViolation("patch weight constraints not met at vertex " +
                               std::to_string(patch.vertex));
    cw.alpha[p].assign(alpha.data(), alpha.data() + m);
  }
  return cw;
}

namespace {

// scatter a weight-function multiple c * psi_z into the constant coefficient
// of the target field (psi_z is piecewise constant alpha_{z,K}/|K|)
void add_weight_multiple(const Mesh& mesh, const ClementWeights& cw, size_t p, double c,
                         ScalarField& out) {
  const VertexPatch& patch = cw.patches.patches[p];
  for (size_t i = 0; i < patch.cells.size(); ++i)
    out.at(patch.cells[i], 0) += c * cw.alpha[p][i] / mesh.area(patch.cells[i]);
}

}  // namespace

ScalarField apply_q(const Mesh& mesh, int k, const ClementWeights& cw, const LoadFunctional& g,
                    const LoadContext& ctx, const QuadSpec& quad) {
  const int nd = pk_dim(k);
  const auto& patches = cw.patches.patches;

  // hat actions a_z = <g, eta_z>
  std::vector<double> a(patches.size(), 0.0);
  parallel_for(static_cast<std::int64_t>(patches.size()), [&](std::int64_t p) {
    a[p] = eval_load(g, mesh, ctx, hat_testfn(mesh, patches[p].vertex), quad);
  });

  // dual-bubble actions b_{K,j} = <g, chi_{K,j}> give the local correction w
  ScalarField w = ScalarField::zeros(mesh, k);
  parallel_for(mesh.n_cells(), [&](std::int64_t c) {
    const auto dual = dual_bubble(mesh, static_cast<int>(c), k);
    for (int j = 0; j < nd; ++j)
      w.at(static_cast<int>(c), j) =
          eval_load(g, mesh, ctx, dual_bubble_testfn(mesh, static_cast<int>(c), dual, j), quad);
  });

  // c_z = int w eta_z over the hat support (exact quadrature; w is P_k)
  std::vector<double> cvals(patches.size(), 0.0);
  const auto& rule = triangle_rule(k + 2);
  parallel_for(static_cast<std::int64_t>(patches.size()), [&](std::int64_t p) {
    const int z = patches[p].vertex;
    double s = 0.0;
    for (int c : mesh.vertex_cells(z))
      for_each_qp(mesh, c, rule, false,
                  [&](const Vec2& x, double wq) { s += wq * w.value(c, x) * hat_value(mesh, c, z, x); });
    cvals[p] = s;
  });

  // Qg = sum_z a_z psi_z + w - sum_z c_z psi_z
  ScalarField out = std::move(w);
  for (size_t p = 0; p < patches.size(); ++p)
    add_weight_multiple(mesh, cw, p, a[p] - cvals[p], out);
  return out;
}

ScalarField apply_q_adjoint(const Mesh& mesh, int k, const ClementWeights& cw,
                            const std::function<double(const Vec2&)>& v, const QuadSpec& quad) {
  const auto& patches = cw.patches.patches;
  const int nd = pk_dim(k);

  // j_z = int v psi_z over the (possibly redirected) patch
  std::vector<double> jz(patches.size(), 0.0);
  const auto& vrule = triangle_rule(quad.degree);
  parallel_for(static_cast<std::int64_t>(patches.size()), [&](std::int64_t p) {
    double s = 0.0;
    for (size_t i = 0; i < patches[p].cells.size(); ++i) {
      const int c = patches[p].cells[i];
      double cell_int = 0.0;
      for_each_qp(mesh, c, vrule, false, [&](const Vec2& x, double wq) { cell_int += wq * v(x); });
      s += cell_int * cw.alpha[p][i] / mesh.area(c);
    }
    jz[p] = s;
  });

  // per cell: hats of active vertices plus the bubble-dual correction of the
  // residual r = v - J_h v, projected exactly onto P_{max(1,k+3)}
  const int out_degree = std::max(1, k + 3);
  ScalarField out = ScalarField::zeros(mesh, out_degree);
  parallel_for(mesh.n_cells(), [&](std::int64_t ci) {
    const int c = static_cast<int>(ci);
    auto jh = [&](const Vec2& x) {
      double s = 0.0;
      for (int w : mesh.cells[c]) {
        const int p = cw.patches.patch_of_vertex[w];
        if (p >= 0) s += jz[p] * hat_value(mesh, c, w, x);
      }
      return s;
    };
    // d_j = int_K (v - J_h v) eta_j
    double d[28];
    {
      double m[28];
      for (int j = 0; j < nd; ++j) d[j] = 0.0;
      for_each_qp(mesh, c, vrule, false, [&](const Vec2& x, double wq) {
        pk_eval(mesh, c, k, x, m);
        const double r = v(x) - jh(x);
        for (int j = 0; j < nd; ++j) d[j] += wq * r * m[j];
      });
    }
    const auto dual = dual_bubble(mesh, c, k);
    auto local = [&](const Vec2& x) {
      double s = jh(x);
      for (int j = 0; j < nd; ++j) s += d[j] * dual_bubble_value(mesh, c, dual, j, x);
      return s;
    };
    // exact projection: the integrand is polynomial of degree <= 2*out_degree
    const int n = pk_dim(out_degree);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    const auto& prule = triangle_rule(2 * out_degree);
    double m[28];
    for_each_qp(mesh, c, prule, false, [&](const Vec2& x, double wq) {
      pk_eval(mesh, c, out_degree, x, m);
      const double fx = local(x);
      for (int i = 0; i < n; ++i) {
        b(i) += wq * fx * m[i];
        for (int l = 0; l < n; ++l) G(i, l) += wq * m[i] * m[l];
      }
    });
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    if (ldlt.info() != Eigen::Success) throw SingularGram("mass matrix on cell " + std::to_string(c));
    Eigen::VectorXd sol = ldlt.solve(b);
    for (int i = 0; i < n; ++i) out.at(c, i) = sol(i);
  });
  return out;
}

}  // namespace pbmix
