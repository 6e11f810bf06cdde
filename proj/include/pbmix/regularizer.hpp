#pragma once

#include <functional>
#include <vector>

#include "pbmix/elements.hpp"
#include "pbmix/loads.hpp"
#include "pbmix/mesh.hpp"

namespace pbmix {

// Weighted quasi-interpolation data. For each vertex dof z the weight
// function is psi_z|_K = alpha_{z,K}/|K| on its patch cells and 0 elsewhere,
// with sum_K alpha_{z,K} = 1 and sum_K alpha_{z,K} s_K = z (s_K = centroid).
// alpha is the minimum-Euclidean-norm solution of that 3-equation system.
struct ClementWeights {
  PatchSet patches;
  std::vector<std::vector<double>> alpha;  // per patch, aligned with patch.cells
};

ClementWeights compute_weights(const Mesh& mesh);

// Regularised load Qg in the discontinuous P_k space. Q restricts to the
// identity on P_k densities and maps point/line Diracs and weak-form loads to
// integrable representatives with the same action on the smoothing operator's
// range.
ScalarField apply_q(const Mesh& mesh, int k, const ClementWeights& cw, const LoadFunctional& g,
                    const LoadContext& ctx, const QuadSpec& quad);

// Adjoint smoothing J_h v + B_h (1 - J_h) v; exact piecewise polynomial of
// degree max(1, k+3).
ScalarField apply_q_adjoint(const Mesh& mesh, int k, const ClementWeights& cw,
                            const std::function<double(const Vec2&)>& v, const QuadSpec& quad);

}  // namespace pbmix
