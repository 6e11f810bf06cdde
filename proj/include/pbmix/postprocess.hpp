#pragma once

#include "pbmix/elements.hpp"
#include "pbmix/mesh.hpp"
#include "pbmix/system.hpp"

namespace pbmix {

// Advection-adapted local potential recovery: per cell find psi# in P_{k+1}
// with
//   int_K eps grad psi# . grad v = int_K zeta . grad v + int_K (u_h . grad v) psi
// for all v in P_{k+1}(K), subject to the mean constraint
//   int_K psi# = int_K psi.
// Solved as a local saddle system with one scalar multiplier per cell.
ScalarField postprocess_potential(const Mesh& mesh, int k, const CoefficientSet& coeffs,
                                  const FluxField& zeta, const ScalarField& psi,
                                  int quad_degree = 6);

}  // namespace pbmix
