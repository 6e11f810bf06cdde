#pragma once

#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "pbmix/elements.hpp"
#include "pbmix/mesh.hpp"

namespace pbmix {

// Quadrature policy for functional evaluation. refine marks cells whose
// integrand has a kink inside/on the cell boundary; those get one level of
// midpoint subdivision.
struct QuadSpec {
  int degree = 12;
  RefinePred refine;
  int line_points = 5;
};

// g in L2, action v -> int f v.
struct DensityL2 {
  std::function<double(const Vec2&)> f;
};

// Functional-only load manufactured from an exact solution:
// v -> int (kappa psi v + (eps grad_psi - u psi) . grad v) - int_{G_N} zeta_n v.
struct WeakFormLoad {
  std::function<double(const Vec2&)> psi;
  std::function<Vec2(const Vec2&)> grad_psi;
  std::function<Vec2(const Vec2&)> u;
  std::function<double(const Vec2&)> eps;
  std::function<double(const Vec2&)> kappa;
  std::function<double(const Vec2&)> zeta_n;  // normal trace datum on Neumann facets; may be null
};

// v -> intensity * int_gamma v ds over the segment a-b.
struct LineDirac {
  Vec2 a, b;
  double intensity = 1.0;
};

// v -> weight * v(x0); x0 must not lie on the Dirichlet boundary.
struct PointDirac {
  Vec2 x0;
  double weight = 1.0;
};

using LoadFunctional = std::variant<DensityL2, WeakFormLoad, LineDirac, PointDirac>;

// Piecewise polynomial test function with compact support. value/grad must be
// callable for any cell id and return 0 outside the support.
struct TestFn {
  std::vector<int> cells;
  std::function<double(int cell, const Vec2&)> value;
  std::function<Vec2(int cell, const Vec2&)> grad;
};

// Per-(mesh, load) evaluation state: the global partition of a Dirac segment
// into cell-owned pieces, or the owning cells of a Dirac point. Build once,
// reuse for every test function on the same mesh.
struct LoadContext {
  struct LineSegment {
    int cell = -1;
    Vec2 a, b;  // sub-segment endpoints
  };
  std::vector<LineSegment> line;  // partition of gamma, lengths sum to |gamma|
  std::vector<int> point_cells;   // cells containing x0
};

LoadContext make_load_context(const LoadFunctional& g, const Mesh& mesh);

// Action of the functional on one test function.
double eval_load(const LoadFunctional& g, const Mesh& mesh, const LoadContext& ctx,
                 const TestFn& v, const QuadSpec& quad);

// Ready-made test functions.
TestFn hat_testfn(const Mesh& mesh, int vertex);
TestFn dual_bubble_testfn(const Mesh& mesh, int cell, const DualBubbleBasis& dual, int j);
TestFn pk_basis_testfn(const Mesh& mesh, int cell, int k, int j);

}  // namespace pbmix
