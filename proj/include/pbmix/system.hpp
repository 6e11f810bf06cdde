#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Sparse>

#include "pbmix/elements.hpp"
#include "pbmix/loads.hpp"
#include "pbmix/mesh.hpp"

namespace pbmix {

struct CoefficientSet {
  std::function<double(const Vec2&)> eps;
  double eps_lo = 1.0, eps_hi = 1.0;  // stated bounds, checked at quadrature points
  std::function<double(const Vec2&)> kappa;
  VectorField u_h;  // discrete advection, piecewise [P1]^2
};

struct BoundaryData {
  std::function<double(const Vec2&)> psi_d;   // Dirichlet potential datum
  std::function<double(const Vec2&)> zeta_n;  // flux normal trace on Neumann facets
};

// Blocks of [[A, B^T + D], [B, -C]] with unknowns (flux; potential) and right
// sides (F; G). Neumann facet moments are essential constraints, eliminated
// with lifting once apply_bc runs; the record stays for reporting.
struct SaddleSystem {
  const Mesh* mesh = nullptr;
  int k = 0;
  int n_flux = 0, n_scalar = 0;

  Eigen::SparseMatrix<double> A, B, D, C;
  Eigen::VectorXd F, G;
  std::vector<char> flux_constrained;
  std::vector<double> flux_value;
  bool bc_applied = false;

  // raw contributions kept so apply_bc can rebuild blocks with elimination
  std::vector<Eigen::Triplet<double>> tA, tB, tD, tC;

  Eigen::SparseMatrix<double> full_matrix() const;
  Eigen::VectorXd full_rhs() const;
};

// Scalar-equation source: either an already-discrete density (the regularised
// load) or a raw L2 density integrated directly.
struct DiscreteSource {
  const ScalarField* field = nullptr;
};
struct DensitySource {
  std::function<double(const Vec2&)> f;
  QuadSpec quad;
};
using SystemSource = std::variant<DiscreteSource, DensitySource>;

SaddleSystem assemble(const Mesh& mesh, int k, const CoefficientSet& coeffs,
                      const SystemSource& source, int quad_degree = 6);

void apply_bc(SaddleSystem& sys, const BoundaryData& bdata, int line_points = 5);

struct Solution {
  FluxField zeta;
  ScalarField psi;
  double rel_residual = 0.0;
};

// Direct sparse LU with pivoting; one refinement sweep; throws SingularSystem
// if factorisation fails or the relative residual exceeds 1e-10.
Solution solve(const SaddleSystem& sys);

// smallness diagnostic for the advective field
double advection_l4_norm(const Mesh& mesh, const VectorField& u_h, int quad_degree = 8);

// facet data moments used by apply_bc: mean of the Dirichlet datum on a
// facet, and the total normal-trace moment prescribed on a Neumann facet
double dirichlet_moment(const Mesh& mesh, int facet, const std::function<double(const Vec2&)>& psi_d,
                        int line_points = 5);
double neumann_moment(const Mesh& mesh, int facet, const std::function<double(const Vec2&)>& zeta_n,
                      int line_points = 5);

}  // namespace pbmix
