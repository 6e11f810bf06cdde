#pragma once

#include <functional>
#include <vector>

#include "pbmix/geometry.hpp"
#include "pbmix/mesh.hpp"
#include "pbmix/quadrature.hpp"

#include <Eigen/Dense>

namespace pbmix {

// highest per-cell polynomial degree the static buffers support
constexpr int kMaxDegree = 6;

int pk_dim(int degree);
// graded-lex exponent pairs (a,b), a+b <= degree
const std::vector<std::array<int, 2>>& pk_exponents(int degree);

// Scaled monomials m_j = ((x-cx)/h_c)^a ((y-cy)/h_c)^b per cell; m_0 == 1.
void pk_eval(const Mesh& mesh, int cell, int degree, const Vec2& x, double* vals);
void pk_grad(const Mesh& mesh, int cell, int degree, const Vec2& x, Vec2* grads);

// P1 hat of a global vertex restricted to one incident cell.
double hat_value(const Mesh& mesh, int cell, int vertex, const Vec2& x);
Vec2 hat_grad(const Mesh& mesh, int cell, int vertex);

// Element bubble: product of the three barycentric coordinates.
double bubble_value(const Mesh& mesh, int cell, const Vec2& x);
Vec2 bubble_grad(const Mesh& mesh, int cell, const Vec2& x);

// Bubble-weighted dual basis on one cell: chi_j = sum_l C(j,l) * eta_K * m_l
// with int_K chi_j m_i = delta_ij. For k=0 this reduces to 60*eta_K/|K|.
struct DualBubbleBasis {
  int k = 0;
  Eigen::MatrixXd C;
};

DualBubbleBasis dual_bubble(const Mesh& mesh, int cell, int k);
double dual_bubble_value(const Mesh& mesh, int cell, const DualBubbleBasis& dual, int j,
                         const Vec2& x);
Vec2 dual_bubble_grad(const Mesh& mesh, int cell, const DualBubbleBasis& dual, int j,
                      const Vec2& x);

// Lowest-order Raviart-Thomas basis attached to facet slot i of a cell,
// normalised so the facet's normal moment w.r.t. the global facet normal is 1:
// phi(x) = sign * (x - p_i) / (2|K|).
Vec2 rt0_eval(const Mesh& mesh, int cell, int i, const Vec2& x);
double rt0_div(const Mesh& mesh, int cell, int i);

// Piecewise P_degree scalar field in the scaled monomial basis.
struct ScalarField {
  const Mesh* mesh = nullptr;
  int degree = 0;
  std::vector<double> coef;

  static ScalarField zeros(const Mesh& mesh, int degree);
  int dim() const { return pk_dim(degree); }
  double& at(int cell, int j) { return coef[static_cast<size_t>(cell) * dim() + j]; }
  double at(int cell, int j) const { return coef[static_cast<size_t>(cell) * dim() + j]; }
  double value(int cell, const Vec2& x) const;
};

// Componentwise piecewise P_degree vector field (x coefficients first).
struct VectorField {
  const Mesh* mesh = nullptr;
  int degree = 0;
  std::vector<double> coef;

  static VectorField zeros(const Mesh& mesh, int degree);
  int dim() const { return pk_dim(degree); }
  double& at(int cell, int comp, int j) {
    return coef[(static_cast<size_t>(cell) * 2 + comp) * dim() + j];
  }
  double at(int cell, int comp, int j) const {
    return coef[(static_cast<size_t>(cell) * 2 + comp) * dim() + j];
  }
  Vec2 value(int cell, const Vec2& x) const;
};

// RT0 field, one normal-moment coefficient per facet.
struct FluxField {
  const Mesh* mesh = nullptr;
  std::vector<double> coef;

  static FluxField zeros(const Mesh& mesh);
  Vec2 value(int cell, const Vec2& x) const;
  double div(int cell) const;  // constant per cell
};

// Cellwise L2 projections (local Gram solve, exact for polynomial input).
ScalarField l2_project(const Mesh& mesh, int degree,
                       const std::function<double(const Vec2&)>& f, int quad_degree);
VectorField l2_project_vec(const Mesh& mesh, int degree,
                           const std::function<Vec2(const Vec2&)>& f, int quad_degree);

// RT0 interpolation via facet normal moments (npoints Gauss points per facet).
FluxField rt0_interpolate(const Mesh& mesh, const std::function<Vec2(const Vec2&)>& f,
                          int npoints = 5);

// Quadrature sweep over one physical cell; refine=true applies the rule on
// the 4 midpoint subtriangles instead. f(point, weight); weights sum to |K|.
template <class F>
void for_each_qp_tri(const Vec2& a, const Vec2& b, const Vec2& c, const TriangleRule& rule,
                     F&& f) {
  const double jac = cross(b - a, c - a);  // = 2*area
  for (size_t q = 0; q < rule.weights.size(); ++q) {
    const auto& l = rule.bary[q];
    f(Vec2{l[0] * a.x + l[1] * b.x + l[2] * c.x, l[0] * a.y + l[1] * b.y + l[2] * c.y},
      rule.weights[q] * jac);
  }
}

template <class F>
void for_each_qp(const Mesh& mesh, int cell, const TriangleRule& rule, bool refine, F&& f) {
  const auto& t = mesh.cells[cell];
  const Vec2 p0 = mesh.verts[t[0]], p1 = mesh.verts[t[1]], p2 = mesh.verts[t[2]];
  if (!refine) {
    for_each_qp_tri(p0, p1, p2, rule, f);
    return;
  }
  const Vec2 m01 = (p0 + p1) * 0.5, m12 = (p1 + p2) * 0.5, m20 = (p2 + p0) * 0.5;
  for_each_qp_tri(p0, m01, m20, rule, f);
  for_each_qp_tri(p1, m12, m01, rule, f);
  for_each_qp_tri(p2, m20, m12, rule, f);
  for_each_qp_tri(m01, m12, m20, rule, f);
}

using RefinePred = std::function<bool(const Mesh&, int cell)>;

// (sum_K int_K |f|^p)^(1/p); p in {2, 4, 4/3} are the ones used.
double lp_norm_cellwise(const Mesh& mesh, int quad_degree, double p, const RefinePred& refine,
                        const std::function<double(int, const Vec2&)>& f);

// Degrees of freedom: all facet normal moments first, then per-cell scalar
// coefficients. Reported problem size is n_total (constrained dofs included).
struct DofMap {
  int k = 0;
  int n_flux = 0;
  int n_cells = 0;

  int per_cell() const { return pk_dim(k); }
  int n_scalar() const { return n_cells * per_cell(); }
  int n_total() const { return n_flux + n_scalar(); }
  int scalar_dof(int cell, int j) const { return n_flux + cell * per_cell() + j; }
};

DofMap make_dofmap(const Mesh& mesh, int k);

}  // namespace pbmix
