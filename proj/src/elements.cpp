#include "pbmix/elements.hpp"

#include <cassert>
#include <cmath>
#include <mutex>

#include "pbmix/errors.hpp"
#include "pbmix/parallel.hpp"

namespace pbmix {

int pk_dim(int degree) { return (degree + 1) * (degree + 2) / 2; }

const std::vector<std::array<int, 2>>& pk_exponents(int degree) {
  if (degree < 0 || degree > kMaxDegree) throw UnsupportedOrder("degree " + std::to_string(degree));
  static std::vector<std::vector<std::array<int, 2>>> table;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  if (table.empty()) {
    table.resize(kMaxDegree + 1);
    for (int d = 0; d <= kMaxDegree; ++d)
      for (int total = 0; total <= d; ++total)
        for (int a = total; a >= 0; --a) table[d].push_back({a, total - a});
  }
  return table[degree];
}

void pk_eval(const Mesh& mesh, int cell, int degree, const Vec2& x, double* vals) {
  const auto& exps = pk_exponents(degree);
  const Vec2 c = mesh.centroid(cell);
  const double h = mesh.diameter(cell);
  const double xi = (x.x - c.x) / h;
  const double eta = (x.y - c.y) / h;
  double px[kMaxDegree + 1], py[kMaxDegree + 1];
  px[0] = py[0] = 1.0;
  for (int d = 1; d <= degree; ++d) {
    px[d] = px[d - 1] * xi;
    py[d] = py[d - 1] * eta;
  }
  for (size_t j = 0; j < exps.size(); ++j) vals[j] = px[exps[j][0]] * py[exps[j][1]];
}

void pk_grad(const Mesh& mesh, int cell, int degree, const Vec2& x, Vec2* grads) {
  const auto& exps = pk_exponents(degree);
  const Vec2 c = mesh.centroid(cell);
  const double h = mesh.diameter(cell);
  const double xi = (x.x - c.x) / h;
  const double eta = (x.y - c.y) / h;
  double px[kMaxDegree + 1], py[kMaxDegree + 1];
  px[0] = py[0] = 1.0;
  for (int d = 1; d <= degree; ++d) {
    px[d] = px[d - 1] * xi;
    py[d] = py[d - 1] * eta;
  }
  for (size_t j = 0; j < exps.size(); ++j) {
    const int a = exps[j][0], b = exps[j][1];
    grads[j].x = a == 0 ? 0.0 : a * px[a - 1] * py[b] / h;
    grads[j].y = b == 0 ? 0.0 : b * px[a] * py[b - 1] / h;
  }
}

namespace {

int local_vertex(const Mesh& mesh, int cell, int vertex) {
  const auto& t = mesh.cells[cell];
  for (int i = 0; i < 3; ++i)
    if (t[i] == vertex) return i;
  throw InvariantViolation("vertex not part of cell");
}

Vec2 barycentric_grad(const Mesh& mesh, int cell, int i) {
  const auto& t = mesh.cells[cell];
  const Vec2 e = mesh.verts[t[(i + 1) % 3]] - mesh.verts[t[(i + 2) % 3]];
  return perp(e) / (2.0 * mesh.area(cell));
}

}  // namespace

double hat_value(const Mesh& mesh, int cell, int vertex, const Vec2& x) {
  return mesh.barycentric(cell, x)[local_vertex(mesh, cell, vertex)];
}

Vec2 hat_grad(const Mesh& mesh, int cell, int vertex) {
  return barycentric_grad(mesh, cell, local_vertex(mesh, cell, vertex));
}

double bubble_value(const Mesh& mesh, int cell, const Vec2& x) {
  const auto l = mesh.barycentric(cell, x);
  return l[0] * l[1] * l[2];
}

Vec2 bubble_grad(const Mesh& mesh, int cell, const Vec2& x) {
  const auto l = mesh.barycentric(cell, x);
  Vec2 g{0, 0};
  for (int i = 0; i < 3; ++i)
    g += barycentric_grad(mesh, cell, i) * (l[(i + 1) % 3] * l[(i + 2) % 3]);
  return g;
}

DualBubbleBasis dual_bubble(const Mesh& mesh, int cell, int k) {
  const int n = pk_dim(k);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  const auto& rule = triangle_rule(3 + 2 * k);
  double m[28];
  for_each_qp(mesh, cell, rule, false, [&](const Vec2& x, double w) {
    const double eta = bubble_value(mesh, cell, x);
    pk_eval(mesh, cell, k, x, m);
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l) G(i, l) += w * eta * m[i] * m[l];
  });
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success)
    throw SingularGram("bubble-weighted Gram matrix on cell " + std::to_string(cell));
  DualBubbleBasis dual;
  dual.k = k;
  dual.C = llt.solve(Eigen::MatrixXd::Identity(n, n));
  return dual;
}

double dual_bubble_value(const Mesh& mesh, int cell, const DualBubbleBasis& dual, int j,
                         const Vec2& x) {
  const int n = pk_dim(dual.k);
  double m[28];
  pk_eval(mesh, cell, dual.k, x, m);
  double s = 0.0;
  for (int l = 0; l < n; ++l) s += dual.C(j, l) * m[l];
  return bubble_value(mesh, cell, x) * s;
}

Vec2 dual_bubble_grad(const Mesh& mesh, int cell, const DualBubbleBasis& dual, int j,
                      const Vec2& x) {
  const int n = pk_dim(dual.k);
  double m[28];
  Vec2 gm[28];
  pk_eval(mesh, cell, dual.k, x, m);
  pk_grad(mesh, cell, dual.k, x, gm);
  double s = 0.0;
  Vec2 gs{0, 0};
  for (int l = 0; l < n; ++l) {
    s += dual.C(j, l) * m[l];
    gs += gm[l] * dual.C(j, l);
  }
  return bubble_grad(mesh, cell, x) * s + gs * bubble_value(mesh, cell, x);
}

Vec2 rt0_eval(const Mesh& mesh, int cell, int i, const Vec2& x) {
  const Vec2 p = mesh.verts[mesh.cells[cell][i]];
  const double s = mesh.cell_facet_sign[cell][i];
  return (x - p) * (s / (2.0 * mesh.area(cell)));
}

double rt0_div(const Mesh& mesh, int cell, int i) {
  return mesh.cell_facet_sign[cell][i] / mesh.area(cell);
}

ScalarField ScalarField::zeros(const Mesh& mesh, int degree) {
  ScalarField f;
  f.mesh = &mesh;
  f.degree = degree;
  f.coef.assign(static_cast<size_t>(mesh.n_cells()) * pk_dim(degree), 0.0);
  return f;
}

double ScalarField::value(int cell, const Vec2& x) const {
  double m[28];
  pk_eval(*mesh, cell, degree, x, m);
  const int n = dim();
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += at(cell, j) * m[j];
  return s;
}

VectorField VectorField::zeros(const Mesh& mesh, int degree) {
  VectorField f;
  f.mesh = &mesh;
  f.degree = degree;
  f.coef.assign(static_cast<size_t>(mesh.n_cells()) * 2 * pk_dim(degree), 0.0);
  return f;
}

Vec2 VectorField::value(int cell, const Vec2& x) const {
  double m[28];
  pk_eval(*mesh, cell, degree, x, m);
  const int n = dim();
  Vec2 s{0, 0};
  for (int j = 0; j < n; ++j) {
    s.x += at(cell, 0, j) * m[j];
    s.y += at(cell, 1, j) * m[j];
  }
  return s;
}

FluxField FluxField::zeros(const Mesh& mesh) {
  FluxField f;
  f.mesh = &mesh;
  f.coef.assign(mesh.n_facets(), 0.0);
  return f;
}

Vec2 FluxField::value(int cell, const Vec2& x) const {
  Vec2 s{0, 0};
  for (int i = 0; i < 3; ++i)
    s += rt0_eval(*mesh, cell, i, x) * coef[mesh->cell_facets[cell][i]];
  return s;
}

double FluxField::div(int cell) const {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += coef[mesh->cell_facets[cell][i]] * rt0_div(*mesh, cell, i);
  return s;
}

namespace {

// local Gram solve shared by the projections
void project_cell(const Mesh& mesh, int cell, int degree, int quad_degree,
                  const std::function<double(const Vec2&)>& f, double* out) {
  const int n = pk_dim(degree);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  const auto& rule = triangle_rule(std::max(quad_degree, 2 * degree));
  double m[28];
  for_each_qp(mesh, cell, rule, false, [&](const Vec2& x, double w) {
    pk_eval(mesh, cell, degree, x, m);
    const double fx = f(x);
    for (int i = 0; i < n; ++i) {
      b(i) += w * fx * m[i];
      for (int j = 0; j < n; ++j) G(i, j) += w * m[i] * m[j];
    }
  });
  Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
  if (ldlt.info() != Eigen::Success) throw SingularGram("mass matrix on cell " + std::to_string(cell));
  Eigen::VectorXd c = ldlt.solve(b);
  for (int i = 0; i < n; ++i) out[i] = c(i);
}

}  // namespace

ScalarField l2_project(const Mesh& mesh, int degree,
                       const std::function<double(const Vec2&)>& f, int quad_degree) {
  ScalarField out = ScalarField::zeros(mesh, degree);
  const int n = pk_dim(degree);
  parallel_for(mesh.n_cells(), [&](std::int64_t c) {
    project_cell(mesh, static_cast<int>(c), degree, quad_degree, f, &out.coef[c * n]);
  });
  return out;
}

VectorField l2_project_vec(const Mesh& mesh, int degree,
                           const std::function<Vec2(const Vec2&)>& f, int quad_degree) {
  VectorField out = VectorField::zeros(mesh, degree);
  const int n = pk_dim(degree);
  parallel_for(mesh.n_cells(), [&](std::int64_t c) {
    project_cell(mesh, static_cast<int>(c), degree, quad_degree,
                 [&](const Vec2& x) { return f(x).x; }, &out.coef[c * 2 * n]);
    project_cell(mesh, static_cast<int>(c), degree, quad_degree,
                 [&](const Vec2& x) { return f(x).y; }, &out.coef[c * 2 * n + n]);
  });
  return out;
}

FluxField rt0_interpolate(const Mesh& mesh, const std::function<Vec2(const Vec2&)>& f,
                          int npoints) {
  FluxField out = FluxField::zeros(mesh);
  const auto& rule = line_rule(npoints);
  for (int fi = 0; fi < mesh.n_facets(); ++fi) {
    const Vec2 a = mesh.verts[mesh.facets[fi].v0];
    const Vec2 b = mesh.verts[mesh.facets[fi].v1];
    const Vec2 n = mesh.facet_normal(fi);
    const double len = mesh.facet_length(fi);
    double moment = 0.0;
    for (size_t q = 0; q < rule.points.size(); ++q)
      moment += rule.weights[q] * len * dot(f(a + (b - a) * rule.points[q]), n);
    out.coef[fi] = moment;
  }
  return out;
}

double lp_norm_cellwise(const Mesh& mesh, int quad_degree, double p, const RefinePred& refine,
                        const std::function<double(int, const Vec2&)>& f) {
  const auto& rule = triangle_rule(quad_degree);
  std::vector<double> cell_sum(mesh.n_cells(), 0.0);
  parallel_for(mesh.n_cells(), [&](std::int64_t c) {
    const bool ref = refine && refine(mesh, static_cast<int>(c));
    double s = 0.0;
    for_each_qp(mesh, static_cast<int>(c), rule, ref, [&](const Vec2& x, double w) {
      const double v = std::abs(f(static_cast<int>(c), x));
      if (p == 2.0) {
        s += w * v * v;
      } else if (p == 4.0) {
        const double v2 = v * v;
        s += w * v2 * v2;
      } else {
        s += w * std::pow(v, p);
      }
    });
    cell_sum[c] = s;
  });
  double total = 0.0;
  for (double s : cell_sum) total += s;
  return std::pow(total, 1.0 / p);
}

DofMap make_dofmap(const Mesh& mesh, int k) {
  if (k < 0 || k + 3 > kMaxDegree) throw UnsupportedOrder("k = " + std::to_string(k));
  DofMap dm;
  dm.k = k;
  dm.n_flux = mesh.n_facets();
  dm.n_cells = mesh.n_cells();
  return dm;
}

}  // namespace pbmix
