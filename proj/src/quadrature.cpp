#include "pbmix/quadrature.hpp"

#include <cassert>
#include <cmath>
#include <map>
#include <mutex>

namespace pbmix {

namespace {

// Gauss-Legendre nodes/weights on (-1,1) by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Chebyshev-based initial guess, then Newton on P_n(t) = 0.
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2 * j - 1) * t * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-16) break;
    }
    x[i] = -t;
    x[n - 1 - i] = t;
    const double wi = 2.0 / ((1.0 - t * t) * dp * dp);
    w[i] = wi;
    w[n - 1 - i] = wi;
  }
}

// Collapsed (Duffy) tensor rule: x = u, y = v*(1-u) maps the unit square to
// the reference triangle with Jacobian (1-u). For f of total degree d the
// integrand is degree d+1 in u and d in v, so nu = ceil((d+2)/2) and
// nv = ceil((d+1)/2) Gauss points are exact.
TriangleRule build_triangle_rule(int degree) {
  assert(degree >= 0);
  const int d = degree < 1 ? 1 : degree;
  const int nu = (d + 3) / 2;
  const int nv = (d + 2) / 2;
  std::vector<double> xu, wu, xv, wv;
  gauss_legendre(nu, xu, wu);
  gauss_legendre(nv, xv, wv);
  TriangleRule rule;
  rule.degree = degree;
  rule.bary.reserve(static_cast<size_t>(nu) * nv);
  rule.weights.reserve(static_cast<size_t>(nu) * nv);
  for (int i = 0; i < nu; ++i) {
    const double u = 0.5 * (xu[i] + 1.0);
    const double cu = 0.5 * wu[i];
    for (int j = 0; j < nv; ++j) {
      const double v = 0.5 * (xv[j] + 1.0);
      const double cv = 0.5 * wv[j];
      const double x = u;
      const double y = v * (1.0 - u);
      rule.bary.push_back({1.0 - x - y, x, y});
      rule.weights.push_back(cu * cv * (1.0 - u));
    }
  }
  return rule;
}

}  // namespace

const TriangleRule& triangle_rule(int degree) {
  static std::map<int, TriangleRule> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(degree);
  if (it == cache.end()) it = cache.emplace(degree, build_triangle_rule(degree)).first;
  return it->second;
}

const LineRule& line_rule(int npoints) {
  static std::map<int, LineRule> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(npoints);
  if (it == cache.end()) {
    std::vector<double> x, w;
    gauss_legendre(npoints, x, w);
    LineRule rule;
    for (int i = 0; i < npoints; ++i) {
      rule.points.push_back(0.5 * (x[i] + 1.0));
      rule.weights.push_back(0.5 * w[i]);
    }
    it = cache.emplace(npoints, std::move(rule)).first;
  }
  return it->second;
}

}  // namespace pbmix
