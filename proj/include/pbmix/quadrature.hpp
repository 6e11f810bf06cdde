#pragma once

#include <array>
#include <vector>

namespace pbmix {

// Quadrature on the reference triangle (0,0)-(1,0)-(0,1).
// Points are stored as barycentric triples (l0,l1,l2), weights sum to the
// reference area 1/2. All weights are positive, all points strictly interior.
struct TriangleRule {
  int degree = 0;
  std::vector<std::array<double, 3>> bary;
  std::vector<double> weights;
};

// Rule exact for polynomials of total degree <= degree (cached, thread-safe).
const TriangleRule& triangle_rule(int degree);

// Gauss-Legendre rule on [0,1]; n points integrate degree 2n-1 exactly;
// weights sum to 1.
struct LineRule {
  std::vector<double> points;
  std::vector<double> weights;
};

const LineRule& line_rule(int npoints);

}  // namespace pbmix
