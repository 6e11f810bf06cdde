#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pbmix/elements.hpp"
#include "pbmix/loads.hpp"
#include "pbmix/mesh.hpp"

namespace pbmix {

// A fully specified experiment: geometry, coefficients, load, boundary data
// and (when available) the exact solution used for error reporting.
struct CaseDef {
  enum class Regularity { Smooth, L2Rough, HminusOne, NoExact };

  std::string name;
  std::optional<Rect> rect;  // structured start mesh on this box...
  int start_nx = 2;
  std::string mesh_file;     // ...or fixture start mesh (unstructured domains)
  MarkerRule marker;

  std::function<double(const Vec2&)> eps;
  double eps_lo = 1.0, eps_hi = 1.0;
  std::function<double(const Vec2&)> kappa;
  std::function<Vec2(const Vec2&)> u;

  std::function<double(const Vec2&)> psi_ex;
  std::function<Vec2(const Vec2&)> grad_psi_ex;
  std::function<Vec2(const Vec2&)> zeta_ex;
  std::function<double(const Vec2&)> div_zeta_ex;  // null when not integrable
  Regularity regularity = Regularity::Smooth;

  LoadFunctional load;
  // raw density for the unregularised comparison path; only set when the
  // load is a genuine L2 density
  std::function<double(const Vec2&)> density;

  std::function<double(const Vec2&)> psi_d;
  std::function<double(const Vec2&)> zeta_n;

  // cells whose integrands need the one-level quadrature subdivision
  RefinePred quad_refine;

  Mesh start_mesh(const std::string& mesh_override = {}) const;
};

// ex1-smooth, ex1-rough, ex2, ex3-line; throws UnknownCase otherwise.
CaseDef builtin_case(const std::string& name);
std::vector<std::string> builtin_case_names();

// Fixture lookup: explicit path, $PBMIX_DATA_DIR, ./data/meshes and parents,
// then the source-tree location baked in at build time.
std::string find_data_file(const std::string& name);

}  // namespace pbmix
