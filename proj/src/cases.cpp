#include "pbmix/cases.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>

#include "pbmix/errors.hpp"

#ifndef PBMIX_SOURCE_DATA_DIR
#define PBMIX_SOURCE_DATA_DIR ""
#endif

namespace pbmix {

namespace {

constexpr double kPi = 3.14159265358979323846;

// cells with a vertex on x=y get the subdivided quadrature
bool touches_diagonal(const Mesh& mesh, int c) {
  for (int v : mesh.cells[c])
    if (std::abs(mesh.verts[v].x - mesh.verts[v].y) < 1e-10) return true;
  return false;
}

CaseDef make_ex1(bool rough) {
  CaseDef cd;
  cd.name = rough ? "ex1-rough" : "ex1-smooth";
  cd.rect = Rect{0.0, 0.0, 1.0, 1.0};
  cd.start_nx = 2;
  cd.marker = [](const Vec2& m) {
    return m.x > 1.0 - 1e-9 ? Marker::Neumann : Marker::Dirichlet;
  };
  cd.eps = [](const Vec2&) { return 1.0; };
  cd.eps_lo = cd.eps_hi = 1.0;
  cd.kappa = [](const Vec2&) { return 1.0; };
  cd.u = [](const Vec2& p) {
    return Vec2{std::cos(kPi * p.x) * std::sin(kPi * p.y),
                -std::sin(kPi * p.x) * std::cos(kPi * p.y)};
  };

  if (!rough) {
    auto psi = [](const Vec2& p) { return std::sin(kPi * p.x) * std::sin(kPi * p.y); };
    auto gpsi = [](const Vec2& p) {
      return Vec2{kPi * std::cos(kPi * p.x) * std::sin(kPi * p.y),
                  kPi * std::sin(kPi * p.x) * std::cos(kPi * p.y)};
    };
    auto adv = [](const Vec2& p) {
      const double cx = std::cos(kPi * p.x), sx = std::sin(kPi * p.x);
      const double cy = std::cos(kPi * p.y), sy = std::sin(kPi * p.y);
      return kPi * (cx * cx * sy * sy - sx * sx * cy * cy);  // u . grad psi
    };
    cd.psi_ex = psi;
    cd.grad_psi_ex = gpsi;
    cd.zeta_ex = [psi, gpsi, u = cd.u](const Vec2& p) { return gpsi(p) - u(p) * psi(p); };
    cd.div_zeta_ex = [psi, adv](const Vec2& p) { return -2.0 * kPi * kPi * psi(p) - adv(p); };
    cd.regularity = CaseDef::Regularity::Smooth;
    auto g = [psi, adv](const Vec2& p) { return (1.0 + 2.0 * kPi * kPi) * psi(p) + adv(p); };
    cd.load = DensityL2{g};
    cd.density = g;
    cd.psi_d = psi;
    cd.zeta_n = [](const Vec2& p) { return -kPi * std::sin(kPi * p.y); };
  } else {
    // |x-y|^(3/4) factor: gradient blows up like |x-y|^(-1/4) along the
    // diagonal, which the aligned structured meshes keep on cell edges
    auto amp = [](double s) { return std::pow(std::abs(s), 0.75); };
    auto damp = [](double s) {
      if (s == 0.0) return 0.0;
      return 0.75 * std::pow(std::abs(s), -0.25) * (s > 0 ? 1.0 : -1.0);
    };
    auto psi = [amp](const Vec2& p) {
      return amp(p.x - p.y) * std::sin(kPi * p.x) * std::sin(kPi * p.y);
    };
    auto gpsi = [amp, damp](const Vec2& p) {
      const double S = std::sin(kPi * p.x) * std::sin(kPi * p.y);
      const double a = amp(p.x - p.y), da = damp(p.x - p.y);
      return Vec2{da * S + a * kPi * std::cos(kPi * p.x) * std::sin(kPi * p.y),
                  -da * S + a * kPi * std::sin(kPi * p.x) * std::cos(kPi * p.y)};
    };
    cd.psi_ex = psi;
    cd.grad_psi_ex = gpsi;
    cd.zeta_ex = [psi, gpsi, u = cd.u](const Vec2& p) { return gpsi(p) - u(p) * psi(p); };
    cd.div_zeta_ex = nullptr;  // distributional part along x=y
    cd.regularity = CaseDef::Regularity::HminusOne;
    WeakFormLoad wf;
    wf.psi = psi;
    wf.grad_psi = gpsi;
    wf.u = cd.u;
    wf.eps = cd.eps;
    wf.kappa = cd.kappa;
    wf.zeta_n = [amp](const Vec2& p) {
      return -kPi * amp(1.0 - p.y) * std::sin(kPi * p.y);
    };
    cd.load = wf;
    cd.psi_d = psi;
    cd.zeta_n = wf.zeta_n;
    cd.quad_refine = touches_diagonal;
  }
  return cd;
}

struct Ex2Parts {
  // separable pieces of psi = a(x)(1-x^2)(1-y^2) with a = x|x|^delta
  static constexpr double delta = 65.0 / 128.0;
  static double a(double x) { return x == 0.0 ? 0.0 : x * std::pow(std::abs(x), delta); }
  static double da(double x) { return (1.0 + delta) * std::pow(std::abs(x), delta); }
  static double dda(double x) {
    if (x == 0.0) return 0.0;  // integrable singularity, never hit by quadrature
    return (1.0 + delta) * delta * std::pow(std::abs(x), delta - 1.0) * (x > 0 ? 1.0 : -1.0);
  }
  static double X(double x) { return a(x) * (1.0 - x * x); }
  static double dX(double x) { return da(x) * (1.0 - x * x) - 2.0 * x * a(x); }
  static double ddX(double x) { return dda(x) * (1.0 - x * x) - 4.0 * x * da(x) - 2.0 * a(x); }
};

CaseDef make_ex2() {
  CaseDef cd;
  cd.name = "ex2";
  cd.rect = Rect{-1.0, -1.0, 1.0, 1.0};
  cd.start_nx = 2;
  cd.marker = [](const Vec2&) { return Marker::Dirichlet; };
  cd.eps = [](const Vec2& p) { return std::exp(-p.x * p.y); };
  cd.eps_lo = std::exp(-1.0);
  cd.eps_hi = std::exp(1.0);
  cd.kappa = [](const Vec2& p) {
    const double s = std::sin(p.x * p.y);
    return 0.5 + s * s;
  };
  cd.u = [](const Vec2& p) {
    return Vec2{std::cos(kPi * p.x / 2) * std::sin(kPi * p.y / 2),
                -std::sin(kPi * p.x / 2) * std::cos(kPi * p.y / 2)};
  };

  using P = Ex2Parts;
  auto psi = [](const Vec2& p) { return P::X(p.x) * (1.0 - p.y * p.y); };
  auto gpsi = [](const Vec2& p) {
    return Vec2{P::dX(p.x) * (1.0 - p.y * p.y), P::X(p.x) * (-2.0 * p.y)};
  };
  auto div_zeta = [eps = cd.eps, u = cd.u, gpsi](const Vec2& p) {
    const double e = eps(p);
    const Vec2 ge{-p.y * e, -p.x * e};
    const double lap = P::ddX(p.x) * (1.0 - p.y * p.y) - 2.0 * P::X(p.x);
    return dot(ge, gpsi(p)) + e * lap - dot(u(p), gpsi(p));
  };
  auto g = [kappa = cd.kappa, psi, div_zeta](const Vec2& p) {
    return kappa(p) * psi(p) - div_zeta(p);
  };

  cd.psi_ex = psi;
  cd.grad_psi_ex = gpsi;
  cd.zeta_ex = [eps = cd.eps, u = cd.u, psi, gpsi](const Vec2& p) {
    return gpsi(p) * eps(p) - u(p) * psi(p);
  };
  cd.div_zeta_ex = div_zeta;
  cd.regularity = CaseDef::Regularity::L2Rough;
  cd.load = DensityL2{g};
  cd.density = g;
  cd.psi_d = psi;

  // derivative bookkeeping above is easy to get wrong: cross-check the
  // hand-derived divergence against central differences of zeta
  {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> dist(-0.95, 0.95);
    const double step = 1e-6;
    int checked = 0;
    while (checked < 20) {
      const Vec2 p{dist(rng), dist(rng)};
      if (std::abs(p.x) <= 0.05) continue;
      ++checked;
      auto zx = [&](double x, double y) { return cd.zeta_ex({x, y}).x; };
      auto zy = [&](double x, double y) { return cd.zeta_ex({x, y}).y; };
      const double fd = (zx(p.x + step, p.y) - zx(p.x - step, p.y)) / (2 * step) +
                        (zy(p.x, p.y + step) - zy(p.x, p.y - step)) / (2 * step);
      const double an = div_zeta(p);
      if (std::abs(fd - an) > 1e-4 * (std::abs(an) + 1.0))
        throw InvariantViolation("manufactured density disagrees with finite differences");
    }
  }
  return cd;
}

CaseDef make_ex3() {
  CaseDef cd;
  cd.name = "ex3-line";
  cd.mesh_file = "ex3-line-coarse.msh";
  cd.marker = [](const Vec2&) { return Marker::Dirichlet; };
  cd.eps = [](const Vec2&) { return 1e-3; };
  cd.eps_lo = cd.eps_hi = 1e-3;
  cd.kappa = [](const Vec2&) { return 1.0; };
  const double U0 = 0.25, sigma = 0.08, theta = 0.12;
  cd.u = [=](const Vec2& p) {
    const double t = (p.y - 0.5) / sigma;
    const double sech = 1.0 / std::cosh(t);
    return Vec2{U0 * sech * sech * (1.0 + theta * std::sin(2.0 * kPi * p.x)),
                -2.0 * kPi * theta * U0 * sigma * std::tanh(t) * std::cos(2.0 * kPi * p.x)};
  };
  cd.regularity = CaseDef::Regularity::NoExact;
  cd.load = LineDirac{{0.4, 0.25}, {0.6, 0.85}, 1.0};
  cd.psi_d = [](const Vec2&) { return 0.0; };
  return cd;
}

}  // namespace

Mesh CaseDef::start_mesh(const std::string& mesh_override) const {
  if (!mesh_override.empty()) return read_mesh(mesh_override);
  if (rect) return generate_structured(start_nx, *rect, marker);
  return read_mesh(find_data_file(mesh_file));
}

CaseDef builtin_case(const std::string& name) {
  if (name == "ex1-smooth") return make_ex1(false);
  if (name == "ex1-rough") return make_ex1(true);
  if (name == "ex2") return make_ex2();
  if (name == "ex3-line") return make_ex3();
  throw UnknownCase(name);
}

std::vector<std::string> builtin_case_names() {
  return {"ex1-smooth", "ex1-rough", "ex2", "ex3-line"};
}

std::string find_data_file(const std::string& name) {
  namespace fs = std::filesystem;
  std::vector<std::string> candidates;
  candidates.push_back(name);
  if (const char* env = std::getenv("PBMIX_DATA_DIR")) candidates.push_back(std::string(env) + "/" + name);
  for (const char* prefix : {"data/meshes/", "../data/meshes/", "../../data/meshes/"})
    candidates.push_back(prefix + name);
  const std::string baked = PBMIX_SOURCE_DATA_DIR;
  if (!baked.empty()) candidates.push_back(baked + "/" + name);
  for (const auto& c : candidates)
    if (fs::exists(c)) return c;
  throw ParseError("data file not found: " + name);
}

}  // namespace pbmix
