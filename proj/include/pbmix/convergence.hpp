#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pbmix/cases.hpp"
#include "pbmix/postprocess.hpp"
#include "pbmix/system.hpp"

namespace pbmix {

struct RunConfig {
  std::string case_name = "ex1-smooth";
  int levels = 7;
  int k = 0;
  bool use_q = true;
  int quad_assembly = 6;
  int quad_error = 12;
  int line_points = 5;
  int threads = 0;  // 0 = all cores; results are thread-count independent
  unsigned long seed = 12345;
  std::string mesh_path;  // start-mesh override
  std::string out;        // CSV destination ("" = stdout)
};

// One solved refinement level. Fields reference *mesh, which the shared_ptr
// keeps alive.
struct LevelSolution {
  std::shared_ptr<Mesh> mesh;
  FluxField zeta;
  ScalarField psi;
  ScalarField post;
  VectorField u_h;
  long dofs = 0;
  double rel_residual = 0.0;
  double u_h_l4 = 0.0;
};

LevelSolution solve_level(const CaseDef& cd, std::shared_ptr<Mesh> mesh, const RunConfig& rc);

struct ErrorRecord {
  double e_flux_l2 = 0.0;
  std::optional<double> e_flux_div43;  // absent when div zeta_ex is not integrable
  double e_psi_l4 = 0.0;
  double e_post_l2 = 0.0;
};

// errors against the manufactured solution
ErrorRecord compute_errors(const CaseDef& cd, const LevelSolution& sol, int quad_error);

// errors of a coarse solution against a reference living `gap` uniform
// refinements deeper; the coarse fields are transferred exactly (each coarse
// cell polynomial restricted to its descendants)
ErrorRecord compare_to_reference(const LevelSolution& coarse, const LevelSolution& ref, int gap,
                                 int quad_error);

struct LevelRow {
  int level = 0;
  double h = 0.0;
  long dofs = 0;
  ErrorRecord err;
  std::optional<double> eoc_flux, eoc_psi, eoc_post;
};

struct ConvergenceReport {
  std::string case_name;
  bool used_q = true;
  std::vector<LevelRow> rows;
  std::string csv() const;  // byte-deterministic
};

ConvergenceReport run_convergence(const RunConfig& rc);

double eoc(double e_coarse, double e_fine, double h_coarse, double h_fine);

}  // namespace pbmix
