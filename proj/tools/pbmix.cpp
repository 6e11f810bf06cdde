// Command line front end: mesh utilities, single solves, convergence studies
// and the invariant selftest.
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "pbmix/cases.hpp"
#include "pbmix/convergence.hpp"
#include "pbmix/errors.hpp"
#include "pbmix/parallel.hpp"
#include "pbmix/selftest.hpp"

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw pbmix::Error("cannot open output file " + path);
  os << text;
}

// JSON config supplies defaults; flags given on the command line win.
void apply_config(CLI::App* sub, const std::string& path,
                  const std::vector<std::pair<std::string, std::function<void(const json&)>>>& keys) {
  if (path.empty()) return;
  std::ifstream is(path);
  if (!is) throw pbmix::Error("cannot open config file " + path);
  json cfg = json::parse(is);
  for (const auto& item : cfg.items()) {
    const bool known = std::any_of(keys.begin(), keys.end(),
                                   [&](const auto& kv) { return kv.first == item.key(); });
    if (!known) {
      std::string valid;
      for (const auto& [key, apply] : keys) valid += (valid.empty() ? "" : ", ") + key;
      throw pbmix::Error("unknown config key '" + item.key() + "' (valid: " + valid + ")");
    }
  }
  for (const auto& [key, apply] : keys) {
    if (!cfg.contains(key)) continue;
    const std::string flag = "--" + key;
    if (sub->count(flag) == 0) apply(cfg.at(key));
  }
}

struct SolveArgs {
  std::string case_name = "ex1-smooth";
  int level = 1;
  int k = 0;
  bool no_q = false;
  int quad_assembly = 6;
  int quad_error = 12;
  std::string mesh_path;
  std::string out;
  std::string config;
};

int cmd_solve(const SolveArgs& a) {
  const pbmix::CaseDef cd = pbmix::builtin_case(a.case_name);
  auto mesh = std::make_shared<pbmix::Mesh>(cd.start_mesh(a.mesh_path));
  for (int l = 1; l < a.level; ++l)
    mesh = std::make_shared<pbmix::Mesh>(pbmix::uniform_refine(*mesh));

  pbmix::RunConfig rc;
  rc.case_name = a.case_name;
  rc.k = a.k;
  rc.use_q = !a.no_q;
  rc.quad_assembly = a.quad_assembly;
  rc.quad_error = a.quad_error;
  const pbmix::LevelSolution sol = pbmix::solve_level(cd, mesh, rc);

  std::ostringstream os;
  os << "# case=" << a.case_name << " level=" << a.level << " cells=" << mesh->n_cells()
     << " dofs=" << sol.dofs << " h=" << fmt(mesh->h_max) << "\n";
  os << "# advection_l4=" << fmt(sol.u_h_l4) << " rel_residual=" << fmt(sol.rel_residual) << "\n";
  os << "cell,cx,cy,psi,psi_post,zeta_x,zeta_y\n";
  for (int c = 0; c < mesh->n_cells(); ++c) {
    const pbmix::Vec2 s = mesh->centroid(c);
    const pbmix::Vec2 z = sol.zeta.value(c, s);
    os << c << ',' << fmt(s.x) << ',' << fmt(s.y) << ',' << fmt(sol.psi.value(c, s)) << ','
       << fmt(sol.post.value(c, s)) << ',' << fmt(z.x) << ',' << fmt(z.y) << '\n';
  }
  write_output(a.out, os.str());
  return 0;
}

int cmd_convergence(const pbmix::RunConfig& rc) {
  const pbmix::ConvergenceReport report = pbmix::run_convergence(rc);
  write_output(rc.out, report.csv());
  if (!rc.out.empty()) std::cerr << "wrote " << rc.out << "\n";
  return 0;
}

int cmd_selftest() {
  const auto results = pbmix::run_selftest();
  int failures = 0;
  for (const auto& r : results) {
    std::cout << (r.passed ? "[ ok ] " : "[FAIL] ") << r.name;
    if (!r.detail.empty()) std::cout << " (" << r.detail << ")";
    std::cout << "\n";
    failures += r.passed ? 0 : 1;
  }
  std::cout << results.size() - failures << "/" << results.size() << " checks passed\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixed finite element solver for advection-diffusion-reaction problems with "
               "measure and functional loads"};
  app.require_subcommand(1);
  app.fallthrough();  // let --threads appear after the verb as well

  int threads = -1;
  app.add_option("--threads", threads, "worker threads (0 = all cores, also PBMIX_THREADS)");

  // mesh generate / refine / info
  auto* mesh_cmd = app.add_subcommand("mesh", "generate, refine or inspect mesh files");
  mesh_cmd->require_subcommand(1);

  auto* gen = mesh_cmd->add_subcommand("generate", "structured triangulation of a rectangle");
  int gen_nx = 2, gen_ny = 0;
  std::vector<double> gen_rect{0.0, 0.0, 1.0, 1.0};
  bool gen_neumann_right = false;
  std::string gen_out;
  gen->add_option("--nx", gen_nx, "squares along x")->required();
  gen->add_option("--ny", gen_ny, "squares along y (default nx)");
  gen->add_option("--rect", gen_rect, "domain x0 y0 x1 y1")->expected(4);
  gen->add_flag("--neumann-right", gen_neumann_right, "mark the right edge Neumann");
  gen->add_option("--out", gen_out, "output path (default stdout)");

  auto* ref = mesh_cmd->add_subcommand("refine", "uniform red refinement");
  std::string ref_in, ref_out;
  int ref_times = 1;
  ref->add_option("--in", ref_in, "input mesh")->required();
  ref->add_option("--times", ref_times, "refinement sweeps");
  ref->add_option("--out", ref_out, "output path (default stdout)");

  auto* info = mesh_cmd->add_subcommand("info", "print mesh statistics");
  std::string info_in;
  info->add_option("--in", info_in, "input mesh")->required();

  std::string case_help = "builtin case name (";
  for (const auto& n : pbmix::builtin_case_names()) case_help += n + ", ";
  case_help.replace(case_help.size() - 2, 2, ")");

  // solve
  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "solve one refinement level and dump cell values");
  solve->add_option("--case", sa.case_name, case_help);
  solve->add_option("--level", sa.level, "refinement level (1 = start mesh)");
  solve->add_option("--k", sa.k, "potential space degree");
  solve->add_flag("--no-q", sa.no_q, "skip load regularisation (plain density quadrature)");
  solve->add_option("--quad-assembly", sa.quad_assembly, "assembly quadrature degree");
  solve->add_option("--quad-error", sa.quad_error, "functional quadrature degree");
  solve->add_option("--mesh", sa.mesh_path, "start mesh override");
  solve->add_option("--out", sa.out, "output path (default stdout)");
  solve->add_option("--config", sa.config, "JSON file with option defaults");

  // convergence
  pbmix::RunConfig rc;
  std::string conv_config;
  auto* conv = app.add_subcommand("convergence", "refinement study, CSV per level");
  conv->add_option("--case", rc.case_name, case_help);
  conv->add_option("--levels", rc.levels, "number of levels");
  conv->add_option("--k", rc.k, "potential space degree");
  bool conv_no_q = false;
  conv->add_flag("--no-q", conv_no_q, "skip load regularisation (plain density quadrature)");
  conv->add_option("--quad-assembly", rc.quad_assembly, "assembly quadrature degree");
  conv->add_option("--quad-error", rc.quad_error, "error quadrature degree");
  conv->add_option("--seed", rc.seed, "seed recorded for reproducibility");
  conv->add_option("--mesh", rc.mesh_path, "start mesh override");
  conv->add_option("--out", rc.out, "CSV path (default stdout)");
  conv->add_option("--config", conv_config, "JSON file with option defaults");

  auto* selftest = app.add_subcommand("selftest", "run the invariant battery");
  (void)selftest;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (const char* env = std::getenv("PBMIX_THREADS"); env && threads < 0)
      threads = std::atoi(env);
    if (threads >= 0) pbmix::set_thread_count(threads);

    if (gen->parsed()) {
      pbmix::MarkerRule rule;
      const double x1 = gen_rect[2];
      if (gen_neumann_right)
        rule = [x1](const pbmix::Vec2& m) {
          return m.x > x1 - 1e-9 ? pbmix::Marker::Neumann : pbmix::Marker::Dirichlet;
        };
      else
        rule = [](const pbmix::Vec2&) { return pbmix::Marker::Dirichlet; };
      const pbmix::Mesh m = pbmix::generate_structured(
          gen_nx, {gen_rect[0], gen_rect[1], gen_rect[2], gen_rect[3]}, rule, gen_ny);
      write_output(gen_out, pbmix::write_mesh_string(m));
      return 0;
    }
    if (ref->parsed()) {
      pbmix::Mesh m = pbmix::read_mesh(ref_in);
      for (int i = 0; i < ref_times; ++i) m = pbmix::uniform_refine(m);
      write_output(ref_out, pbmix::write_mesh_string(m));
      return 0;
    }
    if (info->parsed()) {
      const pbmix::Mesh m = pbmix::read_mesh(info_in);
      double area = 0.0;
      int dirichlet = 0, neumann = 0;
      for (int c = 0; c < m.n_cells(); ++c) area += m.area(c);
      for (const auto& f : m.facets) {
        dirichlet += f.marker == pbmix::Marker::Dirichlet ? 1 : 0;
        neumann += f.marker == pbmix::Marker::Neumann ? 1 : 0;
      }
      std::cout << "vertices " << m.n_verts() << "\ncells " << m.n_cells() << "\nfacets "
                << m.n_facets() << "\ndirichlet_facets " << dirichlet << "\nneumann_facets "
                << neumann << "\nh_max " << fmt(m.h_max) << "\narea " << fmt(area) << "\n";
      return 0;
    }
    if (solve->parsed()) {
      apply_config(solve, sa.config,
                   {{"case", [&](const json& v) { sa.case_name = v.get<std::string>(); }},
                    {"level", [&](const json& v) { sa.level = v.get<int>(); }},
                    {"k", [&](const json& v) { sa.k = v.get<int>(); }},
                    {"no-q", [&](const json& v) { sa.no_q = v.get<bool>(); }},
                    {"quad-assembly", [&](const json& v) { sa.quad_assembly = v.get<int>(); }},
                    {"quad-error", [&](const json& v) { sa.quad_error = v.get<int>(); }},
                    {"mesh", [&](const json& v) { sa.mesh_path = v.get<std::string>(); }},
                    {"out", [&](const json& v) { sa.out = v.get<std::string>(); }}});
      return cmd_solve(sa);
    }
    if (conv->parsed()) {
      apply_config(conv, conv_config,
                   {{"case", [&](const json& v) { rc.case_name = v.get<std::string>(); }},
                    {"levels", [&](const json& v) { rc.levels = v.get<int>(); }},
                    {"k", [&](const json& v) { rc.k = v.get<int>(); }},
                    {"no-q", [&](const json& v) { conv_no_q = v.get<bool>(); }},
                    {"quad-assembly", [&](const json& v) { rc.quad_assembly = v.get<int>(); }},
                    {"quad-error", [&](const json& v) { rc.quad_error = v.get<int>(); }},
                    {"seed", [&](const json& v) { rc.seed = v.get<unsigned long>(); }},
                    {"mesh", [&](const json& v) { rc.mesh_path = v.get<std::string>(); }},
                    {"out", [&](const json& v) { rc.out = v.get<std::string>(); }}});
      rc.use_q = !conv_no_q;
      if (threads >= 0) rc.threads = threads;
      return cmd_convergence(rc);
    }
    if (selftest->parsed()) return cmd_selftest();
  } catch (const pbmix::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
