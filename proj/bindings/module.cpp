#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pbmix/cases.hpp"
#include "pbmix/convergence.hpp"
#include "pbmix/parallel.hpp"
#include "pbmix/selftest.hpp"

namespace py = pybind11;
using namespace pbmix;

namespace {

RunConfig make_config(const std::string& case_name, int levels, int k, bool use_q,
                      int quad_assembly, int quad_error, int threads,
                      const std::string& mesh_path) {
  RunConfig rc;
  rc.case_name = case_name;
  rc.levels = levels;
  rc.k = k;
  rc.use_q = use_q;
  rc.quad_assembly = quad_assembly;
  rc.quad_error = quad_error;
  rc.threads = threads;
  rc.mesh_path = mesh_path;
  return rc;
}

py::dict row_dict(const LevelRow& r) {
  py::dict d;
  d["level"] = r.level;
  d["h"] = r.h;
  d["dofs"] = r.dofs;
  d["e_flux_l2"] = r.err.e_flux_l2;
  d["e_flux_div43"] = r.err.e_flux_div43 ? py::object(py::float_(*r.err.e_flux_div43))
                                         : py::object(py::none());
  d["e_psi_l4"] = r.err.e_psi_l4;
  d["e_post_l2"] = r.err.e_post_l2;
  d["eoc_flux"] = r.eoc_flux ? py::object(py::float_(*r.eoc_flux)) : py::object(py::none());
  d["eoc_psi"] = r.eoc_psi ? py::object(py::float_(*r.eoc_psi)) : py::object(py::none());
  d["eoc_post"] = r.eoc_post ? py::object(py::float_(*r.eoc_post)) : py::object(py::none());
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "mixed finite element solver for advection-diffusion-reaction problems "
            "with measure and functional loads";

  py::class_<Mesh>(m, "Mesh")
      .def_property_readonly("n_verts", &Mesh::n_verts)
      .def_property_readonly("n_cells", &Mesh::n_cells)
      .def_property_readonly("n_facets", &Mesh::n_facets)
      .def_readonly("h_max", &Mesh::h_max)
      .def("vertices",
           [](const Mesh& mm) {
             std::vector<std::pair<double, double>> out;
             out.reserve(mm.verts.size());
             for (const auto& v : mm.verts) out.emplace_back(v.x, v.y);
             return out;
           })
      .def("cells", [](const Mesh& mm) { return mm.cells; })
      .def("__repr__", [](const Mesh& mm) {
        return "<pbmix.Mesh verts=" + std::to_string(mm.n_verts()) +
               " cells=" + std::to_string(mm.n_cells()) + ">";
      });

  m.def(
      "generate_mesh",
      [](int nx, std::array<double, 4> rect, bool neumann_right, int ny) {
        MarkerRule rule;
        const double x1 = rect[2];
        if (neumann_right)
          rule = [x1](const Vec2& p) {
            return p.x > x1 - 1e-9 ? Marker::Neumann : Marker::Dirichlet;
          };
        else
          rule = [](const Vec2&) { return Marker::Dirichlet; };
        return generate_structured(nx, {rect[0], rect[1], rect[2], rect[3]}, rule, ny);
      },
      py::arg("nx"), py::arg("rect") = std::array<double, 4>{0, 0, 1, 1},
      py::arg("neumann_right") = false, py::arg("ny") = 0);

  m.def("refine_mesh", &uniform_refine, py::arg("mesh"));
  m.def("read_mesh_text", &read_mesh_string, py::arg("text"));
  m.def("write_mesh_text", &write_mesh_string, py::arg("mesh"));
  m.def("case_names", &builtin_case_names);
  m.def("set_thread_count", &set_thread_count, py::arg("n"));

  m.def(
      "run_convergence",
      [](const std::string& case_name, int levels, int k, bool use_q, int quad_assembly,
         int quad_error, int threads, const std::string& mesh_path) {
        const RunConfig rc = make_config(case_name, levels, k, use_q, quad_assembly, quad_error,
                                         threads, mesh_path);
        ConvergenceReport rep;
        {
          py::gil_scoped_release release;
          rep = run_convergence(rc);
        }
        py::dict d;
        d["case"] = rep.case_name;
        d["used_q"] = rep.used_q;
        d["csv"] = rep.csv();
        py::list rows;
        for (const auto& r : rep.rows) rows.append(row_dict(r));
        d["rows"] = rows;
        return d;
      },
      py::arg("case_name"), py::arg("levels") = 4, py::arg("k") = 0, py::arg("use_q") = true,
      py::arg("quad_assembly") = 6, py::arg("quad_error") = 12, py::arg("threads") = 0,
      py::arg("mesh_path") = std::string());

  m.def(
      "solve_case",
      [](const std::string& case_name, int level, int k, bool use_q, const std::string& mesh_path) {
        const CaseDef cd = builtin_case(case_name);
        RunConfig rc;
        rc.case_name = case_name;
        rc.k = k;
        rc.use_q = use_q;
        py::gil_scoped_release release;
        auto mesh = std::make_shared<Mesh>(cd.start_mesh(mesh_path));
        for (int l = 1; l < level; ++l) mesh = std::make_shared<Mesh>(uniform_refine(*mesh));
        const LevelSolution sol = solve_level(cd, mesh, rc);
        std::vector<double> cx, cy, psi, post, zx, zy;
        for (int c = 0; c < mesh->n_cells(); ++c) {
          const Vec2 s = mesh->centroid(c);
          const Vec2 z = sol.zeta.value(c, s);
          cx.push_back(s.x);
          cy.push_back(s.y);
          psi.push_back(sol.psi.value(c, s));
          post.push_back(sol.post.value(c, s));
          zx.push_back(z.x);
          zy.push_back(z.y);
        }
        py::gil_scoped_acquire acquire;
        py::dict d;
        d["dofs"] = sol.dofs;
        d["h"] = mesh->h_max;
        d["rel_residual"] = sol.rel_residual;
        d["advection_l4"] = sol.u_h_l4;
        d["cx"] = cx;
        d["cy"] = cy;
        d["psi"] = psi;
        d["psi_post"] = post;
        d["zeta_x"] = zx;
        d["zeta_y"] = zy;
        return d;
      },
      py::arg("case_name"), py::arg("level") = 1, py::arg("k") = 0, py::arg("use_q") = true,
      py::arg("mesh_path") = std::string());

  m.def("selftest", []() {
    std::vector<std::tuple<std::string, bool, std::string>> out;
    py::gil_scoped_release release;
    for (const auto& r : run_selftest()) out.emplace_back(r.name, r.passed, r.detail);
    return out;
  });
}
