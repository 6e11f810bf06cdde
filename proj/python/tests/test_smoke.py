import math

import pbmix


def test_case_catalogue():
    names = pbmix.case_names()
    assert names == ["ex1-smooth", "ex1-rough", "ex2", "ex3-line"]


def test_mesh_generation_and_refinement():
    m = pbmix.generate_mesh(2)
    assert m.n_verts == 9
    assert m.n_cells == 8
    assert m.n_facets == 16
    assert math.isclose(m.h_max, math.sqrt(2) / 2, rel_tol=1e-12)
    fine = pbmix.refine_mesh(m)
    assert fine.n_cells == 32
    assert math.isclose(fine.h_max, m.h_max / 2, rel_tol=1e-12)
    assert len(m.vertices()) == 9
    assert all(len(c) == 3 for c in m.cells())


def test_mesh_text_round_trip():
    m = pbmix.generate_mesh(3, rect=[0.0, 0.0, 2.0, 1.0], neumann_right=True, ny=2)
    text = pbmix.write_mesh_text(m)
    back = pbmix.read_mesh_text(text)
    assert back.n_verts == m.n_verts
    assert back.n_cells == m.n_cells
    assert pbmix.write_mesh_text(back) == text


def test_convergence_rows():
    rep = pbmix.run_convergence("ex1-smooth", levels=3, threads=1)
    assert rep["case"] == "ex1-smooth"
    assert rep["used_q"] is True
    rows = rep["rows"]
    assert [r["level"] for r in rows] == [1, 2, 3]
    assert rows[0]["eoc_psi"] is None
    assert rows[2]["e_psi_l4"] < rows[1]["e_psi_l4"] < rows[0]["e_psi_l4"]
    assert 0.8 < rows[2]["eoc_psi"] < 1.2
    assert 1.5 < rows[2]["eoc_post"] < 2.5
    header = rep["csv"].splitlines()[0]
    assert header == (
        "level,h,dofs,e_flux_l2,e_flux_div43,e_psi_l4,e_post_l2,eoc_flux,eoc_psi,eoc_post"
    )
    assert len(rep["csv"].splitlines()) == 4


def test_solve_case_fields():
    sol = pbmix.solve_case("ex1-smooth", level=2)
    assert sol["dofs"] == 88
    assert sol["rel_residual"] < 1e-10
    assert sol["advection_l4"] > 0
    for key in ("cx", "cy", "psi", "psi_post", "zeta_x", "zeta_y"):
        assert len(sol[key]) == 32
    assert max(abs(v) for v in sol["psi"]) < 1.2


def test_fixture_mesh_case():
    sol = pbmix.solve_case("ex3-line")
    assert sol["dofs"] == 32 + 53
    assert sol["rel_residual"] < 1e-10


def test_builtin_selftest():
    results = pbmix.selftest()
    assert len(results) >= 20
    failed = [name for name, ok, _ in results if not ok]
    assert failed == []
