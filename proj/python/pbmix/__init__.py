"""Mixed finite elements for advection-diffusion-reaction problems with
measure-valued and functional loads: lowest-order flux/potential solver,
load smoothing, local potential recovery and convergence studies."""

from ._core import (
    Mesh,
    case_names,
    generate_mesh,
    read_mesh_text,
    refine_mesh,
    run_convergence,
    selftest,
    set_thread_count,
    solve_case,
    write_mesh_text,
)

__all__ = [
    "Mesh",
    "case_names",
    "generate_mesh",
    "read_mesh_text",
    "refine_mesh",
    "run_convergence",
    "selftest",
    "set_thread_count",
    "solve_case",
    "write_mesh_text",
]
