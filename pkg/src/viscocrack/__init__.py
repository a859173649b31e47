"""P1 finite elements for dynamic viscoelasticity with a degenerate viscosity
coefficient on a domain with a prescribed, straight, growing crack."""

from .analytic import (AnalyticSolution, SingularPointError, WeakForcing, benchmark_data,
                       eval_grad_S, eval_S, exact_du_dt, exact_energy, exact_grad_du_dt,
                       exact_grad_u, exact_u, strong_forcing)
from .assembly import (BoundaryData, P1Space, apply_constraints, assemble_damping,
                       assemble_loads, assemble_mass, assemble_stiffness)
from .energy import (CSV_HEADER, EnergyLedger, griffith_residual, kelvin_voigt_residual,
                     read_ledger_csv, total_work_increment)
from .material import (MaterialModel, Mode, ViscosityField, apply_B, apply_C, eval_grad_psi,
                       eval_psi, psi_time_sample)
from .mesh import (BoundaryTag, CrackedMesh, CrackSchedule, DofMap, MeshError, active_ties,
                   build_cracked_disk_mesh, build_cracked_rect_mesh, build_dofmap,
                   build_rect_mesh, write_vtk)
from .scenarios import ConfigError, RunSpec, compare_to_exact, parse_config, run_scenario
from .solver import NotSPDError, SolverError, cg_solve, dense_solve
from .timestepper import RunResult, SimConfig, SimState, StepError, init_state, run, step

__version__ = "0.1.0"

__all__ = [
    "AnalyticSolution", "BoundaryData", "BoundaryTag", "CSV_HEADER", "ConfigError",
    "CrackSchedule", "CrackedMesh", "DofMap", "EnergyLedger", "MaterialModel", "MeshError",
    "Mode", "NotSPDError", "P1Space", "RunResult", "RunSpec", "SimConfig", "SimState",
    "SingularPointError", "SolverError", "StepError", "ViscosityField", "WeakForcing",
    "active_ties", "apply_B", "apply_C", "apply_constraints", "assemble_damping",
    "assemble_loads", "assemble_mass", "assemble_stiffness", "benchmark_data",
    "build_cracked_disk_mesh", "build_cracked_rect_mesh", "build_dofmap", "build_rect_mesh",
    "cg_solve", "compare_to_exact", "dense_solve", "eval_S", "eval_grad_S", "eval_grad_psi",
    "eval_psi", "exact_du_dt", "exact_energy", "exact_grad_du_dt", "exact_grad_u", "exact_u",
    "griffith_residual", "init_state", "kelvin_voigt_residual", "parse_config",
    "psi_time_sample", "read_ledger_csv", "run", "run_scenario", "step", "strong_forcing",
    "total_work_increment", "write_vtk",
]
