"""
Implicit time stepping on the cracked domain.

Step k solves

    (M/tau^2 + K + D_k/tau) u^k = M (u^{k-1} + tau du^{k-1})/tau^2 + D_k u^{k-1}/tau + F_k + G_k

on the test space fixed by the ties active at k tau and by the Dirichlet
lifting w(k tau).  D_k is the damping matrix built from Psi at the midpoint
of the step interval, F_k the body load at the same midpoint, G_k the
Neumann load at k tau.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .assembly import (BoundaryData, P1Space, apply_constraints, assemble_damping,
                       body_load, neumann_load)
from .energy import EnergyLedger, step_identity, total_work_increment, work_boundary_terms
from .material import MaterialModel, Profile, ViscosityField, psi_time_sample
from .mesh import SPEED_WARNING_RATIO, CrackedMesh, CrackSchedule, DofMap, build_dofmap
from .solver import SolverError, cg_solve

log = logging.getLogger(__name__)


class StepError(RuntimeError):
    pass


@dataclass
class SimConfig:
    mesh: CrackedMesh
    n_steps: int
    horizon: float
    schedule: CrackSchedule
    material: MaterialModel = field(default_factory=MaterialModel)
    viscosity: ViscosityField = field(default_factory=ViscosityField)
    data: BoundaryData = field(default_factory=BoundaryData)
    solver_tol: float = 1e-10
    solver_max_iter: int | None = None
    crack_toughness: float = 1.0

    def __post_init__(self):
        if self.n_steps < 1 or self.horizon <= 0:
            raise ValueError("need n_steps >= 1 and a positive horizon")
        if self.mode_speed_ratio >= SPEED_WARNING_RATIO and self.material.mode.value == "antiplane":
            warnings.warn(f"crack speed c={self.schedule.c} is close to the bound "
                          f"|s'|^2 < lambda1 = {self.material.lambda1} required for uniqueness",
                          RuntimeWarning, stacklevel=2)

    @property
    def tau(self) -> float:
        return self.horizon / self.n_steps

    @property
    def mode_speed_ratio(self) -> float:
        return self.schedule.c ** 2 / self.material.lambda1


@dataclass
class SimState:
    """Nodal history of the scheme after step ``k``.

    ``du`` is the backward difference (u - u_prev)/tau; at k = 0 it is the
    initial velocity, which encodes the conventional pre-step vector
    u^{-1} = u^0 - tau u^1.
    """

    k: int
    t: float
    u: np.ndarray
    u_prev: np.ndarray
    du: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    G: np.ndarray
    dofmap: DofMap
    ledger: EnergyLedger
    diss_cum: float = 0.0
    work_int: float = 0.0
    solver_iterations: int = 0
    _ops: "_Operators" = field(default=None, repr=False)


class _Operators:
    """Matrices and constraint maps shared by all steps of one run."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.space = P1Space(config.mesh, config.material.dofs_per_node)
        self.M = self.space.matrix(self.space.mass_blocks())
        self.K = self.space.matrix(self.space.stiffness_blocks(config.material.voigt_C()))
        self.sides = config.mesh.node_sides()
        self._P = {}
        self._D_const = None
        self.init = {}

    def dofmap(self, t) -> DofMap:
        return build_dofmap(self.config.mesh, self.config.schedule, t,
                            self.config.material.dofs_per_node)

    def prolongation(self, dm: DofMap):
        key = len(dm.ties)
        if key not in self._P:
            self._P[key] = dm.prolongation()
        return self._P[key]

    def damping(self, k):
        cfg = self.config
        if cfg.viscosity.profile is Profile.CONSTANT:
            if self._D_const is None:
                self._D_const = assemble_damping(self.space, cfg.material,
                                                 psi_time_sample(cfg.viscosity, 1, cfg.tau))
            return self._D_const
        return assemble_damping(self.space, cfg.material, psi_time_sample(cfg.viscosity, k, cfg.tau))

    def nodal(self, provider, *args) -> np.ndarray:
        """Interpolate a provider at the nodes (flattened to DOF order)."""
        if provider is None:
            return np.zeros(self.space.ndof)
        vals = np.asarray(provider(*args, self.config.mesh.nodes, self.sides), dtype=float)
        vals = np.broadcast_to(vals, (self.config.mesh.n_nodes,) + ((self.space.dpn,) if self.space.dpn > 1 else ()))
        return np.array(vals, dtype=float).ravel()

    def dirichlet_vector(self, provider, t, dm: DofMap) -> np.ndarray:
        out = np.zeros(self.space.ndof)
        if provider is None or not len(dm.dirichlet_dofs):
            return out
        d = self.space.dpn
        nodes = np.unique(dm.dirichlet_dofs // d)
        vals = np.asarray(provider(t, self.config.mesh.nodes[nodes], self.sides[nodes]), dtype=float)
        vals = np.broadcast_to(vals, (len(nodes),) + ((d,) if d > 1 else ())).reshape(len(nodes), d)
        out[(nodes[:, None] * d + np.arange(d)).ravel()] = vals.ravel()
        keep = np.zeros(self.space.ndof, dtype=bool)
        keep[dm.dirichlet_dofs] = True
        out[~keep] = 0.0
        return out


def _enforce_ties(vec, dm: DofMap, name, tol=1e-10):
    if not len(dm.ties):
        return vec
    p, m = dm.ties[:, 0], dm.ties[:, 1]
    gap = np.abs(vec[p] - vec[m])
    scale = max(1.0, float(np.max(np.abs(vec))))
    if np.any(gap > tol * scale):
        raise ValueError(f"{name} violates an active tie constraint (gap {gap.max():.3e})")
    vec = vec.copy()
    mean = 0.5 * (vec[p] + vec[m])
    vec[p] = mean
    vec[m] = mean
    return vec


def init_state(config: SimConfig) -> SimState:
    """State at k = 0 with the ledger holding E(0) = 1/2 |u1|_M^2 + 1/2 a(u0, u0)."""
    ops = _Operators(config)
    data = config.data
    dm = ops.dofmap(0.0)
    w0 = ops.dirichlet_vector(data.w, 0.0, dm)
    u0 = ops.nodal(data.u0)
    u0[dm.dirichlet_dofs] = w0[dm.dirichlet_dofs]
    u0 = _enforce_ties(u0, dm, "u0")
    u1 = _enforce_ties(ops.nodal(data.u1), dm, "u1")
    if data.w_dot is not None:
        dw0 = ops.dirichlet_vector(data.w_dot, 0.0, dm)
    else:
        dw0 = (ops.dirichlet_vector(data.w, config.tau, dm) - w0) / config.tau
    G0 = neumann_load(ops.space, data.g, 0.0)
    kinetic = 0.5 * u1 @ (ops.M @ u1)
    elastic = 0.5 * u0 @ (ops.K @ u0)
    ledger = EnergyLedger(E0=kinetic + elastic, crack_toughness=config.crack_toughness)
    ledger.append(0.0, kinetic, elastic, 0.0, 0.0, 0.0)
    ops.init = dict(u0=u0, u1=u1, w0=w0, dw0=dw0, G0=G0)
    return SimState(0, 0.0, u0, u0 - config.tau * u1, u1, w0, dw0, G0, dm, ledger, _ops=ops)


def step(state: SimState, config: SimConfig) -> SimState:
    """Advance one step; the ledger is appended in place."""
    if state.k >= config.n_steps:
        raise StepError(f"run already finished at step {state.k}")
    ops = state._ops or init_state(config)._ops
    tau = config.tau
    k = state.k + 1
    t = k * tau
    dm = ops.dofmap(t)
    if len(dm.ties) > len(state.dofmap.ties):
        raise AssertionError("tie set grew: constraints may only be released")
    for name, vec in (("u", state.u), ("du", state.du)):
        if len(dm.ties) and np.any(vec[dm.ties[:, 0]] != vec[dm.ties[:, 1]]):
            raise AssertionError(f"tied pair carries different {name} values at step {k}")

    D = ops.damping(k)
    t_mid = (k - 0.5) * tau
    F = body_load(ops.space, config.data.f, t_mid)
    if config.data.weak_load is not None:
        F = F + config.data.weak_load(ops.space, t_mid)
    G = neumann_load(ops.space, config.data.g, t)
    w = ops.dirichlet_vector(config.data.w, t, dm)

    A = ops.M * (1.0 / tau ** 2) + ops.K + D * (1.0 / tau)
    rhs = ops.M @ (state.u + tau * state.du) / tau ** 2 + D @ state.u / tau + F + G
    P = ops.prolongation(dm)
    sysr = apply_constraints(A, rhs, dm, w, P=P)
    iters = [0]

    def count(_):
        iters[0] += 1

    try:
        x = cg_solve(sysr.A, sysr.b, tol=config.solver_tol, max_iter=config.solver_max_iter,
                     x0=state.u[dm.free_dofs], callback=count)
    except SolverError as exc:
        raise StepError(f"linear solve failed at step {k} (t={t:.6g}): {exc}") from exc
    u = sysr.expand(x)
    du = (u - state.u) / tau
    dw = (w - state.w) / tau

    init = ops.init
    res, scale, lhs0, rhs_e = step_identity(tau, ops.M, ops.K, D, F, G, u, state.u, du,
                                            state.du, dw)
    diss_cum = state.diss_cum + tau * du @ (D @ du)
    work_int = state.work_int + total_work_increment(
        tau, ops.M, ops.K, D, F, G, state.G, u, state.u, du, state.du, state.w, dw, state.dw)
    work_tot = work_int + work_boundary_terms(ops.M, G, u, w, du, dw, init["G0"], init["u0"],
                                              init["w0"], init["u1"], init["dw0"])
    crack_len = max(0.0, float(config.schedule.tip(t, config.mesh.tip_x0)) - config.mesh.tip_x0) \
        if len(config.mesh.crack_pairs) else 0.0
    state.ledger.append(t, 0.5 * du @ (ops.M @ du), 0.5 * u @ (ops.K @ u), diss_cum, crack_len,
                        work_tot, res, scale, lhs0 - rhs_e)
    log.debug("step %d t=%.4g cg_iters=%d identity=%.2e", k, t, iters[0], res / max(scale, 1e-300))
    return SimState(k, t, u, state.u, du, w, dw, G, dm, state.ledger, diss_cum, work_int,
                    iters[0], _ops=ops)


@dataclass
class RunResult:
    snapshots: list
    ledger: EnergyLedger
    final: SimState


def run(config: SimConfig, snapshot_every: int | None = None, callback=None) -> RunResult:
    """Execute all steps; keep (k, t, u) snapshots every ``snapshot_every`` steps
    (plus the first and last)."""
    state = init_state(config)
    snaps = [(0, 0.0, state.u.copy())]
    for _ in range(config.n_steps):
        try:
            state = step(state, config)
        except StepError:
            raise
        except Exception as exc:
            raise StepError(f"step {state.k + 1} failed: {exc}") from exc
        if callback is not None:
            callback(state)
        if snapshot_every and state.k % snapshot_every == 0 and state.k != config.n_steps:
            snaps.append((state.k, state.t, state.u.copy()))
    snaps.append((state.k, state.t, state.u.copy()))
    return RunResult(snaps, state.ledger, state)
