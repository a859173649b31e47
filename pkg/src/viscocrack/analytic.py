"""
Closed-form moving-crack benchmark.

The antiplane field

    u(t, x) = (2/sqrt(pi)) S((x1 - c t)/sqrt(1 - c^2), x2),   S(z) = Im sqrt(z),

solves the wave equation on the disk |x| < R cut along {x2 = 0, x1 <= c t},
with homogeneous Neumann data on the crack.  All derivatives come from the
complex derivatives of sqrt(z), so nothing here differentiates numerically.
Points on the branch cut need a side flag (+1 upper face, -1 lower face).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import QUAD_W, BoundaryData, P1Space
from .material import ViscosityField, eval_grad_psi, eval_psi


class SingularPointError(ValueError):
    """Evaluation at the crack tip or on the cut without a side flag."""


def _branch_sqrt(x1, x2, side=None):
    """Principal sqrt of x1 + i x2 with the cut faces selected by ``side``."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    x1, x2 = np.broadcast_arrays(x1, x2)
    sq = np.sqrt(x1 + 1j * x2)
    cut = (x2 == 0.0) & (x1 < 0.0)
    if np.any(cut):
        if side is None:
            raise SingularPointError("point on the branch cut needs a side flag")
        side = np.broadcast_to(np.asarray(side), x1.shape)
        if np.any(side[cut] == 0):
            raise SingularPointError("point on the branch cut needs a side flag")
        sq = np.where(cut, np.sign(side) * 1j * np.sqrt(np.abs(x1)), sq)
    return sq


def _check_tip(sq):
    if np.any(sq == 0):
        raise SingularPointError("derivative requested at the crack tip")


def eval_S(x1, x2, side=None) -> np.ndarray:
    """S = Im sqrt(x1 + i x2); on the cut, the one-sided limit +-sqrt|x1|."""
    return _branch_sqrt(x1, x2, side).imag


def _derivs(x1, x2, side, order):
    """Complex derivatives F', F'', F''' of F = sqrt at the given points."""
    sq = _branch_sqrt(x1, x2, side)
    _check_tip(sq)
    z = sq * sq
    d1 = 0.5 / sq
    out = [d1]
    if order >= 2:
        out.append(-0.25 / (z * sq))
    if order >= 3:
        out.append(0.375 / (z * z * sq))
    return out


def eval_grad_S(x1, x2, side=None) -> np.ndarray:
    """(d1 S, d2 S) = (Im, Re) of 1/(2 sqrt z)."""
    (d1,) = _derivs(x1, x2, side, 1)
    return np.stack([d1.imag, d1.real], axis=-1)


def eval_hess_S(x1, x2, side=None) -> np.ndarray:
    """(S_11, S_12, S_22) from F'' = -1/(4 z^(3/2))."""
    _, d2 = _derivs(x1, x2, side, 2)
    return np.stack([d2.imag, d2.real, -d2.imag], axis=-1)


@dataclass(frozen=True)
class AnalyticSolution:
    c: float
    R: float = 1.0
    T: float | None = None

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise ValueError("crack speed must satisfy 0 < c < 1")
        if self.T is not None and not self.c * self.T < self.R:
            raise ValueError("cT >= R: the crack would leave the disk")

    @property
    def alpha(self) -> float:
        return 2.0 / np.sqrt(np.pi)

    @property
    def sigma(self) -> float:
        return 1.0 / np.sqrt(1.0 - self.c ** 2)

    def _xi(self, t, x):
        x = np.asarray(x, dtype=float)
        return self.sigma * (x[..., 0] - self.c * t), x[..., 1]


def exact_u(sol: AnalyticSolution, t, x, side=None) -> np.ndarray:
    xi, eta = sol._xi(t, x)
    return sol.alpha * eval_S(xi, eta, side)


def exact_du_dt(sol: AnalyticSolution, t, x, side=None) -> np.ndarray:
    xi, eta = sol._xi(t, x)
    return -sol.alpha * sol.c * sol.sigma * eval_grad_S(xi, eta, side)[..., 0]


def exact_d2u_dt2(sol: AnalyticSolution, t, x, side=None) -> np.ndarray:
    xi, eta = sol._xi(t, x)
    return sol.alpha * (sol.c * sol.sigma) ** 2 * eval_hess_S(xi, eta, side)[..., 0]


def exact_grad_u(sol: AnalyticSolution, t, x, side=None) -> np.ndarray:
    xi, eta = sol._xi(t, x)
    g = eval_grad_S(xi, eta, side)
    return sol.alpha * np.stack([sol.sigma * g[..., 0], g[..., 1]], axis=-1)


def exact_grad_du_dt(sol: AnalyticSolution, t, x, side=None) -> np.ndarray:
    xi, eta = sol._xi(t, x)
    hs = eval_hess_S(xi, eta, side)
    k = -sol.alpha * sol.c * sol.sigma
    return k * np.stack([sol.sigma * hs[..., 0], hs[..., 1]], axis=-1)


def exact_lap_du_dt(sol: AnalyticSolution, t, x, side=None) -> np.ndarray:
    """Laplacian of du/dt: -alpha c sigma (sigma^2 - 1) Im F'''."""
    xi, eta = sol._xi(t, x)
    *_, d3 = _derivs(xi, eta, side, 3)
    return -sol.alpha * sol.c * sol.sigma * (sol.sigma ** 2 - 1.0) * d3.imag


def initial_displacement(sol: AnalyticSolution, x, side=None) -> np.ndarray:
    return exact_u(sol, 0.0, x, side)


def initial_velocity(sol: AnalyticSolution, x, side=None, tip_value=None) -> np.ndarray:
    """u^1 = -alpha c sigma d1 S(sigma x1, x2).

    The field is unbounded at the tip; ``tip_value`` (if given) replaces it
    there, otherwise tip evaluation raises.
    """
    x = np.asarray(x, dtype=float)
    if tip_value is None:
        return exact_du_dt(sol, 0.0, x, side)
    at_tip = (x[..., 0] == 0.0) & (x[..., 1] == 0.0)
    safe = np.where(at_tip[..., None], 1.0, x)
    return np.where(at_tip, tip_value, exact_du_dt(sol, 0.0, safe, side))


def strong_forcing(sol: AnalyticSolution, psi: ViscosityField, t, x, side=None) -> np.ndarray:
    """f = -2 Psi grad Psi . grad u_t - Psi^2 lap u_t (zero inside the dead zone)."""
    x = np.asarray(x, dtype=float)
    p = eval_psi(psi, t, x)
    out = np.zeros(x.shape[:-1])
    live = p > 0
    if np.any(live):
        xl = x[live]
        sl = None if side is None else np.broadcast_to(side, x.shape[:-1])[live]
        gp = eval_grad_psi(psi, t, xl)
        gut = exact_grad_du_dt(sol, t, xl, sl)
        out[live] = (-2.0 * p[live] * np.einsum("...i,...i->...", gp, gut)
                     - p[live] ** 2 * exact_lap_du_dt(sol, t, xl, sl))
    return out


class WeakForcing:
    """Load (f, phi_i) = (Psi^2 grad u_t, grad phi_i) of f = -div(Psi^2 grad u_t).

    Valid for test functions vanishing on a Dirichlet boundary, with
    Psi = 0 around the tip and d2 u_t = 0 on the crack faces.  Elements on
    which Psi vanishes at every quadrature point are skipped, so the tip
    singularity is never evaluated.
    """

    def __init__(self, sol: AnalyticSolution, psi: ViscosityField):
        self.sol = sol
        self.psi = psi

    def __call__(self, space: P1Space, t: float) -> np.ndarray:
        if space.dpn != 1:
            raise ValueError("the benchmark forcing is antiplane only")
        mesh = space.mesh
        if np.any(mesh.boundary_tags != 0):
            raise ValueError("weak benchmark forcing requires a fully Dirichlet boundary")
        pq = eval_psi(self.psi, t, space.qpoints)  # (E, 3)
        live = np.any(pq > 0, axis=1)
        local = np.zeros((len(space.area), 3))
        if np.any(live):
            xq = space.qpoints[live]
            sq = space.qsides[live]
            w2 = pq[live] ** 2
            gut = np.zeros(xq.shape)
            nz = w2 > 0
            gut[nz] = exact_grad_du_dt(self.sol, t, xq[nz], sq[nz])
            flux = np.einsum("q,eq,eqj->ej", QUAD_W, w2, gut)  # (E_live, 2)
            local[live] = space.area[live, None] * np.einsum("ej,eaj->ea", flux, space.grads[live])
        return space.vector(local)


def benchmark_data(sol: AnalyticSolution, psi: ViscosityField, forcing: bool = True) -> BoundaryData:
    """Initial, Dirichlet and forcing data of the moving-crack benchmark.

    The Dirichlet datum is the exact field; the tip value of the unbounded
    initial velocity is set to 0 (its mean over the two crack faces).
    """
    return BoundaryData(
        w=lambda t, x, side: exact_u(sol, t, x, side),
        w_dot=lambda t, x, side: exact_du_dt(sol, t, x, side),
        u0=lambda x, side: initial_displacement(sol, x, side),
        u1=lambda x, side: initial_velocity(sol, x, side, tip_value=0.0),
        weak_load=WeakForcing(sol, psi) if forcing else None,
    )


# --------------------------------------------------------------------------
# reference energies by tensor Gauss quadrature in tip-centred polar coordinates


def _polar_rule(sol, t, n_r, n_theta, r_breaks=()):
    """Nodes/weights covering the disk in polar coordinates around the tip.

    The integrand r |grad u|^2 is homogeneous of degree 0 near the tip, so
    Gauss-Legendre in (r, theta) converges spectrally; extra radial breaks
    handle kinks of Psi.
    """
    xt = sol.c * t
    th, wth = np.polynomial.legendre.leggauss(n_theta)
    th = np.pi * th
    wth = np.pi * wth
    rmax = -xt * np.cos(th) + np.sqrt(sol.R ** 2 - (xt * np.sin(th)) ** 2)
    gr, wgr = np.polynomial.legendre.leggauss(n_r)
    pts, wts = [], []
    for j, (thj, rm) in enumerate(zip(th, rmax)):
        cuts = [0.0] + [b for b in sorted(r_breaks) if 0 < b < rm] + [rm]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            r = lo + (hi - lo) * 0.5 * (gr + 1)
            w = 0.5 * (hi - lo) * wgr * r * wth[j]
            pts.append(np.column_stack([xt + r * np.cos(thj), r * np.sin(thj)]))
            wts.append(w)
    return np.vstack(pts), np.concatenate(wts)


def exact_energy(sol: AnalyticSolution, t: float, n_r=40, n_theta=200) -> float:
    """1/2 ||u_t||^2 + 1/2 ||grad u||^2 over the disk."""
    x, w = _polar_rule(sol, t, n_r, n_theta)
    side = np.where(x[:, 1] >= 0, 1, -1)
    ut = exact_du_dt(sol, t, x, side)
    gu = exact_grad_u(sol, t, x, side)
    return 0.5 * float(w @ (ut ** 2 + (gu ** 2).sum(axis=1)))


def exact_dissipation_rate(sol: AnalyticSolution, psi: ViscosityField, t: float,
                           n_r=40, n_theta=200) -> float:
    """||Psi grad u_t||^2 at time t (requires Psi = 0 near the tip)."""
    x, w = _polar_rule(sol, t, n_r, n_theta, r_breaks=(psi.eps, psi.eps + psi.ramp))
    p = eval_psi(psi, t, x)
    live = p > 0
    side = np.where(x[live, 1] >= 0, 1, -1)
    g = exact_grad_du_dt(sol, t, x[live], side)
    return float(w[live] @ (p[live] ** 2 * (g ** 2).sum(axis=1)))


def exact_boundary_power(sol: AnalyticSolution, t: float, n=400) -> float:
    """(d u/d nu, w_t) on the circle |x| = R."""
    s, ws = np.polynomial.legendre.leggauss(n)
    phi = np.pi * s
    x = sol.R * np.column_stack([np.cos(phi), np.sin(phi)])
    side = np.where(x[:, 1] >= 0, 1, -1)
    dn = (exact_grad_u(sol, t, x, side) * (x / sol.R)).sum(axis=1)
    return float(np.pi * sol.R * (ws @ (dn * exact_du_dt(sol, t, x, side))))


def exact_work(sol: AnalyticSolution, psi: ViscosityField, t: float, n_t=40) -> float:
    """Total work at time t: time integral of boundary power plus dissipation rate.

    The forcing contributes (f, u_t - w_t) + (Psi grad u_t, Psi grad w_t)
    = ||Psi grad u_t||^2 for the benchmark, independently of how w is
    extended into the domain.
    """
    if t == 0:
        return 0.0
    s, ws = np.polynomial.legendre.leggauss(n_t)
    ts = 0.5 * t * (s + 1)
    vals = [exact_boundary_power(sol, ti) + exact_dissipation_rate(sol, psi, ti) for ti in ts]
    return float(0.5 * t * (ws @ np.array(vals)))


def exact_dissipation(sol: AnalyticSolution, psi: ViscosityField, t: float, n_t=40) -> float:
    if t == 0:
        return 0.0
    s, ws = np.polynomial.legendre.leggauss(n_t)
    ts = 0.5 * t * (s + 1)
    return float(0.5 * t * (ws @ np.array([exact_dissipation_rate(sol, psi, ti) for ti in ts])))
