"""
Energy ledger of a run: kinetic and elastic energy, viscous dissipation,
crack energy, total work and the two balance residuals.

The total work is accumulated in summation-by-parts form, so that the
per-step energy identity of the implicit scheme holds to solver precision
and the ledger can be used as a correctness check of the stepper.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

CSV_HEADER = ["t", "kinetic", "elastic", "diss_cum", "crack_len", "work_tot",
              "residual_griffith", "residual_kv"]


def total_work_increment(tau, M, K, D, F, G, G_prev, u, u_prev, du, du_prev,
                         w_prev, dw, dw_prev) -> float:
    """Rectangle-rule work increment of step k.

    tau [ (f_k, du - dw) + a(u, dw) + b_k(du, dw) - (du_prev, d2w) - (dg, u_prev - w_prev) ]
    with d2w = (dw - dw_prev)/tau and dg = (G - G_prev)/tau.  All vectors are
    full nodal vectors; F and G are assembled load vectors.
    """
    d2w = (dw - dw_prev) / tau
    dG = (G - G_prev) / tau
    return tau * (F @ (du - dw) + dw @ (K @ u) + dw @ (D @ du)
                  - du_prev @ (M @ d2w) - dG @ (u_prev - w_prev))


def work_boundary_terms(M, G, u, w, du, dw, G0, u0, w0, u1, dw0) -> float:
    """Non-integral part of the total work, added at readout."""
    return (du @ (M @ dw) + G @ (u - w)) - (u1 @ (M @ dw0) + G0 @ (u0 - w0))


def step_identity(tau, M, K, D, F, G, u, u_prev, du, du_prev, dw):
    """Residual of the energy identity obtained by testing step k with
    v = tau (du - dw).

    Returns ``(residual, scale, lhs_no_tau2, rhs)`` where ``scale`` is the sum
    of the magnitudes of all terms and ``lhs_no_tau2`` drops the two
    non-negative tau^2 terms (the discrete energy inequality reads
    ``lhs_no_tau2 <= rhs``).
    """
    d2u = (du - du_prev) / tau
    Mdu, Kdu = M @ du, K @ du
    terms_lhs = [
        0.5 * du @ Mdu, -0.5 * du_prev @ (M @ du_prev),
        0.5 * tau ** 2 * d2u @ (M @ d2u),
        0.5 * u @ (K @ u), -0.5 * u_prev @ (K @ u_prev),
        0.5 * tau ** 2 * du @ Kdu,
        tau * du @ (D @ du),
    ]
    v = du - dw
    terms_rhs = [tau * F @ v, tau * G @ v, tau * d2u @ (M @ dw), tau * dw @ (K @ u),
                 tau * dw @ (D @ du)]
    lhs = float(sum(terms_lhs))
    rhs = float(sum(terms_rhs))
    scale = float(sum(abs(x) for x in terms_lhs + terms_rhs))
    lhs_no_tau2 = lhs - terms_lhs[2] - terms_lhs[5]
    return lhs - rhs, scale, lhs_no_tau2, rhs


@dataclass
class EnergyLedger:
    """Per-step energy series; row 0 is the initial state."""

    E0: float
    crack_toughness: float = 1.0
    t: list = field(default_factory=list)
    kinetic: list = field(default_factory=list)
    elastic: list = field(default_factory=list)
    diss_cum: list = field(default_factory=list)
    crack_len: list = field(default_factory=list)
    work_tot: list = field(default_factory=list)
    identity_residual: list = field(default_factory=list)
    identity_scale: list = field(default_factory=list)
    inequality_gap: list = field(default_factory=list)

    def append(self, t, kinetic, elastic, diss_cum, crack_len, work_tot,
               identity_residual=0.0, identity_scale=0.0, inequality_gap=0.0):
        if self.diss_cum and diss_cum < self.diss_cum[-1] - 1e-12 * max(1.0, abs(self.diss_cum[-1])):
            raise AssertionError("cumulative dissipation decreased")
        self.t.append(float(t))
        self.kinetic.append(float(kinetic))
        self.elastic.append(float(elastic))
        self.diss_cum.append(float(diss_cum))
        self.crack_len.append(float(crack_len))
        self.work_tot.append(float(work_tot))
        self.identity_residual.append(float(identity_residual))
        self.identity_scale.append(float(identity_scale))
        self.inequality_gap.append(float(inequality_gap))

    def __len__(self):
        return len(self.t)

    def total_energy(self) -> np.ndarray:
        return np.asarray(self.kinetic) + np.asarray(self.elastic)

    @property
    def residual_kv(self) -> np.ndarray:
        return (np.asarray(self.kinetic) + np.asarray(self.elastic) + np.asarray(self.diss_cum)
                - self.E0 - np.asarray(self.work_tot))

    @property
    def residual_griffith(self) -> np.ndarray:
        return self.residual_kv + self.crack_toughness * np.asarray(self.crack_len)

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.t, self.kinetic, self.elastic, self.diss_cum,
                                self.crack_len, self.work_tot, self.residual_griffith,
                                self.residual_kv])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for row in self.as_array():
                writer.writerow([f"{v:.17g}" for v in row])


def griffith_residual(ledger: EnergyLedger, k: int) -> float:
    """kinetic + elastic + dissipation + crack energy - E(0) - work at row k."""
    return float(ledger.residual_griffith[k])


def kelvin_voigt_residual(ledger: EnergyLedger, k: int) -> float:
    """Same balance without the crack term."""
    return float(ledger.residual_kv[k])


def read_ledger_csv(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if header != CSV_HEADER:
        raise ValueError(f"unexpected ledger header {header}")
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
