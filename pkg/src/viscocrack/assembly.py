"""
P1 finite-element matrices, load vectors and constraint elimination.

All matrices live on the full nodal DOF space (plus and minus crack copies
counted separately); :func:`apply_constraints` reduces them to the active
tie/Dirichlet state.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .material import MaterialModel, Mode
from .mesh import BoundaryTag, CrackedMesh, DofMap, MeshError

# interior 3-point rule, exact for quadratics; no point sits on an edge
QUAD_BARY = np.array([[2 / 3, 1 / 6, 1 / 6],
                      [1 / 6, 2 / 3, 1 / 6],
                      [1 / 6, 1 / 6, 2 / 3]])
QUAD_W = np.full(3, 1 / 3)

GAUSS2 = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


@dataclass
class BoundaryData:
    """Data providers for one problem.

    Every field provider has the signature ``(t, x, side) -> values`` where
    ``x`` has shape (..., 2) and ``side`` holds +1/-1 flags used only on the
    crack line.  Initial data take ``(x, side)``.  ``None`` means zero.
    Values are scalars per point in antiplane mode and 2-vectors in plane mode.

    ``weak_load`` is an optional ``(space, t) -> vector`` hook adding a load
    given directly in weak form (see :mod:`viscocrack.analytic`).
    """

    w: Optional[Callable] = None
    w_dot: Optional[Callable] = None
    f: Optional[Callable] = None
    g: Optional[Callable] = None
    u0: Optional[Callable] = None
    u1: Optional[Callable] = None
    weak_load: Optional[Callable] = None


class P1Space:
    """Element geometry and a fixed sparsity pattern for one mesh."""

    def __init__(self, mesh: CrackedMesh, dofs_per_node: int = 1):
        self.mesh = mesh
        self.dpn = dofs_per_node
        self.ndof = mesh.n_nodes * dofs_per_node
        p = mesh.nodes[mesh.triangles]
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)  # (E, 2, 2)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        if np.any(det <= 0.0):
            bad = int(np.argmin(det))
            raise MeshError(f"degenerate or inverted triangle {bad} (2*area={det[bad]:.3e})")
        self.area = 0.5 * det
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1] / det
        inv[:, 1, 1] = jac[:, 0, 0] / det
        inv[:, 0, 1] = -jac[:, 0, 1] / det
        inv[:, 1, 0] = -jac[:, 1, 0] / det
        ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        # grads[e, a, :] = gradient of barycentric basis a on element e
        self.grads = np.einsum("ak,ekj->eaj", ref, inv)
        self.qpoints = np.einsum("qa,eaj->eqj", QUAD_BARY, p)
        self.sides = mesh.triangle_sides()
        self.qsides = np.repeat(self.sides[:, None], 3, axis=1)

        d = dofs_per_node
        edofs = (mesh.triangles[:, :, None] * d + np.arange(d)).reshape(len(p), 3 * d)
        self.edofs = edofs
        rows = np.repeat(edofs, 3 * d, axis=1).ravel()
        cols = np.tile(edofs, (1, 3 * d)).ravel()
        key = rows.astype(np.int64) * self.ndof + cols
        uniq, self._inverse = np.unique(key, return_inverse=True)
        r, c = np.divmod(uniq, self.ndof)
        self._indices = c.astype(np.int32)
        self._indptr = np.searchsorted(r, np.arange(self.ndof + 1)).astype(np.int32)
        self._nnz = len(uniq)
        self._Kc = {}

    def matrix(self, blocks: np.ndarray) -> sp.csr_matrix:
        """Sum element blocks (E, 3d, 3d) into the cached CSR pattern."""
        data = np.bincount(self._inverse, weights=blocks.ravel(), minlength=self._nnz)
        return sp.csr_matrix((data, self._indices.copy(), self._indptr.copy()),
                             shape=(self.ndof, self.ndof))

    def vector(self, local: np.ndarray) -> np.ndarray:
        return np.bincount(self.edofs.ravel(), weights=local.ravel(), minlength=self.ndof)

    # element blocks -------------------------------------------------------

    def mass_blocks(self) -> np.ndarray:
        ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
        blk = self.area[:, None, None] * ref
        if self.dpn == 1:
            return blk
        return np.einsum("eab,ij->eaibj", blk, np.eye(self.dpn)).reshape(-1, 6, 6)

    def strain_matrices(self) -> np.ndarray:
        """B(e): (E, nstrain, 3d) mapping element DOFs to gradient/Voigt strain."""
        g = self.grads
        if self.dpn == 1:
            return np.swapaxes(g, 1, 2)
        B = np.zeros((len(g), 3, 6))
        B[:, 0, 0::2] = g[:, :, 0]
        B[:, 1, 1::2] = g[:, :, 1]
        B[:, 2, 0::2] = g[:, :, 1]
        B[:, 2, 1::2] = g[:, :, 0]
        return B

    def stiffness_blocks(self, D: np.ndarray) -> np.ndarray:
        key = D.tobytes()
        if key not in self._Kc:
            B = self.strain_matrices()
            self._Kc[key] = self.area[:, None, None] * np.einsum("esa,st,etb->eab", B, D, B)
        return self._Kc[key]


def _as_space(mesh_or_space, dofs_per_node=1) -> P1Space:
    if isinstance(mesh_or_space, P1Space):
        return mesh_or_space
    return P1Space(mesh_or_space, dofs_per_node)


def assemble_mass(mesh, dofs_per_node: int = 1) -> sp.csr_matrix:
    """Consistent P1 mass matrix on the full nodal space."""
    space = _as_space(mesh, dofs_per_node)
    return space.matrix(space.mass_blocks())


def assemble_stiffness(mesh, model: MaterialModel) -> sp.csr_matrix:
    space = _as_space(mesh, model.dofs_per_node)
    return space.matrix(space.stiffness_blocks(model.voigt_C()))


def quadrature_weights(space: P1Space, psi: Callable | None) -> np.ndarray:
    """Per-element mean of Psi^2 over the 3-point rule."""
    if psi is None:
        return np.ones(len(space.area))
    vals = np.asarray(psi(space.qpoints), dtype=float)
    return (vals * vals) @ QUAD_W


def assemble_damping(mesh, model: MaterialModel, psi_k: Callable | None,
                     tensor: str = "B") -> sp.csr_matrix:
    """Psi-weighted viscous matrix (B Psi E u, Psi E v).

    Element gradients are constant for P1, so the element matrix is the
    stiffness block of B times the quadrature mean of Psi^2.  ``tensor="C"``
    swaps in the elasticity tensor (used to compare against the stiffness).
    """
    space = _as_space(mesh, model.dofs_per_node)
    D = model.voigt_B() if tensor == "B" else model.voigt_C()
    wts = quadrature_weights(space, psi_k)
    return space.matrix(space.stiffness_blocks(D) * wts[:, None, None])


def _values(provider, t, x, side, dpn):
    vals = np.asarray(provider(t, x, side), dtype=float)
    try:
        return np.broadcast_to(vals, x.shape[:-1] + ((dpn,) if dpn > 1 else ()))
    except ValueError as exc:
        raise ValueError(f"provider returned shape {vals.shape} for points {x.shape} at t={t}") from exc


def body_load(space: P1Space, f: Callable | None, t: float) -> np.ndarray:
    """(f(t), phi_i) with the 3-point rule."""
    if f is None:
        return np.zeros(space.ndof)
    try:
        fq = _values(f, t, space.qpoints, space.qsides, space.dpn)
    except Exception as exc:
        raise RuntimeError(f"body-force provider failed at t={t}") from exc
    # local[e, a, i] = area * sum_q w_q f_i(x_q) phi_a(x_q)
    if space.dpn == 1:
        local = space.area[:, None] * np.einsum("q,qa,eq->ea", QUAD_W, QUAD_BARY, fq)
    else:
        local = space.area[:, None, None] * np.einsum("q,qa,eqi->eai", QUAD_W, QUAD_BARY, fq)
    return space.vector(local)


def neumann_load(space: P1Space, g: Callable | None, t: float) -> np.ndarray:
    """(g(t), phi_i) on NEUMANN edges with 2-point Gauss.

    Rows of the crack-mouth copies are left at zero.
    """
    mesh = space.mesh
    out = np.zeros(space.ndof)
    edges = mesh.boundary_edges[mesh.boundary_tags == BoundaryTag.NEUMANN]
    if g is None or not len(edges):
        return out
    p, q = mesh.nodes[edges[:, 0]], mesh.nodes[edges[:, 1]]
    length = np.hypot(*(q - p).T)
    side = np.where(0.5 * (p[:, 1] + q[:, 1]) >= 0.0, 1, -1)
    d = space.dpn
    for s in GAUSS2:
        x = (1 - s) * p + s * q
        try:
            gv = _values(g, t, x, side, d).reshape(len(edges), d)
        except Exception as exc:
            raise RuntimeError(f"traction provider failed at t={t}") from exc
        for node_col, phi in ((0, 1 - s), (1, s)):
            dofs = (edges[:, node_col][:, None] * d + np.arange(d))
            np.add.at(out, dofs.ravel(), (0.5 * length[:, None] * phi * gv).ravel())
    mouth = mesh.crack_mouth_nodes()
    if len(mouth):
        out[(mouth[:, None] * d + np.arange(d)).ravel()] = 0.0
    return out


def assemble_loads(mesh, dofmap: DofMap, data: BoundaryData, k: int, tau: float,
                   space: P1Space | None = None) -> np.ndarray:
    """Full-space right-hand side of step k: body load at the interval
    midpoint (plus any weak-form load) and Neumann load at k tau."""
    if k < 1:
        raise ValueError("step index must be >= 1")
    space = space or _as_space(mesh, dofmap.dofs_per_node)
    t_mid = (k - 0.5) * tau
    F = body_load(space, data.f, t_mid)
    if data.weak_load is not None:
        F = F + data.weak_load(space, t_mid)
    return F + neumann_load(space, data.g, k * tau)


# --------------------------------------------------------------------------
# constraints


@dataclass
class ConstrainedSystem:
    """Reduced system P^T A P x = P^T (b - A g) and its scatter-back."""

    A: sp.csr_matrix
    b: np.ndarray
    P: sp.csr_matrix
    lift: np.ndarray

    def expand(self, x: np.ndarray) -> np.ndarray:
        return self.P @ x + self.lift

    def restrict(self, u: np.ndarray) -> np.ndarray:
        """Representative values of a full vector (inverse of expand on the constraint set)."""
        counts = np.asarray(self.P.sum(axis=0)).ravel()
        return (self.P.T @ (u - self.lift)) / np.maximum(counts, 1)


def dirichlet_lift(dofmap: DofMap, dirichlet_values) -> np.ndarray:
    lift = np.zeros(dofmap.n_dofs)
    vals = np.asarray(dirichlet_values, dtype=float)
    if vals.shape == (dofmap.n_dofs,):
        lift[dofmap.dirichlet_dofs] = vals[dofmap.dirichlet_dofs]
    else:
        lift[dofmap.dirichlet_dofs] = vals
    return lift


def apply_constraints(A: sp.spmatrix, b: np.ndarray, dofmap: DofMap,
                      dirichlet_values=None, P: sp.csr_matrix | None = None) -> ConstrainedSystem:
    """Eliminate ties (merge) and Dirichlet DOFs (lift to the right-hand side).

    ``dirichlet_values`` is either a full-length vector (entries at Dirichlet
    DOFs are used) or one value per Dirichlet DOF.
    """
    lift = np.zeros(dofmap.n_dofs) if dirichlet_values is None else dirichlet_lift(dofmap, dirichlet_values)
    for p, m in dofmap.ties:
        if lift[p] != lift[m]:
            raise ValueError(f"tied DOFs {p}, {m} carry different Dirichlet values")
    P = dofmap.prolongation() if P is None else P
    Ared = (P.T @ A @ P).tocsr()
    bred = P.T @ (b - A @ lift)
    return ConstrainedSystem(Ared, bred, P, lift)
