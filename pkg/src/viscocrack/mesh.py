"""
Cracked triangulations, crack-tip schedules and the time-dependent DOF map.

The crack is a straight segment on the x1-axis starting at the left end of
the domain.  Nodes on that segment are duplicated into an upper (plus) and a
lower (minus) copy; a pair is *tied* (constrained equal) while it lies
strictly ahead of the tip and released once the tip has reached it.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import Delaunay


class MeshError(ValueError):
    """Raised for infeasible or invalid mesh geometry."""


class BoundaryTag(enum.IntEnum):
    DIRICHLET = 0
    NEUMANN = 1


@dataclass(frozen=True)
class Disk:
    R: float

    @property
    def extent(self) -> float:
        return self.R


@dataclass(frozen=True)
class Rect:
    a: float
    b: float

    @property
    def extent(self) -> float:
        return self.a


@dataclass(frozen=True, eq=False)
class CrackedMesh:
    """P1 triangulation with crack-aligned duplicated nodes.

    Attributes
    ----------
    nodes : (N, 2) float array
    triangles : (E, 3) int array, counter-clockwise
    crack_pairs : (P, 2) int array of (plus, minus) node indices, sorted by abscissa
    pair_x1 : (P,) float array, strictly increasing
    tip_x0, max_tip : float
        Initial and final crack-tip abscissae.
    boundary_edges : (B, 2) int array
    boundary_tags : (B,) int array of :class:`BoundaryTag` values
    domain : Disk or Rect
    """

    nodes: np.ndarray
    triangles: np.ndarray
    crack_pairs: np.ndarray
    pair_x1: np.ndarray
    tip_x0: float
    max_tip: float
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    domain: Disk | Rect

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def triangle_sides(self) -> np.ndarray:
        """+1 for triangles above the crack line, -1 below."""
        return np.where(self.centroids()[:, 1] > 0.0, 1, -1)

    def node_sides(self) -> np.ndarray:
        """Side flag for evaluating branch-cut fields at nodes.

        Plus copies get +1, minus copies -1, other nodes the sign of x2
        (0 for single nodes lying on the x1-axis).
        """
        side = np.sign(self.nodes[:, 1]).astype(int)
        if len(self.crack_pairs):
            side[self.crack_pairs[:, 0]] = 1
            side[self.crack_pairs[:, 1]] = -1
        return side

    def crack_mouth_nodes(self) -> np.ndarray:
        """Pair copies of the crack endpoint lying on the outer boundary."""
        if not len(self.crack_pairs):
            return np.zeros(0, dtype=int)
        bnd = np.unique(self.boundary_edges)
        first = self.crack_pairs[0]
        return np.array([n for n in first if n in set(bnd.tolist())], dtype=int)

    def dirichlet_nodes(self) -> np.ndarray:
        edges = self.boundary_edges[self.boundary_tags == BoundaryTag.DIRICHLET]
        return np.unique(edges)

    def check(self) -> None:
        """Assert the structural invariants; raise MeshError on violation."""
        areas = self.signed_areas()
        if np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise MeshError(f"triangle {bad} has non-positive signed area {areas[bad]:.3e}")
        if len(self.pair_x1) > 1 and np.any(np.diff(self.pair_x1) <= 0.0):
            raise MeshError("crack pairs are not strictly increasing in x1")
        plus, minus = self.crack_pairs.T if len(self.crack_pairs) else (np.zeros(0, int),) * 2
        if not np.array_equal(self.nodes[plus], self.nodes[minus]):
            raise MeshError("crack pair copies do not share coordinates")
        cy = self.centroids()[:, 1]
        for nodes_, sign in ((plus, 1.0), (minus, -1.0)):
            touching = np.isin(self.triangles, nodes_).any(axis=1)
            if np.any(cy[touching] * sign <= 0.0):
                raise MeshError("crack copy used by a triangle on the wrong side")
        # crack edges must be mesh edges; no edge may cross the crack segment
        edges = _unique_edges(self.triangles)
        p, q = self.nodes[edges[:, 0]], self.nodes[edges[:, 1]]
        crosses = (p[:, 1] * q[:, 1] < 0.0)
        if np.any(crosses):
            xc = p[crosses, 0] - p[crosses, 1] * (q[crosses, 0] - p[crosses, 0]) / (
                q[crosses, 1] - p[crosses, 1])
            if np.any(xc < self.max_tip - 1e-12):
                raise MeshError("a triangle edge crosses the crack segment")


@dataclass(frozen=True)
class CrackSchedule:
    """Affine tip schedule s(t) = tip_x0 + c t on [0, t_final]."""

    c: float
    t_final: float
    validation_lambda1: float = 1.0

    def __post_init__(self):
        if self.c < 0.0:
            raise ValueError("tip speed must be non-negative")
        if self.t_final <= 0.0:
            raise ValueError("horizon must be positive")

    def tip(self, t, tip_x0: float):
        return tip_x0 + self.c * np.asarray(t, dtype=float)

    def check_speed(self) -> bool:
        """Return False (and warn) when c^2 approaches the ellipticity bound."""
        ratio = self.c ** 2 / self.validation_lambda1
        if ratio >= SPEED_WARNING_RATIO:
            warnings.warn(
                f"crack speed c={self.c} gives c^2/lambda1={ratio:.4f}; the uniqueness "
                "argument requires |s'(t)|^2 < lambda1", RuntimeWarning, stacklevel=2)
            return False
        return True


SPEED_WARNING_RATIO = 0.9


@dataclass(frozen=True, eq=False)
class DofMap:
    """Active constraints at one time instant.

    ``free_dofs`` lists the representative unknowns: every DOF that is not
    Dirichlet and not the minus member of an active tie.
    """

    n_nodes: int
    dofs_per_node: int
    ties: np.ndarray
    dirichlet_dofs: np.ndarray
    free_dofs: np.ndarray
    _reduced_index: np.ndarray = field(repr=False)

    @property
    def n_dofs(self) -> int:
        return self.n_nodes * self.dofs_per_node

    @property
    def n_free(self) -> int:
        return len(self.free_dofs)

    def prolongation(self) -> sp.csr_matrix:
        """Sparse 0/1 matrix P with u_full = P u_free on the homogeneous space."""
        rows = np.flatnonzero(self._reduced_index >= 0)
        cols = self._reduced_index[rows]
        data = np.ones(len(rows))
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_dofs, self.n_free))


def node_dofs(nodes: np.ndarray, dofs_per_node: int) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=int)
    return (nodes[:, None] * dofs_per_node + np.arange(dofs_per_node)).ravel()


def active_ties(mesh: CrackedMesh, schedule: CrackSchedule, t: float) -> np.ndarray:
    """Node pairs still constrained equal at time ``t``.

    A pair is tied iff its abscissa lies strictly ahead of the tip; the tip
    point itself belongs to the (closed) crack and is released.
    """
    if not len(mesh.crack_pairs):
        return np.zeros((0, 2), dtype=int)
    s = float(schedule.tip(t, mesh.tip_x0))
    return mesh.crack_pairs[mesh.pair_x1 > s]


def build_dofmap(mesh: CrackedMesh, schedule: CrackSchedule, t: float,
                 dofs_per_node: int = 1) -> DofMap:
    tied_nodes = active_ties(mesh, schedule, t)
    d = dofs_per_node
    ndof = mesh.n_nodes * d
    dirichlet = node_dofs(mesh.dirichlet_nodes(), d)
    is_dir = np.zeros(ndof, dtype=bool)
    is_dir[dirichlet] = True

    tie_dofs = np.column_stack([node_dofs(tied_nodes[:, 0], d),
                                node_dofs(tied_nodes[:, 1], d)]) if len(tied_nodes) \
        else np.zeros((0, 2), dtype=int)
    # a tied pair touching the Dirichlet set is fully Dirichlet
    both = is_dir[tie_dofs[:, 0]] | is_dir[tie_dofs[:, 1]]
    is_dir[tie_dofs[both].ravel()] = True

    master = np.arange(ndof)
    master[tie_dofs[:, 1]] = tie_dofs[:, 0]
    is_rep = (~is_dir) & (master == np.arange(ndof))
    free = np.flatnonzero(is_rep)
    index = np.full(ndof, -1, dtype=int)
    index[free] = np.arange(len(free))
    index = np.where(is_dir, -1, index[master])
    return DofMap(mesh.n_nodes, d, tie_dofs, np.flatnonzero(is_dir), free, index)


# --------------------------------------------------------------------------
# construction


def _axis_breaks(points, h):
    """Subdivide consecutive breakpoints into pieces no longer than h."""
    points = sorted(set(float(p) for p in points))
    out = [points[0]]
    for lo, hi in zip(points[:-1], points[1:]):
        m = max(1, math.ceil((hi - lo) / h - 1e-9))
        out.extend(np.linspace(lo, hi, m + 1)[1:].tolist())
    return np.array(out)


def _unique_edges(triangles):
    e = np.sort(np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]],
                                triangles[:, [2, 0]]]), axis=1)
    return np.unique(e, axis=0)


def _orient(nodes, tris):
    p = nodes[tris]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    tris = tris.copy()
    tris[neg] = tris[neg][:, [0, 2, 1]]
    return tris


def _split_crack(nodes, tris, line_nodes, max_tip):
    """Duplicate line nodes behind ``max_tip`` and rewire lower triangles."""
    line_nodes = np.asarray(line_nodes, dtype=int)
    x1 = nodes[line_nodes, 0]
    order = np.argsort(x1)
    line_nodes, x1 = line_nodes[order], x1[order]
    split = x1 < max_tip - 1e-12
    plus = line_nodes[split]
    minus = np.arange(len(nodes), len(nodes) + len(plus))
    nodes = np.vstack([nodes, nodes[plus]])
    lower = nodes[tris].mean(axis=1)[:, 1] < 0.0
    remap = np.arange(len(nodes))
    remap[plus] = minus
    tris = tris.copy()
    tris[lower] = remap[tris[lower]]
    return nodes, tris, np.column_stack([plus, minus]), x1[split]


def _boundary_edges(nodes, tris, max_tip):
    e = np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    once = uniq[counts == 1]
    p, q = nodes[once[:, 0]], nodes[once[:, 1]]
    on_crack = (p[:, 1] == 0.0) & (q[:, 1] == 0.0) & (np.maximum(p[:, 0], q[:, 0]) <= max_tip)
    return once[~on_crack]


def _finish(nodes, tris, line_nodes, tip_x0, max_tip, domain, neumann=None):
    tris = _orient(nodes, tris)
    if max_tip is None:
        pairs, px1 = np.zeros((0, 2), dtype=int), np.zeros(0)
        bedges = _boundary_edges(nodes, tris, -np.inf)
        tip_x0 = max_tip = -domain.extent
    else:
        nodes, tris, pairs, px1 = _split_crack(nodes, tris, line_nodes, max_tip)
        bedges = _boundary_edges(nodes, tris, max_tip)
    tags = np.full(len(bedges), BoundaryTag.DIRICHLET, dtype=int)
    if neumann is not None:
        mid = 0.5 * (nodes[bedges[:, 0]] + nodes[bedges[:, 1]])
        tags[np.array([bool(neumann(m)) for m in mid], dtype=bool)] = BoundaryTag.NEUMANN
    mesh = CrackedMesh(nodes, tris, pairs, px1, float(tip_x0), float(max_tip),
                       bedges, tags, domain)
    mesh.check()
    return mesh


def build_cracked_rect_mesh(a: float, b: float, h: float, tip_x0: float | None,
                            max_tip: float | None, neumann_sides=()) -> CrackedMesh:
    """Structured right-triangle mesh of [-a, a] x [-b, b].

    Grid lines pass through x1 = tip_x0, x1 = max_tip and x2 = 0 so that the
    crack {x2 = 0, -a <= x1 <= max_tip} is a union of mesh edges.  Passing
    ``max_tip=None`` builds an uncracked mesh.

    ``neumann_sides`` is a subset of {"left", "right", "bottom", "top"}.
    """
    if not (a > 0 and b > 0 and 0 < h < min(a, b) * 2):
        raise MeshError(f"invalid rectangle/size: a={a}, b={b}, h={h}")
    xb = [-a, a]
    if max_tip is not None:
        if not (-a < tip_x0 <= max_tip < a):
            raise MeshError(f"need -a < tip_x0 <= max_tip < a, got {tip_x0}, {max_tip}")
        xb += [tip_x0, max_tip]
    xs = _axis_breaks(xb, h)
    ys = _axis_breaks([-b, 0.0, b], h)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    nx = len(xs)
    i, j = np.meshgrid(np.arange(nx - 1), np.arange(len(ys) - 1), indexing="xy")
    n0 = (j * nx + i).ravel()
    n1, n2, n3 = n0 + 1, n0 + nx + 1, n0 + nx
    tris = np.vstack([np.column_stack([n0, n1, n2]), np.column_stack([n0, n2, n3])])
    line = np.flatnonzero(nodes[:, 1] == 0.0)

    sides = set(neumann_sides)
    unknown = sides - {"left", "right", "bottom", "top"}
    if unknown:
        raise MeshError(f"unknown rectangle sides {sorted(unknown)}")
    tol = 1e-12 * max(a, b)

    def neumann(m):
        return (("left" in sides and abs(m[0] + a) < tol)
                or ("right" in sides and abs(m[0] - a) < tol)
                or ("bottom" in sides and abs(m[1] + b) < tol)
                or ("top" in sides and abs(m[1] - b) < tol))

    return _finish(nodes, tris, line, tip_x0, max_tip, Rect(a, b),
                   neumann if sides else None)


def build_rect_mesh(a: float, b: float, h: float, neumann_sides=()) -> CrackedMesh:
    """Uncracked structured rectangle mesh."""
    return build_cracked_rect_mesh(a, b, h, None, None, neumann_sides)


def build_cracked_disk_mesh(R: float, h: float, tip_x0: float, max_tip: float) -> CrackedMesh:
    """Unstructured mesh of the disk |x| < R cracked along [-R, max_tip] x {0}.

    Interior nodes sit on a hexagonal lattice whose rows avoid the strip
    |x2| < h/2, and the crack line carries its own row of nodes with spacing
    at most h.  Each crack segment then has an empty diametral circle, so it
    is a Delaunay edge and the crack is resolved exactly by the mesh.
    """
    if not 0 < h < R:
        raise MeshError(f"need 0 < h < R, got h={h}, R={R}")
    if not (-R < tip_x0 <= max_tip < R):
        raise MeshError(f"need -R < tip_x0 <= max_tip < R, got {tip_x0}, {max_tip}")
    if R - max_tip < 0.5 * h:
        raise MeshError(f"h={h} too large to resolve the ligament between tip {max_tip} and the boundary")
    nb = max(8, 2 * math.ceil(math.pi * R / h))
    theta = 2.0 * np.pi * np.arange(nb) / nb
    circle = R * np.column_stack([np.cos(theta), np.sin(theta)])
    circle[np.abs(circle[:, 1]) < 1e-14 * R, 1] = 0.0
    line_x = _axis_breaks([-R, tip_x0, max_tip, R], h)[1:-1]
    line = np.column_stack([line_x, np.zeros_like(line_x)])

    dy = 0.5 * math.sqrt(3.0) * h
    rows = []
    for jrow in range(1, int(R / dy) + 1):
        y = jrow * dy
        shift = 0.5 * h * (jrow % 2)
        xs = np.arange(-R, R + h, h) + shift
        for sgn in (1.0, -1.0):
            pts = np.column_stack([xs, np.full_like(xs, sgn * y)])
            rows.append(pts[np.hypot(pts[:, 0], pts[:, 1]) < R - 0.5 * h])
    interior = np.vstack(rows) if rows else np.zeros((0, 2))
    nodes = np.vstack([circle, line, interior])
    tris = Delaunay(nodes).simplices.astype(int)
    tris = _orient(nodes, tris)
    area = np.abs(_areas(nodes, tris))
    tris = tris[area > 1e-12 * h * h]
    line_nodes = np.flatnonzero(nodes[:, 1] == 0.0)
    return _finish(nodes, tris, line_nodes, tip_x0, max_tip, Disk(R))


def _areas(nodes, tris):
    p = nodes[tris]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


# --------------------------------------------------------------------------
# output


def write_vtk(path, mesh: CrackedMesh, point_data: dict | None = None, title="viscocrack"):
    """Write a legacy ASCII VTK unstructured grid with optional nodal fields."""
    point_data = point_data or {}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.n_nodes} double\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        ne = mesh.n_triangles
        fh.write(f"CELLS {ne} {4 * ne}\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")
        fh.write(f"CELL_TYPES {ne}\n")
        fh.write("5\n" * ne)
        if point_data:
            fh.write(f"POINT_DATA {mesh.n_nodes}\n")
            for name, values in point_data.items():
                values = np.asarray(values, dtype=float).reshape(mesh.n_nodes, -1)
                if values.shape[1] == 1:
                    fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    fh.writelines(f"{v:.17g}\n" for v in values[:, 0])
                else:
                    fh.write(f"VECTORS {name} double\n")
                    fh.writelines(f"{v[0]:.17g} {v[1]:.17g} 0\n" for v in values)


def save_mesh_text(path, mesh: CrackedMesh) -> None:
    """Plain-text dump: counts line, then node, triangle and pair lines."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{mesh.n_nodes} {mesh.n_triangles} {len(mesh.crack_pairs)} "
                 f"{len(mesh.boundary_edges)} {mesh.tip_x0:.17g} {mesh.max_tip:.17g}\n")
        if isinstance(mesh.domain, Disk):
            fh.write(f"disk {mesh.domain.R:.17g}\n")
        else:
            fh.write(f"rect {mesh.domain.a:.17g} {mesh.domain.b:.17g}\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for t in mesh.triangles:
            fh.write(f"{t[0]} {t[1]} {t[2]}\n")
        for (p, m), x1 in zip(mesh.crack_pairs, mesh.pair_x1):
            fh.write(f"{p} {m} {x1:.17g}\n")
        for (p, q), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            fh.write(f"{p} {q} {BoundaryTag(tag).name}\n")


def load_mesh_text(path) -> CrackedMesh:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    nn, ne, npairs, nb, tip_x0, max_tip = lines[0].split()
    nn, ne, npairs, nb = int(nn), int(ne), int(npairs), int(nb)
    dom = lines[1].split()
    domain = Disk(float(dom[1])) if dom[0] == "disk" else Rect(float(dom[1]), float(dom[2]))
    pos = 2
    nodes = np.array([[float(v) for v in ln.split()] for ln in lines[pos:pos + nn]]).reshape(nn, 2)
    pos += nn
    tris = np.array([[int(v) for v in ln.split()] for ln in lines[pos:pos + ne]], dtype=int).reshape(ne, 3)
    pos += ne
    prs = [ln.split() for ln in lines[pos:pos + npairs]]
    pairs = np.array([[int(p[0]), int(p[1])] for p in prs], dtype=int).reshape(npairs, 2)
    px1 = np.array([float(p[2]) for p in prs])
    pos += npairs
    bl = [ln.split() for ln in lines[pos:pos + nb]]
    bedges = np.array([[int(b[0]), int(b[1])] for b in bl], dtype=int).reshape(nb, 2)
    tags = np.array([BoundaryTag[b[2]] for b in bl], dtype=int)
    mesh = CrackedMesh(nodes, tris, pairs, px1, float(tip_x0), float(max_tip), bedges, tags, domain)
    mesh.check()
    return mesh
