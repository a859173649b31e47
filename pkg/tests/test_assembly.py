import dataclasses

import numpy as np
import pytest
import scipy.sparse as sp

from viscocrack.assembly import (BoundaryData, P1Space, apply_constraints, assemble_damping,
                                 assemble_loads, assemble_mass, assemble_stiffness, neumann_load)
from viscocrack.material import MaterialModel, ViscosityField, psi_time_sample
from viscocrack.mesh import (BoundaryTag, CrackedMesh, CrackSchedule, Rect, build_cracked_disk_mesh,
                             build_cracked_rect_mesh, build_dofmap, build_rect_mesh)

ANTI = MaterialModel.antiplane()


def single_triangle(p):
    nodes = np.asarray(p, dtype=float)
    return CrackedMesh(nodes, np.array([[0, 1, 2]]), np.zeros((0, 2), int), np.zeros(0), 0.0, 0.0,
                       np.array([[0, 1], [1, 2], [2, 0]]), np.zeros(3, int), Rect(1.0, 1.0))


def test_element_mass_formula():
    mesh = single_triangle([[0.0, 0.0], [2.0, 0.0], [0.3, 1.5]])
    A = 0.5 * 2.0 * 1.5
    expected = A / 12 * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]])
    assert np.allclose(assemble_mass(mesh).toarray(), expected, atol=1e-15)


def test_unit_right_triangle_stiffness():
    mesh = single_triangle([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    expected = np.array([[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]])
    assert np.allclose(assemble_stiffness(mesh, ANTI).toarray(), expected, atol=1e-15)


def test_degenerate_triangle_named():
    mesh = single_triangle([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(ValueError, match="triangle 0"):
        assemble_mass(mesh)


@pytest.mark.parametrize("mesh", [build_cracked_rect_mesh(1.0, 1.0, 0.25, 0.0, 0.5),
                                  build_cracked_disk_mesh(1.0, 0.2, 0.0, 0.5)])
def test_mass_sum_is_area(mesh):
    M = assemble_mass(mesh)
    assert M.sum() == pytest.approx(mesh.area(), abs=1e-12)
    M2 = assemble_mass(mesh, 2)
    assert M2.sum() == pytest.approx(2 * mesh.area(), abs=1e-12)


def test_rect_mass_sum_exact():
    assert assemble_mass(build_cracked_rect_mesh(1.0, 1.0, 0.5, 0.0, 0.0)).sum() == pytest.approx(4.0, abs=1e-12)


def test_stiffness_kernels():
    mesh = build_cracked_disk_mesh(1.0, 0.2, 0.0, 0.5)
    K = assemble_stiffness(mesh, ANTI)
    assert np.abs(K @ np.ones(mesh.n_nodes)).max() < 1e-12
    plane = MaterialModel.plane(0.7, 0.4, 0.1, 0.3)
    Kp = assemble_stiffness(mesh, plane)
    x = mesh.nodes
    for field in (np.column_stack([-x[:, 1], x[:, 0]]), np.tile([1.0, 0.0], (len(x), 1)),
                  np.tile([0.0, 1.0], (len(x), 1))):
        assert np.abs(Kp @ field.ravel()).max() < 1e-12


def test_matrices_symmetric():
    mesh = build_cracked_disk_mesh(1.0, 0.15, 0.0, 0.5)
    psi = psi_time_sample(ViscosityField.tip_vanishing(0.2, 0.2, 0.5), 3, 0.05)
    for model in (ANTI, MaterialModel.plane(0.7, 0.4, 0.1, 0.3)):
        for A in (assemble_mass(mesh, model.dofs_per_node), assemble_stiffness(mesh, model),
                  assemble_damping(mesh, model, psi)):
            asym = abs(A - A.T).max()
            assert asym <= 1e-12 * abs(A).max()


def test_damping_limits():
    mesh = build_cracked_rect_mesh(1.0, 1.0, 0.25, 0.0, 0.5)
    zero = ViscosityField.constant(0.0)
    D0 = assemble_damping(mesh, ANTI, psi_time_sample(zero, 1, 0.1))
    assert abs(D0).max() == 0.0
    model = MaterialModel.antiplane(kappa_c=1.3, kappa_b=0.4)
    D1 = assemble_damping(mesh, model, psi_time_sample(ViscosityField.constant(1.0), 1, 0.1), tensor="C")
    assert abs(D1 - assemble_stiffness(mesh, model)).max() < 1e-12


def test_damping_dead_zone_blocks_vanish():
    mesh = build_cracked_disk_mesh(1.0, 0.05, 0.0, 0.5)
    field = ViscosityField.tip_vanishing(0.2, 0.2, 0.5)
    k, tau = 4, 0.05
    psi = psi_time_sample(field, k, tau)
    D = assemble_damping(mesh, ANTI, psi).tocsr()
    centre = field.center(psi.t)
    inside = np.all(np.linalg.norm(mesh.nodes[mesh.triangles] - centre, axis=2) <= 0.2, axis=1)
    assert inside.sum() > 10
    # nodes whose whole star lies in the dead ball have zero rows
    star_inside = np.ones(mesh.n_nodes, dtype=bool)
    touched = np.zeros(mesh.n_nodes, dtype=bool)
    for tri, ins in zip(mesh.triangles, inside):
        touched[tri] = True
        if not ins:
            star_inside[tri] = False
    nodes = np.flatnonzero(star_inside & touched)
    assert len(nodes) > 0
    assert abs(D[nodes]).max() == 0.0
    # and psd
    w = np.linalg.eigvalsh(D.toarray())
    assert w.min() > -1e-12 * w.max()


def test_loads_zero_and_partition_of_unity():
    mesh = build_cracked_disk_mesh(1.0, 0.2, 0.0, 0.5)
    dm = build_dofmap(mesh, CrackSchedule(0.5, 1.0), 0.1)
    assert np.all(assemble_loads(mesh, dm, BoundaryData(), 1, 0.1) == 0.0)
    one = BoundaryData(f=lambda t, x, s: np.ones(x.shape[:-1]))
    b = assemble_loads(mesh, dm, one, 2, 0.1)
    M = assemble_mass(mesh)
    assert np.allclose(b, np.asarray(M.sum(axis=1)).ravel(), atol=1e-14)
    assert b.sum() == pytest.approx(mesh.area(), abs=1e-12)
    with pytest.raises(ValueError):
        assemble_loads(mesh, dm, one, 0, 0.1)


def test_neumann_single_edge():
    mesh = build_rect_mesh(1.0, 1.0, 0.5, neumann_sides=("top",))
    edges = mesh.boundary_edges[mesh.boundary_tags == BoundaryTag.NEUMANN]
    keep = edges[:1]
    tags = np.where(np.isin(np.arange(len(mesh.boundary_edges)),
                            np.flatnonzero((mesh.boundary_edges == keep[0]).all(1))),
                    BoundaryTag.NEUMANN, BoundaryTag.DIRICHLET)
    one_edge = dataclasses.replace(mesh, boundary_tags=tags)
    g = neumann_load(P1Space(one_edge), lambda t, x, s: np.ones(x.shape[:-1]), 0.0)
    L = np.linalg.norm(mesh.nodes[keep[0, 0]] - mesh.nodes[keep[0, 1]])
    assert g[keep[0]] == pytest.approx([L / 2, L / 2], abs=1e-15)
    assert np.count_nonzero(g) == 2


def test_neumann_gauss_exact_for_quadratic_traction():
    mesh = build_rect_mesh(1.0, 1.0, 0.5, neumann_sides=("top",))
    # g phi_i is cubic on each edge, which 2-point Gauss integrates exactly
    g = neumann_load(P1Space(mesh), lambda t, x, s: x[..., 0] ** 2 + 1.0, 0.0)
    x = mesh.nodes[:, 0]
    assert g.sum() == pytest.approx(2 / 3 + 2, abs=1e-14)        # int (x^2 + 1)
    assert (g * x).sum() == pytest.approx(0.0, abs=1e-14)        # int (x^3 + x)
    assert np.all(g[~np.isclose(mesh.nodes[:, 1], 1.0)] == 0.0)


def test_neumann_skips_crack_mouth():
    mesh = build_cracked_rect_mesh(1.0, 0.5, 0.25, 0.0, 0.5, neumann_sides=("left",))
    g = neumann_load(P1Space(mesh), lambda t, x, s: np.ones(x.shape[:-1]), 0.0)
    mouth = mesh.crack_mouth_nodes()
    assert len(mouth) == 2
    assert np.all(g[mouth] == 0.0)


def test_galerkin_consistency_linear_field():
    mesh = build_cracked_rect_mesh(1.0, 0.5, 0.2, None, None)
    model = MaterialModel.antiplane(kappa_c=1.7)
    K = assemble_stiffness(mesh, model)
    a = np.array([0.3, -1.1])
    u = mesh.nodes @ a + 0.25
    interior = np.setdiff1d(np.arange(mesh.n_nodes), np.unique(mesh.boundary_edges))
    assert np.abs((K @ u)[interior]).max() < 1e-12
    assert u @ (K @ u) == pytest.approx(mesh.area() * a @ a * 1.7, rel=1e-10)


def test_assembly_independent_of_element_order():
    mesh = build_cracked_disk_mesh(1.0, 0.2, 0.0, 0.5)
    perm = np.random.default_rng(3).permutation(mesh.n_triangles)
    shuffled = dataclasses.replace(mesh, triangles=mesh.triangles[perm])
    for f in (lambda m: assemble_mass(m), lambda m: assemble_stiffness(m, ANTI)):
        assert abs(f(mesh) - f(shuffled)).max() <= 1e-15


def test_constraints_identity_without_ties_or_dirichlet():
    mesh = build_rect_mesh(1.0, 1.0, 0.5, neumann_sides=("left", "right", "top", "bottom"))
    dm = build_dofmap(mesh, CrackSchedule(0.0, 1.0), 0.0)
    assert len(dm.dirichlet_dofs) == 0
    A = assemble_mass(mesh)
    b = np.arange(mesh.n_nodes, dtype=float)
    sysr = apply_constraints(A, b, dm)
    assert abs(sysr.A - A).max() == 0.0
    assert np.array_equal(sysr.b, b)


def brute_force_reduced(A, b, dm, lift):
    """Constrained basis built by hand: one column per free DOF with ones on its tie partner."""
    A = A.toarray()
    n = dm.n_dofs
    partner = {int(p): int(m) for p, m in dm.ties}
    basis = []
    for i in dm.free_dofs:
        v = np.zeros(n)
        v[i] = 1.0
        if int(i) in partner:
            v[partner[int(i)]] = 1.0
        basis.append(v)
    B = np.array(basis).T
    return B.T @ A @ B, B.T @ (b - A @ lift), B


def test_constraints_match_brute_force_oracle():
    mesh = build_cracked_rect_mesh(1.0, 0.5, 0.5, -0.5, 0.5)
    dm = build_dofmap(mesh, CrackSchedule(0.5, 1.0), 0.0)
    assert len(dm.ties) >= 1
    model = MaterialModel.antiplane()
    A = assemble_mass(mesh) * 4.0 + assemble_stiffness(mesh, model)
    rng = np.random.default_rng(7)
    b = rng.normal(size=dm.n_dofs)
    w = mesh.nodes[:, 0] + 2 * mesh.nodes[:, 1] ** 2
    w[mesh.crack_pairs[:, 1]] = w[mesh.crack_pairs[:, 0]]
    sysr = apply_constraints(A, b, dm, w)
    lift = np.zeros(dm.n_dofs)
    lift[dm.dirichlet_dofs] = w[dm.dirichlet_dofs]
    Ar, br, B = brute_force_reduced(A, b, dm, lift)
    assert np.allclose(sysr.A.toarray(), Ar, atol=1e-13)
    assert np.allclose(sysr.b, br, atol=1e-13)
    x = np.linalg.solve(Ar, br)
    u = sysr.expand(x)
    for p, m in dm.ties:
        assert u[p] == u[m]
    assert np.allclose(u[dm.dirichlet_dofs], w[dm.dirichlet_dofs])
    assert np.allclose(u, B @ x + lift)
    assert np.allclose(sysr.restrict(u), x)


def test_contradictory_tie_values_rejected():
    mesh = build_cracked_rect_mesh(1.0, 0.5, 0.25, -0.5, 0.5)
    dm = build_dofmap(mesh, CrackSchedule(0.5, 1.0), 0.0)
    p, m = dm.ties[0]
    both = dataclasses.replace(dm, dirichlet_dofs=np.union1d(dm.dirichlet_dofs, [p, m]))
    w = np.zeros(dm.n_dofs)
    w[p] = 1.0
    with pytest.raises(ValueError, match="different Dirichlet values"):
        apply_constraints(assemble_mass(mesh), np.zeros(dm.n_dofs), both, w)
    w[m] = 1.0
    apply_constraints(assemble_mass(mesh), np.zeros(dm.n_dofs), both, w)


def test_system_matrix_spd_after_constraints():
    mesh = build_cracked_disk_mesh(1.0, 0.25, 0.0, 0.5)
    dm = build_dofmap(mesh, CrackSchedule(0.5, 1.0), 0.25)
    tau = 0.05
    psi = psi_time_sample(ViscosityField.tip_vanishing(0.2, 0.2, 0.5), 5, tau)
    A = assemble_mass(mesh) / tau ** 2 + assemble_stiffness(mesh, ANTI) + assemble_damping(mesh, ANTI, psi) / tau
    red = apply_constraints(A, np.zeros(dm.n_dofs), dm).A
    assert red.shape[0] <= 200
    assert np.linalg.eigvalsh(red.toarray()).min() > 0.0
    assert sp.issparse(red)
