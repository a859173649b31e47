import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from viscocrack.material import (MaterialModel, ViscosityField, apply_B, apply_C, eval_grad_psi,
                                 eval_psi, psi_time_sample)

RNG = np.random.default_rng(20240601)


def random_sym(n):
    a = RNG.normal(size=(n, 2, 2))
    return 0.5 * (a + np.swapaxes(a, 1, 2))


def test_apply_c_examples():
    m = MaterialModel.plane(0.0, 0.5, 0.0, 0.5)
    assert np.allclose(apply_C(m, np.eye(2)), np.eye(2))
    m = MaterialModel.plane(1.0, 1.0, 0.0, 0.5)
    assert np.allclose(apply_C(m, np.diag([1.0, 0.0])), np.diag([3.0, 1.0]))
    a = MaterialModel.antiplane(1.0, 1.0)
    assert np.allclose(apply_C(a, np.array([0.3, -0.4])), [0.3, -0.4])


def test_asymmetric_strain_rejected():
    m = MaterialModel.plane(1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        apply_C(m, np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_non_coercive_rejected():
    with pytest.raises(ValueError):
        MaterialModel.plane(-2.0, 0.5, 0.0, 0.5)
    with pytest.raises(ValueError):
        MaterialModel.antiplane(0.0, 1.0)


@pytest.mark.parametrize("lam,mu,vlam,vmu", [(0.0, 0.5, 0.0, 0.5), (1.3, 0.7, -0.2, 0.4),
                                            (-0.4, 1.0, 2.0, 0.1)])
def test_symmetry_and_coercivity_randomized(lam, mu, vlam, vmu):
    m = MaterialModel.plane(lam, mu, vlam, vmu)
    assert m.lambda1 == pytest.approx(2 * min(mu, mu + lam))
    assert m.lambda2 == pytest.approx(2 * min(vmu, vmu + vlam))
    e1, e2 = random_sym(1000), random_sym(1000)
    for op, lo in ((apply_C, m.lambda1), (apply_B, m.lambda2)):
        lhs = np.einsum("nij,nij->n", op(m, e1), e2)
        rhs = np.einsum("nij,nij->n", e1, op(m, e2))
        assert np.max(np.abs(lhs - rhs)) <= 1e-13 * np.max(np.abs(lhs))
        quadf = np.einsum("nij,nij->n", op(m, e1), e1)
        assert np.all(quadf >= lo * np.einsum("nij,nij->n", e1, e1) - 1e-12)


def test_antiplane_coercivity():
    m = MaterialModel.antiplane(2.0, 0.5)
    g = RNG.normal(size=(1000, 2))
    assert np.all((apply_C(m, g) * g).sum(1) >= 2.0 * (g * g).sum(1) - 1e-12)
    assert np.all((apply_B(m, g) * g).sum(1) >= 0.5 * (g * g).sum(1) - 1e-12)


def test_voigt_matches_tensor():
    m = MaterialModel.plane(0.8, 0.6, 0.3, 0.2)
    eta = random_sym(1)[0]
    v = np.array([eta[0, 0], eta[1, 1], 2 * eta[0, 1]])
    s = m.voigt_C() @ v
    full = apply_C(m, eta)
    assert np.allclose(s, [full[0, 0], full[1, 1], full[0, 1]])


def test_constant_profile():
    f = ViscosityField.constant(1.0)
    x = RNG.uniform(-1, 1, size=(50, 2))
    assert np.all(eval_psi(f, 0.3, x) == 1.0)
    assert np.all(eval_grad_psi(f, 0.3, x) == 0.0)


def tip_field():
    return ViscosityField.tip_vanishing(eps=0.2, ramp=0.2, c=0.5)


def test_tip_vanishing_examples():
    f = tip_field()
    t = 0.4
    tip = np.array([0.2, 0.0])
    d = np.array([np.cos(1.1), np.sin(1.1)])
    assert eval_psi(f, t, tip + 0.1 * d) == 0.0
    assert np.all(eval_grad_psi(f, t, tip + 0.1 * d) == 0.0)
    assert eval_psi(f, t, tip + 0.3 * d) == pytest.approx(0.5)
    assert np.linalg.norm(eval_grad_psi(f, t, tip + 0.3 * d)) == pytest.approx(7.5)
    assert eval_psi(f, t, tip + 0.45 * d) == 1.0
    assert f.max_slope == pytest.approx(7.5)


@settings(max_examples=200, deadline=None)
@given(t=st.floats(0, 1), r=st.floats(0, 0.2), th=st.floats(0, 2 * np.pi))
def test_dead_zone_support(t, r, th):
    f = tip_field()
    x = f.center(t) + r * np.array([np.cos(th), np.sin(th)])
    assert eval_psi(f, t, x) == 0.0


@settings(max_examples=200, deadline=None)
@given(t=st.floats(0, 1), x1=st.floats(-1, 1), x2=st.floats(-1, 1))
def test_psi_bounds(t, x1, x2):
    f = tip_field()
    x = np.array([x1, x2])
    p = eval_psi(f, t, x)
    assert 0.0 <= p <= f.psi_max
    assert np.linalg.norm(eval_grad_psi(f, t, x)) <= f.max_slope + 1e-12


def test_gradient_finite_differences():
    f = tip_field()
    t, delta = 0.3, 1e-4
    c = f.center(t)
    # middle half of the ramp (away from its endpoints, where |grad Psi| -> 0)
    r = RNG.uniform(0.25, 0.35, size=200)
    th = RNG.uniform(0, 2 * np.pi, size=200)
    x = c + r[:, None] * np.column_stack([np.cos(th), np.sin(th)])
    g = eval_grad_psi(f, t, x)
    fd = np.column_stack([(eval_psi(f, t, x + delta * e) - eval_psi(f, t, x - delta * e)) / (2 * delta)
                          for e in np.eye(2)])
    rel = np.linalg.norm(fd - g, axis=1) / np.linalg.norm(g, axis=1)
    assert rel.max() < 1e-6


def test_time_sample_constant_and_dead_zone():
    f = ViscosityField.constant(0.7)
    psi = psi_time_sample(f, 3, 0.1)
    assert np.all(psi(RNG.uniform(-1, 1, (5, 2))) == 0.7)
    g = tip_field()
    psi = psi_time_sample(g, 1, 0.1)
    assert psi.t == pytest.approx(0.05)
    # within 0.1 of the tip path over [0, 0.1]: always inside the dead ball
    assert psi(np.array([0.02, 0.05])) == 0.0
    with pytest.raises(ValueError):
        psi_time_sample(g, 0, 0.1)


def test_time_sample_close_to_average():
    g = tip_field()
    tau = 0.05
    x = np.array([0.25, 0.22])  # crosses the ramp during the interval
    k = 5
    exact, _ = quad(lambda s: float(eval_psi(g, s, x)), (k - 1) * tau, k * tau, epsabs=1e-14)
    exact /= tau
    mid = float(psi_time_sample(g, k, tau)(x))
    # midpoint error tau^2/24 |d2/dt2 Psi|, with d2/dt2 Psi = Psi'' r'^2 + Psi' r'',
    # |Psi''| <= 6/ramp^2, |r'| <= c, |r''| <= c^2/r and r >= eps on the ramp
    d2 = 6 / g.ramp ** 2 * g.c ** 2 + g.max_slope * g.c ** 2 / g.eps
    bound = tau ** 2 / 24 * d2
    assert abs(mid - exact) <= bound
