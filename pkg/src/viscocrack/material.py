"""Elastic and viscous tensors and the space-time viscosity coefficient."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Mode(str, enum.Enum):
    ANTIPLANE = "antiplane"
    PLANE = "plane"


@dataclass(frozen=True)
class MaterialModel:
    """Isotropic homogeneous elasticity tensor C and viscosity tensor B.

    In antiplane mode both tensors are scalar multiples of the identity on
    gradients (``kappa_c`` and ``kappa_b``); in plane mode they are the
    isotropic laws with the given Lame pairs.
    """

    mode: Mode = Mode.ANTIPLANE
    kappa_c: float = 1.0
    kappa_b: float = 1.0
    lame_lambda: float = 0.0
    lame_mu: float = 0.5
    visc_lambda: float = 0.0
    visc_mu: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.lambda1 <= 0 or self.lambda2 <= 0:
            raise ValueError("elasticity and viscosity tensors must be coercive")

    @classmethod
    def antiplane(cls, kappa_c=1.0, kappa_b=1.0):
        return cls(Mode.ANTIPLANE, kappa_c=kappa_c, kappa_b=kappa_b)

    @classmethod
    def plane(cls, lame_lambda, lame_mu, visc_lambda, visc_mu):
        return cls(Mode.PLANE, lame_lambda=lame_lambda, lame_mu=lame_mu,
                   visc_lambda=visc_lambda, visc_mu=visc_mu)

    @property
    def dofs_per_node(self) -> int:
        return 1 if self.mode is Mode.ANTIPLANE else 2

    @property
    def lambda1(self) -> float:
        if self.mode is Mode.ANTIPLANE:
            return self.kappa_c
        return 2.0 * min(self.lame_mu, self.lame_mu + self.lame_lambda)

    @property
    def lambda2(self) -> float:
        if self.mode is Mode.ANTIPLANE:
            return self.kappa_b
        return 2.0 * min(self.visc_mu, self.visc_mu + self.visc_lambda)

    def voigt_C(self) -> np.ndarray:
        """Matrix of C acting on (e11, e22, 2 e12), or kappa_c I for gradients."""
        if self.mode is Mode.ANTIPLANE:
            return self.kappa_c * np.eye(2)
        return _voigt(self.lame_lambda, self.lame_mu)

    def voigt_B(self) -> np.ndarray:
        if self.mode is Mode.ANTIPLANE:
            return self.kappa_b * np.eye(2)
        return _voigt(self.visc_lambda, self.visc_mu)


def _voigt(lam, mu):
    return np.array([[lam + 2 * mu, lam, 0.0],
                     [lam, lam + 2 * mu, 0.0],
                     [0.0, 0.0, mu]])


def _apply(mode, lam, mu, kappa, eta):
    eta = np.asarray(eta, dtype=float)
    if mode is Mode.ANTIPLANE:
        return kappa * eta
    if eta.shape[-2:] != (2, 2) or not np.allclose(eta, np.swapaxes(eta, -1, -2), rtol=0, atol=1e-14):
        raise ValueError("plane-mode strain must be a symmetric 2x2 matrix")
    tr = np.trace(eta, axis1=-2, axis2=-1)[..., None, None]
    return lam * tr * np.eye(2) + 2.0 * mu * eta


def apply_C(model: MaterialModel, eta) -> np.ndarray:
    """Stress C eta (plane: lambda tr(eta) I + 2 mu eta; antiplane: kappa_c eta)."""
    return _apply(model.mode, model.lame_lambda, model.lame_mu, model.kappa_c, eta)


def apply_B(model: MaterialModel, eta) -> np.ndarray:
    return _apply(model.mode, model.visc_lambda, model.visc_mu, model.kappa_b, eta)


# --------------------------------------------------------------------------
# viscosity coefficient


class Profile(str, enum.Enum):
    CONSTANT = "constant"
    TIP_VANISHING = "tip_vanishing"


@dataclass(frozen=True)
class ViscosityField:
    """Psi(t, x): a constant, or a cubic smoothstep in the distance to the tip.

    For the tip-vanishing profile, Psi = 0 within ``eps`` of the moving tip
    (tip_x0 + c t, 0), Psi = 1 beyond ``eps + ramp``, with the C^1 ramp
    3 r^2 - 2 r^3 in between.
    """

    profile: Profile = Profile.CONSTANT
    value: float = 1.0
    eps: float = 0.0
    ramp: float = 1.0
    c: float = 0.0
    tip_x0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "profile", Profile(self.profile))
        if self.profile is Profile.CONSTANT and self.value < 0:
            raise ValueError("Psi must be non-negative")
        if self.profile is Profile.TIP_VANISHING and not (self.eps >= 0 and self.ramp > 0):
            raise ValueError("tip-vanishing profile needs eps >= 0 and ramp > 0")

    @classmethod
    def constant(cls, value=1.0):
        return cls(Profile.CONSTANT, value=value)

    @classmethod
    def tip_vanishing(cls, eps, ramp, c, tip_x0=0.0):
        return cls(Profile.TIP_VANISHING, eps=eps, ramp=ramp, c=c, tip_x0=tip_x0)

    @property
    def psi_max(self) -> float:
        return self.value if self.profile is Profile.CONSTANT else 1.0

    @property
    def max_slope(self) -> float:
        return 0.0 if self.profile is Profile.CONSTANT else 1.5 / self.ramp

    def center(self, t) -> np.ndarray:
        return np.array([self.tip_x0 + self.c * t, 0.0])

    def _ramp(self, t, x):
        d = np.asarray(x, dtype=float) - self.center(t)
        r = np.hypot(d[..., 0], d[..., 1])
        s = np.clip((r - self.eps) / self.ramp, 0.0, 1.0)
        return d, r, s


def eval_psi(field: ViscosityField, t: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if field.profile is Profile.CONSTANT:
        return np.full(x.shape[:-1], field.value)
    _, _, s = field._ramp(t, x)
    return s * s * (3.0 - 2.0 * s)


def eval_grad_psi(field: ViscosityField, t: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if field.profile is Profile.CONSTANT:
        return np.zeros(x.shape)
    d, r, s = field._ramp(t, x)
    dpsi_dr = 6.0 * s * (1.0 - s) / field.ramp
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(r[..., None] > 0, d / r[..., None], 0.0)
    return dpsi_dr[..., None] * unit


def psi_time_sample(field: ViscosityField, k: int, tau: float):
    """Midpoint sample x -> Psi((k - 1/2) tau, x) of the step-k time average."""
    if k < 1:
        raise ValueError("step index must be >= 1")
    t_mid = (k - 0.5) * tau

    def psi_k(x):
        return eval_psi(field, t_mid, x)

    psi_k.t = t_mid
    return psi_k
