"""
Config files, named scenarios and error norms against exact fields.

Configs are UTF-8 INI files; see ``configs/README.md`` for the schema.
"""
from __future__ import annotations

import configparser
import logging
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analytic import AnalyticSolution, benchmark_data, exact_grad_u, exact_u
from .assembly import BoundaryData
from .material import MaterialModel, ViscosityField
from .mesh import (SPEED_WARNING_RATIO, CrackedMesh, CrackSchedule, build_cracked_disk_mesh,
                   build_cracked_rect_mesh, build_rect_mesh, write_vtk)
from .timestepper import SimConfig, run

log = logging.getLogger(__name__)

SCENARIOS = ("griffith_benchmark", "paradox", "convergence", "manufactured_smooth", "custom")
BENCHMARK_SCENARIOS = ("griffith_benchmark", "paradox", "convergence")


class ConfigError(ValueError):
    """Invalid or unparseable configuration."""


SCHEMA = {
    "scenario": {"name": str, "levels": int, "snapshots": int},
    "domain": {"shape": str, "R": float, "a": float, "b": float, "h": float,
               "tip_x0": float, "max_tip": float, "crack": bool, "neumann_sides": str},
    "crack": {"c": float},
    "time": {"T": float, "n": int},
    "material": {"mode": str, "kappa_c": float, "kappa_b": float, "lame_lambda": float,
                 "lame_mu": float, "visc_lambda": float, "visc_mu": float},
    "viscosity": {"profile": str, "value": float, "eps": float, "ramp": float},
    "data": {"u0": float, "u1": float, "w": float, "f": float, "g": float},
    "solver": {"tol": float, "max_iter": int},
    "energy": {"toughness": float},
}


@dataclass
class RunSpec:
    """Validated, fully defaulted configuration of a scenario."""

    scenario: str = "griffith_benchmark"
    levels: int = 3
    snapshots: int = 0
    shape: str = "disk"
    R: float = 1.0
    a: float = 1.0
    b: float = 1.0
    h: float = 0.05
    tip_x0: float = 0.0
    max_tip: float | None = None
    crack: bool = True
    neumann_sides: tuple = ()
    c: float = 0.5
    T: float = 1.0
    n: int = 200
    material: MaterialModel = field(default_factory=MaterialModel.antiplane)
    profile: str = "tip_vanishing"
    psi_value: float = 1.0
    eps: float = 0.2
    ramp: float = 0.2
    constants: dict = field(default_factory=dict)
    tol: float = 1e-10
    max_iter: int | None = None
    toughness: float = 1.0
    warnings: list = field(default_factory=list)

    @property
    def final_tip(self) -> float:
        return self.tip_x0 + self.c * self.T

    def viscosity(self, profile: str | None = None) -> ViscosityField:
        profile = profile or self.profile
        if profile == "constant":
            return ViscosityField.constant(self.psi_value)
        return ViscosityField.tip_vanishing(self.eps, self.ramp, self.c, self.tip_x0)

    def build_mesh(self, h: float | None = None) -> CrackedMesh:
        h = self.h if h is None else h
        max_tip = self.final_tip if self.max_tip is None else self.max_tip
        if self.shape == "disk":
            return build_cracked_disk_mesh(self.R, h, self.tip_x0, max_tip)
        if not self.crack:
            return build_rect_mesh(self.a, self.b, h, self.neumann_sides)
        return build_cracked_rect_mesh(self.a, self.b, h, self.tip_x0, max_tip, self.neumann_sides)

    def schedule(self) -> CrackSchedule:
        return CrackSchedule(self.c, self.T, self.material.lambda1)

    def sim_config(self, mesh=None, n=None, profile=None, data=None) -> SimConfig:
        mesh = self.build_mesh() if mesh is None else mesh
        psi = self.viscosity(profile)
        if data is None:
            data = self.problem_data()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return SimConfig(mesh, self.n if n is None else n, self.T, self.schedule(),
                             self.material, psi, data, self.tol, self.max_iter, self.toughness)

    def analytic(self) -> AnalyticSolution:
        return AnalyticSolution(self.c, self.R, self.T)

    def problem_data(self) -> BoundaryData:
        if self.scenario in BENCHMARK_SCENARIOS:
            # the forcing is always built from the tip-vanishing profile
            return benchmark_data(self.analytic(), self.viscosity("tip_vanishing"))
        if self.scenario == "manufactured_smooth":
            return manufactured_data(self.material, self.psi_value)
        return constant_data(self.constants, self.material.dofs_per_node)


def _line_of(text: str, section: str, key: str) -> int | None:
    cur = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            cur = m.group(1).strip()
        elif cur == section and re.match(rf"{re.escape(key)}\s*[=:]", s, flags=re.I):
            return i
    return None


def parse_config(path) -> RunSpec:
    """Read and validate a scenario config file.

    Raises
    ------
    ConfigError
        Syntax errors (with line numbers), unknown sections or keys, bad
        values and violated physical constraints.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def parse_config_text(text: str, source: str = "<config>") -> RunSpec:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: parse error: {exc}") from exc

    raw = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, value in cp.items(section):
            if key not in SCHEMA[section]:
                line = _line_of(text, section, key)
                raise ConfigError(f"{source}:{line}: unknown key '{key}' in [{section}]")
            kind = SCHEMA[section][key]
            try:
                if kind is bool:
                    parsed = cp.getboolean(section, key)
                elif kind is str:
                    parsed = value.strip()
                else:
                    parsed = kind(value)
            except ValueError as exc:
                line = _line_of(text, section, key)
                raise ConfigError(f"{source}:{line}: [{section}] {key}: cannot read "
                                  f"{value!r} as {kind.__name__}") from exc
            raw[(section, key)] = parsed
    spec = _build_spec(raw, source)
    validate(spec)
    return spec


def _build_spec(raw: dict, source: str) -> RunSpec:
    g = raw.get
    spec = RunSpec()
    spec.scenario = g(("scenario", "name"), spec.scenario)
    if spec.scenario not in SCENARIOS:
        raise ConfigError(f"{source}: unknown scenario '{spec.scenario}' (choose from {', '.join(SCENARIOS)})")
    if spec.scenario == "manufactured_smooth":
        spec.shape, spec.crack, spec.profile = "rect", False, "constant"
        spec.c, spec.h, spec.n = 0.0, 0.25, 16
    if spec.scenario == "custom":
        spec.profile = "constant"
    spec.levels = g(("scenario", "levels"), spec.levels)
    spec.snapshots = g(("scenario", "snapshots"), spec.snapshots)
    spec.shape = g(("domain", "shape"), spec.shape)
    for key in ("R", "a", "b", "h", "tip_x0", "max_tip", "crack"):
        if ("domain", key) in raw:
            setattr(spec, key, raw[("domain", key)])
    sides = g(("domain", "neumann_sides"), "")
    spec.neumann_sides = tuple(s.strip() for s in sides.split(",") if s.strip())
    spec.c = g(("crack", "c"), spec.c)
    spec.T = g(("time", "T"), spec.T)
    spec.n = g(("time", "n"), spec.n)
    mode = g(("material", "mode"), "antiplane")
    if mode not in ("antiplane", "plane"):
        raise ConfigError(f"{source}: material mode must be 'antiplane' or 'plane'")
    mkw = {k: raw[("material", k)] for k in SCHEMA["material"] if k != "mode" and ("material", k) in raw}
    try:
        spec.material = MaterialModel(mode, **mkw)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    spec.profile = g(("viscosity", "profile"), spec.profile)
    spec.psi_value = g(("viscosity", "value"), spec.psi_value)
    spec.eps = g(("viscosity", "eps"), spec.eps)
    spec.ramp = g(("viscosity", "ramp"), spec.ramp)
    spec.constants = {k: raw[("data", k)] for k in SCHEMA["data"] if ("data", k) in raw}
    spec.tol = g(("solver", "tol"), spec.tol)
    spec.max_iter = g(("solver", "max_iter"), spec.max_iter)
    spec.toughness = g(("energy", "toughness"), spec.toughness)
    return spec


def validate(spec: RunSpec) -> RunSpec:
    """Check physical and numerical constraints; collect warnings on ``spec``."""
    def fail(msg):
        raise ConfigError(msg)

    if spec.shape not in ("disk", "rect"):
        fail(f"domain shape must be 'disk' or 'rect', got '{spec.shape}'")
    if spec.profile not in ("constant", "tip_vanishing"):
        fail(f"viscosity profile must be 'constant' or 'tip_vanishing', got '{spec.profile}'")
    if spec.T <= 0 or spec.n < 1:
        fail("time horizon must be positive and n >= 1 (tau = T/n > 0)")
    if spec.h <= 0:
        fail("mesh size h must be positive")
    if spec.levels < 1:
        fail("levels must be >= 1")
    if spec.tol <= 0:
        fail("solver tol must be positive")
    if spec.c < 0:
        fail("crack speed must be non-negative")
    bad = set(spec.neumann_sides) - {"left", "right", "bottom", "top"}
    if bad:
        fail(f"unknown neumann_sides {sorted(bad)} (use left, right, bottom, top)")
    if spec.neumann_sides and spec.shape != "rect":
        fail("neumann_sides is only supported on rectangles")
    extent = spec.R if spec.shape == "disk" else spec.a
    if spec.scenario in BENCHMARK_SCENARIOS:
        if spec.shape != "disk" or spec.material.mode.value != "antiplane":
            fail(f"scenario '{spec.scenario}' needs an antiplane disk")
        if not 0.0 < spec.c < 1.0:
            fail("crack speed must satisfy 0<c<1 (moving-crack benchmark)")
        if spec.c * spec.T >= spec.R:
            fail(f"cT = {spec.c * spec.T:g} >= R = {spec.R:g} violates the moving-crack setup (need cT < R)")
        if spec.tip_x0 != 0.0:
            fail("the moving-crack benchmark starts the tip at x1 = 0")
        if not 0 < spec.eps < spec.R - spec.c * spec.T:
            fail("the dead-zone radius must satisfy 0 < eps < R - cT")
        if spec.max_tip is not None and spec.max_tip < spec.final_tip:
            fail("max_tip must cover the final tip position tip_x0 + cT")
    elif spec.crack and spec.final_tip >= extent:
        fail(f"final tip {spec.final_tip:g} must stay inside the domain (extent {extent:g})")
    if spec.profile == "constant" and spec.psi_value < 0:
        fail("viscosity value must be non-negative")
    if spec.profile == "tip_vanishing" and (spec.eps < 0 or spec.ramp <= 0):
        fail("tip-vanishing profile needs eps >= 0 and ramp > 0")
    if spec.scenario == "manufactured_smooth":
        if spec.shape != "rect" or spec.crack or spec.profile != "constant" or spec.neumann_sides:
            fail("manufactured_smooth runs on an uncracked, fully Dirichlet rectangle with constant Psi")
        if spec.material.mode.value != "antiplane":
            fail("manufactured_smooth is antiplane")
        if spec.a != 1.0 or spec.b != 1.0:
            fail("manufactured_smooth uses the square [-1, 1]^2")
    ratio = spec.c ** 2 / spec.material.lambda1
    if spec.material.mode.value == "antiplane" and ratio >= SPEED_WARNING_RATIO:
        msg = (f"crack speed c={spec.c} gives c^2/lambda1 = {ratio:.4f}: close to the speed bound "
               f"|s'(t)|^2 < lambda1 under which uniqueness is guaranteed")
        spec.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return spec


# --------------------------------------------------------------------------
# data sets


def constant_data(constants: dict, dpn: int = 1) -> BoundaryData:
    def const(v):
        if v is None or v == 0.0:
            return None
        shape = (dpn,) if dpn > 1 else ()

        def fn(*args):
            x = args[-2]
            return np.full(np.shape(x)[:-1] + shape, v)
        return fn

    w = const(constants.get("w"))
    return BoundaryData(w=w, w_dot=(lambda t, x, s: np.zeros(np.shape(x)[:-1] + ((dpn,) if dpn > 1 else ())))
                        if w else None,
                        f=const(constants.get("f")), g=const(constants.get("g")),
                        u0=const(constants.get("u0")), u1=const(constants.get("u1")))


def manufactured_solution(t, x):
    x = np.asarray(x, dtype=float)
    return np.sin(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1]) * np.cos(t)


def manufactured_gradient(t, x):
    x = np.asarray(x, dtype=float)
    s1, s2 = np.sin(np.pi * x[..., 0]), np.sin(np.pi * x[..., 1])
    c1, c2 = np.cos(np.pi * x[..., 0]), np.cos(np.pi * x[..., 1])
    return np.pi * np.cos(t) * np.stack([c1 * s2, s1 * c2], axis=-1)


def manufactured_data(model: MaterialModel, psi_value: float) -> BoundaryData:
    """u = sin(pi x1) sin(pi x2) cos t on [-1, 1]^2 (zero on the boundary)."""
    kc, kb = model.kappa_c, model.kappa_b
    two_pi2 = 2.0 * np.pi ** 2

    def f(t, x, side):
        phi = manufactured_solution(0.0, x)
        return phi * ((two_pi2 * kc - 1.0) * np.cos(t) - two_pi2 * psi_value ** 2 * kb * np.sin(t))

    return BoundaryData(f=f, u0=lambda x, side: manufactured_solution(0.0, x))


# --------------------------------------------------------------------------
# error norms

# 7-point degree-5 rule on the reference triangle (weights sum to 1)
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
Q7_BARY = np.array([[1 / 3, 1 / 3, 1 / 3],
                    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
                    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2]])
Q7_W = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)


def compare_to_exact(mesh: CrackedMesh, u: np.ndarray, exact, exact_grad=None) -> dict:
    """L2 and broken-H1 (seminorm) errors of a scalar P1 field.

    ``exact(x, side)`` and ``exact_grad(x, side)`` are evaluated at interior
    quadrature points with the side flag of the containing triangle.
    """
    p = mesh.nodes[mesh.triangles]
    xq = np.einsum("qa,eaj->eqj", Q7_BARY, p)
    side = np.repeat(mesh.triangle_sides()[:, None], len(Q7_W), axis=1)
    area = mesh.signed_areas()
    uh = np.einsum("qa,ea->eq", Q7_BARY, u[mesh.triangles])
    err = uh - exact(xq, side)
    l2 = math.sqrt(float(np.einsum("e,q,eq->", area, Q7_W, err ** 2)))
    out = {"l2": l2}
    if exact_grad is not None:
        from .assembly import P1Space  # local import keeps the module light
        grads = P1Space(mesh).grads
        guh = np.einsum("ea,eaj->ej", u[mesh.triangles], grads)
        gerr = guh[:, None, :] - exact_grad(xq, side)
        out["h1"] = math.sqrt(float(np.einsum("e,q,eqj->", area, Q7_W, gerr ** 2)))
    return out


def benchmark_errors(mesh, u, sol: AnalyticSolution, t: float) -> dict:
    return compare_to_exact(mesh, u, lambda x, s: exact_u(sol, t, x, s),
                            lambda x, s: exact_grad_u(sol, t, x, s))


def observed_rates(hs, errors) -> list:
    hs, errors = np.asarray(hs, float), np.asarray(errors, float)
    return [float(r) for r in np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])]


# --------------------------------------------------------------------------
# scenario runners


def _snapshot_every(spec: RunSpec, n: int) -> int | None:
    return max(1, n // spec.snapshots) if spec.snapshots else None


def _write_snapshots(out_dir: Path, mesh, result, prefix="fields"):
    for k, t, u in result.snapshots:
        write_vtk(out_dir / f"{prefix}_{k:04d}.vtk", mesh, {"u": u}, title=f"u at t={t:.17g}")


def _max_identity(ledger) -> float:
    res = np.abs(np.asarray(ledger.identity_residual[1:]))
    scale = np.maximum(np.asarray(ledger.identity_scale[1:]), 1e-300)
    return float(np.max(res / scale)) if len(res) else 0.0


def _fmt(x) -> str:
    return f"{x:.10g}"


def run_scenario(spec: RunSpec, out_dir) -> int:
    """Run a validated scenario, writing ledgers, snapshots and summary.txt."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"scenario: {spec.scenario}"]
    lines += [f"warning: {w}" for w in spec.warnings]
    runner = {
        "griffith_benchmark": _run_single,
        "custom": _run_single,
        "paradox": _run_paradox,
        "convergence": _run_convergence,
        "manufactured_smooth": _run_manufactured,
    }[spec.scenario]
    lines += runner(spec, out_dir)
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def _ledger_lines(ledger, label=""):
    pre = f"{label} " if label else ""
    return [f"{pre}E0: {_fmt(ledger.E0)}",
            f"{pre}residual_griffith(T): {_fmt(ledger.residual_griffith[-1])}",
            f"{pre}residual_kv(T): {_fmt(ledger.residual_kv[-1])}",
            f"{pre}max relative step-identity residual: {_max_identity(ledger):.3e}"]


def _run_single(spec, out_dir):
    mesh = spec.build_mesh()
    cfg = spec.sim_config(mesh)
    result = run(cfg, snapshot_every=_snapshot_every(spec, cfg.n_steps))
    result.ledger.write_csv(out_dir / "ledger.csv")
    if spec.snapshots:
        _write_snapshots(out_dir, mesh, result)
    lines = [f"nodes: {mesh.n_nodes}", f"steps: {cfg.n_steps}"] + _ledger_lines(result.ledger)
    if spec.scenario == "griffith_benchmark":
        err = benchmark_errors(mesh, result.final.u, spec.analytic(), spec.T)
        lines += [f"L2 error u(T): {_fmt(err['l2'])}", f"broken H1 error u(T): {_fmt(err['h1'])}"]
    return lines


def _run_paradox(spec, out_dir):
    mesh = spec.build_mesh()
    lines, final = [], {}
    for profile, name in (("tip_vanishing", "degenerate"), ("constant", "kelvin_voigt")):
        cfg = spec.sim_config(mesh, profile=profile)
        if profile == "constant":
            cfg.viscosity = ViscosityField.constant(1.0)
        result = run(cfg, snapshot_every=_snapshot_every(spec, cfg.n_steps))
        result.ledger.write_csv(out_dir / f"ledger_{name}.csv")
        if spec.snapshots:
            _write_snapshots(out_dir, mesh, result, prefix=f"fields_{name}")
        lines += _ledger_lines(result.ledger, name)
        final[name] = result.ledger
    crack = spec.toughness * spec.c * spec.T
    lines.append(f"crack energy c*T: {_fmt(crack)}")
    for name, led in final.items():
        lines.append(f"{name}: residual_griffith(T)/(c*T) = {_fmt(led.residual_griffith[-1] / crack)}, "
                     f"residual_kv(T)/E0 = {_fmt(led.residual_kv[-1] / led.E0)}")
    return lines


def convergence_study(spec: RunSpec, profile: str | None = None) -> dict:
    """Runs on h, h/2, ... with n scaled like 1/h; returns errors and ledgers."""
    hs, ns, l2, h1, ledgers = [], [], [], [], []
    for i in range(spec.levels):
        h, n = spec.h / 2 ** i, spec.n * 2 ** i
        mesh = spec.build_mesh(h)
        cfg = spec.sim_config(mesh, n=n, profile=profile)
        result = run(cfg)
        err = benchmark_errors(mesh, result.final.u, spec.analytic(), spec.T)
        hs.append(h)
        ns.append(n)
        l2.append(err["l2"])
        h1.append(err["h1"])
        ledgers.append(result.ledger)
    return {"h": hs, "n": ns, "l2": l2, "h1": h1, "ledgers": ledgers,
            "l2_rates": observed_rates(hs, l2), "h1_rates": observed_rates(hs, h1)}


def _run_convergence(spec, out_dir):
    study = convergence_study(spec)
    lines = []
    for i, (h, n, e, led) in enumerate(zip(study["h"], study["n"], study["l2"], study["ledgers"])):
        led.write_csv(out_dir / f"ledger_level{i}.csv")
        lines.append(f"level {i}: h={_fmt(h)} n={n} L2 error={_fmt(e)} "
                     f"residual_griffith(T)={_fmt(led.residual_griffith[-1])}")
    lines.append("observed L2 rates: " + " ".join(_fmt(r) for r in study["l2_rates"]))
    lines.append("observed broken-H1 rates: " + " ".join(_fmt(r) for r in study["h1_rates"]))
    return lines


def manufactured_study(spec: RunSpec, spatial: bool = True) -> dict:
    """Refinement study on the manufactured problem.

    Spatial: h halved and n quadrupled per level, L2 error against the exact
    field.  Temporal: fixed mesh, n doubled per level, L2 distance to a run
    with 8x the finest n on the same mesh (isolates the time error).
    """
    hs, ns, l2 = [], [], []
    if spatial:
        for i in range(spec.levels):
            h, n = spec.h / 2 ** i, spec.n * 4 ** i
            mesh = spec.build_mesh(h)
            result = run(spec.sim_config(mesh, n=n))
            err = compare_to_exact(mesh, result.final.u, lambda x, s: manufactured_solution(spec.T, x))
            hs.append(h)
            ns.append(n)
            l2.append(err["l2"])
        return {"h": hs, "n": ns, "l2": l2, "rates": observed_rates(hs, l2)}
    mesh = spec.build_mesh()
    ns = [spec.n * 2 ** i for i in range(spec.levels)]
    ref = run(spec.sim_config(mesh, n=8 * ns[-1]))
    M = ref.final._ops.M
    for n in ns:
        d = run(spec.sim_config(mesh, n=n)).final.u - ref.final.u
        l2.append(math.sqrt(float(d @ (M @ d))))
    taus = [spec.T / n for n in ns]
    return {"h": [spec.h] * len(ns), "n": ns, "l2": l2, "rates": observed_rates(taus, l2)}


def _run_manufactured(spec, out_dir):
    mesh = spec.build_mesh()
    result = run(spec.sim_config(mesh), snapshot_every=_snapshot_every(spec, spec.n))
    result.ledger.write_csv(out_dir / "ledger.csv")
    if spec.snapshots:
        _write_snapshots(out_dir, mesh, result)
    err = compare_to_exact(mesh, result.final.u, lambda x, s: manufactured_solution(spec.T, x))
    lines = _ledger_lines(result.ledger) + [f"L2 error u(T): {_fmt(err['l2'])}"]
    if spec.levels > 1:
        sp_ = manufactured_study(spec, spatial=True)
        tm = manufactured_study(spec, spatial=False)
        lines.append("spatial study (h halved, n x4): L2 errors " + " ".join(_fmt(e) for e in sp_["l2"]))
        lines.append("spatial L2 rates: " + " ".join(_fmt(r) for r in sp_["rates"]))
        lines.append("temporal study (n doubled, vs 8x finer-in-time reference): L2 errors " + " ".join(_fmt(e) for e in tm["l2"]))
        lines.append("temporal L2 rates: " + " ".join(_fmt(r) for r in tm["rates"]))
    return lines
