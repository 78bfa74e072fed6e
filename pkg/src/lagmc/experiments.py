"""Batch experiments: configuration parsing, runners and CSV emission.

A configuration is an INI file with one ``[experiment]`` section naming the
``kind`` and ``seed`` plus kind-specific sections. Every runner returns an
:class:`ExperimentReport` whose tables carry a ``status`` column, so failed
rows are recorded rather than raised.
"""

import configparser
import csv
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import ConfigError, LagmcError
from .geometry import jacobi_diagnostic
from .grid import Grid, ScalarField, fmt
from .phase import Constant, phase_from_config
from .potentials import Affine, MongeAmpereLift, Quadratic, Scaled, potential_from_config
from .singular import (LogType, OddPower, TouchSpec, XPower, build, lipschitz_quotient,
                       mean_curvature_profile, ode_residual, viscosity_touch_test)
from .solver import DirichletProblem, SolverConfig, flow_evolve, manufactured_problem, newton_solve
from .transforms import (concavified_pd_batch, concavify_constant, default_rotation_angle,
                         rotation_phase_shift_check, rotation_round_trip, sample_constrained)

__all__ = ["KINDS", "Table", "ExperimentReport", "ExperimentConfig", "load_config", "run", "emit_csv"]

KINDS = ("solve", "flow", "hessian-scaling", "gradient-scaling", "jacobi-report",
         "counterexample-gallery", "concavity-sweep", "rotation-check")

# section -> key -> value type; every present value is converted at load time
_SCHEMA = {
    "experiment": {"kind": "str", "seed": "int", "name": "str"},
    "grid": {"n": "int", "points": "int", "half_width": "float", "lower": "floats",
             "upper": "floats", "ball": "bool"},
    "potential": {"type": "str", "a": "floats", "c": "float", "kappa": "float", "terms": "str",
                  "scale": "float", "linear": "floats", "offset": "float"},
    "phase": {"variant": "str", "c": "float", "s1": "float", "s2": "float", "gamma1": "float",
              "gamma2": "floats", "gamma3": "floats", "r1": "float", "r2": "float", "dim": "int"},
    "manufactured": {"wrap": "str", "eta": "float"},
    "solver": {"tol": "float", "max_iter": "int", "backtrack": "float", "min_step": "float",
               "linear_tol": "float", "linear_maxiter": "int"},
    "flow": {"dt": "float", "steps": "int", "boundary": "str", "record_every": "int"},
    "scaling": {"scales": "floats", "wrap": "str", "tilt": "float"},
    "gallery": {"families": "str", "samples": "int", "touch": "bool", "p_steps": "int",
                "M_steps": "int"},
    "concavity": {"n": "int", "K": "float", "A": "floats", "samples": "int"},
    "rotation": {"gamma": "float", "K": "float"},
    "jacobi": {"gap_tol": "float", "dump_nodes": "bool"},
}


@dataclass
class Table:
    """Columns and rows of one CSV table."""

    columns: list
    rows: list = field(default_factory=list)

    def add(self, **values):
        missing = [c for c in self.columns if c not in values]
        if missing:
            raise KeyError(f"row is missing columns {missing}")
        self.rows.append([values[c] for c in self.columns])

    @property
    def failed(self):
        if "status" not in self.columns:
            return 0
        k = self.columns.index("status")
        return sum(1 for r in self.rows if r[k] != "ok")


@dataclass
class ExperimentReport:
    kind: str
    tables: dict
    summary: list

    @property
    def failed_rows(self):
        return sum(t.failed for t in self.tables.values())

    @property
    def ok(self):
        return self.failed_rows == 0


class ExperimentConfig:
    """Typed, path-reporting access to a parsed configuration."""

    def __init__(self, parser, source="<config>"):
        self.parser = parser
        self.source = source
        for sec in parser.sections():
            if sec not in _SCHEMA:
                raise ConfigError(sec, "unknown section")
            for key in parser[sec]:
                if key not in _SCHEMA[sec]:
                    raise ConfigError(f"{sec}.{key}", "unknown key")
        if not parser.has_section("experiment"):
            raise ConfigError("experiment", "section is required")
        kind = parser["experiment"].get("kind", "").strip()
        if kind not in KINDS:
            raise ConfigError("experiment.kind", f"must be one of {', '.join(KINDS)}")
        self.kind = kind
        for sec in parser.sections():
            for key in parser[sec]:
                getattr(self, _SCHEMA[sec][key])(sec, key, _REQUIRED)
        self.seed = self.int("experiment", "seed", 0)
        self.name = parser["experiment"].get("name", os.path.splitext(os.path.basename(source))[0])

    def has(self, section, key=None):
        if not self.parser.has_section(section):
            return False
        return key is None or key in self.parser[section]

    def section(self, section):
        return dict(self.parser[section]) if self.parser.has_section(section) else {}

    def _raw(self, section, key, default):
        if self.has(section, key):
            return self.parser[section][key]
        if default is _REQUIRED:
            raise ConfigError(f"{section}.{key}", "is required")
        return default

    def _convert(self, section, key, default, conv, what):
        raw = self._raw(section, key, default)
        if raw is default and default is not _REQUIRED:
            return default
        try:
            return conv(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"{section}.{key}", f"expected {what}, got {raw!r}") from None

    def int(self, section, key, default=None):
        return self._convert(section, key, default, lambda s: int(str(s).strip()), "an integer")

    def float(self, section, key, default=None):
        v = self._convert(section, key, default, lambda s: float(str(s).strip()), "a number")
        if v is not None and not np.isfinite(v):
            raise ConfigError(f"{section}.{key}", "must be finite")
        return v

    def floats(self, section, key, default=None):
        return self._convert(section, key, default,
                             lambda s: [float(t) for t in str(s).replace(",", " ").split()],
                             "a list of numbers")

    def bool(self, section, key, default=False):
        raw = self._raw(section, key, default)
        if isinstance(raw, bool):
            return raw
        v = str(raw).strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{section}.{key}", f"expected a boolean, got {raw!r}")

    def str(self, section, key, default=None):
        raw = self._raw(section, key, default)
        return raw.strip() if isinstance(raw, str) else raw


_REQUIRED = object()


def _parser():
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive (K, M_steps)
    return parser


def load_config(path, seed=None):
    """Parse an INI file into an :class:`ExperimentConfig`; ``seed`` overrides the file."""
    parser = _parser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(str(path), f"malformed: {exc}") from None
    if seed is not None:
        if not parser.has_section("experiment"):
            parser.add_section("experiment")
        parser["experiment"]["seed"] = str(seed)
    return ExperimentConfig(parser, str(path))


def config_from_string(text, source="<string>"):
    parser = _parser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(source, f"malformed: {exc}") from None
    return ExperimentConfig(parser, source)


def _grid(cfg, n_default=2, points_default=33, half_default=1.0):
    n = cfg.int("grid", "n", n_default)
    points = cfg.int("grid", "points", points_default)
    if n is None or n < 1:
        raise ConfigError("grid.n", "must be a positive integer")
    if points < 5:
        raise ConfigError("grid.points", "must be at least 5")
    ball = cfg.bool("grid", "ball", False)
    if cfg.has("grid", "lower") or cfg.has("grid", "upper"):
        lo = cfg.floats("grid", "lower", _REQUIRED)
        hi = cfg.floats("grid", "upper", _REQUIRED)
        if len(lo) not in (1, n) or len(hi) not in (1, n):
            raise ConfigError("grid.lower", f"needs 1 or {n} entries")
        lo = np.broadcast_to(lo, (n,))
        hi = np.broadcast_to(hi, (n,))
        widths = hi - lo
        if np.any(widths <= 0):
            raise ConfigError("grid.upper", "must exceed grid.lower")
        h = widths.min() / (points - 1)
        counts = np.rint(widths / h).astype(int) + 1
        if not np.allclose((counts - 1) * h, widths, rtol=1e-9):
            raise ConfigError("grid.upper", "box widths must be multiples of the spacing")
        return Grid(lo, hi, counts, ball=ball)
    half = cfg.float("grid", "half_width", half_default)
    if not half > 0:
        raise ConfigError("grid.half_width", "must be positive")
    return Grid.cube(n, half, points, ball=ball)


def _potential(cfg, default_type="quadratic"):
    params = cfg.section("potential")
    params.setdefault("type", default_type)
    try:
        return potential_from_config(params)
    except (LagmcError, ValueError) as exc:
        raise ConfigError("potential", str(exc)) from None


def _solver_config(cfg):
    try:
        return SolverConfig(
            tol=cfg.float("solver", "tol", 1e-8),
            max_iter=cfg.int("solver", "max_iter", 50),
            backtrack=cfg.float("solver", "backtrack", 0.5),
            min_step=cfg.float("solver", "min_step", 1e-4),
            linear_tol=cfg.float("solver", "linear_tol", 1e-12),
            linear_maxiter=cfg.int("solver", "linear_maxiter", 5000),
        )
    except LagmcError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("solver", str(exc)) from None


def _wrap(cfg, section="manufactured", default="pure-x"):
    wrap = (cfg.str(section, "wrap", default) or default).replace("_", "-").lower()
    if wrap not in ("pure-x", "z-coupled", "p-coupled"):
        raise ConfigError(f"{section}.wrap", "must be pure-x, z-coupled or p-coupled")
    return wrap


def _status(ok, why):
    return "ok" if ok else f"failed: {why}"


def _run_solve(cfg):
    grid = _grid(cfg)
    pot = _potential(cfg)
    sc = _solver_config(cfg)
    variant = cfg.str("phase", "variant", "manufactured")
    try:
        if variant == "manufactured":
            prob = manufactured_problem(pot, grid, _wrap(cfg), cfg.float("manufactured", "eta", None))
        else:
            params = cfg.section("phase")
            params.setdefault("dim", str(grid.n))
            prob = DirichletProblem(grid, phase_from_config(params), pot.value(grid.coords))
    except LagmcError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("phase", str(exc)) from None
    cols = ["converged", "iterations", "residual", "error_sup", "hessian_origin", "grad_sup",
            "osc", "margin_min", "margin_max", "status"]
    table = Table(cols)
    hist = Table(["iteration", "residual", "step"])
    try:
        u, rep = newton_solve(prob, sc)
    except LagmcError as exc:
        table.add(converged=False, iterations=0, residual=0.0, error_sup=0.0, hessian_origin=0.0,
                  grad_sup=0.0, osc=0.0, margin_min=0.0, margin_max=0.0, status=_status(False, exc))
        return ExperimentReport("solve", {"solve": table, "history": hist}, [f"solve failed: {exc}"])
    err = float(np.abs(u.values - pot.value(grid.coords)).max())
    table.add(converged=rep.converged, iterations=rep.iterations, residual=rep.residual, error_sup=err,
              hessian_origin=rep.hessian_origin, grad_sup=rep.grad_sup, osc=rep.osc,
              margin_min=rep.margin_min, margin_max=rep.margin_max,
              status=_status(rep.converged, rep.message))
    for i, r in enumerate(rep.history):
        hist.add(iteration=i, residual=r, step=rep.steps[i - 1] if i > 0 else 0.0)
    summary = [f"solve n={grid.n} points={grid.shape[0]} converged={rep.converged} "
               f"iterations={rep.iterations} residual={fmt(rep.residual)} error_sup={fmt(err)}"]
    if rep.subcritical:
        summary.append(f"warning: min phase margin {fmt(rep.margin_min)} < 0 (subcritical nodes)")
    return ExperimentReport("solve", {"solve": table, "history": hist}, summary)


def _run_flow(cfg):
    grid = _grid(cfg, points_default=21)
    pot = _potential(cfg)
    limit = grid.h ** 2 / (2 * grid.n)
    dt = cfg.float("flow", "dt", limit)
    steps = cfg.int("flow", "steps", 100)
    every = max(cfg.int("flow", "record_every", 10), 1)
    mode = cfg.str("flow", "boundary", "drift")
    if mode not in ("drift", "fixed"):
        raise ConfigError("flow.boundary", "must be drift or fixed")
    u0 = ScalarField(grid, pot.value(grid.coords))
    speed = np.arctan(np.linalg.eigvalsh(pot.hess(grid.coords))).sum(axis=-1)
    boundary = (lambda g, t: u0.values + speed * t) if mode == "drift" else None
    quad = isinstance(pot, Quadratic)
    table = Table(["step", "t", "u_center", "sup_change", "drift_error", "status"])
    try:
        traj = flow_evolve(u0, dt, steps, boundary)
    except LagmcError as exc:
        raise ConfigError("flow.dt", str(exc)) from None
    centre = grid.nearest_node(grid.center)
    worst = 0.0
    for k, uk in enumerate(traj):
        if k % every and k != steps:
            continue
        t = k * dt
        drift = float(np.abs(uk.values - (u0.values + speed * t)).max()) if quad else 0.0
        worst = max(worst, drift)
        ok = (not quad) or drift <= 10 * dt * max(t, 1.0)
        table.add(step=k, t=t, u_center=float(uk.values[centre]),
                  sup_change=float(np.abs(uk.values - u0.values).max()), drift_error=drift,
                  status=_status(ok, "drift error above 10 dt per unit time"))
    summary = [f"flow n={grid.n} dt={fmt(dt)} steps={steps} boundary={mode}"
               + (f" max_drift_error={fmt(worst)}" if quad else "")]
    return ExperimentReport("flow", {"flow": table}, summary)


def _envelope(x, y):
    """Smallest affine ``a + b x`` (``b >= 0``) lying above all points, by LP on
    the summed gap. Returns ``(a, b, success)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0:
        return 0.0, 0.0, False
    sx = max(float(np.abs(x).max()), 1.0)
    xs = x / sx
    res = linprog(c=[x.size, xs.sum()], A_ub=np.column_stack([-np.ones_like(xs), -xs]), b_ub=-y,
                  bounds=[(None, None), (0, None)], method="highs")
    if not res.success:
        return 0.0, 0.0, False
    a, b = res.x
    return float(a), float(b / sx), True


def _run_hessian_scaling(cfg):
    grid = _grid(cfg, n_default=2, points_default=33)
    base = _potential(cfg, default_type="radial")
    scales = cfg.floats("scaling", "scales", [0.25, 0.5, 1.0, 2.0, 4.0])
    wrap = _wrap(cfg, "scaling", "pure-x")
    sc = _solver_config(cfg)
    n = grid.n
    R = grid.radius
    cols = ["scale", "R", "grad_sup", "osc", "hessian_origin", "log_hessian", "x",
            "envelope", "bound_proxy", "converged", "status"]
    table = Table(cols)
    rows = []
    for s in scales:
        pot = Scaled(base, s)
        try:
            u, rep = newton_solve(manufactured_problem(pot, grid, wrap), sc)
            rows.append((s, rep, None))
        except LagmcError as exc:
            rows.append((s, None, str(exc)))
    good = [(s, r) for s, r, e in rows if r is not None and r.converged and r.hessian_origin > 0]
    xs = [(r.grad_sup / R) ** (2 * n + 3) for _, r in good]
    ys = [np.log(r.hessian_origin) for _, r in good]
    a, b, ok = _envelope(xs, ys)
    consistent = ok and len(good) == len(rows)
    for s, rep, err in rows:
        if rep is None:
            table.add(scale=s, R=R, grad_sup=0.0, osc=0.0, hessian_origin=0.0, log_hessian=0.0, x=0.0,
                      envelope=0.0, bound_proxy=0.0, converged=False, status=_status(False, err))
            continue
        x = (rep.grad_sup / R) ** (2 * n + 3)
        ly = float(np.log(rep.hessian_origin)) if rep.hessian_origin > 0 else 0.0
        env = a + b * x
        below = ly <= env + 1e-9 * max(1.0, abs(env))
        table.add(scale=s, R=R, grad_sup=rep.grad_sup, osc=rep.osc, hessian_origin=rep.hessian_origin,
                  log_hessian=ly, x=x, envelope=env, bound_proxy=float(np.exp(min(env, 700.0))),
                  converged=rep.converged,
                  status=_status(rep.converged and below, rep.message if not rep.converged else "above envelope"))
    fit = Table(["intercept", "slope", "consistent", "status"])
    fit.add(intercept=a, slope=b, consistent=consistent, status=_status(consistent, "envelope fit failed"))
    summary = [f"hessian-scaling n={n} R={fmt(R)} rows={len(rows)} envelope: log|D2u(0)| <= "
               f"{fmt(a)} + {fmt(b)} * (|Du|/R)^{2 * n + 3} consistent={consistent}"]
    return ExperimentReport("hessian-scaling", {"hessian_scaling": table, "envelope": fit}, summary)


def _run_gradient_scaling(cfg):
    grid = _grid(cfg, n_default=2, points_default=33)
    base = _potential(cfg, default_type="quartic")
    scales = cfg.floats("scaling", "scales", [0.25, 0.5, 1.0, 2.0, 4.0])
    wrap = _wrap(cfg, "scaling", "z-coupled")
    tilt = cfg.float("scaling", "tilt", 0.3)
    sc = _solver_config(cfg)
    centre = grid.nearest_node(grid.center)
    measured = []
    for s in scales:
        b = np.zeros(grid.n)
        b[0] = tilt * s
        pot = Affine(Scaled(base, s), tuple(b))
        try:
            u, rep = newton_solve(manufactured_problem(pot, grid, wrap), sc)
        except LagmcError as exc:
            measured.append((s, None, None, str(exc)))
            continue
        v = u.values
        g = np.array([(v[tuple(c + (k == i) for k, c in enumerate(centre))]
                       - v[tuple(c - (k == i) for k, c in enumerate(centre))]) / (2 * grid.h)
                      for i in range(grid.n)])
        measured.append((s, rep, float(np.linalg.norm(g)), None if rep.converged else rep.message))
    ok_rows = [(rep.osc, du) for _, rep, du, err in measured if rep is not None and err is None]
    x = np.array([1 + o * o for o, _ in ok_rows])
    y = np.array([d for _, d in ok_rows])
    C_fit = float((x * y).sum() / (x * x).sum()) if x.size else 0.0
    C_min = float((y / x).max()) if x.size else 0.0
    good_fit = x.size > 0 and np.isfinite(C_fit) and C_fit > 0
    table = Table(["scale", "osc", "du0", "ratio", "fitted_C", "status"])
    for s, rep, du, err in measured:
        if rep is None:
            table.add(scale=s, osc=0.0, du0=0.0, ratio=0.0, fitted_C=C_fit, status=_status(False, err))
            continue
        table.add(scale=s, osc=rep.osc, du0=du, ratio=du / (1 + rep.osc ** 2), fitted_C=C_fit,
                  status=_status(err is None and good_fit, err or "fit failed"))
    fit = Table(["fitted_C", "min_C", "status"])
    fit.add(fitted_C=C_fit, min_C=C_min, status=_status(good_fit, "no positive finite fit"))
    summary = [f"gradient-scaling n={grid.n} wrap={wrap} fitted C={fmt(C_fit)} "
               f"(smallest C bounding every row: {fmt(C_min)})"]
    return ExperimentReport("gradient-scaling", {"gradient_scaling": table, "fit": fit}, summary)


def _run_jacobi(cfg):
    if not cfg.has("grid"):
        grid = Grid([1.0, -0.5, -0.5], [2.0, 0.5, 0.5], [33, 33, 33])
    else:
        grid = _grid(cfg, n_default=3, points_default=33)
    pot = _potential(cfg, default_type="ma_lift")
    try:
        u = ScalarField(grid, pot.value(grid.coords))
    except LagmcError as exc:
        raise ConfigError("potential", str(exc)) from None
    if cfg.has("phase"):
        params = cfg.section("phase")
        params.setdefault("dim", str(grid.n))
        model = phase_from_config(params)
    elif isinstance(pot, MongeAmpereLift):
        model = Constant(pot.phase(grid.n), grid.n)
    else:
        model = None
    rep = jacobi_diagnostic(u, model, gap_tol=cfg.float("jacobi", "gap_tol", 1e-6))
    counts = {k: int((rep.status == v).sum()) for k, v in (("evaluated", 0), ("skipped", 1), ("not_applicable", 2))}
    summary_t = Table(["c_emp", "C_emp", "C_ref", "evaluated", "skipped", "not_applicable", "status"])
    finite = np.isfinite(rep.c_emp) and np.isfinite(rep.C_emp)
    summary_t.add(c_emp=rep.c_emp if finite else 0.0, C_emp=rep.C_emp if finite else 0.0, C_ref=rep.C_ref,
                  status=_status(finite and counts["evaluated"] > 0, "no evaluated nodes"), **counts)
    tables = {"jacobi": summary_t}
    if cfg.bool("jacobi", "dump_nodes", True):
        cols = ["index"] + [f"x{i + 1}" for i in range(grid.n)] + ["lap_b", "grad_b_sq", "rhs_scale", "status"]
        nodes = _NodeTable(cols)
        flat = np.flatnonzero(rep.status.ravel() >= 0)
        coords = grid.coords.reshape(-1, grid.n)
        lap, g2, rhs, st = (a.ravel() for a in (rep.lap_b, rep.grad_b_sq, rep.rhs_scale, rep.status))
        names = {0: "ok", 1: "skipped", 2: "not_applicable"}
        for i in flat:
            row = {"index": int(i), "lap_b": lap[i], "grad_b_sq": g2[i], "rhs_scale": rhs[i],
                   "status": names[int(st[i])]}
            row.update({f"x{k + 1}": coords[i, k] for k in range(grid.n)})
            nodes.add(**row)
        tables["jacobi_nodes"] = nodes
    summary = [f"jacobi n={grid.n} c_emp={fmt(rep.c_emp)} C_emp={fmt(rep.C_emp)} C_ref={fmt(rep.C_ref)} "
               f"evaluated={counts['evaluated']} skipped={counts['skipped']} "
               f"not_applicable={counts['not_applicable']}"]
    return ExperimentReport("jacobi-report", tables, summary)


class _NodeTable(Table):
    """Per-node dump; skipped and not-applicable nodes are expected outcomes, not failures."""

    @property
    def failed(self):
        return 0


_FAMILY_PARSERS = {
    "odd_power": lambda a: OddPower(int(a[0]), int(a[1]) if len(a) > 1 else 0),
    "x_power": lambda a: XPower(int(a[0]), int(a[1]) if len(a) > 1 else 0),
    "log_type": lambda a: LogType(),
}


def _families(cfg):
    text = cfg.str("gallery", "families", "odd_power:4:0, odd_power:4:1, x_power:5:0, log_type")
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        name, *args = item.split(":")
        if name not in _FAMILY_PARSERS:
            raise ConfigError("gallery.families", f"unknown family {name!r}")
        try:
            out.append((item.replace(":", "_"), _FAMILY_PARSERS[name](args)))
        except (LagmcError, ValueError) as exc:
            raise ConfigError("gallery.families", f"{item}: {exc}") from None
    return out


def _run_gallery(cfg):
    samples = cfg.int("gallery", "samples", 1000)
    touch = cfg.bool("gallery", "touch", True)
    spec = TouchSpec(p_steps=cfg.int("gallery", "p_steps", 101), M_steps=cfg.int("gallery", "M_steps", 101))
    r = np.geomspace(1e-6, 0.9, samples + 2)[1:-1]
    xs = np.concatenate([-r[::-1], r])
    tables = {}
    summary_t = Table(["family", "alpha", "coefficient", "max_residual", "lipschitz_ratio_min",
                       "lipschitz_ratio_max", "touch_tested", "touch_above", "touch_below",
                       "touch_violations", "status"])
    lines = []
    for name, fam in _families(cfg):
        sol = build(fam)
        res = ode_residual(sol, xs, return_all=True)
        t = Table(["x", "u", "du", "d2u", "theta", "residual", "mean_curvature", "status"])
        theta = sol.phase.evaluate(xs[:, None], sol.u(xs), sol.du(xs)[:, None]).value
        H = mean_curvature_profile(sol, xs)
        for i, x in enumerate(xs):
            t.add(x=x, u=sol.u(x), du=sol.du(x), d2u=sol.d2u(x), theta=theta[i], residual=res[i],
                  mean_curvature=H[i], status=_status(res[i] <= 1e-10, "residual above 1e-10"))
        tables[f"gallery_{name}"] = t
        alpha = getattr(fam, "alpha", None)
        quots = [lipschitz_quotient(sol, 10.0 ** -k) for k in range(2, 7)]
        if alpha is not None:
            ratios = [q / 10.0 ** (k * (1 - alpha)) for q, k in zip(quots, range(2, 7))]
            lip_ok = all(0.5 <= v <= 2.0 for v in ratios)
        else:
            ratios = [q / np.sqrt(np.log(10.0 ** k)) for q, k in zip(quots, range(2, 7))]
            lip_ok = all(np.diff(quots) > 0)
        if touch:
            tr = viscosity_touch_test(sol, 0.0, spec)
            touch_vals = (tr.tested, tr.above, tr.below, tr.violations)
            touch_ok = tr.above + tr.below == 0
        else:
            touch_vals, touch_ok = (0, 0, 0, 0), True
        ok = bool(res.max() <= 1e-10 and lip_ok and touch_ok)
        summary_t.add(family=name, alpha=alpha if alpha is not None else 0.0, coefficient=fam.coefficient,
                      max_residual=float(res.max()), lipschitz_ratio_min=min(ratios),
                      lipschitz_ratio_max=max(ratios), touch_tested=touch_vals[0], touch_above=touch_vals[1],
                      touch_below=touch_vals[2], touch_violations=touch_vals[3],
                      status=_status(ok, "certificate failed"))
        lines.append(f"{name}: max_residual={fmt(res.max())} touching={touch_vals[1] + touch_vals[2]} "
                     f"lipschitz_ratios=[{fmt(min(ratios))}, {fmt(max(ratios))}]")
    tables["gallery"] = summary_t
    return ExperimentReport("counterexample-gallery", tables, lines)


def _run_concavity(cfg):
    n = cfg.int("concavity", "n", 3)
    K = cfg.float("concavity", "K", 1.0)
    samples = cfg.int("concavity", "samples", 10000)
    try:
        params = concavify_constant(n, K)
    except LagmcError as exc:
        raise ConfigError("concavity.n", str(exc)) from None
    As = cfg.floats("concavity", "A", [1.0, 2.0, 4.0, 8.0])
    rng = np.random.default_rng(cfg.seed)
    try:
        lam = sample_constrained(rng, samples, n, K)
    except LagmcError as exc:
        raise ConfigError("concavity.K", str(exc)) from None
    table = Table(["A", "min_det", "pd_fraction", "above_threshold", "status"])
    for A in As:
        M = A * np.ones((n, n)) + 2.0 * lam[:, :, None] * np.eye(n)
        dets = np.linalg.det(M)
        frac = float(concavified_pd_batch(lam, A).mean())
        above = A >= params.A
        table.add(A=A, min_det=float(dets.min()), pd_fraction=frac, above_threshold=above,
                  status=_status(frac == 1.0 or not above, "not positive definite above the threshold"))
    summary = [f"concavity n={n} K={fmt(K)} T={fmt(params.T)} C={fmt(params.C)} A={fmt(params.A)} "
               f"raw_threshold={fmt(params.raw_threshold)} printed_threshold={fmt(params.printed_threshold)}"]
    return ExperimentReport("concavity-sweep", {"concavity": table}, summary)


def _run_rotation(cfg):
    grid = _grid(cfg, n_default=2, points_default=65)
    pot = _potential(cfg, default_type="quartic")
    u = ScalarField(grid, pot.value(grid.coords))
    K = cfg.float("rotation", "K", None)
    if K is None:
        K = float(np.linalg.norm(pot.hess(grid.coords), ord=2, axis=(-2, -1)).max())
    gamma = cfg.float("rotation", "gamma", default_rotation_angle(K))
    table = Table(["gamma", "K", "contraction", "lipschitz_ratio", "injective", "phase_shift_residual",
                   "shift_bound", "round_trip_error", "round_trip_bound", "status"])
    try:
        shift = rotation_phase_shift_check(u, None, gamma, K)
        rt = rotation_round_trip(u, gamma, K)
    except LagmcError as exc:
        raise ConfigError("rotation.gamma", str(exc)) from None
    rot = shift.rotated
    ok = (rot.injective and rot.lipschitz_ok and shift.residual <= 5 * grid.h
          and rt.error <= 10 * grid.h)
    table.add(gamma=gamma, K=K, contraction=rot.params.contraction, lipschitz_ratio=rot.lipschitz_ratio,
              injective=rot.injective, phase_shift_residual=shift.residual, shift_bound=5 * grid.h,
              round_trip_error=rt.error, round_trip_bound=10 * grid.h,
              status=_status(ok, "rotation check out of tolerance"))
    summary = [f"rotation n={grid.n} gamma={fmt(gamma)} K={fmt(K)} phase_shift_residual={fmt(shift.residual)} "
               f"round_trip_error={fmt(rt.error)} h={fmt(grid.h)}"]
    return ExperimentReport("rotation-check", {"rotation": table}, summary)


_RUNNERS = {
    "solve": _run_solve,
    "flow": _run_flow,
    "hessian-scaling": _run_hessian_scaling,
    "gradient-scaling": _run_gradient_scaling,
    "jacobi-report": _run_jacobi,
    "counterexample-gallery": _run_gallery,
    "concavity-sweep": _run_concavity,
    "rotation-check": _run_rotation,
}


def run(cfg):
    """Run the experiment described by ``cfg`` and return its report."""
    return _RUNNERS[cfg.kind](cfg)


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def emit_csv(report, outdir):
    """Write each table as ``<name>.csv`` and the summary as ``summary.txt``.

    Returns the list of written paths.

    Raises
    ------
    OSError
        With the offending path in the message when a file cannot be written.
    """
    paths = []
    try:
        os.makedirs(outdir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{outdir}: {exc.strerror}") from None
    for name in sorted(report.tables):
        table = report.tables[name]
        path = os.path.join(outdir, f"{name}.csv")
        try:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(table.columns)
                for row in table.rows:
                    w.writerow([_cell(v) for v in row])
        except OSError as exc:
            raise OSError(f"{path}: {exc.strerror}") from None
        paths.append(path)
    path = os.path.join(outdir, "summary.txt")
    with open(path, "w") as fh:
        status = "ok" if report.ok else f"failed rows: {report.failed_rows}"
        fh.write(f"kind: {report.kind}\nstatus: {status}\n")
        for line in report.summary:
            fh.write(line + "\n")
    paths.append(path)
    return paths
