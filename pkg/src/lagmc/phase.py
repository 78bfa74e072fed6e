"""Phase functions ``theta(x, z, p)`` with analytic partial derivatives, the
soliton families, and sampled checks of the structure conditions."""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidFamilyError, InvalidInputError
from .spectral import critical_phase

__all__ = [
    "PhaseDerivs", "PhaseModel", "Constant", "ShrinkerExpander", "Translator",
    "Rotator", "Custom", "SampleRegion", "StructureBounds",
    "ConditionResult", "GradientConditionReport", "ConvexityReport",
    "eval_phase", "structure_bounds", "gradient_conditions_check",
    "partial_convexity_check", "fd_consistency", "phase_from_config",
    "register_custom_phase",
]


@dataclass
class PhaseDerivs:
    """Value and partials of a phase at a batch of ``N`` points in dimension ``n``.

    Shapes: ``value, z, zz`` -> ``(N,)``; ``x, p, xz, zp`` -> ``(N, n)``;
    ``xx, xp, pp`` -> ``(N, n, n)`` with ``xp[:, i, j] = d2 theta / dx_i dp_j``.
    """

    value: np.ndarray
    x: np.ndarray
    z: np.ndarray
    p: np.ndarray
    xx: np.ndarray
    xz: np.ndarray
    xp: np.ndarray
    zz: np.ndarray
    zp: np.ndarray
    pp: np.ndarray

    @classmethod
    def zeros(cls, N, n):
        return cls(
            value=np.zeros(N), x=np.zeros((N, n)), z=np.zeros(N), p=np.zeros((N, n)),
            xx=np.zeros((N, n, n)), xz=np.zeros((N, n)), xp=np.zeros((N, n, n)),
            zz=np.zeros(N), zp=np.zeros((N, n)), pp=np.zeros((N, n, n)),
        )

    def squeeze(self):
        return PhaseDerivs(**{k: v[0] for k, v in self.__dict__.items()})


def _as_batch(x, z, p, dim):
    x = np.asarray(x, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    single = x.ndim <= 1
    x = np.atleast_2d(x) if x.ndim else x.reshape(1, 1)
    p = np.atleast_2d(p) if p.ndim else p.reshape(1, 1)
    z = np.atleast_1d(z).reshape(-1)
    if x.shape != p.shape:
        raise InvalidInputError(f"x has shape {x.shape} but p has shape {p.shape}")
    if z.shape[0] != x.shape[0]:
        raise InvalidInputError(f"z has {z.shape[0]} entries for {x.shape[0]} points")
    if dim is not None and x.shape[1] != dim:
        raise InvalidInputError(f"model dimension {dim} but points have dimension {x.shape[1]}")
    return x, z, p, single


class PhaseModel:
    """Base class. Subclasses implement ``_evaluate`` on batched inputs."""

    dim = None
    family = "custom"

    def evaluate(self, x, z, p):
        """Value and all partials at one point (``x`` of shape ``(n,)``) or a batch."""
        xb, zb, pb, single = _as_batch(x, z, p, self.dim)
        out = self._evaluate(xb, zb, pb)
        return out.squeeze() if single else out

    def value(self, x, z, p):
        return self.evaluate(x, z, p).value

    def _evaluate(self, x, z, p):
        raise NotImplementedError


def eval_phase(model, x, z, p):
    """Evaluate ``model`` and its partials; see :meth:`PhaseModel.evaluate`."""
    return model.evaluate(x, z, p)


@dataclass(frozen=True, eq=False)
class Constant(PhaseModel):
    c: float
    dim: int = None
    family = "constant"

    def _evaluate(self, x, z, p):
        out = PhaseDerivs.zeros(*x.shape)
        out.value[:] = self.c
        return out


@dataclass(frozen=True, eq=False)
class ShrinkerExpander(PhaseModel):
    """``theta = s1 + s2 (x . p - 2 z)``; shrinker for ``s2 > 0``, expander for ``s2 < 0``."""

    s1: float
    s2: float
    dim: int = None
    family = "shrinker_expander"

    def _evaluate(self, x, z, p):
        N, n = x.shape
        out = PhaseDerivs.zeros(N, n)
        out.value[:] = self.s1 + self.s2 * (np.einsum("bi,bi->b", x, p) - 2.0 * z)
        out.x[:] = self.s2 * p
        out.z[:] = -2.0 * self.s2
        out.p[:] = self.s2 * x
        out.xp[:] = self.s2 * np.eye(n)
        return out


@dataclass(frozen=True, eq=False)
class Translator(PhaseModel):
    """``theta = g1 + g2 . x + g3 . p``."""

    gamma1: float
    gamma2: tuple
    gamma3: tuple
    family = "translator"

    def __post_init__(self):
        g2 = np.asarray(self.gamma2, dtype=np.float64).reshape(-1)
        g3 = np.asarray(self.gamma3, dtype=np.float64).reshape(-1)
        if g2.shape != g3.shape:
            raise InvalidFamilyError("gamma2 and gamma3 must have the same length")
        object.__setattr__(self, "gamma2", g2)
        object.__setattr__(self, "gamma3", g3)

    @property
    def dim(self):
        return self.gamma2.shape[0]

    def _evaluate(self, x, z, p):
        N, n = x.shape
        out = PhaseDerivs.zeros(N, n)
        out.value[:] = self.gamma1 + x @ self.gamma2 + p @ self.gamma3
        out.x[:] = self.gamma2
        out.p[:] = self.gamma3
        return out


@dataclass(frozen=True, eq=False)
class Rotator(PhaseModel):
    """``theta = r1 + (r2 / 2)(|x|^2 + |p|^2)``."""

    r1: float
    r2: float
    dim: int = None
    family = "rotator"

    def _evaluate(self, x, z, p):
        N, n = x.shape
        out = PhaseDerivs.zeros(N, n)
        out.value[:] = self.r1 + 0.5 * self.r2 * ((x * x).sum(axis=1) + (p * p).sum(axis=1))
        out.x[:] = self.r2 * x
        out.p[:] = self.r2 * p
        out.xx[:] = self.r2 * np.eye(n)
        out.pp[:] = self.r2 * np.eye(n)
        return out


_FIRST = ("x", "z", "p")
_SECOND = ("xx", "xz", "xp", "zz", "zp", "pp")


class Custom(PhaseModel):
    """A phase given by a user function.

    ``func(x, z, p)`` receives batched arrays ``(N, n), (N,), (N, n)`` and returns
    a mapping with ``"value"``, the first partials ``"x", "z", "p"`` and
    optionally any of the second partials (missing ones are taken as zero).
    Evaluators must be stateless. Pass ``probe`` (a :class:`SampleRegion`) to
    validate the supplied derivatives against finite differences at
    construction.
    """

    family = "custom"

    def __init__(self, dim, func, name="custom", probe=None, rtol=1e-6):
        self.dim = dim
        self.func = func
        self.name = name
        if probe is not None:
            err = fd_consistency(self, probe)
            if err > rtol:
                raise InvalidFamilyError(
                    f"custom phase {name!r}: supplied derivatives disagree with "
                    f"finite differences (relative error {err:.3e} > {rtol:.1e})")

    def _evaluate(self, x, z, p):
        N, n = x.shape
        res = self.func(x, z, p)
        out = PhaseDerivs.zeros(N, n)
        for key in ("value",) + _FIRST + _SECOND:
            if key in res:
                arr = getattr(out, key)
                arr[...] = np.broadcast_to(np.asarray(res[key], dtype=np.float64), arr.shape)
        return out


@dataclass(frozen=True)
class SampleRegion:
    """Sampled stand-in for ``Gamma_R = B_R x u(B_R) x Du(B_R)``.

    Points are drawn once in reference coordinates (unit balls and the unit
    interval) from ``seed`` and then scaled, so regions that differ only in
    their extents share the same reference sample. A third of the ``x`` and
    ``p`` samples sit on the bounding spheres.
    """

    dim: int
    x_radius: float = 1.0
    z_range: tuple = (-1.0, 1.0)
    p_radius: float = 1.0
    count: int = 2000
    seed: int = 0
    x_center: tuple = None
    p_center: tuple = None

    def __post_init__(self):
        if self.count < 1 or self.dim < 1:
            raise InvalidInputError("sample region must be non-empty")
        if self.x_radius < 0 or self.p_radius < 0 or self.z_range[1] < self.z_range[0]:
            raise InvalidInputError("sample region extents must be non-negative")

    def points(self):
        rng = np.random.default_rng(self.seed)
        n, N = self.dim, self.count

        def ball():
            d = rng.normal(size=(N, n))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            r = rng.uniform(size=N) ** (1.0 / n)
            r[: N // 3] = 1.0
            return d * r[:, None]

        x = self.x_radius * ball()
        p = self.p_radius * ball()
        t = rng.uniform(size=N)
        t[: N // 6] = 0.0
        t[N // 6: N // 3] = 1.0
        z = self.z_range[0] + (self.z_range[1] - self.z_range[0]) * t
        if self.x_center is not None:
            x = x + np.asarray(self.x_center, dtype=np.float64)
        if self.p_center is not None:
            p = p + np.asarray(self.p_center, dtype=np.float64)
        return x, z, p

    def scaled(self, x=1.0, z=1.0, p=1.0):
        lo, hi = self.z_range
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo) * z
        return replace(self, x_radius=self.x_radius * x, p_radius=self.p_radius * p,
                       z_range=(mid - half, mid + half))


@dataclass(frozen=True)
class StructureBounds:
    """Sampled first- and second-order structure constants."""

    nu1: float
    nu2: float
    region: SampleRegion


def _vnorm(a):
    return np.abs(a) if a.ndim == 1 else np.linalg.norm(a, axis=-1)


def _mnorm(a):
    # non-finite entries (overflowing phases) count as unbounded
    ok = np.all(np.isfinite(a), axis=(-2, -1))
    out = np.full(a.shape[:-2], np.inf)
    if ok.any():
        out[ok] = np.linalg.norm(a[ok], ord=2, axis=(-2, -1))
    return out


def structure_bounds(model, region):
    """Suprema of ``|theta_x|, |theta_z|, |theta_p|`` (``nu1``) and of
    ``|theta_xx|, |theta_xz|, |theta_xp|, |theta_zz|, |theta_zp|`` (``nu2``).

    Vectors use the Euclidean norm and matrices the spectral norm.
    """
    x, z, p = region.points()
    d = model.evaluate(x, z, p)
    nu1 = max(_vnorm(d.x).max(), np.abs(d.z).max(), _vnorm(d.p).max())
    nu2 = max(_mnorm(d.xx).max(), _vnorm(d.xz).max(), _mnorm(d.xp).max(),
              np.abs(d.zz).max(), _vnorm(d.zp).max())
    return StructureBounds(float(nu1), float(nu2), region)


@dataclass(frozen=True)
class ConditionResult:
    """One structure condition over a sample.

    ``worst_ratio`` is the largest left/right ratio seen (``inf`` when the right
    side vanishes but the left does not); it is also the smallest constant
    that would make the inequality hold on the sample. ``witness`` is the
    ``(x, z, p)`` attaining it when the condition fails.
    """

    passed: bool
    worst_ratio: float
    witness: tuple = None
    detail: dict = field(default_factory=dict)

    @property
    def min_constant(self):
        return self.worst_ratio


@dataclass(frozen=True)
class GradientConditionReport:
    cond_a: ConditionResult
    cond_b: ConditionResult
    cond_c: ConditionResult
    C: float
    theta_xx_sup: float
    evaluated: int
    skipped: int

    @property
    def all_pass(self):
        return self.cond_a.passed and self.cond_b.passed and self.cond_c.passed


def _worst(ratio, viol, x, z, p):
    if ratio.size == 0:
        return 0.0, None
    i = int(np.argmax(ratio))
    wit = (x[i].copy(), float(z[i]), p[i].copy()) if viol.any() else None
    if viol.any():
        j = int(np.argmax(np.where(viol, ratio, -np.inf)))
        wit = (x[j].copy(), float(z[j]), p[j].copy())
    return float(ratio[i]), wit


def _ratio(lhs, rhs):
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0),
                     np.where(lhs > 0, np.inf, 0.0))
    return r


def gradient_conditions_check(model, region, n=None, C=1.0, growth=(10.0, 100.0),
                              growth_factor=2.0):
    """Sampled check of the three gradient-estimate conditions.

    (a) ``|theta_x| <= C (theta - (n-2) pi/2)^{1/2}`` together with a uniform
        bound on ``theta_xx``: the supremum of ``|theta_xx|`` is recomputed on
        copies of the region whose ``z`` and ``p`` extents are multiplied by
        ``growth``; growth of the supremum by more than ``growth_factor``
        marks ``theta_xx`` as not uniformly bounded in ``(z, p)``.
    (b) ``theta_z >= 0``.
    (c) ``|p| |theta_p| <= C (theta - (n-2) pi/2)``.

    Sample points with phase below the critical value are skipped for all
    three conditions and counted in ``skipped``.
    """
    n = region.dim if n is None else n
    x, z, p = region.points()
    d = model.evaluate(x, z, p)
    margin = d.value - critical_phase(n)
    keep = margin >= 0.0
    skipped = int((~keep).sum())
    x, z, p, margin = x[keep], z[keep], p[keep], margin[keep]
    dx = _vnorm(d.x[keep])
    dz = d.z[keep]
    dp = _vnorm(d.p[keep])

    ratio_a = _ratio(dx, np.sqrt(margin))
    viol_a = dx > C * np.sqrt(margin)
    xx_sup = float(_mnorm(d.xx).max()) if d.xx.size else 0.0
    sups = [xx_sup]
    for g in growth:
        reg = region.scaled(z=g, p=g)
        sups.append(float(_mnorm(model.evaluate(*reg.points()).xx).max()))
    base = max(sups[0], 1e-12)
    uniform = all(s <= growth_factor * base for s in sups[1:]) or max(sups) <= 1e-12
    worst_a, wit_a = _worst(ratio_a, viol_a, x, z, p)
    cond_a = ConditionResult(
        passed=bool(not viol_a.any() and uniform), worst_ratio=worst_a, witness=wit_a,
        detail={"interp_passed": bool(not viol_a.any()), "theta_xx_uniform": bool(uniform),
                "theta_xx_sups": tuple(sups), "growth": tuple(growth)},
    )

    viol_b = dz < 0.0
    worst_neg = float(-dz.min()) if dz.size else 0.0
    wit_b = None
    if viol_b.any():
        j = int(np.argmin(dz))
        wit_b = (x[j].copy(), float(z[j]), p[j].copy())
    cond_b = ConditionResult(passed=bool(not viol_b.any()), worst_ratio=max(worst_neg, 0.0),
                             witness=wit_b, detail={"min_theta_z": float(dz.min()) if dz.size else 0.0})

    lhs_c = _vnorm(p) * dp
    ratio_c = _ratio(lhs_c, margin)
    viol_c = lhs_c > C * margin
    worst_c, wit_c = _worst(ratio_c, viol_c, x, z, p)
    cond_c = ConditionResult(passed=bool(not viol_c.any()), worst_ratio=worst_c, witness=wit_c)

    return GradientConditionReport(cond_a, cond_b, cond_c, C, xx_sup, int(keep.sum()), skipped)


@dataclass(frozen=True)
class ConvexityReport:
    passed: bool
    min_eigenvalue: float
    witness: tuple = None


def partial_convexity_check(model, region, tol=1e-10):
    """Is ``theta_pp`` positive semidefinite (down to ``-tol``) at every sample point?"""
    x, z, p = region.points()
    pp = model.evaluate(x, z, p).pp
    mins = np.linalg.eigvalsh(0.5 * (pp + np.swapaxes(pp, -1, -2)))[:, 0]
    i = int(np.argmin(mins))
    ok = bool(mins[i] >= -tol)
    return ConvexityReport(ok, float(mins[i]), None if ok else (x[i], float(z[i]), p[i]))


def fd_consistency(model, region, step=1e-5):
    """Largest relative mismatch between analytic partials and central differences.

    First partials are compared with differences of the value, second
    partials with differences of the analytic first partials.
    """
    x, z, p = region.points()
    N, n = x.shape
    d = model.evaluate(x, z, p)
    h = step * (1.0 + np.maximum(np.abs(x).max(axis=1), np.abs(p).max(axis=1)))
    hz = step * (1.0 + np.abs(z))
    errs = []

    def rel(a, b):
        a = np.asarray(a)
        b = np.asarray(b)
        scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        return float(np.max(np.abs(a - b) / scale)) if a.size else 0.0

    for i in range(n):
        e = np.zeros((N, n))
        e[:, i] = h
        fx = (model.evaluate(x + e, z, p), model.evaluate(x - e, z, p))
        fp = (model.evaluate(x, z, p + e), model.evaluate(x, z, p - e))
        hh = 2 * h
        errs.append(rel(d.x[:, i], (fx[0].value - fx[1].value) / hh))
        errs.append(rel(d.p[:, i], (fp[0].value - fp[1].value) / hh))
        errs.append(rel(d.xx[:, :, i], (fx[0].x - fx[1].x) / hh[:, None]))
        errs.append(rel(d.xz[:, i], (fx[0].z - fx[1].z) / hh))
        errs.append(rel(d.xp[:, i, :], (fx[0].p - fx[1].p) / hh[:, None]))
        errs.append(rel(d.zp[:, i], (fp[0].z - fp[1].z) / hh))
        errs.append(rel(d.pp[:, :, i], (fp[0].p - fp[1].p) / hh[:, None]))
    fz = (model.evaluate(x, z + hz, p), model.evaluate(x, z - hz, p))
    errs.append(rel(d.z, (fz[0].value - fz[1].value) / (2 * hz)))
    errs.append(rel(d.zz, (fz[0].z - fz[1].z) / (2 * hz)))
    return max(errs)


_CUSTOM_REGISTRY = {}


def register_custom_phase(name, factory):
    """Make ``factory(params: dict) -> PhaseModel`` loadable as ``variant = name``."""
    _CUSTOM_REGISTRY[name] = factory


def _floats(text):
    if isinstance(text, (list, tuple, np.ndarray)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(",", " ").split()]


def phase_from_config(params):
    """Build a phase from a flat parameter mapping.

    ``params["variant"]`` selects ``constant`` (``c``), ``shrinker`` /
    ``expander`` (``s1``, ``s2``), ``translator`` (``gamma1``, ``gamma2``,
    ``gamma3`` as comma separated vectors), ``rotator`` (``r1``, ``r2``) or a
    name registered through :func:`register_custom_phase`. ``dim`` is optional.
    """
    params = dict(params)
    variant = str(params.get("variant", "")).strip().lower()
    dim = int(params["dim"]) if "dim" in params else None
    try:
        if variant == "constant":
            return Constant(float(params["c"]), dim)
        if variant in ("shrinker", "expander", "shrinker_expander"):
            return ShrinkerExpander(float(params["s1"]), float(params["s2"]), dim)
        if variant == "translator":
            return Translator(float(params["gamma1"]), _floats(params["gamma2"]),
                              _floats(params["gamma3"]))
        if variant == "rotator":
            return Rotator(float(params["r1"]), float(params["r2"]), dim)
    except KeyError as exc:
        raise InvalidFamilyError(f"phase variant {variant!r} is missing parameter {exc.args[0]!r}")
    if variant in _CUSTOM_REGISTRY:
        return _CUSTOM_REGISTRY[variant](params)
    raise InvalidFamilyError(f"unknown phase variant {variant!r}")
