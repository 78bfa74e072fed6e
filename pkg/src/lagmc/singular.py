"""Closed-form singular (Hölder but not Lipschitz) one-dimensional solutions.

Each family pairs a potential ``u`` with a phase ``theta`` such that
``arctan u'' = theta(x, u, u')`` holds away from the origin, while ``u`` fails
to be Lipschitz at 0. Lifts to higher dimension add a separable quadratic.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import InvalidFamilyError, InvalidInputError
from .phase import PhaseDerivs, PhaseModel
from .spectral import critical_phase

__all__ = ["OddPower", "XPower", "LogType", "Lift", "ClosedFormSolution", "ArctanPhase",
           "QuadraticControl", "build", "ode_residual", "TouchSpec", "TouchReport",
           "viscosity_touch_test", "LiftRange", "lift_phase_range", "lipschitz_quotient",
           "holder_quotient", "mean_curvature_profile", "LOG_DOMAIN", "SAMPLE_MIN_DISTANCE"]

LOG_DOMAIN = (1e-12, 0.9)
SAMPLE_MIN_DISTANCE = 1e-6


@dataclass(frozen=True)
class OddPower:
    """``u = sign(x)|x|^alpha`` with ``alpha = (q-2)/(2m+q)`` and ``u^{2m+1}(u')^q = -C1 u''``."""

    q: int
    m: int = 0

    def __post_init__(self):
        if int(self.q) != self.q or int(self.m) != self.m or self.q < 3 or self.m < 0:
            raise InvalidFamilyError("OddPower needs integers q >= 3 and m >= 0")

    @property
    def alpha(self):
        return (self.q - 2) / (2 * self.m + self.q)

    @property
    def coefficient(self):
        a = self.alpha
        return a ** (self.q - 1) / (1 - a)


@dataclass(frozen=True)
class XPower:
    """``u = sign(x)|x|^alpha`` with ``alpha = (q-3-2m)/(q-1)`` and ``x^{2m+1}(u')^q = C u''``."""

    q: int
    m: int = 0

    def __post_init__(self):
        if int(self.q) != self.q or int(self.m) != self.m or self.m < 0:
            raise InvalidFamilyError("XPower needs integers q and m >= 0")
        if not 0 < self.alpha < 1:
            raise InvalidFamilyError(f"XPower({self.q}, {self.m}) gives alpha={self.alpha!r} outside (0, 1)")

    @property
    def alpha(self):
        return (self.q - 3 - 2 * self.m) / (self.q - 1)

    @property
    def coefficient(self):
        a = self.alpha
        return a ** (self.q - 1) / (a - 1)


@dataclass(frozen=True)
class LogType:
    """``u' = (-ln|x|)^{1/2}``; ``u`` is odd and ``2 u'' = -x e^{2(u')^2} / u'``."""

    alpha = None
    coefficient = 0.5


@dataclass(frozen=True)
class Lift:
    """``u(x) = v(x1) + sum_i a_i x_{i+1}^2 / 2`` for a one-dimensional family ``v``."""

    base: object
    a: tuple = ()

    def __post_init__(self):
        if isinstance(self.base, Lift):
            raise InvalidFamilyError("the base of a lift must be one-dimensional")
        if not isinstance(self.base, (OddPower, XPower, LogType)):
            raise InvalidFamilyError(f"unknown base family {self.base!r}")
        a = tuple(float(v) for v in np.atleast_1d(self.a))
        if not all(np.isfinite(a)):
            raise InvalidFamilyError("lift coefficients must be finite")
        object.__setattr__(self, "a", a)

    @property
    def n(self):
        return 1 + len(self.a)

    @property
    def shift(self):
        return float(np.arctan(np.asarray(self.a)).sum()) if self.a else 0.0


def _mono(c, exps, orders, x, z, p):
    """Partial derivative of ``c x^a z^b p^q`` in the listed variables (0=x, 1=z, 2=p)."""
    e = list(exps)
    coef = c
    for o in orders:
        coef *= e[o]
        e[o] -= 1
    if coef == 0:
        return np.zeros_like(x)
    return coef * x ** e[0] * z ** e[1] * p ** e[2]


class ArctanPhase(PhaseModel):
    """One-dimensional phase ``theta = sign * arctan f(x, z, p)``.

    ``fn(x, z, p)`` returns ``f`` and its partials as a dict with keys
    ``f, x, z, p, xx, xz, xp, zz, zp, pp`` (arrays of shape ``(N,)``).
    """

    dim = 1

    def __init__(self, fn, sign, family):
        self.fn = fn
        self.sign = sign
        self.family = family

    def _evaluate(self, x, z, p):
        N = x.shape[0]
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            d = self.fn(x[:, 0], z, p[:, 0])
            f = d["f"]
            w = 1.0 / (1.0 + f * f)
            out = PhaseDerivs.zeros(N, 1)
            s = self.sign
            out.value[:] = s * np.arctan(f)
            out.x[:, 0] = s * d["x"] * w
            out.z[:] = s * d["z"] * w
            out.p[:, 0] = s * d["p"] * w

            def second(a, b):
                return s * (d[a + b] * w - 2.0 * f * d[a] * d[b] * w * w)

            out.xx[:, 0, 0] = second("x", "x")
            out.xz[:, 0] = second("x", "z")
            out.xp[:, 0, 0] = second("x", "p")
            out.zz[:] = second("z", "z")
            out.zp[:, 0] = second("z", "p")
            out.pp[:, 0, 0] = second("p", "p")
        return out


def _monomial_fn(c, exps):
    def fn(x, z, p):
        out = {"f": _mono(c, exps, (), x, z, p)}
        for a, ia in (("x", 0), ("z", 1), ("p", 2)):
            out[a] = _mono(c, exps, (ia,), x, z, p)
        for a, ia in (("x", 0), ("z", 1), ("p", 2)):
            for b, ib in (("x", 0), ("z", 1), ("p", 2)):
                out[a + b] = _mono(c, exps, (ia, ib), x, z, p)
        return out
    return fn


def _log_fn(x, z, p):
    # f = x E(p), E = exp(2p^2)/(2p); derivatives through L1 = (ln E)', L2 = (ln E)''
    E = np.exp(2.0 * p * p) / (2.0 * p)
    L1 = 4.0 * p - 1.0 / p
    L2 = 4.0 + 1.0 / (p * p)
    zero = np.zeros_like(x)
    out = {"f": x * E, "x": E, "z": zero, "p": x * E * L1,
           "xx": zero, "xz": zero, "xp": E * L1, "zz": zero, "zp": zero,
           "pp": x * E * (L1 * L1 + L2)}
    for a, b in (("z", "x"), ("p", "x"), ("p", "z")):
        out[a + b] = out[b + a]
    return out


class ClosedFormSolution:
    """Evaluators for ``u, u', u'', u'''`` and the matched phase of a 1D family.

    ``u`` and its derivatives are vectorized over ``x``; ``phase`` is a
    :class:`~lagmc.phase.PhaseModel` in dimension 1.
    """

    singular_point = 0.0

    def __init__(self, family):
        self.family = family

    def u(self, x):
        raise NotImplementedError

    def du(self, x):
        raise NotImplementedError

    def d2u(self, x):
        raise NotImplementedError

    def d3u(self, x):
        raise NotImplementedError

    def domain_check(self, x):
        return np.asarray(x, dtype=np.float64)

    def chord_slope(self, x0, side, log_r):
        """``(u(x0 + side r) - u(x0)) / (side r)`` for ``r = exp(log_r)``.

        The default evaluates ``u`` directly; singular families override it
        at their singular point with an exact expression valid for radii
        far below floating-point range.
        """
        r = np.exp(log_r)
        return (self.u(x0 + side * r) - self.u(x0)) / (side * r)

    def chord_scale(self, x0, side, log_r):
        """Rounding scale of :meth:`chord_slope` (absolute)."""
        r = np.exp(log_r)
        eps = np.finfo(float).eps
        return 4 * eps * (np.abs(self.u(x0 + side * r)) + abs(float(self.u(np.array([x0]))[0]))) / r

    def exact_chords(self, x0):
        return False


class _PowerSolution(ClosedFormSolution):
    def __init__(self, family):
        super().__init__(family)
        self.alpha = family.alpha

    def u(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.sign(x) * np.abs(x) ** self.alpha

    def du(self, x):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore"):
            return self.alpha * np.abs(x) ** (self.alpha - 1)

    def d2u(self, x):
        x = np.asarray(x, dtype=np.float64)
        a = self.alpha
        with np.errstate(divide="ignore"):
            return a * (a - 1) * np.sign(x) * np.abs(x) ** (a - 2)

    def d3u(self, x):
        x = np.asarray(x, dtype=np.float64)
        a = self.alpha
        with np.errstate(divide="ignore"):
            return a * (a - 1) * (a - 2) * np.abs(x) ** (a - 3)

    def exact_chords(self, x0):
        return x0 == 0.0

    def chord_slope(self, x0, side, log_r):
        if x0 != 0.0:
            return super().chord_slope(x0, side, log_r)
        # sign(x)|x|^alpha is odd, so both one-sided chords are r^(alpha-1)
        with np.errstate(over="ignore"):
            return np.exp((self.alpha - 1.0) * np.asarray(log_r))

    def chord_scale(self, x0, side, log_r):
        if x0 != 0.0:
            return super().chord_scale(x0, side, log_r)
        return 4 * np.finfo(float).eps * self.chord_slope(x0, side, log_r)


class _OddPowerSolution(_PowerSolution):
    def __init__(self, family):
        super().__init__(family)
        C1 = family.coefficient
        self.phase = ArctanPhase(_monomial_fn(1.0 / C1, (0, 2 * family.m + 1, family.q)), -1.0,
                                 family="odd_power")


class _XPowerSolution(_PowerSolution):
    def __init__(self, family):
        super().__init__(family)
        C = family.coefficient
        self.phase = ArctanPhase(_monomial_fn(1.0 / C, (2 * family.m + 1, 0, family.q)), 1.0,
                                 family="x_power")


class _LogSolution(ClosedFormSolution):
    def __init__(self, family):
        super().__init__(family)
        self.phase = ArctanPhase(_log_fn, -1.0, family="log_type")

    def domain_check(self, x):
        x = np.asarray(x, dtype=np.float64)
        ax = np.abs(x)
        if np.any((ax <= LOG_DOMAIN[0]) | (ax >= LOG_DOMAIN[1])):
            raise InvalidInputError(f"LogType is evaluated only for |x| in {LOG_DOMAIN}")
        return x

    def u(self, x):
        x = np.asarray(x, dtype=np.float64)
        ax = np.abs(x)
        with np.errstate(divide="ignore"):
            L = -np.log(ax)
        # integral_0^|x| sqrt(-ln s) ds = Gamma(3/2, -ln|x|)
        return np.sign(x) * special.gamma(1.5) * special.gammaincc(1.5, L)

    def du(self, x):
        return np.sqrt(-np.log(np.abs(np.asarray(x, dtype=np.float64))))

    def d2u(self, x):
        x = np.asarray(x, dtype=np.float64)
        return -1.0 / (2.0 * x * np.sqrt(-np.log(np.abs(x))))

    def d3u(self, x):
        x = np.asarray(x, dtype=np.float64)
        L = -np.log(np.abs(x))
        return (0.5 / L ** 0.5 - 0.25 / L ** 1.5) / (x * x)

    def exact_chords(self, x0):
        return x0 == 0.0

    def chord_slope(self, x0, side, log_r):
        if x0 != 0.0:
            return super().chord_slope(x0, side, log_r)
        # Gamma(3/2, t) e^t = sqrt(t) + (sqrt(pi)/2) erfcx(sqrt(t)) with t = -ln r
        t = -np.asarray(log_r, dtype=np.float64)
        s = np.sqrt(t)
        return s + 0.5 * np.sqrt(np.pi) * special.erfcx(s)

    def chord_scale(self, x0, side, log_r):
        if x0 != 0.0:
            return super().chord_scale(x0, side, log_r)
        return 4 * np.finfo(float).eps * self.chord_slope(x0, side, log_r)


class QuadraticControl(ClosedFormSolution):
    """Smooth control case ``u = a x^2 / 2`` with constant phase ``arctan a``."""

    def __init__(self, a=1.0):
        from .phase import Constant
        super().__init__(("quadratic", a))
        self.a = float(a)
        self.phase = Constant(float(np.arctan(a)), dim=1)

    def u(self, x):
        return 0.5 * self.a * np.asarray(x, dtype=np.float64) ** 2

    def du(self, x):
        return self.a * np.asarray(x, dtype=np.float64)

    def d2u(self, x):
        return np.full(np.shape(x), self.a)

    def d3u(self, x):
        return np.zeros(np.shape(x))


class LiftPhase(PhaseModel):
    """``theta(x, z, p) = theta1(x1, z - sum a_i x_i^2/2, p1) + sum arctan a_i``."""

    family = "lift"

    def __init__(self, base_phase, a):
        self.base = base_phase
        self.a = np.asarray(a, dtype=np.float64)
        self.dim = 1 + self.a.size
        self.shift = float(np.arctan(self.a).sum())

    def _evaluate(self, x, z, p):
        N, n = x.shape
        a = self.a
        xr = x[:, 1:]
        w = z - 0.5 * (xr * xr) @ a
        b = self.base.evaluate(x[:, :1], w, p[:, :1])
        out = PhaseDerivs.zeros(N, n)
        ax = -xr * a                      # d w / d x_i, i >= 2
        out.value[:] = b.value + self.shift
        out.x[:, 0] = b.x[:, 0]
        out.x[:, 1:] = b.z[:, None] * ax
        out.z[:] = b.z
        out.p[:, 0] = b.p[:, 0]
        out.xx[:, 0, 0] = b.xx[:, 0, 0]
        out.xx[:, 0, 1:] = b.xz[:, :1] * ax
        out.xx[:, 1:, 0] = out.xx[:, 0, 1:]
        out.xx[:, 1:, 1:] = (b.zz[:, None, None] * ax[:, :, None] * ax[:, None, :]
                             - b.z[:, None, None] * np.diag(a)[None])
        out.xz[:, 0] = b.xz[:, 0]
        out.xz[:, 1:] = b.zz[:, None] * ax
        out.xp[:, 0, 0] = b.xp[:, 0, 0]
        out.xp[:, 1:, 0] = b.zp[:, :1] * ax
        out.zz[:] = b.zz
        out.zp[:, 0] = b.zp[:, 0]
        out.pp[:, 0, 0] = b.pp[:, 0, 0]
        return out


class LiftSolution:
    """``u(x) = v(x1) + sum a_i x_i^2 / 2`` with value, gradient and Hessian evaluators."""

    def __init__(self, family):
        self.family = family
        self.base = build(family.base)
        self.a = np.asarray(family.a, dtype=np.float64)
        self.phase = LiftPhase(self.base.phase, self.a)

    def u(self, x):
        x = np.atleast_2d(x)
        return self.base.u(x[:, 0]) + 0.5 * (x[:, 1:] ** 2) @ self.a

    def grad(self, x):
        x = np.atleast_2d(x)
        g = x * np.concatenate([[0.0], self.a])
        g[:, 0] = self.base.du(x[:, 0])
        return g

    def hess(self, x):
        x = np.atleast_2d(x)
        H = np.zeros((x.shape[0], self.family.n, self.family.n))
        H[:, 0, 0] = self.base.d2u(x[:, 0])
        idx = np.arange(1, self.family.n)
        H[:, idx, idx] = self.a
        return H


def build(family):
    """Closed-form evaluators and matched phase for a singular family.

    Raises
    ------
    InvalidFamilyError
        For parameters outside the family's admissible range.
    """
    if isinstance(family, OddPower):
        return _OddPowerSolution(family)
    if isinstance(family, XPower):
        return _XPowerSolution(family)
    if isinstance(family, LogType):
        return _LogSolution(family)
    if isinstance(family, Lift):
        return LiftSolution(family)
    raise InvalidFamilyError(f"unknown family {family!r}")


def ode_residual(sol, points, return_all=False):
    """Max of ``|arctan u''(x) - theta(x, u(x), u'(x))|`` over the sample points.

    Raises
    ------
    InvalidInputError
        If a point lies within ``1e-6`` of the singular point.
    """
    x = np.atleast_1d(np.asarray(points, dtype=np.float64))
    if isinstance(sol, LiftSolution):
        x = np.atleast_2d(x)
        if np.any(np.abs(x[:, 0]) < SAMPLE_MIN_DISTANCE):
            raise InvalidInputError("sample too close to the singular hyperplane x1 = 0")
        H = sol.hess(x)
        lhs = np.arctan(np.diagonal(H, axis1=1, axis2=2)).sum(axis=1)
        res = np.abs(lhs - sol.phase.evaluate(x, sol.u(x), sol.grad(x)).value)
    else:
        if np.any(np.abs(x - sol.singular_point) < SAMPLE_MIN_DISTANCE):
            raise InvalidInputError("sample too close to the singular point")
        x = sol.domain_check(x)
        th = sol.phase.evaluate(x[:, None], sol.u(x), sol.du(x)[:, None]).value
        res = np.abs(np.arctan(sol.d2u(x)) - th)
    return res if return_all else float(res.max())


@dataclass
class TouchSpec:
    """Quadratic test family ``phi = u(x0) + p (x - x0) + M (x - x0)^2 / 2`` and neighbourhoods.

    ``p`` and ``M`` run over symmetric grids of half-width ``p_range`` /
    ``M_range`` around ``p_center`` / ``M_center`` (``None`` centres on the
    classical derivative when it exists, else 0). Neighbourhoods are punctured
    radii ``r`` log-spaced between ``exp(log_r_min)`` and ``r_max``; ``levels``
    successively smaller outer radii (``r_max / 10^j``) are tried, touching at
    any level counts. ``log_r_min=None`` picks ``-1e7`` at a singular point
    with exact chord evaluation and ``ln 1e-12`` otherwise.
    """

    p_range: float = 1e3
    M_range: float = 1e3
    p_steps: int = 201
    M_steps: int = 201
    p_center: float = None
    M_center: float = None
    r_max: float = 0.1
    log_r_min: float = None
    radii: int = 400
    levels: int = 4


@dataclass
class TouchReport:
    """Touching statistics for one base point."""

    x0: float
    tested: int
    above: int
    below: int
    violations: int
    classical_residual: float
    examples_above: list = field(default_factory=list)
    examples_below: list = field(default_factory=list)
    spec: TouchSpec = None

    @property
    def any_touching(self):
        return self.above + self.below > 0

    @property
    def passed(self):
        return self.violations == 0


def _grid(center, half, steps):
    steps = max(int(steps), 1)
    if steps % 2 == 0:
        steps += 1
    return center + np.linspace(-half, half, steps)


def viscosity_touch_test(sol, x0, spec=None):
    """Scan quadratic test functions for touching at ``x0``.

    ``phi`` touches from above when ``phi >= u`` (within rounding) on one of
    the punctured neighbourhoods; then the subsolution inequality
    ``arctan M >= theta(x0, u(x0), p)`` must hold. Touching from below
    requires the supersolution inequality ``arctan M <= theta``. A point with
    no touching function passes vacuously. Away from the singular point
    ``classical_residual`` is ``|arctan u''(x0) - theta(x0, u(x0), u'(x0))|``.
    """
    spec = spec or TouchSpec()
    x0 = float(x0)
    exact = sol.exact_chords(x0)
    log_r_min = spec.log_r_min
    if log_r_min is None:
        log_r_min = -1e7 if exact else np.log(1e-12)
    log_r_max = np.log(spec.r_max)
    if not log_r_min < log_r_max:
        raise InvalidInputError("r_min must be below r_max")
    if exact:
        # log-log spacing reaches far below floating-point radii
        tt = np.geomspace(-log_r_max, -log_r_min, spec.radii) if log_r_max < 0 else \
            np.linspace(-log_r_max, -log_r_min, spec.radii)
        log_r = -tt
    else:
        log_r = np.linspace(log_r_max, log_r_min, spec.radii)

    u0 = float(np.asarray(sol.u(np.array([x0])))[0])
    classical = not exact
    if classical:
        du0 = float(sol.du(np.array([x0]))[0])
        d2u0 = float(sol.d2u(np.array([x0]))[0])
        th0 = float(sol.phase.evaluate(np.array([x0]), u0, np.array([du0])).value)
        residual = abs(np.arctan(d2u0) - th0)
    else:
        du0 = d2u0 = 0.0
        residual = float("nan")
    pc = spec.p_center if spec.p_center is not None else du0
    mc = spec.M_center if spec.M_center is not None else d2u0
    ps = _grid(pc, spec.p_range, spec.p_steps)
    Ms = _grid(mc, spec.M_range, spec.M_steps)

    # q_s(r) = (phi - u)(x0 + s r) / r = s (p - c_s(r)) + M r / 2
    r = np.exp(log_r)
    sides = []
    for s in (1.0, -1.0):
        c = sol.chord_slope(x0, s, log_r)
        sc = sol.chord_scale(x0, s, log_r)
        sides.append((s, c, sc))

    P, M = np.meshgrid(ps, Ms, indexing="ij")
    P, M = P.ravel(), M.ravel()
    above = np.zeros(P.size, dtype=bool)
    below = np.zeros(P.size, dtype=bool)
    for j in range(spec.levels):
        inside = log_r <= log_r_max - j * np.log(10.0)
        if not inside.any():
            break
        ok_up = np.ones(P.size, dtype=bool)
        ok_dn = np.ones(P.size, dtype=bool)
        for s, c, sc in sides:
            cc, scc, rr = c[inside], sc[inside], r[inside]
            with np.errstate(invalid="ignore", over="ignore"):
                q = s * (P[:, None] - cc[None, :]) + 0.5 * M[:, None] * rr[None, :]
                tol = scc[None, :] + 4 * np.finfo(float).eps * (np.abs(P)[:, None] + np.abs(M)[:, None] * rr[None, :])
            ok_up &= np.all(q >= -tol, axis=1)
            ok_dn &= np.all(q <= tol, axis=1)
        above |= ok_up
        below |= ok_dn

    th = sol.phase.evaluate(np.full((P.size, 1), x0), np.full(P.size, u0), P[:, None]).value
    slack = 1e-12 * (1 + np.abs(th))
    viol = (above & (np.arctan(M) < th - slack)) | (below & (np.arctan(M) > th + slack))
    ex_a = [(float(P[i]), float(M[i])) for i in np.flatnonzero(above)[:5]]
    ex_b = [(float(P[i]), float(M[i])) for i in np.flatnonzero(below)[:5]]
    return TouchReport(x0, int(P.size), int(above.sum()), int(below.sum()), int(viol.sum()),
                       residual, ex_a, ex_b, spec)


@dataclass
class LiftRange:
    """Sampled total-phase range of a lift and a subcritical witness (if found)."""

    min_phase: float
    max_phase: float
    shift: float
    critical: float
    witness: np.ndarray = None
    witness_phase: float = None

    @property
    def has_witness(self):
        return self.witness is not None


def _base_samples(base_sol, count=2000):
    lo, hi = (LOG_DOMAIN[0] * 10, LOG_DOMAIN[1]) if isinstance(base_sol, _LogSolution) else (1e-12, 1.0)
    r = np.geomspace(lo, hi, count)
    return np.concatenate([-r[::-1], r])


def lift_phase_range(family, count=2000):
    """Total phase range of a lift over ``x1`` samples on both sides of 0.

    The total phase is the base phase ``arctan v''(x1)`` shifted by
    ``sum arctan a_i``. The witness is the sample point attaining the
    minimum when that minimum is below ``(n-2) pi / 2``.
    """
    if not isinstance(family, Lift):
        raise InvalidFamilyError("lift_phase_range needs a Lift family")
    sol = build(family)
    x1 = _base_samples(sol.base, count)
    x = np.zeros((x1.size, family.n))
    x[:, 0] = x1
    total = sol.phase.evaluate(x, sol.u(x), sol.grad(x)).value
    crit = critical_phase(family.n)
    i = int(np.argmin(total))
    wit = x[i].copy() if total[i] < crit else None
    return LiftRange(float(total.min()), float(total.max()), family.shift, crit, wit,
                     float(total[i]) if wit is not None else None)


def _pair_starts(delta, count):
    s = np.linspace(-1.5 * delta, 0.5 * delta, count)
    return np.union1d(s, [-0.5 * delta])


def lipschitz_quotient(sol, delta, count=201):
    """``max |u(x + delta) - u(x)| / delta`` over pairs straddling the origin."""
    x = _pair_starts(delta, count)
    return float(np.max(np.abs(sol.u(x + delta) - sol.u(x))) / delta)


def holder_quotient(sol, alpha, delta, count=201):
    """``max |u(x + delta) - u(x)| / delta^alpha`` over the same pairs."""
    x = _pair_starts(delta, count)
    return float(np.max(np.abs(sol.u(x + delta) - sol.u(x))) / delta ** alpha)


def mean_curvature_profile(sol, x):
    """``|H| = |u'''| / (1 + u''^2)^{3/2}`` of the graph of ``u'`` (one dimension)."""
    x = np.asarray(x, dtype=np.float64)
    return np.abs(sol.d3u(x)) / (1.0 + sol.d2u(x) ** 2) ** 1.5
