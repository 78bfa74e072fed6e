"""Closed-form potentials with exact derivatives up to third order.

Each potential maps coordinates of shape ``(..., n)`` to values ``(...)``,
gradients ``(..., n)``, Hessians ``(..., n, n)`` and third-derivative
tensors ``(..., n, n, n)``. They serve as manufactured solutions, boundary
data and test fields.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

__all__ = ["Potential", "Quadratic", "Quartic", "Radial", "MongeAmpereLift",
           "Polynomial", "Affine", "Scaled", "potential_from_config"]


def _eye_like(x):
    n = x.shape[-1]
    return np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n))


def _sym3(x):
    """``delta_ij x_k + delta_ik x_j + delta_jk x_i``."""
    n = x.shape[-1]
    I = np.eye(n)
    return (np.einsum("ij,...k->...ijk", I, x) + np.einsum("ik,...j->...ijk", I, x)
            + np.einsum("jk,...i->...ijk", I, x))


class Potential:
    """Base class: subclasses implement ``value``, ``grad``, ``hess`` and ``third``."""

    name = "potential"

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def hess(self, x):
        raise NotImplementedError

    def third(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class Quadratic(Potential):
    """``u = x . A x / 2``; ``a`` may be a scalar (``A = aI``), a diagonal or a full matrix."""

    a: object = 1.0
    name = "quadratic"

    def _A(self, n):
        a = np.asarray(self.a, dtype=np.float64)
        if a.ndim == 0:
            return a * np.eye(n)
        if a.ndim == 1:
            if a.size != n:
                raise InvalidInputError(f"diagonal of length {a.size} for dimension {n}")
            return np.diag(a)
        if a.shape != (n, n):
            raise InvalidInputError(f"matrix of shape {a.shape} for dimension {n}")
        return 0.5 * (a + a.T)

    def value(self, x):
        A = self._A(x.shape[-1])
        return 0.5 * np.einsum("...i,ij,...j->...", x, A, x)

    def grad(self, x):
        return x @ self._A(x.shape[-1])

    def hess(self, x):
        n = x.shape[-1]
        return np.broadcast_to(self._A(n), x.shape[:-1] + (n, n)).copy()

    def third(self, x):
        n = x.shape[-1]
        return np.zeros(x.shape[:-1] + (n, n, n))


@dataclass(frozen=True, eq=False)
class Quartic(Potential):
    """``u = |x|^2/2 + c |x|^4``."""

    c: float = 0.05
    name = "quartic"

    def value(self, x):
        r2 = (x * x).sum(axis=-1)
        return 0.5 * r2 + self.c * r2 * r2

    def grad(self, x):
        r2 = (x * x).sum(axis=-1)
        return x * (1.0 + 4.0 * self.c * r2)[..., None]

    def hess(self, x):
        r2 = (x * x).sum(axis=-1)
        return ((1.0 + 4.0 * self.c * r2)[..., None, None] * _eye_like(x)
                + 8.0 * self.c * np.einsum("...i,...j->...ij", x, x))

    def third(self, x):
        return 8.0 * self.c * _sym3(x)


@dataclass(frozen=True, eq=False)
class Radial(Potential):
    """``u = kappa (1 + |x|^2)^{3/2} / 3``, convex with Hessian growing linearly in ``|x|``."""

    kappa: float = 1.0
    name = "radial"

    def value(self, x):
        s2 = 1.0 + (x * x).sum(axis=-1)
        return self.kappa * s2 ** 1.5 / 3.0

    def grad(self, x):
        s = np.sqrt(1.0 + (x * x).sum(axis=-1))
        return self.kappa * s[..., None] * x

    def hess(self, x):
        s = np.sqrt(1.0 + (x * x).sum(axis=-1))
        return self.kappa * (s[..., None, None] * _eye_like(x)
                             + np.einsum("...i,...j->...ij", x, x) / s[..., None, None])

    def third(self, x):
        s = np.sqrt(1.0 + (x * x).sum(axis=-1))
        xxx = np.einsum("...i,...j,...k->...ijk", x, x, x)
        return self.kappa * (_sym3(x) / s[..., None, None, None] - xxx / s[..., None, None, None] ** 3)


@dataclass(frozen=True, eq=False)
class MongeAmpereLift(Potential):
    """``u = x2^2/(2 x1) + x1^3/6 + sum_{k>=3} a x_k^2 / 2`` on ``x1 > 0``.

    The first two variables solve ``det D^2u = 1`` with positive trace, so the
    two-dimensional phase is exactly ``pi/2``; the lift adds ``(n-2) arctan a``.
    Constant phase with a non-constant Hessian.
    """

    a: float = 0.1
    name = "ma_lift"

    def _check(self, x):
        if x.shape[-1] < 2:
            raise InvalidInputError("MongeAmpereLift needs dimension >= 2")
        if np.any(x[..., 0] <= 0):
            raise InvalidInputError("MongeAmpereLift is defined for x1 > 0 only")

    def phase(self, n):
        return np.pi / 2 + (n - 2) * np.arctan(self.a)

    def value(self, x):
        self._check(x)
        x1, x2 = x[..., 0], x[..., 1]
        return x2 ** 2 / (2 * x1) + x1 ** 3 / 6 + 0.5 * self.a * (x[..., 2:] ** 2).sum(axis=-1)

    def grad(self, x):
        self._check(x)
        x1, x2 = x[..., 0], x[..., 1]
        g = self.a * x.copy()
        g[..., 0] = -x2 ** 2 / (2 * x1 ** 2) + x1 ** 2 / 2
        g[..., 1] = x2 / x1
        return g

    def hess(self, x):
        self._check(x)
        n = x.shape[-1]
        x1, x2 = x[..., 0], x[..., 1]
        H = self.a * np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)).copy()
        H[..., 0, 0] = x2 ** 2 / x1 ** 3 + x1
        H[..., 0, 1] = H[..., 1, 0] = -x2 / x1 ** 2
        H[..., 1, 1] = 1.0 / x1
        return H

    def third(self, x):
        self._check(x)
        n = x.shape[-1]
        x1, x2 = x[..., 0], x[..., 1]
        T = np.zeros(x.shape[:-1] + (n, n, n))
        T[..., 0, 0, 0] = -3 * x2 ** 2 / x1 ** 4 + 1.0
        v = 2 * x2 / x1 ** 3
        for idx in ((0, 0, 1), (0, 1, 0), (1, 0, 0)):
            T[(Ellipsis,) + idx] = v
        w = -1.0 / x1 ** 2
        for idx in ((0, 1, 1), (1, 0, 1), (1, 1, 0)):
            T[(Ellipsis,) + idx] = w
        return T


@dataclass(frozen=True, eq=False)
class Polynomial(Potential):
    """Polynomial from a table of monomials ``(coefficient, exponents)``.

    ``terms`` is a sequence of ``(c, (e1, ..., en))``; the value is
    ``sum c prod x_i^{e_i}``.
    """

    terms: tuple = ()
    name = "custom_table"

    def __post_init__(self):
        clean = []
        for c, e in self.terms:
            e = tuple(int(k) for k in e)
            if any(k < 0 for k in e):
                raise InvalidInputError("monomial exponents must be non-negative")
            clean.append((float(c), e))
        if len({len(e) for _, e in clean}) > 1:
            raise InvalidInputError("all monomials must have the same number of exponents")
        object.__setattr__(self, "terms", tuple(clean))

    def _deriv(self, x, orders):
        n = x.shape[-1]
        out = np.zeros(x.shape[:-1])
        for c, e in self.terms:
            if len(e) != n:
                raise InvalidInputError(f"monomial of dimension {len(e)} evaluated in dimension {n}")
            e = list(e)
            coef = c
            for i in orders:
                coef *= e[i]
                e[i] -= 1
            if coef == 0:
                continue
            out = out + coef * np.prod([x[..., i] ** e[i] for i in range(n)], axis=0)
        return out

    def value(self, x):
        return self._deriv(x, ())

    def grad(self, x):
        return np.stack([self._deriv(x, (i,)) for i in range(x.shape[-1])], axis=-1)

    def hess(self, x):
        n = x.shape[-1]
        H = np.empty(x.shape[:-1] + (n, n))
        for i in range(n):
            for j in range(i, n):
                H[..., i, j] = H[..., j, i] = self._deriv(x, (i, j))
        return H

    def third(self, x):
        n = x.shape[-1]
        T = np.empty(x.shape[:-1] + (n, n, n))
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    T[..., i, j, k] = self._deriv(x, (i, j, k))
        return T


@dataclass(frozen=True, eq=False)
class Affine(Potential):
    """``base(x) + b . x + c``; the Hessian is that of ``base``."""

    base: Potential
    b: tuple = ()
    c: float = 0.0

    @property
    def name(self):
        return self.base.name

    def _b(self, n):
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if b.size == 0:
            return np.zeros(n)
        if b.size != n:
            raise InvalidInputError(f"linear term of length {b.size} for dimension {n}")
        return b

    def value(self, x):
        return self.base.value(x) + x @ self._b(x.shape[-1]) + self.c

    def grad(self, x):
        return self.base.grad(x) + self._b(x.shape[-1])

    def hess(self, x):
        return self.base.hess(x)

    def third(self, x):
        return self.base.third(x)


@dataclass(frozen=True, eq=False)
class Scaled(Potential):
    """``s * base(x)``."""

    base: Potential
    s: float = 1.0

    @property
    def name(self):
        return self.base.name

    def value(self, x):
        return self.s * self.base.value(x)

    def grad(self, x):
        return self.s * self.base.grad(x)

    def hess(self, x):
        return self.s * self.base.hess(x)

    def third(self, x):
        return self.s * self.base.third(x)


def _floats(text):
    return [float(t) for t in str(text).replace(",", " ").split()]


def _parse_table(text):
    """Parse ``"c: e1 e2 ...; c: e1 e2 ..."`` into monomial terms."""
    terms = []
    for chunk in str(text).split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise InvalidInputError(f"monomial {chunk!r} must look like 'coef: e1 e2 ...'")
        c, e = chunk.split(":", 1)
        terms.append((float(c), tuple(int(float(k)) for k in e.replace(",", " ").split())))
    return tuple(terms)


def potential_from_config(params):
    """Build a potential from a flat ``key -> string`` mapping.

    Keys: ``type`` (quadratic, quartic, radial, ma_lift, custom_table),
    ``a`` / ``c`` / ``kappa`` / ``terms`` for the family parameter,
    ``scale``, ``linear`` (vector) and ``offset``.
    """
    kind = params.get("type", "quadratic").strip().lower()
    if kind == "quadratic":
        a = _floats(params.get("a", "1.0"))
        pot = Quadratic(a[0] if len(a) == 1 else tuple(a))
    elif kind == "quartic":
        pot = Quartic(float(params.get("c", 0.05)))
    elif kind == "radial":
        pot = Radial(float(params.get("kappa", 1.0)))
    elif kind == "ma_lift":
        pot = MongeAmpereLift(float(params.get("a", 0.1)))
    elif kind == "custom_table":
        if "terms" not in params:
            raise InvalidInputError("custom_table needs 'terms'")
        pot = Polynomial(_parse_table(params["terms"]))
    else:
        raise InvalidInputError(f"unknown potential type {kind!r}")
    if "scale" in params:
        pot = Scaled(pot, float(params["scale"]))
    if "linear" in params or "offset" in params:
        pot = Affine(pot, tuple(_floats(params.get("linear", ""))), float(params.get("offset", 0.0)))
    return pot
