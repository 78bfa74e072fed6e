"""Pointwise spectral layer: eigen-decomposition, the Lagrangian phase and
elementary symmetric functions of Hessian eigenvalues."""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidInputError, InvalidPhaseError

CRITICALITY_TOL = 1e-9
_SYMMETRY_RTOL = 1e-12


def critical_phase(n):
    """The threshold ``(n - 2) * pi / 2`` separating sub- and supercritical phases."""
    return (n - 2) * np.pi / 2


@dataclass(frozen=True)
class SymMatrix:
    """A real symmetric ``n x n`` matrix.

    Inputs that are symmetric to within round-off are symmetrized exactly;
    anything further off raises :class:`InvalidInputError`.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.float64)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("matrix has non-finite entries")
        scale = max(np.abs(a).max(), 1.0)
        if np.abs(a - a.T).max() > _SYMMETRY_RTOL * scale:
            raise InvalidInputError("matrix is not symmetric")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues ``lam[0] >= ... >= lam[n-1]`` and the matching orthonormal frame."""

    lam: np.ndarray
    frame: np.ndarray

    @property
    def n(self):
        return self.lam.shape[0]

    def reconstruct(self):
        return (self.frame * self.lam) @ self.frame.T


@dataclass(frozen=True)
class PhaseRegime:
    """Criticality classification of a phase value.

    ``margin`` is ``|theta| - (n - 2) pi / 2``; ``sign`` records which branch
    (``+1`` or ``-1``) the phase lies on so ``signed_margin`` flips under
    ``theta -> -theta`` while the classification does not.
    """

    value: str
    margin: float
    sign: int
    tolerance: float = CRITICALITY_TOL

    @property
    def signed_margin(self):
        return self.sign * self.margin

    @property
    def is_critical_or_super(self):
        return self.value != "subcritical"


@dataclass(frozen=True)
class EigenPropertyReport:
    """Outcome of the ordered-eigenvalue checks for one eigenvalue tuple.

    When ``applicable`` is False the phase is below critical (or ``n < 2``) and
    the boolean fields are ``None``.
    """

    applicable: bool
    positive_upper: bool = None
    balance: bool = None
    sigma_nonnegative: bool = None
    lambda_max_floor: bool = None
    sigmas: tuple = field(default=())

    @property
    def all_hold(self):
        return bool(self.applicable and self.positive_upper and self.balance
                    and self.sigma_nonnegative and self.lambda_max_floor)


def eigen_decompose(m):
    """Sorted eigen-decomposition of a symmetric matrix.

    Parameters
    ----------
    m : SymMatrix or array_like
        Symmetric input; plain arrays are validated through :class:`SymMatrix`.

    Returns
    -------
    Spectrum
    """
    if not isinstance(m, SymMatrix):
        m = SymMatrix(m)
    vals, vecs = _kernels.jacobi_eigh(m.entries[None, :, :])
    return Spectrum(vals[0], vecs[0])


def eigen_decompose_batch(mats):
    """Eigenvalues and frames for a stack ``(..., n, n)`` of symmetric matrices."""
    mats = np.asarray(mats, dtype=np.float64)
    if not np.all(np.isfinite(mats)):
        raise InvalidInputError("matrix stack has non-finite entries")
    lead = mats.shape[:-2]
    n = mats.shape[-1]
    vals, vecs = _kernels.jacobi_eigh(mats.reshape(-1, n, n))
    return vals.reshape(lead + (n,)), vecs.reshape(lead + (n, n))


def lagrangian_phase(s):
    """``sum_i arctan(lambda_i)``; accepts a :class:`Spectrum` or eigenvalue array(s)."""
    lam = s.lam if isinstance(s, Spectrum) else np.asarray(s, dtype=np.float64)
    return np.arctan(lam).sum(axis=-1)


def phase_regime(theta, n, tol=CRITICALITY_TOL):
    """Classify ``theta`` against the critical value ``(n - 2) pi / 2``."""
    theta = float(theta)
    if not abs(theta) < n * np.pi / 2:
        raise InvalidPhaseError(f"|theta|={abs(theta)!r} must be below n*pi/2={n * np.pi / 2!r}")
    margin = abs(theta) - critical_phase(n)
    if abs(margin) <= tol:
        value = "critical"
    elif margin > tol:
        value = "supercritical"
    else:
        value = "subcritical"
    return PhaseRegime(value, margin, 1 if theta >= 0 else -1, tol)


def sigma_all(lam):
    """All elementary symmetric polynomials ``sigma_0 .. sigma_n``.

    Uses the coefficient recurrence for ``prod_i (1 + t lambda_i)``, which
    never forms the large cancelling partial sums of the naive subset sum.
    Accepts a batch ``(..., n)`` and returns ``(..., n + 1)``.
    """
    lam = np.asarray(lam, dtype=np.float64)
    n = lam.shape[-1]
    e = np.zeros(lam.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        li = lam[..., i]
        for j in range(i + 1, 0, -1):
            e[..., j] = e[..., j] + li * e[..., j - 1]
    return e


def sigma_k(lam, k):
    """The ``k``-th elementary symmetric polynomial, zero outside ``0 <= k <= n``."""
    lam = np.asarray(lam, dtype=np.float64)
    n = lam.shape[-1]
    if k < 0 or k > n:
        return np.zeros(lam.shape[:-1]) if lam.ndim > 1 else 0.0
    return sigma_all(lam)[..., k]


def _conformality_sides(lam):
    lam = np.asarray(lam, dtype=np.float64)
    n = lam.shape[-1]
    sig = sigma_all(lam)
    theta = np.arctan(lam).sum(axis=-1)
    one_plus = 1.0 + lam * lam
    V = np.sqrt(np.prod(one_plus, axis=-1))
    lhs = (1.0 / one_plus).sum(axis=-1) * V

    even = np.zeros(lam.shape[:-1])
    odd = np.zeros(lam.shape[:-1])
    scale = np.zeros(lam.shape[:-1])
    k = 0
    while 2 * k < n:
        term = (-1) ** k * (n - 2 * k) * sig[..., 2 * k]
        even = even + term
        scale = scale + np.abs(term)
        k += 1
    k = 1
    while 2 * k - 1 < n:
        term = (-1) ** k * (n - 2 * k + 1) * sig[..., 2 * k - 1]
        odd = odd + term
        scale = scale + np.abs(term)
        k += 1
    rhs = np.cos(theta) * even - np.sin(theta) * odd
    return lhs, rhs, np.maximum(np.maximum(np.abs(lhs), scale), np.finfo(float).tiny)


def conformality_trace_residual(lam, relative=False):
    """Residual of the traced conformality identity for the graph metric.

    Compares ``sum_j 1/(1 + lambda_j^2) * V`` with
    ``cos(theta) * sum_k (-1)^k (n-2k) sigma_{2k} - sin(theta) * sum_k (-1)^k (n-2k+1) sigma_{2k-1}``
    where ``V = sqrt(prod(1 + lambda_i^2))`` and ``theta`` is the phase.

    With ``relative=True`` the absolute residual is divided by the largest of
    ``|lhs|`` and the summed magnitudes of the right-hand terms, the natural
    round-off scale of the cancellation.
    """
    lhs, rhs, scale = _conformality_sides(lam)
    res = np.abs(lhs - rhs)
    return res / scale if relative else res


def _tol_scale(lam):
    return 1e-12 * max(1.0, float(np.abs(lam).max()))


def ordered_eigen_properties(s, theta=None):
    """Check the ordered-eigenvalue properties valid at critical and supercritical phase.

    Reports (i) ``lambda_1 >= ... >= lambda_{n-1} > 0`` and
    ``lambda_{n-1} >= |lambda_n|``; (ii) ``lambda_1 + (n-1) lambda_n >= 0``;
    (iii) ``sigma_k >= 0`` for ``1 <= k <= n-1``; and the floor
    ``lambda_1 >= tan(pi/2 - pi/n)``. Inequalities allow a ``1e-12`` relative slack.
    """
    lam = s.lam if isinstance(s, Spectrum) else np.sort(np.asarray(s, dtype=np.float64))[::-1]
    n = lam.shape[0]
    phase = float(np.arctan(lam).sum())
    if theta is not None and abs(float(theta) - phase) > 1e-9 * max(1.0, abs(phase)):
        raise InvalidInputError(f"theta={theta!r} is not the phase {phase!r} of the spectrum")
    if n < 2 or phase < critical_phase(n) - CRITICALITY_TOL:
        return EigenPropertyReport(applicable=False)

    tol = _tol_scale(lam)
    ordered = bool(np.all(np.diff(lam[: n - 1]) <= tol))
    positive_upper = ordered and lam[n - 2] > -tol and lam[n - 2] >= abs(lam[n - 1]) - tol
    balance = lam[0] + (n - 1) * lam[n - 1] >= -tol
    sig = sigma_all(lam)
    sig_scale = 1e-12 * max(1.0, float(np.abs(sig).max()))
    sigma_nonnegative = bool(np.all(sig[1:n] >= -sig_scale))
    floor = lam[0] >= np.tan(np.pi / 2 - np.pi / n) - tol
    return EigenPropertyReport(
        applicable=True,
        positive_upper=bool(positive_upper),
        balance=bool(balance),
        sigma_nonnegative=sigma_nonnegative,
        lambda_max_floor=bool(floor),
        sigmas=tuple(float(x) for x in sig),
    )


def ordered_eigen_properties_batch(lam):
    """Vectorized form of :func:`ordered_eigen_properties`.

    ``lam`` has shape ``(N, n)`` and need not be sorted. Returns a dict of boolean
    arrays keyed ``applicable``, ``positive_upper``, ``balance``,
    ``sigma_nonnegative`` and ``lambda_max_floor``; the property arrays are only
    meaningful where ``applicable`` holds.
    """
    lam = -np.sort(-np.asarray(lam, dtype=np.float64), axis=1)
    n = lam.shape[1]
    phase = np.arctan(lam).sum(axis=1)
    applicable = phase >= critical_phase(n) - CRITICALITY_TOL
    if n < 2:
        applicable[:] = False
    tol = 1e-12 * np.maximum(1.0, np.abs(lam).max(axis=1))
    sig = sigma_all(lam)
    sig_tol = 1e-12 * np.maximum(1.0, np.abs(sig).max(axis=1))
    out = {"applicable": applicable}
    if n < 2:
        false = np.zeros(lam.shape[0], dtype=bool)
        out.update(positive_upper=false, balance=false, sigma_nonnegative=false,
                   lambda_max_floor=false)
        return out
    out["positive_upper"] = (lam[:, n - 2] > -tol) & (lam[:, n - 2] >= np.abs(lam[:, n - 1]) - tol)
    out["balance"] = lam[:, 0] + (n - 1) * lam[:, n - 1] >= -tol
    out["sigma_nonnegative"] = np.all(sig[:, 1:n] >= -sig_tol[:, None], axis=1)
    out["lambda_max_floor"] = lam[:, 0] >= np.tan(np.pi / 2 - np.pi / n) - tol
    return out


def sample_supercritical(rng, size, n):
    """Draw eigenvalue tuples uniformly (in angle) from the set ``phase >= (n-2) pi/2``.

    Writing ``theta_i = pi/2 - d_i`` the constraint becomes ``d_i > 0`` and
    ``sum d_i <= pi``, a scaled simplex that is sampled exactly.
    """
    e = rng.exponential(size=(size, n + 1))
    d = np.pi * e[:, :n] / e.sum(axis=1, keepdims=True)
    theta = np.pi / 2 - d
    # keep away from the arctan poles
    theta = np.clip(theta, -np.pi / 2 + 1e-9, np.pi / 2 - 1e-9)
    return np.tan(theta)
