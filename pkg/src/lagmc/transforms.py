"""Operator transforms: exponential concavification and the upward rotation of
the gradient graph.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import LinearNDInterpolator
from scipy.spatial import Delaunay, cKDTree

from .errors import DimensionError, InvalidInputError, RotationDegenerateError
from .grid import Grid
from .solver import discrete_operator
from .spectral import CRITICALITY_TOL, critical_phase, sigma_all

__all__ = ["ConcavifyParams", "concavify_constant", "ConcavityCheck", "concavified_hessian_check",
           "concavified_pd_batch", "det_identity_residual", "SigmaFloorResult", "sigma_floor_check",
           "sigma_floor_batch", "sample_constrained", "RotationParams", "default_rotation_angle",
           "rotation_params", "rotated_hessian", "RotatedPotential", "rotate_potential",
           "rotation_phase_shift_check", "rotation_round_trip"]


@dataclass(frozen=True)
class ConcavifyParams:
    """Constants making ``-exp(-A f)`` concave for ``f = sum arctan lambda_i`` on
    critical/supercritical spectra with ``|lambda| <= K``.

    ``T = pi/2 - arctan K``, ``s = tan(T)/2``, ``eps = s/(n-1)``,
    ``C = tan(T)^{n-1}/2``. ``raw_threshold = 2 K^n / C`` makes the
    determinant factor positive; ``printed_threshold = 2 K / C`` is the
    weaker bound without the exponent. ``A = 2 max(K, K^n) / C (1 + safety)``.
    """

    n: int
    K: float
    T: float
    s: float
    eps: float
    C: float
    A: float
    raw_threshold: float
    printed_threshold: float
    safety: float


def concavify_constant(n, K, safety=0.1):
    """Concavification constants for dimension ``n >= 3`` and Hessian bound ``K > 0``.

    Raises
    ------
    DimensionError
        For ``n <= 2``, where the exponential transform cannot produce concavity.
    """
    if int(n) != n or n <= 2:
        raise DimensionError(f"concavification needs n >= 3, got {n}")
    if not K > 0:
        raise InvalidInputError("K must be positive")
    n = int(n)
    T = np.pi / 2 - np.arctan(K)
    tT = np.tan(T)
    s = tT / 2
    C = 0.5 * tT ** (n - 1)
    raw = 2 * K ** n / C
    A = 2 * max(K, K ** n) / C * (1 + safety)
    return ConcavifyParams(n, float(K), float(T), float(s), float(s / (n - 1)), float(C), float(A),
                           float(raw), float(2 * K / C), float(safety))


@dataclass(frozen=True)
class ConcavityCheck:
    """Positive-definiteness of ``M = A 11^T + 2 diag(lambda)`` by leading minors."""

    applicable: bool
    positive_definite: bool
    det: float
    det_formula: float
    minors: tuple

    @property
    def identity_residual(self):
        scale = max(abs(self.det), abs(self.det_formula), 1e-300)
        return abs(self.det - self.det_formula) / scale


def _reduced_matrix(lam, A):
    lam = np.asarray(lam, dtype=np.float64)
    n = lam.shape[-1]
    return A * np.ones(lam.shape[:-1] + (n, n)) + 2.0 * lam[..., None] * np.eye(n)


def _det_formula(lam, A):
    n = lam.shape[-1]
    sig = sigma_all(lam)
    return 2.0 ** (n - 1) * (A * sig[..., n - 1] + 2.0 * sig[..., n])


def concavified_hessian_check(lam, A):
    """Check the concavity criterion at one spectrum.

    The Hessian of ``-exp(-A f)`` in ``lambda`` is, after conjugation by the
    positive diagonal ``1/(1 + lambda_i^2)``, a negative multiple of
    ``M = A 11^T + 2 diag(lambda)``. Returns the leading minors of ``M``, its
    determinant and the closed form ``2^{n-1}(A sigma_{n-1} + 2 sigma_n)``.
    Spectra with phase below ``(n-2) pi / 2`` are marked not applicable.
    """
    lam = np.asarray(lam, dtype=np.float64).reshape(-1)
    n = lam.size
    applicable = np.arctan(lam).sum() >= critical_phase(n) - CRITICALITY_TOL
    M = _reduced_matrix(lam, A)
    minors = tuple(float(np.linalg.det(M[:k, :k])) for k in range(1, n + 1))
    pd = all(m > 0 for m in minors)
    return ConcavityCheck(bool(applicable), bool(pd), minors[-1], float(_det_formula(lam, A)), minors)


def concavified_pd_batch(lam, A):
    """Vectorized positive-definiteness of ``M`` for spectra ``(N, n)``."""
    lam = np.asarray(lam, dtype=np.float64)
    M = _reduced_matrix(lam, A)
    n = lam.shape[-1]
    pd = np.ones(lam.shape[:-1], dtype=bool)
    for k in range(1, n + 1):
        pd &= np.linalg.det(M[..., :k, :k]) > 0
    return pd


def det_identity_residual(lam, A):
    """Relative residual of ``det M = 2^{n-1}(A sigma_{n-1} + 2 sigma_n)`` per spectrum.

    The scale is the larger of the summed absolute terms of the closed form
    and the Hadamard bound ``prod_i |M_i|`` on ``det M``. The latter is the
    size of the round-off in the numerical determinant, so nearly singular
    ``M`` (where LU elimination cancels) does not inflate the residual.
    """
    lam = np.asarray(lam, dtype=np.float64)
    n = lam.shape[-1]
    M = _reduced_matrix(lam, A)
    d = np.linalg.det(M)
    sig_abs = sigma_all(np.abs(lam))
    terms = 2.0 ** (n - 1) * (abs(A) * sig_abs[..., n - 1] + 2.0 * sig_abs[..., n]) + np.abs(d)
    hadamard = np.prod(np.linalg.norm(M, axis=-1), axis=-1)
    scale = np.maximum(terms, hadamard)
    return np.abs(d - _det_formula(lam, A)) / np.maximum(scale, 1e-300)


@dataclass(frozen=True)
class SigmaFloorResult:
    applicable: bool
    passed: bool
    sigma: float
    floor: float


def sigma_floor_check(lam, K, tol=1e-10):
    """``sigma_{n-1}(lambda) >= tan(pi/2 - arctan K)^{n-1} / 2`` for critical/supercritical
    spectra with ``max |lambda| <= K`` and ``n >= 3``; other inputs are not applicable."""
    lam = np.asarray(lam, dtype=np.float64).reshape(-1)
    n = lam.size
    T = np.pi / 2 - np.arctan(K)
    floor = 0.5 * np.tan(T) ** (n - 1)
    applicable = (n >= 3 and np.abs(lam).max() <= K * (1 + 1e-12)
                  and np.arctan(lam).sum() >= critical_phase(n) - CRITICALITY_TOL)
    sig = float(sigma_all(lam)[n - 1])
    return SigmaFloorResult(bool(applicable), bool(not applicable or sig >= floor - tol), sig, float(floor))


def sigma_floor_batch(lam, K):
    """``sigma_{n-1} - floor`` for each spectrum in ``(N, n)``."""
    lam = np.asarray(lam, dtype=np.float64)
    n = lam.shape[-1]
    floor = 0.5 * np.tan(np.pi / 2 - np.arctan(K)) ** (n - 1)
    return sigma_all(lam)[..., n - 1] - floor


def sample_constrained(rng, size, n, K):
    """Uniform samples of angles with ``sum theta >= (n-2) pi/2`` and ``|tan theta_i| <= K``.

    Writing ``theta_i = pi/2 - d_i`` the set is ``d_i >= T``, ``sum d <= pi``
    and ``d_i <= pi/2 + arctan K``; the first two constraints are sampled
    exactly (shifted simplex), the last by rejection. Returns eigenvalues
    ``tan theta`` sorted descending, shape ``(size, n)``.
    """
    T = np.pi / 2 - np.arctan(K)
    budget = np.pi - n * T
    if budget < 0:
        raise InvalidInputError(f"no critical spectrum has all |lambda| <= {K} in dimension {n}")
    upper = np.pi / 2 + np.arctan(K)
    out = []
    have = 0
    while have < size:
        m = max(2 * (size - have), 1024)
        e = rng.exponential(size=(m, n + 1))
        d = T + budget * e[:, :n] / e.sum(axis=1, keepdims=True)
        d = d[np.all(d <= upper, axis=1)]
        out.append(d)
        have += d.shape[0]
    d = np.concatenate(out)[:size]
    lam = np.tan(np.pi / 2 - d)
    return -np.sort(-lam, axis=1)


@dataclass(frozen=True)
class RotationParams:
    """Rotation angle ``gamma`` and Hessian bound ``K`` with contraction ``cos|gamma| - K sin|gamma|``."""

    gamma: float
    K: float

    @property
    def contraction(self):
        g = abs(self.gamma)
        return float(np.cos(g) - self.K * np.sin(g))


def default_rotation_angle(K):
    """``(pi/2 - arctan K) / 2``, half the admissible range."""
    return 0.5 * (np.pi / 2 - np.arctan(K))


def rotation_params(gamma, K):
    """Validate ``|gamma| < arctan(1/K)`` (``< pi/2`` when ``K = 0``)."""
    limit = np.pi / 2 if K == 0 else np.arctan(1.0 / K)
    if not abs(gamma) < limit:
        raise RotationDegenerateError(f"|gamma|={abs(gamma)!r} must be below arctan(1/K)={limit!r} (K={K!r})")
    return RotationParams(float(gamma), float(K))


def rotated_hessian(hess, gamma):
    """``(sin g I + cos g H)(cos g I - sin g H)^{-1}`` per node; eigenvalues map to
    ``tan(arctan lambda + gamma)``."""
    hess = np.asarray(hess, dtype=np.float64)
    n = hess.shape[-1]
    c, s = np.cos(gamma), np.sin(gamma)
    I = np.eye(n)
    num = s * I + c * hess
    den = c * I - s * hess
    out = np.linalg.solve(den, num)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


@dataclass
class RotatedPotential:
    """Rotated gradient graph at the source nodes and its resampling on a regular grid.

    ``xbar``, ``ubar``, ``ybar`` hold the image of each source node
    (``ybar = Dubar(xbar)``); ``grid``, ``values`` and ``gradient`` the
    resampled potential and gradient (``nan`` outside the image hull).
    """

    params: RotationParams
    source_coords: np.ndarray
    source_phase: np.ndarray
    xbar: np.ndarray
    ubar: np.ndarray
    ybar: np.ndarray
    grid: Grid
    values: np.ndarray
    gradient: np.ndarray
    lipschitz_ratio: float
    min_distance: float

    @property
    def injective(self):
        return self.min_distance > 0

    @property
    def lipschitz_ok(self):
        return self.lipschitz_ratio >= self.params.contraction * (1 - 1e-9)


def _rotate_points(x, z, y, gamma):
    c, s = np.cos(gamma), np.sin(gamma)
    xbar = c * x - s * y
    ybar = s * x + c * y
    zbar = z - s * c * 0.5 * ((y * y).sum(axis=1) - (x * x).sum(axis=1)) - s * s * (x * y).sum(axis=1)
    return xbar, zbar, ybar


def _target_grid(points, h):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    counts = np.floor((hi - lo) / h + 1e-9).astype(int) + 1
    counts = np.maximum(counts, 2)
    return Grid(lo, lo + h * (counts - 1), counts)


def _interpolate(points, data, targets, edge_factor=2.0):
    """Piecewise-linear scattered interpolation, ``nan`` off the data support.

    The image of a box is generally not convex, and the convex hull bridges
    concave gaps with long thin simplices; targets falling in a simplex whose
    longest edge exceeds ``edge_factor`` times the median are discarded.
    """
    data = np.asarray(data, dtype=np.float64).reshape(points.shape[0], -1)
    if points.shape[1] == 1:
        order = np.argsort(points[:, 0])
        xs = points[order, 0]
        out = np.column_stack([np.interp(targets[:, 0], xs, col[order], left=np.nan, right=np.nan)
                               for col in data.T])
        gaps = np.diff(xs)
        k = np.clip(np.searchsorted(xs, targets[:, 0]) - 1, 0, gaps.size - 1)
        out[gaps[k] > edge_factor * np.median(gaps)] = np.nan
        return out
    tri = Delaunay(points)
    out = LinearNDInterpolator(tri, data)(targets).reshape(targets.shape[0], -1)
    v = points[tri.simplices]
    edges = np.stack([np.linalg.norm(v[:, i] - v[:, j], axis=1)
                      for i in range(v.shape[1]) for j in range(i + 1, v.shape[1])], axis=1).max(axis=1)
    simplex = tri.find_simplex(targets)
    bad = (simplex < 0) | (edges[simplex] > edge_factor * np.median(edges))
    out[bad] = np.nan
    return out


def _lipschitz_pairs(x, xbar, rng, pairs):
    N = x.shape[0]
    i = rng.integers(0, N, size=pairs)
    j = rng.integers(0, N, size=pairs)
    # nearest neighbours are the hardest pairs for a bi-Lipschitz bound
    _, nb = cKDTree(x).query(x, k=2)
    i = np.concatenate([i, np.arange(N)])
    j = np.concatenate([j, nb[:, 1]])
    keep = i != j
    dx = np.linalg.norm(x[i[keep]] - x[j[keep]], axis=1)
    dxb = np.linalg.norm(xbar[i[keep]] - xbar[j[keep]], axis=1)
    return float(np.min(dxb / dx))


def rotate_potential(u, gamma, K=None, seed=0, pairs=20000):
    """Rotate the gradient graph of ``u`` by ``gamma`` and resample the new potential.

    Each source node with a centred gradient maps to
    ``xbar = cos g x - sin g Du`` with potential
    ``ubar = u - sin g cos g (|Du|^2 - |x|^2)/2 - sin^2 g (x . Du)`` and
    gradient ``sin g x + cos g Du``. ``ubar`` and its gradient are then
    interpolated piecewise linearly onto a regular grid of the same spacing
    covering the image. ``K`` defaults to the largest nodal spectral norm of
    the discrete Hessian.

    Raises
    ------
    RotationDegenerateError
        If ``|gamma| >= arctan(1/K)``.
    """
    grid = u.grid
    nodes, x, Du, hess, phase, _, _ = discrete_operator(grid, u.values)
    if K is None:
        K = float(np.linalg.norm(hess, ord=2, axis=(1, 2)).max())
    params = rotation_params(gamma, K)
    z = u.values.ravel()[nodes]
    xbar, zbar, ybar = _rotate_points(x, z, Du, gamma)
    target = _target_grid(xbar, grid.h)
    pts = target.coords.reshape(-1, grid.n)
    out = _interpolate(xbar, np.column_stack([zbar, ybar]), pts)
    vals, grads = out[:, 0], out[:, 1:]
    rng = np.random.default_rng(seed)
    ratio = _lipschitz_pairs(x, xbar, rng, pairs)
    dmin, _ = cKDTree(xbar).query(xbar, k=2)
    return RotatedPotential(params, x, phase, xbar, zbar, ybar, target,
                            vals.reshape(target.shape), grads.reshape(target.shape + (grid.n,)),
                            ratio, float(dmin[:, 1].min()))


def _hessian_from_gradient(grid, grad):
    n = grid.n
    H = np.full(grid.shape + (n, n), np.nan)
    core = (slice(1, -1),) * n
    for k in range(n):
        up = tuple(slice(2, None) if a == k else slice(1, -1) for a in range(n))
        dn = tuple(slice(None, -2) if a == k else slice(1, -1) for a in range(n))
        H[core + (slice(None), k)] = (grad[up] - grad[dn]) / (2 * grid.h)
    return 0.5 * (H + np.swapaxes(H, -1, -2))


@dataclass
class PhaseShiftResult:
    residual: float
    evaluated: int
    h: float
    rotated: RotatedPotential


def rotation_phase_shift_check(u, model=None, gamma=None, K=None):
    """Max ``|Theta_bar - (Theta + n gamma)|`` over resampled nodes.

    ``Theta_bar`` is the arctan sum of the Hessian of the rotated potential,
    taken as centred differences of the resampled gradient; ``Theta`` is the
    source phase interpolated to the same image points. Without ``model`` the
    source phase uses the same stencil (centred differences of the centred
    gradient), so ``gamma = 0`` reproduces it exactly; with ``model`` it is
    ``model`` evaluated at ``(x, u, Du)``. Only nodes whose stencil lies
    inside the image hull are compared.
    """
    grid = u.grid
    if gamma is None:
        raise InvalidInputError("gamma is required")
    rot = rotate_potential(u, gamma, K)
    n = grid.n
    if model is not None:
        z = u.values.ravel()[grid.interior(1).ravel()]
        _, x, Du, _, _, _, _ = discrete_operator(grid, u.values)
        src = model.evaluate(x, z, Du).value
    else:
        _, _, Du, _, _, _, _ = discrete_operator(grid, u.values)
        full = np.full(grid.shape + (n,), np.nan)
        full[grid.interior(1)] = Du
        Hs = _hessian_from_gradient(grid, full)[grid.interior(1)]
        src = np.full(Hs.shape[0], np.nan)
        fin = np.all(np.isfinite(Hs), axis=(-2, -1))
        src[fin] = np.arctan(np.linalg.eigvalsh(Hs[fin])).sum(axis=1)
    Hb = _hessian_from_gradient(rot.grid, rot.gradient)
    ok = np.all(np.isfinite(Hb), axis=(-2, -1))
    if not ok.any():
        return PhaseShiftResult(float("nan"), 0, grid.h, rot)
    lam = np.linalg.eigvalsh(Hb[ok])
    phase_bar = np.arctan(lam).sum(axis=1)
    pts = rot.grid.coords[ok]
    src_at = _interpolate(rot.xbar, src, pts)[:, 0]
    good = np.isfinite(src_at)
    res = np.abs(phase_bar[good] - (src_at[good] + n * gamma))
    return PhaseShiftResult(float(res.max()) if res.size else float("nan"), int(good.sum()), grid.h, rot)


@dataclass
class RoundTripResult:
    error: float
    evaluated: int
    h: float


def rotation_round_trip(u, gamma, K=None):
    """Rotate by ``gamma``, resample, rotate the resampled data back by ``-gamma`` and
    resample onto the source grid. Returns the sup difference to ``u`` after
    removing the mean offset (potentials are defined up to a constant)."""
    grid = u.grid
    rot = rotate_potential(u, gamma, K)
    ok = np.isfinite(rot.values) & np.all(np.isfinite(rot.gradient), axis=-1)
    xb = rot.grid.coords[ok]
    x, z, y = _rotate_points(xb, rot.values[ok], rot.gradient[ok], -gamma)
    pts = grid.coords.reshape(-1, grid.n)
    back = _interpolate(x, z, pts)[:, 0]
    diff = back - u.values.ravel()
    good = np.isfinite(diff)
    if not good.any():
        return RoundTripResult(float("nan"), 0, grid.h)
    diff = diff[good] - diff[good].mean()
    return RoundTripResult(float(np.abs(diff).max()), int(good.sum()), grid.h)
