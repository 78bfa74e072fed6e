"""Finite-difference calculus on the gradient graph ``(x, Du(x))``.

All derived fields are stored on the full grid shape with ``nan`` outside
the region where their centred stencils fit, so every composition of
operators shrinks the valid interior automatically. No one-sided stencils
are used anywhere.
"""

from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import InvalidInputError
from .grid import ScalarField
from .spectral import CRITICALITY_TOL, critical_phase, sigma_all

C0 = np.log(4.0 / 3.0) / 8.0

__all__ = [
    "C0", "Derivatives", "MetricField", "GraphDiagnostics", "JacobiReport",
    "differentiate", "centered_diff", "induced_metric", "laplace_beltrami",
    "wide_laplacian", "mean_curvature", "slope_potential", "graph_diagnostics",
    "jacobi_diagnostic", "sigma_divergence_residual", "b_lower_bound",
    "sigma_k_derivative",
]


def _shift(a, off, n):
    """View of ``a`` shifted by the integer offset vector ``off`` on the width-1 core."""
    return a[tuple(slice(1 + o, a.shape[i] - 1 + o) for i, o in enumerate(off[:n]))]


def _core(n):
    return (slice(1, -1),) * n


def _unit(n, i, s=1):
    e = [0] * n
    e[i] = s
    return e


def centered_diff(f, axis, h, n):
    """Centred first difference along ``axis`` for a field with optional trailing dims."""
    out = np.full(f.shape, np.nan)
    out[_core(n)] = (_shift(f, _unit(n, axis), n) - _shift(f, _unit(n, axis, -1), n)) / (2 * h)
    return out


@dataclass
class Derivatives:
    """Gradient ``(S, n)``, Hessian ``(S, n, n)`` and third-derivative tensor ``(S, n, n, n)``."""

    grad: np.ndarray
    hess: np.ndarray
    third: np.ndarray


def _hessian(u, h, n):
    H = np.full(u.shape + (n, n), np.nan)
    zero = [0] * n
    c = _shift(u, zero, n)
    for i in range(n):
        ei = _unit(n, i)
        H[_core(n) + (i, i)] = (_shift(u, ei, n) - 2 * c + _shift(u, _unit(n, i, -1), n)) / h**2
        for j in range(i + 1, n):
            pp = [a + b for a, b in zip(ei, _unit(n, j))]
            pm = [a - b for a, b in zip(ei, _unit(n, j))]
            mp = [-a for a in pm]
            mm = [-a for a in pp]
            v = (_shift(u, pp, n) - _shift(u, pm, n) - _shift(u, mp, n) + _shift(u, mm, n)) / (4 * h * h)
            H[_core(n) + (i, j)] = v
            H[_core(n) + (j, i)] = v
    return H


def differentiate(u, third=True):
    """Centred second-order derivatives of a scalar field.

    ``grad`` and ``hess`` use the three-point and four-point cross stencils and
    are valid one node in from the faces; the third-derivative tensor is the
    centred difference of the Hessian, symmetrized over index permutations,
    and is valid two nodes in.
    """
    g = u.grid
    n, h = g.n, g.h
    if min(g.shape) < 5:
        raise InvalidInputError("differentiate needs at least 5 nodes per axis")
    vals = u.values
    grad = np.full(vals.shape + (n,), np.nan)
    for i in range(n):
        grad[..., i] = centered_diff(vals, i, h, n)
    hess = _hessian(vals, h, n)
    t3 = np.full(vals.shape + (n, n, n), np.nan)
    if third:
        raw = np.stack([centered_diff(hess, k, h, n) for k in range(n)], axis=-1)
        perms = list(permutations(range(3)))
        acc = np.zeros_like(raw)
        for p in perms:
            acc += np.transpose(raw, tuple(range(n)) + tuple(n + q for q in p))
        t3 = acc / len(perms)
    return Derivatives(grad, hess, t3)


@dataclass
class MetricField:
    """``g = I + H^2``, its inverse and volume density ``V = sqrt(det g)`` per node."""

    g: np.ndarray
    ginv: np.ndarray
    V: np.ndarray
    eigvals: np.ndarray
    frames: np.ndarray

    @property
    def valid(self):
        return np.isfinite(self.V)


def _spectral_fields(hess):
    """Sorted eigenvalues and frames of a Hessian field, ``nan`` where undefined."""
    n = hess.shape[-1]
    lead = hess.shape[:-2]
    ok = np.all(np.isfinite(hess), axis=(-2, -1))
    vals = np.full(lead + (n,), np.nan)
    vecs = np.full(lead + (n, n), np.nan)
    if ok.any():
        v, q = _kernels.jacobi_eigh(hess[ok])
        vals[ok] = v
        vecs[ok] = q
    return vals, vecs


def induced_metric(hess):
    """Induced metric data of the gradient graph from a Hessian field ``(..., n, n)``."""
    hess = np.asarray(hess, dtype=np.float64)
    n = hess.shape[-1]
    vals, vecs = _spectral_fields(hess)
    g = np.eye(n) + hess @ hess
    w = 1.0 / (1.0 + vals**2)
    ginv = np.einsum("...ik,...k,...jk->...ij", vecs, w, vecs)
    V = np.sqrt(np.prod(1.0 + vals**2, axis=-1))
    return MetricField(g, ginv, V, vals, vecs)


def laplace_beltrami(v, metric, h):
    """Divergence-form ``(1/V) d_i (V g^{ij} d_j v)`` with centred differences.

    ``v`` is a node array (or :class:`ScalarField`), ``metric`` a
    :class:`MetricField` on the same grid. The result is valid where the
    doubly-composed stencil fits; with ``g = I`` it equals
    :func:`wide_laplacian`.
    """
    vals = v.values if isinstance(v, ScalarField) else np.asarray(v, dtype=np.float64)
    n = metric.g.shape[-1]
    dv = np.stack([centered_diff(vals, i, h, n) for i in range(n)], axis=-1)
    flux = metric.V[..., None] * np.einsum("...ij,...j->...i", metric.ginv, dv)
    div = sum(centered_diff(flux[..., i], i, h, n) for i in range(n))
    return div / metric.V


def wide_laplacian(v, h, n):
    """Flat Laplacian on the ``2h`` stencil, the composition of two centred differences."""
    out = np.full(v.shape, np.nan)
    core = (slice(2, -2),) * n
    acc = np.zeros(out[core].shape)
    for i in range(n):
        sl_p = tuple(slice(2 + 2 * (k == i), v.shape[k] - 2 + 2 * (k == i)) for k in range(n))
        sl_m = tuple(slice(2 - 2 * (k == i), v.shape[k] - 2 - 2 * (k == i)) for k in range(n))
        acc += (v[sl_p] - 2 * v[core] + v[sl_m]) / (4 * h * h)
    out[core] = acc
    return out


def _phase_at_nodes(model, grid, u_vals, grad, valid):
    x = grid.coords[valid]
    return model.evaluate(x, u_vals[valid], grad[valid])


def total_phase_gradient(model, grid, u_vals, grad, hess):
    """``d_i theta(x, u, Du) = theta_{x_i} + theta_z u_i + sum_k theta_{p_k} u_{ki}`` per node."""
    n = grid.n
    valid = np.all(np.isfinite(hess), axis=(-2, -1))
    out = np.full(grid.shape + (n,), np.nan)
    if valid.any():
        d = _phase_at_nodes(model, grid, u_vals, grad, valid)
        out[valid] = d.x + d.z[:, None] * grad[valid] + np.einsum("bki,bk->bi", hess[valid], d.p)
    return out


def mean_curvature(u, model, derivs=None):
    """Mean curvature ``H = J grad_g theta`` of the graph, as a ``2n`` vector field and magnitude.

    With ``w = g^{-1} d theta`` the tangent vector is ``(w, D^2u w)`` and ``J``
    maps it to ``(-D^2u w, w)``; ``|H|^2 = d theta . g^{-1} d theta``, which in
    a diagonalizing frame is ``sum_j (d_j theta)^2 / (1 + lambda_j^2)``.
    """
    d = derivs or differentiate(u, third=False)
    g = u.grid
    metric = induced_metric(d.hess)
    dtheta = total_phase_gradient(model, g, u.values, d.grad, d.hess)
    w = np.einsum("...ij,...j->...i", metric.ginv, dtheta)
    vec = np.concatenate([-np.einsum("...ij,...j->...i", d.hess, w), w], axis=-1)
    mag = np.sqrt(np.maximum(np.einsum("...i,...i->...", dtheta, w), 0.0))
    return vec, mag


def slope_potential(source, m):
    """``b_m = (1/m) sum_{i<=m} ln sqrt(1 + lambda_i^2)`` from sorted eigenvalues.

    ``source`` is a :class:`GraphDiagnostics` or an eigenvalue array ``(..., n)``
    sorted in descending order.
    """
    lam = source.eigvals if isinstance(source, GraphDiagnostics) else np.asarray(source, dtype=np.float64)
    n = lam.shape[-1]
    if not 1 <= m <= n:
        raise InvalidInputError(f"m must satisfy 1 <= m <= {n}")
    return 0.5 * np.log1p(lam[..., :m] ** 2).sum(axis=-1) / m


def b_lower_bound(n):
    """``ln sqrt(1 + tan^2(pi/2 - pi/n))``, the floor of ``b_1`` at critical phase for ``n >= 3``."""
    t = np.tan(np.pi / 2 - np.pi / n)
    return 0.5 * np.log1p(t * t)


@dataclass
class GraphDiagnostics:
    """Per-node geometry of the gradient graph (``nan`` outside each field's stencil domain)."""

    eigvals: np.ndarray
    frames: np.ndarray
    phase: np.ndarray
    b: np.ndarray
    grad_b_sq: np.ndarray
    lap_b: np.ndarray
    mean_curvature: np.ndarray
    h_frame: np.ndarray
    metric: MetricField
    c0: float = C0


def graph_diagnostics(u, model, derivs=None):
    """Spectrum, phase, ``b_1``, ``|grad_g b|^2``, ``Laplace_g b``, ``|H|`` and the
    second fundamental form ``h_ijk = sqrt(g^ii g^jj g^kk) u_ijk`` in the eigenframe."""
    d = derivs or differentiate(u)
    g = u.grid
    metric = induced_metric(d.hess)
    lam = metric.eigvals
    phase = np.arctan(lam).sum(axis=-1)
    b = slope_potential(lam, 1)
    db = np.stack([centered_diff(b, i, g.h, g.n) for i in range(g.n)], axis=-1)
    grad_b_sq = np.einsum("...i,...ij,...j->...", db, metric.ginv, db)
    lap_b = laplace_beltrami(b, metric, g.h)
    _, hmag = mean_curvature(u, model, d)
    Q = metric.frames
    uf = np.einsum("...ia,...jb,...kc,...ijk->...abc", Q, Q, Q, d.third)
    s = 1.0 / np.sqrt(1.0 + lam**2)
    h_frame = uf * s[..., :, None, None] * s[..., None, :, None] * s[..., None, None, :]
    return GraphDiagnostics(lam, Q, phase, b, grad_b_sq, lap_b, hmag, h_frame, metric)


@dataclass
class JacobiReport:
    """Fields entering ``Laplace_g b >= c |grad_g b|^2 - C (1 + |Du|^2)``.

    ``status`` per node: ``0`` evaluated, ``1`` skipped (eigenvalue crossing
    near the node), ``2`` not applicable (subcritical phase), ``-1`` outside the
    stencil domain. ``c_emp``/``C_emp`` are the empirical pair fitted over the
    evaluated nodes.
    """

    lap_b: np.ndarray
    grad_b_sq: np.ndarray
    rhs_scale: np.ndarray
    status: np.ndarray
    c_emp: float
    C_emp: float
    C_ref: float

    @property
    def evaluated(self):
        return self.status == 0


def _fit_constants(lap, grad2, s):
    if lap.size == 0:
        return np.inf, 0.0
    C_emp = max(0.0, float(np.max(-lap / s)))
    slack = lap + C_emp * s
    pos = grad2 > 0
    c_emp = float(np.min(slack[pos] / grad2[pos])) if pos.any() else np.inf
    return max(c_emp, 0.0), C_emp


def jacobi_diagnostic(u, model=None, gap_tol=1e-6, derivs=None):
    """Pointwise Jacobi-inequality diagnostic for ``b_1``.

    Nodes where ``lambda_1`` is within ``gap_tol (1 + |lambda_1|)`` of
    ``lambda_2`` anywhere in the stencil footprint are skipped, nodes with
    subcritical discrete phase are marked not applicable. The constants
    ``c(n)`` and ``C`` of the inequality are not computed; instead the
    smallest ``C_emp`` making ``Laplace_g b + C (1 + |Du|^2) >= 0`` and then the
    largest ``c_emp`` compatible with it are reported. ``rhs_scale`` is
    ``C_ref (1 + |Du|^2)`` with ``C_ref = 1 + nu1 + nu2`` sampled from ``model``
    over the field's own range (``1`` when no model is given).
    """
    g = u.grid
    d = derivs or differentiate(u, third=False)
    metric = induced_metric(d.hess)
    lam = metric.eigvals
    n = g.n
    b = slope_potential(lam, 1)
    db = np.stack([centered_diff(b, i, g.h, n) for i in range(n)], axis=-1)
    grad_b_sq = np.einsum("...i,...ij,...j->...", db, metric.ginv, db)
    lap_b = laplace_beltrami(b, metric, g.h)
    du2 = np.einsum("...i,...i->...", d.grad, d.grad)

    defined = np.isfinite(lap_b)
    if n >= 2:
        gap = lam[..., 0] - lam[..., 1]
        smooth = np.where(np.isfinite(gap), gap >= gap_tol * (1.0 + np.abs(lam[..., 0])), True)
        smooth = ndimage.minimum_filter(smooth.astype(np.uint8), size=7, mode="nearest").astype(bool)
    else:
        smooth = np.ones(g.shape, dtype=bool)
    phase = np.arctan(lam).sum(axis=-1)
    applicable = phase >= critical_phase(n) - CRITICALITY_TOL

    status = np.full(g.shape, -1, dtype=int)
    status[defined & g.mask] = 0
    status[defined & g.mask & ~smooth] = 1
    status[defined & g.mask & ~applicable] = 2

    C_ref = 1.0
    if model is not None and defined.any():
        ok = np.isfinite(d.grad).all(axis=-1)
        C_ref = 1.0 + _sampled_structure(model, g, u.values[ok], d.grad[ok], g.coords[ok])
    rhs_scale = C_ref * (1.0 + du2)

    ev = status == 0
    c_emp, C_emp = _fit_constants(lap_b[ev], grad_b_sq[ev], 1.0 + du2[ev])
    return JacobiReport(lap_b, grad_b_sq, rhs_scale, status, c_emp, C_emp, C_ref)


def _sampled_structure(model, grid, z, p, x):
    d = model.evaluate(x, z, p)
    vn = lambda a: np.linalg.norm(a, axis=-1)
    mn = lambda a: np.linalg.norm(a, ord=2, axis=(-2, -1))
    nu1 = max(vn(d.x).max(), np.abs(d.z).max(), vn(d.p).max())
    nu2 = max(mn(d.xx).max(), vn(d.xz).max(), mn(d.xp).max(), np.abs(d.zz).max(), vn(d.zp).max())
    return float(nu1 + nu2)


def sigma_k_derivative(hess, k):
    """``L_{sigma_k} = d sigma_k / d u_ij = sum_{j<k} (-1)^j sigma_{k-1-j} H^j`` per node."""
    n = hess.shape[-1]
    vals, _ = _spectral_fields(hess)
    sig = sigma_all(np.nan_to_num(vals))
    out = np.zeros(hess.shape)
    power = np.broadcast_to(np.eye(n), hess.shape).copy()
    for j in range(k):
        out += (-1) ** j * sig[..., k - 1 - j][..., None, None] * power
        power = power @ hess
    bad = ~np.all(np.isfinite(hess), axis=(-2, -1))
    out[bad] = np.nan
    return out, sig


def sigma_divergence_residual(u, k, derivs=None):
    """``|k sigma_k(D^2u) - div(L_{sigma_k} Du)|`` with the divergence by centred differences."""
    g = u.grid
    n = g.n
    if not 1 <= k <= n:
        raise InvalidInputError(f"k must satisfy 1 <= k <= {n}")
    d = derivs or differentiate(u, third=False)
    L, sig = sigma_k_derivative(d.hess, k)
    flux = np.einsum("...ij,...j->...i", L, d.grad)
    div = sum(centered_diff(flux[..., i], i, g.h, n) for i in range(n))
    lhs = k * sig[..., k]
    lhs = np.where(np.isfinite(div), lhs, np.nan)
    return np.abs(lhs - div)
