"""Dirichlet solver for ``sum arctan lambda_i(D^2u) = theta(x, u, Du)``.

Damped Newton on the centred finite-difference discretization, an explicit
potential flow ``u_t = sum arctan lambda_i``, manufactured problems built
from closed-form potentials and soliton residuals.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .errors import InvalidFamilyError, InvalidInputError, SolverFailure, StabilityError
from .grid import ScalarField
from .phase import Custom, PhaseModel
from .spectral import CRITICALITY_TOL, critical_phase

__all__ = ["DirichletProblem", "SolverConfig", "SolveReport", "newton_solve",
           "flow_evolve", "self_similar_residual", "manufactured_problem",
           "ManufacturedPhase", "harmonic_extension", "discrete_operator"]


@dataclass
class SolverConfig:
    """Newton and linear-solve settings."""

    tol: float = 1e-8
    max_iter: int = 50
    backtrack: float = 0.5
    min_step: float = 1e-4
    linear_tol: float = 1e-12
    linear_maxiter: int = 5000

    def __post_init__(self):
        if not (self.tol > 0 and self.linear_tol > 0 and self.min_step > 0):
            raise InvalidInputError("tolerances and min_step must be positive")
        if not 0 < self.backtrack < 1:
            raise InvalidInputError("backtrack factor must lie in (0, 1)")
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be at least 1")


class DirichletProblem:
    """Grid, phase model, boundary values and initial guess.

    ``boundary`` is a full-grid array (or a callable on coordinates); only its
    values at non-interior nodes are used. ``exact`` optionally holds the
    closed-form solution of a manufactured problem.
    """

    def __init__(self, grid, model, boundary, initial=None, exact=None):
        if not isinstance(model, PhaseModel):
            raise InvalidInputError("model must be a PhaseModel")
        if model.dim is not None and model.dim != grid.n:
            raise InvalidInputError(f"phase dimension {model.dim} does not match grid dimension {grid.n}")
        b = grid.evaluate(boundary) if callable(boundary) else np.asarray(boundary, dtype=np.float64)
        if b.shape != grid.shape:
            raise InvalidInputError(f"boundary array shape {b.shape} does not match grid {grid.shape}")
        self.active = grid.interior(1)
        if not self.active.any():
            raise InvalidInputError("grid has no interior nodes")
        if not np.all(np.isfinite(b[~self.active])):
            raise InvalidInputError("boundary data must be finite")
        self.grid = grid
        self.model = model
        self.boundary = b
        self.exact = exact
        if initial is not None:
            init = initial.values if isinstance(initial, ScalarField) else np.asarray(initial, dtype=np.float64)
            if init.shape != grid.shape or not np.all(np.isfinite(init)):
                raise InvalidInputError("initial guess must be finite and match the grid")
            init = init.copy()
            init[~self.active] = b[~self.active]
        else:
            init = None
        self.initial = init


@dataclass
class SolveReport:
    """Outcome and measured quantities of a Newton solve."""

    converged: bool
    iterations: int
    residual: float
    history: list
    hessian_origin: float
    grad_sup: float
    osc: float
    margin_min: float
    margin_max: float
    elapsed: float = 0.0
    message: str = ""
    steps: list = field(default_factory=list)

    @property
    def subcritical(self):
        return self.margin_min < -CRITICALITY_TOL


class _Stencil:
    """Flat-index centred stencils restricted to the active nodes."""

    def __init__(self, grid, active):
        self.grid = grid
        self.n = grid.n
        self.h = grid.h
        self.nodes = np.flatnonzero(active.ravel())
        self.strides = [int(np.prod(grid.shape[i + 1:])) for i in range(grid.n)]
        pos = np.full(grid.size, -1, dtype=np.int64)
        pos[self.nodes] = np.arange(self.nodes.size)
        self.pos = pos

    def derivatives(self, flat):
        f, n, h = self.nodes, self.n, self.h
        c = flat[f]
        grad = np.empty((f.size, n))
        hess = np.empty((f.size, n, n))
        for i, si in enumerate(self.strides):
            up, dn = flat[f + si], flat[f - si]
            grad[:, i] = (up - dn) / (2 * h)
            hess[:, i, i] = (up - 2 * c + dn) / (h * h)
            for j in range(i + 1, n):
                sj = self.strides[j]
                v = (flat[f + si + sj] - flat[f + si - sj] - flat[f - si + sj] + flat[f - si - sj]) / (4 * h * h)
                hess[:, i, j] = hess[:, j, i] = v
        return grad, hess

    def jacobian(self, ginv, theta_p, theta_z):
        """Sparse linearization ``sum a_ij D_ij - theta_p . D - theta_z`` on active nodes."""
        f, n, h = self.nodes, self.n, self.h
        rows, cols, vals = [], [], []
        rid = np.arange(f.size)

        def add(offset, coef):
            col = self.pos[f + offset]
            keep = col >= 0
            rows.append(rid[keep])
            cols.append(col[keep])
            vals.append(np.broadcast_to(coef, f.shape)[keep])

        center = -theta_z.copy()
        for i, si in enumerate(self.strides):
            a = ginv[:, i, i] / (h * h)
            add(si, a - theta_p[:, i] / (2 * h))
            add(-si, a + theta_p[:, i] / (2 * h))
            center -= 2 * a
            for j in range(i + 1, n):
                sj = self.strides[j]
                b = 2 * ginv[:, i, j] / (4 * h * h)
                add(si + sj, b)
                add(si - sj, -b)
                add(-si + sj, -b)
                add(-si - sj, b)
        add(0, center)
        m = f.size
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m))


def discrete_operator(grid, values, active=None):
    """Discrete ``Du``, ``D^2u``, phase and ``g^{-1}`` at active nodes.

    Returns ``(nodes, coords, grad, hess, phase, eigvals, ginv)`` where
    ``nodes`` are flat indices.
    """
    active = grid.interior(1) if active is None else active
    st = _Stencil(grid, active)
    grad, hess = st.derivatives(np.asarray(values, dtype=np.float64).ravel())
    phase, lam, ginv = _kernels.phase_and_inverse_metric(hess)
    coords = grid.coords.reshape(-1, grid.n)[st.nodes]
    return st.nodes, coords, grad, hess, phase, lam, ginv


def _linear_solve(J, rhs, n, cfg):
    if n <= 2:
        x = spla.spsolve(J.tocsc(), rhs)
    else:
        d = J.diagonal()
        if np.any(d == 0):
            raise SolverFailure("linearization has a zero diagonal entry")
        M = spla.LinearOperator(J.shape, matvec=lambda v: v / d)
        x, info = spla.bicgstab(J, rhs, rtol=cfg.linear_tol, atol=0.0, maxiter=cfg.linear_maxiter, M=M)
        if info != 0 or not np.all(np.isfinite(x)):
            x, info = spla.gmres(J, rhs, rtol=cfg.linear_tol, atol=0.0, restart=100,
                                 maxiter=cfg.linear_maxiter, M=M)
        if info != 0 or not np.all(np.isfinite(x)):
            x = spla.spsolve(J.tocsc(), rhs)
    if not np.all(np.isfinite(x)):
        raise SolverFailure("singular linearization")
    return x


def harmonic_extension(grid, boundary, active=None):
    """Discrete harmonic function on the active nodes with the given boundary values."""
    active = grid.interior(1) if active is None else active
    st = _Stencil(grid, active)
    u = np.asarray(boundary, dtype=np.float64).copy()
    u[active] = 0.0
    flat = u.ravel()
    _, hess = st.derivatives(flat)
    r = np.trace(hess, axis1=1, axis2=2)
    m = st.nodes.size
    eye = np.broadcast_to(np.eye(grid.n), (m, grid.n, grid.n))
    J = st.jacobian(eye, np.zeros((m, grid.n)), np.zeros(m))
    flat[st.nodes] = _linear_solve(J, -r, grid.n, SolverConfig())
    return flat.reshape(grid.shape)


def _residual(st, model, flat):
    grad, hess = st.derivatives(flat)
    phase, lam, ginv = _kernels.phase_and_inverse_metric(hess)
    coords = st.grid.coords.reshape(-1, st.n)[st.nodes]
    d = model.evaluate(coords, flat[st.nodes], grad)
    return phase - d.value, phase, lam, ginv, d, grad, hess


def _measure(grid, flat, st, phase, grad, hess):
    n = grid.n
    centre = np.ravel_multi_index(grid.nearest_node(grid.center), grid.shape)
    k = st.pos[centre]
    h0 = float(np.linalg.norm(hess[k], ord=2)) if k >= 0 else float("nan")
    vals = flat.reshape(grid.shape)[grid.mask]
    margin = np.abs(phase) - critical_phase(n)
    return dict(hessian_origin=h0,
                grad_sup=float(np.sqrt((grad ** 2).sum(axis=1)).max()),
                osc=float(vals.max() - vals.min()),
                margin_min=float(margin.min()), margin_max=float(margin.max()))


def newton_solve(problem, config=None):
    """Solve the Dirichlet problem by damped Newton iteration.

    Each iteration assembles the linearization with coefficients
    ``(I + (D^2u)^2)^{-1}`` on the second-difference stencils, subtracts the
    ``theta_p`` first-difference and ``theta_z`` terms, solves for the update
    and backtracks by ``config.backtrack`` until the sup-norm residual
    decreases. Boundary nodes are never touched.

    Returns
    -------
    u : ScalarField
    report : SolveReport
        ``converged`` is False (not an exception) when the iteration limit is
        reached or no step length above ``config.min_step`` decreases the
        residual.

    Raises
    ------
    SolverFailure
        If a linearized system is singular.
    """
    cfg = config or SolverConfig()
    grid = problem.grid
    t0 = time.perf_counter()
    st = _Stencil(grid, problem.active)
    if problem.initial is not None:
        u = problem.initial.copy()
    else:
        u = harmonic_extension(grid, problem.boundary, problem.active)
    flat = u.ravel()
    R, phase, lam, ginv, d, grad, hess = _residual(st, problem.model, flat)
    rnorm = float(np.abs(R).max())
    history = [rnorm]
    steps = []
    converged = rnorm <= cfg.tol
    message = "converged" if converged else ""
    it = 0
    while not converged and it < cfg.max_iter:
        it += 1
        J = st.jacobian(ginv, d.p, d.z)
        delta = _linear_solve(J, -R, grid.n, cfg)
        t = 1.0
        while True:
            trial = flat.copy()
            trial[st.nodes] += t * delta
            out = _residual(st, problem.model, trial)
            tnorm = float(np.abs(out[0]).max())
            if np.isfinite(tnorm) and tnorm < rnorm:
                break
            t *= cfg.backtrack
            if t < cfg.min_step:
                out = None
                break
        if out is None:
            message = "line search failed to decrease the residual"
            break
        flat = trial
        R, phase, lam, ginv, d, grad, hess = out
        rnorm = tnorm
        history.append(rnorm)
        steps.append(t)
        converged = rnorm <= cfg.tol
    if not message:
        message = "converged" if converged else "iteration limit reached"
    m = _measure(grid, flat, st, phase, grad, hess)
    report = SolveReport(converged, it, rnorm, history, elapsed=time.perf_counter() - t0,
                         message=message, steps=steps, **m)
    return ScalarField(grid, flat.reshape(grid.shape)), report


def flow_evolve(u0, dt, steps, boundary=None):
    """Forward-Euler potential flow ``u_t = sum arctan lambda_i(D^2u)``.

    Parameters
    ----------
    u0 : ScalarField
    dt : float
        Time step; must satisfy ``dt <= h^2 / (2n)``.
    steps : int
    boundary : callable, optional
        ``boundary(grid, t)`` returning a full-grid array whose non-interior
        values are imposed at time ``t``. Without it the initial boundary
        values are kept.

    Returns
    -------
    list of ScalarField
        The trajectory including ``u0``.
    """
    grid = u0.grid
    limit = grid.h ** 2 / (2 * grid.n)
    if not dt > 0 or dt > limit * (1 + 1e-12):
        raise StabilityError(f"dt={dt!r} exceeds the explicit stability bound h^2/(2n)={limit!r}")
    if steps < 0:
        raise InvalidInputError("steps must be non-negative")
    active = grid.interior(1)
    st = _Stencil(grid, active)
    u = u0.values.copy()
    traj = [u0]
    for k in range(steps):
        flat = u.ravel()
        _, hess = st.derivatives(flat)
        phase, _, _ = _kernels.phase_and_inverse_metric(hess)
        new = flat.copy()
        new[st.nodes] += dt * phase
        u = new.reshape(grid.shape)
        if boundary is not None:
            b = np.asarray(boundary(grid, (k + 1) * dt), dtype=np.float64)
            u[~active] = b[~active]
        traj.append(ScalarField(grid, u.copy()))
    return traj


_SOLITONS = ("shrinker_expander", "translator", "rotator")


def self_similar_residual(u, model):
    """``|sum arctan lambda_i - theta(x, u, Du)|`` per interior node (``nan`` elsewhere).

    Only soliton phases (shrinker/expander, translator, rotator) are accepted.
    """
    if getattr(model, "family", None) not in _SOLITONS:
        raise InvalidFamilyError(f"self-similar residual needs a soliton phase, got {model.family!r}")
    grid = u.grid
    nodes, coords, grad, hess, phase, _, _ = discrete_operator(grid, u.values)
    d = model.evaluate(coords, u.values.ravel()[nodes], grad)
    out = np.full(grid.size, np.nan)
    out[nodes] = np.abs(phase - d.value)
    return out.reshape(grid.shape)


class ManufacturedPhase(Custom):
    """Phase reproducing a closed-form potential ``u*`` as an exact solution.

    ``theta(x, z, p) = F(D^2u*(x)) [+ (z - u*(x))] [+ eta (p - Du*(x)) . x]``
    with ``F`` the arctan sum. ``theta_x`` is exact (``tr(g^{-1} d_k D^2u*)``);
    the pure-``x`` part of ``theta_xx`` is a centred difference of ``theta_x``.
    """

    def __init__(self, u_star, dim, wrap="pure-x", eta=0.0, fd_step=1e-5):
        wrap = wrap.replace("_", "-").lower()
        if wrap not in ("pure-x", "z-coupled", "p-coupled"):
            raise InvalidInputError(f"unknown coupling mode {wrap!r}")
        self.u_star = u_star
        self.wrap = wrap
        self.eta = float(eta)
        self.fd_step = fd_step
        super().__init__(dim, self._func, name=f"manufactured[{wrap}]")

    def _pure(self, x):
        H = self.u_star.hess(x)
        phase, _, ginv = _kernels.phase_and_inverse_metric(H)
        tx = np.einsum("bij,bijk->bk", ginv, self.u_star.third(x))
        return phase, tx

    def _func(self, x, z, p):
        N, n = x.shape
        value, tx = self._pure(x)
        txx = np.empty((N, n, n))
        e = self.fd_step
        for k in range(n):
            xp, xm = x.copy(), x.copy()
            xp[:, k] += e
            xm[:, k] -= e
            txx[:, :, k] = (self._pure(xp)[1] - self._pure(xm)[1]) / (2 * e)
        txx = 0.5 * (txx + np.swapaxes(txx, 1, 2))
        out = {"value": value, "x": tx, "xx": txx, "z": np.zeros(N), "p": np.zeros((N, n))}
        if self.wrap == "z-coupled":
            out["value"] = value + (z - self.u_star.value(x))
            out["x"] = tx - self.u_star.grad(x)
            out["xx"] = txx - self.u_star.hess(x)
            out["z"] = np.ones(N)
        elif self.wrap == "p-coupled":
            ds = self.u_star.grad(x)
            H = self.u_star.hess(x)
            eta = self.eta
            out["value"] = value + eta * np.einsum("bi,bi->b", p - ds, x)
            out["x"] = tx + eta * ((p - ds) - np.einsum("bik,bi->bk", H, x))
            out["xx"] = txx - eta * (2 * H + np.einsum("bikl,bi->bkl", self.u_star.third(x), x))
            out["p"] = eta * x
            out["xp"] = np.broadcast_to(eta * np.eye(n), (N, n, n))
        return out


def manufactured_problem(u_star, grid, wrap="pure-x", eta=None):
    """Dirichlet problem whose exact solution is the closed-form potential ``u_star``.

    ``wrap`` selects the coupling: ``"pure-x"`` (``theta = F(D^2u*(x))``),
    ``"z-coupled"`` (adds ``z - u*(x)``, so ``theta_z = 1``) or
    ``"p-coupled"`` (adds ``eta (p - Du*(x)) . x``). For the weight ``w(x) = x``
    the default and largest allowed ``eta`` is ``0.1 / (1 + |Dw|) = 0.05``.
    """
    wrap = wrap.replace("_", "-").lower()
    eta_max = 0.1 / (1.0 + 1.0)
    if eta is None:
        eta = eta_max if wrap == "p-coupled" else 0.0
    if abs(eta) > eta_max * (1 + 1e-12):
        raise InvalidInputError(f"|eta| must not exceed {eta_max}")
    model = ManufacturedPhase(u_star, grid.n, wrap, eta)
    boundary = u_star.value(grid.coords)
    return DirichletProblem(grid, model, boundary, exact=u_star)
