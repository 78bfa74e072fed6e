"""Pure numpy implementation of the batched kernels.

Every matrix in the batch is rotated simultaneously, one (p, q) pair at a
time, so the Python-level loop runs over pairs and sweeps only.
"""

import numpy as np

MAX_SWEEPS = 60
_OFF_TOL = 1e-15


def _sort_descending(vals, vecs):
    # stable on -vals keeps equal eigenvalues in diagonal order
    order = np.argsort(-vals, axis=1, kind="stable")
    vals = np.take_along_axis(vals, order, axis=1)
    vecs = np.take_along_axis(vecs, order[:, None, :], axis=2)
    return vals, vecs


def jacobi_eigh(mats):
    """Eigen-decompose a stack of symmetric matrices by cyclic Jacobi sweeps.

    Parameters
    ----------
    mats : ndarray, shape (N, n, n)
        Symmetric matrices. Only the values are read; the input is not modified.

    Returns
    -------
    vals : ndarray, shape (N, n)
        Eigenvalues sorted in descending order.
    vecs : ndarray, shape (N, n, n)
        Orthonormal eigenvectors stored as columns, matching ``vals``.
    """
    a = np.array(mats, dtype=np.float64, copy=True)
    nb, n, _ = a.shape
    v = np.broadcast_to(np.eye(n), (nb, n, n)).copy()
    if n == 1 or nb == 0:
        return _sort_descending(a[:, np.arange(n), np.arange(n)].copy(), v)

    fro = np.sqrt(np.einsum("bij,bij->b", a, a))
    iu = np.triu_indices(n, 1)
    for _ in range(MAX_SWEEPS):
        off = np.sqrt(2.0 * np.sum(a[:, iu[0], iu[1]] ** 2, axis=1))
        active = off > _OFF_TOL * fro
        if not active.any():
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                rot = active & (apq != 0.0)
                if not rot.any():
                    continue
                idx = np.nonzero(rot)[0]
                apq = apq[idx]
                # theta may overflow to inf for tiny apq; t -> 0 is then exact
                with np.errstate(over="ignore", divide="ignore"):
                    theta = (a[idx, q, q] - a[idx, p, p]) / (2.0 * apq)
                    t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
                t[theta == 0.0] = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                cc = c[:, None]
                ss = s[:, None]

                sub = a[idx]
                colp = sub[:, :, p].copy()
                colq = sub[:, :, q].copy()
                sub[:, :, p] = cc * colp - ss * colq
                sub[:, :, q] = ss * colp + cc * colq
                rowp = sub[:, p, :].copy()
                rowq = sub[:, q, :].copy()
                sub[:, p, :] = cc * rowp - ss * rowq
                sub[:, q, :] = ss * rowp + cc * rowq
                sub[:, p, q] = 0.0
                sub[:, q, p] = 0.0
                a[idx] = sub

                vs = v[idx]
                vp = vs[:, :, p].copy()
                vq = vs[:, :, q].copy()
                vs[:, :, p] = cc * vp - ss * vq
                vs[:, :, q] = ss * vp + cc * vq
                v[idx] = vs

    vals = a[:, np.arange(n), np.arange(n)].copy()
    return _sort_descending(vals, v)


def phase_and_inverse_metric(mats):
    """Lagrangian phase, eigenvalues and ``(I + H^2)^{-1}`` for a stack of Hessians.

    Returns
    -------
    phase : ndarray, shape (N,)
    vals : ndarray, shape (N, n)
    ginv : ndarray, shape (N, n, n)
    """
    vals, vecs = jacobi_eigh(mats)
    phase = np.arctan(vals).sum(axis=1)
    w = 1.0 / (1.0 + vals * vals)
    ginv = np.einsum("bik,bk,bjk->bij", vecs, w, vecs)
    return phase, vals, ginv
