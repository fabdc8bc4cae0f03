"""Top eigenpairs of a symmetric positive matrix-free operator.

Block Lanczos with full (twice-iterated Gram-Schmidt) reorthogonalization
and thick restart.  The operator acts on grid fields; vectors are stored
flat, and the returned fields are normalized in the ``h^3``-weighted inner
product.  A block of width >= 3 starts the Krylov space so that threefold
degenerate eigenvalues are resolved without relying on round-off.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import GridSpec

__all__ = ["EigenSet", "top_eigs", "cluster_multiplicities", "SymmetryError"]

log = logging.getLogger(__name__)


class SymmetryError(ValueError):
    pass


@dataclass
class EigenSet:
    values: np.ndarray
    fields: np.ndarray  # shape (k, N, N, N)
    residuals: np.ndarray
    iterations: int
    matvecs: int
    converged: bool
    clusters: list[tuple[int, ...]]
    lambda1_history: list[float] = field(default_factory=list)


def cluster_multiplicities(values, rel_tol: float = 1e-8) -> list[tuple[int, ...]]:
    """Group sorted eigenvalues into multiplicity clusters (0-based indices).

    Neighbours join when ``|v[i] - v[i+1]| <= rel_tol * max(|v[0]|, 1)``.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    scale = rel_tol * max(abs(values[0]), 1.0)
    clusters, cur = [], [0]
    for i in range(1, values.size):
        if abs(values[i - 1] - values[i]) <= scale:
            cur.append(i)
        else:
            clusters.append(tuple(cur))
            cur = [i]
    clusters.append(tuple(cur))
    return clusters


def _check_symmetric(matvec, n, rng, trials=3, rtol=1e-8):
    for _ in range(trials):
        f = rng.standard_normal(n)
        g = rng.standard_normal(n)
        Af, Ag = matvec(f), matvec(g)
        lhs, rhs = Af @ g, f @ Ag
        scale = np.linalg.norm(Af) * np.linalg.norm(g) + np.linalg.norm(Ag) * np.linalg.norm(f)
        if abs(lhs - rhs) > rtol * scale:
            raise SymmetryError(f"operator is not symmetric: <Af,g>={lhs!r}, <f,Ag>={rhs!r}")


def _orthonormalize_block(W, V, rng):
    """Orthogonalize rows of ``W`` against rows of ``V`` and each other.

    Returns ``(C, Q, B)`` with ``W = C^T V + B^T Q`` (``B`` upper triangular);
    rows of ``Q`` that would be numerically dependent are replaced by random
    orthonormal directions and get a zero row in ``B``.
    """
    p, n = W.shape
    C = V @ W.T
    W = W - C.T @ V
    C2 = V @ W.T
    W -= C2.T @ V
    C += C2
    Q = np.empty_like(W)
    B = np.zeros((p, p))
    for i in range(p):
        w = W[i]
        ref = np.linalg.norm(w)
        for _ in range(2):
            if i:
                c = Q[:i] @ w
                w = w - c @ Q[:i]
                B[:i, i] += c
        nrm = np.linalg.norm(w)
        if nrm > 1e-10 * max(ref, 1e-300) and nrm > 0:
            Q[i] = w / nrm
            B[i, i] = nrm
            continue
        # dependent: substitute a random direction orthogonal to everything so far
        r = rng.standard_normal(n)
        for _ in range(2):
            r -= (V @ r) @ V
            if i:
                r -= (Q[:i] @ r) @ Q[:i]
        Q[i] = r / np.linalg.norm(r)
    return C, Q, B


def top_eigs(op: Callable[[np.ndarray], np.ndarray], grid: GridSpec, k: int,
             tol: float = 1e-12, max_restarts: int = 300, seed: int = 0,
             block_size: int = 3, ncv: int | None = None,
             check_symmetry: bool = True, cluster_tol: float = 1e-8) -> EigenSet:
    """Largest ``k`` eigenpairs of the symmetric operator ``op`` on ``grid`` fields.

    Converged pairs satisfy ``||K v - lam v|| <= tol * lam_1 * ||v||``;
    ``residuals`` reports that ratio (computed explicitly at the end).
    ``ncv`` is the Krylov basis size, ``min(2k + 10, 40)`` by default.
    """
    shape = grid.shape
    n = int(np.prod(shape))
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    p = max(1, min(block_size, n))
    m = ncv if ncv is not None else min(2 * k + 10, 40)
    m = min(max(m, k + 2 * p), n - p) if n > k + 2 * p else n - p
    m = max(m, k)
    keep = min(k + 4, m - p)
    keep = max(keep, k)
    rng = np.random.default_rng(seed)
    matvecs = 0

    def matvec(x):
        nonlocal matvecs
        matvecs += 1
        return np.asarray(op(x.reshape(shape)), dtype=float).ravel()

    if check_symmetry:
        _check_symmetric(matvec, n, np.random.default_rng(seed + 7919))

    V = np.empty((m + p, n))
    H = np.zeros((m + p, m + p))
    _, Q, _ = _orthonormalize_block(rng.standard_normal((p, n)), V[:0], rng)
    V[:p] = Q
    known = 0  # columns of H filled in; block V[known:known+p] awaits expansion
    history: list[float] = []
    converged = False
    restarts = 0
    while True:
        while known + p <= m:
            j0, j1 = known, known + p
            W = np.stack([matvec(V[i]) for i in range(j0, j1)])
            C, Q, B = _orthonormalize_block(W, V[:j1], rng)
            H[:j1, j0:j1] = C
            H[j1:j1 + p, j0:j1] = B
            V[j1:j1 + p] = Q
            known = j1
        T = H[:known, :known]
        T = 0.5 * (T + T.T)
        theta, Y = np.linalg.eigh(T)
        order = np.argsort(theta)[::-1]
        theta, Y = theta[order], Y[:, order]
        coupling = H[known:known + p, :known] @ Y
        est = np.linalg.norm(coupling, axis=0)
        lam1 = max(abs(theta[0]), np.finfo(float).tiny)
        history.append(float(theta[0]))
        if np.all(est[:k] <= tol * lam1):
            converged = True
            break
        if restarts >= max_restarts:
            break
        restarts += 1
        kk = min(keep, known)
        Vnew = Y[:, :kk].T @ V[:known]
        V[kk:kk + p] = V[known:known + p]
        V[:kk] = Vnew
        H[:] = 0.0
        H[np.arange(kk), np.arange(kk)] = theta[:kk]
        H[kk:kk + p, :kk] = coupling[:, :kk]
        known = kk

    vecs = Y[:, :k].T @ V[:known]
    vals = theta[:k].copy()
    res = np.empty(k)
    for i in range(k):
        Av = matvec(vecs[i])
        res[i] = np.linalg.norm(Av - vals[i] * vecs[i]) / (np.linalg.norm(vecs[i]) * lam1)
    if not converged:
        log.warning("top_eigs: %d restarts without convergence (max est. residual %.2e)",
                    restarts, est[:k].max() / lam1)
    fields = (vecs / np.sqrt(grid.cell_volume)).reshape((k,) + shape)
    return EigenSet(values=vals, fields=fields, residuals=res, iterations=restarts,
                    matvecs=matvecs, converged=converged,
                    clusters=cluster_multiplicities(vals, cluster_tol),
                    lambda1_history=history)
