"""Clustering evaluation: Rand index, an EM Gaussian-mixture clusterer and
aligned squared-error metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp

from .model import make_rng
from .spectral import procrustes_align

__all__ = ["Partition", "GmmFit", "rand_index", "gmm_cluster", "gmm_fit", "aligned_sse"]


@dataclass(frozen=True)
class Partition:
    """Cluster labels ``0..K-1``, one per vertex."""

    labels: NDArray[np.int64]

    def __post_init__(self):
        lab = np.array(self.labels, copy=True).ravel()
        if lab.size and not np.issubdtype(lab.dtype, np.integer):
            if not np.all(lab == np.round(lab)):
                raise ValueError("labels must be integers")
            lab = lab.astype(np.int64)
        if lab.size and lab.min() < 0:
            raise ValueError("labels must be nonnegative")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def k(self) -> int:
        return np.unique(self.labels).size


def _labels(c) -> NDArray:
    return c.labels if isinstance(c, Partition) else Partition(c).labels


def rand_index(c1: Partition | ArrayLike, c2: Partition | ArrayLike) -> float:
    """Fraction of vertex pairs on which two partitions agree.

    Computed from the contingency table in ``O(n + K1 K2)``.
    """
    a, b = _labels(c1), _labels(c2)
    if a.shape != b.shape:
        raise ValueError(f"partitions have different lengths {a.size} and {b.size}")
    n = a.size
    if n < 2:
        raise ValueError("the Rand index needs at least two vertices")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)

    def pairs(m):
        return int(np.sum(m * (m - 1) // 2))

    total = n * (n - 1) // 2
    same_both = pairs(table)
    same_a = pairs(table.sum(axis=1))
    same_b = pairs(table.sum(axis=0))
    diff_both = total - same_a - same_b + same_both
    return (same_both + diff_both) / total


@dataclass(frozen=True)
class GmmFit:
    """Winning EM run: parameters, labels and the per-iteration log-likelihood."""

    labels: NDArray[np.int64]
    weights: NDArray[np.float64]
    means: NDArray[np.float64]
    covariances: NDArray[np.float64]
    loglik: float
    history: NDArray[np.float64] = field(repr=False)
    restart: int = 0
    converged: bool = True
    rescues: int = 0


COV_FLOOR = 1e-8
EM_TOL = 1e-8
EM_MAX_ITER = 500


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def _log_gauss(X, means, covs):
    n, d = X.shape
    k = means.shape[0]
    out = np.empty((n, k))
    for j in range(k):
        L = np.linalg.cholesky(covs[j])
        z = np.linalg.solve(L, (X - means[j]).T)
        out[:, j] = -0.5 * np.sum(z**2, axis=0) - np.sum(np.log(np.diag(L))) - 0.5 * d * np.log(2 * np.pi)
    return out


def _m_step(X, resp):
    n, d = X.shape
    nk = resp.sum(axis=0)
    weights = nk / n
    means = (resp.T @ X) / nk[:, None]
    covs = np.empty((resp.shape[1], d, d))
    for j in range(resp.shape[1]):
        diff = X - means[j]
        covs[j] = (resp[:, j, None] * diff).T @ diff / nk[j] + COV_FLOOR * np.eye(d)
    return weights, means, covs


def _em_run(X, k, rng):
    n, d = X.shape
    centers = _kmeanspp(X, k, rng)
    hard = np.argmin(((X[:, None, :] - centers[None]) ** 2).sum(axis=2), axis=1)
    resp = np.zeros((n, k))
    resp[np.arange(n), hard] = 1.0
    history = []
    rescues = 0
    converged = False
    prev = -np.inf
    for _ in range(EM_MAX_ITER):
        nk = resp.sum(axis=0)
        empty = np.flatnonzero(nk < 1e-10 * n)
        if empty.size:
            # reseed each empty component at the worst-explained point
            for j in empty:
                owner = np.argmin(resp.max(axis=1))
                resp[owner] = 0.0
                resp[owner, j] = 1.0
                rescues += 1
            prev = -np.inf
        weights, means, covs = _m_step(X, resp)
        logp = _log_gauss(X, means, covs) + np.log(weights)
        norm = logsumexp(logp, axis=1)
        ll = float(norm.sum())
        history.append(ll)
        resp = np.exp(logp - norm[:, None])
        if np.isfinite(prev) and abs(ll - prev) <= EM_TOL * abs(ll):
            converged = True
            break
        prev = ll
    weights, means, covs = _m_step(X, resp)
    return resp, weights, means, covs, history, converged, rescues


def gmm_fit(points: ArrayLike, k: int, seed: int = 0, restarts: int = 20) -> GmmFit:
    """EM for a ``k``-component full-covariance Gaussian mixture.

    Each restart is initialised by k-means++ seeding (restart ``r`` uses the
    stream ``(seed, r)``); the run with the largest final log-likelihood
    wins, ties going to the lower restart index. ``1e-8 I`` is added to every
    covariance at each M-step. EM stops when the relative log-likelihood
    change drops below ``1e-8`` or after 500 iterations.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, d = X.shape
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if k > 1 and np.all(X == X[0]):
        raise ValueError("all points are identical; cannot fit more than one component")
    best = None
    for r in range(restarts):
        resp, w, m, c, hist, conv, resc = _em_run(X, k, make_rng(seed, r))
        if best is None or hist[-1] > best.loglik:
            best = GmmFit(
                labels=np.argmax(resp, axis=1),
                weights=w,
                means=m,
                covariances=c,
                loglik=hist[-1],
                history=np.array(hist),
                restart=r,
                converged=conv,
                rescues=resc,
            )
    return best


def gmm_cluster(points: ArrayLike, k: int, seed: int = 0, restarts: int = 20) -> Partition:
    """Hard cluster labels from :func:`gmm_fit`."""
    return Partition(gmm_fit(points, k, seed, restarts).labels)


def aligned_sse(estimate: ArrayLike, target: ArrayLike) -> float:
    """``min_W ||estimate W - target||_F^2`` over orthogonal ``W``."""
    return procrustes_align(estimate, target).residual_frobenius_sq
