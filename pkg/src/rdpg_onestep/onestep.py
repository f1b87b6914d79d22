"""One-step Newton refinement of spectral estimates.

The update for row ``i`` is a single Newton-Raphson step on the Bernoulli
log-likelihood of row ``i`` of ``A``, with every other latent position
replaced by its initial estimate::

    x_i <- x_i + F_i^{-1} s_i
    F_i = (1/n) sum_j x_j x_j^T / (p_ij (1 - p_ij))
    s_i = (1/n) sum_j (A_ij - p_ij) x_j / (p_ij (1 - p_ij))

with ``p_ij = x_i^T x_j`` taken from the initial estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .model import Adjacency, as_dense
from .spectral import Embedding, ase, degree_scaled_lse

__all__ = [
    "OneStepConfig",
    "OneStepError",
    "one_step_update",
    "ose_a",
    "ose_l",
    "mle_single_vertex",
]


class OneStepError(ArithmeticError):
    """Raised when the Fisher block of some vertex cannot be inverted safely."""

    def __init__(self, message: str, vertex: int | None = None):
        super().__init__(message)
        self.vertex = vertex


@dataclass(frozen=True)
class OneStepConfig:
    """Settings for :func:`one_step_update`.

    ``steps > 1`` re-applies the update to its own output; this is only
    justified for dense graphs. Edge probabilities implied by the current
    estimate are clipped into ``[clip_epsilon, 1 - clip_epsilon]``.
    ``include_self`` keeps the ``j = i`` term in the row sums (the default);
    turning it off gives the leave-self-out variant matching the
    single-vertex likelihood.
    """

    steps: int = 1
    clip_epsilon: float = 1e-6
    condition_limit: float = 1e12
    include_self: bool = True
    chunk_size: int = 4096

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not 0.0 < self.clip_epsilon < 0.5:
            raise ValueError(f"clip_epsilon must lie in (0, 0.5), got {self.clip_epsilon}")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")


def _update_rows(A, X, rows, cfg):
    n, d = X.shape
    # einsum reduces each row on its own, so results do not depend on how
    # rows are batched (BLAS blocking would change the last bits)
    P = np.einsum("id,jd->ij", X[rows], X)
    clipped = int(np.count_nonzero((P < cfg.clip_epsilon) | (P > 1 - cfg.clip_epsilon)))
    P = np.clip(P, cfg.clip_epsilon, 1 - cfg.clip_epsilon)
    W = 1.0 / (P * (1.0 - P))
    if not cfg.include_self:
        W[np.arange(len(rows)), rows] = 0.0
    R = (A[rows] - P) * W
    score = np.einsum("ij,jk->ik", R, X) / n
    outer = (X[:, :, None] * X[:, None, :]).reshape(n, d * d)
    fisher = (np.einsum("ij,jk->ik", W, outer) / n).reshape(len(rows), d, d)
    if not np.all(np.isfinite(fisher)) or not np.all(np.isfinite(score)):
        bad = rows[np.flatnonzero(~np.all(np.isfinite(fisher.reshape(len(rows), -1)), axis=1))]
        raise OneStepError("non-finite Fisher block", int(bad[0]) if bad.size else None)
    eig = np.linalg.eigvalsh(fisher)
    lo, hi = eig[:, 0], eig[:, -1]
    bad = np.flatnonzero(lo <= 0)
    if bad.size:
        v = int(rows[bad[0]])
        raise OneStepError(f"Fisher block of vertex {v} is not positive definite", v)
    cond = hi / lo
    bad = np.flatnonzero(cond > cfg.condition_limit)
    if bad.size:
        v = int(rows[bad[0]])
        raise OneStepError(
            f"Fisher block of vertex {v} has condition number {cond[bad[0]]:.3g}"
            f" > {cfg.condition_limit:.3g}",
            v,
        )
    if d == 1:
        step = score / fisher[:, :, 0]
    else:
        L = np.linalg.cholesky(fisher)
        half = np.linalg.solve(L, score[:, :, None])
        step = np.linalg.solve(np.swapaxes(L, 1, 2), half)[:, :, 0]
    return X[rows] + step, clipped


def _one_step(A, X, cfg: OneStepConfig, rows=None):
    A = as_dense(A)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"adjacency shape {A.shape} does not match {n} estimated rows")
    if rows is not None:
        if cfg.steps != 1:
            raise ValueError("updating a subset of rows is only defined for steps=1")
        rows = np.atleast_1d(np.asarray(rows, dtype=np.int64))
        if rows.size and (rows.min() < 0 or rows.max() >= n):
            raise ValueError("row index out of range")
        out, clipped = _update_rows(A, X, rows, cfg)
        if not np.all(np.isfinite(out)):
            raise OneStepError("one-step update produced non-finite values")
        return out, clipped
    clipped_total = 0
    for _ in range(cfg.steps):
        out = np.empty_like(X)
        for start in range(0, n, cfg.chunk_size):
            rows = np.arange(start, min(start + cfg.chunk_size, n))
            out[rows], clipped = _update_rows(A, X, rows, cfg)
            clipped_total += clipped
        if not np.all(np.isfinite(out)):
            raise OneStepError("one-step update produced non-finite values")
        X = out
    return X, clipped_total


def one_step_update(
    A: Adjacency | ArrayLike,
    x_tilde: ArrayLike,
    cfg: OneStepConfig | None = None,
    rows: ArrayLike | None = None,
) -> NDArray[np.float64]:
    """Apply the one-step (or ``cfg.steps``-step) Newton update to ``x_tilde``.

    Parameters
    ----------
    A : Adjacency or (n, n) array
        Observed adjacency matrix.
    x_tilde : (n, d) array
        Initial estimate, for instance the ASE.
    cfg : OneStepConfig, optional
    rows : array of int, optional
        Update only these rows (single step only). Rows are independent, so
        this gives the same values as the corresponding rows of the full
        update.

    Returns
    -------
    (n, d) ndarray, or (len(rows), d) when ``rows`` is given
        Updated estimate.

    Raises
    ------
    OneStepError
        If some Fisher block is indefinite or its condition number exceeds
        ``cfg.condition_limit``; ``err.vertex`` names the offending row.
    """
    out, _ = _one_step(A, x_tilde, cfg or OneStepConfig(), rows)
    return out


def ose_a(
    A: Adjacency | ArrayLike,
    d: int,
    cfg: OneStepConfig | None = None,
    init: str = "ASE",
) -> Embedding:
    """One-step estimator of the latent positions.

    ``init`` is ``"ASE"`` or ``"DEGREE_SCALED_LSE"``; both initialisers are
    valid starting points for the update.
    """
    cfg = cfg or OneStepConfig()
    init_key = init.upper()
    if init_key == "ASE":
        start = ase(A, d)
    elif init_key in ("DEGREE_SCALED_LSE", "LSE"):
        start = degree_scaled_lse(A, d)
    else:
        raise ValueError(f"unknown initializer {init!r}")
    X, clipped = _one_step(A, start.estimate, cfg)
    warnings = list(start.warnings)
    if clipped:
        warnings.append(f"clipped {clipped} edge probabilities into [eps, 1 - eps]")
    info = {"init": start.method, "init_estimate": start.estimate, "clipped": clipped, "steps": cfg.steps}
    return Embedding(X, "OSE_A", start.eigenvalues, tuple(warnings), info)


def _normalize_by_init(x_hat: NDArray, x_tilde: NDArray) -> NDArray:
    s = x_hat @ x_tilde.sum(axis=0)
    bad = np.flatnonzero(s <= 0)
    if bad.size:
        raise OneStepError(f"nonpositive normalizer sum_j x_hat_i^T x_tilde_j at vertex {bad[0]}", int(bad[0]))
    return x_hat / np.sqrt(s)[:, None]


def ose_l(
    A: Adjacency | ArrayLike,
    d: int,
    cfg: OneStepConfig | None = None,
    init: str = "ASE",
    x_hat: Embedding | None = None,
) -> Embedding:
    """One-step estimator of the population Laplacian embedding.

    Returns ``diag(X_hat X_tilde^T 1)^{-1/2} X_hat`` where ``X_hat`` is the
    one-step estimate and ``X_tilde`` its initialiser. A precomputed
    ``OSE_A`` embedding may be passed as ``x_hat`` to avoid recomputation.
    """
    if x_hat is None:
        x_hat = ose_a(A, d, cfg, init=init)
    if x_hat.method != "OSE_A" or "init_estimate" not in x_hat.info:
        raise ValueError("x_hat must be an OSE_A embedding produced by ose_a")
    Y = _normalize_by_init(x_hat.estimate, x_hat.info["init_estimate"])
    return Embedding(Y, "OSE_L", x_hat.eigenvalues, x_hat.warnings, dict(x_hat.info))


def _loglik_parts(x, a, Xo):
    p = Xo @ x
    r = a / p - (1 - a) / (1 - p)
    grad = Xo.T @ r
    w = a / p**2 + (1 - a) / (1 - p) ** 2
    hess = -(Xo * w[:, None]).T @ Xo
    ll = np.sum(a * np.log(p) + (1 - a) * np.log1p(-p))
    return ll, grad, hess


def _max_feasible_step(x, step, Xo, lo, hi):
    p, dp = Xo @ x, Xo @ step
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(dp > 0, (hi - p) / dp, np.inf)
        down = np.where(dp < 0, (lo - p) / dp, np.inf)
    return float(min(1.0, np.min(up, initial=np.inf), np.min(down, initial=np.inf)))


def mle_single_vertex(
    A: Adjacency | ArrayLike,
    i: int,
    x_others: ArrayLike,
    delta: float = 1e-3,
    x0: ArrayLike | None = None,
    tol: float = 1e-9,
    max_iter: int = 200,
) -> NDArray[np.float64]:
    """Maximum likelihood estimate of one latent position, the others known.

    Maximises ``sum_{j != i} A_ij log(x^T x_j) + (1 - A_ij) log(1 - x^T x_j)``
    subject to ``x^T x_j in [delta, 1 - delta]`` using a damped Newton
    iteration that truncates steps at the constraint boundary and freezes
    directions blocked by active constraints.

    ``x_others`` holds the ``n - 1`` known rows in vertex order with row
    ``i`` removed. Convergence means the gradient, projected away from the
    active constraints, has norm below ``tol``.
    """
    A = as_dense(A)
    Xo = np.asarray(x_others, dtype=float)
    if Xo.ndim == 1:
        Xo = Xo[:, None]
    n = A.shape[0]
    if Xo.shape[0] != n - 1:
        raise ValueError(f"expected {n - 1} known rows, got {Xo.shape[0]}")
    a = np.delete(A[i], i)
    lo, hi = delta, 1 - delta
    d = Xo.shape[1]

    def feasible(x):
        p = Xo @ x
        return bool(np.all(p >= lo - 1e-15) and np.all(p <= hi + 1e-15))

    if x0 is None:
        x = np.linalg.lstsq(Xo, a, rcond=None)[0]
        if not feasible(x):
            m = Xo.mean(axis=0)
            pm = Xo @ m
            x = m * (0.5 / np.median(pm))
            if not feasible(x):
                x = m * (np.sqrt(lo * hi) / np.sqrt(pm.min() * pm.max()))
    else:
        x = np.asarray(x0, dtype=float).ravel().copy()
    if not feasible(x):
        raise ValueError("no feasible starting point: x^T x_j cannot be placed in [delta, 1 - delta]")

    for _ in range(max_iter):
        ll, g, H = _loglik_parts(x, a, Xo)
        p = Xo @ x
        # constraints currently at a bound whose gradient pushes outward
        at_hi = (p >= hi - 1e-12) & (Xo @ g > 0)
        at_lo = (p <= lo + 1e-12) & (Xo @ g < 0)
        active = Xo[at_hi | at_lo]
        if active.shape[0]:
            Q = np.linalg.svd(active, full_matrices=True)[2]
            rank = int(np.sum(np.linalg.svd(active, compute_uv=False) > 1e-12))
            Z = Q[rank:].T
        else:
            Z = np.eye(d)
        gz = Z.T @ g
        if Z.shape[1] == 0 or np.linalg.norm(gz) < tol:
            return x
        Hz = Z.T @ H @ Z
        try:
            dz = np.linalg.solve(-Hz, gz)
        except np.linalg.LinAlgError:
            dz = gz
        if gz @ dz <= 0:
            dz = gz
        step = Z @ dz
        t = _max_feasible_step(x, step, Xo, lo, hi)
        while t > 1e-16:
            cand = x + t * step
            if _loglik_parts(cand, a, Xo)[0] >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        else:
            return x
        x = x + t * step
        # pin coordinates that landed a hair outside because of rounding
        p = Xo @ x
        if np.any(p < lo) or np.any(p > hi):
            x = x * min(1.0, hi / p.max()) if p.max() > hi else x
    raise RuntimeError(f"single-vertex MLE did not converge in {max_iter} iterations")
