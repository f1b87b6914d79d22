"""Spectral embeddings (ASE, LSE and relatives), Procrustes alignment and
dimension selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg
from numpy.typing import ArrayLike, NDArray
from scipy import sparse

from .model import Adjacency, LatentPositions, as_dense

__all__ = [
    "Embedding",
    "AlignmentResult",
    "top_eigenpairs",
    "ase",
    "normalized_laplacian",
    "lse",
    "population_lse",
    "degree_scaled_lse",
    "procrustes_align",
    "select_dimension",
]

METHODS = ("ASE", "LSE", "OSE_A", "OSE_L", "DEGREE_SCALED_LSE")

# inputs up to this size use the dense symmetric driver
FULL_EIGH_MAX_N = 2000


@dataclass(frozen=True)
class Embedding:
    """An ``n x d`` estimate together with how it was produced.

    ``eigenvalues`` holds the signed eigenvalues behind the estimate, ordered
    by decreasing magnitude. ``warnings`` collects non-fatal flags such as a
    tied spectral gap or negative eigenvalues among the leading ``d``.
    """

    estimate: NDArray[np.float64]
    method: str
    eigenvalues: NDArray[np.float64]
    warnings: tuple[str, ...] = ()
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        est = np.array(self.estimate, dtype=float, copy=True)
        if est.ndim == 1:
            est = est[:, None]
        if not np.all(np.isfinite(est)):
            raise ValueError("embedding contains non-finite entries")
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")
        est.setflags(write=False)
        vals = np.array(self.eigenvalues, dtype=float, copy=True).ravel()
        vals.setflags(write=False)
        object.__setattr__(self, "estimate", est)
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "warnings", tuple(self.warnings))

    @property
    def n(self) -> int:
        return self.estimate.shape[0]

    @property
    def d(self) -> int:
        return self.estimate.shape[1]


@dataclass(frozen=True)
class AlignmentResult:
    w: NDArray[np.float64]
    aligned: NDArray[np.float64]
    residual_frobenius_sq: float


def _fix_signs(vecs: NDArray) -> NDArray:
    # make the largest-magnitude coordinate of each eigenvector positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def top_eigenpairs(M, d: int, method: str = "auto", return_next: bool = False):
    """Leading ``d`` eigenpairs of a symmetric matrix by absolute eigenvalue.

    Parameters
    ----------
    M : (n, n) array or sparse matrix
        Symmetric input.
    d : int
        Number of eigenpairs.
    method : {"auto", "full", "iterative"}
        ``"full"`` runs the dense LAPACK solver, ``"iterative"`` runs ARPACK
        on the largest-magnitude end. ``"auto"`` picks ``"full"`` for
        ``n <= 2000``.
    return_next : bool
        Also return the magnitude of the ``(d+1)``-th eigenvalue (``nan``
        when ``d == n``), used to detect ties at the cut.

    Returns
    -------
    vals : (d,) ndarray
        Signed eigenvalues ordered by decreasing magnitude.
    vecs : (n, d) ndarray
        Orthonormal eigenvectors, sign-normalised.

    Notes
    -----
    Eigenvalues of equal magnitude and opposite sign are ordered positive
    first; exact duplicates keep the solver order.
    """
    n = M.shape[0]
    if not 1 <= d <= n:
        raise ValueError(f"embedding dimension must satisfy 1 <= d <= n={n}, got {d}")
    if method == "auto":
        method = "full" if n <= FULL_EIGH_MAX_N else "iterative"
    k = min(d + 1, n)
    if method == "iterative" and k < n - 1:
        try:
            vals, vecs = scipy.sparse.linalg.eigsh(
                M.astype(float), k=k, which="LM", v0=np.ones(n) / np.sqrt(n), tol=1e-14
            )
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise np.linalg.LinAlgError(f"eigensolver did not converge: {exc}") from exc
    else:
        dense = M.toarray() if sparse.issparse(M) else np.asarray(M, dtype=float)
        if 2 * k < n:
            # the k largest magnitudes sit among the k lowest and k highest eigenvalues
            lo_vals, lo_vecs = scipy.linalg.eigh(dense, subset_by_index=[0, k - 1], driver="evr")
            hi_vals, hi_vecs = scipy.linalg.eigh(dense, subset_by_index=[n - k, n - 1], driver="evr")
            vals = np.concatenate([lo_vals, hi_vals])
            vecs = np.hstack([lo_vecs, hi_vecs])
        else:
            vals, vecs = scipy.linalg.eigh(dense)
    # on magnitude ties the positive eigenvalue comes first
    order = np.lexsort((-vals, -np.abs(vals)))
    vals, vecs = vals[order], vecs[:, order]
    nxt = abs(vals[d]) if vals.shape[0] > d else np.nan
    vals, vecs = vals[:d], _fix_signs(vecs[:, :d])
    if return_next:
        return vals, vecs, nxt
    return vals, vecs


def _check_symmetric(M) -> None:
    diff = M - M.T
    err = abs(diff).max() if sparse.issparse(M) else np.max(np.abs(diff), initial=0.0)
    if err > 1e-10:
        raise ValueError(f"input is not symmetric (max asymmetry {err:.3g})")


def _spectral_embedding(M, d: int, method_tag: str, eig_method: str = "auto") -> Embedding:
    _check_symmetric(M)
    vals, vecs, nxt = top_eigenpairs(M, d, method=eig_method, return_next=True)
    warnings = []
    if np.isfinite(nxt) and np.isclose(abs(vals[-1]), nxt, rtol=1e-10, atol=1e-12):
        warnings.append("tied spectral gap: |lambda_d| == |lambda_{d+1}|")
    if np.any(vals < 0):
        warnings.append("negative eigenvalue among the leading d; using its magnitude")
    X = vecs * np.sqrt(np.abs(vals))
    return Embedding(X, method_tag, vals, tuple(warnings))


def ase(A: Adjacency | ArrayLike, d: int, eig_method: str = "auto") -> Embedding:
    """Adjacency spectral embedding: ``[u_1 |l_1|^{1/2}, ..., u_d |l_d|^{1/2}]``."""
    M = A.entries if isinstance(A, Adjacency) else A
    if not sparse.issparse(M):
        M = np.asarray(M, dtype=float)
    return _spectral_embedding(M, d, "ASE", eig_method)


def normalized_laplacian(M: ArrayLike) -> NDArray[np.float64]:
    """``diag(M 1)^{-1/2} M diag(M 1)^{-1/2}`` for a nonnegative symmetric matrix."""
    M = as_dense(M)
    deg = M.sum(axis=1)
    bad = np.flatnonzero(deg <= 0)
    if bad.size:
        raise ValueError(f"vertex {bad[0]} has zero degree; the normalized Laplacian is undefined")
    s = 1.0 / np.sqrt(deg)
    L = s[:, None] * M * s[None, :]
    # symmetrise away rounding so downstream symmetry checks stay exact
    return 0.5 * (L + L.T)


def lse(A: Adjacency | ArrayLike, d: int, eig_method: str = "auto") -> Embedding:
    """Laplacian spectral embedding: the ASE of ``normalized_laplacian(A)``."""
    return _spectral_embedding(normalized_laplacian(A), d, "LSE", eig_method)


def population_lse(X: LatentPositions | ArrayLike) -> NDArray[np.float64]:
    """Map latent positions to ``y_i = x_i / sqrt(sum_j x_i^T x_j)``."""
    X = X.data if isinstance(X, LatentPositions) else np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    s = X @ X.sum(axis=0)
    bad = np.flatnonzero(s <= 0)
    if bad.size:
        raise ValueError(f"row sum of X X^T is nonpositive at vertex {bad[0]}")
    return X / np.sqrt(s)[:, None]


def degree_scaled_lse(A: Adjacency | ArrayLike, d: int, eig_method: str = "auto") -> Embedding:
    """LSE rows multiplied by the square root of the vertex degrees."""
    base = lse(A, d, eig_method)
    deg = as_dense(A).sum(axis=1)
    X = np.sqrt(deg)[:, None] * base.estimate
    return Embedding(X, "DEGREE_SCALED_LSE", base.eigenvalues, base.warnings)


def procrustes_align(source: ArrayLike, target: ArrayLike) -> AlignmentResult:
    """Orthogonal ``W`` minimising ``||source W - target||_F``.

    The solution is ``U V^T`` from the SVD ``source^T target = U S V^T``.
    """
    S = np.asarray(source, dtype=float)
    T = np.asarray(target, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    if T.ndim == 1:
        T = T[:, None]
    if S.shape != T.shape:
        raise ValueError(f"shape mismatch: {S.shape} vs {T.shape}")
    U, _, Vt = np.linalg.svd(S.T @ T)
    W = U @ Vt
    aligned = S @ W
    resid = float(np.sum((aligned - T) ** 2))
    return AlignmentResult(W, aligned, resid)


def _profile_loglik(values: NDArray, d: int) -> float:
    q = values.shape[0]
    first, second = values[:d], values[d:]
    # a segment with fewer than two values contributes nothing to the pooled sum
    ss = np.sum((first - first.mean()) ** 2)
    if second.size:
        ss += np.sum((second - second.mean()) ** 2)
    pooled = ss / (q - 2) if q > 2 else ss
    if pooled <= 0.0:
        # both segments constant: the likelihood is unbounded
        return np.inf
    return -0.5 * q * np.log(2 * np.pi * pooled) - ss / (2 * pooled)


def select_dimension(singular_values: ArrayLike, q: int | None = None) -> int:
    """Profile-likelihood elbow of a scree plot (two-Gaussian split).

    For each split point ``d = 1..q`` the leading ``d`` values and the rest
    are modelled as normals with separate means and a pooled variance. The
    split with the largest log-likelihood wins; ties go to the smallest ``d``.
    """
    values = np.sort(np.asarray(singular_values, dtype=float).ravel())[::-1]
    if q is None:
        q = values.shape[0]
    if q < 2:
        raise ValueError(f"need q >= 2 values, got q={q}")
    if values.shape[0] < q:
        raise ValueError(f"only {values.shape[0]} values supplied for q={q}")
    values = values[:q]
    if np.any(values < 0):
        raise ValueError("singular values must be nonnegative")
    scores = np.array([_profile_loglik(values, d) for d in range(1, q + 1)])
    best = np.max(scores)
    # relative tolerance keeps the tie-break stable under rescaling
    tol = 1e-12 * max(1.0, abs(best)) if np.isfinite(best) else 0.0
    return int(np.flatnonzero(scores >= best - tol)[0]) + 1
