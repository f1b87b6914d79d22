"""Asymptotic covariance formulas and vertex-wise confidence intervals.

Every evaluator takes an evaluation point ``x`` and a *support* describing
the latent-position distribution ``F``:

* an :class:`~rdpg_onestep.model.SbmSpec` gives the exact discrete limit
  (atoms ``nu_k`` with weights ``pi_k``);
* a :class:`~rdpg_onestep.model.LatentPositions` gives the empirical
  distribution of its rows (weights ``1/n``), i.e. the finite-``n`` versions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray
from scipy import stats

from .model import LatentPositions, SbmSpec
from .spectral import Embedding

__all__ = [
    "CovarianceReport",
    "ConfidenceIntervals",
    "g_matrix",
    "g_inverse",
    "sigma_ase",
    "sigma_lse",
    "g_lse",
    "covariance_report",
    "confidence_intervals",
]

CONDITION_LIMIT = 1e12

Support = SbmSpec | LatentPositions


def _atoms(support: Support) -> tuple[NDArray, NDArray]:
    if isinstance(support, SbmSpec):
        return support.nu, support.pi
    if isinstance(support, LatentPositions):
        n = support.n
        return support.data, np.full(n, 1.0 / n)
    arr = np.asarray(support, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr, np.full(arr.shape[0], 1.0 / arr.shape[0])


def _point(x: ArrayLike, d: int) -> NDArray:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != d:
        raise ValueError(f"evaluation point has dimension {x.shape[0]}, support has {d}")
    return x


def _sym(M: NDArray) -> NDArray:
    return 0.5 * (M + M.T)


def _spd_inverse(M: NDArray, what: str) -> NDArray:
    M = _sym(M)
    w = np.linalg.eigvalsh(M)
    if w[0] <= 0 or w[-1] / w[0] > CONDITION_LIMIT:
        raise np.linalg.LinAlgError(f"{what} is singular or ill-conditioned (eigenvalues {w})")
    c = scipy.linalg.cho_factor(M)
    return _sym(scipy.linalg.cho_solve(c, np.eye(M.shape[0])))


def _inner(x: NDArray, nu: NDArray, rho: float) -> NDArray:
    s = nu @ x
    if np.any(s <= 0) or np.any(rho * s >= 1):
        raise ValueError("x^T x_1 must lie in (0, 1/rho) over the whole support")
    return s


def g_matrix(x: ArrayLike, support: Support, rho: float = 1.0) -> NDArray[np.float64]:
    """Efficient information ``G(x) = E[x1 x1^T / (x^T x1 (1 - rho x^T x1))]``."""
    nu, w = _atoms(support)
    x = _point(x, nu.shape[1])
    s = _inner(x, nu, rho)
    c = w / (s * (1 - rho * s))
    return _sym((nu * c[:, None]).T @ nu)


def g_inverse(x: ArrayLike, support: Support, rho: float = 1.0) -> NDArray[np.float64]:
    """``G(x)^{-1}``, the covariance of the efficient (one-step) estimator."""
    return _spd_inverse(g_matrix(x, support, rho), "G(x)")


def _second_moment(nu, w):
    return _sym((nu * w[:, None]).T @ nu)


def sigma_ase(x: ArrayLike, support: Support, rho: float = 1.0) -> NDArray[np.float64]:
    """Limit covariance of ASE rows, ``D^{-1} E[x^T x1 (1 - rho x^T x1) x1 x1^T] D^{-1}``
    with ``D = E[x1 x1^T]``."""
    nu, w = _atoms(support)
    x = _point(x, nu.shape[1])
    s = _inner(x, nu, rho)
    Di = _spd_inverse(_second_moment(nu, w), "second moment matrix")
    mid = (nu * (w * s * (1 - rho * s))[:, None]).T @ nu
    return _sym(Di @ mid @ Di)


def _lse_parts(x, nu, w):
    mu = w @ nu
    mx = mu @ x
    if mx <= 0:
        raise ValueError("mu^T x must be positive")
    T = np.outer(x, mu) / (2 * mx)
    return mu, mx, T


def sigma_lse(x: ArrayLike, support: Support, rho: float = 1.0) -> NDArray[np.float64]:
    """Limit covariance of LSE rows (on the ``n``-scale)."""
    nu, w = _atoms(support)
    x = _point(x, nu.shape[1])
    s = _inner(x, nu, rho)
    mu, mx, T = _lse_parts(x, nu, w)
    mv = nu @ mu
    Dt = _second_moment(nu, w / mv)
    L = _spd_inverse(Dt, "mu-weighted second moment") - T
    mid = (nu * (w * s * (1 - rho * s) / (mx * mv**2))[:, None]).T @ nu
    return _sym(L @ mid @ L.T)


def g_lse(x: ArrayLike, support: Support, rho: float = 1.0) -> NDArray[np.float64]:
    """Limit covariance of the one-step Laplacian estimator (on the ``n``-scale)."""
    nu, w = _atoms(support)
    x = _point(x, nu.shape[1])
    _, mx, T = _lse_parts(x, nu, w)
    L = np.eye(x.shape[0]) - T
    return _sym(L @ g_inverse(x, support, rho) @ L.T / mx)


@dataclass(frozen=True)
class CovarianceReport:
    """All four limit covariances at one evaluation point."""

    point: NDArray[np.float64]
    rho: float
    sigma_ase: NDArray[np.float64]
    g_inverse: NDArray[np.float64]
    sigma_lse: NDArray[np.float64]
    g_lse: NDArray[np.float64]

    def to_dict(self) -> dict:
        return {
            "point": np.asarray(self.point).tolist(),
            "rho": float(self.rho),
            "sigma_ase": np.asarray(self.sigma_ase).tolist(),
            "g_inverse": np.asarray(self.g_inverse).tolist(),
            "sigma_lse": np.asarray(self.sigma_lse).tolist(),
            "g_lse": np.asarray(self.g_lse).tolist(),
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


def covariance_report(x: ArrayLike, support: Support, rho: float = 1.0) -> CovarianceReport:
    x = np.asarray(x, dtype=float).ravel()
    return CovarianceReport(
        point=x,
        rho=rho,
        sigma_ase=sigma_ase(x, support, rho),
        g_inverse=g_inverse(x, support, rho),
        sigma_lse=sigma_lse(x, support, rho),
        g_lse=g_lse(x, support, rho),
    )


@dataclass(frozen=True)
class ConfidenceIntervals:
    """Vertex-wise intervals ``lo <= target <= hi`` (each ``n x d``).

    ``center`` is the point estimate the intervals are built around and
    ``variance`` the plug-in asymptotic variance of each coordinate (already
    divided by the sample-size scaling). ``ellipses`` is only filled for
    ``d > 1``: per vertex ``(center, precision, chi2_quantile)`` describing the
    region ``(z - center)^T precision (z - center) <= chi2_quantile``. The
    multivariate output is an extension; only ``d = 1`` intervals have a
    published derivation.
    """

    center: NDArray[np.float64]
    lo: NDArray[np.float64]
    hi: NDArray[np.float64]
    variance: NDArray[np.float64]
    alpha: float
    method: str
    ellipses: tuple = ()

    def covers(self, truth: ArrayLike) -> NDArray[np.bool_]:
        t = np.asarray(truth, dtype=float)
        if t.ndim == 1:
            t = t[:, None]
        return (self.lo <= t) & (t <= self.hi)


def _empirical_g(x_hat: NDArray) -> NDArray:
    # G_hat(x_i) for every row i, shape (n, d, d)
    n, d = x_hat.shape
    P = x_hat @ x_hat.T
    if np.any(P <= 0) or np.any(P >= 1):
        raise ValueError("plug-in inner products x_i^T x_j leave (0, 1); variance is undefined")
    W = 1.0 / (P * (1 - P))
    outer = (x_hat[:, :, None] * x_hat[:, None, :]).reshape(n, d * d)
    return (W @ outer / n).reshape(n, d, d)


def confidence_intervals(
    embedding: Embedding, x_hat: Embedding | ArrayLike, alpha: float = 0.05
) -> ConfidenceIntervals:
    """Plug-in ``1 - alpha`` intervals for an OSE-A or OSE-L embedding.

    Parameters
    ----------
    embedding : Embedding
        ``OSE_A`` (intervals for ``x_0i``) or ``OSE_L`` (intervals for
        ``y_0i``).
    x_hat : Embedding or (n, d) array
        The OSE-A estimate used for the plug-in variance.
    alpha : float
        Miscoverage level in (0, 1).

    Notes
    -----
    For ``d = 1`` the intervals are centred at ``|x_hat_i|`` (resp.
    ``|y_hat_i|``) with half-width ``z * (n G_hat(x_hat_i))^{-1/2}`` (resp.
    ``z * (4 n^2 mu_hat x_hat_i G_hat(x_hat_i))^{-1/2}``). For ``d > 1``
    marginal intervals use the diagonal of ``G_hat^{-1} / n`` (resp. of the
    plug-in ``G_tilde / n^2``) around the unaligned estimate.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if embedding.method not in ("OSE_A", "OSE_L"):
        raise ValueError(f"intervals are defined for OSE_A or OSE_L embeddings, not {embedding.method}")
    X = x_hat.estimate if isinstance(x_hat, Embedding) else np.asarray(x_hat, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, d = X.shape
    if embedding.estimate.shape != (n, d):
        raise ValueError("embedding and x_hat shapes differ")
    z = stats.norm.ppf(1 - alpha / 2)

    if d == 1:
        X = np.abs(X)
    G = _empirical_g(X)
    if d == 1:
        g = G[:, 0, 0]
        if embedding.method == "OSE_A":
            var = 1.0 / (g * n)
        else:
            mu = X.mean()
            var = 1.0 / (4 * n**2 * mu * X[:, 0] * g)
        if np.any(~np.isfinite(var)) or np.any(var <= 0):
            raise ValueError("nonpositive plug-in variance")
        center = np.abs(embedding.estimate)
        half = z * np.sqrt(var)[:, None]
        return ConfidenceIntervals(center, center - half, center + half, var[:, None], alpha, embedding.method)

    covs = np.empty((n, d, d))
    mu = X.mean(axis=0)
    for i in range(n):
        Gi = _spd_inverse(G[i], f"plug-in G at vertex {i}")
        if embedding.method == "OSE_A":
            covs[i] = Gi / n
        else:
            mx = mu @ X[i]
            if mx <= 0:
                raise ValueError(f"nonpositive plug-in mu^T x at vertex {i}")
            L = np.eye(d) - np.outer(X[i], mu) / (2 * mx)
            covs[i] = L @ Gi @ L.T / (mx * n**2)
    var = np.einsum("ijj->ij", covs)
    if np.any(var <= 0):
        raise ValueError("nonpositive plug-in variance")
    center = np.array(embedding.estimate)
    half = z * np.sqrt(var)
    q = stats.chi2.ppf(1 - alpha, d)
    ellipses = tuple((center[i], np.linalg.inv(covs[i]), q) for i in range(n))
    return ConfidenceIntervals(center, center - half, center + half, var, alpha, embedding.method, ellipses)
