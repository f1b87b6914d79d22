"""Chernoff information between Gaussians and the rho* clustering criteria."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize

from .covariance import g_inverse, g_lse, sigma_ase, sigma_lse
from .model import SbmSpec

__all__ = [
    "ChernoffResult",
    "chernoff_gaussian",
    "rho_star",
    "chernoff_ratio_grid",
    "two_block_rank_one",
    "three_block_rank_two",
    "KINDS",
]

KINDS = ("ASE", "LSE", "OSE_A", "OSE_L")
GRID_POINTS = 1001


@dataclass(frozen=True)
class ChernoffResult:
    value: float
    t_star: float
    method: str  # CLOSED_FORM or GRID_REFINED


def _check_spd(V: NDArray, name: str) -> NDArray:
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[0] != V.shape[1] or not np.allclose(V, V.T, rtol=1e-10, atol=1e-12):
        raise ValueError(f"{name} must be a symmetric square matrix")
    if np.linalg.eigvalsh(V)[0] <= 0:
        raise ValueError(f"{name} must be positive definite")
    return 0.5 * (V + V.T)


def _logdet(V):
    sign, val = np.linalg.slogdet(V)
    return val if sign > 0 else -np.inf


def _maximize_on_unit_interval(f: Callable[[float], float]) -> tuple[float, float]:
    # dense grid first (the objective need not be concave), then refine locally
    grid = np.linspace(0.0, 1.0, GRID_POINTS)
    vals = np.array([f(t) for t in grid])
    k = int(np.argmax(vals))
    h = grid[1] - grid[0]
    lo, hi = max(0.0, grid[k] - h), min(1.0, grid[k] + h)
    res = optimize.minimize_scalar(
        lambda t: -f(t), bounds=(lo, hi), method="bounded", options={"xatol": 1e-9}
    )
    if -res.fun >= vals[k]:
        return float(res.x), float(-res.fun)
    return float(grid[k]), float(vals[k])


def chernoff_gaussian(
    mu1: ArrayLike, v1: ArrayLike, mu2: ArrayLike, v2: ArrayLike, log_det: bool = True
) -> ChernoffResult:
    """Chernoff information between ``N(mu1, v1)`` and ``N(mu2, v2)``.

    Maximises over ``t`` in ``[0, 1]``::

        t (1 - t) / 2 * delta^T V_t^{-1} delta
            + 1/2 * log(|V_t| / (|V1|^t |V2|^(1 - t)))

    with ``V_t = t V1 + (1 - t) V2``. ``log_det=False`` drops the
    determinant term, which is the form used by the rho* criteria.
    """
    m1 = np.atleast_1d(np.asarray(mu1, dtype=float))
    m2 = np.atleast_1d(np.asarray(mu2, dtype=float))
    V1, V2 = _check_spd(v1, "v1"), _check_spd(v2, "v2")
    if not (m1.shape == m2.shape and V1.shape == V2.shape == (m1.size, m1.size)):
        raise ValueError("mean and covariance dimensions disagree")
    delta = m1 - m2
    if np.allclose(V1, V2, rtol=1e-14, atol=0.0):
        # equal covariances: symmetric objective peaks at t = 1/2
        return ChernoffResult(float(delta @ np.linalg.solve(V1, delta)) / 8.0, 0.5, "CLOSED_FORM")
    l1, l2 = _logdet(V1), _logdet(V2)

    def objective(t):
        Vt = t * V1 + (1 - t) * V2
        val = 0.5 * t * (1 - t) * float(delta @ np.linalg.solve(Vt, delta))
        if log_det:
            val += 0.5 * (_logdet(Vt) - t * l1 - (1 - t) * l2)
        return val

    t, value = _maximize_on_unit_interval(objective)
    return ChernoffResult(max(value, 0.0), t, "GRID_REFINED")


def _block_laws(spec: SbmSpec, n: int, kind: str):
    nu, pi, rho = spec.nu, spec.pi, spec.rho
    if kind in ("ASE", "OSE_A"):
        cov = sigma_ase if kind == "ASE" else g_inverse
        means = nu
        covs = [cov(v, spec, rho) for v in nu]
        scale = float(n)
    elif kind in ("LSE", "OSE_L"):
        cov = sigma_lse if kind == "LSE" else g_lse
        means = nu / np.sqrt(n * (nu @ (pi @ nu)))[:, None]
        covs = [cov(v, spec, rho) for v in nu]
        scale = float(n) ** 2
    else:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    return means, covs, scale


def rho_star(spec: SbmSpec, n: int, kind: str, full_chernoff: bool = False) -> float:
    """Minimum pairwise Chernoff-type separation of the block limit laws.

    For ``kind`` in ``ASE``/``OSE_A`` the block means are ``nu_k`` and the
    covariances ``Sigma(nu_k) / n`` resp. ``G(nu_k)^{-1} / n``; for
    ``LSE``/``OSE_L`` the means are ``y*_k = nu_k (sum_l n pi_l nu_k^T nu_l)^{-1/2}``
    and the covariances ``Sigma_tilde(nu_k) / n^2`` resp.
    ``G_tilde(nu_k) / n^2``. By default the log-determinant term is omitted;
    ``full_chernoff=True`` keeps it.
    """
    if spec.K < 2:
        raise ValueError("rho* needs at least two blocks")
    if n < 1:
        raise ValueError("n must be positive")
    means, covs, scale = _block_laws(spec, n, kind)
    best = np.inf
    for k, l in combinations(range(spec.K), 2):
        res = chernoff_gaussian(means[k], covs[k] / scale, means[l], covs[l] / scale, log_det=full_chernoff)
        best = min(best, res.value)
    return float(best)


def two_block_rank_one(p: float, q: float, pi: Iterable[float] = (0.6, 0.4), rho: float = 1.0) -> SbmSpec:
    """Rank-one two-block model with ``B = [[p^2, pq], [pq, q^2]]``."""
    return SbmSpec(nu=[[p], [q]], pi=list(pi), rho=rho)


def three_block_rank_two(
    p: float, q: float, pi: Iterable[float] = (0.8, 0.1, 0.1), rho: float = 1.0
) -> SbmSpec:
    """Rank-two three-block model with ``nu = (q, q), (q, p), (p, q)``."""
    return SbmSpec(nu=[[q, q], [q, p], [p, q]], pi=list(pi), rho=rho)


def chernoff_ratio_grid(
    family: Callable[[float, float], SbmSpec],
    p_values: ArrayLike,
    r_values: ArrayLike,
    kinds_pair: tuple[str, str],
    n: int = 1000,
    full_chernoff: bool = False,
) -> NDArray[np.float64]:
    """Table of ``rho*_{kinds_pair[0]} / rho*_{kinds_pair[1]}`` over a grid.

    ``family(p, r)`` builds the model for one grid cell. Cells where the
    model is invalid (some block probability outside (0, 1)) are reported
    as ``nan``. Returns an array with columns ``(p, r, ratio)``.
    """
    num, den = kinds_pair
    rows = []
    for p in np.asarray(p_values, dtype=float):
        for r in np.asarray(r_values, dtype=float):
            try:
                spec = family(float(p), float(r))
            except ValueError:
                rows.append((p, r, np.nan))
                continue
            if num == den:
                rows.append((p, r, 1.0))
                continue
            a = rho_star(spec, n, num, full_chernoff)
            b = rho_star(spec, n, den, full_chernoff)
            rows.append((p, r, a / b))
    return np.array(rows, dtype=float).reshape(-1, 3)
