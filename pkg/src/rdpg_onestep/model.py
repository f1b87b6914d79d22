"""Random dot product graph model: latent positions, SBM specs and samplers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import sparse

__all__ = [
    "Adjacency",
    "LatentPositions",
    "SbmSpec",
    "make_rng",
    "sample_rdpg",
    "sbm_assignment",
    "sbm_to_latent",
    "sine_curve_latent",
    "THREE_BLOCK_SBM",
]

# expected edge density below which the sampler stores the graph sparsely
SPARSE_DENSITY_THRESHOLD = 0.05


def make_rng(seed: int, replicate: int = 0) -> np.random.Generator:
    """Counter-based generator keyed on ``(seed, replicate)``.

    Replicate streams are independent of each other and of the order in
    which they are requested, so Monte Carlo runs can be split freely.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(replicate)])))


@dataclass(frozen=True)
class LatentPositions:
    """An ``n x d`` latent position matrix with an optional sparsity factor."""

    data: NDArray[np.float64]
    rho: float = 1.0

    def __post_init__(self):
        arr = np.array(self.data, dtype=float, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ValueError(f"latent positions must be 2-D, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def is_valid(self) -> bool:
        """True when every row has positive entries and norm below one.

        Rows passing this check automatically have pairwise inner products
        in (0, 1).
        """
        X = self.data
        return bool(np.all(X > 0) and np.all(np.linalg.norm(X, axis=1) < 1))

    def validate(self) -> "LatentPositions":
        if not self.is_valid():
            raise ValueError("latent positions leave the admissible set (positive entries, norm < 1)")
        return self

    def gram(self) -> NDArray[np.float64]:
        return self.data @ self.data.T


@dataclass(frozen=True)
class SbmSpec:
    """Stochastic block model with positive semidefinite block matrix ``nu nu^T``.

    Parameters
    ----------
    nu : (K, d) array_like
        Block latent vectors, one per row.
    pi : (K,) array_like
        Block probabilities; positive and summing to one.
    rho : float
        Sparsity factor in (0, 1].
    """

    nu: NDArray[np.float64]
    pi: NDArray[np.float64]
    rho: float = 1.0

    def __post_init__(self):
        nu = np.array(self.nu, dtype=float, copy=True)
        if nu.ndim == 1:
            nu = nu[:, None]
        pi = np.array(self.pi, dtype=float, copy=True).ravel()
        if nu.ndim != 2 or nu.shape[0] != pi.shape[0]:
            raise ValueError(f"nu has {nu.shape[0]} rows but pi has {pi.shape[0]} entries")
        if np.any(pi <= 0):
            raise ValueError("all block probabilities must be positive")
        if abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError(f"block probabilities must sum to 1, got {pi.sum()!r}")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        B = self.rho * nu @ nu.T
        if np.any(B <= 0) or np.any(B >= 1):
            raise ValueError("scaled block probabilities rho * nu nu^T must lie in (0, 1)")
        nu.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "pi", pi)

    @property
    def K(self) -> int:
        return self.nu.shape[0]

    @property
    def d(self) -> int:
        return self.nu.shape[1]

    @property
    def block_matrix(self) -> NDArray[np.float64]:
        return self.nu @ self.nu.T

    def to_dict(self) -> dict:
        return {"nu": self.nu.tolist(), "pi": self.pi.tolist(), "rho": float(self.rho)}

    @classmethod
    def from_dict(cls, obj: dict) -> "SbmSpec":
        return cls(nu=obj["nu"], pi=obj["pi"], rho=obj.get("rho", 1.0))

    @classmethod
    def from_json(cls, path: str | Path) -> "SbmSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def latent_positions(self, n: int) -> LatentPositions:
        return sbm_to_latent(self, sbm_assignment(self, n))


# three-block SBM used throughout the simulations
THREE_BLOCK_SBM = SbmSpec(nu=[[0.3, 0.3], [0.3, 0.6], [0.6, 0.3]], pi=[0.3, 0.3, 0.4])


@dataclass(frozen=True)
class Adjacency:
    """Symmetric hollow binary adjacency matrix, stored dense or as CSR."""

    entries: NDArray | sparse.csr_matrix
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        M = self.entries
        if sparse.issparse(M):
            M = sparse.csr_matrix(M, dtype=float)
            if M.shape[0] != M.shape[1]:
                raise ValueError(f"adjacency must be square, got {M.shape}")
            if (M != M.T).nnz or M.diagonal().any():
                raise ValueError("adjacency must be symmetric and hollow")
            if M.nnz and not np.all(M.data == 1):
                raise ValueError("adjacency entries must be 0 or 1")
        else:
            M = np.array(M, dtype=float, copy=True)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise ValueError(f"adjacency must be square, got {M.shape}")
            if not np.array_equal(M, M.T) or np.any(np.diag(M) != 0):
                raise ValueError("adjacency must be symmetric and hollow")
            if not np.all((M == 0) | (M == 1)):
                raise ValueError("adjacency entries must be 0 or 1")
            M.setflags(write=False)
        object.__setattr__(self, "entries", M)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.entries)

    def dense(self) -> NDArray[np.float64]:
        if self.is_sparse:
            return self.entries.toarray()
        return self.entries

    def degrees(self) -> NDArray[np.float64]:
        return np.asarray(self.entries.sum(axis=1)).ravel()


def as_dense(A: Adjacency | ArrayLike) -> NDArray[np.float64]:
    """Dense float view of an adjacency-like input."""
    if isinstance(A, Adjacency):
        return A.dense()
    if sparse.issparse(A):
        return A.toarray().astype(float)
    return np.asarray(A, dtype=float)


def sample_rdpg(
    X: LatentPositions | ArrayLike,
    rho: float | None = None,
    seed: int = 0,
    replicate: int = 0,
    storage: str = "auto",
) -> Adjacency:
    """Draw ``A_ij ~ Bernoulli(rho x_i^T x_j)`` for ``i < j``, mirrored, hollow.

    ``storage`` is ``"dense"``, ``"sparse"`` or ``"auto"`` (sparse when the
    expected density is below 5%). The random stream is the same for every
    storage choice, so the sampled graph does not depend on it.
    """
    if not isinstance(X, LatentPositions):
        X = LatentPositions(X, rho=1.0 if rho is None else rho)
    rho = X.rho if rho is None else float(rho)
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    n = X.n
    if n == 0:
        raise ValueError("cannot sample a graph on zero vertices")
    P = rho * X.gram()
    iu = np.triu_indices(n, k=1)
    p_upper = P[iu]
    if np.any(p_upper < 0) or np.any(p_upper > 1):
        raise ValueError("edge probabilities rho * x_i^T x_j must lie in [0, 1]")
    rng = make_rng(seed, replicate)
    hits = rng.random(p_upper.shape[0]) < p_upper

    if storage == "auto":
        density = p_upper.mean() if p_upper.size else 0.0
        storage = "sparse" if density < SPARSE_DENSITY_THRESHOLD else "dense"
    if storage == "sparse":
        rows, cols = iu[0][hits], iu[1][hits]
        data = np.ones(2 * rows.size)
        M = sparse.csr_matrix(
            (data, (np.concatenate([rows, cols]), np.concatenate([cols, rows]))), shape=(n, n)
        )
        return Adjacency(M)
    if storage != "dense":
        raise ValueError(f"unknown storage {storage!r}")
    M = np.zeros((n, n))
    M[iu] = hits
    M += M.T
    return Adjacency(M)


def sbm_assignment(spec: SbmSpec, n: int) -> NDArray[np.int64]:
    """Deterministic block labels (0-based), vertices ordered by block.

    Block sizes are ``floor(n pi_k)`` plus a largest-remainder correction,
    so each count is within one of ``n pi_k``.
    """
    K = spec.K
    if n < K:
        raise ValueError(f"need at least K={K} vertices, got n={n}")
    target = n * spec.pi
    sizes = np.floor(target).astype(int)
    short = n - sizes.sum()
    # stable sort keeps lower block indices first on equal remainders
    order = np.argsort(-(target - sizes), kind="stable")
    sizes[order[:short]] += 1
    return np.repeat(np.arange(K), sizes)


def sbm_to_latent(spec: SbmSpec, tau: ArrayLike) -> LatentPositions:
    tau = np.asarray(tau)
    if tau.size and (tau.min() < 0 or tau.max() >= spec.K):
        raise ValueError(f"block labels must lie in [0, {spec.K})")
    return LatentPositions(spec.nu[tau], rho=spec.rho)


def sine_curve_latent(n: int) -> LatentPositions:
    """One-dimensional latent curve ``x_i = 0.8 sin(pi (i-1)/(n-1)) + 0.1``."""
    t = np.arange(n) / (n - 1)
    return LatentPositions((0.8 * np.sin(np.pi * t) + 0.1)[:, None])
