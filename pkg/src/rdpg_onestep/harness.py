"""Monte Carlo experiment runner behind the ``simulate``, ``ci`` and
``chernoff`` subcommands."""

from __future__ import annotations

import json
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .chernoff import KINDS, chernoff_ratio_grid, three_block_rank_two, two_block_rank_one
from .covariance import confidence_intervals, g_inverse, g_lse, sigma_ase, sigma_lse
from .evaluation import gmm_cluster, rand_index
from .io import write_table_csv
from .model import LatentPositions, SbmSpec, sample_rdpg, sbm_assignment, sbm_to_latent, sine_curve_latent
from .onestep import OneStepConfig, ose_a, ose_l
from .spectral import ase, lse, population_lse, procrustes_align, select_dimension, top_eigenpairs

__all__ = [
    "ExperimentConfig",
    "ReplicateResult",
    "SimulationResult",
    "CoverageResult",
    "simulate",
    "simulate_ci",
    "chernoff_tables",
    "write_simulation",
    "write_coverage",
    "write_manifest",
    "write_chernoff_tables",
    "version_string",
]

ESTIMATORS = ("ASE", "LSE", "OSE_A", "OSE_L")
METRICS = ("RI", "SSE", "COV", "CI")
LAPLACIAN_FAMILY = ("LSE", "OSE_L")


@dataclass
class ExperimentConfig:
    """Resolved description of one Monte Carlo experiment.

    ``spec`` is an :class:`SbmSpec`, the string ``"sine"`` (one-dimensional
    sine-curve latent positions) or a path to a CSV of latent positions.
    ``d="AUTO"`` selects the dimension per replicate from the top ``qmax``
    adjacency eigenvalue magnitudes.
    """

    spec: SbmSpec | str
    n_values: list[int] = field(default_factory=lambda: [1200])
    replicates: int = 1
    seed: int = 0
    estimators: list[str] = field(default_factory=lambda: list(ESTIMATORS))
    metrics: list[str] = field(default_factory=lambda: ["RI", "SSE", "COV"])
    alpha: float = 0.05
    d: int | str = "AUTO"
    qmax: int = 50
    steps: int = 1
    init: str = "ASE"
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.spec, dict):
            self.spec = SbmSpec.from_dict(self.spec)
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.estimators:
            raise ValueError("estimators must be nonempty")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad:
            raise ValueError(f"unknown estimators {sorted(bad)}")
        bad = set(self.metrics) - set(METRICS)
        if bad:
            raise ValueError(f"unknown metrics {sorted(bad)}")
        if isinstance(self.d, str):
            if self.d.upper() != "AUTO":
                self.d = int(self.d)
            else:
                self.d = "AUTO"
            if self.d == "AUTO" and self.qmax < 2:
                raise ValueError("AUTO dimension needs qmax >= 2")
        if not self.n_values or min(self.n_values) < 2:
            raise ValueError("n_values must be a nonempty list of sizes >= 2")

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "spec"}
        out["spec"] = self.spec.to_dict() if isinstance(self.spec, SbmSpec) else str(self.spec)
        return out

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls(**json.load(fh))

    def latent(self, n: int) -> tuple[LatentPositions, np.ndarray | None]:
        """Latent positions for size ``n`` and block labels (``None`` without blocks)."""
        if isinstance(self.spec, SbmSpec):
            tau = sbm_assignment(self.spec, n)
            return sbm_to_latent(self.spec, tau), tau
        if self.spec == "sine":
            return sine_curve_latent(n), None
        X = np.loadtxt(self.spec, delimiter=",", skiprows=1, ndmin=2)
        if X.shape[0] != n:
            raise ValueError(f"latent CSV has {X.shape[0]} rows, config asks for n={n}")
        return LatentPositions(X), None


def version_string() -> str:
    """Package version plus ``git describe`` output when run from a checkout."""
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _sub_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1)[0])


@dataclass
class ReplicateResult:
    n: int
    replicate: int
    d: int
    ri: dict[str, float]
    sse: dict[str, float]
    # per estimator: scaled aligned row errors (n x d)
    errors: dict[str, np.ndarray] = field(repr=False)
    failure: str | None = None


def _run_replicate(cfg: ExperimentConfig, n: int, r: int) -> ReplicateResult:
    X, tau = cfg.latent(n)
    rho = X.rho
    try:
        A = sample_rdpg(X, seed=cfg.seed, replicate=r)
        if isinstance(cfg.d, str):
            q = min(cfg.qmax, n)
            vals, _ = top_eigenpairs(A.entries, q)
            d = select_dimension(np.abs(vals), q)
        else:
            d = int(cfg.d)
        one = OneStepConfig(steps=cfg.steps)
        embs = {}
        want = set(cfg.estimators)
        if "ASE" in want:
            embs["ASE"] = ase(A, d)
        if "LSE" in want:
            embs["LSE"] = lse(A, d)
        if want & {"OSE_A", "OSE_L"}:
            xa = ose_a(A, d, one, init=cfg.init)
            if "OSE_A" in want:
                embs["OSE_A"] = xa
            if "OSE_L" in want:
                embs["OSE_L"] = ose_l(A, d, one, x_hat=xa)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return ReplicateResult(n, r, 0, {}, {}, {}, failure=f"{type(exc).__name__}: {exc}")

    target_x = np.sqrt(rho) * X.data
    target_y = population_lse(X)
    ri, sse, errors = {}, {}, {}
    for name in cfg.estimators:
        est = embs[name].estimate
        target = target_y if name in LAPLACIAN_FAMILY else target_x
        if est.shape[1] == target.shape[1]:
            al = procrustes_align(est, target)
            sse[name] = al.residual_frobenius_sq
            scale = n if name in LAPLACIAN_FAMILY else np.sqrt(n)
            errors[name] = scale * (al.aligned - target)
        else:
            sse[name] = float("nan")
        if "RI" in cfg.metrics and tau is not None:
            k = int(tau.max()) + 1
            ri[name] = rand_index(gmm_cluster(est, k, seed=_sub_seed(cfg.seed, n, r)), tau)
    return ReplicateResult(n, r, d, ri, sse, errors)


@dataclass
class SimulationResult:
    config: ExperimentConfig
    replicates: list[ReplicateResult]

    @property
    def failures(self) -> int:
        return sum(1 for r in self.replicates if r.failure)

    def ok(self, n: int | None = None) -> list[ReplicateResult]:
        return [r for r in self.replicates if r.failure is None and (n is None or r.n == n)]

    def sse(self, n: int, estimator: str) -> np.ndarray:
        return np.array([r.sse[estimator] for r in self.ok(n)])

    def ri(self, n: int, estimator: str) -> np.ndarray:
        return np.array([r.ri[estimator] for r in self.ok(n) if estimator in r.ri])

    def block_covariance(self, n: int, estimator: str) -> dict[int, np.ndarray]:
        """Per-block sample covariance of scaled aligned row errors, pooled
        over vertices of the block and over replicates."""
        X, tau = self.config.latent(n)
        if tau is None:
            tau = np.zeros(n, dtype=int)
        errs = [r.errors[estimator] for r in self.ok(n) if estimator in r.errors]
        if not errs:
            return {}
        E = np.stack(errs)
        out = {}
        for k in np.unique(tau):
            rows = E[:, tau == k, :].reshape(-1, E.shape[2])
            out[int(k)] = np.atleast_2d(np.cov(rows, rowvar=False))
        return out

    def summary_rows(self):
        """Table-2-style rows: n, estimator, RI mean/se, SSE mean/se, scaled SSE mean."""
        for n in self.config.n_values:
            for name in self.config.estimators:
                ri = self.ri(n, name)
                sse = self.sse(n, name)
                scale = n * self._rho() if name in LAPLACIAN_FAMILY else 1.0
                yield (
                    n,
                    name,
                    _mean(ri),
                    _se(ri),
                    _mean(sse),
                    _se(sse),
                    _mean(scale * sse),
                    sse.size,
                )

    def _rho(self) -> float:
        return self.config.spec.rho if isinstance(self.config.spec, SbmSpec) else 1.0


def _mean(a):
    return float(np.mean(a)) if np.size(a) else float("nan")


def _se(a):
    return float(np.std(a, ddof=1) / np.sqrt(a.size)) if np.size(a) > 1 else float("nan")


def simulate(cfg: ExperimentConfig) -> SimulationResult:
    """Run every ``(n, replicate)`` task; results come back in task order.

    Replicate ``r`` draws its graph from the stream keyed by ``(seed, r)``,
    so shrinking ``replicates`` keeps the leading rows unchanged. A
    replicate whose estimation fails is recorded with its error message and
    counted, and the remaining replicates still run.
    """
    tasks = [(n, r) for n in cfg.n_values for r in range(cfg.replicates)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_run_replicate, [cfg] * len(tasks), *zip(*tasks)))
    else:
        results = [_run_replicate(cfg, n, r) for n, r in tasks]
    return SimulationResult(cfg, results)


def _limit_covariance(spec: SbmSpec, estimator: str, k: int) -> np.ndarray:
    fn = {"ASE": sigma_ase, "LSE": sigma_lse, "OSE_A": g_inverse, "OSE_L": g_lse}[estimator]
    return fn(spec.nu[k], spec, spec.rho)


def write_manifest(out: Path, command: str, config: dict, seed: int) -> None:
    manifest = {"command": command, "version": version_string(), "seed": seed, "config": config}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def write_simulation(result: SimulationResult, out: str | Path) -> Path:
    """Write ``records.csv``, ``summary.csv``, ``covariance.csv``, ``failures.csv``
    and ``manifest.json`` into ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    rows = []
    for r in result.replicates:
        for name in cfg.estimators:
            if r.failure:
                continue
            rows.append((r.n, r.replicate, name, r.d, float(r.ri.get(name, np.nan)), float(r.sse[name])))
    write_table_csv(out / "records.csv", ["n", "replicate", "estimator", "d", "ri", "sse"], rows)
    write_table_csv(
        out / "summary.csv",
        ["n", "estimator", "ri_mean", "ri_se", "sse_mean", "sse_se", "scaled_sse_mean", "replicates"],
        result.summary_rows(),
    )
    if "COV" in cfg.metrics:
        cov_rows = []
        for n in cfg.n_values:
            for name in cfg.estimators:
                for k, S in result.block_covariance(n, name).items():
                    lim = (
                        _limit_covariance(cfg.spec, name, k).ravel()
                        if isinstance(cfg.spec, SbmSpec) and S.shape[0] == cfg.spec.d
                        else np.full(S.size, np.nan)
                    )
                    for idx, (s, l) in enumerate(zip(S.ravel(), lim)):
                        i, j = divmod(idx, S.shape[0])
                        cov_rows.append((n, name, k, i, j, float(s), float(l)))
        write_table_csv(out / "covariance.csv", ["n", "estimator", "block", "row", "col", "sample", "limit"], cov_rows)
    write_table_csv(
        out / "failures.csv",
        ["n", "replicate", "error"],
        [(r.n, r.replicate, r.failure) for r in result.replicates if r.failure],
    )
    conf = cfg.to_dict()
    conf["failures"] = result.failures
    write_manifest(out, "simulate", conf, cfg.seed)
    return out


@dataclass
class CoverageResult:
    n: int
    replicates: int
    alpha: float
    truth_x: np.ndarray
    truth_y: np.ndarray
    covered_x: np.ndarray  # per-vertex hit counts
    covered_y: np.ndarray
    failures: int = 0

    @property
    def coverage_x(self) -> np.ndarray:
        return self.covered_x / (self.replicates - self.failures)

    @property
    def coverage_y(self) -> np.ndarray:
        return self.covered_y / (self.replicates - self.failures)


def simulate_ci(
    n: int = 500,
    replicates: int = 300,
    seed: int = 0,
    alpha: float = 0.05,
    latent: LatentPositions | None = None,
    cfg: OneStepConfig | None = None,
) -> CoverageResult:
    """Per-vertex empirical coverage of the one-dimensional OSE-A/OSE-L intervals."""
    X = latent if latent is not None else sine_curve_latent(n)
    if X.d != 1:
        raise ValueError("coverage simulation is defined for one-dimensional latent positions")
    n = X.n
    tx = X.data[:, 0]
    ty = population_lse(X)[:, 0]
    hx = np.zeros(n, dtype=np.int64)
    hy = np.zeros(n, dtype=np.int64)
    failures = 0
    for r in range(replicates):
        A = sample_rdpg(X, seed=seed, replicate=r)
        try:
            xa = ose_a(A, 1, cfg)
            ya = ose_l(A, 1, cfg, x_hat=xa)
            cx = confidence_intervals(xa, xa, alpha)
            cy = confidence_intervals(ya, xa, alpha)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError):
            failures += 1
            continue
        hx += cx.covers(tx)[:, 0]
        hy += cy.covers(ty)[:, 0]
    return CoverageResult(n, replicates, alpha, tx, ty, hx, hy, failures)


def write_coverage(res: CoverageResult, out: str | Path) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows = (
        (i, float(res.truth_x[i]), float(res.coverage_x[i]), float(res.truth_y[i]), float(res.coverage_y[i]))
        for i in range(res.n)
    )
    write_table_csv(out / "coverage.csv", ["vertex", "x0", "coverage_x", "y0", "coverage_y"], rows)


CHERNOFF_FAMILIES = {
    # r = q - p over p in [0.2, 0.8]
    "two_block": lambda p, r: two_block_rank_one(p, p + r),
    # q = p - r over p in [0.3, 0.6]
    "three_block": lambda p, r: three_block_rank_two(p, p - r),
}

CHERNOFF_PAIRS = (("ASE", "OSE_A"), ("LSE", "OSE_L"), ("ASE", "LSE"), ("OSE_A", "OSE_L"))


def chernoff_tables(
    family: str,
    p_values: Sequence[float],
    r_values: Sequence[float],
    n: int = 1000,
    pairs: Sequence[tuple[str, str]] = CHERNOFF_PAIRS,
    full_chernoff: bool = False,
) -> dict[tuple[str, str], np.ndarray]:
    """Ratio grids ``rho*_a / rho*_b`` for each pair, keyed by ``(a, b)``."""
    if family not in CHERNOFF_FAMILIES:
        raise ValueError(f"family must be one of {sorted(CHERNOFF_FAMILIES)}")
    for a, b in pairs:
        if a not in KINDS or b not in KINDS:
            raise ValueError(f"unknown kind in pair {(a, b)}")
    fam = CHERNOFF_FAMILIES[family]
    return {pair: chernoff_ratio_grid(fam, p_values, r_values, pair, n, full_chernoff) for pair in pairs}


def write_chernoff_tables(tables: dict, out: str | Path) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for (a, b), grid in tables.items():
        write_table_csv(out / f"ratio_{a}_over_{b}.csv", ["p", "r", "ratio"], (tuple(map(float, row)) for row in grid))

