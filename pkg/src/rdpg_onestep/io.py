"""Readers and writers: edge lists, dense CSV matrices, embeddings, partitions."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike
from scipy import sparse

from .model import Adjacency
from .spectral import Embedding

__all__ = [
    "EdgeListError",
    "EdgeListReport",
    "read_edge_list",
    "read_dense_matrix",
    "write_matrix_csv",
    "write_table_csv",
    "write_embedding",
    "read_embedding_csv",
    "write_partition",
    "read_partition",
    "fmt",
]


def fmt(value: float) -> str:
    """Decimal with 17 significant digits (round-trips a float64)."""
    return format(float(value), ".17g")


class EdgeListError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class EdgeListReport:
    n: int
    edges: int
    duplicates: int
    self_loops: int


def read_edge_list(
    path: str | Path, one_indexed: bool = False, n: int | None = None
) -> tuple[Adjacency, EdgeListReport]:
    """Read an undirected edge list with one ``u v`` pair per line.

    Blank lines and text after ``#`` are ignored. Repeated edges (in either
    orientation) are merged and self-loops dropped; both are counted in the
    returned report. ``n`` defaults to one more than the largest vertex id, self-loops included.
    """
    us, vs = [], []
    loops = 0
    top = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise EdgeListError(f"expected two vertex ids, got {len(parts)} fields", lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise EdgeListError(f"non-integer vertex id in {line!r}", lineno) from None
            if one_indexed:
                u, v = u - 1, v - 1
            if u < 0 or v < 0:
                raise EdgeListError("negative vertex id (is the file one-indexed?)", lineno)
            top = max(top, u + 1, v + 1)
            if u == v:
                loops += 1
                continue
            us.append(min(u, v))
            vs.append(max(u, v))
    pairs = np.array([us, vs], dtype=np.int64).T.reshape(-1, 2)
    uniq = np.unique(pairs, axis=0)
    if n is None:
        n = top
    elif n < top:
        raise ValueError(f"vertex id {top - 1} exceeds n={n}")
    rows = np.concatenate([uniq[:, 0], uniq[:, 1]])
    cols = np.concatenate([uniq[:, 1], uniq[:, 0]])
    M = sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    report = EdgeListReport(n=n, edges=uniq.shape[0], duplicates=pairs.shape[0] - uniq.shape[0], self_loops=loops)
    return Adjacency(M, meta={"source": str(path)}), report


def read_dense_matrix(path: str | Path) -> np.ndarray:
    """Comma-separated numeric matrix; a non-numeric first row is treated as a header."""
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(t) for t in first.strip().split(",") if t.strip()]
        skip = 0
    except ValueError:
        skip = 1
    M = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    return M


def write_table_csv(path: str | Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_matrix_csv(path: str | Path, M: ArrayLike, header: list[str] | None = None) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if header is None:
        header = [f"c{j + 1}" for j in range(M.shape[1])]
    write_table_csv(path, header, ([float(v) for v in row] for row in M))


def write_embedding(path: str | Path, emb: Embedding) -> Path:
    """Write ``emb`` as CSV plus a JSON sidecar ``<path>.json``; returns the sidecar path."""
    path = Path(path)
    write_matrix_csv(path, emb.estimate, [f"x{j + 1}" for j in range(emb.d)])
    sidecar = path.with_suffix(path.suffix + ".json")
    meta = {
        "method": emb.method,
        "d": emb.d,
        "eigenvalues": [float(v) for v in emb.eigenvalues],
        "warnings": list(emb.warnings),
    }
    sidecar.write_text(json.dumps(meta, indent=2) + "\n")
    return sidecar


def read_embedding_csv(path: str | Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_partition(path: str | Path, labels: ArrayLike) -> None:
    Path(path).write_text("".join(f"{int(v)}\n" for v in np.asarray(labels).ravel()))


def read_partition(path: str | Path) -> np.ndarray:
    return np.loadtxt(path, dtype=np.int64, ndmin=1)
