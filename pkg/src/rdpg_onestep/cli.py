"""Command-line entry point: ``rdpg-onestep <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .chernoff import KINDS, rho_star
from .covariance import confidence_intervals
from .harness import (
    CHERNOFF_FAMILIES,
    ExperimentConfig,
    chernoff_tables,
    simulate,
    simulate_ci,
    write_chernoff_tables,
    write_coverage,
    write_manifest,
    write_simulation,
)
from .io import (
    read_dense_matrix,
    read_edge_list,
    write_embedding,
    write_matrix_csv,
    write_partition,
    write_table_csv,
)
from .model import Adjacency, LatentPositions, SbmSpec, sample_rdpg, sbm_assignment, sbm_to_latent
from .onestep import OneStepConfig, ose_a, ose_l
from .spectral import ase, degree_scaled_lse, lse, select_dimension, top_eigenpairs


def _dim(value: str):
    if value.lower() == "auto":
        return "AUTO"
    d = int(value)
    if d < 1:
        raise argparse.ArgumentTypeError("--d must be a positive integer or 'auto'")
    return d


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="Experiment seed.")
    p.add_argument("--out", type=Path, default=Path("out"), help="Output directory.")
    p.add_argument("--d", type=_dim, default="AUTO", help="Embedding dimension or 'auto'.")
    p.add_argument("--qmax", type=int, default=50, help="Number of eigenvalues scanned by automatic dimension selection.")
    p.add_argument("--rho", type=float, default=None, help="Sparsity factor (overrides the spec).")
    p.add_argument("--steps", type=int, default=1, help="Number of one-step updates.")
    p.add_argument("--init", choices=["ase", "lse"], default="ase", help="Initializer for the one-step update.")
    p.add_argument("--alpha", type=float, default=0.05, help="Miscoverage level for confidence intervals.")
    return p


def _graph_inputs(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--edges", type=Path, help="Edge list file ('u v' per line).")
    g.add_argument("--matrix", type=Path, help="Dense adjacency matrix as CSV.")
    p.add_argument("--one-indexed", action="store_true", help="Vertex ids in the edge list start at 1.")


def _load_graph(args) -> Adjacency:
    if args.edges is not None:
        A, report = read_edge_list(args.edges, one_indexed=args.one_indexed)
        if report.self_loops or report.duplicates:
            print(
                f"dropped {report.self_loops} self-loops and merged {report.duplicates} duplicate edges",
                file=sys.stderr,
            )
        return A
    return Adjacency(read_dense_matrix(args.matrix))


def _resolve_d(A: Adjacency, d, qmax: int) -> int:
    if d != "AUTO":
        return d
    q = min(qmax, A.n)
    vals, _ = top_eigenpairs(A.entries, q)
    return select_dimension(np.abs(vals), q)


def _init_name(init: str) -> str:
    return "ASE" if init == "ase" else "DEGREE_SCALED_LSE"


def cmd_sample(args) -> None:
    if args.spec is not None:
        spec = SbmSpec.from_json(args.spec)
        if args.rho is not None:
            spec = SbmSpec(spec.nu, spec.pi, args.rho)
        tau = sbm_assignment(spec, args.n)
        X = sbm_to_latent(spec, tau)
    else:
        X = LatentPositions(read_dense_matrix(args.latent), rho=1.0 if args.rho is None else args.rho)
        tau = None
    A = sample_rdpg(X, seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    M = A.entries.tocoo() if A.is_sparse else None
    if M is None:
        iu = np.argwhere(np.triu(A.entries, 1))
    else:
        iu = np.column_stack([M.row, M.col])
        iu = iu[iu[:, 0] < iu[:, 1]]
        iu = iu[np.lexsort((iu[:, 1], iu[:, 0]))]
    with open(args.out / "edges.txt", "w") as fh:
        fh.write(f"# n={A.n} seed={args.seed}\n")
        fh.writelines(f"{u} {v}\n" for u, v in iu)
    write_matrix_csv(args.out / "latent.csv", X.data, [f"x{j + 1}" for j in range(X.d)])
    if tau is not None:
        write_partition(args.out / "labels.txt", tau)
    write_manifest(args.out, "sample", {"n": A.n, "rho": X.rho, "edges": int(len(iu))}, args.seed)
    print(args.out / "edges.txt")


def _embed(A: Adjacency, method: str, d: int, args):
    cfg = OneStepConfig(steps=args.steps)
    if method == "ase":
        return ase(A, d)
    if method == "lse":
        return lse(A, d)
    if method == "degree_scaled_lse":
        return degree_scaled_lse(A, d)
    if method == "ose_a":
        return ose_a(A, d, cfg, init=_init_name(args.init))
    return ose_l(A, d, cfg, init=_init_name(args.init))


def cmd_embed(args) -> None:
    A = _load_graph(args)
    d = _resolve_d(A, args.d, args.qmax)
    emb = _embed(A, args.method, d, args)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"{args.method}.csv"
    write_embedding(path, emb)
    write_manifest(args.out, "embed", {"method": args.method, "d": d, "input": str(args.edges or args.matrix)}, args.seed)
    print(path)


def cmd_estimate(args) -> None:
    A = _load_graph(args)
    d = _resolve_d(A, args.d, args.qmax)
    cfg = OneStepConfig(steps=args.steps)
    xa = ose_a(A, d, cfg, init=_init_name(args.init))
    ya = ose_l(A, d, cfg, x_hat=xa)
    args.out.mkdir(parents=True, exist_ok=True)
    write_embedding(args.out / "ose_a.csv", xa)
    write_embedding(args.out / "ose_l.csv", ya)
    conf = {"d": d, "steps": args.steps, "init": args.init, "clipped": xa.info["clipped"]}
    write_manifest(args.out, "estimate", conf, args.seed)
    print(args.out)


def cmd_simulate(args) -> None:
    if args.config is not None:
        cfg = ExperimentConfig.from_json(args.config)
    else:
        if args.spec is None:
            raise SystemExit("simulate needs --config or --spec")
        spec = "sine" if args.spec == "sine" else SbmSpec.from_json(args.spec)
        if isinstance(spec, SbmSpec) and args.rho is not None:
            spec = SbmSpec(spec.nu, spec.pi, args.rho)
        cfg = ExperimentConfig(
            spec=spec,
            n_values=args.n,
            replicates=args.replicates,
            seed=args.seed,
            estimators=args.estimators,
            metrics=args.metrics,
            alpha=args.alpha,
            d=args.d,
            qmax=args.qmax,
            steps=args.steps,
            init=_init_name(args.init),
            workers=args.workers,
        )
    res = simulate(cfg)
    write_simulation(res, args.out)
    print(f"{len(res.replicates)} replicate tasks, {res.failures} failures -> {args.out}")


def cmd_ci(args) -> None:
    args.out.mkdir(parents=True, exist_ok=True)
    if args.simulate:
        res = simulate_ci(args.n, args.replicates, seed=args.seed, alpha=args.alpha)
        write_coverage(res, args.out)
        write_manifest(
            args.out,
            "ci",
            {"n": args.n, "replicates": args.replicates, "alpha": args.alpha, "failures": res.failures},
            args.seed,
        )
        print(args.out / "coverage.csv")
        return
    if args.edges is None and args.matrix is None:
        raise SystemExit("ci needs --edges/--matrix or --simulate")
    A = _load_graph(args)
    d = 1 if args.d == "AUTO" else args.d
    cfg = OneStepConfig(steps=args.steps)
    xa = ose_a(A, d, cfg, init=_init_name(args.init))
    ya = ose_l(A, d, cfg, x_hat=xa)
    for name, emb in (("ci_x.csv", xa), ("ci_y.csv", ya)):
        ci = confidence_intervals(emb, xa, args.alpha)
        header = ["vertex", "coordinate", "estimate", "lo", "hi"]
        rows = (
            (i, j, float(ci.center[i, j]), float(ci.lo[i, j]), float(ci.hi[i, j]))
            for i in range(ci.center.shape[0])
            for j in range(ci.center.shape[1])
        )
        write_table_csv(args.out / name, header, rows)
    write_manifest(args.out, "ci", {"d": d, "alpha": args.alpha}, args.seed)
    print(args.out)


def cmd_chernoff(args) -> None:
    args.out.mkdir(parents=True, exist_ok=True)
    if args.spec is not None:
        spec = SbmSpec.from_json(args.spec)
        rows = [(kind, rho_star(spec, args.n, kind, args.full)) for kind in KINDS]
        write_table_csv(args.out / "rho_star.csv", ["kind", "value"], rows)
        write_manifest(args.out, "chernoff", {"spec": spec.to_dict(), "n": args.n, "full": args.full}, args.seed)
        print(args.out / "rho_star.csv")
        return
    p = np.linspace(args.p_range[0], args.p_range[1], args.grid)
    r = np.linspace(args.r_range[0], args.r_range[1], args.grid)
    r = r[r != 0]
    tables = chernoff_tables(args.family, p, r, n=args.n, full_chernoff=args.full)
    write_chernoff_tables(tables, args.out)
    conf = {"family": args.family, "p": p.tolist(), "r": r.tolist(), "n": args.n, "full": args.full}
    write_manifest(args.out, "chernoff", conf, args.seed)
    print(args.out)


def cmd_dimselect(args) -> None:
    if args.values is not None:
        vals = read_dense_matrix(args.values).ravel()
    else:
        if args.edges is None and args.matrix is None:
            raise SystemExit("dimselect needs --values or a graph input")
        A = _load_graph(args)
        q = min(args.qmax, A.n)
        vals = np.abs(top_eigenpairs(A.entries, q)[0])
    q = min(args.qmax, vals.size)
    d = select_dimension(vals, q)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "dimension.json").write_text(json.dumps({"d": d, "q": q}) + "\n")
    print(d)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdpg-onestep", description="One-step estimation for random dot product graphs."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    p = sub.add_parser("sample", parents=[common], help="Sample an adjacency matrix.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", type=Path, help="SBM spec JSON.")
    src.add_argument("--latent", type=Path, help="Latent positions CSV.")
    p.add_argument("--n", type=int, default=600, help="Number of vertices (SBM only).")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("embed", parents=[common], help="Embed a graph.")
    _graph_inputs(p)
    p.add_argument(
        "--method", choices=["ase", "lse", "degree_scaled_lse", "ose_a", "ose_l"], default="ase"
    )
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("estimate", parents=[common], help="One-step estimates (OSE-A and OSE-L).")
    _graph_inputs(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo comparison of estimators.")
    p.add_argument("--config", type=Path, help="ExperimentConfig JSON.")
    p.add_argument("--spec", help="SBM spec JSON path, or 'sine'.")
    p.add_argument("--n", type=int, nargs="+", default=[1200])
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--estimators", nargs="+", default=["ASE", "LSE", "OSE_A", "OSE_L"])
    p.add_argument("--metrics", nargs="+", default=["RI", "SSE", "COV"])
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ci", parents=[common], help="Vertex-wise confidence intervals.")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--edges", type=Path)
    g.add_argument("--matrix", type=Path)
    g.add_argument("--simulate", action="store_true", help="Coverage study on the sine-curve model.")
    p.add_argument("--one-indexed", action="store_true")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--replicates", type=int, default=300)
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("chernoff", parents=[common], help="rho* criteria and ratio grids.")
    p.add_argument("--spec", type=Path, help="Evaluate rho* of every kind for one SBM spec.")
    p.add_argument("--family", choices=sorted(CHERNOFF_FAMILIES), default="two_block")
    p.add_argument("--p-range", type=float, nargs=2, default=[0.2, 0.8])
    p.add_argument("--r-range", type=float, nargs=2, default=[-0.15, 0.15])
    p.add_argument("--grid", type=int, default=20)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--full", action="store_true", help="Keep the log-determinant term.")
    p.set_defaults(func=cmd_chernoff)

    p = sub.add_parser("dimselect", parents=[common], help="Profile-likelihood dimension selection.")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--values", type=Path, help="CSV of singular values.")
    g.add_argument("--edges", type=Path)
    g.add_argument("--matrix", type=Path)
    p.add_argument("--one-indexed", action="store_true")
    p.set_defaults(func=cmd_dimselect)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
