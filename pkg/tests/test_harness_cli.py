import json

import numpy as np
import pytest

from rdpg_onestep.cli import main
from rdpg_onestep.harness import ExperimentConfig, simulate, simulate_ci
from rdpg_onestep.io import read_embedding_csv
from rdpg_onestep.model import THREE_BLOCK_SBM, SbmSpec

# two well-separated blocks: the top two eigenvalues stand clear of the bulk
GAP_SPEC = SbmSpec(nu=[[0.7, 0.1], [0.1, 0.7]], pi=[0.5, 0.5])


def _files(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.is_file()}


@pytest.fixture
def spec_path(tmp_path):
    path = tmp_path / "spec.json"
    THREE_BLOCK_SBM.to_json(path)
    return path


@pytest.fixture
def cycle_edges(tmp_path):
    path = tmp_path / "cycle.txt"
    path.write_text("0 1\n1 2\n2 3\n3 0\n")
    return path


# ---- harness -------------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(spec=THREE_BLOCK_SBM, replicates=0)
    with pytest.raises(ValueError):
        ExperimentConfig(spec=THREE_BLOCK_SBM, estimators=[])
    with pytest.raises(ValueError):
        ExperimentConfig(spec=THREE_BLOCK_SBM, estimators=["MLE"])
    with pytest.raises(ValueError):
        ExperimentConfig(spec=THREE_BLOCK_SBM, metrics=["AUC"])
    with pytest.raises(ValueError):
        ExperimentConfig(spec=THREE_BLOCK_SBM, qmax=1)


def test_config_json_round_trip(tmp_path):
    cfg = ExperimentConfig(spec=THREE_BLOCK_SBM, n_values=[600], replicates=2, d=2)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = ExperimentConfig.from_json(path)
    assert back.to_dict() == cfg.to_dict()


def test_single_replicate_is_reproducible():
    cfg = ExperimentConfig(spec=THREE_BLOCK_SBM, n_values=[500], replicates=1, seed=5, d=2, metrics=["SSE", "RI"])
    a, b = simulate(cfg), simulate(cfg)
    assert a.failures == 0
    assert set(a.replicates[0].sse) == {"ASE", "LSE", "OSE_A", "OSE_L"}
    for name in cfg.estimators:
        assert a.sse(500, name).tolist() == b.sse(500, name).tolist()
        assert a.ri(500, name).tolist() == b.ri(500, name).tolist()


def test_fewer_replicates_are_a_prefix():
    base = dict(spec=THREE_BLOCK_SBM, n_values=[600], seed=3, d=2, metrics=["SSE"], estimators=["ASE", "OSE_A"])
    long = simulate(ExperimentConfig(replicates=3, **base))
    short = simulate(ExperimentConfig(replicates=2, **base))
    for name in base["estimators"]:
        assert long.sse(600, name)[:2].tolist() == short.sse(600, name).tolist()


def test_auto_dimension_finds_planted_rank():
    cfg = ExperimentConfig(spec=GAP_SPEC, n_values=[600], replicates=1, seed=1, metrics=["SSE"])
    assert simulate(cfg).replicates[0].d == 2


def test_failures_are_recorded_not_raised():
    # too small for the three-block model: the one-step update breaks down
    cfg = ExperimentConfig(spec=THREE_BLOCK_SBM, n_values=[40], replicates=3, d=2, metrics=["SSE"])
    res = simulate(cfg)
    assert len(res.replicates) == 3
    assert all(r.failure is None or isinstance(r.failure, str) for r in res.replicates)
    assert res.failures + len(res.ok()) == 3


def test_parallel_matches_serial():
    base = dict(spec=THREE_BLOCK_SBM, n_values=[600], replicates=2, seed=4, d=2, metrics=["SSE"])
    a = simulate(ExperimentConfig(**base))
    b = simulate(ExperimentConfig(workers=2, **base))
    for name in a.config.estimators:
        assert a.sse(600, name).tolist() == b.sse(600, name).tolist()


def test_coverage_simulation_is_deterministic():
    a = simulate_ci(n=300, replicates=3, seed=2)
    b = simulate_ci(n=300, replicates=3, seed=2)
    assert np.array_equal(a.covered_x, b.covered_x)
    assert np.array_equal(a.covered_y, b.covered_y)
    assert np.all((0 <= a.coverage_x) & (a.coverage_x <= 1))


# ---- CLI -----------------------------------------------------------------------------------


def test_cli_sample_and_estimate(tmp_path, spec_path):
    out = tmp_path / "s"
    assert main(["sample", "--spec", str(spec_path), "--n", "600", "--seed", "1", "--out", str(out)]) == 0
    assert {"edges.txt", "latent.csv", "labels.txt", "manifest.json"} <= set(_files(out))
    est = tmp_path / "e"
    assert main(["estimate", "--edges", str(out / "edges.txt"), "--d", "2", "--out", str(est)]) == 0
    X = read_embedding_csv(est / "ose_a.csv")
    assert X.shape == (600, 2)
    meta = json.loads((est / "ose_l.csv.json").read_text())
    assert meta["method"] == "OSE_L"


def test_cli_sample_is_deterministic(tmp_path, spec_path):
    for name in ("a", "b"):
        main(["sample", "--spec", str(spec_path), "--n", "300", "--seed", "9", "--out", str(tmp_path / name)])
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_cli_embed_four_cycle_is_deterministic(tmp_path, cycle_edges):
    for name in ("a", "b"):
        rc = main(["embed", "--edges", str(cycle_edges), "--d", "2", "--method", "ase", "--out", str(tmp_path / name)])
        assert rc == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    X = read_embedding_csv(tmp_path / "a" / "ase.csv")
    assert X.shape == (4, 2)
    assert np.allclose(np.linalg.norm(X, axis=1), 1.0)


def test_cli_embed_every_method(tmp_path, spec_path):
    main(["sample", "--spec", str(spec_path), "--n", "600", "--out", str(tmp_path / "s")])
    for method in ("ase", "lse", "degree_scaled_lse", "ose_a", "ose_l"):
        out = tmp_path / method
        argv = ["embed", "--edges", str(tmp_path / "s" / "edges.txt"), "--d", "2", "--method", method]
        assert main(argv + ["--out", str(out)]) == 0
        assert read_embedding_csv(out / f"{method}.csv").shape == (600, 2)


def test_cli_embed_malformed_input(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\n1\n")
    assert main(["embed", "--edges", str(bad), "--d", "1", "--out", str(tmp_path / "o")]) == 1
    assert "line 2" in capsys.readouterr().err


def test_cli_embed_lse_isolated_vertex(tmp_path, capsys):
    g = tmp_path / "g.txt"
    g.write_text("0 1\n1 2\n# vertex 3 only appears here\n3 3\n")
    assert main(["embed", "--edges", str(g), "--d", "1", "--method", "lse", "--out", str(tmp_path / "o")]) == 1
    assert "vertex 3" in capsys.readouterr().err


def test_cli_dimselect(tmp_path, capsys):
    values = tmp_path / "v.csv"
    values.write_text("\n".join(["30", "29", "28"] + ["2"] * 10) + "\n")
    assert main(["dimselect", "--values", str(values), "--out", str(tmp_path / "o")]) == 0
    assert capsys.readouterr().out.strip() == "3"
    assert json.loads((tmp_path / "o" / "dimension.json").read_text())["d"] == 3


def test_cli_dimselect_on_graph_finds_planted_dimension(tmp_path, capsys):
    spec_path = tmp_path / "gap.json"
    GAP_SPEC.to_json(spec_path)
    main(["sample", "--spec", str(spec_path), "--n", "600", "--out", str(tmp_path / "s")])
    capsys.readouterr()
    assert main(["dimselect", "--edges", str(tmp_path / "s" / "edges.txt"), "--out", str(tmp_path / "o")]) == 0
    assert capsys.readouterr().out.strip() == "2"


def test_cli_simulate(tmp_path, spec_path):
    out = tmp_path / "sim"
    argv = ["simulate", "--spec", str(spec_path), "--n", "600", "--replicates", "2", "--d", "2", "--out", str(out)]
    assert main(argv) == 0
    files = _files(out)
    assert {"records.csv", "summary.csv", "covariance.csv", "failures.csv", "manifest.json"} <= set(files)
    records = files["records.csv"].decode().splitlines()
    assert records[0] == "n,replicate,estimator,d,ri,sse"
    assert len(records) == 1 + 2 * 4
    manifest = json.loads(files["manifest.json"])
    assert manifest["seed"] == 0 and manifest["config"]["replicates"] == 2
    main(argv[:-1] + [str(tmp_path / "again")])
    assert _files(tmp_path / "again") == files


def test_cli_simulate_from_config(tmp_path):
    cfg = ExperimentConfig(spec="sine", n_values=[300], replicates=1, d=1, metrics=["SSE"], estimators=["ASE", "OSE_A"])
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    assert len((tmp_path / "o" / "records.csv").read_text().splitlines()) == 3


def test_cli_ci_on_graph_and_alpha_monotonicity(tmp_path):
    latent = tmp_path / "latent.csv"
    latent.write_text("x1\n" + "\n".join(str(v) for v in np.linspace(0.2, 0.8, 300)) + "\n")
    main(["sample", "--latent", str(latent), "--seed", "3", "--out", str(tmp_path / "s")])
    edges = str(tmp_path / "s" / "edges.txt")
    widths = {}
    for alpha in ("0.05", "0.5"):
        out = tmp_path / f"ci{alpha}"
        assert main(["ci", "--edges", edges, "--alpha", alpha, "--out", str(out)]) == 0
        for name in ("ci_x.csv", "ci_y.csv"):
            T = np.loadtxt(out / name, delimiter=",", skiprows=1)
            widths[alpha, name] = T[:, 4] - T[:, 3]
    for name in ("ci_x.csv", "ci_y.csv"):
        assert np.all(widths["0.5", name] < widths["0.05", name])


def test_cli_ci_simulate(tmp_path):
    out = tmp_path / "cov"
    assert main(["ci", "--simulate", "--n", "200", "--replicates", "2", "--out", str(out)]) == 0
    first = _files(out)
    T = np.loadtxt(out / "coverage.csv", delimiter=",", skiprows=1)
    assert T.shape == (200, 5)
    main(["ci", "--simulate", "--n", "200", "--replicates", "2", "--out", str(out)])
    assert _files(out) == first


def test_cli_chernoff_spec_and_grid(tmp_path, spec_path):
    out = tmp_path / "c"
    assert main(["chernoff", "--spec", str(spec_path), "--out", str(out)]) == 0
    rows = (out / "rho_star.csv").read_text().splitlines()
    assert rows[0] == "kind,value" and len(rows) == 5
    grid = tmp_path / "g"
    assert main(["chernoff", "--family", "two_block", "--grid", "4", "--out", str(grid)]) == 0
    T = np.loadtxt(grid / "ratio_ASE_over_OSE_A.csv", delimiter=",", skiprows=1)
    assert T.shape == (16, 3)
    valid = ~np.isnan(T[:, 2])
    assert np.all(T[valid, 2] <= 1 + 1e-9)


def test_cli_numeric_output_has_full_precision(tmp_path, cycle_edges):
    main(["embed", "--edges", str(cycle_edges), "--d", "1", "--out", str(tmp_path / "o")])
    text = (tmp_path / "o" / "ase.csv").read_text().splitlines()[1]
    # top eigenpair of the 4-cycle: eigenvalue 2, eigenvector entries 1/2
    assert float(text) == pytest.approx(1 / np.sqrt(2), abs=1e-12)
    assert text == format(float(text), ".17g")


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])
