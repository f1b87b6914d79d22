import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_orthogonal
from rdpg_onestep.model import THREE_BLOCK_SBM, Adjacency, sample_rdpg
from rdpg_onestep.spectral import (
    Embedding,
    ase,
    degree_scaled_lse,
    lse,
    normalized_laplacian,
    population_lse,
    procrustes_align,
    select_dimension,
    top_eigenpairs,
)


def _low_rank_latent(rng, n, d):
    return rng.uniform(0.1, 0.9 / np.sqrt(d), size=(n, d))


# ---- ASE -------------------------------------------------------------------


def test_ase_of_zero_matrix_is_zero():
    emb = ase(np.zeros((4, 4)), 1)
    assert np.all(emb.estimate == 0)
    assert emb.method == "ASE"


def test_ase_two_cycle():
    emb = ase(np.array([[0.0, 1.0], [1.0, 0.0]]), 1)
    assert emb.eigenvalues[0] == pytest.approx(1.0)
    assert np.allclose(np.abs(emb.estimate[:, 0]), 1 / np.sqrt(2))
    # tie |1| == |-1| is flagged
    assert any("tied" in w for w in emb.warnings)


def test_ase_noiseless_recovers_latent(rng):
    X0 = _low_rank_latent(rng, 40, 2)
    emb = ase(X0 @ X0.T, 2)
    assert procrustes_align(emb.estimate, X0).residual_frobenius_sq < 1e-8


def test_ase_gram_is_diag_of_eigenvalues(rng):
    X = THREE_BLOCK_SBM.latent_positions(200)
    emb = ase(sample_rdpg(X, seed=2), 3)
    lam = np.abs(emb.eigenvalues)
    assert np.all(np.diff(lam) <= 0)
    gram = emb.estimate.T @ emb.estimate
    assert np.linalg.norm(gram - np.diag(lam)) < 1e-8 * lam[0]


def test_negative_eigenvalue_is_flagged():
    M = np.diag([3.0, -5.0, 1.0])
    emb = ase(M, 2)
    assert emb.eigenvalues.tolist() == [-5.0, 3.0]
    assert any("negative" in w for w in emb.warnings)


def test_sign_convention_largest_entry_positive(rng):
    X0 = _low_rank_latent(rng, 30, 2)
    vals, vecs = top_eigenpairs(X0 @ X0.T, 2)
    idx = np.argmax(np.abs(vecs), axis=0)
    assert np.all(vecs[idx, [0, 1]] > 0)


def test_full_and_iterative_solvers_agree():
    X = THREE_BLOCK_SBM.latent_positions(300)
    A = sample_rdpg(X, seed=7)
    full = ase(A, 2, eig_method="full")
    it = ase(A, 2, eig_method="iterative")
    assert np.allclose(full.eigenvalues, it.eigenvalues, atol=1e-8)
    assert np.allclose(full.estimate, it.estimate, atol=1e-8)


def test_sparse_and_dense_inputs_agree():
    X = np.full((300, 1), 0.15)
    sp = sample_rdpg(X, seed=1)
    de = Adjacency(sp.dense())
    assert sp.is_sparse
    assert np.allclose(ase(sp, 1).estimate, ase(de, 1).estimate, atol=1e-10)


def test_ase_rejects_bad_dimension_and_asymmetry():
    with pytest.raises(ValueError):
        ase(np.zeros((3, 3)), 4)
    with pytest.raises(ValueError):
        ase(np.array([[0.0, 1.0], [0.0, 0.0]]), 1)


def test_embedding_rejects_non_finite():
    with pytest.raises(ValueError):
        Embedding(np.array([[np.nan]]), "ASE", [1.0])


# ---- Laplacian ---------------------------------------------------------------


def test_normalized_laplacian_examples():
    assert np.array_equal(normalized_laplacian([[0, 1], [1, 0]]), [[0, 1], [1, 0]])
    assert np.allclose(normalized_laplacian([[2, 2], [2, 2]]), 0.5)


@pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
def test_normalized_laplacian_scale_invariance(rng, c):
    X = _low_rank_latent(rng, 25, 2)
    M = X @ X.T
    assert np.allclose(normalized_laplacian(c * M), normalized_laplacian(M), rtol=1e-14, atol=0)


def test_normalized_laplacian_isolated_vertex_names_it():
    M = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]])
    with pytest.raises(ValueError, match="vertex 2"):
        normalized_laplacian(M)


def test_laplacian_of_low_rank_is_population_lse_gram(rng):
    X = _low_rank_latent(rng, 30, 2)
    Y = population_lse(X)
    assert np.allclose(normalized_laplacian(0.4 * X @ X.T), Y @ Y.T, atol=1e-10)


def test_lse_complete_graph():
    K3 = np.ones((3, 3)) - np.eye(3)
    emb = lse(K3, 1)
    assert emb.eigenvalues[0] == pytest.approx(1.0)
    assert np.allclose(emb.estimate[:, 0], 1 / np.sqrt(3))


def test_lse_noiseless_recovers_population_lse(rng):
    X = _low_rank_latent(rng, 50, 2)
    emb = lse(X @ X.T, 2)
    assert procrustes_align(emb.estimate, population_lse(X)).residual_frobenius_sq < 1e-8


def test_lse_isolated_vertex_errors():
    A = np.zeros((3, 3))
    A[0, 1] = A[1, 0] = 1
    with pytest.raises(ValueError):
        lse(A, 1)


def test_population_lse_examples():
    assert np.allclose(population_lse(np.full((7, 1), 0.4)), 1 / np.sqrt(7))
    assert np.allclose(population_lse([[0.5]]), 1.0)


def test_population_lse_block_values():
    n = 1000
    spec = THREE_BLOCK_SBM
    Y = population_lse(spec.latent_positions(n))
    starts = [0, 300, 600]
    for k, s in enumerate(starts):
        nu = spec.nu[k]
        expected = nu / np.sqrt(sum(n * spec.pi[l] * nu @ spec.nu[l] for l in range(3)))
        assert np.allclose(Y[s], expected, rtol=1e-12)


def test_degree_scaled_lse_identity():
    A = sample_rdpg(THREE_BLOCK_SBM.latent_positions(200), seed=5)
    base = lse(A, 2).estimate
    scaled = degree_scaled_lse(A, 2)
    assert scaled.method == "DEGREE_SCALED_LSE"
    assert np.allclose(scaled.estimate / np.sqrt(A.degrees())[:, None], base, atol=1e-12)


def test_degree_scaled_lse_regular_graph():
    n = 8
    A = np.zeros((n, n))
    for i in range(n):
        A[i, (i + 1) % n] = A[(i + 1) % n, i] = 1
        A[i, (i + 3) % n] = A[(i + 3) % n, i] = 1
    assert np.allclose(degree_scaled_lse(A, 1).estimate, 2.0 * lse(A, 1).estimate)


@pytest.mark.slow
def test_degree_scaled_lse_consistency_trend():
    med = []
    for n in (400, 800, 1600):
        X = THREE_BLOCK_SBM.latent_positions(n)
        errs = []
        for r in range(50):
            est = degree_scaled_lse(sample_rdpg(X, seed=31, replicate=r), 2).estimate
            al = procrustes_align(est, X.data).aligned
            errs.append(np.max(np.linalg.norm(al - X.data, axis=1)))
        med.append(np.median(errs))
    assert med[0] > med[1] > med[2]


# ---- Procrustes -------------------------------------------------------------


def test_procrustes_identity(rng):
    X = rng.standard_normal((10, 3))
    res = procrustes_align(X, X)
    assert np.allclose(res.w, np.eye(3), atol=1e-12)
    assert res.residual_frobenius_sq < 1e-20


def test_procrustes_recovers_rotation(rng):
    X = rng.standard_normal((20, 3))
    for _ in range(100):
        R = random_orthogonal(rng, 3)
        res = procrustes_align(X @ R, X)
        assert np.allclose(res.w @ R, np.eye(3), atol=1e-10)
        assert res.residual_frobenius_sq < 1e-10


def test_procrustes_matches_grid_over_o2(rng):
    S = rng.standard_normal((5, 2))
    T = rng.standard_normal((5, 2))
    best = np.inf
    for th in np.linspace(0, 2 * np.pi, 200_001):
        c, s = np.cos(th), np.sin(th)
        for W in (np.array([[c, -s], [s, c]]), np.array([[c, s], [s, -c]])):
            best = min(best, np.sum((S @ W - T) ** 2))
    assert procrustes_align(S, T).residual_frobenius_sq == pytest.approx(best, abs=1e-6)


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_procrustes_invariants(seed, d):
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((12, d))
    T = rng.standard_normal((12, d))
    res = procrustes_align(S, T)
    assert np.allclose(res.w.T @ res.w, np.eye(d), atol=1e-10)
    assert res.residual_frobenius_sq == pytest.approx(np.sum((res.aligned - T) ** 2), abs=1e-10)
    assert res.residual_frobenius_sq <= np.sum((S - T) ** 2) + 1e-10


def test_procrustes_one_dimension_is_sign_flip():
    res = procrustes_align(np.array([-1.0, -2.0]), np.array([1.0, 2.1]))
    assert res.w.tolist() == [[-1.0]]


def test_procrustes_shape_mismatch():
    with pytest.raises(ValueError):
        procrustes_align(np.zeros((3, 2)), np.zeros((3, 1)))


# ---- dimension selection -------------------------------------------------------


def _profile_objective_literal(values, d):
    # independent transcription: two normals, common variance
    q = len(values)
    a, b = values[:d], values[d:]
    ma = sum(a) / len(a)
    ss = sum((v - ma) ** 2 for v in a)
    if b:
        mb = sum(b) / len(b)
        ss += sum((v - mb) ** 2 for v in b)
    var = ss / (q - 2)
    return sum(-0.5 * np.log(2 * np.pi * var) - (v - ma) ** 2 / (2 * var) for v in a) + sum(
        -0.5 * np.log(2 * np.pi * var) - (v - mb) ** 2 / (2 * var) for v in b
    )


def test_select_dimension_block_example():
    values = [10.0, 10.0, 10.0, 1.0, 1.0, 1.0, 1.0]
    assert select_dimension(values) == 3


def test_select_dimension_matches_literal_objective():
    values = [9.0, 8.5, 6.0, 2.0, 1.8, 1.1, 0.7, 0.2]
    scores = [_profile_objective_literal(values, d) for d in range(1, len(values))]
    assert select_dimension(values) == int(np.argmax(scores)) + 1


def test_select_dimension_constant_values():
    assert select_dimension([4.0] * 6) == 1


def test_select_dimension_planted_gap():
    rng = np.random.default_rng(0)
    values = np.concatenate([30 + rng.uniform(-2, 2, 11), 5 + rng.uniform(-1, 1, 39)])
    assert select_dimension(values, q=50) == 11


def test_select_dimension_errors():
    with pytest.raises(ValueError):
        select_dimension([1.0], q=1)
    with pytest.raises(ValueError):
        select_dimension([3.0, -1.0])


@given(
    st.lists(st.floats(0.0, 100.0), min_size=3, max_size=30),
    st.floats(0.01, 100.0),
)
def test_select_dimension_scale_invariant(values, c):
    d1 = select_dimension(values)
    assert 1 <= d1 <= len(values)
    assert select_dimension([c * v for v in values]) == d1
