import numpy as np
import pytest
from scipy.optimize import nnls

from memmunmix.baselines import (
    BaselineConfig,
    BudgetExceededError,
    elitist_lasso_unmix,
    fcls,
    group_lasso_unmix,
    mesma_batch,
    mesma_count,
    mesma_exhaustive,
    prox_elitist,
    run_baseline,
    sparse_group_objective,
    sunsal,
)
from memmunmix.core import GroupingMap, SpectralBundles

import oracles
from conftest import random_bundles


@pytest.fixture
def tiny(rng):
    """Well-conditioned 3-class, 5-atom dictionary."""
    return random_bundles(rng, sizes=(2, 2, 1), n_bands=12)


# --- FCLS ------------------------------------------------------------------

def test_fcls_recovers_vertex(tiny):
    for j in range(tiny.n_atoms):
        r = fcls(tiny, tiny.atoms[:, j]).r
        np.testing.assert_allclose(r, np.eye(tiny.n_atoms)[j], atol=1e-10)


def test_fcls_recovers_midpoint(tiny):
    y = 0.5 * (tiny.atoms[:, 0] + tiny.atoms[:, 3])
    np.testing.assert_allclose(fcls(tiny, y).r, [0.5, 0, 0, 0.5, 0], atol=1e-10)


def test_fcls_matches_active_set_oracle(rng):
    for _ in range(20):
        bundles = random_bundles(rng, sizes=(2, 2, 2), n_bands=9)
        y = rng.uniform(0, 1, size=9)
        res = fcls(bundles, y)
        gram = bundles.gram
        q = bundles.atoms.T @ y
        ref, ref_val = oracles.qp_simplex_enum(gram, q)
        val = 0.5 * res.r @ gram @ res.r - q @ res.r
        assert val <= ref_val + 1e-10
        assert np.all(res.r >= 0) and abs(res.r.sum() - 1) < 1e-12
        assert res.converged


def test_fcls_batch_and_empty(tiny, rng):
    y = rng.uniform(size=(tiny.n_bands, 4))
    res = fcls(tiny, y)
    assert res.r.shape == (5, 4)
    for p in range(4):
        np.testing.assert_allclose(res.r[:, p], fcls(tiny, y[:, p]).r, atol=1e-14)
    assert fcls(tiny, np.zeros((tiny.n_bands, 0))).r.shape == (5, 0)


# --- SUnSAL ----------------------------------------------------------------

def test_sunsal_zero_lambda_is_nnls_normalized(tiny, rng):
    y = tiny.atoms @ rng.uniform(0.1, 1, size=5) + 0.01 * rng.normal(size=tiny.n_bands)
    res = sunsal(tiny, y, 0.0)
    w = nnls(tiny.atoms, y)[0]
    np.testing.assert_allclose(res.raw, w, atol=1e-6)
    np.testing.assert_allclose(res.r, w / w.sum(), atol=1e-6)


def test_sunsal_huge_lambda_is_degenerate(tiny, rng):
    res = sunsal(tiny, rng.uniform(size=tiny.n_bands), 1e6)
    assert res.degenerate
    np.testing.assert_array_equal(res.r, 0.0)


def test_sunsal_matches_coordinate_descent(rng):
    for lam in (1e-3, 1e-2, 0.1):
        bundles = random_bundles(rng, sizes=(3, 3), n_bands=10)
        y = rng.uniform(size=10)
        res = sunsal(bundles, y, lam)
        ref = oracles.nonneg_lasso_cd(bundles.atoms, y, lam)
        obj = lambda r: 0.5 * np.sum((bundles.atoms @ r - y) ** 2) + lam * r.sum()
        assert obj(res.raw) <= obj(ref) + 1e-9
        assert res.converged


def test_sunsal_rejects_negative_lambda(tiny):
    with pytest.raises(ValueError):
        sunsal(tiny, np.ones(tiny.n_bands), -1.0)


# --- sparse group lasso ----------------------------------------------------

def test_group_zero_weights_is_nnls(tiny, rng):
    y = tiny.atoms @ rng.uniform(0.1, 1, size=5)
    res = group_lasso_unmix(tiny, y, 0.0, 0.0, BaselineConfig(max_iters=20000, tol=1e-9))
    w = nnls(tiny.atoms, y)[0]
    np.testing.assert_allclose(res.raw, w, atol=1e-4)


def test_group_large_weight_kills_everything(tiny, rng):
    res = group_lasso_unmix(tiny, rng.uniform(size=tiny.n_bands), 1e4, 0.0)
    np.testing.assert_array_equal(res.raw, 0.0)
    assert res.degenerate


def test_group_matches_numeric_oracle(rng):
    cfg = BaselineConfig(max_iters=20000, tol=1e-9)
    for lam_g, lam_r in ((0.05, 0.0), (0.02, 0.01), (0.2, 0.05)):
        bundles = random_bundles(rng, sizes=(2, 3, 2), n_bands=10)
        y = rng.uniform(size=10)
        res = group_lasso_unmix(bundles, y, lam_g, lam_r, cfg)
        ours = float(sparse_group_objective(bundles, y, res.raw, lam_g, lam_r))
        ref = oracles.sparse_group_lasso_numeric(bundles.atoms, y, bundles.grouping, lam_g, lam_r)
        assert ours <= ref + 1e-6 * max(1.0, abs(ref))


def test_group_output_on_simplex(tiny, rng):
    res = group_lasso_unmix(tiny, tiny.atoms @ rng.dirichlet(np.ones(5)), 1e-3, 1e-3)
    assert abs(res.r.sum() - 1) < 1e-12 and np.all(res.r >= 0)


# --- social / elitist lasso ------------------------------------------------

def test_prox_elitist_matches_numeric_oracle(rng):
    for _ in range(30):
        g = GroupingMap(list(rng.integers(1, 4, size=3)))
        x = rng.normal(size=g.n_atoms)
        lam = float(rng.uniform(0.0, 2.0))
        z = prox_elitist(x, g, lam)
        assert np.all(z >= 0)
        f = lambda v: lam * np.linalg.norm(g.aggregate(v)) + 0.5 * np.sum((v - x) ** 2)
        assert f(z) <= oracles.elitist_prox_numeric(x, g, lam) + 1e-9


def test_prox_elitist_edge_cases():
    g = GroupingMap([2, 1])
    x = np.array([0.3, -0.1, 0.2])
    np.testing.assert_array_equal(prox_elitist(x, g, 0.0), np.maximum(x, 0.0))
    np.testing.assert_array_equal(prox_elitist(x, g, 10.0), 0.0)


def test_prox_elitist_batch_columns(rng):
    g = GroupingMap([3, 2, 2])
    x = rng.normal(size=(7, 9))
    lam = rng.uniform(0, 1, size=9)
    out = prox_elitist(x, g, lam)
    for p in range(9):
        np.testing.assert_allclose(out[:, p], prox_elitist(x[:, p], g, lam[p]), atol=1e-14)


@pytest.mark.parametrize("pq", [(1, 2), (2, 1)])
def test_elitist_output_on_simplex(tiny, rng, pq):
    res = elitist_lasso_unmix(tiny, tiny.atoms @ rng.dirichlet(np.ones(5)), 0.01, *pq)
    assert np.all(res.r >= -1e-12) and abs(res.r.sum() - 1) < 1e-6


def test_group_variant_with_tiny_weight_matches_fcls(tiny, rng):
    y = tiny.atoms @ rng.dirichlet(np.ones(5)) + 0.01 * rng.normal(size=tiny.n_bands)
    cfg = BaselineConfig(max_iters=50000, tol=1e-9)
    res = elitist_lasso_unmix(tiny, y, 1e-9, 2, 1, cfg)
    np.testing.assert_allclose(res.r, fcls(tiny, y).r, atol=1e-5)


def test_elitist_spreads_within_classes(rng):
    # one class, two nearly identical atoms: elitist prefers spreading over picking one
    base = rng.uniform(0.2, 1.0, size=12)
    atoms = np.column_stack([base, base * 1.0001, rng.uniform(0.2, 1.0, size=12)])
    bundles = SpectralBundles(atoms, (2, 1))
    y = 0.7 * base + 0.3 * atoms[:, 2]
    res = elitist_lasso_unmix(bundles, y, 0.05, 1, 2, BaselineConfig(max_iters=20000))
    assert res.r[0] > 0.05 and res.r[1] > 0.05


def test_elitist_rejects_other_norms(tiny):
    with pytest.raises(ValueError):
        elitist_lasso_unmix(tiny, np.ones(tiny.n_bands), 0.1, 2, 2)


def test_admm_residuals_small_when_converged(tiny, rng):
    y = tiny.atoms @ rng.dirichlet(np.ones(5), size=6).T
    cfg = BaselineConfig()
    for res in (sunsal(tiny, y, 1e-3, cfg), elitist_lasso_unmix(tiny, y, 1e-3, cfg=cfg)):
        ok = res.iterations < cfg.max_iters  # stopped by the residual test
        assert ok.any()
        assert np.all(res.residuals["primal"][ok] < 1e-6)
        assert np.all(res.residuals["dual"][ok] < 1e-6)


# --- MESMA -----------------------------------------------------------------

def test_mesma_exact_atom(small_sim_bundles):
    bundles = small_sim_bundles
    r, support = mesma_exhaustive(bundles, bundles.atoms[:, 11])
    np.testing.assert_allclose(r, np.eye(bundles.n_atoms)[11], atol=1e-10)
    assert support == frozenset({int(bundles.class_of_atom[11])})


def test_mesma_two_class_mixture(small_sim_bundles):
    bundles = small_sim_bundles
    y = 0.4 * bundles.atoms[:, 2] + 0.6 * bundles.atoms[:, 17]
    r, support = mesma_exhaustive(bundles, y)
    assert support == frozenset({0, 3})
    np.testing.assert_allclose(r[[2, 17]], [0.4, 0.6], atol=1e-9)


def test_mesma_residual_is_minimal_over_models(rng):
    bundles = random_bundles(rng, sizes=(3, 2, 2), n_bands=10)
    y = rng.uniform(size=10)
    r, _ = mesma_exhaustive(bundles, y, max_classes=2)
    err = np.sum((bundles.atoms @ r - y) ** 2)
    g = bundles.grouping
    # brute force: every pair of atoms from distinct classes, on a fine grid
    for i in range(7):
        for j in range(7):
            if g.class_of_atom[i] == g.class_of_atom[j]:
                continue
            for t in np.linspace(0, 1, 201):
                z = np.zeros(7)
                z[i], z[j] = t, 1 - t
                assert err <= np.sum((bundles.atoms @ z - y) ** 2) + 1e-12


def test_mesma_count_and_budget(small_sim_bundles):
    assert mesma_count((2, 3), 2) == 2 + 3 + 6
    with pytest.raises(BudgetExceededError):
        mesma_exhaustive(small_sim_bundles, small_sim_bundles.atoms[:, 0], 3, budget=10)


def test_mesma_batch_supports(small_sim_bundles):
    res = mesma_batch(small_sim_bundles, small_sim_bundles.atoms[:, :3])
    assert res.class_support == [frozenset({0})] * 3


# --- dispatch --------------------------------------------------------------

@pytest.mark.parametrize("method", ["fcls", "sunsal", "group", "elitist", "mesma"])
def test_run_baseline_dispatch(small_sim_bundles, method):
    y = small_sim_bundles.atoms[:, [0, 7]] @ np.array([[0.5], [0.5]])
    res = run_baseline(small_sim_bundles, y, BaselineConfig(method=method))
    assert res.r.shape == (small_sim_bundles.n_atoms, 1)
    assert abs(res.r.sum() - 1) < 1e-6


def test_config_rejects_unknown_method():
    with pytest.raises(ValueError):
        BaselineConfig(method="nmf")
