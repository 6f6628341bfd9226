"""Smoke tests for the vfpen python module."""

import math

import numpy as np
import pytest

import vfpen


def test_dataset_from_arrays():
    x = np.array([[1.0], [2.0], [3.0]])
    y = np.array([0.0, 0.0, 1.0])
    ds = vfpen.Dataset(x, y, name="steps")
    assert ds.n == 3
    assert ds.d == 1
    assert ds.name == "steps"
    np.testing.assert_allclose(ds.targets, y)


def test_standardize_zero_mean_unit_sd():
    ds = vfpen.generate_synthetic(kind="sine", n=400, d=2, noise=0.5, seed=3)
    std = vfpen.standardize(ds)
    feats = std.features
    assert abs(feats[:, 0].mean()) < 1e-9
    assert abs(feats[:, 0].std() - 1.0) < 1e-6  # numpy std is divide-by-n
    assert abs(std.targets.mean()) < 1e-9


def test_realisations_and_folds_are_deterministic():
    ds = vfpen.generate_synthetic(n=100, seed=1)
    a = vfpen.make_realisations(ds, 3, 0.5, seed=9)
    b = vfpen.make_realisations(ds, 3, 0.5, seed=9)
    assert [r.train_indices for r in a] == [r.train_indices for r in b]
    assert len(a[0].train_indices) == 50

    sub = vfpen.make_subsample(a[0], 30, seed=4)
    parts = vfpen.partition_folds(sub, 4, seed=5)
    sizes = sorted(len(block) for block in parts.blocks)
    assert sizes == [7, 7, 8, 8]
    assert sorted(i for block in parts.blocks for i in block) == sorted(sub.indices)


def test_cart_interpolates_with_min_leaf_one():
    ds = vfpen.generate_synthetic(kind="sine", n=60, noise=0.0, seed=8)
    tree = vfpen.grow_tree(ds, min_leaf=1)
    preds = tree.predict(ds.features)
    np.testing.assert_allclose(preds, ds.targets, atol=1e-12)
    assert tree.training_sse() == pytest.approx(0.0, abs=1e-18)

    seq = vfpen.prune_sequence(tree)
    sizes = seq.sizes
    assert sizes[-1] == 1
    assert all(a > b for a, b in zip(sizes, sizes[1:]))
    stump = seq.select_by_size(1)
    assert stump.size == 1


def test_alpha_values_nonnegative():
    ds = vfpen.generate_synthetic(kind="sine", n=80, noise=0.5, seed=12)
    tree = vfpen.grow_tree(ds, min_leaf=2)
    alphas = vfpen.alpha_values(tree)
    assert alphas
    assert all(v >= 0.0 for v in alphas.values())


def test_svr_fit_and_kernel():
    assert vfpen.rbf_kernel(np.array([0.0]), np.array([1.0]), 1.0) == pytest.approx(
        math.exp(-1.0)
    )
    ds = vfpen.generate_synthetic(kind="sine", n=40, noise=0.05, seed=21)
    model = vfpen.fit_svr(ds, cost=5.0, gamma=2.0, epsilon=0.1, tol=1e-5)
    assert model.converged
    preds = model.predict(ds.features)
    residuals = np.abs(preds - ds.targets)
    # a converged epsilon-SVR keeps residuals near the tube
    assert residuals.max() < 0.5
    assert model.weight_norm > 0.0


def test_cv_constant_endpoints():
    for fold_count in range(2, 13):
        assert vfpen.cv_constant(1.0, fold_count) == fold_count - 1
        assert vfpen.cv_constant(0.0, fold_count) == fold_count


def test_learning_rate_recovery():
    n = 100
    beta_true, d_true = 0.7, 3.0
    pen_by_v = []
    for fold_count in range(2, 13):
        c_v = fold_count - 1.0
        pen = c_v / fold_count * d_true / (n * (fold_count - 1) / fold_count) ** beta_true
        pen_by_v.append((fold_count, pen))
    beta, intercept, fallback = vfpen.fit_learning_rate(pen_by_v, n)
    assert not fallback
    assert beta == pytest.approx(beta_true, abs=1e-9)
    assert intercept == pytest.approx(math.log(d_true), abs=1e-9)


def test_paired_t_test_matches_convention():
    t, p, degenerate = vfpen.paired_t_test(np.array([1.0, 2.0, 3.0]), np.zeros(3))
    assert t == pytest.approx(2.0 * math.sqrt(3.0))
    assert 0.0 < p < 0.1
    assert not degenerate

    same = np.array([0.5, 0.25, 0.125])
    t, p, _ = vfpen.paired_t_test(same, same)
    assert t == 0.0 and p == 1.0


def test_select_runs_end_to_end():
    ds = vfpen.standardize(vfpen.generate_synthetic(kind="sine", n=160, noise=0.3, seed=5))
    real = vfpen.make_realisations(ds, 1, 0.5, seed=2)[0]
    sub = vfpen.make_subsample(real, 60, seed=3)
    result = vfpen.select(
        "penvf",
        "cart",
        ds,
        list(sub.indices),
        list(real.test_indices),
        fold_count=2,
        alpha=1.0,
        seed=11,
    )
    assert result["method"] == "penvf"
    assert len(result["criterion"]) == 13
    assert result["test_mae"] > 0.0
    assert result["chosen"]["t"] in [1, 2, 3, 5, 7, 10, 15, 22, 31, 44, 63, 90, 127]


def test_run_experiment_from_dict():
    config = {
        "datasets": ["synth-sine"],
        "learner": "cart",
        "m": 24,
        "V": [2],
        "alpha": [1.0],
        "methods": ["vfcv", "penvf"],
        "realisations": 2,
        "seed": 7,
        "v_sweep": [2, 3],
        "grid": {"cart_sizes": [1, 3, 7]},
        "threads": 1,
    }
    report = vfpen.run_experiment(config)
    assert len(report["cells"]) == 2
    for cell in report["cells"]:
        assert len(cell["errors"]) == 2
        assert cell["dataset"] == "synth-sine"

    again = vfpen.run_experiment(config)
    assert report == again  # deterministic


def test_registry_contains_synthetics():
    names = {entry["name"] for entry in vfpen.dataset_registry()}
    assert "abalone-synth" in names
    assert "winequality-red" in names
