"""Penalized Gaussian-mixture clustering tests."""

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from degkit.funcdata import FunctionalSample
from degkit.rng import RngSpec
from degkit.sigclust import (PenalizedGmm, cluster_signals, fit_em,
                             linf_group_update, penalized_loglik,
                             select_lambda)


# ---------------------------------------------------------------------------
# L-infinity proximal update
# ---------------------------------------------------------------------------


def _linf_brute_force(b, a, lam):
    """Scan clamp levels m: optimum clamps b into [-m, m]."""
    grid = np.linspace(0.0, np.max(np.abs(b)), 20_001)
    best, best_val = None, np.inf
    for m in grid:
        mu = np.clip(b, -m, m)
        val = np.sum(a * (mu - b) ** 2) + lam * m
        if val < best_val:
            best, best_val = mu, val
    return best


def test_linf_group_update_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(20):
        b = rng.standard_normal(5) * rng.uniform(0.5, 3.0)
        a = rng.uniform(0.2, 4.0, size=5)
        lam = rng.uniform(0.0, 8.0)
        exact = linf_group_update(b, a, lam)
        brute = _linf_brute_force(b, a, lam)
        val = lambda mu: np.sum(a * (mu - b) ** 2) + lam * np.max(np.abs(mu))
        assert val(exact) <= val(brute) + 1e-6


def test_linf_group_update_limits():
    b = np.array([1.0, -2.0, 0.5])
    a = np.ones(3)
    assert np.array_equal(linf_group_update(b, a, 0.0), b)
    assert np.array_equal(linf_group_update(b, a, 1e6), np.zeros(3))


# ---------------------------------------------------------------------------
# Penalized likelihood
# ---------------------------------------------------------------------------


def test_penalized_loglik_lambda0_matches_direct_mixture_oracle():
    rng = np.random.default_rng(1)
    scores = rng.standard_normal((40, 3))
    model = PenalizedGmm(
        weights=np.array([0.3, 0.7]),
        means=np.array([[0.0, 1.0, -1.0], [2.0, 0.0, 0.5]]),
        variances=np.array([1.0, 0.5, 2.0]),
        lam=0.0,
        var_groups=np.arange(3),
    )
    from scipy import stats
    dens = sum(
        w * np.prod(stats.norm.pdf(scores, m, np.sqrt(model.variances)), axis=1)
        for w, m in zip(model.weights, model.means)
    )
    assert penalized_loglik(model, scores) == pytest.approx(
        float(np.sum(np.log(dens))), abs=1e-10)


def test_penalized_gmm_validation():
    with pytest.raises(ValueError):
        PenalizedGmm(np.array([0.5, 0.6]), np.zeros((2, 2)), np.ones(2), 0.0,
                     np.arange(2))
    with pytest.raises(ValueError):
        PenalizedGmm(np.array([0.5, 0.5]), np.zeros((2, 2)),
                     np.array([1.0, 0.0]), 0.0, np.arange(2))


# ---------------------------------------------------------------------------
# EM
# ---------------------------------------------------------------------------


def _three_clusters(seed=0, n=240, d=8):
    g = np.random.default_rng(seed)
    labels = g.integers(0, 3, n)
    centers = np.array([[0.0, 4.0], [4.0, -2.0], [-4.0, -2.0]])
    X = g.standard_normal((n, d))
    X[:, :2] += centers[labels]
    return X - X.mean(axis=0), labels


def test_fit_em_recovers_separated_clusters():
    X, labels = _three_clusters()
    res = fit_em(X, K=3, lam=0.0, restarts=8, rng_spec=RngSpec(1))
    hard = np.argmax(res.responsibilities, axis=1)
    assert adjusted_rand_score(labels, hard) >= 0.9
    assert np.all(np.diff(res.objective_trace) >= -1e-7)


def test_fit_em_prunes_starved_component():
    # two tight clusters; a warm start placing a third mean far away must
    # starve it and shrink the mixture to two components
    g = np.random.default_rng(2)
    X = np.vstack([0.3 * g.standard_normal((60, 2)),
                   0.3 * g.standard_normal((60, 2)) + [8.0, 0.0]])
    init = np.array([[0.0, 0.0], [8.0, 0.0], [50.0, 50.0]])
    res = fit_em(X, K=3, lam=0.0, restarts=0, init_means=init)
    assert res.model.n_clusters == 2
    assert res.prune_events


def test_fit_em_validation():
    X = np.zeros((10, 2))
    with pytest.raises(ValueError):
        fit_em(X, K=0, lam=0.0)
    with pytest.raises(ValueError):
        fit_em(X, K=20, lam=0.0)
    with pytest.raises(ValueError):
        fit_em(X, K=2, lam=-1.0)


def test_select_lambda_zeroes_noise_variables():
    X, labels = _three_clusters(seed=5, n=240, d=10)
    res, table = select_lambda(X, K=3, rng_spec=RngSpec(5))
    hard = np.argmax(res.responsibilities, axis=1)
    assert adjusted_rand_score(labels, hard) >= 0.9
    zeroed = np.sum(np.max(np.abs(res.model.means[:, 2:]), axis=0) == 0)
    assert zeroed >= 6
    assert res.model.active_vars >= {0, 1}
    assert len(table) == 12 and all("bic" in row for row in table)


# ---------------------------------------------------------------------------
# cluster_signals
# ---------------------------------------------------------------------------


def _two_channel_curves(seed=0, n=120):
    """Two archetypes that differ only in channel A; channel B is a smooth
    unimodal nuisance mode carrying no cluster information."""
    g = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, 31)
    labels = g.integers(0, 2, n)
    shift = np.where(labels == 0, -2.0, 2.0)
    a = shift[:, None] * np.sin(np.pi * t) + 0.2 * g.standard_normal((n, 31))
    b = (np.outer(g.standard_normal(n), np.sqrt(2.0) * np.sin(2 * np.pi * t))
         + 0.05 * g.standard_normal((n, 31)))
    return (FunctionalSample(grid=t, curves=a, channel="A"),
            FunctionalSample(grid=t, curves=b, channel="B"), labels)


def test_cluster_signals_selects_the_discriminating_channel():
    sa, sb, labels = _two_channel_curves()
    out_labels, res, scores = cluster_signals([sa, sb], K=2, lam="auto",
                                              rng_spec=RngSpec(6))
    assert adjusted_rand_score(labels, out_labels) >= 0.9
    # channel A (group 0) must stay active; channel B coordinates all zeroed
    assert 0 in res.model.active_vars
    assert 1 not in res.model.active_vars


def test_cluster_signals_is_equivariant_under_relabeling():
    sa, sb, _ = _two_channel_curves(seed=9)
    ids = [f"m{i:03d}" for i in range(sa.curves.shape[0])]
    l1, _, _ = cluster_signals([sa, sb], K=3, lam=5.0, rng_spec=RngSpec(7),
                               unit_ids=ids)
    perm = np.random.default_rng(0).permutation(len(ids))
    sa_p = FunctionalSample(grid=sa.grid, curves=sa.curves[perm], channel="A")
    sb_p = FunctionalSample(grid=sb.grid, curves=sb.curves[perm], channel="B")
    l2, _, _ = cluster_signals([sa_p, sb_p], K=3, lam=5.0, rng_spec=RngSpec(7),
                               unit_ids=[ids[i] for i in perm])
    assert np.array_equal(l1[perm], l2)
