"""Synthetic-data generator tests."""

import numpy as np
import pytest

from degkit.copulas import CopulaSpec
from degkit.generators import synth_copula_wiener, synth_fused_index
from degkit.mvdeg import CopulaWienerModel, OmegaMarginal, ShapeFn
from degkit.rng import RngSpec


def test_fused_index_noiseless_crossing_is_exact():
    ds, truth = synth_fused_index(50, 10, (1, 2), 0.0, RngSpec(1))
    assert truth.active == (1, 2) and truth.threshold == 1.0
    events = 0
    for u, w in zip(ds.units, truth.latent_paths):
        if u.event_indicator == 1:
            events += 1
            assert w[-1] == pytest.approx(truth.threshold, abs=1e-12)
            # noiseless channels sum (equally weighted) back to the index
            fused = sum(u.channels[f"ch{j}"] for j in truth.active)
            assert np.allclose(fused, w, atol=1e-10)
        else:
            assert w[-1] < truth.threshold
    assert events >= 2


def test_fused_index_inactive_channels_are_trendless():
    ds, truth = synth_fused_index(80, 6, (1, 2), 0.1, RngSpec(2), n_times=25)
    slopes = []
    for u in ds.units:
        if u.n_times < 5:
            continue
        for j in (3, 4, 5, 6):
            slopes.append(np.polyfit(u.times, u.channels[f"ch{j}"], 1)[0])
    assert abs(np.mean(slopes)) < 0.01


def test_fused_index_validation_and_determinism():
    with pytest.raises(ValueError):
        synth_fused_index(10, 5, (), 0.1, RngSpec(0))
    with pytest.raises(ValueError):
        synth_fused_index(10, 5, (7,), 0.1, RngSpec(0))
    with pytest.raises(ValueError):
        synth_fused_index(1, 5, (1,), 0.1, RngSpec(0))
    a, _ = synth_fused_index(10, 5, (1, 3), 0.1, RngSpec(9))
    b, _ = synth_fused_index(10, 5, (1, 3), 0.1, RngSpec(9))
    for u, v in zip(a.units, b.units):
        assert np.array_equal(u.times, v.times)
        for c in a.channel_names:
            assert np.array_equal(u.channels[c], v.channels[c])


def _cw_model(noise=0.1):
    return CopulaWienerModel(
        p=2,
        shapes=(ShapeFn(kappa=1.0), ShapeFn(kappa=1.0)),
        sigmas=np.array([0.4, 0.4]),
        omega_marginals=(OmegaMarginal("lognormal", (0.0, 0.3)),) * 2,
        copula=CopulaSpec("gaussian", np.array([[1.0, 0.5], [0.5, 1.0]])),
        noise_sd=np.full(2, noise),
    )


def test_copula_wiener_dataset_consistent_with_truth():
    grid = np.linspace(0.0, 5.0, 11)
    ds, truth = synth_copula_wiener(_cw_model(0.1), 200, grid, RngSpec(3))
    assert ds.n_units == 200 and ds.channel_names == ["ch1", "ch2"]
    resid = np.array([
        u.channels[f"ch{j + 1}"] - truth.latent[i, j]
        for i, u in enumerate(ds.units) for j in range(2)
    ])
    assert abs(np.std(resid) - 0.1) < 0.01
    assert truth.omegas.shape == (200, 2)
    # drifts drive the latent slope: regression of endpoint on omega ~ t_max
    slope = np.polyfit(truth.omegas[:, 0], truth.latent[:, 0, -1], 1)[0]
    assert abs(slope - grid[-1]) < 0.5


def test_copula_wiener_determinism():
    grid = np.linspace(0.0, 2.0, 5)
    a, ta = synth_copula_wiener(_cw_model(), 20, grid, RngSpec(11))
    b, tb = synth_copula_wiener(_cw_model(), 20, grid, RngSpec(11))
    assert np.array_equal(ta.omegas, tb.omegas)
    for u, v in zip(a.units, b.units):
        for c in a.channel_names:
            assert np.array_equal(u.channels[c], v.channels[c])
