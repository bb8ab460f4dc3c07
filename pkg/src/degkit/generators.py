"""Synthetic-data generators with truth records.

Every generator is deterministic in its RngSpec and returns the latent truth
alongside the Dataset so downstream estimator tests never hard-code truth.
"""

from dataclasses import dataclass

import numpy as np

from .data import Dataset, UnitRecord
from .mvdeg import CopulaWienerModel, simulate_paths
from .rng import RngSpec


@dataclass(frozen=True)
class FusedIndexTruth:
    active: tuple
    threshold: float
    latent_paths: list  # per unit, the latent index at the unit's times
    rates: np.ndarray
    mixes: np.ndarray  # (n, |active|) shares of the latent index per channel
    noise_sd: float


def synth_fused_index(n, p, active, noise_sd, rng: RngSpec, n_times=30,
                      censor_frac=0.2):
    """Generate multi-channel data whose latent degradation index is a known
    monotone combination of the active channels.

    The latent index w_i(t) rises linearly and the unit fails when it crosses
    the threshold 1, exactly at a measurement time.  Each active channel j
    carries a share c_ij of the index (with a unit-level slope perturbation
    scaled by noise_sd) plus a transient disturbance; the disturbance weights
    sum to zero across the active set, so the disturbances cancel exactly in
    the equally-weighted fused combination but leave every individual channel
    non-monotone.  Inactive channels are independent noise around unit-level
    constants, carrying no trend.  With noise_sd=0 the construction is exact:
    the latent index equals the threshold at every event time.
    """
    active = tuple(sorted(active))
    if len(active) == 0:
        raise ValueError("active set must be nonempty")
    if not set(active) <= set(range(1, p + 1)):
        raise ValueError("active must be a subset of {1..p}")
    if n < 2:
        raise ValueError("need n >= 2 units")
    grid = np.arange(1.0, n_times + 1.0)
    names = [f"ch{j}" for j in range(1, p + 1)]
    units = []
    latents = []
    rates = np.zeros(n)
    mixes = np.zeros((n, len(active)))
    for i in range(n):
        g = rng.generator("fused", i)
        # crossing exactly at a grid point keeps the noiseless construction exact
        k_star = g.integers(max(5, n_times // 4), n_times)
        rate = 1.0 / grid[k_star]
        censored = g.uniform() < censor_frac
        if censored:
            k_last = g.integers(max(3, n_times // 5), k_star)
            delta = 0
        else:
            k_last = k_star
            delta = 1
        times = grid[: k_last + 1]
        w = rate * times
        mix = g.uniform(0.3, 0.7, size=len(active))
        mix = mix / np.sum(mix)
        # transient disturbance with zero-sum weights over the active set
        wiggle = noise_sd * 0.5 * g.standard_normal(len(times))
        vweights = g.standard_normal(len(active))
        vweights = vweights - np.mean(vweights)
        chans = {}
        for a, j in enumerate(active):
            slope = mix[a] * (1.0 + noise_sd * g.standard_normal())
            slope = max(slope, 0.02)
            chans[f"ch{j}"] = slope * w + vweights[a] * wiggle
        inactive = [j for j in range(1, p + 1) if j not in active]
        for j in inactive:
            a0 = g.standard_normal()
            chans[f"ch{j}"] = a0 + 0.3 * g.standard_normal(len(times))
        units.append(
            UnitRecord(
                unit_id=f"u{i:03d}",
                times=times,
                channels=chans,
                event_time=times[-1] if delta else None,
                event_indicator=delta,
            )
        )
        latents.append(w)
        rates[i] = rate
        mixes[i] = mix
    ds = Dataset(units=units, channel_names=names, meta={"generator": "fused_index"})
    truth = FusedIndexTruth(
        active=active,
        threshold=1.0,
        latent_paths=latents,
        rates=rates,
        mixes=mixes,
        noise_sd=noise_sd,
    )
    return ds, truth


@dataclass(frozen=True)
class CopulaWienerTruth:
    model: CopulaWienerModel
    omegas: np.ndarray
    latent: np.ndarray  # (n, p, len(grid))
    grid: np.ndarray


def synth_copula_wiener(model: CopulaWienerModel, n, grid, rng: RngSpec, x=None):
    """Forward-simulate the copula Wiener model into a Dataset plus truth."""
    grid = np.asarray(grid, dtype=float)
    g = rng.generator("copula-wiener")
    Y, D, omegas = simulate_paths(model, n, grid, g, x=x)
    names = [f"ch{j}" for j in range(1, model.p + 1)]
    units = []
    for i in range(n):
        chans = {names[j]: Y[i, j, :] for j in range(model.p)}
        units.append(UnitRecord(unit_id=f"u{i:03d}", times=grid, channels=chans))
    ds = Dataset(units=units, channel_names=names, meta={"generator": "copula_wiener"})
    truth = CopulaWienerTruth(model=model, omegas=omegas, latent=D, grid=grid)
    return ds, truth
