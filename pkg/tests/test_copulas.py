"""Copula sampling, density, and fitting tests."""

import numpy as np
import pytest
from scipy import stats

from degkit.copulas import (CopulaSpec, fit_gaussian_corr, fit_theta,
                            log_density, sample_copula)


def test_spec_validation():
    with pytest.raises(ValueError):
        CopulaSpec("nope")
    with pytest.raises(ValueError):
        CopulaSpec("gaussian", np.array([[1.0, 0.5]]))
    with pytest.raises(ValueError):
        CopulaSpec("gaussian", np.array([[2.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        CopulaSpec("gaussian", np.array([[1.0, 1.5], [1.5, 1.0]]))
    with pytest.raises(ValueError):
        CopulaSpec("clayton", -1.0)
    with pytest.raises(ValueError):
        CopulaSpec("gumbel", 0.5)
    with pytest.raises(ValueError):
        CopulaSpec("frank", 0.0)


def test_gaussian_kendall_tau_identity():
    # tau = (2/pi) arcsin(rho) for the Gaussian copula
    rho = 0.8
    spec = CopulaSpec("gaussian", np.array([[1.0, rho], [rho, 1.0]]))
    u = sample_copula(spec, 2, 20_000, np.random.default_rng(1))
    tau = stats.kendalltau(u[:, 0], u[:, 1]).statistic
    assert abs(tau - 2.0 / np.pi * np.arcsin(rho)) < 0.05


@pytest.mark.parametrize("spec", [
    CopulaSpec("independence"),
    CopulaSpec("gaussian", np.array([[1.0, 0.6], [0.6, 1.0]])),
    CopulaSpec("clayton", 2.0),
    CopulaSpec("gumbel", 1.7),
    CopulaSpec("frank", 4.0),
    CopulaSpec("frank", -4.0),
])
def test_samplers_have_uniform_marginals(spec):
    u = sample_copula(spec, 2, 4000, np.random.default_rng(2))
    assert u.shape == (4000, 2)
    assert np.all((u > 0) & (u < 1))
    for j in range(2):
        assert stats.kstest(u[:, j], "uniform").pvalue > 0.01


def test_dependent_samplers_are_positively_dependent():
    for spec in [CopulaSpec("clayton", 3.0), CopulaSpec("gumbel", 2.5),
                 CopulaSpec("frank", 6.0)]:
        u = sample_copula(spec, 2, 4000, np.random.default_rng(3))
        assert stats.spearmanr(u[:, 0], u[:, 1]).statistic > 0.3
    u = sample_copula(CopulaSpec("frank", -6.0), 2, 4000,
                      np.random.default_rng(3))
    assert stats.spearmanr(u[:, 0], u[:, 1]).statistic < -0.3


def test_negative_frank_sampling_is_bivariate_only():
    with pytest.raises(ValueError):
        sample_copula(CopulaSpec("frank", -2.0), 3, 10, np.random.default_rng(0))


def test_gaussian_log_density_matches_mvn_oracle():
    R = np.array([[1.0, 0.4, 0.2], [0.4, 1.0, -0.3], [0.2, -0.3, 1.0]])
    spec = CopulaSpec("gaussian", R)
    u = np.random.default_rng(4).uniform(0.05, 0.95, size=(50, 3))
    z = stats.norm.ppf(u)
    oracle = stats.multivariate_normal(cov=R).logpdf(z) \
        - stats.norm.logpdf(z).sum(axis=1)
    assert np.allclose(log_density(spec, u), oracle, atol=1e-10)


def test_archimedean_density_integrates_to_one():
    # 2-d midpoint quadrature of c(u, v) over the unit square
    g = np.linspace(0, 1, 201)[:-1] + 1.0 / 400
    U, V = np.meshgrid(g, g)
    pts = np.column_stack([U.ravel(), V.ravel()])
    for spec in [CopulaSpec("clayton", 2.0), CopulaSpec("gumbel", 1.8),
                 CopulaSpec("frank", 5.0)]:
        mass = np.mean(np.exp(log_density(spec, pts)))
        assert abs(mass - 1.0) < 0.02, spec.family


def test_gumbel_frank_density_bivariate_only():
    u = np.full((5, 3), 0.4)
    for fam, theta in [("gumbel", 1.5), ("frank", 2.0)]:
        with pytest.raises(NotImplementedError):
            log_density(CopulaSpec(fam, theta), u)


def test_fit_gaussian_corr_and_fit_theta_recover_truth():
    rng = np.random.default_rng(5)
    R = np.array([[1.0, 0.7], [0.7, 1.0]])
    u = sample_copula(CopulaSpec("gaussian", R), 2, 6000, rng)
    R_hat = fit_gaussian_corr(u)
    assert abs(R_hat[0, 1] - 0.7) < 0.05

    u = sample_copula(CopulaSpec("clayton", 2.0), 2, 6000, rng)
    assert abs(fit_theta("clayton", u) - 2.0) < 0.3
