"""Copula sampling, densities, and parameter fitting.

Sampling uses Cholesky for the Gaussian family and the Marshall-Olkin frailty
representation for the Archimedean families.  Densities are available for the
Gaussian and Clayton families in any dimension and for Gumbel/Frank in the
bivariate case, which is what the pseudo-likelihood fitting step needs.
"""

from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

FAMILIES = ("gaussian", "clayton", "gumbel", "frank", "independence")


@dataclass(frozen=True)
class CopulaSpec:
    family: str
    params: object = None  # correlation matrix (gaussian) or scalar theta

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown copula family {self.family!r}")
        if self.family == "gaussian":
            R = np.asarray(self.params, dtype=float)
            if R.ndim != 2 or R.shape[0] != R.shape[1]:
                raise ValueError("gaussian copula needs a square correlation matrix")
            if not np.allclose(np.diag(R), 1.0):
                raise ValueError("correlation matrix must have unit diagonal")
            if np.min(np.linalg.eigvalsh(R)) < -1e-10:
                raise ValueError("correlation matrix must be positive semidefinite")
            object.__setattr__(self, "params", R)
        elif self.family == "clayton":
            if not self.params > 0:
                raise ValueError("clayton theta must be > 0")
        elif self.family == "gumbel":
            if not self.params >= 1:
                raise ValueError("gumbel theta must be >= 1")
        elif self.family == "frank":
            if self.params == 0:
                raise ValueError("frank theta must be nonzero")

    @property
    def theta(self):
        return self.params


def sample_copula(spec: CopulaSpec, p: int, n: int, rng: np.random.Generator):
    """Draw n joint-uniform vectors of dimension p."""
    if spec.family == "independence":
        return rng.uniform(size=(n, p))
    if spec.family == "gaussian":
        R = spec.params
        if R.shape[0] != p:
            raise ValueError("correlation matrix dimension does not match p")
        # eigen factor tolerates the comonotone (rank-deficient) limit
        w, V = np.linalg.eigh(R)
        A = V * np.sqrt(np.clip(w, 0.0, None))
        z = rng.standard_normal((n, p)) @ A.T
        return stats.norm.cdf(z)
    theta = float(spec.params)
    if spec.family == "frank" and theta < 0:
        if p != 2:
            raise ValueError("negative-theta frank sampling is bivariate only")
        u = sample_copula(CopulaSpec("frank", -theta), 2, n, rng)
        return np.column_stack([u[:, 0], 1.0 - u[:, 1]])
    e = rng.exponential(size=(n, p))
    if spec.family == "clayton":
        v = rng.gamma(shape=1.0 / theta, scale=1.0, size=n)
        return (1.0 + e / v[:, None]) ** (-1.0 / theta)
    if spec.family == "gumbel":
        if theta == 1.0:
            return np.exp(-e)
        v = _positive_stable(1.0 / theta, n, rng)
        return np.exp(-((e / v[:, None]) ** (1.0 / theta)))
    if spec.family == "frank":
        v = rng.logseries(1.0 - np.exp(-theta), size=n).astype(float)
        inner = 1.0 - (1.0 - np.exp(-theta)) * np.exp(-e / v[:, None])
        return -np.log(np.clip(inner, 1e-300, None)) / theta
    raise AssertionError


def _positive_stable(alpha, n, rng):
    """Sample S with Laplace transform exp(-s^alpha), 0 < alpha < 1 (CMS)."""
    v = rng.uniform(0.0, np.pi, size=n)
    w = rng.exponential(size=n)
    a = np.sin(alpha * v) / np.sin(v) ** (1.0 / alpha)
    b = (np.sin((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha)
    return a * b


def log_density(spec: CopulaSpec, u: np.ndarray) -> np.ndarray:
    """Pointwise log copula density at rows of u (values clipped off {0,1})."""
    u = np.clip(np.asarray(u, dtype=float), 1e-12, 1 - 1e-12)
    p = u.shape[1]
    if spec.family == "independence":
        return np.zeros(u.shape[0])
    if spec.family == "gaussian":
        R = spec.params
        z = stats.norm.ppf(u)
        sign, logdet = np.linalg.slogdet(R)
        Rinv = np.linalg.inv(R)
        quad = np.einsum("ij,jk,ik->i", z, Rinv - np.eye(p), z)
        return -0.5 * logdet - 0.5 * quad
    theta = float(spec.params)
    if spec.family == "clayton":
        s = np.sum(u ** (-theta), axis=1) - (p - 1)
        lg = np.sum(np.log1p(theta * np.arange(1, p)))
        return (
            lg
            - (theta + 1.0) * np.sum(np.log(u), axis=1)
            - (p + 1.0 / theta) * np.log(s)
        )
    if p != 2:
        raise NotImplementedError(f"{spec.family} density implemented for p=2 only")
    if spec.family == "gumbel":
        x, y = -np.log(u[:, 0]), -np.log(u[:, 1])
        A = (x**theta + y**theta) ** (1.0 / theta)
        logC = -A
        return (
            logC
            + x
            + y
            + (theta - 1.0) * (np.log(x) + np.log(y))
            + (1.0 - 2.0 * theta) * np.log(A)
            + np.log(A + theta - 1.0)
        )
    if spec.family == "frank":
        a, b = u[:, 0], u[:, 1]
        em = 1.0 - np.exp(-theta)
        denom = em - (1.0 - np.exp(-theta * a)) * (1.0 - np.exp(-theta * b))
        return (
            np.log(np.abs(theta * em))
            - theta * (a + b)
            - 2.0 * np.log(np.abs(denom))
        )
    raise AssertionError


def fit_gaussian_corr(u: np.ndarray, weights=None) -> np.ndarray:
    """Weighted normal-scores correlation estimate of a Gaussian copula."""
    z = stats.norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    if weights is None:
        weights = np.ones(len(z))
    w = np.asarray(weights, dtype=float)
    w = w / np.sum(w)
    m = w @ z
    zc = z - m
    S = (zc * w[:, None]).T @ zc
    d = np.sqrt(np.clip(np.diag(S), 1e-12, None))
    R = S / np.outer(d, d)
    np.fill_diagonal(R, 1.0)
    return R


_THETA_BOUNDS = {"clayton": (1e-3, 50.0), "gumbel": (1.0 + 1e-6, 50.0), "frank": (1e-3, 50.0)}


def fit_theta(family: str, u: np.ndarray, weights=None) -> float:
    """Weighted pseudo-likelihood estimate of an Archimedean parameter."""
    if weights is None:
        weights = np.ones(len(u))
    w = np.asarray(weights, dtype=float)
    w = w / np.sum(w)
    lo, hi = _THETA_BOUNDS[family]

    def neg(theta):
        return -float(w @ log_density(CopulaSpec(family, theta), u))

    res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded")
    return float(res.x)
