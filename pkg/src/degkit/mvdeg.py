"""Copula random-effects multivariate Wiener degradation model.

Each channel j follows, conditional on a unit-level random drift omega_j,

    D_j(t) = omega_j * Lambda_j(t; x) + sigma_j * B(Lambda_j(t; x)),

with the omega vector coupled across channels by a copula on marginal
distributions, and independent Gaussian observation noise at measurement
instants.  Conditional on omega every channel is a well-defined Wiener
process, so increments remain infinitely divisible - the point of placing
the dependence in the random effects rather than on the increments.
"""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, stats
from scipy.linalg import solve_triangular

from .copulas import (CopulaSpec, fit_gaussian_corr, fit_theta, log_density,
                      sample_copula)
from .data import UnitRecord

MARGINAL_FAMILIES = ("lognormal", "weibull", "gamma")


@dataclass(frozen=True)
class ShapeFn:
    """Time-transform Lambda_j(t; x) = exp(x'gamma) * t**kappa."""

    form: str = "power"
    kappa: float = 1.0
    gamma: np.ndarray | None = None

    def __post_init__(self):
        if self.form not in ("power", "exp-covariate-power"):
            raise ValueError(f"unknown shape form {self.form!r}")
        if not self.kappa > 0:
            raise ValueError("kappa must be > 0")
        if self.form == "exp-covariate-power" and self.gamma is None:
            raise ValueError("exp-covariate-power needs a gamma vector")

    def __call__(self, t, x=None):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("shape function defined for t >= 0")
        scale = 1.0
        if self.form == "exp-covariate-power":
            if x is None:
                raise ValueError("shape function needs covariates x")
            scale = float(np.exp(np.asarray(x) @ np.asarray(self.gamma)))
        return scale * t**self.kappa


@dataclass(frozen=True)
class OmegaMarginal:
    """Marginal law of a channel's random drift."""

    family: str
    params: tuple  # lognormal: (mu, sigma); weibull/gamma: (shape, scale)

    def __post_init__(self):
        if self.family not in MARGINAL_FAMILIES:
            raise ValueError(f"unknown marginal family {self.family!r}")
        if self.family == "lognormal":
            if self.params[1] < 0:
                raise ValueError("lognormal sigma must be >= 0")
        elif any(v <= 0 for v in self.params):
            raise ValueError(f"{self.family} parameters must be > 0")

    def _frozen(self):
        if self.family == "lognormal":
            mu, s = self.params
            return stats.lognorm(s=s, scale=np.exp(mu))
        if self.family == "weibull":
            shape, scale = self.params
            return stats.weibull_min(c=shape, scale=scale)
        shape, scale = self.params
        return stats.gamma(a=shape, scale=scale)

    def ppf(self, u):
        if self.family == "lognormal" and self.params[1] == 0:
            return np.full_like(np.asarray(u, dtype=float), np.exp(self.params[0]))
        return self._frozen().ppf(u)

    def cdf(self, w):
        if self.family == "lognormal" and self.params[1] == 0:
            return np.where(np.asarray(w, float) < np.exp(self.params[0]), 0.0, 1.0)
        return self._frozen().cdf(w)


@dataclass(frozen=True)
class CopulaWienerModel:
    p: int
    shapes: tuple
    sigmas: np.ndarray
    omega_marginals: tuple
    copula: CopulaSpec
    noise_sd: np.ndarray = None

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        object.__setattr__(self, "sigmas", np.asarray(self.sigmas, dtype=float))
        noise = self.noise_sd if self.noise_sd is not None else np.zeros(self.p)
        object.__setattr__(self, "noise_sd", np.asarray(noise, dtype=float))
        for nm, arr, n in (("shapes", self.shapes, self.p),
                           ("sigmas", self.sigmas, self.p),
                           ("omega_marginals", self.omega_marginals, self.p),
                           ("noise_sd", self.noise_sd, self.p)):
            if len(arr) != n:
                raise ValueError(f"{nm} must have length p={n}")
        if np.any(self.sigmas < 0) or np.any(self.noise_sd < 0):
            raise ValueError("scale parameters must be nonnegative")


def sample_omega(model: CopulaWienerModel, n: int, rng) -> np.ndarray:
    """Draw n random-drift vectors (n, p) from the copula + marginals."""
    u = sample_copula(model.copula, model.p, n, rng)
    out = np.empty_like(u)
    for j in range(model.p):
        out[:, j] = model.omega_marginals[j].ppf(u[:, j])
    return out


def simulate_paths(model, n, grid, rng, x=None, omegas=None):
    """Forward-simulate n units on a time grid starting at 0.

    Returns (observed Y, latent D, omegas), each with shape (n, p, len(grid))
    for the paths; the latent D starts at 0 at t=0.
    """
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing and start at 0")
    if omegas is None:
        omegas = sample_omega(model, n, rng)
    K = len(grid)
    D = np.zeros((n, model.p, K))
    Y = np.zeros((n, model.p, K))
    for j in range(model.p):
        lam = model.shapes[j](grid, x)
        dlam = np.diff(lam)
        if np.any(dlam < 0):
            raise ValueError(f"shape function for channel {j} is non-monotone on grid")
        inc = omegas[:, j : j + 1] * dlam + model.sigmas[j] * np.sqrt(dlam) * (
            rng.standard_normal((n, K - 1))
        )
        D[:, j, 1:] = np.cumsum(inc, axis=1)
        Y[:, j, :] = D[:, j, :] + model.noise_sd[j] * rng.standard_normal((n, K))
    return Y, D, omegas


def _channel_quadratic(model, j, times, y, x=None):
    """Coefficients (a, b, const) of the per-channel conditional log-likelihood,
    which is quadratic in omega_j: ll = const + b*omega - 0.5*a*omega**2."""
    lam = model.shapes[j](times, x)
    sig2 = model.sigmas[j] ** 2
    tau2 = model.noise_sd[j] ** 2
    if tau2 == 0:
        t_aug = np.concatenate([[0.0], lam])
        y_aug = np.concatenate([[0.0], y])
        dlam = np.diff(t_aug)
        dy = np.diff(y_aug)
        if np.any((dlam <= 0) & (np.abs(dy) > 1e-12)):
            return 0.0, 0.0, -np.inf
        keep = dlam > 0
        dlam, dy = dlam[keep], dy[keep]
        const = -0.5 * np.sum(np.log(2 * np.pi * sig2 * dlam)) - np.sum(
            dy**2 / dlam
        ) / (2 * sig2)
        b = np.sum(dy) / sig2
        a = np.sum(dlam) / sig2
        return a, b, const
    K = sig2 * np.minimum.outer(lam, lam) + tau2 * np.eye(len(lam))
    L = np.linalg.cholesky(K)
    yt = solve_triangular(L, y, lower=True)
    lt = solve_triangular(L, lam, lower=True)
    const = (
        -0.5 * len(lam) * np.log(2 * np.pi)
        - np.sum(np.log(np.diag(L)))
        - 0.5 * float(yt @ yt)
    )
    return float(lt @ lt), float(lt @ yt), const


def loglik_conditional(model, unit: UnitRecord, omega, channel_names=None, x=None):
    """Exact Gaussian log-density of a unit's observations given its omega vector."""
    omega = np.asarray(omega, dtype=float)
    if channel_names is None:
        channel_names = sorted(unit.channels)
    if len(channel_names) != model.p:
        raise ValueError("unit channel count does not match model p")
    total = 0.0
    for j, name in enumerate(channel_names):
        a, b, const = _channel_quadratic(model, j, unit.times, unit.channels[name], x)
        total += const + b * omega[j] - 0.5 * a * omega[j] ** 2
    return float(total)


# ---------------------------------------------------------------------------
# Monte Carlo EM
# ---------------------------------------------------------------------------


@dataclass
class McemOptions:
    mc_draws: int = 1000
    max_iters: int = 25
    tol: float = 1e-4
    min_ess: float = 10.0
    kappa_bounds: tuple = (0.2, 5.0)
    fit_kappa: bool = True


@dataclass
class McemTrace:
    loglik: list = field(default_factory=list)
    params: list = field(default_factory=list)
    ess_min: list = field(default_factory=list)


def _estep(model, units_data, S, rng, x=None):
    """Per-unit self-normalized importance sampling.

    The conditional log-likelihood is quadratic in each omega_j, so the
    proposal is the likelihood-matched normal truncated to omega > 0; the
    importance weight then reduces to the prior density at the draw, which
    keeps the effective sample size healthy even for tight posteriors.
    Returns (omegas (n,S,p), weights (n,S), marginal loglik estimate)."""
    n, p = len(units_data), model.p
    coefs = np.array(
        [[_channel_quadratic(model, j, t, ys[j], x) for j in range(p)]
         for t, ys in units_data]
    )  # (n, p, 3)
    a, b, const = coefs[..., 0], coefs[..., 1], coefs[..., 2]
    a_safe = np.maximum(a, 1e-8)
    mu = b / a_safe
    sd = 1.0 / np.sqrt(a_safe)
    lo = stats.norm.cdf(-mu / sd)  # proposal CDF mass below zero
    u = rng.uniform(size=(n, S, p))
    uu = np.clip(lo[:, None, :] + u * (1.0 - lo[:, None, :]), 1e-12, 1 - 1e-16)
    om = mu[:, None, :] + sd[:, None, :] * stats.norm.ppf(uu)
    om = np.maximum(om, 1e-12)
    logq = (
        stats.norm.logpdf(om, mu[:, None, :], sd[:, None, :])
        - np.log(np.clip(1.0 - lo, 1e-300, None))[:, None, :]
    )
    ll = const[:, None, :] + b[:, None, :] * om - 0.5 * a[:, None, :] * om**2
    logp = np.zeros((n, S))
    ucop = np.full((n, S, p), 0.5)
    for j in range(p):
        marg_j = model.omega_marginals[j]
        if marg_j.family == "lognormal" and marg_j.params[1] == 0:
            # degenerate drift: point mass, excluded from proposal accounting
            om[:, :, j] = np.exp(marg_j.params[0])
            ll[:, :, j] = (const[:, None, j] + b[:, None, j] * om[:, :, j]
                           - 0.5 * a[:, None, j] * om[:, :, j] ** 2)
            logq[:, :, j] = 0.0
            continue
        logp += marg_j._frozen().logpdf(om[:, :, j])
        ucop[:, :, j] = marg_j.cdf(om[:, :, j])
    # clip pseudo-observations: a badly mis-specified interim model can push
    # the marginal CDF to exactly 0 or 1, where every copula density is -inf
    ucop = np.clip(ucop, 1e-12, 1.0 - 1e-12)
    logp += log_density(model.copula, ucop.reshape(n * S, p)).reshape(n, S)
    logw = np.sum(ll, axis=2) + logp - np.sum(logq, axis=2)
    logw = np.where(np.isfinite(logw), logw, -np.inf)
    lmax = np.max(logw, axis=1, keepdims=True)
    # all-draws-degenerate unit: fall back to uniform weights
    bad = ~np.isfinite(lmax[:, 0])
    if np.any(bad):
        warnings.warn(
            f"{int(np.sum(bad))} unit(s) have zero likelihood under the "
            "current model (e.g. noise_sd=0 with noisy observations); "
            "their weights were set uniform",
            RuntimeWarning,
        )
        logw[bad] = 0.0
        lmax[bad] = 0.0
    w = np.exp(logw - lmax)
    tot = np.sum(w, axis=1, keepdims=True)
    weights = w / tot
    marg = float(np.sum(lmax[:, 0] + np.log(tot[:, 0] / S)))
    return om, weights, marg


def _update_channel(model, j, units_data, m1, m2, opts, x=None):
    """M-step for (sigma_j, kappa_j) given posterior moments of omega_j."""
    tau = model.noise_sd[j]

    def neg_q(log_kappa):
        kappa = float(np.exp(log_kappa))
        shape = replace(model.shapes[j], kappa=kappa)
        total_n = 0
        ss = 0.0
        logdet = 0.0
        for i, (times, ys) in enumerate(units_data):
            lam = shape(times, x)
            t_aug = np.concatenate([[0.0], lam])
            y_aug = np.concatenate([[0.0], ys[j]])
            dlam = np.diff(t_aug)
            dy = np.diff(y_aug)
            keep = dlam > 1e-14
            dlam, dy = dlam[keep], dy[keep]
            total_n += len(dlam)
            ss += float(
                np.sum(dy**2 / dlam) - 2 * m1[i] * np.sum(dy) + m2[i] * np.sum(dlam)
            )
            logdet += float(np.sum(np.log(dlam)))
        sig2 = max(ss / total_n, 1e-12)
        q = -0.5 * total_n * np.log(2 * np.pi * sig2) - 0.5 * logdet - 0.5 * total_n
        return -q, np.sqrt(sig2)

    if tau > 0:
        return _update_channel_noisy(model, j, units_data, m1, m2, opts, x)
    if opts.fit_kappa:
        lo, hi = np.log(opts.kappa_bounds[0]), np.log(opts.kappa_bounds[1])
        res = optimize.minimize_scalar(
            lambda lk: neg_q(lk)[0], bounds=(lo, hi), method="bounded"
        )
        log_kappa = float(res.x)
    else:
        log_kappa = np.log(model.shapes[j].kappa)
    _, sigma = neg_q(log_kappa)
    return sigma, float(np.exp(log_kappa))


def _update_channel_noisy(model, j, units_data, m1, m2, opts, x=None):
    """Dense-covariance M-step used when observation noise is present."""
    tau2 = model.noise_sd[j] ** 2

    def neg_q(params):
        log_sigma, log_kappa = params
        sig2 = np.exp(2 * log_sigma)
        shape = replace(model.shapes[j], kappa=float(np.exp(log_kappa)))
        q = 0.0
        for i, (times, ys) in enumerate(units_data):
            lam = shape(times, x)
            K = sig2 * np.minimum.outer(lam, lam) + tau2 * np.eye(len(lam))
            L = np.linalg.cholesky(K)
            yt = solve_triangular(L, ys[j], lower=True)
            lt = solve_triangular(L, lam, lower=True)
            q += (
                -0.5 * len(lam) * np.log(2 * np.pi)
                - np.sum(np.log(np.diag(L)))
                - 0.5 * float(yt @ yt)
                + m1[i] * float(lt @ yt)
                - 0.5 * m2[i] * float(lt @ lt)
            )
        return -q

    x0 = [np.log(model.sigmas[j]), np.log(model.shapes[j].kappa)]
    if not opts.fit_kappa:
        res = optimize.minimize_scalar(
            lambda ls: neg_q([ls, x0[1]]),
            bounds=(x0[0] - 3, x0[0] + 3),
            method="bounded",
        )
        return float(np.exp(res.x)), model.shapes[j].kappa
    res = optimize.minimize(neg_q, x0, method="Nelder-Mead")
    return float(np.exp(res.x[0])), float(np.exp(res.x[1]))


def _update_marginal(marg: OmegaMarginal, omega_j, pooled_w):
    if marg.family == "lognormal":
        if marg.params[1] == 0:
            return marg  # degenerate drift held fixed
        lw = np.log(np.clip(omega_j, 1e-300, None))
        mu = float(pooled_w @ lw)
        var = float(pooled_w @ (lw - mu) ** 2)
        return OmegaMarginal("lognormal", (mu, float(np.sqrt(max(var, 1e-12)))))

    def neg(params):
        shape, scale = np.exp(params)
        if marg.family == "weibull":
            lp = stats.weibull_min.logpdf(omega_j, c=shape, scale=scale)
        else:
            lp = stats.gamma.logpdf(omega_j, a=shape, scale=scale)
        return -float(pooled_w @ lp)

    x0 = np.log(marg.params)
    res = optimize.minimize(neg, x0, method="Nelder-Mead")
    shape, scale = np.exp(res.x)
    return OmegaMarginal(marg.family, (float(shape), float(scale)))


def _update_copula(model, omegas, pooled_w):
    if model.copula.family == "independence" or model.p == 1:
        return model.copula
    u = np.column_stack(
        [model.omega_marginals[j].cdf(omegas[:, j]) for j in range(model.p)]
    )
    if model.copula.family == "gaussian":
        return CopulaSpec("gaussian", fit_gaussian_corr(u, pooled_w))
    theta = fit_theta(model.copula.family, u, pooled_w)
    return CopulaSpec(model.copula.family, theta)


def fit_mcem(data, init: CopulaWienerModel, opts: McemOptions = None, rng_spec=None,
             x=None):
    """Fit the copula Wiener model by Monte Carlo EM.

    The E-step uses self-normalized importance sampling from the copula prior
    with shared atoms across units; the M-step updates (sigma_j, kappa_j) by
    profile/numerical maximization, the marginals by weighted ML, and the
    copula parameter by weighted pseudo-likelihood on the probability-integral
    transformed draws.  Observation noise scales are held at their initial
    values.
    """
    opts = opts or McemOptions()
    if rng_spec is None:
        raise ValueError("fit_mcem needs an RngSpec for the E-step draws")
    names = data.channel_names
    if len(names) != init.p:
        raise ValueError("data channel count does not match model p")
    units_data = [
        (u.times, [u.channels[nm] for nm in names]) for u in data.units
    ]
    model = init
    trace = McemTrace()
    prev = -np.inf
    for it in range(opts.max_iters):
        rng = rng_spec.generator("mcem", it)
        S = opts.mc_draws
        omegas, weights, marg = _estep(model, units_data, S, rng, x)
        ess = 1.0 / np.sum(weights**2, axis=1)
        if np.min(ess) < opts.min_ess:
            warnings.warn(
                f"MCEM iteration {it}: min ESS {np.min(ess):.1f} < {opts.min_ess}; "
                "doubling mc_draws"
            )
            S = 2 * S
            omegas, weights, marg = _estep(model, units_data, S, rng, x)
            ess = 1.0 / np.sum(weights**2, axis=1)
            if np.min(ess) < opts.min_ess:
                raise RuntimeError(
                    f"MCEM importance weights degenerate (min ESS {np.min(ess):.1f})"
                )
        trace.loglik.append(marg)
        trace.ess_min.append(float(np.min(ess)))

        n_units = len(units_data)
        flat_om = omegas.reshape(n_units * omegas.shape[1], model.p)
        flat_w = (weights / n_units).ravel()
        sigmas = model.sigmas.copy()
        shapes = list(model.shapes)
        marginals = list(model.omega_marginals)
        for j in range(model.p):
            m1 = np.sum(weights * omegas[:, :, j], axis=1)
            m2 = np.sum(weights * omegas[:, :, j] ** 2, axis=1)
            sigma_j, kappa_j = _update_channel(model, j, units_data, m1, m2, opts, x)
            sigmas[j] = sigma_j
            shapes[j] = replace(model.shapes[j], kappa=kappa_j)
            marginals[j] = _update_marginal(model.omega_marginals[j],
                                            flat_om[:, j], flat_w)
        model = replace(
            model,
            sigmas=sigmas,
            shapes=tuple(shapes),
            omega_marginals=tuple(marginals),
        )
        model = replace(model, copula=_update_copula(model, flat_om, flat_w))
        trace.params.append(_param_snapshot(model))
        if it > 2 and abs(marg - prev) < opts.tol * (1 + abs(prev)):
            break
        prev = marg
    return model, trace


def _param_snapshot(model):
    snap = {
        "sigmas": model.sigmas.tolist(),
        "kappas": [s.kappa for s in model.shapes],
        "marginals": [(m.family, tuple(map(float, m.params))) for m in model.omega_marginals],
    }
    if model.copula.family == "gaussian":
        snap["copula"] = ("gaussian", np.asarray(model.copula.params).tolist())
    else:
        snap["copula"] = (model.copula.family, model.copula.params)
    return snap


# ---------------------------------------------------------------------------
# First passage
# ---------------------------------------------------------------------------


def first_passage(model, thresholds, mode="any", n_mc=10000, rng=None, t_grid=None,
                  x=None):
    """Monte Carlo failure-time CDF by first threshold crossing.

    Crossing between grid points is resolved with the Brownian-bridge crossing
    probability, so the CDF evaluated on the grid is unbiased for the
    continuous-time first-passage law.  Returns (t_grid, cdf).
    """
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=float))
    if len(thresholds) != model.p:
        raise ValueError("need one threshold per channel")
    if np.any(thresholds <= 0):
        raise ValueError("thresholds must be > 0")
    if mode not in ("any", "all"):
        raise ValueError("mode must be 'any' or 'all'")
    if n_mc < 1000:
        raise ValueError("n_mc must be >= 1000")
    if t_grid is None:
        raise ValueError("supply a t_grid (strictly increasing, starting at 0)")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing and start at 0")
    omegas = sample_omega(model, n_mc, rng)
    K = len(t_grid)
    cross_idx = np.full((n_mc, model.p), K, dtype=int)  # K == never crossed
    for j in range(model.p):
        lam = model.shapes[j](t_grid, x)
        dlam = np.diff(lam)
        df = thresholds[j]
        sig = model.sigmas[j]
        if sig == 0:
            D = omegas[:, j : j + 1] * lam[None, :]
            hit = D >= df
        else:
            inc = omegas[:, j : j + 1] * dlam + sig * np.sqrt(dlam) * rng.standard_normal(
                (n_mc, K - 1)
            )
            D = np.concatenate([np.zeros((n_mc, 1)), np.cumsum(inc, axis=1)], axis=1)
            hit = D >= df
            # bridge correction for crossings inside an interval
            with np.errstate(over="ignore"):
                gap = (df - D[:, :-1]) * (df - D[:, 1:])
                p_cross = np.exp(
                    -2.0 * np.clip(gap, 0.0, None) / (sig**2 * np.maximum(dlam, 1e-300))
                )
            bridge = (rng.uniform(size=(n_mc, K - 1)) < p_cross) & ~hit[:, :-1] & ~hit[:, 1:]
            hit[:, 1:] |= bridge
        crossed = np.maximum.accumulate(hit, axis=1)
        any_cross = crossed[:, -1]
        first = np.argmax(crossed, axis=1)
        cross_idx[:, j] = np.where(any_cross, first, K)
    combined = cross_idx.min(axis=1) if mode == "any" else cross_idx.max(axis=1)
    counts = np.bincount(combined, minlength=K + 1)[:K]
    cdf = np.cumsum(counts) / n_mc
    crossing = np.where(combined < K, t_grid[np.minimum(combined, K - 1)], np.inf)
    return FirstPassageResult(times=t_grid, cdf=cdf, crossing_times=crossing)


@dataclass(frozen=True)
class FirstPassageResult:
    times: np.ndarray
    cdf: np.ndarray
    crossing_times: np.ndarray  # np.inf for paths that never crossed


def model_to_dict(model: CopulaWienerModel) -> dict:
    """JSON-ready snapshot of a copula Wiener model."""
    cop = model.copula
    params = np.asarray(cop.params).tolist() if cop.family == "gaussian" else cop.params
    return {
        "schema_version": "1",
        "p": model.p,
        "shapes": [
            {"form": s.form, "kappa": s.kappa,
             "gamma": None if s.gamma is None else np.asarray(s.gamma).tolist()}
            for s in model.shapes
        ],
        "sigmas": model.sigmas.tolist(),
        "omega_marginals": [
            {"family": m.family, "params": list(map(float, m.params))}
            for m in model.omega_marginals
        ],
        "copula": {"family": cop.family, "params": params},
        "noise_sd": model.noise_sd.tolist(),
    }


def model_from_dict(d: dict) -> CopulaWienerModel:
    if d.get("schema_version") != "1":
        raise ValueError("unsupported model schema version")
    shapes = tuple(
        ShapeFn(form=s["form"], kappa=s["kappa"],
                gamma=None if s["gamma"] is None else np.asarray(s["gamma"]))
        for s in d["shapes"]
    )
    marginals = tuple(
        OmegaMarginal(family=m["family"], params=tuple(m["params"]))
        for m in d["omega_marginals"]
    )
    cop = d["copula"]
    params = np.asarray(cop["params"]) if cop["family"] == "gaussian" else cop["params"]
    return CopulaWienerModel(
        p=int(d["p"]),
        shapes=shapes,
        sigmas=np.asarray(d["sigmas"]),
        omega_marginals=marginals,
        copula=CopulaSpec(family=cop["family"], params=params),
        noise_sd=np.asarray(d["noise_sd"]),
    )
