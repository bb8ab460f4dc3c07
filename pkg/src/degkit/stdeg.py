"""Bayesian spatio-temporal degradation fields on a regular grid.

The latent field follows a linear-Gaussian state-space model whose propagator
is I + alpha*L for a discrete 5-point Laplacian L.  Because L is symmetric and
the innovation/observation covariances are scalar multiples of the identity,
everything diagonalizes in the Laplacian eigenbasis: forward simulation,
forward-filtering backward-sampling, and likelihood evaluations all reduce to
m independent scalar state-space models, which keeps full Gibbs runs cheap.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class StGrid:
    rows: int
    cols: int
    h: float = 1.0
    boundary: str = "zero-flux"

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise ValueError("grid must be at least 2x2")
        if self.h <= 0:
            raise ValueError("cell spacing must be > 0")
        if self.boundary not in ("zero-flux", "fixed-value"):
            raise ValueError("boundary must be 'zero-flux' or 'fixed-value'")

    @property
    def m(self) -> int:
        return self.rows * self.cols


def laplacian(grid: StGrid):
    """Discrete 5-point Laplacian and per-cell missing-neighbor counts.

    Zero-flux: missing neighbors are dropped from the diagonal, so every row
    sums to zero (mass conservation).  Fixed-value: the diagonal keeps all
    four neighbors and `b_count` records how many lie outside the grid; those
    contribute the exogenous boundary forcing.
    """
    R, C, h = grid.rows, grid.cols, grid.h
    m = R * C
    L = np.zeros((m, m))
    b_count = np.zeros(m)
    for i in range(R):
        for j in range(C):
            k = i * C + j
            for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                ii, jj = i + di, j + dj
                if 0 <= ii < R and 0 <= jj < C:
                    L[k, ii * C + jj] += 1.0
                    L[k, k] -= 1.0
                else:
                    b_count[k] += 1.0
                    if grid.boundary == "fixed-value":
                        L[k, k] -= 1.0
    return L / h**2, b_count


def stability_interval(grid: StGrid):
    """Alpha values for which every eigenvalue of I + alpha*L has modulus <= 1."""
    L, _ = laplacian(grid)
    lam_min = float(np.min(np.linalg.eigvalsh(L)))
    return 0.0, 2.0 / abs(lam_min)


@dataclass
class StModel:
    grid: StGrid
    alpha: float
    q: float
    r: float
    mu0: object = 0.0
    s0: float = 0.0
    tau: int = 30
    boundary_series: object = None  # scalar boundary value per time, (tau+1,)
    eigvals: np.ndarray = field(init=False, repr=False)
    eigvecs: np.ndarray = field(init=False, repr=False)
    b_count: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if min(self.q, self.r, self.s0) < 0:
            raise ValueError("q, r, s0 must be >= 0")
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        L, b_count = laplacian(self.grid)
        lam, V = np.linalg.eigh(L)
        if np.max(np.abs(1.0 + self.alpha * lam)) > 1.0 + 1e-9:
            raise ValueError("unstable propagator: alpha outside the stable interval")
        self.eigvals = lam
        self.eigvecs = V
        self.b_count = b_count
        if self.grid.boundary == "fixed-value":
            if self.boundary_series is None:
                raise ValueError("fixed-value boundary requires boundary_series")
            bs = np.asarray(self.boundary_series, dtype=float)
            if bs.shape != (self.tau + 1,):
                raise ValueError("boundary_series must have length tau+1")
            self.boundary_series = bs

    @property
    def phi(self) -> np.ndarray:
        """Per-mode AR(1) coefficients of the propagator."""
        return 1.0 + self.alpha * self.eigvals

    def forcing(self, t: int) -> np.ndarray:
        """Mode-space exogenous input entering the transition into time t."""
        if self.grid.boundary != "fixed-value":
            return np.zeros(self.grid.m)
        beta = self.boundary_series[t - 1]
        spatial = self.alpha * self.b_count * beta / self.grid.h**2
        return self.eigvecs.T @ spatial

    def mu0_vector(self) -> np.ndarray:
        mu = np.asarray(self.mu0, dtype=float)
        if mu.ndim == 0:
            return np.full(self.grid.m, float(mu))
        if mu.shape == (self.grid.rows, self.grid.cols):
            return mu.ravel()
        if mu.shape != (self.grid.m,):
            raise ValueError("mu0 must be scalar, (m,), or (rows, cols)")
        return mu


def simulate_field(model: StModel, rng):
    """Exact forward draw of the state-space system.

    Returns (D, U) with shape (tau+1, rows, cols); D includes observation
    noise at every time including t=0.
    """
    g = model.grid
    m, T = g.m, model.tau
    phi = model.phi
    Vt = model.eigvecs
    u = Vt.T @ model.mu0_vector()
    if model.s0 > 0:
        u = u + np.sqrt(model.s0) * rng.standard_normal(m)
    U = np.empty((T + 1, m))
    U[0] = u
    for t in range(1, T + 1):
        u = phi * u + model.forcing(t)
        if model.q > 0:
            u = u + np.sqrt(model.q) * rng.standard_normal(m)
        U[t] = u
    U = U @ Vt.T  # back to the spatial basis
    D = U.copy()
    if model.r > 0:
        D = D + np.sqrt(model.r) * rng.standard_normal(D.shape)
    shape = (T + 1, g.rows, g.cols)
    return D.reshape(shape), U.reshape(shape)


# ---------------------------------------------------------------------------
# FFBS in the eigenbasis
# ---------------------------------------------------------------------------


def _filter(dstar, phi, q, r, mu0s, s0, forcing):
    """Scalar Kalman filters across all modes.  Data dstar is (T, m) for
    t=1..T; returns filtered means/variances for t=0..T."""
    T, m = dstar.shape
    fm = np.empty((T + 1, m))
    fv = np.empty((T + 1, m))
    fm[0], fv[0] = mu0s, s0
    mcur, vcur = fm[0].copy(), np.full(m, float(s0))
    for t in range(1, T + 1):
        pm = phi * mcur + forcing[t]
        pv = phi**2 * vcur + q
        K = pv / (pv + r)
        mcur = pm + K * (dstar[t - 1] - pm)
        vcur = (1.0 - K) * pv
        fm[t], fv[t] = mcur, vcur
    return fm, fv


def _marginal_loglik(dstar, lam, c0, alpha, q, r, mu0s, s0):
    """Exact log p(D | alpha, q, r) by the prediction-error decomposition.

    Runs the scalar Kalman filter in every mode simultaneously and sums the
    Gaussian innovation log densities; dstar is (T, m) mode-space data for
    t=1..T and c0 the (T, m) unscaled boundary forcing."""
    T, m = dstar.shape
    phi = 1.0 + alpha * lam
    mcur = np.asarray(mu0s, dtype=float).copy()
    vcur = np.full(m, float(s0))
    ll = 0.0
    for t in range(T):
        pm = phi * mcur + alpha * c0[t]
        pv = phi**2 * vcur + q
        s = pv + r
        innov = dstar[t] - pm
        ll += -0.5 * np.sum(np.log(2.0 * np.pi * s) + innov**2 / s)
        K = pv / s
        mcur = pm + K * innov
        vcur = (1.0 - K) * pv
    return ll


def _backward_sample(fm, fv, phi, q, forcing, rng):
    T = fm.shape[0] - 1
    u = np.empty_like(fm)
    u[T] = fm[T] + np.sqrt(fv[T]) * rng.standard_normal(fm.shape[1])
    for t in range(T - 1, -1, -1):
        denom = phi**2 * fv[t] + q
        gmat = fv[t] * phi / denom
        cm = fm[t] + gmat * (u[t + 1] - (phi * fm[t] + forcing[t + 1]))
        cv = fv[t] * q / denom
        u[t] = cm + np.sqrt(np.maximum(cv, 0.0)) * rng.standard_normal(fm.shape[1])
    return u


def ffbs_sample(data, grid: StGrid, alpha, q, r, mu0, s0, n_draws, rng,
                boundary_series=None):
    """Joint posterior draws of U_0..U_T given fixed (alpha, q, r).

    data: (T, rows, cols) observed at t=1..T.  Returns (n_draws, T+1, m)
    in the spatial basis."""
    data = np.asarray(data, dtype=float)
    T = data.shape[0]
    if min(q, r, s0) <= 0:
        raise ValueError("q, r, s0 must be > 0 for sampling")
    model = StModel(grid=grid, alpha=alpha, q=q, r=r, mu0=mu0, s0=s0,
                    tau=T, boundary_series=boundary_series)
    Vt = model.eigvecs
    dstar = data.reshape(T, grid.m) @ Vt
    forcing = np.array([model.forcing(t) for t in range(T + 1)])
    mu0s = Vt.T @ model.mu0_vector()
    fm, fv = _filter(dstar, model.phi, q, r, mu0s, s0, forcing)
    out = np.empty((n_draws, T + 1, grid.m))
    for d in range(n_draws):
        u = _backward_sample(fm, fv, model.phi, q, forcing, rng)
        out[d] = u @ Vt.T
    return out


# ---------------------------------------------------------------------------
# Gibbs sampler
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GibbsPriors:
    a_q: float = 2.0
    b_q: float = 0.1
    a_r: float = 2.0
    b_r: float = 0.1
    alpha_mean: float = 0.0
    alpha_sd: float = 1.0
    mu0: float = 0.0
    s0: float = 10.0


@dataclass
class StPosterior:
    alpha: np.ndarray
    q: np.ndarray
    r: np.ndarray
    u_draws: np.ndarray      # (n_stored, T+1, m), spatial basis
    thin_u: int
    rows: int
    cols: int
    h: float
    boundary: str
    tau: int
    accept_rate: float
    step: float
    boundary_series: object = None

    @property
    def n_draws(self) -> int:
        return len(self.alpha)

    def ess(self) -> dict:
        return {name: effective_sample_size(getattr(self, name))
                for name in ("alpha", "q", "r")}

    def mean_field(self) -> np.ndarray:
        """(T+1, rows, cols) average of the stored latent-field draws."""
        return np.mean(self.u_draws, axis=0).reshape(self.tau + 1, self.rows,
                                                     self.cols)

    def to_dict(self) -> dict:
        return {
            "schema_version": "1",
            "alpha": self.alpha.tolist(),
            "q": self.q.tolist(),
            "r": self.r.tolist(),
            "u_draws": self.u_draws.tolist(),
            "thin_u": self.thin_u,
            "rows": self.rows,
            "cols": self.cols,
            "h": self.h,
            "boundary": self.boundary,
            "tau": self.tau,
            "accept_rate": self.accept_rate,
            "step": self.step,
            "boundary_series": None if self.boundary_series is None
            else np.asarray(self.boundary_series).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StPosterior":
        if d.get("schema_version") != "1":
            raise ValueError("unsupported posterior schema version")
        return cls(
            alpha=np.asarray(d["alpha"]),
            q=np.asarray(d["q"]),
            r=np.asarray(d["r"]),
            u_draws=np.asarray(d["u_draws"]),
            thin_u=int(d["thin_u"]),
            rows=int(d["rows"]),
            cols=int(d["cols"]),
            h=float(d["h"]),
            boundary=d["boundary"],
            tau=int(d["tau"]),
            accept_rate=float(d["accept_rate"]),
            step=float(d["step"]),
            boundary_series=None if d.get("boundary_series") is None
            else np.asarray(d["boundary_series"]),
        )


def effective_sample_size(chain) -> float:
    """Initial-positive-sequence autocorrelation estimate of ESS."""
    x = np.asarray(chain, dtype=float)
    n = len(x)
    x = x - np.mean(x)
    v = np.mean(x**2)
    if v == 0 or n < 4:
        return float(n)
    acf = np.correlate(x, x, mode="full")[n - 1:] / (v * n)
    s = 0.0
    for k in range(1, n // 2):
        if acf[k] < 0.05:
            break
        s += acf[k]
    return float(n / (1.0 + 2.0 * s))


def gibbs_fit(data, grid: StGrid, priors: GibbsPriors = None, iters: int = 4000,
              burn_in: int = 1000, rng=None, thin_u: int = 1,
              boundary_series=None, init_alpha=None) -> StPosterior:
    """Partially collapsed Gibbs sampler for (U_0..U_T, alpha, q, r).

    Per sweep: random-walk Metropolis moves for alpha (stable interval,
    truncated-Gaussian prior) and for log q, log r against the *marginal*
    likelihood with the latent field integrated out by the prediction-error
    decomposition, then an FFBS draw of the field, then conjugate
    inverse-gamma refreshes of q and r given the field.  Collapsing the
    field in the parameter moves is essential: conditional on a field draw
    the parameters are pinned to that draw's own implied values, so pure
    data augmentation cannot traverse the posterior.  Step sizes adapt
    toward 30% acceptance during burn-in only.
    """
    priors = priors or GibbsPriors()
    if rng is None:
        rng = np.random.default_rng(0)
    if not iters > burn_in >= 0:
        raise ValueError("need iters > burn_in >= 0")
    data = np.asarray(data, dtype=float)
    T = data.shape[0]
    m = grid.m
    a_lo, a_hi = stability_interval(grid)
    alpha = float(init_alpha) if init_alpha is not None else 0.25 * a_hi
    # eigen decomposition is alpha-free, compute once
    base = StModel(grid=grid, alpha=alpha, q=1.0, r=1.0, mu0=priors.mu0,
                   s0=priors.s0, tau=T, boundary_series=boundary_series)
    lam, Vt, b_count = base.eigvals, base.eigvecs, base.b_count
    dstar = data.reshape(T, m) @ Vt
    mu0s = Vt.T @ np.full(m, priors.mu0)
    if grid.boundary == "fixed-value":
        bs = np.asarray(boundary_series, dtype=float)
        c0 = (b_count / grid.h**2)[None, :] * bs[:T, None]  # spatial, into t=1..T
        c0 = c0 @ Vt  # mode space, rows are transitions into t=1..T
    else:
        c0 = np.zeros((T, m))

    # pilot variances from first differences / residual scatter
    q_cur = max(float(np.var(np.diff(dstar, axis=0))) / 2, 1e-4)
    r_cur = q_cur
    n_obs = T * m
    step = 0.05 * (a_hi - a_lo)
    step_lq, step_lr = 0.1, 0.1
    n_keep = iters - burn_in
    alpha_chain = np.empty(n_keep)
    q_chain = np.empty(n_keep)
    r_chain = np.empty(n_keep)
    u_store = []
    accepts, proposals = 0, 0
    windows = {"alpha": [0, 0], "lq": [0, 0], "lr": [0, 0]}

    def log_prior_alpha(a):
        return -0.5 * ((a - priors.alpha_mean) / priors.alpha_sd) ** 2

    def log_prior_logvar(v, a_pr, b_pr):
        # inverse-gamma density on v plus the Jacobian of the log transform
        return -(a_pr + 1.0) * np.log(v) - b_pr / v + np.log(v)

    cur_ll = _marginal_loglik(dstar, lam, c0, alpha, q_cur, r_cur, mu0s,
                              priors.s0)
    for it in range(iters):
        # --- collapsed Metropolis moves on (alpha, log q, log r) ----------
        prop = alpha + step * rng.standard_normal()
        proposals += 1
        windows["alpha"][1] += 1
        if a_lo <= prop <= a_hi:
            new_ll = _marginal_loglik(dstar, lam, c0, prop, q_cur, r_cur,
                                      mu0s, priors.s0)
            if np.log(rng.uniform()) < (new_ll + log_prior_alpha(prop)
                                        - cur_ll - log_prior_alpha(alpha)):
                alpha, cur_ll = prop, new_ll
                accepts += 1
                windows["alpha"][0] += 1

        q_prop = q_cur * np.exp(step_lq * rng.standard_normal())
        windows["lq"][1] += 1
        new_ll = _marginal_loglik(dstar, lam, c0, alpha, q_prop, r_cur,
                                  mu0s, priors.s0)
        if np.log(rng.uniform()) < (
                new_ll + log_prior_logvar(q_prop, priors.a_q, priors.b_q)
                - cur_ll - log_prior_logvar(q_cur, priors.a_q, priors.b_q)):
            q_cur, cur_ll = q_prop, new_ll
            windows["lq"][0] += 1

        r_prop = r_cur * np.exp(step_lr * rng.standard_normal())
        windows["lr"][1] += 1
        new_ll = _marginal_loglik(dstar, lam, c0, alpha, q_cur, r_prop,
                                  mu0s, priors.s0)
        if np.log(rng.uniform()) < (
                new_ll + log_prior_logvar(r_prop, priors.a_r, priors.b_r)
                - cur_ll - log_prior_logvar(r_cur, priors.a_r, priors.b_r)):
            r_cur, cur_ll = r_prop, new_ll
            windows["lr"][0] += 1

        if it < burn_in and windows["alpha"][1] >= 50:
            rate = windows["alpha"][0] / windows["alpha"][1]
            step *= np.exp(rate - 0.3)
            step = float(np.clip(step, 1e-5 * (a_hi - a_lo), a_hi - a_lo))
            step_lq *= np.exp(windows["lq"][0] / windows["lq"][1] - 0.3)
            step_lq = float(np.clip(step_lq, 1e-4, 3.0))
            step_lr *= np.exp(windows["lr"][0] / windows["lr"][1] - 0.3)
            step_lr = float(np.clip(step_lr, 1e-4, 3.0))
            for w in windows.values():
                w[0] = w[1] = 0

        # --- FFBS field draw, then conjugate refresh of q and r ------------
        phi = 1.0 + alpha * lam
        forcing = np.vstack([np.zeros((1, m)), alpha * c0])
        fm, fv = _filter(dstar, phi, q_cur, r_cur, mu0s, priors.s0, forcing)
        u = _backward_sample(fm, fv, phi, q_cur, forcing, rng)

        e = u[1:] - phi * u[:-1] - alpha * c0
        q_cur = 1.0 / rng.gamma(priors.a_q + 0.5 * n_obs,
                                1.0 / (priors.b_q + 0.5 * np.sum(e**2)))
        resid = dstar - u[1:]
        r_cur = 1.0 / rng.gamma(priors.a_r + 0.5 * n_obs,
                                1.0 / (priors.b_r + 0.5 * np.sum(resid**2)))
        cur_ll = _marginal_loglik(dstar, lam, c0, alpha, q_cur, r_cur, mu0s,
                                  priors.s0)

        if it >= burn_in:
            k = it - burn_in
            alpha_chain[k], q_chain[k], r_chain[k] = alpha, q_cur, r_cur
            if k % thin_u == 0:
                u_store.append(u @ Vt.T)

    accept_rate = accepts / proposals
    if accept_rate < 0.05:
        warnings.warn(
            f"Metropolis acceptance {accept_rate:.3f} < 5% after adaptation "
            f"(tuned step {step:.3g})",
            RuntimeWarning,
        )
    return StPosterior(
        alpha=alpha_chain, q=q_chain, r=r_chain,
        u_draws=np.array(u_store), thin_u=thin_u,
        rows=grid.rows, cols=grid.cols, h=grid.h, boundary=grid.boundary,
        tau=T, accept_rate=accept_rate, step=step,
        boundary_series=boundary_series,
    )


# ---------------------------------------------------------------------------
# Failure-time prediction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldForecast:
    times: np.ndarray
    cdf: np.ndarray
    crossing_times: np.ndarray  # per MC path, inf if never crossed


def _rule_crossed(U, rule, threshold, level, h):
    """U is (n, m) spatial fields; returns boolean crossings."""
    if rule == "max":
        return np.max(U, axis=1) >= threshold
    area = h**2 * np.sum(U >= level, axis=1)
    return area >= threshold


def predict_failure(posterior: StPosterior, rule: str, threshold: float,
                    horizon: int, n_mc: int = 1000, rng=None,
                    level: float = None) -> FieldForecast:
    """Forward-propagate the latent field from tau and pool first crossing
    times of the failure rule over posterior draws.

    rule "max": fail when max cell of U exceeds `threshold`.  rule "area":
    fail when the area of {U >= level} reaches `threshold`.  Crossings are
    checked from t = tau onward, so a field that already violates the rule
    fails immediately.  With a shared rng, a stricter rule's CDF dominates a
    laxer one's exactly (common random numbers).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if rule not in ("max", "area"):
        raise ValueError("rule must be 'max' or 'area'")
    if rule == "area" and level is None:
        raise ValueError("area rule needs a degradation level")
    if threshold <= 0:
        raise ValueError("rule threshold must be > 0")
    if horizon <= posterior.tau:
        raise ValueError("horizon must exceed the fitted tau")
    grid = StGrid(posterior.rows, posterior.cols, posterior.h,
                  posterior.boundary)
    L, b_count = laplacian(grid)
    lam, Vt = np.linalg.eigh(L)
    n_stored = posterior.u_draws.shape[0]
    idx = np.arange(n_mc) % n_stored
    # map stored iteration index back to the parameter chain
    par_idx = (idx * posterior.thin_u) % posterior.n_draws
    U_tau = posterior.u_draws[idx, -1, :]            # spatial (n_mc, m)
    alpha = posterior.alpha[par_idx][:, None]
    q = posterior.q[par_idx][:, None]
    ustar = U_tau @ Vt                                # mode space
    phi = 1.0 + alpha * lam[None, :]
    times = np.arange(posterior.tau, horizon + 1)
    crossing = np.full(n_mc, np.inf)
    alive = ~_rule_crossed(U_tau, rule, threshold, level, posterior.h)
    crossing[~alive] = posterior.tau
    for t in times[1:]:
        noise = rng.standard_normal((n_mc, grid.m))
        ustar = phi * ustar + np.sqrt(q) * noise
        if posterior.boundary == "fixed-value":
            tb = min(t - 1, len(posterior.boundary_series) - 1)
            forcing = alpha[:, 0, None] * (b_count / posterior.h**2)[None, :] \
                * posterior.boundary_series[tb]
            ustar = ustar + forcing @ Vt
        U = ustar @ Vt.T
        hit = alive & _rule_crossed(U, rule, threshold, level, posterior.h)
        crossing[hit] = t
        alive &= ~hit
    cdf = np.array([np.mean(crossing <= t) for t in times])
    return FieldForecast(times=times.astype(float), cdf=cdf,
                         crossing_times=crossing)
