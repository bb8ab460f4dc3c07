"""Reliability regression with complex covariates.

Three fitters share this module: an elastic-net penalized lognormal lifetime
model with a Gaussian random effect integrated out by Gauss-Hermite
quadrature, penalized least squares for the cumulative functional-covariate
regression, and low-rank (CP) alternating least squares for scalar-on-image
regression.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats
from numpy.polynomial.hermite import hermgauss

from . import splines


# ---------------------------------------------------------------------------
# Elastic-net lifetime model
# ---------------------------------------------------------------------------


@dataclass
class EnLifetimeModel:
    beta0: float
    beta: np.ndarray
    sigma: float
    sigma_w: float
    alpha: tuple
    gh_order: int = 20
    converged: bool = True
    objective_trace: list = field(default_factory=list)

    @property
    def selected(self) -> set:
        return {int(j) for j in np.flatnonzero(self.beta)}

    def marginal_cdf(self, t, x):
        """P(T <= t) for covariates x, random effect integrated out."""
        eta = self.beta0 + float(np.asarray(x) @ self.beta)
        t = np.asarray(t, dtype=float)
        if self.sigma_w == 0:
            return stats.norm.cdf((np.log(t) - eta) / self.sigma)
        xq, cq = hermgauss(self.gh_order)
        w = np.sqrt(2.0) * self.sigma_w * xq
        z = (np.log(t)[..., None] - eta - w) / self.sigma
        return np.sum(cq * stats.norm.cdf(z), axis=-1) / np.sqrt(np.pi)

    def quantile(self, q, x):
        eta = self.beta0 + float(np.asarray(x) @ self.beta)
        if self.sigma_w == 0:
            return float(np.exp(eta + self.sigma * stats.norm.ppf(q)))
        # bracket in log time around the no-random-effect quantile
        lo = eta + (self.sigma + self.sigma_w) * stats.norm.ppf(min(q, 1 - q)) - 5
        hi = 2 * eta - lo + 10
        f = lambda logt: float(self.marginal_cdf(np.exp(logt), x)) - q
        return float(np.exp(optimize.brentq(f, lo, hi)))

    def median(self, x):
        return self.quantile(0.5, x)


@dataclass
class EnFitOptions:
    max_iter: int = 3000
    tol: float = 1e-11
    gh_order: int = 20
    sigma_w: object = "fit"  # "fit" or a fixed nonnegative float


def _en_loglik_terms(params, times, delta, X, gh_order, sigma_w_fixed):
    """Marginal log-likelihood and gradient of the smooth part.

    params = (beta0, beta..., log sigma[, log sigma_w])."""
    n, p = X.shape
    beta0 = params[0]
    beta = params[1 : 1 + p]
    log_sigma = params[1 + p]
    sigma = np.exp(log_sigma)
    fit_sw = sigma_w_fixed is None
    sigma_w = np.exp(params[2 + p]) if fit_sw else sigma_w_fixed
    eta = beta0 + X @ beta
    logt = np.log(times)
    if sigma_w == 0:
        xq, cq = np.array([0.0]), np.array([np.sqrt(np.pi)])
    else:
        xq, cq = hermgauss(gh_order)
    w = np.sqrt(2.0) * sigma_w * xq                        # (q,)
    z = (logt[:, None] - eta[:, None] - w[None, :]) / sigma  # (n, q)
    ev = delta[:, None].astype(bool)
    log_ell = np.where(
        ev,
        -log_sigma - logt[:, None] - 0.5 * np.log(2 * np.pi) - 0.5 * z**2,
        stats.norm.logsf(z),
    )
    lw = np.log(cq)[None, :] + log_ell
    mx = np.max(lw, axis=1, keepdims=True)
    s = np.exp(lw - mx)
    tot = np.sum(s, axis=1, keepdims=True)
    logL = mx[:, 0] + np.log(tot[:, 0]) - 0.5 * np.log(np.pi)
    pq = s / tot

    # censored hazard factor; the exponent is clipped because extreme trial
    # points during line searches can push z far into the right tail
    h = np.exp(np.minimum(stats.norm.logpdf(z) - stats.norm.logsf(z), 350.0))
    d_eta = np.where(ev, z / sigma, h / sigma)               # dlog ell / d eta
    d_lsig = np.where(ev, z**2 - 1.0, h * z)
    g_eta = np.sum(pq * d_eta, axis=1)
    g_lsig = np.sum(pq * d_lsig, axis=1)
    grad = np.zeros_like(params)
    grad[0] = np.sum(g_eta)
    grad[1 : 1 + p] = X.T @ g_eta
    grad[1 + p] = np.sum(g_lsig)
    if fit_sw:
        d_lsw = np.where(ev, z * w[None, :] / sigma, h * w[None, :] / sigma)
        grad[2 + p] = np.sum(np.sum(pq * d_lsw, axis=1))
    return float(np.sum(logL)), grad


def fit_en_lifetime(times, delta, X, alpha=(0.0, 0.0),
                    opts: EnFitOptions = None) -> EnLifetimeModel:
    """Minimize the negative marginal log-likelihood plus the EN penalty.

    The L1 part is handled by a monotone proximal-gradient scheme with
    backtracking; with alpha1 = 0 everything is smooth and L-BFGS-B is used.
    """
    opts = opts or EnFitOptions()
    times = np.asarray(times, dtype=float)
    delta = np.asarray(delta, dtype=int)
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if np.any(times <= 0):
        raise ValueError("times must be > 0")
    if not np.all(np.isin(delta, (0, 1))):
        raise ValueError("delta must be 0/1")
    if np.sum(delta) == 0:
        raise ValueError("all observations censored: model not estimable")
    a1, a2 = alpha
    if a1 < 0 or a2 < 0:
        raise ValueError("alpha components must be >= 0")
    sw_fixed = None if opts.sigma_w == "fit" else float(opts.sigma_w)
    fit_sw = sw_fixed is None
    npar = 2 + p + (1 if fit_sw else 0)

    # init from log-time least squares
    logt = np.log(times)
    Z = np.column_stack([np.ones(n), X])
    coef, *_ = np.linalg.lstsq(Z, logt, rcond=None)
    resid = logt - Z @ coef
    s0 = max(np.std(resid), 1e-2)
    x0 = np.zeros(npar)
    x0[0] = coef[0]
    x0[1 : 1 + p] = coef[1:]
    x0[1 + p] = np.log(s0)
    if fit_sw:
        x0[2 + p] = np.log(s0 / 2)

    def smooth(params):
        ll, grad = _en_loglik_terms(params, times, delta, X, opts.gh_order, sw_fixed)
        beta = params[1 : 1 + p]
        f = -ll + a2 * np.sum(beta**2)
        g = -grad
        g[1 : 1 + p] += 2 * a2 * beta
        return f, g

    if a1 == 0:
        res = optimize.minimize(smooth, x0, jac=True, method="L-BFGS-B",
                                options={"maxiter": opts.max_iter, "ftol": 1e-14,
                                         "gtol": 1e-10})
        params = res.x
        trace = [float(res.fun)]
        converged = bool(res.success)
    else:
        params = x0.copy()
        f, g = smooth(params)
        trace = [f + a1 * np.sum(np.abs(params[1 : 1 + p]))]
        step = 1.0
        converged = False
        for _ in range(opts.max_iter):
            accepted = False
            for _bt in range(60):
                cand = params - step * g
                cand[1 : 1 + p] = np.sign(cand[1 : 1 + p]) * np.maximum(
                    np.abs(cand[1 : 1 + p]) - step * a1, 0.0
                )
                fc, gc = smooth(cand)
                dx = cand - params
                if fc <= f + g @ dx + np.sum(dx**2) / (2 * step) + 1e-14:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
            obj = fc + a1 * np.sum(np.abs(cand[1 : 1 + p]))
            rel = (trace[-1] - obj) / max(abs(trace[-1]), 1e-12)
            params, f, g = cand, fc, gc
            trace.append(obj)
            step = min(step * 1.2, 1e3)
            if 0 <= rel < opts.tol:
                converged = True
                break

    beta = params[1 : 1 + p].copy()
    return EnLifetimeModel(
        beta0=float(params[0]),
        beta=beta,
        sigma=float(np.exp(params[1 + p])),
        sigma_w=float(np.exp(params[2 + p])) if fit_sw else sw_fixed,
        alpha=(a1, a2),
        gh_order=opts.gh_order,
        converged=converged,
        objective_trace=trace,
    )


def en_bic(model: EnLifetimeModel, times, delta, X) -> float:
    params = np.concatenate(
        [[model.beta0], model.beta, [np.log(model.sigma)]]
        + ([[np.log(max(model.sigma_w, 1e-12))]] if model.sigma_w > 0 else [])
    )
    sw_fixed = None if model.sigma_w > 0 else 0.0
    ll, _ = _en_loglik_terms(params, np.asarray(times, float),
                             np.asarray(delta, int), np.asarray(X, float),
                             model.gh_order, sw_fixed)
    df = len(model.selected) + 2 + (1 if model.sigma_w > 0 else 0)
    return float(-2.0 * ll + df * np.log(len(times)))


def select_en(times, delta, X, alpha_grid, opts: EnFitOptions = None):
    """Fit every (alpha1, alpha2) pair and return the BIC minimizer + table.

    Each penalized fit is used only for its support; coefficients are refit
    unpenalized on the selected columns before scoring BIC (shrinkage biases
    the likelihood and washes out the support comparison otherwise).  The
    returned model carries the debiased coefficients on the winning support.
    """
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    best, best_bic, table = None, np.inf, []
    for a in alpha_grid:
        m = fit_en_lifetime(times, delta, X, alpha=a, opts=opts)
        sel = sorted(m.selected)
        if sel:
            refit = fit_en_lifetime(times, delta, X[:, sel], alpha=(0.0, 0.0),
                                    opts=opts)
            beta_full = np.zeros(p)
            beta_full[sel] = refit.beta
            m = EnLifetimeModel(
                beta0=refit.beta0, beta=beta_full, sigma=refit.sigma,
                sigma_w=refit.sigma_w, alpha=tuple(a),
                gh_order=refit.gh_order, converged=m.converged and refit.converged,
                objective_trace=refit.objective_trace,
            )
        bic = en_bic(m, times, delta, X)
        table.append({"alpha": tuple(a), "bic": bic, "n_selected": len(m.selected)})
        if bic < best_bic:
            best, best_bic = m, bic
    return best, table


# ---------------------------------------------------------------------------
# Functional-covariate regression
# ---------------------------------------------------------------------------


@dataclass
class FuncRegModel:
    beta0: float
    psi_coefs: np.ndarray
    psi_knots: np.ndarray
    degree: int
    extra_beta: np.ndarray
    residual_scale: float
    smooth_weight: float

    def psi_curve(self, lambda_grid) -> np.ndarray:
        Phi = splines.design_matrix(lambda_grid, self.psi_knots, self.degree)
        return Phi @ self.psi_coefs

    def predict(self, design, extra=None) -> np.ndarray:
        out = self.beta0 + np.asarray(design) @ self.psi_coefs
        if extra is not None:
            out = out + np.asarray(extra) @ self.extra_beta
        return out


def fit_funcreg(y, design, psi_knots, degree: int = 3, smooth_weight: float = 1e-4,
                extra=None) -> FuncRegModel:
    """Penalized least squares for the cumulative-damage functional regression.

    `design` rows come from funcdata.functional_covariate_design; the ridge
    penalty acts on second differences of the psi spline coefficients.
    """
    y = np.asarray(y, dtype=float)
    design = np.asarray(design, dtype=float)
    n, m = design.shape
    q = 0 if extra is None else np.asarray(extra).shape[1]
    Z = np.column_stack([np.ones(n), design] + ([np.asarray(extra, float)] if q else []))
    P = np.zeros((Z.shape[1], Z.shape[1]))
    P[1 : 1 + m, 1 : 1 + m] = splines.second_difference_penalty(m)
    A = Z.T @ Z
    if smooth_weight <= 0:
        if np.linalg.matrix_rank(A) < A.shape[0]:
            raise ValueError(
                "design is rank-deficient; use a positive smooth_weight"
            )
    scale = np.trace(A) / A.shape[0]
    coef = np.linalg.solve(A + smooth_weight * scale * P, Z.T @ y)
    resid = y - Z @ coef
    return FuncRegModel(
        beta0=float(coef[0]),
        psi_coefs=coef[1 : 1 + m].copy(),
        psi_knots=np.asarray(psi_knots, float),
        degree=degree,
        extra_beta=coef[1 + m :].copy(),
        residual_scale=float(np.std(resid)),
        smooth_weight=smooth_weight,
    )


# ---------------------------------------------------------------------------
# Scalar-on-image (tensor) regression
# ---------------------------------------------------------------------------


@dataclass
class TensorRegModel:
    alpha0: float
    u_factors: np.ndarray  # (R, rows)
    v_factors: np.ndarray  # (R, cols)
    link: str
    noise_scale: float
    converged: bool = True
    objective_trace: list = field(default_factory=list)

    @property
    def B(self) -> np.ndarray:
        if len(self.u_factors) == 0:
            return np.zeros((0, 0))
        return np.einsum("ri,rj->ij", self.u_factors, self.v_factors)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 2
        if single:
            X = X[None]
        if len(self.u_factors):
            eta = self.alpha0 + np.einsum("nij,ij->n", X, self.B)
        else:
            eta = np.full(X.shape[0], self.alpha0)
        out = np.exp(eta) if self.link == "log" else eta
        return float(out[0]) if single else out


@dataclass
class TensorFitOptions:
    max_iter: int = 200
    tol: float = 1e-10


def _normalize_factors(U, V):
    for r in range(U.shape[0]):
        nu, nv = np.linalg.norm(U[r]), np.linalg.norm(V[r])
        if nu < 1e-14 or nv < 1e-14:
            U[r], V[r] = 0.0, 0.0
            continue
        s = np.sqrt(nv / nu)
        U[r] *= s
        V[r] /= s
        lead = U[r][np.flatnonzero(np.abs(U[r]) > 0)[0]]
        if lead < 0:
            U[r], V[r] = -U[r], -V[r]
    return U, V


def fit_tensorreg(y, X, R: int, link: str = "identity",
                  opts: TensorFitOptions = None) -> TensorRegModel:
    """Rank-R CP regression of a scalar on image covariates by alternating
    least squares (identity link) or alternating Gauss-Newton steps with
    step halving (log link)."""
    opts = opts or TensorFitOptions()
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, rows, cols = X.shape
    if link not in ("identity", "log"):
        raise ValueError("link must be 'identity' or 'log'")
    if not np.all(np.isfinite(X)):
        raise ValueError("images must be finite-valued")
    if R == 0:
        mu = float(np.mean(np.log(y) if link == "log" else y))
        a0 = mu
        resid = y - (np.exp(a0) if link == "log" else a0)
        return TensorRegModel(alpha0=a0, u_factors=np.zeros((0, rows)),
                              v_factors=np.zeros((0, cols)), link=link,
                              noise_scale=float(np.std(resid)),
                              objective_trace=[float(np.sum(resid**2))])
    if n <= R * (rows + cols):
        raise ValueError("need n > R*(rows+cols) observations")

    # init factors from the SVD of the cross-moment matrix
    M = np.einsum("n,nij->ij", y - np.mean(y), X) / n
    Um, sm, Vmt = np.linalg.svd(M)
    U = (Um[:, :R] * np.sqrt(sm[:R] + 1e-12)).T.copy()
    V = (Vmt[:R, :].T * np.sqrt(sm[:R] + 1e-12)).T.copy()
    a0 = float(np.mean(np.log(np.clip(y, 1e-12, None)) if link == "log" else y))

    def eta_of(U, V, a0):
        B = np.einsum("ri,rj->ij", U, V)
        return a0 + np.einsum("nij,ij->n", X, B)

    def objective(U, V, a0):
        eta = eta_of(U, V, a0)
        mu = np.exp(eta) if link == "log" else eta
        return float(np.sum((y - mu) ** 2))

    obj = objective(U, V, a0)
    trace = [obj]
    converged = False
    for _ in range(opts.max_iter):
        for side in ("u", "v"):
            if side == "u":
                Z = np.einsum("nij,rj->nri", X, V).reshape(n, R * rows)
            else:
                Z = np.einsum("nij,ri->nrj", X, U).reshape(n, R * cols)
            Z1 = np.column_stack([np.ones(n), Z])
            if link == "identity":
                coef, *_ = np.linalg.lstsq(Z1, y, rcond=None)
                a0 = float(coef[0])
                if side == "u":
                    U = coef[1:].reshape(R, rows)
                else:
                    V = coef[1:].reshape(R, cols)
            else:
                theta = np.concatenate(
                    [[a0], (U if side == "u" else V).ravel()]
                )
                eta = eta_of(U, V, a0)
                mu = np.exp(eta)
                r = y - mu
                J = mu[:, None] * Z1
                delta, *_ = np.linalg.lstsq(J, r, rcond=None)
                step = 1.0
                cur = objective(U, V, a0)
                for _bt in range(40):
                    cand = theta + step * delta
                    if side == "u":
                        Un = cand[1:].reshape(R, rows)
                        val = objective(Un, V, cand[0])
                    else:
                        Vn = cand[1:].reshape(R, cols)
                        val = objective(U, Vn, cand[0])
                    if val <= cur + 1e-14:
                        a0 = float(cand[0])
                        if side == "u":
                            U = Un
                        else:
                            V = Vn
                        break
                    step *= 0.5
        new_obj = objective(U, V, a0)
        rel = (obj - new_obj) / max(obj, 1e-12)
        obj = new_obj
        trace.append(obj)
        if 0 <= rel < opts.tol:
            converged = True
            break
    U, V = _normalize_factors(U, V)
    resid = y - (np.exp(eta_of(U, V, a0)) if link == "log" else eta_of(U, V, a0))
    return TensorRegModel(alpha0=a0, u_factors=U, v_factors=V, link=link,
                          noise_scale=float(np.std(resid)), converged=converged,
                          objective_trace=trace)
