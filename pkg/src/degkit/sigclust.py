"""Model-based clustering of FPCA scores with automatic variable selection.

A Gaussian mixture with shared diagonal covariance is fit by EM; cluster
means are penalized per original variable by the max absolute mean over
(cluster, component) coordinates, which zeroes entire variables out of the
clustering.  Components whose weight falls below 1/(2n) are pruned, so the
cluster count is data-driven even though K is set generously.
"""

from dataclasses import dataclass, field

import numpy as np

from .funcdata import FunctionalSample, fpca


@dataclass
class PenalizedGmm:
    weights: np.ndarray        # (K,)
    means: np.ndarray          # (K, d)
    variances: np.ndarray      # (d,) shared diagonal
    lam: float
    var_groups: np.ndarray     # (d,) variable id per score coordinate

    def __post_init__(self):
        if abs(np.sum(self.weights) - 1.0) > 1e-10 or np.any(self.weights < 0):
            raise ValueError("weights must be a probability vector")
        if np.any(self.variances <= 0):
            raise ValueError("variances must be > 0")

    @property
    def n_clusters(self) -> int:
        return len(self.weights)

    @property
    def active_vars(self) -> set:
        out = set()
        for j in np.unique(self.var_groups):
            cols = self.var_groups == j
            if np.max(np.abs(self.means[:, cols])) > 0:
                out.add(int(j))
        return out

    def group_max(self, j) -> float:
        return float(np.max(np.abs(self.means[:, self.var_groups == j])))


def _log_gauss(scores, means, variances):
    """(n, K) log density matrix for diagonal Gaussians."""
    d = scores.shape[1]
    const = -0.5 * (d * np.log(2 * np.pi) + np.sum(np.log(variances)))
    diff = scores[:, None, :] - means[None, :, :]
    return const - 0.5 * np.sum(diff**2 / variances, axis=2)


def _penalty(means, var_groups):
    return sum(
        np.max(np.abs(means[:, var_groups == j])) for j in np.unique(var_groups)
    )


def penalized_loglik(model: PenalizedGmm, scores) -> float:
    """Observed-data mixture log-likelihood minus the variable penalty."""
    scores = np.asarray(scores, dtype=float)
    if scores.shape[1] != model.means.shape[1]:
        raise ValueError("score dimension does not match model")
    lg = _log_gauss(scores, model.means, model.variances)
    lw = lg + np.log(model.weights)
    mx = np.max(lw, axis=1, keepdims=True)
    ll = float(np.sum(mx[:, 0] + np.log(np.sum(np.exp(lw - mx), axis=1))))
    return ll - model.lam * _penalty(model.means, model.var_groups)


def linf_group_update(b, a, lam):
    """argmin_mu sum_i a_i (mu_i - b_i)^2 + lam * max|mu_i|, exactly.

    The optimum clamps b into [-m*, m*]; m* is found on the sorted |b|
    breakpoints where the derivative of the piecewise-quadratic changes sign.
    """
    b = np.asarray(b, dtype=float)
    a = np.asarray(a, dtype=float)
    c = np.abs(b)
    if lam <= 0:
        return b.copy()
    order = np.argsort(c)
    c_sorted = c[order]
    a_sorted = a[order]
    # suffix sums: entries with |b| > m are active
    suf_a = np.cumsum(a_sorted[::-1])[::-1]
    suf_ac = np.cumsum((a_sorted * c_sorted)[::-1])[::-1]
    # derivative at m in segment [c_(i-1), c_(i)): lam - 2*(suf_ac_i - m*suf_a_i)
    breakpoints = np.concatenate([[0.0], c_sorted])
    for i in range(len(b)):
        lo, hi = breakpoints[i], breakpoints[i + 1]
        sa, sac = suf_a[i], suf_ac[i]
        if lam - 2.0 * (sac - lo * sa) >= 0:  # h'(lo) >= 0: optimum at lo
            return np.clip(b, -lo, lo) if lo > 0 else np.zeros_like(b)
        if sa > 0:
            m = (sac - lam / 2.0) / sa
            if lo < m <= hi:
                return np.clip(b, -m, m)
    return b.copy()  # derivative still negative at max|b|: unconstrained


@dataclass
class EmResult:
    model: PenalizedGmm
    responsibilities: np.ndarray
    objective_trace: list = field(default_factory=list)
    prune_events: list = field(default_factory=list)  # iteration indices


def _kmeanspp_init(scores, K, rng, lloyd_iters: int = 10):
    n = scores.shape[0]
    centers = [scores[rng.integers(n)]]
    for _ in range(K - 1):
        d2 = np.min(
            [np.sum((scores - c) ** 2, axis=1) for c in centers], axis=0
        )
        p = d2 / np.sum(d2) if np.sum(d2) > 0 else np.full(n, 1.0 / n)
        centers.append(scores[rng.choice(n, p=p)])
    centers = np.array(centers)
    # a few Lloyd refinements: raw k-means++ seeds are data points and land
    # poorly when many coordinates are uninformative noise
    for _ in range(lloyd_iters):
        d2 = np.sum((scores[:, None, :] - centers[None]) ** 2, axis=2)
        assign = np.argmin(d2, axis=1)
        for k in range(K):
            if np.any(assign == k):
                centers[k] = scores[assign == k].mean(axis=0)
    return centers


def fit_em(scores, K: int, lam: float, restarts: int = 5, rng_spec=None,
           var_groups=None, max_iter: int = 300, tol: float = 1e-8,
           init_means=None) -> EmResult:
    """Penalized EM, best of `restarts` k-means++-style initializations.

    `init_means` adds one extra deterministic warm start from a previous
    solution (used when sweeping a lambda grid)."""
    scores = np.asarray(scores, dtype=float)
    n, d = scores.shape
    if not (1 <= K < n):
        raise ValueError("need n > K >= 1")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if var_groups is None:
        var_groups = np.arange(d)
    var_groups = np.asarray(var_groups)
    best = None
    starts = [None] * restarts
    if init_means is not None:
        starts = [np.asarray(init_means, dtype=float)] + starts
    for rs, init in enumerate(starts):
        rng = rng_spec.generator("em-restart", rs) if rng_spec else np.random.default_rng(rs)
        res = _em_single(scores, K, lam, var_groups, rng, max_iter, tol,
                         init_means=init)
        if best is None or res.objective_trace[-1] > best.objective_trace[-1]:
            best = res
    return best


def _em_single(scores, K, lam, var_groups, rng, max_iter, tol, init_means=None,
               zero_mask=None):
    n, d = scores.shape
    if init_means is not None and init_means.shape == (K, d):
        means = init_means.copy()
    else:
        means = _kmeanspp_init(scores, K, rng)
    if zero_mask is not None:
        means[:, zero_mask] = 0.0
    # within-cluster variance of the hard assignment to the initial means;
    # marginal variance overstates informative coordinates and can collapse
    # a warm start on the first E-step
    d2 = np.sum((scores[:, None, :] - means[None]) ** 2, axis=2)
    assign = np.argmin(d2, axis=1)
    variances = np.mean((scores - means[assign]) ** 2, axis=0) + 1e-6
    weights = np.full(K, 1.0 / K)
    trace = []
    prune_events = []
    resp = None
    for it in range(max_iter):
        # E-step
        lw = _log_gauss(scores, means, variances) + np.log(weights)
        mx = np.max(lw, axis=1, keepdims=True)
        p = np.exp(lw - mx)
        resp = p / np.sum(p, axis=1, keepdims=True)
        # M-step
        Nk = np.sum(resp, axis=0)
        keep = Nk / n >= 1.0 / (2 * n)
        if not np.all(keep):
            prune_events.append(it)
            means, weights, Nk, resp = means[keep], weights[keep], Nk[keep], resp[:, keep]
            resp = resp / np.sum(resp, axis=1, keepdims=True)
            Nk = np.sum(resp, axis=0)
            K = len(Nk)
        weights = Nk / n
        b_full = (resp.T @ scores) / Nk[:, None]
        new_means = means.copy()
        for j in np.unique(var_groups):
            cols = np.where(var_groups == j)[0]
            b = b_full[:, cols].ravel()
            a = np.repeat(Nk[:, None], len(cols), axis=1) / (2.0 * variances[cols])
            mu = linf_group_update(b, a.ravel(), lam)
            new_means[:, cols] = mu.reshape(K, len(cols))
        means = new_means
        if zero_mask is not None:
            means[:, zero_mask] = 0.0
        variances = np.einsum("ik,ikd->d",
                              resp,
                              (scores[:, None, :] - means[None, :, :]) ** 2) / n
        if np.any(variances < 1e-12):
            raise RuntimeError("degenerate component variance in EM")
        model = PenalizedGmm(weights=weights, means=means, variances=variances,
                             lam=lam, var_groups=var_groups)
        obj = penalized_loglik(model, scores)
        trace.append(obj)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol * (1 + abs(trace[-2])):
            break
    return EmResult(model=model, responsibilities=resp,
                    objective_trace=trace, prune_events=prune_events)


def select_lambda(scores, K: int, rng_spec=None, var_groups=None, n_grid: int = 12,
                  restarts: int = 3):
    """BIC choice of lambda over a log grid scaled from an unpenalized pilot fit.

    The pilot fit uses extra restarts (EM local optima are the dominant
    failure mode) and each grid point is warm-started from the previous
    lambda's solution."""
    scores = np.asarray(scores, dtype=float)
    n, d = scores.shape
    if var_groups is None:
        var_groups = np.arange(d)
    pilot = fit_em(scores, K, 0.0, restarts=max(restarts, 10), rng_spec=rng_spec,
                   var_groups=var_groups)
    m = pilot.model
    Nk = m.weights * n
    lam_max = 0.0
    for j in np.unique(var_groups):
        cols = np.where(var_groups == j)[0]
        b = m.means[:, cols]
        a = Nk[:, None] / (2.0 * m.variances[cols])
        lam_max = max(lam_max, float(2.0 * np.sum(a * np.abs(b))))
    grid = lam_max * np.logspace(-3, 0, n_grid)
    best = None
    best_bic = np.inf
    table = []
    warm = pilot.model.means
    var_groups = np.asarray(var_groups)
    for gi, lam in enumerate(grid):
        res = fit_em(scores, K, lam, restarts=restarts, rng_spec=rng_spec,
                     var_groups=var_groups, init_means=warm)
        if res.model.means.shape[0] == K:
            warm = res.model.means
        # debias: keep only the zero pattern, refit unpenalized on the
        # selected support, and score BIC on the refit
        zero_mask = np.max(np.abs(res.model.means), axis=0) == 0.0
        rng = (rng_spec.generator("debias", gi) if rng_spec
               else np.random.default_rng(gi))
        refit = _em_single(scores, res.model.n_clusters, 0.0, var_groups, rng,
                           300, 1e-8, init_means=res.model.means,
                           zero_mask=zero_mask)
        mm = refit.model
        ll = refit.objective_trace[-1]
        df = (mm.n_clusters - 1) + d + int(np.count_nonzero(mm.means))
        bic = -2.0 * ll + df * np.log(n)
        out = EmResult(
            model=PenalizedGmm(mm.weights, mm.means, mm.variances, float(lam),
                               mm.var_groups),
            responsibilities=refit.responsibilities,
            objective_trace=refit.objective_trace,
            prune_events=refit.prune_events,
        )
        table.append({"lambda": float(lam), "bic": float(bic),
                      "n_clusters": mm.n_clusters,
                      "n_active_vars": len(out.model.active_vars)})
        if bic < best_bic:
            best, best_bic = out, bic
    return best, table


def cluster_signals(channel_samples, var_threshold: float = 0.95, K: int = 8,
                    lam="auto", rng_spec=None, unit_ids=None, restarts: int = 5):
    """FPCA each channel, concatenate scores, and cluster with the penalized
    mixture.  Units are processed in unit-id order so relabeling the input
    permutes the output labels identically.

    channel_samples: list of FunctionalSample, one per channel, rows aligned
    across channels.  Returns (labels array, EmResult, score matrix).
    """
    n = channel_samples[0].curves.shape[0]
    if unit_ids is None:
        unit_ids = [f"u{i:04d}" for i in range(n)]
    order = np.argsort(np.asarray(unit_ids, dtype=object))
    score_blocks = []
    groups = []
    for j, sample in enumerate(channel_samples):
        sorted_sample = FunctionalSample(
            grid=sample.grid, curves=sample.curves[order], channel=sample.channel
        )
        basis = fpca(sorted_sample, var_threshold)
        score_blocks.append(basis.scores)
        groups.extend([j] * basis.scores.shape[1])
    scores = np.hstack(score_blocks)
    var_groups = np.array(groups)
    if lam == "auto":
        res, _ = select_lambda(scores, K, rng_spec=rng_spec, var_groups=var_groups,
                               restarts=restarts)
    else:
        res = fit_em(scores, K, float(lam), restarts=restarts, rng_spec=rng_spec,
                     var_groups=var_groups)
    sorted_labels = np.argmax(res.responsibilities, axis=1)
    labels = np.empty(n, dtype=int)
    labels[order] = sorted_labels
    return labels, res, scores
