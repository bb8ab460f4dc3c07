"""Functional-data machinery: FPCA, reconstruction, the simplified
longitudinal functional degradation model, and the cumulative functional
covariate design.

All quadrature is trapezoid on the native grid; eigenfunctions are
orthonormal under that quadrature and signed so the largest-magnitude value
is positive.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.isotonic import IsotonicRegression

from . import splines


def trapezoid_weights(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    w = np.zeros(len(grid))
    w[:-1] += np.diff(grid) / 2
    w[1:] += np.diff(grid) / 2
    return w


@dataclass(frozen=True)
class FunctionalSample:
    grid: np.ndarray
    curves: np.ndarray  # (n, len(grid))
    channel: str = ""

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        c = np.asarray(self.curves, dtype=float)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "curves", c)
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if c.ndim != 2 or c.shape[1] != len(g):
            raise ValueError("curves must be (n, len(grid))")
        if np.any(~np.isfinite(c)):
            raise ValueError("curves contain missing values")


@dataclass(frozen=True)
class FpcaBasis:
    grid: np.ndarray
    mean: np.ndarray
    eigenfunctions: np.ndarray  # (L, len(grid))
    eigenvalues: np.ndarray     # (L,), non-increasing
    scores: np.ndarray          # (n, L)
    var_explained: float
    total_variance: float


def fpca(sample: FunctionalSample, var_threshold: float = 0.95) -> FpcaBasis:
    """Karhunen-Loeve decomposition truncated at the variance threshold.

    The default threshold keeps enough components to explain at least 95% of
    the variation.
    """
    if not (0 < var_threshold <= 1):
        raise ValueError("var_threshold must be in (0, 1]")
    X = sample.curves
    n = X.shape[0]
    if n < 2:
        raise ValueError("FPCA needs at least 2 curves")
    w = trapezoid_weights(sample.grid)
    mean = X.mean(axis=0)
    Xc = X - mean
    sw = np.sqrt(w)
    B = Xc * sw / np.sqrt(n - 1)
    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    evals = s**2
    total = float(np.sum(evals))
    if total < 1e-14:
        phi = np.ones((1, len(w))) / np.sqrt(np.sum(w))
        return FpcaBasis(
            grid=sample.grid,
            mean=mean,
            eigenfunctions=phi,
            eigenvalues=np.zeros(1),
            scores=np.zeros((n, 1)),
            var_explained=1.0,
            total_variance=0.0,
        )
    frac = np.cumsum(evals) / total
    L = int(np.searchsorted(frac, var_threshold) + 1)
    L = min(L, np.sum(evals > 1e-14 * total))
    phi = Vt[:L] / sw  # orthonormal under quadrature
    # sign convention: largest-magnitude value positive
    for l in range(L):
        k = np.argmax(np.abs(phi[l]))
        if phi[l, k] < 0:
            phi[l] = -phi[l]
    scores = Xc @ (w[:, None] * phi.T)
    return FpcaBasis(
        grid=sample.grid,
        mean=mean,
        eigenfunctions=phi,
        eigenvalues=evals[:L],
        scores=scores,
        var_explained=float(frac[L - 1]),
        total_variance=total,
    )


def reconstruct(basis: FpcaBasis, i: int, L: int | None = None) -> np.ndarray:
    """Truncated KL reconstruction of curve i; L=0 returns the mean curve."""
    n = basis.scores.shape[0]
    if not (0 <= i < n):
        raise IndexError(f"unit index {i} out of range (n={n})")
    if L is None:
        L = basis.eigenfunctions.shape[0]
    if L == 0:
        return basis.mean.copy()
    return basis.mean + basis.scores[i, :L] @ basis.eigenfunctions[:L]


# ---------------------------------------------------------------------------
# Longitudinal functional model
# ---------------------------------------------------------------------------


@dataclass
class _ScorePath:
    times: np.ndarray
    fitted: np.ndarray
    tail_slope: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inner = np.interp(t, self.times, self.fitted)
        over = t > self.times[-1]
        out = np.where(
            over, self.fitted[-1] + self.tail_slope * (t - self.times[-1]), inner
        )
        return out if out.ndim else float(out)


@dataclass
class LongFuncModel:
    s_grid: np.ndarray
    s_knots: np.ndarray
    t_knots: np.ndarray
    degree: int
    mean_coefs: np.ndarray      # (dim_s, dim_t) tensor-product coefficients
    t_range: tuple
    eigenfunctions: np.ndarray  # (K, len(s_grid))
    eigenvalues: np.ndarray
    score_paths: list           # per unit, list of _ScorePath per component
    residual_scale: float

    def mean_surface(self, t) -> np.ndarray:
        """Mean curve over s at time t, linearly continued beyond the fitted
        time range (splines extrapolate wildly; degradation trends do not)."""
        S = splines.design_matrix(self.s_grid, self.s_knots, self.degree)
        lo, hi = self.t_range
        t_eval = float(np.clip(t, lo, hi))
        T = splines.design_matrix([t_eval], self.t_knots, self.degree)[0]
        base = S @ self.mean_coefs @ T
        if lo <= t <= hi:
            return base
        edge = hi if t > hi else lo
        h = 1e-4 * (hi - lo)
        T2 = splines.design_matrix([edge - h if t > hi else edge + h],
                                   self.t_knots, self.degree)[0]
        deriv = (base - S @ self.mean_coefs @ T2) / h
        return base + deriv * (t - edge)

    def predict_curve(self, unit: int, t) -> np.ndarray:
        out = self.mean_surface(t).copy()
        for k, path in enumerate(self.score_paths[unit]):
            out += path(t) * self.eigenfunctions[k]
        return out


def fit_longfunc(times_per_unit, curves_per_unit, K: int, s_grid=None,
                 smooth_weight: float = 1e-3, degree: int = 3,
                 n_knots_s: int = 6, n_knots_t: int = 3) -> LongFuncModel:
    """Fit the longitudinal functional model in simplified marginal form.

    Mean surface by penalized tensor-product least squares; marginal
    eigenfunctions by FPCA of the pooled mean-removed curves; per-unit score
    trajectories with an isotonic fit plus linear tail for the leading
    component (monotone extrapolation is the point of the exercise).
    """
    n_units = len(times_per_unit)
    if n_units < 1:
        raise ValueError("need at least one unit")
    obs = []  # (unit, t, curve)
    for i in range(n_units):
        ts = np.asarray(times_per_unit[i], dtype=float)
        cs = np.asarray(curves_per_unit[i], dtype=float)
        if len(ts) < 3:
            raise ValueError(f"unit {i} needs >= 3 observation times")
        for j, t in enumerate(ts):
            obs.append((i, float(t), cs[j]))
    m = len(obs[0][2])
    if any(len(c) != m for _, _, c in obs):
        raise ValueError("all curves must share a common s-grid")
    s_grid = np.arange(m, dtype=float) if s_grid is None else np.asarray(s_grid, float)
    if len(s_grid) != m:
        raise ValueError("s_grid length does not match curves")

    all_t = np.array([t for _, t, _ in obs])
    t_lo, t_hi = float(np.min(all_t)), float(np.max(all_t))
    if t_hi <= t_lo:
        t_hi = t_lo + 1.0
    s_knots = splines.knot_vector(float(s_grid[0]), float(s_grid[-1]), degree,
                                  n_knots_s, "uniform")
    t_knots = splines.knot_vector(t_lo, t_hi, degree, n_knots_t, "uniform")
    S = splines.design_matrix(s_grid, s_knots, degree)           # (m, ds)
    T = splines.design_matrix(all_t, t_knots, degree)            # (N, dt)
    ds, dt = S.shape[1], T.shape[1]
    # vec(C) solve: rows are kron(T_row, S)
    Y = np.array([c for _, _, c in obs])                         # (N, m)
    A = np.zeros((ds * dt, ds * dt))
    b = np.zeros(ds * dt)
    StS = S.T @ S
    for r in range(len(obs)):
        tt = np.outer(T[r], T[r])
        A += np.kron(tt, StS)
        b += np.kron(T[r], S.T @ Y[r])
    P_s = splines.second_difference_penalty(ds)
    P_t = splines.second_difference_penalty(dt)
    scale = np.trace(A) / (ds * dt)
    A += smooth_weight * scale * (np.kron(np.eye(dt), P_s) + np.kron(P_t, np.eye(ds)))
    coef = np.linalg.solve(A, b)
    C = coef.reshape(dt, ds).T                                   # (ds, dt)

    # pooled residual FPCA
    resid = np.array([Y[r] - S @ C @ T[r] for r in range(len(obs))])
    basis = fpca(FunctionalSample(grid=s_grid, curves=resid), var_threshold=1.0)
    K_eff = min(K, basis.eigenfunctions.shape[0])
    phi = basis.eigenfunctions[:K_eff]
    evals = basis.eigenvalues[:K_eff]
    w = trapezoid_weights(s_grid)
    scores = resid @ (w[:, None] * phi.T)                        # (N, K_eff)

    score_paths = []
    fitted = np.zeros_like(resid)
    for i in range(n_units):
        idx = [r for r, (u, _, _) in enumerate(obs) if u == i]
        ts = np.array([obs[r][1] for r in idx])
        paths = []
        for k in range(K_eff):
            y = scores[idx, k]
            if k == 0:
                iso = IsotonicRegression(increasing=True, out_of_bounds="clip")
                fit = iso.fit_transform(ts, y)
                tail = _tail_slope(ts, fit)
            else:
                fit = y.copy()
                tail = 0.0
            paths.append(_ScorePath(times=ts, fitted=fit, tail_slope=tail))
        score_paths.append(paths)
        for r, ri in enumerate(idx):
            fitted[ri] = sum(paths[k](ts[r]) * phi[k] for k in range(K_eff))
    residual_scale = float(np.std(resid - fitted))
    return LongFuncModel(
        s_grid=s_grid,
        s_knots=s_knots,
        t_knots=t_knots,
        degree=degree,
        mean_coefs=C,
        t_range=(t_lo, t_hi),
        eigenfunctions=phi,
        eigenvalues=evals,
        score_paths=score_paths,
        residual_scale=residual_scale,
    )


def _tail_slope(ts, fitted) -> float:
    """Non-negative slope of the trailing half of an isotonic score path."""
    half = max(2, len(ts) // 2)
    t, y = ts[-half:], fitted[-half:]
    if np.ptp(t) < 1e-12:
        return 0.0
    slope = float(np.polyfit(t, y, 1)[0])
    return max(slope, 0.0)


# ---------------------------------------------------------------------------
# Functional covariate design (cumulative-damage regression)
# ---------------------------------------------------------------------------


def functional_covariate_design(lambda_grid, times, x, m: int, degree: int = 3):
    """Design rows for the cumulative functional-covariate regression.

    x has shape (n_units, n_times, len(lambda_grid)); row (i, j) of the result
    is the cumulative sum over t <= t_j of the quadrature inner products of
    x_i(., t) with each of m B-spline basis functions on the lambda grid.
    Returns (design (n, n_times, m), basis knots).
    """
    lam = np.asarray(lambda_grid, dtype=float)
    if len(lam) == 0:
        raise ValueError("lambda grid is empty")
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or x.shape[1] != len(times) or x.shape[2] != len(lam):
        raise ValueError("x must have shape (n_units, n_times, len(lambda_grid))")
    n_interior = m - degree - 1
    if n_interior < 0:
        raise ValueError(f"basis dim m={m} too small for degree {degree}")
    knots = splines.knot_vector(float(lam[0]), float(lam[-1]), degree, n_interior,
                                "uniform")
    Phi = splines.design_matrix(lam, knots, degree)              # (n_lam, m)
    w = trapezoid_weights(lam)
    per_time = np.einsum("ntl,lm->ntm", x, w[:, None] * Phi)
    return np.cumsum(per_time, axis=1), knots


CURVES_HEADER = ["unit_id", "time", "arg", "value"]


def load_curves_csv(path):
    """Load long-form curves (`unit_id,time,arg,value`).

    Every (unit, time) pair must be observed on the same argument grid.
    Returns (records, grid) with records a list of (unit_id, time, values)
    sorted by unit then time.
    """
    import csv

    from .data import DataError

    table = {}
    args = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if got != CURVES_HEADER:
            raise DataError(f"{path}: expected header {CURVES_HEADER}, got {got}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 fields")
            uid = row[0]
            try:
                t, a, v = float(row[1]), float(row[2]), float(row[3])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad numeric value") from None
            key = (uid, t, a)
            if key in table:
                raise DataError(f"{path}:{lineno}: duplicate entry {key}")
            table[key] = v
            args.add(a)
    grid = np.array(sorted(args))
    curves = sorted({(uid, t) for uid, t, _ in table})
    records = []
    for uid, t in curves:
        try:
            vals = np.array([table[(uid, t, a)] for a in grid])
        except KeyError:
            raise DataError(
                f"{path}: curve ({uid}, {t}) not observed on the common grid"
            ) from None
        records.append((uid, t, vals))
    return records, grid


def save_curves_csv(records, grid, path):
    """Write (unit_id, time, values) records in the long curves format."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVES_HEADER)
        for uid, t, vals in sorted(records, key=lambda r: (r[0], r[1])):
            for a, v in zip(grid, vals):
                w.writerow([uid, repr(float(t)), repr(float(a)), repr(float(v))])
