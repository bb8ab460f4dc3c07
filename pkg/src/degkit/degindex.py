"""Degradation-index construction from multi-channel sensor data.

The index z_i(t) = sum_j f_j[x_ij(t)] is an additive spline model fit by
minimizing squared deviation of the event-time index from its anchored level,
plus a group-lasso penalty selecting channels and a non-monotonicity penalty
with a strict-monotonicity surcharge c.  The problem as stated is minimized
by beta = 0 (index identically constant), so the event-time mean index is
anchored at 1 by a rescaling projection after every coordinate-descent sweep;
the index is only defined up to affine transformation, and anchoring the
event level makes the threshold interpretable.
"""

from dataclasses import dataclass, field

import numpy as np

from . import splines
from .data import Dataset, UnitRecord


@dataclass(frozen=True)
class SplineSpec:
    degree: int = 3
    num_interior_knots: int = 5
    knot_placement: str = "quantile"
    ranges: dict | None = None  # channel -> (lo, hi); filled from data when None

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("spline degree must be >= 1")
        if self.num_interior_knots < 0:
            raise ValueError("num_interior_knots must be >= 0")

    @property
    def dim(self) -> int:
        return splines.basis_dim(self.degree, self.num_interior_knots)


@dataclass
class FitOptions:
    max_sweeps: int = 300
    tol: float = 1e-8
    hinge_penalty: bool = False  # max(x+c, 0) variant instead of the strict form


@dataclass
class DegIndexModel:
    spline: SplineSpec
    channel_names: list
    knots: dict            # channel -> knot vector
    centers: dict          # channel -> basis column means (identifiability)
    beta: dict             # channel -> coefficient block
    lambda1: float
    lambda2: float
    c: float
    zbar: float = 1.0
    converged: bool = True
    feasible: bool = True
    objective_trace: list = field(default_factory=list)
    hinge_penalty: bool = False

    @property
    def selected(self) -> set:
        return {ch for ch, b in self.beta.items() if np.linalg.norm(b) > 0}

    def to_dict(self) -> dict:
        return {
            "schema_version": "1",
            "kind": "deg_index_model",
            "degree": self.spline.degree,
            "num_interior_knots": self.spline.num_interior_knots,
            "channel_names": list(self.channel_names),
            "knots": {ch: list(map(float, k)) for ch, k in self.knots.items()},
            "centers": {ch: list(map(float, v)) for ch, v in self.centers.items()},
            "beta": {ch: list(map(float, b)) for ch, b in self.beta.items()},
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "c": self.c,
            "zbar": self.zbar,
            "selected": sorted(self.selected),
            "converged": self.converged,
            "feasible": self.feasible,
            "objective_trace": list(map(float, self.objective_trace)),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DegIndexModel":
        spec = SplineSpec(degree=d["degree"], num_interior_knots=d["num_interior_knots"])
        return cls(
            spline=spec,
            channel_names=list(d["channel_names"]),
            knots={ch: np.array(k) for ch, k in d["knots"].items()},
            centers={ch: np.array(v) for ch, v in d["centers"].items()},
            beta={ch: np.array(b) for ch, b in d["beta"].items()},
            lambda1=d["lambda1"],
            lambda2=d["lambda2"],
            c=d["c"],
            zbar=d.get("zbar", 1.0),
            converged=d.get("converged", True),
            feasible=d.get("feasible", True),
            objective_trace=d.get("objective_trace", []),
        )


def _channel_basis(model: DegIndexModel, channel: str, values) -> np.ndarray:
    B = splines.design_matrix(values, model.knots[channel], model.spline.degree)
    return B - model.centers[channel]


def eval_index(model: DegIndexModel, unit: UnitRecord) -> np.ndarray:
    """Index path z_i(t) at the unit's measurement times."""
    missing = set(model.channel_names) - set(unit.channels)
    if missing:
        raise ValueError(f"unit {unit.unit_id} missing channels {sorted(missing)}")
    z = np.zeros(unit.n_times)
    for ch in model.channel_names:
        z += _channel_basis(model, ch, unit.channels[ch]) @ model.beta[ch]
    return z


def _pos_part(d, c, hinge):
    """The paper-form surcharge [x]_+ = x + c for x > 0 (discontinuous at 0),
    or the hinge variant max(x + c, 0)."""
    if hinge:
        return np.maximum(d + c, 0.0)
    return np.where(d > 0, d + c, 0.0)


def objective(model: DegIndexModel, data: Dataset):
    """Returns (loss, group_penalty, mono_penalty)."""
    events = data.event_units()
    if not events:
        raise ValueError("objective undefined: no event units in data")
    loss = 0.0
    mono = 0.0
    for u in data.units:
        z = eval_index(model, u)
        if u.event_indicator == 1:
            loss += (z[-1] - model.zbar) ** 2
        d = z[:-1] - z[1:]
        mono += float(np.sum(_pos_part(d, model.c, model.hinge_penalty)))
    group = sum(np.linalg.norm(b) for b in model.beta.values())
    return float(loss), float(model.lambda1 * group), float(model.lambda2 * mono)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


class _Problem:
    """Precomputed design for block coordinate descent."""

    def __init__(self, data: Dataset, spline: SplineSpec, c: float, hinge: bool):
        self.channels = list(data.channel_names)
        self.c = c
        self.hinge = hinge
        self.d = spline.dim
        self.spline = spline
        self.knots = {}
        self.centers = {}
        pooled = {ch: np.concatenate([u.channels[ch] for u in data.units])
                  for ch in self.channels}
        for ch, vals in pooled.items():
            lo, hi = float(np.min(vals)), float(np.max(vals))
            if spline.ranges and ch in spline.ranges:
                lo, hi = spline.ranges[ch]
            if hi <= lo:
                hi = lo + 1.0
            self.knots[ch] = splines.knot_vector(
                lo, hi, spline.degree, spline.num_interior_knots,
                spline.knot_placement, vals,
            )
        raw = {
            ch: splines.design_matrix(pooled[ch], self.knots[ch], spline.degree)
            for ch in self.channels
        }
        for ch in self.channels:
            self.centers[ch] = raw[ch].mean(axis=0)
        # event rows and consecutive-difference rows, per channel block
        ev_rows = {ch: [] for ch in self.channels}
        diff_rows = {ch: [] for ch in self.channels}
        offset = 0
        for u in data.units:
            n = u.n_times
            for ch in self.channels:
                B = raw[ch][offset : offset + n] - self.centers[ch]
                if u.event_indicator == 1:
                    ev_rows[ch].append(B[-1])
                diff_rows[ch].append(B[:-1] - B[1:])
            offset += n
        self.E = {ch: np.array(ev_rows[ch]) for ch in self.channels}
        self.G = {ch: np.vstack(diff_rows[ch]) for ch in self.channels}
        self.n_events = len(next(iter(self.E.values())))
        if self.n_events == 0:
            raise ValueError("objective undefined: no event units in data")
        self.lip = {
            ch: 2.0 * np.linalg.norm(self.E[ch], 2) ** 2 + 1e-12
            for ch in self.channels
        }

    def parts(self, beta, lambda1, lambda2):
        z_e = sum(self.E[ch] @ beta[ch] for ch in self.channels)
        dvec = sum(self.G[ch] @ beta[ch] for ch in self.channels)
        loss = float(np.sum((z_e - 1.0) ** 2))
        mono = float(lambda2 * np.sum(_pos_part(dvec, self.c, self.hinge)))
        group = float(lambda1 * sum(np.linalg.norm(beta[ch]) for ch in self.channels))
        return loss, group, mono


def _ridge_init(prob: _Problem) -> dict:
    E = np.hstack([prob.E[ch] for ch in prob.channels])
    lam = 1e-2 * (np.trace(E.T @ E) / E.shape[1] + 1e-12)
    coef = np.linalg.solve(E.T @ E + lam * np.eye(E.shape[1]), E.T @ np.ones(prob.n_events))
    beta = {}
    for k, ch in enumerate(prob.channels):
        beta[ch] = coef[k * prob.d : (k + 1) * prob.d].copy()
    return beta


def fit_index(data: Dataset, spline: SplineSpec, lambda1: float, lambda2: float,
              c: float = 0.01, opts: FitOptions = None,
              init: dict = None) -> DegIndexModel:
    """Block coordinate descent with a proximal step for the group norm.

    The discontinuous monotonicity term is handled by subgradient steps; a
    sweep-level step-halving rule keeps the objective trace (measured after
    each rescaling projection) non-increasing.  A final cleanup pass zeroes
    any block whose removal does not increase the objective, so near-zero
    blocks left by the normalization anchor become exact zeros.  `init`
    warm-starts from another solution's coefficients.
    """
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("lambda1, lambda2 must be >= 0")
    opts = opts or FitOptions()
    prob = _Problem(data, spline, c, opts.hinge_penalty)
    beta = ({ch: np.asarray(v, dtype=float).copy() for ch, v in init.items()}
            if init is not None else _ridge_init(prob))

    def rescale(beta):
        z_e = sum(prob.E[ch] @ beta[ch] for ch in prob.channels)
        mu = float(np.mean(z_e))
        if abs(mu) < 1e-8:
            return None
        return {ch: b / mu for ch, b in beta.items()}

    beta = rescale(beta)
    if beta is None:
        return _infeasible_model(prob, lambda1, lambda2, c, opts)

    def bcd_stage(beta, lam2):
        obj = sum(prob.parts(beta, lambda1, lam2))
        trace = [obj]
        step = 1.0
        converged = False
        for sweep in range(opts.max_sweeps):
            cand = {ch: b.copy() for ch, b in beta.items()}
            z_e = sum(prob.E[ch] @ cand[ch] for ch in prob.channels)
            dvec = sum(prob.G[ch] @ cand[ch] for ch in prob.channels)
            for ch in prob.channels:
                r = z_e - 1.0
                active = (dvec > 0) if not opts.hinge_penalty else (dvec > -prob.c)
                grad = 2.0 * prob.E[ch].T @ r + lam2 * prob.G[ch].T @ active
                t = step / prob.lip[ch]
                v = cand[ch] - t * grad
                nv = np.linalg.norm(v)
                shrink = max(0.0, 1.0 - t * lambda1 / nv) if nv > 0 else 0.0
                new = shrink * v
                z_e += prob.E[ch] @ (new - cand[ch])
                dvec += prob.G[ch] @ (new - cand[ch])
                cand[ch] = new
            if all(np.linalg.norm(b) == 0 for b in cand.values()):
                return None, None, trace, True
            scaled = rescale(cand)
            if scaled is None:
                step *= 0.5
                if step < 1e-10:
                    break
                continue
            new_obj = sum(prob.parts(scaled, lambda1, lam2))
            if new_obj <= obj + 1e-12:
                rel = (obj - new_obj) / max(abs(obj), 1e-12)
                beta, obj = scaled, new_obj
                trace.append(obj)
                step = min(step * 1.25, 1.0)
                if rel < opts.tol:
                    converged = True
                    break
            else:
                step *= 0.5
                if step < 1e-10:
                    converged = True
                    break
        return beta, obj, trace, converged

    # continuation on the monotonicity weight: anneal up to the target so the
    # harsh discontinuous penalty does not freeze the descent at the start
    stages = ([lambda2 * s for s in (1e-3, 1e-2, 1e-1)] if lambda2 > 0 else [])
    for lam2 in stages:
        out, _, _, _ = bcd_stage(beta, lam2)
        if out is None:
            return _infeasible_model(prob, lambda1, lambda2, c, opts)
        beta = out
    beta_new, obj, trace, converged = bcd_stage(beta, lambda2)
    if beta_new is None:
        return _infeasible_model(prob, lambda1, lambda2, c, opts)
    beta = beta_new
    # cleanup: zero out blocks whose removal does not hurt the objective
    for _pass in range(5):
        changed = False
        for ch in prob.channels:
            if np.linalg.norm(beta[ch]) == 0:
                continue
            cand = {k: v.copy() for k, v in beta.items()}
            cand[ch] = np.zeros(prob.d)
            scaled = rescale(cand)
            if scaled is None:
                continue
            new_obj = sum(prob.parts(scaled, lambda1, lambda2))
            if new_obj <= obj + 1e-12:
                beta, obj = scaled, new_obj
                trace.append(obj)
                changed = True
        if not changed:
            break
    return DegIndexModel(
        spline=spline,
        channel_names=prob.channels,
        knots=prob.knots,
        centers=prob.centers,
        beta=beta,
        lambda1=lambda1,
        lambda2=lambda2,
        c=c,
        converged=converged,
        feasible=True,
        objective_trace=trace,
        hinge_penalty=opts.hinge_penalty,
    )


def _infeasible_model(prob, lambda1, lambda2, c, opts):
    return DegIndexModel(
        spline=prob.spline,
        channel_names=prob.channels,
        knots=prob.knots,
        centers=prob.centers,
        beta={ch: np.zeros(prob.d) for ch in prob.channels},
        lambda1=lambda1,
        lambda2=lambda2,
        c=c,
        converged=True,
        feasible=False,
        objective_trace=[],
        hinge_penalty=opts.hinge_penalty,
    )


def default_lambda_grid():
    """Default (lambda1, lambda2) tuning grid: group-penalty ladder with a
    strong monotonicity weight."""
    return [(l1, 1000.0) for l1 in (0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0)]


def bic_score(loss, n_events, n_active_coefs) -> float:
    return float(
        n_events * np.log(max(loss, 1e-12) / n_events)
        + n_active_coefs * np.log(n_events)
    )


def select_tuning(data: Dataset, spline: SplineSpec, grid, c: float = 0.01,
                  opts: FitOptions = None):
    """Fit every grid point and pick the BIC-style minimizer.

    Returns (best model, score table); the table has one row per grid point.
    """
    if not grid:
        raise ValueError("tuning grid must be nonempty")
    table = []
    best = None
    best_bic = np.inf
    warm = None
    for lambda1, lambda2 in sorted(grid):
        model = fit_index(data, spline, lambda1, lambda2, c, opts, init=warm)
        if model.feasible:
            warm = model.beta
        row = {"lambda1": lambda1, "lambda2": lambda2, "feasible": model.feasible}
        if model.feasible:
            loss, _, _ = objective(model, data)
            n_active = int(sum(np.count_nonzero(b) for b in model.beta.values()))
            n_events = len(data.event_units())
            row.update(
                loss=loss,
                n_active_coefs=n_active,
                n_channels=len(model.selected),
                bic=bic_score(loss, n_events, n_active),
            )
            if row["bic"] < best_bic:
                best, best_bic = model, row["bic"]
        table.append(row)
    if best is None:
        raise RuntimeError("all tuning fits were infeasible")
    return best, table
