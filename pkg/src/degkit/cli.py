"""Batch command-line surface.

Every subcommand reads files, writes outputs into --out-dir, and drops a
run manifest (command line, input digests, RNG spec, version, duration)
next to the outputs.  All randomness flows through --seed, so a rerun with
identical inputs and flags reproduces its outputs byte for byte (the
manifest's duration field is the only exception).
"""

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .copulas import CopulaSpec
from .data import (DataError, load_dataset, load_field_csv, save_field_csv,
                   save_long_csv)
from .degindex import (DegIndexModel, FitOptions, SplineSpec,
                       default_lambda_grid, eval_index, fit_index,
                       select_tuning)
from .covreg import EnFitOptions, fit_en_lifetime, fit_funcreg, fit_tensorreg
from .funcdata import (FunctionalSample, fpca, functional_covariate_design,
                       load_curves_csv)
from .generators import synth_copula_wiener, synth_fused_index
from .mvdeg import (CopulaWienerModel, McemOptions, OmegaMarginal, ShapeFn,
                    first_passage, fit_mcem, model_from_dict, model_to_dict)
from .rng import RngSpec
from .sigclust import cluster_signals
from .stdeg import StGrid, StModel, StPosterior, gibbs_fit, predict_failure
from .stdeg import simulate_field as st_simulate_field

COMMANDS = ("simulate", "fit-index", "fit-mvdeg", "predict-fp", "fpca",
            "cluster", "fit-en", "fit-funcreg", "fit-tensor", "fit-st",
            "predict-st")


# ---------------------------------------------------------------------------
# Plumbing
# ---------------------------------------------------------------------------


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _json_dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _fmt(x) -> str:
    return repr(float(x))


def _outpath(args, name) -> Path:
    p = Path(name)
    if p.is_absolute() or ".." in p.parts:
        raise ValueError(f"output path {name!r} must be relative to --out-dir")
    out = Path(args.out_dir) / p
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(args, argv, inputs, t0):
    digests = {str(p): _sha256(p) for p in sorted(set(map(str, inputs)))}
    cfg_hash = _sha256(args.config) if getattr(args, "config", None) else None
    manifest = {
        "command": argv,
        "config_hash": cfg_hash,
        "rng": RngSpec(args.seed).to_dict(),
        "input_digests": digests,
        "version": __version__,
        "duration_s": time.monotonic() - t0,
    }
    _json_dump(manifest, Path(args.out_dir) / "manifest.json")


def _float_list(text):
    return [float(v) for v in text.split(",") if v]


def _int_list(text):
    return [int(v) for v in text.split(",") if v]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args):
    spec = RngSpec(args.seed)
    if args.kind == "fused-index":
        ds, _ = synth_fused_index(args.n, args.p, tuple(_int_list(args.active)),
                                  args.noise_sd, spec, n_times=args.n_times)
        save_long_csv(ds, _outpath(args, "data.csv"), _outpath(args, "events.csv"))
    elif args.kind == "copula-wiener":
        p = args.p
        if p > 1:
            R = np.full((p, p), args.rho)
            np.fill_diagonal(R, 1.0)
            cop = CopulaSpec("gaussian", R)
        else:
            cop = CopulaSpec("independence")
        model = CopulaWienerModel(
            p=p,
            shapes=tuple(ShapeFn(kappa=args.kappa) for _ in range(p)),
            sigmas=np.full(p, args.sigma),
            omega_marginals=tuple(
                OmegaMarginal("lognormal", (args.omega_mu, args.omega_sigma))
                for _ in range(p)
            ),
            copula=cop,
            noise_sd=np.full(p, args.noise_sd),
        )
        grid = np.linspace(0.0, args.t_max, args.n_times + 1)
        ds, _ = synth_copula_wiener(model, args.n, grid, spec)
        save_long_csv(ds, _outpath(args, "data.csv"))
    else:  # field
        grid = StGrid(args.rows, args.cols)
        model = StModel(grid=grid, alpha=args.alpha, q=args.q, r=args.r,
                        mu0=args.mu0, s0=args.s0, tau=args.tau)
        D, U = st_simulate_field(model, spec.generator("field"))
        times = np.arange(D.shape[0], dtype=float)
        save_field_csv(times, D, _outpath(args, "field.csv"))
        save_field_csv(times, U, _outpath(args, "latent.csv"))
    return []


def cmd_fit_index(args):
    ds = load_dataset(args.data, args.events)
    spline = SplineSpec(degree=args.degree, num_interior_knots=args.knots)
    opts = FitOptions()
    if args.lambda1 is None:
        model, table = select_tuning(ds, spline, default_lambda_grid(),
                                     c=args.c, opts=opts)
    else:
        model = fit_index(ds, spline, args.lambda1, args.lambda2, args.c, opts)
        table = None
    out = model.to_dict()
    if table is not None:
        out["tuning_table"] = table
    _json_dump(out, _outpath(args, args.out))
    return [args.data] + ([args.events] if args.events else [])


_INIT_MARGINALS = {
    "lognormal": ("lognormal", (0.0, 0.5)),
    "weibull": ("weibull", (1.5, 1.0)),
    "gamma": ("gamma", (2.0, 0.5)),
}


def cmd_fit_mvdeg(args):
    ds = load_dataset(args.data)
    p = ds.n_channels
    fams = args.marginals.split(",")
    if len(fams) == 1:
        fams = fams * p
    if len(fams) != p:
        raise ValueError(f"need {p} marginal families, got {len(fams)}")
    marginals = tuple(OmegaMarginal(*_INIT_MARGINALS[f]) for f in fams)
    if args.copula == "gaussian":
        cop = CopulaSpec("gaussian", np.eye(p))
    elif args.copula == "independence":
        cop = CopulaSpec("independence")
    elif args.copula == "gumbel":
        cop = CopulaSpec("gumbel", 1.5)
    else:
        cop = CopulaSpec(args.copula, 2.0)
    init = CopulaWienerModel(
        p=p,
        shapes=tuple(ShapeFn() for _ in range(p)),
        sigmas=np.full(p, args.init_sigma),
        omega_marginals=marginals,
        copula=cop,
        noise_sd=np.full(p, args.noise_sd),
    )
    opts = McemOptions(mc_draws=args.mc_draws, max_iters=args.iters)
    model, trace = fit_mcem(ds, init, opts, rng_spec=RngSpec(args.seed))
    out = model_to_dict(model)
    out["trace"] = {"loglik": trace.loglik, "ess_min": trace.ess_min}
    _json_dump(out, _outpath(args, args.out))
    return [args.data]


def cmd_predict_fp(args):
    with open(args.model) as fh:
        model = model_from_dict(json.load(fh))
    t_grid = np.linspace(0.0, args.t_max, args.n_grid + 1)
    res = first_passage(model, _float_list(args.threshold), mode=args.mode,
                        n_mc=args.n_mc,
                        rng=RngSpec(args.seed).generator("predict-fp"),
                        t_grid=t_grid)
    _write_csv(_outpath(args, args.out), ["t", "prob"],
               [[_fmt(t), _fmt(p)] for t, p in zip(res.times, res.cdf)])
    return [args.model]


def cmd_fpca(args):
    records, grid = load_curves_csv(args.curves)
    curves = np.array([vals for _, _, vals in records])
    basis = fpca(FunctionalSample(grid=grid, curves=curves), args.threshold)
    _json_dump(
        {
            "schema_version": "1",
            "unit_ids": [uid for uid, _, _ in records],
            "times": [t for _, t, _ in records],
            "grid": basis.grid.tolist(),
            "mean": basis.mean.tolist(),
            "eigenfunctions": basis.eigenfunctions.tolist(),
            "eigenvalues": basis.eigenvalues.tolist(),
            "scores": basis.scores.tolist(),
            "var_explained": basis.var_explained,
            "total_variance": basis.total_variance,
        },
        _outpath(args, args.out),
    )
    return [args.curves]


def cmd_cluster(args):
    records, grid = load_curves_csv(args.curves)
    uids = [uid for uid, _, _ in records]
    if len(set(uids)) != len(uids):
        raise ValueError("cluster expects exactly one curve per unit")
    curves = np.array([vals for _, _, vals in records])
    lam = "auto" if args.lam == "auto" else float(args.lam)
    labels, _, _ = cluster_signals(
        [FunctionalSample(grid=grid, curves=curves)],
        K=args.K, lam=lam, rng_spec=RngSpec(args.seed), unit_ids=uids,
    )
    rows = sorted(zip(uids, labels))
    _write_csv(_outpath(args, args.out), ["unit_id", "cluster"],
               [[u, int(c)] for u, c in rows])
    return [args.curves]


def _load_surv_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["unit_id", "time", "delta"]:
            raise DataError(f"{path}: expected header unit_id,time,delta,x1..xp")
        names = header[3:]
        uids, times, delta, X = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
            uids.append(row[0])
            try:
                times.append(float(row[1]))
                delta.append(int(row[2]))
                X.append([float(v) for v in row[3:]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad numeric value") from None
    return uids, np.array(times), np.array(delta), np.array(X), names


def cmd_fit_en(args):
    _, times, delta, X, names = _load_surv_csv(args.data)
    opts = EnFitOptions(
        sigma_w="fit" if args.sigma_w == "fit" else float(args.sigma_w)
    )
    model = fit_en_lifetime(times, delta, X, alpha=(args.alpha1, args.alpha2),
                            opts=opts)
    _json_dump(
        {
            "schema_version": "1",
            "beta0": model.beta0,
            "beta": dict(zip(names, model.beta.tolist())),
            "sigma": model.sigma,
            "sigma_w": model.sigma_w,
            "alpha": list(model.alpha),
            "selected": sorted(names[j] for j in model.selected),
            "converged": model.converged,
        },
        _outpath(args, args.out),
    )
    return [args.data]


def cmd_fit_funcreg(args):
    records, grid = load_curves_csv(args.curves)
    per_unit = {}
    for uid, t, vals in records:
        per_unit.setdefault(uid, []).append((t, vals))
    uids = sorted(per_unit)
    times = [t for t, _ in per_unit[uids[0]]]
    for uid in uids:
        if [t for t, _ in per_unit[uid]] != times:
            raise DataError("all units must share the same observation times")
    x = np.array([[vals for _, vals in per_unit[uid]] for uid in uids])
    with open(args.response, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["unit_id", "y"]:
            raise DataError(f"{args.response}: expected header unit_id,y")
        ymap = {row[0]: float(row[1]) for row in reader if row}
    missing = [u for u in uids if u not in ymap]
    if missing:
        raise DataError(f"{args.response}: missing response for units {missing}")
    y = np.array([ymap[u] for u in uids])
    design, knots = functional_covariate_design(grid, np.array(times), x, args.m)
    model = fit_funcreg(y, design[:, -1, :], knots,
                        smooth_weight=args.smooth_weight)
    fitted = model.predict(design[:, -1, :])
    _json_dump(
        {
            "schema_version": "1",
            "beta0": model.beta0,
            "psi_coefs": model.psi_coefs.tolist(),
            "psi_knots": model.psi_knots.tolist(),
            "degree": model.degree,
            "residual_scale": model.residual_scale,
        },
        _outpath(args, args.out),
    )
    _write_csv(_outpath(args, "fitted.csv"), ["unit_id", "y", "fitted"],
               [[u, _fmt(a), _fmt(b)] for u, a, b in zip(uids, y, fitted)])
    return [args.curves, args.response]


def cmd_fit_tensor(args):
    base = Path(args.images).parent
    with open(args.images, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["unit_id", "path", "y"]:
            raise DataError(f"{args.images}: expected header unit_id,path,y")
        rows = [row for row in reader if row]
    inputs = [args.images]
    X, y = [], []
    for uid, rel, y_s in rows:
        path = base / rel
        X.append(np.loadtxt(path))
        y.append(float(y_s))
        inputs.append(str(path))
    model = fit_tensorreg(np.array(y), np.array(X), R=args.rank, link=args.link)
    _json_dump(
        {
            "schema_version": "1",
            "alpha0": model.alpha0,
            "u_factors": model.u_factors.tolist(),
            "v_factors": model.v_factors.tolist(),
            "link": model.link,
            "noise_scale": model.noise_scale,
            "objective_trace": model.objective_trace,
        },
        _outpath(args, args.out),
    )
    return inputs


def cmd_fit_st(args):
    _, field = load_field_csv(args.field)
    if field.shape[1] != args.rows or field.shape[2] != args.cols:
        raise DataError(
            f"field is {field.shape[1]}x{field.shape[2]}, "
            f"expected {args.rows}x{args.cols}"
        )
    post = gibbs_fit(field, StGrid(args.rows, args.cols), iters=args.iters,
                     burn_in=args.burn,
                     rng=RngSpec(args.seed).generator("gibbs"),
                     thin_u=args.thin_u)
    _json_dump(post.to_dict(), _outpath(args, args.out))
    return [args.field]


def cmd_predict_st(args):
    with open(args.post) as fh:
        post = StPosterior.from_dict(json.load(fh))
    res = predict_failure(post, rule=args.rule, threshold=args.threshold,
                          horizon=args.horizon, n_mc=args.n_mc,
                          rng=RngSpec(args.seed).generator("predict-st"),
                          level=args.level)
    _write_csv(_outpath(args, args.out), ["t", "prob"],
               [[_fmt(t), _fmt(p)] for t, p in zip(res.times, res.cdf)])
    return [args.post]


# ---------------------------------------------------------------------------
# Plot-data emission
# ---------------------------------------------------------------------------


def emit_plotdata(kind, out_path, **artifacts):
    """Write a tidy plot table for an artifact.

    Kinds: "index-paths" (model=DegIndexModel, data=Dataset), "fp-cdf"
    (result=FirstPassageResult or FieldForecast), "posterior-heatmap"
    (posterior=StPosterior).
    """
    if kind == "index-paths":
        model, data = artifacts["model"], artifacts["data"]
        rows = []
        for u in data.units:
            z = eval_index(model, u)
            rows.extend([u.unit_id, _fmt(t), _fmt(v)] for t, v in zip(u.times, z))
        _write_csv(out_path, ["series", "x", "y"], rows)
    elif kind == "fp-cdf":
        res = artifacts["result"]
        _write_csv(out_path, ["t", "prob"],
                   [[_fmt(t), _fmt(p)] for t, p in zip(res.times, res.cdf)])
    elif kind == "posterior-heatmap":
        post = artifacts["posterior"]
        mean = post.mean_field()
        rows = []
        for t in range(mean.shape[0]):
            for r in range(mean.shape[1]):
                for c in range(mean.shape[2]):
                    rows.append([_fmt(t), r, c, _fmt(mean[t, r, c])])
        _write_csv(out_path, ["t", "row", "col", "value"], rows)
    else:
        raise ValueError(f"unknown plot-data kind {kind!r}")


# ---------------------------------------------------------------------------
# Parser / dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="degkit",
        description="Degradation analytics: simulation, fitting, prediction.",
    )
    parser.add_argument("--version", action="version",
                        version=f"degkit {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", default=".")
    common.add_argument("--config", default=None,
                        help="JSON or key=value file supplying flag defaults")
    common.add_argument("--threads", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common])
    p.add_argument("--kind", required=True,
                   choices=["fused-index", "copula-wiener", "field"])
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--p", type=int, default=5)
    p.add_argument("--active", default="1,2")
    p.add_argument("--noise-sd", type=float, default=0.1)
    p.add_argument("--n-times", type=int, default=30)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--omega-mu", type=float, default=0.0)
    p.add_argument("--omega-sigma", type=float, default=0.5)
    p.add_argument("--t-max", type=float, default=10.0)
    p.add_argument("--rows", type=int, default=16)
    p.add_argument("--cols", type=int, default=16)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--q", type=float, default=0.05)
    p.add_argument("--r", type=float, default=0.2)
    p.add_argument("--mu0", type=float, default=0.0)
    p.add_argument("--s0", type=float, default=0.5)
    p.add_argument("--tau", type=int, default=30)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-index", parents=[common])
    p.add_argument("--data", required=True)
    p.add_argument("--events", default=None)
    p.add_argument("--lambda1", type=float, default=None,
                   help="group penalty; omit for BIC tuning over a grid")
    p.add_argument("--lambda2", type=float, default=1000.0)
    p.add_argument("--c", type=float, default=0.01)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--knots", type=int, default=5)
    p.add_argument("--out", default="model.json")
    p.set_defaults(func=cmd_fit_index)

    p = sub.add_parser("fit-mvdeg", parents=[common])
    p.add_argument("--data", required=True)
    p.add_argument("--copula", default="gaussian",
                   choices=["gaussian", "clayton", "gumbel", "frank",
                            "independence"])
    p.add_argument("--marginals", default="lognormal",
                   help="comma list of marginal families (or one for all)")
    p.add_argument("--noise-sd", type=float, default=0.1)
    p.add_argument("--init-sigma", type=float, default=1.0)
    p.add_argument("--mc-draws", type=int, default=1000)
    p.add_argument("--iters", type=int, default=25)
    p.add_argument("--out", default="model.json")
    p.set_defaults(func=cmd_fit_mvdeg)

    p = sub.add_parser("predict-fp", parents=[common])
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", required=True,
                   help="comma list, one threshold per channel")
    p.add_argument("--mode", default="any", choices=["any", "all"])
    p.add_argument("--t-max", type=float, default=10.0)
    p.add_argument("--n-grid", type=int, default=200)
    p.add_argument("--n-mc", type=int, default=10000)
    p.add_argument("--out", default="cdf.csv")
    p.set_defaults(func=cmd_predict_fp)

    p = sub.add_parser("fpca", parents=[common])
    p.add_argument("--curves", required=True)
    p.add_argument("--threshold", type=float, default=0.95)
    p.add_argument("--out", default="basis.json")
    p.set_defaults(func=cmd_fpca)

    p = sub.add_parser("cluster", parents=[common])
    p.add_argument("--curves", required=True)
    p.add_argument("--K", type=int, default=8)
    p.add_argument("--lambda", dest="lam", default="auto")
    p.add_argument("--out", default="labels.csv")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("fit-en", parents=[common])
    p.add_argument("--data", required=True)
    p.add_argument("--alpha1", type=float, default=0.0)
    p.add_argument("--alpha2", type=float, default=0.0)
    p.add_argument("--sigma-w", default="fit")
    p.add_argument("--out", default="model.json")
    p.set_defaults(func=cmd_fit_en)

    p = sub.add_parser("fit-funcreg", parents=[common])
    p.add_argument("--curves", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--smooth-weight", type=float, default=1e-4)
    p.add_argument("--out", default="model.json")
    p.set_defaults(func=cmd_fit_funcreg)

    p = sub.add_parser("fit-tensor", parents=[common])
    p.add_argument("--images", required=True,
                   help="manifest CSV unit_id,path,y; paths relative to it")
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--link", default="identity", choices=["identity", "log"])
    p.add_argument("--out", default="model.json")
    p.set_defaults(func=cmd_fit_tensor)

    p = sub.add_parser("fit-st", parents=[common])
    p.add_argument("--field", required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--iters", type=int, default=4000)
    p.add_argument("--burn", type=int, default=1000)
    p.add_argument("--thin-u", type=int, default=10)
    p.add_argument("--out", default="post.json")
    p.set_defaults(func=cmd_fit_st)

    p = sub.add_parser("predict-st", parents=[common])
    p.add_argument("--post", required=True)
    p.add_argument("--rule", default="max", choices=["max", "area"])
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--level", type=float, default=None,
                   help="degradation level for the area rule")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--n-mc", type=int, default=1000)
    p.add_argument("--out", default="cdf.csv")
    p.set_defaults(func=cmd_predict_st)
    return parser


def _load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
        if not isinstance(cfg, dict):
            raise ValueError("config JSON must be an object")
        return cfg
    except json.JSONDecodeError:
        pass
    cfg = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        cfg[key.strip()] = value.strip()
    return cfg


def _apply_config(parser, sub_name, cfg):
    """Install config values as defaults on the named subparser; command-line
    flags still win because defaults only fill in unparsed options."""
    actions = None
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            subparser = action.choices.get(sub_name)
            if subparser is not None:
                actions = {a.dest: a for a in subparser._actions}
                target = subparser
    if actions is None:
        return
    defaults = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in actions:
            print(f"degkit: warning: config key {key!r} not recognized by "
                  f"{sub_name}; ignored", file=sys.stderr)
            continue
        act = actions[dest]
        if isinstance(value, str) and act.type is not None:
            value = act.type(value)
        defaults[dest] = value
        if act.required:
            act.required = False
    target.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # pre-scan for --config so its values become defaults before parsing
    cfg_path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            cfg_path = argv[i + 1]
        elif tok.startswith("--config="):
            cfg_path = tok.split("=", 1)[1]
    sub_name = next((tok for tok in argv if tok in COMMANDS), None)
    if cfg_path is not None and sub_name is not None:
        try:
            _apply_config(parser, sub_name, _load_config(cfg_path))
        except (OSError, ValueError) as e:
            print(f"degkit: error: {e}", file=sys.stderr)
            return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    t0 = time.monotonic()
    try:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        inputs = args.func(args)
        _write_manifest(args, argv, inputs, t0)
    except (DataError, ValueError, RuntimeError, OSError, KeyError,
            np.linalg.LinAlgError) as e:
        print(f"degkit: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
