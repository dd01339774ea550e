"""Command-line interface.

Every numeric option resolves as: built-in preset < ``--config`` file
(``key=value`` lines, keys are option names with dashes or underscores) <
command-line flag.  All randomness derives from ``--seed`` (default: the
``EDM_SEED`` environment variable, else 0).
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .analysis import (churn_degradation, convergence_errors, drift, fit_slope, roundtrip_error,
                       truncation_scan)
from .augment import AugmentConstants, AugmentParams, augment_image, draw_augment_batch, make_augment_fn
from .core import Dataset, FormatError, builtin_dataset, dataset_load, dataset_save, rng_stream
from .denoiser import AnalyticDenoiser, GaussianDenoiser, PreconditionedDenoiser
from .samplers import (SAMPLERS, STOCHASTIC_PRESETS, StochasticParams, UnsupportedConfiguration, encode,
                       run_sampler)
from .schedules import FRAMEWORKS, DomainError, iddpm_u, make_plan, preset
from .training import MlpDenoiser, TrainConfig, as_denoiser, loss_profile, train_loop

REPORT_FORMAT_VERSION = 1


class UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UserError(message)


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # shortest string that round-trips
    return str(v)


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ----------------------------------------------------------- option tables

# name -> (type, default or None for preset-driven, help)
SCHEDULE_OPTS = {
    "sigma-min": (float, None, "lowest positive noise level (edm 0.002, ve 0.02)"),
    "sigma-max": (float, None, "highest noise level (default 80)"),
    "rho": (float, 7.0, "time-step exponent (default 7)"),
    "beta-d": (float, 19.9, "VP beta_d (default 19.9)"),
    "beta-min": (float, 0.1, "VP beta_min (default 0.1)"),
    "eps-s": (float, 1e-3, "VP sampling end time (default 1e-3)"),
    "M": (int, 1000, "iDDPM level count (default 1000)"),
    "C1": (float, 0.001, "iDDPM C1 (default 0.001)"),
    "C2": (float, 0.008, "iDDPM C2 (default 0.008)"),
    "j0": (int, 8, "iDDPM first index (default 8)"),
}
STOCH_OPTS = {
    "s-churn": (float, None, "stochasticity strength (default 0)"),
    "s-tmin": (float, None, "lowest level receiving churn (default 0)"),
    "s-tmax": (float, None, "highest level receiving churn (default inf)"),
    "s-noise": (float, None, "noise inflation (default 1)"),
}


def _add_opts(p, table):
    for name, (typ, default, help_) in table.items():
        p.add_argument(f"--{name}", dest=name.replace("-", "_"), type=typ, default=None, help=help_)


def _read_config(path) -> dict:
    out = {}
    if not path:
        return out
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UserError(f"cannot read config file {path}: {exc.strerror}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UserError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


class Resolved:
    """Resolves option values and remembers them for the run report."""

    def __init__(self, args, tables):
        self.args = args
        self.config = _read_config(getattr(args, "config", None))
        self.types = {}
        self.defaults = {}
        for t in tables:
            for name, (typ, default, _) in t.items():
                key = name.replace("-", "_")
                self.types[key], self.defaults[key] = typ, default
        unknown = set(self.config) - set(self.types) - set(vars(args))
        if unknown:
            raise UserError(f"unknown config keys: {', '.join(sorted(unknown))}")
        self.used = {}

    def get(self, key, fallback=None):
        v = getattr(self.args, key, None)
        if v is None and key in self.config:
            typ = self.types.get(key, str)
            try:
                v = typ(self.config[key])
            except ValueError:
                raise UserError(f"config value {key}={self.config[key]!r} is not a valid {typ.__name__}") from None
        if v is None:
            v = self.defaults.get(key)
        if v is None:
            v = fallback
        self.used[key] = v
        return v


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("EDM_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UserError(f"EDM_SEED must be an integer, got {env!r}") from None


def _threads(args) -> int:
    n = args.threads if args.threads is not None else (os.cpu_count() or 1)
    if n < 1:
        raise UserError("--threads must be >= 1")
    return n


def _load_dataset(spec: str, seed: int = 0) -> Dataset:
    if Path(spec).exists():
        return dataset_load(spec)
    try:
        return builtin_dataset(spec, seed)
    except ValueError:
        raise UserError(f"dataset {spec!r} is neither a file nor a built-in (two-point, gaussian:<s>, grid2d)") \
            from None


def _plan(framework, N, r: Resolved):
    p = preset(framework)
    overrides = {
        "sigma_min": r.get("sigma_min", p.sigma_min),
        "sigma_max": r.get("sigma_max", p.sigma_max),
        "rho": r.get("rho"),
        "beta_d": r.get("beta_d"),
        "beta_min": r.get("beta_min"),
        "eps_s": r.get("eps_s"),
        "M": r.get("M"),
        "C1": r.get("C1"),
        "C2": r.get("C2"),
        "j0": r.get("j0"),
    }
    return make_plan(framework, N, preset(framework, **overrides))


def _denoiser(spec: str, r: Resolved, seed: int):
    kind, _, rest = spec.partition(":")
    if kind == "analytic" and rest:
        return AnalyticDenoiser(_load_dataset(rest, seed))
    if kind == "gaussian" and rest:
        try:
            sd = float(rest)
        except ValueError:
            raise UserError(f"bad gaussian sigma_data {rest!r}") from None
        return GaussianDenoiser(sd, (r.get("dim", 1),))
    if kind == "mlp" and rest:
        if not Path(rest).exists():
            raise UserError(f"weights file not found: {rest}")
        net = MlpDenoiser.load(rest)
        return PreconditionedDenoiser(net, r.get("precond", "edm"), r.get("sigma_data", 0.5),
                                      sample_shape=(net.data_dim,))
    raise UserError(f"bad denoiser spec {spec!r}; use analytic:<dataset>, gaussian:<sigma_data> or mlp:<weights>")


def _write_report(path, command, r: Resolved, extra: dict) -> None:
    if not path:
        return
    rows = [("format_version", REPORT_FORMAT_VERSION), ("command", command), ("version", __version__),
            ("backend", kernels.backend())]
    # threads is left out: it never changes results and reports must match across thread counts
    skip = ("func", "command", "report", "threads")
    settings = {k: v for k, v in vars(r.args).items() if k not in skip and v is not None}
    settings.update(r.used)
    settings.update(extra)
    rows += sorted(settings.items())
    write_csv(path, ["key", "value"], rows)


# ------------------------------------------------------------- commands


def cmd_steps(args, r):
    plan = _plan(args.framework, args.n, r)
    write_csv(args.out, ["i", "t_i", "sigma_i"], [(i, t, s) for i, (t, s) in enumerate(zip(plan.t, plan.sigma))])
    return {}


def _stochastic_params(args, r):
    base = STOCHASTIC_PRESETS[args.stoch_preset] if args.stoch_preset else StochasticParams()
    return StochasticParams(r.get("s_churn", base.S_churn), r.get("s_tmin", base.S_tmin),
                            r.get("s_tmax", base.S_tmax), r.get("s_noise", base.S_noise))


def cmd_sample(args, r):
    seed = _seed(args)
    if args.sampler == "stochastic" and args.framework in ("vp", "ve"):
        raise UserError(f"the stochastic sampler needs sigma(t) = t; framework {args.framework} is not supported")
    D = _denoiser(args.denoiser, r, seed)
    plan = _plan(args.framework, args.n, r)
    sp = _stochastic_params(args, r) if args.sampler == "stochastic" else None
    u = iddpm_u(r.get("M"), r.get("C1"), r.get("C2")) if args.framework == "iddpm" else None
    alpha = r.get("alpha", 1.0)
    count = r.get("count", 100)
    start = time.perf_counter()
    final, nfe = run_sampler(args.sampler, D, plan, count, seed, D.sample_shape, sp, alpha, u,
                             threads=_threads(args))
    elapsed = time.perf_counter() - start
    dataset_save(Dataset(final, "samples"), args.out)
    extra = {"seed": seed, "nfe": nfe}
    if args.wall_time:
        extra["wall_time_s"] = elapsed
    return extra


def cmd_encode(args, r):
    seed = _seed(args)
    D = _denoiser(args.denoiser, r, seed)
    data = _load_dataset(args.input, seed)
    plan = _plan(args.framework, args.n, r)
    if args.framework == "iddpm":
        raise UserError("encode supports edm, vp and ve plans")
    tr = encode(D, plan.schedule, plan, data.samples)
    dataset_save(Dataset(tr.final, "latents"), args.out)
    return {"seed": seed, "nfe": tr.nfe}


def cmd_train(args, r):
    seed = _seed(args)
    data = _load_dataset(args.dataset, seed)
    cfg = TrainConfig(P_mean=r.get("p_mean"), P_std=r.get("p_std"), sigma_data=r.get("sigma_data"),
                      framework=r.get("precond", "edm"), lr=r.get("lr"), batch=r.get("batch"),
                      steps=r.get("steps"), record_every=r.get("record_every"))
    hidden = [int(w) for w in str(r.get("widths", "32,32")).split(",") if w]
    aug_fn, label_dim = None, 0
    a_prob = r.get("augment")
    if a_prob is not None:
        if len(data.sample_shape) != 3:
            raise UserError("--augment needs an HxWxC image dataset")
        aug_fn, label_dim = make_augment_fn(data.sample_shape, AugmentConstants(A_prob=a_prob)), 9
    d = data.dim
    net = MlpDenoiser([d + 1 + label_dim, *hidden, d], label_dim, rng_stream(seed, 0))
    net, records = train_loop(net, data, cfg, rng_stream(seed, 1), aug_fn)
    net.save(args.out)
    header = ["step", "loss"]
    if records:
        edges = records[0].bucket_edges
        header += [f"loss_sigma_{lo:g}_{hi:g}" for lo, hi in zip(edges[:-1], edges[1:])]
    write_csv(args.log, header, [(rec.step, rec.loss, *rec.bucket_losses) for rec in records])
    return {"seed": seed, "params": net.n_params}


def _sigma_grid(spec: str):
    try:
        vals = [float(v) for v in spec.split(",") if v]
    except ValueError:
        raise UserError(f"bad sigma list {spec!r}") from None
    if not vals or min(vals) <= 0:
        raise UserError("sigmas must be positive")
    return vals


def cmd_loss_profile(args, r):
    seed = _seed(args)
    data = _load_dataset(args.dataset, seed)
    cfg = TrainConfig(sigma_data=r.get("sigma_data"), framework=r.get("precond", "edm"))
    if args.denoiser == "zero":
        net = MlpDenoiser([data.dim + 1, data.dim], 0, zero_output=True)
        D = as_denoiser(net, cfg)
    else:
        D = _denoiser(args.denoiser, r, seed)
    rows = loss_profile(D, data, _sigma_grid(r.get("sigmas")), r.get("draws"), rng_stream(seed, 0), cfg)
    write_csv(args.out, ["sigma", "loss", "stderr"], rows)
    return {"seed": seed}


def cmd_augment(args, r):
    seed = _seed(args)
    data = _load_dataset(args.input, seed)
    if len(data.sample_shape) != 3:
        raise UserError("augment needs an HxWxC image dataset")
    consts = AugmentConstants(r.get("a_prob"), r.get("a_scale"), r.get("a_aniso"), r.get("a_trans"))
    images, labels = [], []
    for k, img in enumerate(data.samples):
        a, en = draw_augment_batch(rng_stream(seed, k), consts, 1)
        out, lab = augment_image(img, AugmentParams(a[0], en[0], consts))
        images.append(out)
        labels.append(lab)
    dataset_save(Dataset(np.stack(images), "augmented"), args.out)
    write_csv(args.labels, ["index"] + [f"c{j}" for j in range(9)], [(k, *lab) for k, lab in enumerate(labels)])
    return {"seed": seed}


def _n_list(spec: str):
    try:
        vals = [int(v) for v in spec.split(",") if v]
    except ValueError:
        raise UserError(f"bad N list {spec!r}") from None
    if not vals or min(vals) < 1:
        raise UserError("N values must be >= 1")
    return vals


def cmd_truncation_scan(args, r):
    seed = _seed(args)
    D = _denoiser(args.denoiser, r, seed)
    if not isinstance(D, (AnalyticDenoiser, GaussianDenoiser)):
        raise UserError("truncation-scan needs an analytic or gaussian denoiser")
    plan = _plan(args.framework, args.n, r)
    curve = truncation_scan(D, plan, r.get("substeps"), r.get("trials"), rng_stream(seed, 0), args.solver)
    write_csv(args.out, ["sigma", "mean", "std"], curve.rows())
    return {"seed": seed}


def cmd_order(args, r):
    seed = _seed(args)
    D = _denoiser(args.denoiser, r, seed)
    kind = "euler" if args.sampler == "euler" else "heun"
    alpha = r.get("alpha", 1.0) if args.sampler == "rk2" else 1.0
    curve = convergence_errors(D, _n_list(r.get("ns")), kind, r.get("trials"), rng_stream(seed, 0), alpha,
                               r.get("sigma_min", 0.002), r.get("sigma_max", 80.0), r.get("rho"),
                               stop_at_sigma_min=args.at_sigma_min)
    write_csv(args.out, ["N", "mean", "std"], curve.rows())
    slope = fit_slope(curve)
    print(f"slope,{fmt(slope)}", file=sys.stderr)
    return {"seed": seed, "slope": slope}


def cmd_roundtrip(args, r):
    seed = _seed(args)
    D = _denoiser(args.denoiser, r, seed)
    data = _load_dataset(args.dataset, seed)
    curve = roundtrip_error(D, _n_list(r.get("ns")), data, r.get("trials"), r.get("sigma_min", 0.002),
                            r.get("sigma_max", 80.0), r.get("rho"), stop_at_sigma_min=args.at_sigma_min)
    write_csv(args.out, ["N", "mean", "std"], curve.rows())
    return {"seed": seed}


def cmd_churn(args, r):
    seed = _seed(args)
    D = _denoiser(args.denoiser, r, seed)
    if not isinstance(D, AnalyticDenoiser):
        raise UserError("churn needs an analytic denoiser")
    curve = churn_degradation(D, r.get("sigma"), r.get("iterations"), r.get("s_noise", 1.0), r.get("trials"),
                              rng_stream(seed, 0))
    write_csv(args.out, ["iteration", "mean", "std", "drift"],
              [(a, m, s, d) for (a, m, s), d in zip(curve.rows(), drift(curve))])
    return {"seed": seed}


def cmd_make_dataset(args, r):
    seed = _seed(args)
    try:
        ds = builtin_dataset(args.kind, seed, r.get("count"))
    except ValueError as exc:
        raise UserError(str(exc)) from None
    dataset_save(ds, args.out)
    return {"seed": seed, "count": len(ds)}


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="edmspace", description="Diffusion samplers, schedules and error analysis.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, report=True):
        p.add_argument("--seed", type=int, default=None, help="global seed (default: $EDM_SEED or 0)")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: CPU count)")
        p.add_argument("--config", default=None, help="key=value file; flags override it")
        if report:
            p.add_argument("--report", default=None, help="write a key,value CSV run report here")

    def framework(p):
        p.add_argument("--framework", choices=FRAMEWORKS, default="edm", help="schedule preset (default edm)")
        p.add_argument("--n", type=int, required=True, help="number of steps N")
        _add_opts(p, SCHEDULE_OPTS)

    def den(p, required=True):
        p.add_argument("--denoiser", required=required,
                       help="analytic:<dataset>, gaussian:<sigma_data> or mlp:<weights>")
        p.add_argument("--dim", type=int, default=None, help="sample dimension for gaussian denoisers (default 1)")
        p.add_argument("--sigma-data", dest="sigma_data", type=float, default=None,
                       help="data std for preconditioning (default 0.5)")
        p.add_argument("--precond", choices=("edm", "vp", "ve"), default=None,
                       help="preconditioning of mlp weights (default edm)")

    p = sub.add_parser("steps", help="print a time-step plan as CSV")
    framework(p)
    common(p)
    p.add_argument("--out", default="-", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_steps)

    p = sub.add_parser("sample", help="generate samples")
    framework(p)
    den(p)
    _add_opts(p, STOCH_OPTS)
    common(p)
    p.add_argument("--sampler", choices=SAMPLERS, default="heun", help="integrator (default heun)")
    p.add_argument("--alpha", type=float, default=None, help="rk2 evaluation point (default 1)")
    p.add_argument("--stoch-preset", choices=sorted(STOCHASTIC_PRESETS), default=None,
                   help="stochastic parameter preset; individual flags override it")
    p.add_argument("--count", type=int, default=None, help="number of samples (default 100)")
    p.add_argument("--out", required=True, help="output dataset file")
    p.add_argument("--wall-time", action="store_true", help="include wall time in the report")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("encode", help="map data to latents by running the ODE upward")
    framework(p)
    den(p)
    common(p)
    p.add_argument("--input", required=True, help="dataset file or built-in")
    p.add_argument("--out", required=True, help="output dataset file")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train", help="train a small MLP denoiser")
    common(p)
    p.add_argument("--dataset", required=True, help="dataset file or built-in")
    p.add_argument("--widths", default=None, help="hidden widths, comma separated (default 32,32)")
    p.add_argument("--steps", type=int, default=None, help="SGD steps (default 5000)")
    p.add_argument("--lr", type=float, default=None, help="learning rate (default 0.02)")
    p.add_argument("--batch", type=int, default=None, help="batch size (default 256)")
    p.add_argument("--p-mean", dest="p_mean", type=float, default=None, help="mean of ln sigma (default -1.2)")
    p.add_argument("--p-std", dest="p_std", type=float, default=None, help="std of ln sigma (default 1.2)")
    p.add_argument("--sigma-data", dest="sigma_data", type=float, default=None, help="data std (default 0.5)")
    p.add_argument("--precond", choices=("edm", "vp", "ve"), default=None, help="preconditioning (default edm)")
    p.add_argument("--record-every", dest="record_every", type=int, default=None,
                   help="loss log interval (default 100)")
    p.add_argument("--augment", type=float, default=None, help="enable augmentation with this A_prob")
    p.add_argument("--out", required=True, help="output weights file")
    p.add_argument("--log", default="-", help="loss CSV (default stdout)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("loss-profile", help="per-sigma expected training loss")
    den(p)
    common(p)
    p.add_argument("--dataset", required=True, help="dataset file or built-in")
    p.add_argument("--sigmas", default=None, help="comma separated sigma grid (default 0.01,...,100)")
    p.add_argument("--draws", type=int, default=None, help="Monte-Carlo draws per sigma (default 10000)")
    p.add_argument("--out", default="-", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_loss_profile)

    p = sub.add_parser("augment", help="apply random geometric augmentation")
    common(p)
    p.add_argument("--input", required=True, help="HxWxC dataset file")
    p.add_argument("--a-prob", dest="a_prob", type=float, default=None, help="augment probability (default 0.12)")
    p.add_argument("--a-scale", dest="a_scale", type=float, default=None, help="scale base (default 2^0.2)")
    p.add_argument("--a-aniso", dest="a_aniso", type=float, default=None, help="anisotropy base (default 2^0.2)")
    p.add_argument("--a-trans", dest="a_trans", type=float, default=None, help="translation std (default 1/8)")
    p.add_argument("--out", required=True, help="output dataset file")
    p.add_argument("--labels", default="-", help="label CSV (default stdout)")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("truncation-scan", help="local truncation error per step")
    framework(p)
    den(p)
    common(p)
    p.add_argument("--solver", choices=("euler", "heun"), default="euler", help="solver (default euler)")
    p.add_argument("--substeps", type=int, default=None, help="reference Euler substeps (default 200)")
    p.add_argument("--trials", type=int, default=None, help="samples per step (default 100)")
    p.add_argument("--out", default="-", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_truncation_scan)

    p = sub.add_parser("order", help="global convergence order")
    den(p)
    common(p)
    _add_opts(p, {k: SCHEDULE_OPTS[k] for k in ("sigma-min", "sigma-max", "rho")})
    p.add_argument("--sampler", choices=("euler", "heun", "rk2"), default="heun", help="solver (default heun)")
    p.add_argument("--alpha", type=float, default=None, help="rk2 evaluation point (default 1)")
    p.add_argument("--ns", default=None, help="comma separated N values (default 16,32,64,128,256)")
    p.add_argument("--trials", type=int, default=None, help="latents (default 16)")
    p.add_argument("--at-sigma-min", action="store_true", help="measure before the final step to sigma 0")
    p.add_argument("--out", default="-", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("roundtrip", help="encode/decode error per N")
    den(p)
    common(p)
    _add_opts(p, {k: SCHEDULE_OPTS[k] for k in ("sigma-min", "sigma-max", "rho")})
    p.add_argument("--dataset", required=True, help="dataset file or built-in")
    p.add_argument("--ns", default=None, help="comma separated N values (default 32,64,128,256,512)")
    p.add_argument("--trials", type=int, default=None, help="samples (default: whole dataset)")
    p.add_argument("--at-sigma-min", action="store_true", help="compare states at sigma_min")
    p.add_argument("--out", default="-", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("churn", help="degradation under repeated noise add/remove at fixed sigma")
    den(p)
    common(p)
    p.add_argument("--sigma", type=float, default=None, help="fixed noise level (default 0.5)")
    p.add_argument("--iterations", type=int, default=None, help="cycles (default 1000)")
    p.add_argument("--s-noise", dest="s_noise", type=float, default=None, help="noise inflation (default 1)")
    p.add_argument("--trials", type=int, default=None, help="chains (default 100)")
    p.add_argument("--out", default="-", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_churn)

    p = sub.add_parser("make-dataset", help="write a built-in dataset")
    common(p)
    p.add_argument("--kind", required=True, help="two-point, gaussian:<sigma_data> or grid2d")
    p.add_argument("--count", type=int, default=None, help="samples for gaussian datasets (default 1024)")
    p.add_argument("--out", required=True, help="output dataset file")
    p.set_defaults(func=cmd_make_dataset)
    return parser


# defaults for options without a preset-driven value
OPTION_DEFAULTS = {
    "dim": 1, "sigma_data": 0.5, "precond": "edm", "alpha": 1.0, "count": 100, "widths": "32,32",
    "steps": 5000, "lr": 0.02, "batch": 256, "p_mean": -1.2, "p_std": 1.2, "record_every": 100,
    "sigmas": "0.01,0.02,0.05,0.1,0.2,0.5,1,2,5,10,20,50,100", "draws": 10000, "a_prob": 0.12,
    "a_scale": 2.0**0.2, "a_aniso": 2.0**0.2, "a_trans": 0.125, "substeps": 200, "trials": None,
    "ns": None, "sigma": 0.5, "iterations": 1000, "s_noise": None,
}
TRIALS_DEFAULT = {"truncation-scan": 100, "order": 16, "churn": 100}
NS_DEFAULT = {"order": "16,32,64,128,256", "roundtrip": "32,64,128,256,512"}


def _option_table(args):
    table = {k: (type(v) if v is not None else str, v, "") for k, v in OPTION_DEFAULTS.items()}
    table["trials"] = (int, TRIALS_DEFAULT.get(args.command), "")
    table["ns"] = (str, NS_DEFAULT.get(args.command), "")
    table["s_noise"] = (float, 1.0 if args.command == "churn" else None, "")
    table["count"] = (int, 1024 if args.command == "make-dataset" else 100, "")
    table["augment"] = (float, None, "")
    return table


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        tables = [SCHEDULE_OPTS, STOCH_OPTS, _option_table(args)]
        r = Resolved(args, tables)
        extra = args.func(args, r)
        _write_report(getattr(args, "report", None), args.command, r, extra)
    except UserError as exc:
        print(f"edmspace: error: {exc}", file=sys.stderr)
        return 2
    except (UnsupportedConfiguration, DomainError, FormatError, ValueError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"edmspace: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
