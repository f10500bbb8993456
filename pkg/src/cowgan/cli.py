"""Command-line experiment harness.

Subcommands::

    cowgan estimate --method cowgan --batch 256 --iters 2000 --benchmark gauss4x4 --seed 7
    cowgan train    --method cowgan_p --mix-prob 0.5 --benchmark gauss4x4
    cowgan oracle   a.csv b.csv [--assignment out.csv]
    cowgan bench    --iters 2000 [--grid-field]

Outputs go to ``--out``, else ``$COWGAN_OUT``, else ``./cowgan_out``.
Exit codes: 0 success, 1 runtime failure (``error.json`` written), 2 usage
or configuration error (nothing written).
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone

import numpy as np
import scipy

from . import __version__
from . import autodiff as ad
from .errors import ContractError, NonFiniteError, ParseError
from .measures import benchmark_4x4_gaussians, load_pointcloud, save_pointcloud
from .oracle import exact_w1
from .training import ExperimentConfig, estimate_distance, train_gan

log = logging.getLogger("cowgan")

OUT_ENV = "COWGAN_OUT"
DEFAULT_OUT = "cowgan_out"
BENCHMARKS = ("gauss4x4",)
BENCH_RUNS = (("cowgan", "cowgan", None), ("ctransform", "ctransform", None),
              ("wgan_gp_l1", "wgan_gp", 1.0), ("wgan_gp_l10", "wgan_gp", 10.0))
GRID_H = 1e-4

# flag dest -> ExperimentConfig field
CONFIG_FLAGS = {
    "method": "method", "batch": "batch_size", "iters": "iterations", "n_critic": "n_critic",
    "gp_lambda": "gp_lambda", "mix_prob": "mix_prob", "d_lr": "d_lr", "g_lr": "g_lr",
    "eval_every": "eval_every", "eval_pool": "eval_pool", "seed": "seed",
    "disc_width": "disc_width", "gen_width": "gen_width", "noise_dim": "noise_dim",
}


class UsageError(Exception):
    pass


# --- config and manifest ------------------------------------------------------

def config_hash(values):
    """SHA-256 of the canonical JSON form; independent of key order."""
    blob = json.dumps(values, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def resolve_values(args):
    values = {}
    if args.config:
        try:
            with open(args.config) as fh:
                values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(values, dict):
            raise UsageError("config must be a flat JSON object")
    for flag, key in CONFIG_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    return values


def resolve_config(args, require_method=True, values=None):
    values = resolve_values(args) if values is None else values
    if require_method and "method" not in values:
        raise UsageError("--method is required (or set 'method' in --config)")
    try:
        return ExperimentConfig.from_dict(values)
    except (ContractError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def out_dir(args):
    return args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT


def _now():
    return datetime.now(timezone.utc).isoformat()


def versions():
    return {"cowgan": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_manifest(path, command, cfg_dict, started, outputs, **extra):
    manifest = {
        "command": command,
        "config": cfg_dict,
        "config_hash": config_hash(cfg_dict),
        "seed": cfg_dict.get("seed"),
        "started": started,
        "finished": _now(),
        "versions": versions(),
        "outputs": sorted(outputs),
    }
    manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_diagnostic(directory, exc):
    os.makedirs(directory, exist_ok=True)
    info = {"error": type(exc).__name__, "message": str(exc), "time": _now(),
            "traceback": traceback.format_exception(type(exc), exc, exc.__traceback__)}
    if isinstance(exc, NonFiniteError):
        info["source"] = exc.source
        info["payload"] = {k: np.asarray(v).tolist() for k, v in (exc.payload or {}).items()}
    path = os.path.join(directory, "error.json")
    with open(path, "w") as fh:
        json.dump(info, fh, indent=2, default=str)
    return path


# --- sources --------------------------------------------------------------------

def _load(path, fmt):
    try:
        return load_pointcloud(path, format=fmt)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except (ParseError, ContractError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def resolve_sources(args, count):
    if args.data:
        if len(args.data) != count:
            raise UsageError(f"--data needs {count} path(s), got {len(args.data)}")
        pools = [_load(p, args.format) for p in args.data]
        if len({p.d for p in pools}) != 1:
            raise UsageError("data files have different dimensions")
        meta = {"data": list(args.data), "format": args.format,
                "normalization": pools[0].normalization}
        return pools, meta
    mu, nu = benchmark_4x4_gaussians()
    return ([mu, nu] if count == 2 else [mu]), {"benchmark": args.benchmark, "normalization": "none"}


def _progress(row):
    log.info("iter %d  J1 %.5f  W %.5f  lip %.3f  branches %d/%d/%d", row.iter, row.j1, row.w_oracle,
             row.lip_cross, row.branch_j1, row.branch_j2, row.branch_j3)


def _write_trace(directory, trace, stem="trace"):
    paths = [os.path.join(directory, f"{stem}.csv"), os.path.join(directory, f"{stem}_timings.csv")]
    trace.write_csv(paths[0])
    trace.write_timings(paths[1])
    return paths


# --- grid field ---------------------------------------------------------------------

def grid_field(phi, lo, hi, size=64, h=GRID_H):
    """phi and |grad phi| (central differences, step h) on a size x size grid over [lo, hi]^2 box."""
    xs = np.linspace(lo[0], hi[0], size)
    ys = np.linspace(lo[1], hi[1], size)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    with ad.no_grad():
        def f(p):
            return ad.as_tensor(phi(ad.Tensor(p))).data.reshape(-1)
        values = f(pts)
        grad = np.empty_like(pts)
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            grad[:, k] = (f(pts + e) - f(pts - e)) / (2 * h)
    return pts, values, np.linalg.norm(grad, axis=1)


def write_grid_field(path, phi, pools, size=64):
    allpts = np.vstack([p.points for p in pools])
    pad = 0.1 * (allpts.max(0) - allpts.min(0))
    pts, values, norms = grid_field(phi, allpts.min(0) - pad, allpts.max(0) + pad, size)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("x1", "x2", "phi", "grad_norm"))
        for p, v, g in zip(pts, values, norms):
            w.writerow([format(float(c), ".17g") for c in (p[0], p[1], v, g)])


# --- subcommands ----------------------------------------------------------------------

def cmd_estimate(args):
    cfg = resolve_config(args)
    (mu, nu), meta = resolve_sources(args, 2)
    directory = out_dir(args)
    started = _now()
    try:
        os.makedirs(directory, exist_ok=True)
        ckpt = os.path.join(directory, "checkpoints") if args.checkpoints else None
        trace = estimate_distance(cfg, mu, nu, checkpoint_dir=ckpt, log=_progress)
        outputs = _write_trace(directory, trace)
    except Exception as exc:
        _fail(directory, exc)
        return 1
    write_manifest(os.path.join(directory, "manifest.json"), "estimate", cfg.to_dict(), started,
                   outputs, pool_size=trace.pool_size, **meta)
    print(_summary_line(trace.final))
    return 0


def cmd_train(args):
    cfg = resolve_config(args)
    (data,), meta = resolve_sources(args, 1)
    directory = out_dir(args)
    started = _now()
    try:
        os.makedirs(directory, exist_ok=True)
        ckpt = os.path.join(directory, "checkpoints")
        trace = train_gan(cfg, data, checkpoint_dir=ckpt, log=_progress)
        outputs = _write_trace(directory, trace)
        gen_path = os.path.join(directory, "generated_points.csv")
        save_pointcloud(gen_path, trace.meta["generated"])
        outputs += [gen_path, ckpt]
    except Exception as exc:
        _fail(directory, exc)
        return 1
    write_manifest(os.path.join(directory, "manifest.json"), "train", cfg.to_dict(), started,
                   outputs, pool_size=trace.pool_size, **meta)
    print(_summary_line(trace.final))
    return 0


def cmd_oracle(args):
    a, b = (_load(p, args.format) for p in args.files)
    if len(a) != len(b):
        raise UsageError(f"point clouds differ in size: {len(a)} vs {len(b)}")
    if a.d != b.d:
        raise UsageError(f"point clouds differ in dimension: {a.d} vs {b.d}")
    try:
        coupling = exact_w1(a.points, b.points, max_n=args.max_n)
    except ContractError as exc:
        raise UsageError(str(exc)) from None
    print(format(coupling.cost, ".17g"))
    if args.assignment:
        rows = [(i, int(s), format(float(coupling.costs[i]), ".17g")) for i, s in enumerate(coupling.assignment)]
        fh = sys.stdout if args.assignment == "-" else open(args.assignment, "w", newline="")
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("i", "sigma_i", "cost_i"))
            w.writerows(rows)
        finally:
            if fh is not sys.stdout:
                fh.close()
    return 0


def _bench_one(job):
    name, cfg_dict, directory, grid_size = job
    mu, nu = benchmark_4x4_gaussians()
    cfg = ExperimentConfig.from_dict(cfg_dict)
    start = time.perf_counter()
    trace = estimate_distance(cfg, mu, nu)
    wall = 1e3 * (time.perf_counter() - start)
    outputs = _write_trace(directory, trace, stem=f"trace_{name}")
    if grid_size:
        path = os.path.join(directory, f"grid_{name}.csv")
        pools = [src.sample(cfg.eval_pool, np.random.default_rng(cfg.seed)) for src in (mu, nu)]
        write_grid_field(path, trace.meta["critic"], pools, grid_size)
        outputs.append(path)
    return name, cfg, trace.final, wall, outputs, trace.pool_size


SUMMARY_COLUMNS = ("method", "gp_lambda", "iter", "j1", "j2", "j3", "j4", "w_oracle",
                   "gap_j1", "gap_j2", "gap_j3", "gap_j4", "lip_cross", "lip_within", "wall_ms")


def cmd_bench(args):
    raw = resolve_values(args)
    base = resolve_config(args, require_method=False, values=raw).to_dict()
    if args.grid_size < 2:
        raise UsageError("--grid-size must be >= 2")
    directory = out_dir(args)
    started = _now()
    jobs = []
    for name, method, lam in BENCH_RUNS:
        cfg = dict(base, method=method)
        if "d_lr" not in raw:
            cfg["d_lr"] = ExperimentConfig(method=method).d_lr
        if lam is not None:
            cfg["gp_lambda"] = lam
        jobs.append((name, cfg, directory, args.grid_size if args.grid_field else 0))
    try:
        os.makedirs(directory, exist_ok=True)
        results = _run_jobs(jobs, args.jobs)
        outputs = []
        summary = os.path.join(directory, "summary.csv")
        with open(summary, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            for name, cfg, row, wall, paths, _ in results:
                js = (row.j1, row.j2, row.j3, row.j4)
                gaps = [abs(j - row.w_oracle) / row.w_oracle if row.w_oracle > 0 else float("nan") for j in js]
                lam = cfg.gp_lambda if cfg.method == "wgan_gp" else ""
                vals = [name, lam, row.iter, *js, row.w_oracle, *gaps, row.lip_cross, row.lip_within, wall]
                w.writerow([v if isinstance(v, str) else _num(v) for v in vals])
                outputs += paths
                print(f"{name:12s} J1 {row.j1:.5f}  W {row.w_oracle:.5f}  gap {gaps[0]:.3%}  lip {row.lip_cross:.3f}")
        outputs.append(summary)
    except Exception as exc:
        _fail(directory, exc)
        return 1
    write_manifest(os.path.join(directory, "manifest.json"), "bench", base, started, outputs,
                   pool_size=results[0][5], benchmark=args.benchmark, normalization="none",
                   runs={name: config_hash(cfg) for name, cfg, *_ in jobs})
    return 0


def _run_jobs(jobs, n_jobs):
    # every run is seeded from its own config, so scheduling cannot change results
    if n_jobs <= 1:
        return [_bench_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_bench_one, jobs))


def _num(v):
    return str(v) if isinstance(v, (int, np.integer)) else format(float(v), ".17g")


def _summary_line(row):
    return (f"iter {row.iter}  J1 {row.j1:.6f}  J2 {row.j2:.6f}  J3 {row.j3:.6f}  J4 {row.j4:.6f}  "
            f"W {row.w_oracle:.6f}  lip {row.lip_cross:.4f}")


def _fail(directory, exc):
    path = write_diagnostic(directory, exc)
    print(f"error: {type(exc).__name__}: {exc} (details in {path})", file=sys.stderr)


# --- parser -----------------------------------------------------------------------

def _experiment_flags(p, with_method=True):
    if with_method:
        p.add_argument("--method", choices=("cowgan", "cowgan_p", "ctransform", "wgan_gp"))
    p.add_argument("--batch", type=int, help="mini-batch size")
    p.add_argument("--iters", type=int, help="outer iterations")
    p.add_argument("--n-critic", type=int)
    p.add_argument("--gp-lambda", type=float)
    p.add_argument("--mix-prob", type=float)
    p.add_argument("--d-lr", type=float)
    p.add_argument("--g-lr", type=float)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--eval-pool", type=int)
    p.add_argument("--disc-width", type=int)
    p.add_argument("--gen-width", type=int)
    p.add_argument("--noise-dim", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="flat JSON file of config keys; flags win")
    p.add_argument("--benchmark", choices=BENCHMARKS, default="gauss4x4")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="cowgan", description="Wasserstein-1 critics with c-transform checks.")
    parser.add_argument("--version", action="version", version=f"cowgan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="train a critic between two fixed distributions")
    _experiment_flags(p)
    p.add_argument("--data", nargs="+", metavar="PATH", help="two point clouds (mu, nu)")
    p.add_argument("--format", choices=("csv", "f64"), default="csv")
    p.add_argument("--checkpoints", action="store_true", help="save critic weights at each evaluation")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("train", help="train a generator against a critic")
    _experiment_flags(p)
    p.add_argument("--data", nargs="+", metavar="PATH", help="target point cloud")
    p.add_argument("--format", choices=("csv", "f64"), default="csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("oracle", help="exact W1 between two equal-size point clouds")
    p.add_argument("files", nargs=2, metavar="PATH")
    p.add_argument("--format", choices=("csv", "f64"), default="csv")
    p.add_argument("--assignment", metavar="PATH", help="write i,sigma_i,cost_i CSV ('-' for stdout)")
    p.add_argument("--max-n", type=int, default=4096)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench", help="compare cowgan, ctransform and wgan_gp (lambda 1 and 10)")
    _experiment_flags(p, with_method=False)
    p.add_argument("--grid-field", action="store_true", help="also dump phi and |D phi| on a 2D grid")
    p.add_argument("--grid-size", type=int, default=64)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cowgan {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
