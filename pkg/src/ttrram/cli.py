"""Command-line entry point ``ttrram``.

Subcommands: ``synth``, ``estimate-rank``, ``angle``, ``complete``, ``round``.
Every run writes its outputs and a ``manifest.txt`` with all resolved
parameters into ``--out-dir``.
"""

import argparse
import csv
import os
import sys
from dataclasses import asdict, replace

from . import io
from .completion import CGConfig
from .experiments import (
    make_problem,
    run_angle_experiment,
    run_rank_estimation,
)
from .kernels import BACKEND
from .rank import RRAMConfig, baseline_rram, estimate_tt_rank, rram, tt_round


def _int_list(text):
    return tuple(int(t) for t in text.replace("x", ",").split(",") if t.strip())


def _common(p):
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--out-dir", default="runs/latest", help="output directory")
    p.add_argument("--config", help="key-value file with solver parameters")


def _data_args(p, default_dims, default_ranks, default_rho):
    p.add_argument("--kind", choices=("synthetic", "exponential"), default="synthetic")
    p.add_argument("--dims", type=_int_list, default=default_dims, help="e.g. 20,20,20,20")
    p.add_argument("--ranks", type=_int_list, default=default_ranks, help="true TT-ranks")
    p.add_argument("--rho", type=float, default=default_rho, help="sampling ratio")
    p.add_argument("--noise", type=float, default=0.0, help="noise level eta")


def build_parser():
    ap = argparse.ArgumentParser(prog="ttrram", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("synth", help="generate a test tensor and sample sets")
    _data_args(p, (20, 20, 20, 20), (4, 4, 4), 0.1)
    p.add_argument("--gamma-fraction", type=float, default=0.25)
    _common(p)

    p = sub.add_parser("estimate-rank", help="estimate the TT-rank from samples")
    _data_args(p, (15, 15, 15, 15), (3, 3, 3), 0.3)
    p.add_argument("--samples", help="sample CSV to use instead of generated data")
    p.add_argument("--r0", type=_int_list, help="rank of the CG run (default all ones)")
    p.add_argument("--iters", type=int, default=15, help="CG iterations")
    p.add_argument("--s-cap", type=int, default=6)
    _common(p)

    p = sub.add_parser("angle", help="angle condition of TT-rounding")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--dims", type=_int_list, default=(10, 10, 10, 10))
    p.add_argument("--r-prime", type=int, default=4)
    p.add_argument("--r", type=int, default=2)
    _common(p)

    p = sub.add_parser("complete", help="tensor completion")
    _data_args(p, (20, 20, 20, 20), (4, 4, 4), 0.1)
    p.add_argument("--method", choices=("rram", "baseline"), default="rram")
    p.add_argument("--samples", help="training sample CSV (replaces generated data)")
    p.add_argument("--test-samples", help="test sample CSV")
    p.add_argument("--baseline-cap", type=int, help="rank bound for the baseline")
    _common(p)

    p = sub.add_parser("round", help="round a TT file to given ranks")
    p.add_argument("input", help="TT file")
    p.add_argument("--ranks", type=_int_list, required=True)
    _common(p)
    return ap


def _config(args):
    """Config file values, with ``--seed`` used when the file sets no seed."""
    if not args.config:
        return RRAMConfig(seed=args.seed)
    with open(args.config) as fh:
        keys = io.parse_config(fh.read())
    cfg = io.read_config(args.config)
    return cfg if "seed" in keys else replace(cfg, seed=args.seed)


def _manifest(args, extra):
    params = {k: v for k, v in vars(args).items() if v is not None}
    params["backend"] = BACKEND
    params.update(extra)
    io.write_manifest(os.path.join(args.out_dir, "manifest.txt"), params)


def cmd_synth(args):
    a, omega, gamma, _ = make_problem(
        args.kind, args.dims, args.ranks, args.rho, args.noise, args.seed, args.gamma_fraction
    )
    if args.kind == "synthetic":
        io.write_tt(os.path.join(args.out_dir, "tensor.tt"), a)
    else:
        io.write_dense(os.path.join(args.out_dir, "tensor.txt"), a)
    io.write_samples(os.path.join(args.out_dir, "omega.csv"), omega)
    io.write_samples(os.path.join(args.out_dir, "gamma.csv"), gamma)
    _manifest(args, {"omega_size": len(omega), "gamma_size": len(gamma)})
    print(f"wrote {len(omega)} training and {len(gamma)} test samples to {args.out_dir}")


def _write_rank_rows(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("bond", "quantity", "values"))
        for row in rows:
            for key, val in row.items():
                if key in ("bond", "k"):
                    continue
                w.writerow((row["bond"] + 1, key, " ".join(repr(float(v)) for v in val)))


def cmd_estimate_rank(args):
    if args.samples:
        omega = io.read_samples(args.samples)
        d = len(omega.shape)
        r0 = args.r0 or (1,) * (d - 1)
        est = estimate_tt_rank(omega, r0, args.s_cap, CGConfig(j_max=args.iters), rng=args.seed)
        k, grad = est.k, float(est.trace.grad_norm[-1])
        rows = [{"bond": i, "p_sv": sv[:7]} for i, sv in enumerate(est.spectra)]
    else:
        rep = run_rank_estimation(
            args.dims, args.ranks, args.r0, args.rho, args.iters, args.noise, args.seed,
            args.s_cap,
        )
        k, grad, rows = rep.k, rep.grad_norm, rep.rows
    _write_rank_rows(os.path.join(args.out_dir, "report.csv"), rows)
    _manifest(args, {"estimated_rank": k, "grad_norm": grad})
    print("estimated rank:", "-".join(str(v) for v in k))


def cmd_angle(args):
    rep = run_angle_experiment(args.trials, args.dims, args.r_prime, args.r, args.seed)
    with open(os.path.join(args.out_dir, "angle.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("trial", "value", "omega", "necessary_residual"))
        for t, (v, res) in enumerate(zip(rep.values, rep.necessary_residuals)):
            w.writerow((t + 1, repr(float(v)), repr(rep.omega), repr(float(res))))
    s = rep.summary()
    _manifest(args, {"omega": rep.omega, **s})
    print(f"omega={rep.omega:.4g} min={s['min']:.4g} median={s['median']:.4g} max={s['max']:.4g}")


def cmd_complete(args):
    cfg = _config(args)
    if args.samples:
        omega = io.read_samples(args.samples)
        gamma = io.read_samples(args.test_samples) if args.test_samples else None
        x0 = None
    else:
        _, omega, gamma, x0 = make_problem(
            args.kind, args.dims, args.ranks, args.rho, args.noise, args.seed
        )
    if args.method == "rram":
        x, trace = rram(omega, gamma, x0, cfg)
    else:
        cap = args.baseline_cap
        if cap is None:
            cap = max(args.ranks) if args.kind == "synthetic" and not args.samples else cfg.r_max
        x, trace = baseline_rram(omega, gamma, x0, cfg, r_cap=cap)
    io.write_rram_trace(os.path.join(args.out_dir, "trace.csv"), trace)
    io.write_inner_series(os.path.join(args.out_dir, "inner.csv"), trace)
    io.write_tt(os.path.join(args.out_dir, "result.tt"), x)
    last = trace.rows[-1]
    _manifest(args, {**asdict(cfg), "final_action": last[1], "final_ranks": last[2],
                     "final_f_omega_rel": last[3]})
    print(f"{last[1]}: ranks {'-'.join(map(str, last[2]))}, f_omega_rel {last[3]:.3e}")


def cmd_round(args):
    x = io.read_tt(args.input)
    y = tt_round(x, args.ranks)
    io.write_tt(os.path.join(args.out_dir, "rounded.tt"), y)
    _manifest(args, {"ranks_in": x.ranks, "ranks_out": y.ranks})
    print("ranks:", "-".join(map(str, y.ranks)))


_COMMANDS = {
    "synth": cmd_synth,
    "estimate-rank": cmd_estimate_rank,
    "angle": cmd_angle,
    "complete": cmd_complete,
    "round": cmd_round,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    io.ensure_dir(args.out_dir)
    try:
        _COMMANDS[args.cmd](args)
    except (ValueError, OSError) as exc:
        print(f"ttrram: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
