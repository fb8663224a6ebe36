"""Command-line entry point ``deconv``."""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import asymptotics as asy
from .distributions import parse_noise, parse_target
from .estimator import (
    estimate_cdf,
    estimate_density,
    estimate_interval,
    expected_density,
    expected_interval,
)
from .harness import load_config, rate_sweep, report_io, run_experiment
from .kernels import KERNELS, get_kernel
from .numerics import QuadratureSpec


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _emit(obj):
    json.dump(obj, sys.stdout, indent=1, default=_default)
    sys.stdout.write("\n")


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _write_columns(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(" ".join(header) + "\n")
        for r in rows:
            fh.write(" ".join(repr(float(v)) for v in r) + "\n")


def _spec(args):
    return QuadratureSpec(args.node_count, "geometric", args.abs_tol, args.rel_tol)


def _sample(args):
    if args.data:
        return np.loadtxt(args.data, ndmin=1)
    if args.n is None:
        raise SystemExit("give --data FILE or --n N (with --target) to generate a sample")
    rng = np.random.Generator(np.random.Philox(args.seed))
    return parse_target(args.target).sample(args.n, rng) + parse_noise(args.noise).sample(args.n, rng)


def cmd_estimate(args):
    X = _sample(args)
    k, m, spec = get_kernel(args.kernel), parse_noise(args.noise), _spec(args)
    if args.what == "density":
        res = estimate_density(X, k, m, args.h, args.x, spec, args.representation)
    elif args.what == "interval":
        res = estimate_interval(X, k, m, args.h, args.a, args.b, spec, args.representation)
    else:
        res = estimate_cdf(X, k, m, args.h, args.b, a=args.a, delta=args.delta, spec=spec)
    out = {
        "value_mantissa": res.value.mantissa,
        "value_log_scale": res.value.log_scale,
        "h": args.h,
        "n": int(X.size),
        "kernel": args.kernel,
        "noise": m.label(),
        "representation": res.representation_used,
        "quadrature_error": res.quadrature_error,
    }
    v = res.value.to_float()
    if math.isfinite(v):
        out["value"] = v
    if res.a is not None:
        out["a"] = res.a
    _emit(out)


def cmd_expect(args):
    f, k, spec = parse_target(args.target), get_kernel(args.kernel), _spec(args)
    if args.what == "density":
        v = expected_density(f, k, args.h, args.x, spec)
    else:
        v = expected_interval(f, k, args.h, args.a, args.b, spec)
    _emit({"expectation": v, "h": args.h, "target": f.label(), "kernel": args.kernel})


def cmd_law(args):
    k, m = get_kernel(args.kernel), parse_noise(args.noise)
    target = parse_target(args.target) if args.target else None
    law = asy.limit_law(
        args.theorem, k, m, x=args.x, a=args.a, b=args.b, gamma=args.gamma, side=args.side, target=target
    )
    out = law.to_dict()
    if args.h is not None:
        z = law.normalizer(args.n_index, args.h)
        out["normalizer"] = {"mantissa": z.mantissa, "log_scale": z.log_scale, "n": args.n_index, "h": args.h}
    _emit(out)


def _schedule(args):
    base = None
    if args.base == "log":
        base = math.log
    return asy.make_schedule(args.schedule, args.width, args.lam, base=base, gamma=args.gamma, side=args.side)


def cmd_classify(args):
    sched = _schedule(args)
    cls = asy.classify_condition_a(sched, tol=args.tol)
    out = cls.to_dict()
    out["schedule"] = sched.description
    _emit(out)


def cmd_schedule(args):
    sched = _schedule(args)
    rows = []
    for n, h, k, parity in sched.points(_ints(args.cells)):
        rows.append({
            "log10_index": math.log10(n), "h": h, "u": 0.5 / h, "cell": k, "parity": parity,
            "sin_half_width": math.sin(args.width / (2 * h)), "cos_half_width": math.cos(args.width / (2 * h)),
        })
    _emit({"schedule": sched.description, "points": rows})
    if args.emit_plot_data:
        _write_columns(args.emit_plot_data, ["cell", "h"], [(r["cell"], r["h"]) for r in rows])


def cmd_laplace(args):
    k = get_kernel(args.kernel)
    rows = []
    for h in _floats(args.h):
        ex = asy.laplace_exact(k, args.eps, args.beta, args.lam, args.mu, args.lambda0, h)
        am = asy.laplace_asymptotic(k, args.eps, args.beta, args.lam, args.mu, args.lambda0, h)
        rows.append({
            "h": h, "exact": [ex.mantissa, ex.log_scale], "asymptotic": [am.mantissa, am.log_scale],
            "ratio": (ex / am).to_float(),
        })
    _emit({"kernel": args.kernel, "beta": args.beta, "lam": args.lam, "mu": args.mu, "lambda0": args.lambda0, "rows": rows})
    if args.emit_plot_data:
        _write_columns(args.emit_plot_data, ["h", "ratio"], [(r["h"], r["ratio"]) for r in rows])


def cmd_mc(args):
    cfg = load_config(args.config, args.override)
    rep = run_experiment(cfg)
    path = args.output or cfg.output
    if path:
        report_io(rep, path, args.format)
    _emit(rep.summary())
    if args.emit_plot_data:
        _write_columns(args.emit_plot_data, ["index", "standardized"], enumerate(rep.standardized_samples))


def cmd_sweep(args):
    cfg = load_config(args.config, args.override)
    if args.cells:
        rows = rate_sweep(cfg, cells=_ints(args.cells))
    elif args.h:
        rows = rate_sweep(cfg, h_values=_floats(args.h))
    else:
        raise SystemExit("give --h or --cells")
    _emit({"theorem": cfg.theorem, "rows": rows})
    if args.emit_plot_data:
        _write_columns(args.emit_plot_data, ["h", "ratio"], [(r["h"], r["ratio"]) for r in rows])


def _quad_args(p):
    p.add_argument("--node-count", type=int, default=16)
    p.add_argument("--rel-tol", type=float, default=1e-9)
    p.add_argument("--abs-tol", type=float, default=1e-12)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deconv", description="Deconvolution estimators under super-smooth noise.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="evaluate an estimator on a sample")
    p.add_argument("what", choices=["density", "interval", "cdf"])
    p.add_argument("--data", help="one observation per line")
    p.add_argument("--n", type=int, help="generate n observations instead of reading --data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", default="normal:0,1")
    p.add_argument("--noise", default="normal:1")
    p.add_argument("--kernel", default="indicator", choices=sorted(KERNELS))
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--representation", default="cosine-sum", choices=["cosine-sum", "direct-fourier"])
    _quad_args(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("expect", help="exact expectation of an estimator")
    p.add_argument("what", choices=["density", "interval"])
    p.add_argument("--target", default="normal:0,1")
    p.add_argument("--kernel", default="indicator", choices=sorted(KERNELS))
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    _quad_args(p)
    p.set_defaults(func=cmd_expect)

    p = sub.add_parser("asym", help="limit laws, Condition A schedules, Laplace expansions")
    asub = p.add_subparsers(dest="asym_command", required=True)

    q = asub.add_parser("law")
    q.add_argument("--theorem", required=True, choices=list(asy.THEOREMS))
    q.add_argument("--kernel", default="indicator", choices=sorted(KERNELS))
    q.add_argument("--noise", default="normal:1")
    q.add_argument("--target", help="needed for T7")
    q.add_argument("--x", type=float, default=0.0)
    q.add_argument("--a", type=float)
    q.add_argument("--b", type=float)
    q.add_argument("--gamma", type=float)
    q.add_argument("--side", default="plus", choices=["plus", "minus"])
    q.add_argument("--h", type=float, help="also evaluate the normalizer at this h")
    q.add_argument("--n-index", type=int, default=1)
    q.set_defaults(func=cmd_law)

    for name, func in (("classify", cmd_classify), ("schedule", cmd_schedule)):
        q = asub.add_parser(name)
        q.add_argument("--schedule", required=True, choices=["A1", "A2", "A3"])
        q.add_argument("--width", type=float, default=math.pi)
        q.add_argument("--lam", type=float, default=2.0)
        q.add_argument("--gamma", type=float)
        q.add_argument("--side", default="plus", choices=["plus", "minus"])
        q.add_argument("--base", default="sqrt-log", choices=["sqrt-log", "log"])
        if name == "classify":
            q.add_argument("--tol", type=float, default=0.05)
        else:
            q.add_argument("--cells", default="1,2,3")
            q.add_argument("--emit-plot-data")
        q.set_defaults(func=func)

    q = asub.add_parser("laplace")
    q.add_argument("--kernel", default="indicator", choices=sorted(KERNELS))
    q.add_argument("--eps", type=float, default=0.0)
    q.add_argument("--beta", type=float, default=0.0)
    q.add_argument("--lam", type=float, default=2.0)
    q.add_argument("--mu", type=float, default=2.0)
    q.add_argument("--lambda0", type=float, default=0.0)
    q.add_argument("--h", default="0.3,0.2,0.1,0.05")
    q.add_argument("--emit-plot-data")
    q.set_defaults(func=cmd_laplace)

    p = sub.add_parser("mc", help="run one Monte Carlo experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--output")
    p.add_argument("--format", default="json", choices=["json", "csv"])
    p.add_argument("--emit-plot-data")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("sweep", help="run an experiment over several h or schedule cells")
    p.add_argument("--config", required=True)
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--h")
    p.add_argument("--cells")
    p.add_argument("--emit-plot-data")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"deconv: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
