"""Command-line front end.

    stalebc rate ts --channel blackwell
    stalebc rate sp --channel blackwell --optimize --seed 7
    stalebc bound --channel blackwell --point reference
    stalebc simulate --sweep --bits 5000 --trials 20 --figure curve.png
    stalebc reproduce --seed 7 --json out.json
    stalebc channel validate my_channel.json

Exit codes: 0 success, 1 a reproduction row failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .channels import (ChannelError, StateChannel, check_deterministic,
                       make_blackwell_with_state, parse_channel_ref, validate_symmetry)
from .erasure_sim import SimConfig, rate_curve, simulate
from .optimizer import SearchSpec
from .prob import ValidationError
from .rates import (RateCertificate, blackwell_bound_point,
                    c1_capacity, degraded_upper_bound, optimize_upper_bound, sp_optimize,
                    sp_rate, ts_rate, ts_ratio, u_cardinality_limit, u_equals_x_point)
from .schemes import SchemeError, make_blackwell_sp_params

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
DEFAULT_SWEEP = [round(0.1 * i, 1) for i in range(1, 10)]
SP_REFERENCE = {"q1": 0.5, "a1": 0.13628, "a2": 0.5, "b1": 0.23025, "b2": 0.5}


class InputError(Exception):
    pass


# -- output helpers ---------------------------------------------------------

def fmt(x: float) -> str:
    return f"{x:.10g}"


def round_floats(obj):
    """Round every float to 10 significant digits, recursively."""
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if not math.isfinite(x) else float(fmt(x))
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return round_floats(obj.tolist())
    return obj


def timestamp(args) -> str:
    """Reproducible by default: SOURCE_DATE_EPOCH, else --timestamp, else the epoch."""
    if getattr(args, "timestamp", None):
        return args.timestamp
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    secs = int(epoch) if epoch else 0
    return datetime.fromtimestamp(secs, timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


# output destinations do not change results, so they stay out of the manifest
# and identical runs produce identical bytes wherever they are written
_NOT_PARAMS = {"func", "timestamp", "command", "scheme", "action", "command_path",
               "out", "json", "figure", "figures"}


def manifest(args) -> dict:
    params = {k: v for k, v in sorted(vars(args).items())
              if k not in _NOT_PARAMS and v is not None}
    return {"command": args.command_path, "parameters": params,
            "artifact_version": __version__, "seed": args.seed,
            "timestamp": timestamp(args)}


def dump_json(doc: dict) -> str:
    return json.dumps(round_floats(doc), indent=2) + "\n"


def emit(text: str, out: str | None) -> None:
    if out and out != "-":
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def load_channel(ref: str) -> StateChannel:
    try:
        return parse_channel_ref(ref)
    except (ChannelError, ValidationError) as e:
        raise InputError(str(e)) from e


def search_spec(args, n: int) -> SearchSpec:
    return SearchSpec(dims=(n,), grid_resolution=args.grid, restarts=args.restarts,
                      seed=args.seed, random_points=args.random_points,
                      threads=args.threads)


def cert_doc(args, cert: RateCertificate, **extra) -> dict:
    doc = {"manifest": manifest(args), "channel": args.channel}
    doc.update(cert.to_dict())
    doc.update(extra)
    return doc


def is_blackwell(ch: StateChannel) -> bool:
    ref = make_blackwell_with_state()
    return (ch.kernel.shape == ref.kernel.shape
            and np.array_equal(ch.kernel, ref.kernel)
            and np.allclose(ch.state_pmf.probs, ref.state_pmf.probs))


# -- commands ---------------------------------------------------------------

def cmd_rate_ts(args) -> int:
    ch = load_channel(args.channel)
    cert = ts_rate(ch, search_spec(args, ch.x_size))
    emit(dump_json(cert_doc(args, cert)), args.out)
    return EXIT_OK


def cmd_rate_sp(args) -> int:
    ch = load_channel(args.channel)
    if args.optimize:
        cert = sp_optimize(ch, args.u0_size, search_spec(args, args.u0_size * ch.x_size))
    else:
        if ch.x_size != 3:
            raise InputError("explicit (q1, a1, a2, b1, b2) needs a 3-input channel; "
                             "use --optimize otherwise")
        vals = {k: getattr(args, k) if getattr(args, k) is not None else v
                for k, v in SP_REFERENCE.items()}
        params = make_blackwell_sp_params(vals["q1"], vals["a1"], vals["a2"],
                                          vals["b1"], vals["b2"])
        cert = sp_rate(ch, params)
        cert.argument["figure_params"] = vals
    emit(dump_json(cert_doc(args, cert)), args.out)
    return EXIT_OK


def cmd_bound(args) -> int:
    ch = load_channel(args.channel)
    if args.point is None and not args.optimize:
        raise InputError("give --point and/or --optimize")
    doc: dict = {"manifest": manifest(args), "channel": args.channel,
                 "u_cardinality_limit": u_cardinality_limit(ch)}
    best = -np.inf
    if args.point in ("reference", "paper"):
        if not is_blackwell(ch):
            raise InputError("--point reference is defined for the Blackwell channel only")
        pu, k = blackwell_bound_point()
        doc["point"] = {"pu": pu.probs, "x_given_u": k,
                        "value": degraded_upper_bound(ch, pu, k)}
        best = doc["point"]["value"]
    elif args.point == "u-equals-x":
        pu, k = u_equals_x_point(ch)
        doc["point"] = {"pu": pu.probs, "x_given_u": k,
                        "value": degraded_upper_bound(ch, pu, k)}
        best = doc["point"]["value"]
    if args.optimize:
        size = args.u_size or u_cardinality_limit(ch)
        cert = optimize_upper_bound(ch, size, search_spec(args, size * ch.x_size))
        doc["optimized"] = cert.to_dict()
        best = cert.value
    doc["value"] = best
    inner = {}
    try:
        inner["time_sharing"] = ts_rate(ch, search_spec(args, ch.x_size)).value
        if is_blackwell(ch):
            p = make_blackwell_sp_params(*SP_REFERENCE.values())
            inner["superposition_at_reference_point"] = sp_rate(ch, p).value
    except ChannelError as e:
        doc["inner_bound_note"] = str(e)
    if inner:
        name = max(inner, key=inner.get)
        doc["inner_bounds"] = inner
        doc["best_inner"] = {"scheme": name, "value": inner[name]}
        doc["gap_to_best_inner"] = best - inner[name]
    emit(dump_json(doc), args.out)
    if args.figure:
        from .plotting import plot_bounds
        bars = {k.replace("_", " "): v for k, v in inner.items()}
        bars["upper bound"] = best
        plot_bounds(bars, args.figure)
    return EXIT_OK


def _sim_rows(args):
    try:
        if args.sweep is not None:
            eps = args.sweep or DEFAULT_SWEEP
            curve = rate_curve(eps, args.bits, args.trials, args.seed)
        else:
            curve = [(args.eps, simulate(SimConfig(args.eps, args.bits, args.trials, args.seed)))]
    except ValueError as e:
        raise InputError(str(e)) from e
    return curve


def cmd_simulate(args) -> int:
    curve = _sim_rows(args)
    rows = [(e, r.per_user_rate, r.rate_stderr, r.analytic_rate) for e, r in curve]
    if args.format == "json":
        doc = {"manifest": manifest(args), "rows": [
            {"eps": e, "empirical_rate": r.per_user_rate, "stderr": r.rate_stderr,
             "analytic_rate": r.analytic_rate, "mean_slots": r.mean_slots,
             "trials_run": r.trials_run, "failures": r.failures,
             "q1_fraction": r.mean_q1_fraction, "q1_fraction_stderr": r.q1_fraction_stderr}
            for e, r in curve]}
        text = dump_json(doc)
    else:
        buf = io.StringIO()
        buf.write("# " + json.dumps(round_floats(manifest(args)), sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "empirical_rate", "stderr", "analytic_rate"])
        for row in rows:
            w.writerow([fmt(v) for v in row])
        text = buf.getvalue()
    emit(text, args.out)
    failures = sum(r.failures for _, r in curve)
    if failures:
        print(f"error: {failures} trial(s) decoded incorrectly", file=sys.stderr)
        return EXIT_FAIL
    if args.figure:
        from .plotting import plot_rate_curve
        plot_rate_curve(rows, args.figure)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    from .reproduce import format_table, run_suite
    bw = load_channel(args.blackwell) if args.blackwell else None
    rows = run_suite(args.seed, blackwell=bw, threads=args.threads,
                     include_simulation=not args.skip_simulation)
    ok = all(r.passed for r in rows)
    print(format_table(rows), file=sys.stderr if args.json == "-" else sys.stdout)
    doc = {"manifest": manifest(args), "passed": ok,
           "rows": [r.to_dict() for r in rows]}
    if args.json:
        emit(dump_json(doc), args.json)
    if args.figures:
        from .plotting import plot_bounds, plot_ts_landscape
        out = Path(args.figures)
        vals = {r.id: r.computed for r in rows if r.computed is not None}
        bars = {"time-sharing": vals.get("blackwell_ts"),
                "superposition": vals.get("blackwell_sp_optimized"),
                "degraded upper bound": vals.get("blackwell_ub_optimized"),
                "2/3": 2 / 3}
        plot_bounds({k: v for k, v in bars.items() if v is not None},
                    out / "blackwell_bounds.png")
        ch = bw or make_blackwell_with_state()
        c1, _ = c1_capacity(ch)
        plot_ts_landscape(lambda px: ts_ratio(px, ch, c1),
                          out / "blackwell_ts_landscape.png")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_channel_validate(args) -> int:
    try:
        ch = StateChannel.load(args.file)
    except (ChannelError, ValidationError) as e:
        raise InputError(str(e)) from e
    doc = {"manifest": manifest(args), "file": args.file, "valid": True,
           "x_size": ch.x_size, "y_size": ch.y_size, "s_size": ch.s_size}
    try:
        w = validate_symmetry(ch)
        doc["symmetric"] = True
        doc["pi"] = list(w.pi)
        doc["pi_is_involution"] = w.is_involution
    except ChannelError as e:
        doc["symmetric"] = False
        doc["symmetry_error"] = str(e)
    det = check_deterministic(ch)
    doc["deterministic"] = det is not None
    emit(dump_json(doc), args.out)
    return EXIT_OK


def cmd_channel_export(args) -> int:
    ch = load_channel(args.ref)
    emit(json.dumps(ch.to_dict(), indent=2) + "\n", args.out)
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _nonneg_int(s: str) -> int:
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _pos_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=7, help="RNG seed (default 7)")
    common.add_argument("--threads", type=_pos_int, default=None,
                        help="worker threads (default: STALEBC_THREADS or all cores)")
    common.add_argument("--timestamp", default=None,
                        help="manifest timestamp (default: SOURCE_DATE_EPOCH or the epoch)")
    common.add_argument("--out", default=None, help="write output here instead of stdout")

    opt = argparse.ArgumentParser(add_help=False)
    opt.add_argument("--grid", type=_pos_int, default=None, help="lattice resolution per simplex")
    opt.add_argument("--restarts", type=_pos_int, default=4)
    opt.add_argument("--random-points", type=_nonneg_int, default=32)

    chan = argparse.ArgumentParser(add_help=False)
    chan.add_argument("--channel", required=True,
                      help="erasure:EPS | ff:Q | blackwell | path to channel JSON")

    p = argparse.ArgumentParser(prog="stalebc", description=__doc__.split("\n")[0] or None)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    rate = sub.add_parser("rate", help="symmetric rate of a coding scheme")
    rsub = rate.add_subparsers(dest="scheme", required=True)
    ts = rsub.add_parser("ts", parents=[common, opt, chan], help="time-sharing scheme")
    ts.set_defaults(func=cmd_rate_ts)
    sp = rsub.add_parser("sp", parents=[common, opt, chan], help="superposition scheme")
    for k in SP_REFERENCE:
        sp.add_argument(f"--{k}", type=float, default=None,
                        help=f"default {SP_REFERENCE[k]}")
    sp.add_argument("--optimize", action="store_true")
    sp.add_argument("--u0-size", type=_pos_int, default=2)
    sp.set_defaults(func=cmd_rate_sp)

    b = sub.add_parser("bound", parents=[common, opt, chan],
                       help="degraded-channel upper bound")
    b.add_argument("--point", choices=["reference", "paper", "u-equals-x"], default=None,
                   help="'reference' (alias 'paper'): U~Bern(0.5), p(x|u)=0.832/0.168 "
                        "on Blackwell; 'u-equals-x': U copies a uniform X")
    b.add_argument("--optimize", action="store_true")
    b.add_argument("--u-size", type=_pos_int, default=None)
    b.add_argument("--figure", default=None, help="bar chart of inner vs upper bound")
    b.set_defaults(func=cmd_bound)

    s = sub.add_parser("simulate", parents=[common], help="erasure-channel Monte Carlo")
    s.add_argument("--eps", type=float, default=0.5)
    s.add_argument("--bits", type=_pos_int, default=2000)
    s.add_argument("--trials", type=_pos_int, default=100)
    s.add_argument("--sweep", type=float, nargs="*", default=None,
                   help="eps values (bare flag: 0.1 ... 0.9)")
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.add_argument("--figure", default=None, help="plot empirical vs analytic rate")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reproduce", parents=[common], help="recompute every headline number")
    r.add_argument("--json", default=None, help="JSON report path ('-' for stdout)")
    r.add_argument("--figures", default=None, help="directory for summary figures")
    r.add_argument("--blackwell", default=None, help="override the Blackwell channel (JSON)")
    r.add_argument("--skip-simulation", action="store_true")
    r.set_defaults(func=cmd_reproduce)

    c = sub.add_parser("channel", help="channel file utilities")
    csub = c.add_subparsers(dest="action", required=True)
    cv = csub.add_parser("validate", parents=[common])
    cv.add_argument("file")
    cv.set_defaults(func=cmd_channel_validate)
    ce = csub.add_parser("export", parents=[common])
    ce.add_argument("ref")
    ce.set_defaults(func=cmd_channel_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.command_path = " ".join(
        x for x in (args.command, getattr(args, "scheme", None), getattr(args, "action", None))
        if x)
    try:
        return args.func(args)
    except (InputError, ChannelError, SchemeError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
