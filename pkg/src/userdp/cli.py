"""Command line entry point ``userdp``.

Exit codes: 0 success, 2 usage or invalid input, 3 unsatisfiable request,
4 numeric capacity exceeded (bucket cap or enumeration cap).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

import userdp
from userdp import heuristics, mechanisms, pld, rdp, simulate, variance
from userdp.pld import CapacityError, PrivacyParams, UnsatisfiableError

EXIT_OK, EXIT_USAGE, EXIT_UNSAT, EXIT_CAPACITY = 0, 2, 3, 4

EPILOG = """exit codes:
  0  success
  2  usage error or invalid input
  3  unsatisfiable (no sigma or epsilon meets the request)
  4  numeric capacity exceeded (use a coarser grid or smaller problem)

UDP_THREADS caps the number of worker processes."""


class UsageError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".12g")
    return str(x)


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float(fmt(x)) if math.isfinite(x) else fmt(x)
    if isinstance(x, (list, tuple)):
        return [_json_value(v) for v in x]
    if isinstance(x, dict):
        return {k: _json_value(v) for k, v in x.items()}
    return x


def metadata(args) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    return {"toolkit": "userdp", "version": userdp.__version__,
            "command": args.command, "flags": _json_value(flags),
            "caveat": simulate.SAMPLING_CAVEAT}


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_table(args, header, rows) -> str:
    if args.format == "json":
        records = [dict(zip(header, map(_json_value, r))) for r in rows]
        return json.dumps({"metadata": metadata(args), "rows": records}, indent=2) + "\n"
    buf = io.StringIO()
    for key, value in metadata(args).items():
        buf.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def emit_table(args, header, rows) -> None:
    text = render_table(args, header, rows)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def emit_value(args, name: str, value) -> None:
    if args.format == "json" or args.out:
        text = json.dumps({"metadata": metadata(args), name: _json_value(value)},
                          indent=2) + "\n"
    else:
        text = fmt(value) + "\n"
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Argument helpers
# ---------------------------------------------------------------------------


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc


def _add_output(p, default_format="text"):
    p.add_argument("--format", choices=("text", "csv", "json"), default=default_format)
    p.add_argument("--out", help="output file, written atomically")


def _add_event(p):
    p.add_argument("--event", help='JSON event spec, e.g. {"kind":"els","sigma":4,"p":0.01,"K":8,"T":2000}')
    p.add_argument("--kind", choices=("els", "uls"))
    p.add_argument("--sigma", type=float)
    p.add_argument("--p", type=float, help="example sampling probability (els)")
    p.add_argument("--q", type=float, help="user sampling probability (uls)")
    p.add_argument("--K", type=int, default=1, help="group size (els)")
    p.add_argument("--T", type=int)
    p.add_argument("--grid-spacing", type=float, default=pld.DEFAULT_GRID_SPACING)


def _event_fields(args) -> dict:
    fields = {"kind": args.kind, "sigma": args.sigma, "p": args.p, "q": args.q,
              "K": args.K, "T": args.T}
    if args.event:
        try:
            given = json.loads(args.event)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--event is not valid JSON: {exc}") from exc
        unknown = set(given) - set(fields) - {"epsilon", "delta"}
        if unknown:
            raise UsageError(f"unknown event fields: {sorted(unknown)}")
        fields.update({k: v for k, v in given.items() if k in fields})
    if fields["kind"] is None:
        raise UsageError("--kind (or event kind) is required")
    if fields["T"] is None:
        raise UsageError("--T is required")
    prob = "p" if fields["kind"] == "els" else "q"
    if fields[prob] is None:
        raise UsageError(f"--{prob} is required for kind {fields['kind']}")
    return fields


def _event_spec(args):
    f = _event_fields(args)
    if f["sigma"] is None:
        raise UsageError("--sigma is required")
    if f["kind"] == "els":
        return mechanisms.ElsEventSpec(f["sigma"], f["p"], f["K"], f["T"])
    return mechanisms.UlsEventSpec(f["sigma"], f["q"], f["T"])


def _event_family(args):
    f = _event_fields(args)
    if f["kind"] == "els":
        return mechanisms.ElsFamily(f["p"], f["K"], f["T"])
    return mechanisms.UlsFamily(f["q"], f["T"])


def _target_value(args, name: str) -> float:
    value = getattr(args, name)
    if value is None and args.event:
        value = json.loads(args.event).get(name)
    if value is None:
        raise UsageError(f"--{name} is required")
    return float(value)


def _require_seed(args) -> int:
    if args.master_seed is None:
        raise UsageError("--master-seed is required for stochastic commands")
    return args.master_seed


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_epsilon(args):
    spec = _event_spec(args)
    eps = mechanisms.event_epsilon(spec, _target_value(args, "delta"), args.grid_spacing)
    emit_value(args, "epsilon", eps)


def cmd_delta(args):
    spec = _event_spec(args)
    emit_value(args, "delta", mechanisms.event_delta(
        spec, _target_value(args, "epsilon"), args.grid_spacing))


def cmd_calibrate(args):
    family = _event_family(args)
    target = PrivacyParams(_target_value(args, "epsilon"), _target_value(args, "delta"))
    sigma = mechanisms.calibrate_sigma(family, target, grid_spacing=args.grid_spacing)
    emit_value(args, "sigma", sigma)


def cmd_renyi_check(args):
    grid = dict(rdp.DEFAULT_GRID)
    if args.grid != "default":
        raise UsageError(f"unknown grid {args.grid!r}")
    for key in ("alpha", "K", "p", "sigma"):
        override = getattr(args, key)
        if override:
            grid[key] = tuple(override)
    rows = rdp.lemma1_grid(grid)
    emit_table(args, ("alpha", "K", "p", "sigma", "lhs", "rhs", "holds"), rows)


def cmd_compare_variance(args):
    grid = variance.budget_grid(args.epsilons, args.budgets, args.cohorts, N=args.N,
                              K=args.K, T=args.T, delta=args.delta, L_els=args.L_els, d=args.d)
    if not grid:
        raise UsageError("the requested grid has no valid (budget, cohort) cells")
    emit_table(args, variance.CSV_HEADER, variance.variance_curves(grid))


def cmd_simulate_mean(args):
    seed = _require_seed(args)
    spec = simulate.SyntheticSpec(seed=seed, N=args.N, K=args.K, d=args.d,
                                  sigma1=args.sigma1, sigma2=args.sigma2)
    groups = args.group_sizes or ([args.K] if args.variant == "els" else [1])
    res = simulate.sweep(spec, args.variant, PrivacyParams(args.epsilon, args.delta),
                         args.budget, groups, args.lr_grid, args.clip_grid,
                         args.trials, seed, args.T)
    rows = res.rows if args.all_cells else [res.best_for(G) for G in groups]
    emit_table(args, simulate.SweepRow.CSV_HEADER, [r.as_tuple() for r in rows])


def cmd_configure_uls(args):
    seed = _require_seed(args)
    spec = simulate.SyntheticSpec(seed=seed, N=args.N, K=args.K, d=args.d,
                                  sigma1=args.sigma1, sigma2=args.sigma2)
    data = simulate.generate_synthetic(spec)
    res = heuristics.estimate_and_double(
        data, np.zeros(spec.d), args.g0, args.m0, args.budget,
        PrivacyParams(args.epsilon, args.delta), args.steps, seed=seed,
        n_users=args.n_users)
    lines = [json.dumps({"metadata": metadata(args)})]
    for s in res.trace:
        lines.append(json.dumps({"step": s.step, "G": s.G, "M": s.M,
                                 "tau_G": _json_value(s.tau_G), "tau_M": _json_value(s.tau_M),
                                 "decision": s.decision, "note": s.note}))
    lines.append(json.dumps({"result": {"G": res.G, "M": res.M}}))
    text = "\n".join(lines) + "\n"
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="userdp", description="User-level DP accounting, calibration and simulation.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=userdp.__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("epsilon", help="epsilon at a given delta for an ELS/ULS event")
    _add_event(p)
    p.add_argument("--delta", type=float)
    _add_output(p)
    p.set_defaults(func=cmd_epsilon)

    p = sub.add_parser("delta", help="delta at a given epsilon for an ELS/ULS event")
    _add_event(p)
    p.add_argument("--epsilon", type=float)
    _add_output(p)
    p.set_defaults(func=cmd_delta)

    p = sub.add_parser("calibrate", help="smallest noise multiplier meeting (epsilon, delta)")
    _add_event(p)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    _add_output(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("renyi-check", help="Renyi divergence group-size inequality grid")
    p.add_argument("--grid", default="default")
    p.add_argument("--alpha", type=_int_list)
    p.add_argument("--K", type=_int_list)
    p.add_argument("--p", type=_float_list)
    p.add_argument("--sigma", type=_float_list)
    _add_output(p, "csv")
    p.set_defaults(func=cmd_renyi_check)

    p = sub.add_parser("compare-variance", help="ELS vs ULS noise variance table")
    p.add_argument("--epsilons", type=_float_list, default=list(variance.DEFAULT_EPSILONS))
    p.add_argument("--budgets", type=_int_list, default=[16, 32, 64, 128, 256, 512])
    p.add_argument("--cohorts", type=_int_list, default=[16])
    p.add_argument("--N", type=int, default=1024)
    p.add_argument("--K", type=int, default=32)
    p.add_argument("--T", type=int, default=1000)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--L-els", type=float, default=10.0)
    p.add_argument("--d", type=int, default=1)
    _add_output(p, "csv")
    p.set_defaults(func=cmd_compare_variance)

    p = sub.add_parser("simulate-mean", help="DP-SGD sweep on synthetic mean estimation")
    p.add_argument("--variant", choices=("els", "uls"), required=True)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--budget", type=int, default=64)
    p.add_argument("--sigma1", type=float, default=1.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--group-sizes", type=_int_list)
    p.add_argument("--trials", type=int, default=128)
    p.add_argument("--T", type=int, default=256)
    p.add_argument("--N", type=int, default=256)
    p.add_argument("--K", type=int, default=16)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--lr-grid", type=_float_list, default=list(simulate.DEFAULT_LR_GRID))
    p.add_argument("--clip-grid", type=_float_list, default=list(simulate.DEFAULT_CLIP_GRID))
    p.add_argument("--all-cells", action="store_true", help="emit every (G, eta, C) cell")
    p.add_argument("--master-seed", type=int)
    _add_output(p, "csv")
    p.set_defaults(func=cmd_simulate_mean)

    p = sub.add_parser("configure-uls", help="Estimate-and-Double trace as JSON lines")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--g0", type=int, default=1)
    p.add_argument("--m0", type=int, default=32)
    p.add_argument("--n-users", type=int, default=128)
    p.add_argument("--sigma1", type=float, default=1.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--N", type=int, default=256)
    p.add_argument("--K", type=int, default=16)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--master-seed", "--seed", dest="master_seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_configure_uls)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except UnsatisfiableError as exc:
        print(json.dumps({"error": "unsatisfiable", "message": str(exc)}), file=sys.stderr)
        return EXIT_UNSAT
    except (CapacityError, rdp.EnumerationTooLarge) as exc:
        print(json.dumps({"error": "capacity", "message": str(exc)}), file=sys.stderr)
        return EXIT_CAPACITY
    except ValueError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
