"""Command-line interface: ``mixsing solve|compare|bounds|selftest|sweep``."""
from __future__ import annotations

import argparse
import json
import os
import sys


def _cap_threads():
    n = os.environ.get("MIXSING_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = n


def _print_json(obj):
    from .report import _jsonable
    print(json.dumps(_jsonable(obj), indent=2, sort_keys=True))


def _run(args, force_checks=None):
    from .config import load_config
    from .report import run_experiment
    cfg = load_config(args.config)
    if force_checks:
        cfg.checks.update(force_checks)
    man = run_experiment(cfg, output=args.output)
    out = args.output or cfg.output
    with open(os.path.join(out, "report.json")) as fh:
        checks = json.load(fh)["checks"]
    for name, c in checks.items():
        print(f"{name:18s} {'pass' if c.get('pass', True) else 'FAIL'}")
    print(f"output: {out}")
    return man.exit_status


def cmd_solve(args):
    return _run(args)


def cmd_compare(args):
    return _run(args, {"talenti": True, "bounds": True})


def cmd_bounds(args):
    from .problem import classify_regime
    from .talenti import summability_bounds
    rep = summability_bounds(args.n, args.m, args.gamma, args.volume, args.fnorm)
    out = rep.to_dict()
    if args.m > 1 or args.gamma == 1:
        out["regime"] = classify_regime(args.gamma, args.m, args.n).to_dict()
    _print_json(out)
    return 0


def cmd_selftest(args):
    from .selftest import selftest
    passed, total, _ = selftest(fault=args.inject_fault)
    return 0 if passed == total else 1


def cmd_sweep(args):
    from .config import load_config, set_path
    from .errors import MixsingError
    from .report import run_experiment
    base = load_config(args.config)
    raw = base.to_dict()
    worst = 0
    for text in args.values.split(","):
        try:
            val = json.loads(text)
        except json.JSONDecodeError:
            val = text
        out = os.path.join(args.output or base.output, f"{args.param}={text}")
        try:
            man = run_experiment(load_config(set_path(raw, args.param, val)), output=out)
            status = man.exit_status
        except MixsingError as exc:
            print(f"{args.param}={text}: error {exc.code}: {exc}", file=sys.stderr)
            status = exc.exit_status
        print(f"{args.param}={text:12s} exit {status}")
        worst = max(worst, status)
    return worst


def build_parser():
    p = argparse.ArgumentParser(prog="mixsing", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (("solve", cmd_solve, "run the configured experiment"),
                               ("compare", cmd_compare, "run with comparison and bound checks on")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config")
        sp.add_argument("-o", "--output", default=None, help="output directory (overrides config)")
        sp.set_defaults(func=fn)
    sp = sub.add_parser("bounds", help="evaluate the summability bound constants")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--m", type=float, required=True)
    sp.add_argument("--gamma", type=float, required=True)
    sp.add_argument("--volume", type=float, required=True)
    sp.add_argument("--fnorm", type=float, required=True)
    sp.set_defaults(func=cmd_bounds)
    sp = sub.add_parser("selftest", help="run the built-in invariant suites")
    sp.add_argument("--inject-fault", default=None, choices=["sign-flip"],
                    help="corrupt the nonlocal matrix to exercise the symmetry checks")
    sp.set_defaults(func=cmd_selftest)
    sp = sub.add_parser("sweep", help="repeat an experiment over one parameter")
    sp.add_argument("config")
    sp.add_argument("--param", required=True, help="dotted config path, e.g. problem.s")
    sp.add_argument("--values", required=True, help="comma-separated JSON values")
    sp.add_argument("-o", "--output", default=None)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    _cap_threads()
    args = build_parser().parse_args(argv)
    from .errors import MixsingError
    try:
        return args.func(args)
    except MixsingError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return exc.exit_status


if __name__ == "__main__":
    sys.exit(main())
