"""Command-line entry point: ``obstruction-walks <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import platform
import sys

import numpy as np

from . import __version__
from . import limit_laws as laws
from .errors import ObstructionError, ValidationError
from .experiments import KINDS, ExperimentConfig, compare_delta_effect, run, workspace
from .fibration import parse_family
from .obstruction import profile
from .paths import path_X, path_Y, path_Z
from .points import RationalPoint

log = logging.getLogger("obstruction_walks")

SEED_ENV = "OBSTRUCTION_WALKS_SEED"
PROFILE_TABLE_MAX = 10**7

LAWS = {
    "gaussian": laws.gaussian_cdf,
    "half_normal": laws.half_normal_cdf,
    "half_normal_tail": laws.half_normal_tail,
    "tau_inf": laws.tau_infinity,
    "arcsine": laws.arcsine_cdf,
    "tau2": laws.tau2,
}


def _number(text: str) -> int:
    """Integers written as 1000000, 1e6 or 10**6."""
    try:
        if "**" in text:
            a, b = text.split("**")
            return int(a) ** int(b)
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if value != int(value):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(value)


def _grid(text: str) -> np.ndarray:
    """Comma list, or start:stop:count for an evenly spaced grid."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            return np.linspace(float(a), float(b), int(n))
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def _param(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="obstruction-walks",
                                 description="p-adic obstruction statistics of conic bundles")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=False, threads=False):
        p.add_argument("--family", default="s,t", help='linear forms, e.g. "s,t,s+t,s-t"')
        p.add_argument("--out", help="output file (or directory for experiment)")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        if threads:
            p.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    p = sub.add_parser("sigma", help="CSV of p, sigma_p, S(p)")
    common(p)
    p.add_argument("--pmax", type=_number, default=10**6)

    p = sub.add_parser("profile", help="obstruction profile of a point as JSON")
    common(p)
    p.add_argument("--point", required=True, help="s/t")

    p = sub.add_parser("paths", help="CSV of an obstruction path")
    common(p)
    p.add_argument("--kind", choices=["X", "Y", "Z"], default="X")
    p.add_argument("--point", required=True)
    p.add_argument("--B", type=_number, required=True)
    p.add_argument("--m", type=int, default=256)

    p = sub.add_parser("laws", help="table of a limiting CDF")
    p.add_argument("--law", choices=sorted(LAWS), required=True)
    p.add_argument("--grid", type=_grid, default=_grid("0:3:13"))
    p.add_argument("--out")

    p = sub.add_parser("experiment", help="run one verification experiment")
    common(p, seed=True, threads=True)
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--B", type=_number, default=10**6)
    p.add_argument("--n", type=_number, default=10**5)
    p.add_argument("--m", type=int, default=256)
    p.add_argument("--param", type=_param, action="append", default=[],
                   help="kind-specific key=value (JSON value), repeatable")

    p = sub.add_parser("compare", help="least-prime exceedance for two families")
    p.add_argument("--families", required=True, help='two families separated by ";"')
    p.add_argument("--kind", choices=["least_prime"], default="least_prime")
    p.add_argument("--B", type=_number, default=10**5)
    p.add_argument("--n", type=_number, default=10**4)
    p.add_argument("--xis", type=_grid, default=_grid("5,10,20,50"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out")
    return ap


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _resolve_seed(args) -> None:
    env = os.environ.get(SEED_ENV)
    if env is not None and hasattr(args, "seed"):
        try:
            args.seed = int(env)
        except ValueError:
            raise ValidationError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _log_start(args) -> None:
    resolved = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                for k, v in vars(args).items()}
    log.info("config %s", json.dumps(resolved, default=str, sort_keys=True))
    log.info("versions obstruction_walks=%s python=%s numpy=%s", __version__,
             platform.python_version(), np.__version__)
    log.info("seed %s", getattr(args, "seed", None))


def cmd_sigma(args) -> None:
    family = parse_family(args.family)
    sig = workspace().sigma(family, args.pmax)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "sigma_p", "S"])
    n = sig.count_le(args.pmax)  # the shared table may reach further
    for p, s, S in zip(sig.primes[:n].tolist(), sig.sigma[:n].tolist(), sig.S[:n].tolist()):
        w.writerow([p, repr(s), repr(S)])
    _emit(buf.getvalue(), args.out)


def _point_profile(family, point: RationalPoint):
    bound = min(max(family.max_form_value(point.height), 100), PROFILE_TABLE_MAX)
    table = workspace().prime_table(bound, bound)
    return profile(family, point, table)


def cmd_profile(args) -> None:
    family = parse_family(args.family)
    prof = _point_profile(family, RationalPoint.parse(args.point))
    _emit(prof.to_json() + "\n", args.out)


def cmd_paths(args) -> None:
    family = parse_family(args.family)
    prof = _point_profile(family, RationalPoint.parse(args.point))
    sig = workspace().sigma(family, max(args.B, 100))
    builder = {"X": path_X, "Y": path_Y, "Z": path_Z}[args.kind]
    _emit(builder(prof, sig, args.B, args.m).to_csv(), args.out)


def cmd_laws(args) -> None:
    f = LAWS[args.law]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["z", args.law])
    for z in args.grid:
        w.writerow([repr(float(z)), repr(float(f(float(z))))])
    _emit(buf.getvalue(), args.out)


def cmd_experiment(args) -> None:
    config = ExperimentConfig(args.kind, parse_family(args.family).spec(), args.B, args.n,
                              args.seed, args.m, args.threads, dict(args.param))
    report = run(config)
    log.info("runtime %.1f s", report.runtime)
    if args.out:
        for path in report.write(args.out):
            log.info("wrote %s", path)
    else:
        sys.stdout.write(report.to_json(with_runtime=False) + "\n")
    if not report.passed:
        log.warning("some rows failed their thresholds")


def cmd_compare(args) -> None:
    specs = [s.strip() for s in args.families.split(";") if s.strip()]
    if len(specs) != 2:
        raise ValidationError('--families needs exactly two families separated by ";"')
    report = compare_delta_effect(specs[0], specs[1], args.B, args.n, args.seed,
                                  tuple(float(x) for x in args.xis), args.threads)
    _emit(report.to_json(with_runtime=False) + "\n", args.out)


COMMANDS = {
    "sigma": cmd_sigma,
    "profile": cmd_profile,
    "paths": cmd_paths,
    "laws": cmd_laws,
    "experiment": cmd_experiment,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        _resolve_seed(args)
        _log_start(args)
        COMMANDS[args.command](args)
    except ObstructionError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
