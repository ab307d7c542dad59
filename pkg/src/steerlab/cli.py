"""Command-line entry point: ``steerlab {bell,steering,protocol} ...``.

Every command prints one JSON report (schema ``steerlab/1``) on stdout.
Exit status: 0 success, 1 usage error, 2 protocol rejected.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from typing import Sequence

import numpy as np

from . import __version__
from .bell import (
    BellFunctional,
    DomainError,
    KINDS,
    SettingsTable,
    build_functional,
    chsh_max_closed_form,
    chsh_paper_settings,
    composite_hardy_state,
    evaluate,
    even_closed_form,
    even_paper_settings,
    ghz_family_state,
    hardy_closed_form,
    hardy_paper_angle,
    hardy_paper_settings,
    best_free_angle,
    odd_closed_form,
    odd_paper_settings,
    optimize_settings,
)
from .lhv import classical_bound
from .protocols import QcaConfig, ThirdManConfig, run_qca, run_third_man
from .qcore import CapacityError, DensityMatrix
from .states import (
    TwoQubitFamilyParams,
    load_state,
    make_rho2,
    make_rhoN,
    product_tail_params,
    tail_params,
)
from .steering import DISTINCTNESS_TOL, PURITY_TOL, mutual_steering_check, theorem_premise

SCHEMA = "steerlab/1"
EXIT_OK, EXIT_USAGE, EXIT_REJECT = 0, 1, 2
_ANGLE_ARGS = ("zeta", "tau", "phi", "theta")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 by default
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--degrees", action="store_true", help="angles are given in degrees")
    p.add_argument("--pretty", action="store_true", help="also print a table on stderr")
    p.add_argument(
        "--threads", type=int, default=1,
        help="thread budget (computations are vectorized and run in one thread)",
    )
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="steerlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _common()

    b = sub.add_parser("bell", parents=[common], help="evaluate a Bell functional")
    b.add_argument("--kind", choices=KINDS, required=True)
    b.add_argument("--n", type=int, help="number of parties")
    b.add_argument("--r", type=int, help="conditioning parties (composite)")
    b.add_argument("--nu1", type=float, required=True)
    b.add_argument("--zeta", type=float, default=math.pi / 2)
    b.add_argument("--tau", type=float, default=0.0)
    b.add_argument("--phi", type=float, default=0.0, help="chi2 angle (hardy3)")
    b.add_argument("--f", type=float, nargs="+", help="tail coefficients f_i (hardyN, composite)")
    b.add_argument("--theta", type=float, help="free angle of the standard settings")
    g = b.add_mutually_exclusive_group()
    g.add_argument("--paper-settings", action="store_true", help="standard settings (default)")
    g.add_argument("--settings-file", help="explicit settings JSON")
    b.add_argument("--optimize", action="store_true", help="maximize over all settings")
    b.add_argument("--restarts", type=int, default=16)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--certify", action="store_true", help="compute the classical bound exactly")

    s = sub.add_parser("steering", parents=[common], help="mutual pure-state steering test")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--state-file")
    src.add_argument("--nu1", type=float)
    s.add_argument("--zeta", type=float, default=math.pi / 2)
    s.add_argument("--tau", type=float, default=0.0)
    s.add_argument("--n", type=int, default=2, help="2, or 3 with --phi tail")
    s.add_argument("--phi", type=float, default=0.0)
    s.add_argument("--purity-tol", type=float, default=PURITY_TOL)
    s.add_argument("--distinctness-tol", type=float, default=DISTINCTNESS_TOL)

    p = sub.add_parser("protocol", parents=[common], help="simulate a protocol")
    p.add_argument("name", choices=("thirdman", "qca"))
    p.add_argument("--config", help="JSON file with config fields; flags override it")
    p.add_argument("--nu1", type=float)
    p.add_argument("--zeta", type=float)
    p.add_argument("--phi", type=float)
    p.add_argument("--runs", type=int)
    p.add_argument("--inspect", type=int, help="inspection size m (qca)")
    p.add_argument("--seed", type=int)
    p.add_argument("--eve", choices=("none", "intercept-resend"))
    p.add_argument("--aux-angles", type=float, nargs="*", help="extra xy-plane bases (thirdman)")
    p.add_argument("--transcript", help="write the JSON-lines transcript here")
    return parser


def _to_radians(args: argparse.Namespace) -> None:
    if not args.degrees:
        return
    for name in _ANGLE_ARGS:
        v = getattr(args, name, None)
        if v is not None:
            setattr(args, name, math.radians(v))
    if getattr(args, "aux_angles", None):
        args.aux_angles = [math.radians(a) for a in args.aux_angles]


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


# -- bell ---------------------------------------------------------------------


def _bell_setup(args) -> tuple[BellFunctional, DensityMatrix, SettingsTable, float | None, dict]:
    kind, nu1, zeta = args.kind, args.nu1, args.zeta
    params: dict = {"kind": kind, "nu1": nu1, "zeta": zeta}
    closed = None

    if kind == "chsh":
        fn = build_functional("chsh")
        tp = TwoQubitFamilyParams(nu1, zeta, args.tau)
        rho = make_rho2(tp)
        if args.theta is None:
            closed, settings = chsh_max_closed_form(tp)
        else:
            settings = chsh_paper_settings(args.theta, args.tau)
        params["tau"] = args.tau
    elif kind in ("hardy3", "hardyN", "composite"):
        if kind == "hardy3":
            n = 3
            tp = tail_params(nu1, zeta, args.phi)
            params["phi"] = args.phi
        else:
            n = args.n if args.n is not None else (len(args.f) + 2 if args.f else None)
            if n is None or n < 3:
                raise UsageError(f"--kind {kind} needs --n >= 3 or --f")
            f = args.f if args.f else [1.0] * (n - 2)
            if len(f) != n - 2:
                raise UsageError(f"--f needs {n - 2} values for n = {n}")
            tp = product_tail_params(nu1, zeta, f)
            params.update(n=n, f=list(f))
        rho, r, big_f = composite_hardy_state(tp)
        if kind != "composite" and r:
            raise UsageError("zero tail coefficients make this a composite functional")
        if args.r is not None and args.r != r:
            raise UsageError(f"--r {args.r} disagrees with the {r} zero tail coefficients")
        if kind == "composite":
            fn = build_functional("composite", n, r)
            params["r"] = r
        else:
            fn = build_functional(kind, n)
        vartheta = args.theta if args.theta is not None else hardy_paper_angle(nu1, zeta, big_f)
        settings = hardy_paper_settings(n, r, vartheta)
        closed = hardy_closed_form(nu1, zeta, big_f, r, vartheta)
        params["theta"] = vartheta
    else:  # i3, oddN, evenN
        n = 3 if kind == "i3" else args.n
        if n is None:
            raise UsageError(f"--kind {kind} needs --n")
        fn = build_functional(kind, None if kind == "i3" else n)
        if kind == "evenN":
            def form(t): return even_closed_form(n, nu1, zeta, t)
            make = even_paper_settings
        else:
            def form(t): return odd_closed_form(n, nu1, zeta, t)
            make = odd_paper_settings
        theta = args.theta if args.theta is not None else best_free_angle(form)
        rho = ghz_family_state(n, nu1, zeta)
        settings = make(n, theta)
        closed = form(theta)
        params.update(n=n, theta=theta)

    if args.settings_file:
        with open(args.settings_file) as fh:
            settings = SettingsTable.from_dict(json.load(fh))
        if settings.n_parties != fn.n_parties:
            raise UsageError("settings file has the wrong number of parties")
        closed = None
    return fn, rho, settings, closed, params


def cmd_bell(args) -> tuple[dict, int]:
    fn, rho, settings, closed, params = _bell_setup(args)
    value = evaluate(fn, rho, settings)
    results = {"value_at_settings": value, "settings": settings.to_dict()}
    if closed is not None:
        results["closed_form"] = closed
    quantum = value
    if args.optimize:
        opt = optimize_settings(fn, rho, initial=settings, restarts=args.restarts, seed=args.seed)
        results.update(
            optimized_value=opt.value,
            optimized_settings=opt.settings.to_dict(),
            optimizer_converged=opt.converged,
            optimizer_sweeps=opt.sweeps,
        )
        quantum = max(value, opt.value)
    bound = fn.classical_bound
    if args.certify:
        bound, strategy = classical_bound(fn)
        results["classical_strategy"] = strategy.to_dict()
        results["declared_bound_verified"] = abs(bound - fn.classical_bound) <= 1e-12
    results.update(quantum_value=quantum, classical_bound=bound)
    report = {
        "parameters": params,
        "results": results,
        "violations": {fn.name: quantum > bound + 1e-10},
        "seed": args.seed,
    }
    return report, EXIT_OK


# -- steering -----------------------------------------------------------------


def cmd_steering(args) -> tuple[dict, int]:
    if args.state_file:
        rho = load_state(args.state_file)
        params = {"state_file": args.state_file}
    else:
        if args.nu1 is None:
            raise UsageError("give --nu1 or --state-file")
        if args.n == 2:
            rho = make_rho2(TwoQubitFamilyParams(args.nu1, args.zeta, args.tau))
        elif args.n == 3:
            rho = make_rhoN(tail_params(args.nu1, args.zeta, args.phi, args.tau))
        else:
            raise UsageError("--n must be 2 or 3; use --state-file for larger states")
        params = {"n": args.n, "nu1": args.nu1, "zeta": args.zeta, "tau": args.tau}
        if args.n == 3:
            params["phi"] = args.phi
    verdicts = mutual_steering_check(rho, args.purity_tol, args.distinctness_tol)
    table = {}
    for party, v in verdicts.items():
        d = v.witness_direction
        table[party] = {
            "steerable_to_pure": v.steerable_to_pure,
            "witness_direction": None if d is None else {"theta": d.theta, "phi": d.phi},
            "branch_purities": list(v.branch_purities),
            "branch_fidelity_between": v.branch_fidelity_between,
            "cut_negativity": v.cut_negativity,
        }
    premise = theorem_premise(verdicts)
    report = {
        "parameters": params,
        "results": {"parties": table, "premise": premise},
        "violations": {},
        "seed": None,
    }
    return report, EXIT_OK


# -- protocol -----------------------------------------------------------------

_THIRDMAN_DEFAULTS = {"nu1": None, "runs": 100000, "seed": 0, "aux_angles": []}
_QCA_DEFAULTS = {
    "nu1": None, "zeta": math.pi / 2, "phi": None, "runs": 100000,
    "inspection_size": 10000, "seed": 0, "eve_model": "none",
}


def _protocol_config(args) -> dict:
    defaults = _THIRDMAN_DEFAULTS if args.name == "thirdman" else _QCA_DEFAULTS
    cfg = dict(defaults)
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config fields: {sorted(unknown)}")
        cfg.update(loaded)
    flags = {
        "nu1": args.nu1, "zeta": args.zeta, "phi": args.phi, "runs": args.runs,
        "inspection_size": args.inspect, "seed": args.seed, "eve_model": args.eve,
        "aux_angles": args.aux_angles,
    }
    for k, v in flags.items():
        if v is not None:
            if k not in cfg:
                raise UsageError(f"--{k.replace('_', '-')} does not apply to {args.name}")
            cfg[k] = v
    missing = [k for k, v in cfg.items() if v is None]
    if missing:
        raise UsageError(f"missing parameters: {', '.join(missing)}")
    return cfg


def cmd_protocol(args) -> tuple[dict, int]:
    cfg = _protocol_config(args)
    if args.name == "thirdman":
        t = run_third_man(ThirdManConfig(
            cfg["nu1"], int(cfg["runs"]), int(cfg["seed"]), tuple(cfg["aux_angles"])
        ))
        status = EXIT_OK
    else:
        t = run_qca(QcaConfig(
            cfg["nu1"], cfg["zeta"], cfg["phi"], int(cfg["runs"]),
            int(cfg["inspection_size"]), int(cfg["seed"]), cfg["eve_model"],
        ))
        status = EXIT_OK if t.summary["accepted"] else EXIT_REJECT
    if args.transcript:
        t.write_jsonl(args.transcript)
    results = dict(t.summary)
    if args.transcript:
        results["transcript"] = args.transcript
    violations = {"rejected": not t.summary["accepted"]} if args.name == "qca" else {}
    report = {
        "parameters": {"protocol": args.name, **cfg},
        "results": results,
        "violations": violations,
        "seed": int(cfg["seed"]),
    }
    return report, status


COMMANDS = {"bell": cmd_bell, "steering": cmd_steering, "protocol": cmd_protocol}


def _pretty(report: dict) -> str:
    lines = [f"steerlab {report['command'][0]}  ({report['duration_s']:.3f} s)"]

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                walk(f"{prefix}.{k}" if prefix else str(k), v)
        else:
            lines.append(f"  {prefix:<40} {obj}")

    walk("", {"parameters": report["parameters"], "results": report["results"],
              "violations": report["violations"]})
    return "\n".join(lines)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be positive")
    _to_radians(args)
    start = time.perf_counter()
    try:
        body, status = COMMANDS[args.command](args)
    except (UsageError, DomainError, CapacityError, ValueError, OSError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"steerlab {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    report = {
        "schema": SCHEMA,
        "command": argv,
        "version": __version__,
        **body,
        "duration_s": time.perf_counter() - start,
    }
    report = _jsonable(report)
    print(json.dumps(report, allow_nan=False))
    if args.pretty:
        print(_pretty(report), file=sys.stderr)
    return status
