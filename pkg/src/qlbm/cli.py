"""Command line entry point: ``qlbm run|compare|sweep|angles``.

Exit codes: 0 success, 2 configuration error, 3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import DegeneracyError, QLBMError
from .harness import MODES, emit_outputs, parse_config, run_experiment
from .lattice import D1Q3
from .qlbm_linear import linear_angles
from .qlbm_nonlinear import nonlinear_angles

EXIT_CONFIG = 2
EXIT_DEGENERATE = 3

_FLAG_KEYS = ("mode", "collision", "M", "steps", "u", "shots", "seed", "backend", "out")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_run_flags(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--collision", choices=("linear", "nonlinear"))
    p.add_argument("--M", type=int, help="position qubits (2**M cells)")
    p.add_argument("--steps", type=int)
    p.add_argument("--u", type=float, help="uniform advection velocity")
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--backend", choices=("exact", "shots"))
    p.add_argument("--out", help="output directory")
    p.add_argument("--plot", action="store_true", default=None, help="also write plot.svg")
    p.add_argument("--update-velocity", action="store_true", default=None, dest="update_velocity")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qlbm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one experiment")
    _add_run_flags(p)
    p = sub.add_parser("compare", help="quantum vs classical vs analytic")
    _add_run_flags(p)
    p = sub.add_parser("sweep", help="vary shots or steps")
    _add_run_flags(p)
    p.add_argument("--param", choices=("shots", "steps"), required=True)
    p.add_argument("--values", required=True, help="comma separated integers")
    p = sub.add_parser("angles", help="print collision angle tables")
    p.add_argument("--u", type=float, nargs="+", default=[0.3])
    return parser


def _overrides(args) -> dict:
    ov = {k: getattr(args, k, None) for k in _FLAG_KEYS}
    ov["plot"] = getattr(args, "plot", None)
    ov["update_velocity"] = getattr(args, "update_velocity", None)
    return ov


def _print_metrics(result):
    for name, rep in result.errors.items():
        print(f"{name}: linf={rep.linf:.6e} l2={rep.l2:.6e} l2_relative={rep.l2_relative:.6e}")


def cmd_run(args, force_mode=None) -> int:
    ov = _overrides(args)
    if force_mode:
        ov["mode"] = force_mode
    cfg = parse_config(args.config, overrides=ov)
    result = run_experiment(cfg)
    paths = emit_outputs(result)
    _print_metrics(result)
    print(f"wrote {paths['csv']}")
    return 0


def cmd_sweep(args) -> int:
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        print("sweep: --values must be comma separated integers", file=sys.stderr)
        return EXIT_CONFIG
    ov = _overrides(args)
    if ov["mode"] is None:
        ov["mode"] = "compare"
    base = parse_config(args.config, overrides=ov)
    out = Path(base.out)
    rows = [f"{args.param},linf_quantum_vs_classical,l2_relative_quantum_vs_classical"]
    for v in values:
        cfg = parse_config(args.config, overrides={**ov, args.param: v, "out": str(out / f"{args.param}_{v}")})
        result = run_experiment(cfg)
        emit_outputs(result)
        rep = result.errors.get("quantum_vs_classical")
        metrics = (rep.linf, rep.l2_relative) if rep else (float("nan"), float("nan"))
        rows.append(f"{v},{metrics[0]!r},{metrics[1]!r}")
        print(rows[-1])
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_bytes(("\n".join(rows) + "\n").encode("utf-8"))
    return 0


def cmd_angles(args) -> int:
    print(f"# D1Q3 weights {D1Q3.weights}, cs^2 = {D1Q3.cs_sq:.6f}")
    print("u,collision,theta0,theta1,theta2,theta3,theta4")
    for u in args.u:
        try:
            a = linear_angles(u)
            print(f"{u},linear,{a.theta0:.6f},{a.theta1:.6f},,,")
        except QLBMError as e:
            print(f"{u},linear,inadmissible: {e}")
        try:
            a = nonlinear_angles(u)
            print(f"{u},nonlinear,{a.theta0:.6f},{a.theta1:.6f},{a.theta2:.6f},{a.theta3:.6f},{a.theta4:.6f}")
        except QLBMError as e:
            print(f"{u},nonlinear,inadmissible: {e}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "compare":
            return cmd_run(args, force_mode="compare")
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_angles(args)
    except DegeneracyError as e:
        print(f"numerical degeneracy: {e}", file=sys.stderr)
        return EXIT_DEGENERATE
    except QLBMError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
