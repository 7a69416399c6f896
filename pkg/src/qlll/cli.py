"""``qlll`` command line: check, gap, bounds, run, enumerate, gen, commute.

Exit codes: 0 success or condition satisfied, 1 condition failed or run failed,
2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments
from .channels import PreconditionError
from .generators import GENERATOR_KINDS, generate
from .instance import ConditionNotSatisfied, EnumerationLimitError
from .io import InstanceFormatError, dumps_instance, load_instance
from .linalg import SimulationSizeError

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _load(path: str):
    try:
        return load_instance(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except InstanceFormatError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _emit(report: dict, out: str | None) -> None:
    if out is None:
        sys.stdout.write(experiments.to_json(report))
        return
    if out.endswith(".csv"):
        if "trials" not in report:
            raise InputError("CSV output is only available for run reports")
        Path(out).write_text(experiments.report_to_csv(report))
    else:
        Path(out).write_text(experiments.to_json(report))


def cmd_check(args) -> int:
    inst = _load(args.instance)
    witness = _read_json(args.cec_witness) if args.cec_witness else None
    report = experiments.conditions_report(inst, witness)
    _emit(report, args.out)
    return EXIT_OK if report["shc_satisfied"] else EXIT_FAILED


def cmd_gap(args) -> int:
    inst = _load(args.instance)
    try:
        report = experiments.gap_report(inst, args.subset)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    _emit(report, args.out)
    return EXIT_OK


def cmd_bounds(args) -> int:
    inst = _load(args.instance)
    witness = _read_json(args.witness) if args.witness else None
    try:
        report = experiments.bounds_report(inst, args.condition, witness)
    except ConditionNotSatisfied as exc:
        _emit({"condition": args.condition.upper(), "satisfied": False, "error": str(exc)}, args.out)
        return EXIT_FAILED
    _emit(report, args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    inst = _load(args.instance)
    start = time.perf_counter()
    try:
        report = experiments.run_experiment(
            inst, args.mode, args.trials, args.seed, theta=args.theta, t=args.t, tau=args.tau,
            max_resamples=args.max_resamples, delta=args.delta, epsilon=args.epsilon,
            condition=args.condition, iterations=args.iterations, initial_states=args.initial,
        )
    except ConditionNotSatisfied as exc:
        _emit({"mode": args.mode, "error": str(exc)}, args.out)
        return EXIT_FAILED
    if args.timing:
        report["wall_clock_seconds"] = time.perf_counter() - start
    _emit(report, args.out)
    return EXIT_OK if report["aggregate"]["terminals"]["SUCCESS"] > 0 else EXIT_FAILED


def cmd_enumerate(args) -> int:
    inst = _load(args.instance)
    report = experiments.enumeration_report(inst, args.mode, args.max_resamples, args.theta, args.t)
    _emit(report, args.out)
    return EXIT_OK if report["ok"] else EXIT_FAILED


def cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    kw = {k: getattr(args, k) for k in ("n", "m", "k", "rank", "eps", "commuting") if getattr(args, k) is not None}
    try:
        inst = generate(args.kind, rng, **kw)
    except KeyError as exc:
        raise InputError(f"generator {args.kind!r} needs --{exc.args[0]}") from exc
    text = dumps_instance(inst)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_commute(args) -> int:
    inst = _load(args.instance)
    rho = None
    if args.rho:
        bits = args.rho
        if len(bits) != inst.n or set(bits) - set("01"):
            raise InputError(f"--rho must be an {inst.n}-bit string")
        v = np.zeros(inst.dim, dtype=np.complex128)
        v[int(bits, 2)] = 1.0
        rho = np.outer(v, v.conj())
    try:
        report = experiments.commutativity_report(inst, args.a, args.b, rho)
    except KeyError as exc:
        raise InputError(f"unknown flaw id {exc.args[0]!r}") from exc
    _emit(report, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlll", description="Quantum local lemma simulation lab")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_instance(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("instance", help="instance JSON file")
        p.add_argument("--out", help="write the report to a .json or .csv file instead of stdout")
        return p

    p = with_instance("check", "run the four sufficient-condition checkers")
    p.add_argument("--cec-witness", help="JSON list of y values for the cluster condition")
    p.set_defaults(func=cmd_check)

    p = with_instance("gap", "uniform gap and subset gaps")
    p.add_argument("--subset", nargs="*", help="flaw ids (no ids gives the empty set)")
    p.set_defaults(func=cmd_gap)

    p = with_instance("bounds", "expected-resampling bound and tail sizes")
    p.add_argument("--condition", required=True, choices=["SLC", "GLC", "CEC", "SHC", "slc", "glc", "cec", "shc"])
    p.add_argument("--witness", help="JSON list of witness values (x for GLC, y for CEC)")
    p.set_defaults(func=cmd_bounds)

    p = with_instance("run", "Monte Carlo solver runs")
    p.add_argument("--mode", required=True, choices=experiments.RUN_MODES)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta", type=float)
    p.add_argument("--t", type=int)
    p.add_argument("--tau", type=int)
    p.add_argument("--max-resamples", type=int)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--condition", default="SHC", help="condition used to derive the resampling budget")
    p.add_argument("--iterations", type=int, default=100, help="iterations for appendix-f-alt")
    p.add_argument("--initial", nargs="*", help="basis states cycled over trials in appendix-f-alt")
    p.add_argument("--timing", action="store_true", help="include wall-clock time (breaks byte determinism)")
    p.set_defaults(func=cmd_run)

    p = with_instance("enumerate", "exhaustive measurement-log tree check")
    p.add_argument("--max-resamples", type=int, default=4)
    p.add_argument("--mode", default="exact", choices=["exact", "projective", "zeno-ideal"])
    p.add_argument("--theta", type=float, default=0.05)
    p.add_argument("--t", type=int)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("gen", help="generate an instance file")
    p.add_argument("kind", choices=GENERATOR_KINDS)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--rank", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--commuting", action="store_true", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = with_instance("commute", "compare both resampling orders under full dephasing")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--rho", help="computational basis state as a bit string (default all ones)")
    p.set_defaults(func=cmd_commute)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, SimulationSizeError, EnumerationLimitError, PreconditionError, ValueError) as exc:
        print(f"qlll {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
