"""Report builders behind the command line: conditions, gaps, bounds, runs, enumeration."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Iterable, Sequence

import numpy as np

from . import linalg
from .channels import ZenoChannel, make_channel, resample, zeno_rounds
from .instance import (
    ConditionNotSatisfied,
    QsatInstance,
    check_all,
    default_glc_witness,
    implication_violations,
    resampling_bound,
    uniform_gap,
)
from .shearer import path_estimate, tail_bound_noslack
from .solver import (
    SUCCESS,
    BoostedSolver,
    SolverParams,
    alternative_algorithm_run,
    enumerate_log_tree,
    resampling_upper_estimate,
    run,
    select_parameters,
    trial_rng,
)

RUN_MODES = ("projective", "exact", "zeno-ideal", "zeno-implementable", "boosted", "appendix-f-alt")


def clean(obj):
    """Make a report JSON-safe: non-finite floats become strings, sets become sorted lists."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(clean(v) for v in obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def to_json(report: dict) -> str:
    return json.dumps(clean(report), indent=1, sort_keys=False) + "\n"


def _resolve_ids(inst: QsatInstance, ids: Iterable[str]) -> frozenset:
    try:
        return frozenset(inst.index(i) for i in ids)
    except KeyError as exc:
        raise ValueError(f"unknown flaw id {exc.args[0]!r}") from None


# ---------------------------------------------------------------------------
# conditions, gaps and bounds


def conditions_report(inst: QsatInstance, cec_witness: Sequence | None = None) -> dict:
    reports = check_all(inst, cec_witness)
    return {
        "n": inst.n,
        "flaws": [f.id for f in inst.flaws],
        "probabilities": [float(p) for p in inst.probabilities],
        "edges": [inst.ids(e) for e in inst.graph.edges()],
        "conditions": {k: v.to_dict(inst) for k, v in reports.items()},
        "implication_violations": implication_violations(reports),
        "shc_satisfied": reports["SHC"].satisfied,
    }


def gap_report(inst: QsatInstance, subset: Sequence[str] | None = None) -> dict:
    out = {"uniform_gap": uniform_gap(inst), "full_gap": inst.subset_gap(inst.all_flaws),
           "commuting": inst.commutes()}
    if subset is not None:
        s = _resolve_ids(inst, subset)
        out["subset"] = inst.ids(s)
        out["subset_gap"] = uniform_gap(inst, s)
    return out


def bounds_report(inst: QsatInstance, condition: str, witness: Sequence | None = None,
                  tail_t: Sequence[float] = (0.0, 1.0, 2.0)) -> dict:
    """Resampling bound, path estimate and no-slack tail sizes; raises if the condition fails."""
    cond = condition.upper()
    bound = resampling_bound(inst, cond, witness)
    g, p = inst.graph, inst.probabilities
    if cond == "SLC":
        est_cond, est_witness = "GLC", default_glc_witness(inst)
    else:
        est_cond, est_witness = cond, witness
    out = {
        "condition": cond,
        "resampling_bound": bound.to_dict(),
        "path_estimate": path_estimate(g, p, est_cond, est_witness),
        "tail_sizes": {str(t): tail_bound_noslack(g, p, est_cond, est_witness, t) for t in tail_t},
    }
    return out


# ---------------------------------------------------------------------------
# Monte Carlo runs


def default_params(inst: QsatInstance, mode: str, seed: int, theta: float | None = None,
                   t: int | None = None, tau: int | None = None, max_resamples: int | None = None,
                   delta: float = 0.1, epsilon: float = 0.1, condition: str = "SHC") -> SolverParams:
    if mode in ("projective", "exact", "appendix-f-alt"):
        kind = "exact" if mode == "exact" else "projective"
        return SolverParams(seed=seed, channel_kind=kind, max_resamplings=max_resamples)
    if mode == "zeno-ideal":
        th = 0.05 if theta is None else theta
        tt = zeno_rounds(th, uniform_gap(inst)) if t is None else t
        return SolverParams(theta=th, t=tt, seed=seed, channel_kind="zeno-ideal",
                            max_resamplings=max_resamples)
    params = select_parameters(inst, condition, delta, epsilon, seed=seed)
    if theta is not None:
        params.theta = theta
    if t is not None:
        params.t = t
    if tau is not None:
        params.tau = tau
    if max_resamples is not None:
        params.max_resamplings = max_resamples
    if mode == "zeno-implementable":
        params.repetitions, params.final_tau = 1, 0
    return params


def _basis_state(bits: str, n: int) -> np.ndarray:
    if len(bits) != n or set(bits) - set("01"):
        raise ValueError(f"initial state {bits!r} is not an {n}-bit string")
    v = linalg.ket(bits)
    return np.outer(v, v.conj())


def _summary(values: list[float]) -> dict:
    n = len(values)
    if n == 0:
        return {"count": 0, "mean": math.nan, "std": math.nan, "ci95": [math.nan, math.nan]}
    arr = np.array(values, dtype=float)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if n > 1 else 0.0
    half = 1.96 * std / math.sqrt(n)
    return {"count": n, "mean": mean, "std": std, "ci95": [mean - half, mean + half]}


def aggregate(rows: list[dict]) -> dict:
    succ = [r for r in rows if r["terminal"] == SUCCESS]
    rate = len(succ) / len(rows) if rows else math.nan
    se = math.sqrt(rate * (1 - rate) / len(rows)) if rows else math.nan
    return {
        "trials": len(rows),
        "success_rate": rate,
        "success_se": se,
        "terminals": {k: sum(r["terminal"] == k for r in rows) for k in ("SUCCESS", "ERROR", "TIMEOUT")},
        "resamplings": _summary([r["resample_count"] for r in rows]),
        "ground_overlap_given_success": _summary([r["ground_overlap"] for r in succ]),
        "ground_overlap_all": _summary([r["ground_overlap"] for r in rows]),
        "residual_energy_given_success": _summary([r["residual_energy"] for r in succ]),
    }


def run_experiment(
    inst: QsatInstance,
    mode: str,
    trials: int,
    seed: int,
    theta: float | None = None,
    t: int | None = None,
    tau: int | None = None,
    max_resamples: int | None = None,
    delta: float = 0.1,
    epsilon: float = 0.1,
    condition: str = "SHC",
    iterations: int = 100,
    initial_states: Sequence[str] | None = None,
) -> dict:
    if mode not in RUN_MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if trials < 1:
        raise ValueError("need at least one trial")
    params = default_params(inst, mode, seed, theta, t, tau, max_resamples, delta, epsilon, condition)
    rows = []
    if mode == "boosted":
        solver = BoostedSolver(inst, params)
        runner = lambda rng, i: solver.run(rng)  # noqa: E731
    elif mode == "appendix-f-alt":
        starts = [_basis_state(b, inst.n) for b in initial_states] if initial_states else [None]
        runner = lambda rng, i: alternative_algorithm_run(  # noqa: E731
            inst, rng, iterations, starts[i % len(starts)])
    else:
        channel = make_channel(params.channel_kind, inst, params.theta, params.t, params.tau)
        runner = lambda rng, i: run(inst, params, rng, channel)  # noqa: E731
    for i in range(trials):
        rec = runner(trial_rng(seed, i), i)
        row = {"trial": i}
        row.update(rec.to_dict())
        rows.append(row)
    report = {
        "mode": mode,
        "seed": seed,
        "seeding": "numpy SeedSequence(seed, spawn_key=(trial,))",
        "params": params.to_dict(),
        "instance": {"n": inst.n, "flaws": [f.id for f in inst.flaws]},
        "conditions": conditions_report(inst)["conditions"],
        "gap": gap_report(inst),
        "aggregate": aggregate(rows),
        "trials": rows,
    }
    try:
        report["bounds"] = bounds_report(inst, "SHC")
    except ConditionNotSatisfied as exc:
        report["bounds"] = {"error": str(exc)}
    return report


def report_to_csv(report: dict) -> str:
    """Per-trial rows followed by one aggregate row recomputable from them."""
    cols = ["kind", "trial", "terminal", "resample_count", "residual_energy", "ground_overlap",
            "channel_uses", "repetitions", "log"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    rows = report["trials"]
    for r in rows:
        w.writerow(["trial"] + [r.get(c, "") for c in cols[1:]])
    agg = aggregate(rows)
    w.writerow(["mean", len(rows), f"success_rate={agg['success_rate']!r}",
                agg["resamplings"]["mean"], _summary([r["residual_energy"] for r in rows])["mean"],
                agg["ground_overlap_all"]["mean"], _summary([r["channel_uses"] for r in rows])["mean"],
                _summary([r["repetitions"] for r in rows])["mean"], ""])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# enumeration and the commutativity demo


def enumeration_report(inst: QsatInstance, mode: str, max_resamples: int, theta: float = 0.05,
                       t: int | None = None) -> dict:
    if mode == "zeno-ideal":
        tt = zeno_rounds(theta, uniform_gap(inst)) if t is None else t
        channel = ZenoChannel(inst, theta, tt, "ideal")
        th = theta
    elif mode in ("exact", "projective"):
        channel = make_channel(mode, inst)
        th = 0.0
    else:
        raise ValueError(f"enumeration supports exact, projective and zeno-ideal, not {mode!r}")
    tree = enumerate_log_tree(inst, channel, max_resamples, theta=th)
    out = {"mode": mode, "max_resamples": max_resamples, "theta": th}
    out.update(tree.to_dict())
    try:
        out["expected_resamplings_upper"] = resampling_upper_estimate(inst, tree)
    except (ConditionNotSatisfied, ValueError) as exc:
        out["expected_resamplings_upper"] = f"unavailable: {exc}"
    return out


def dephase_all(rho: np.ndarray, inst: QsatInstance) -> np.ndarray:
    """Non-selective projective measurement of every flaw, in list order."""
    ident = linalg.identity(inst.dim)
    for p in inst.projectors:
        q = ident - p
        rho = p @ rho @ p + q @ rho @ q
    return rho


def resample_then_measure(rho: np.ndarray, first: int, second: int, inst: QsatInstance) -> np.ndarray:
    """``M_F R_second M_F R_first M_F (rho)``."""
    rho = dephase_all(rho, inst)
    rho = dephase_all(resample(rho, first, inst), inst)
    return dephase_all(resample(rho, second, inst), inst)


def commutativity_distance(inst: QsatInstance, a: int, b: int, rho: np.ndarray | None = None) -> float:
    if rho is None:
        v = linalg.ket("1" * inst.n)
        rho = np.outer(v, v.conj())
    x = resample_then_measure(rho, a, b, inst)
    y = resample_then_measure(rho, b, a, inst)
    return linalg.trace_norm(x - y)


def commutativity_report(inst: QsatInstance, a: str, b: str, rho: np.ndarray | None = None) -> dict:
    ia, ib = inst.index(a), inst.index(b)
    return {"a": a, "b": b, "adjacent": ib in inst.graph.neighbors[ia],
            "trace_distance": commutativity_distance(inst, ia, ib, rho)}
