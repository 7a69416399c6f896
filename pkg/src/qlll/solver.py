"""The maximal-independent-set resampling solver and its exact log-tree analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import linalg
from .channels import (
    EXACT_MEASURE,
    LabeledState,
    ProgressMeasure,
    approx_projection_superop,
    make_channel,
    resample,
    unvec,
    vec,
)
from .instance import QsatInstance, resampling_bound, uniform_gap
from .shearer import certified_tail

SUCCESS, ERROR, TIMEOUT = "SUCCESS", "ERROR", "TIMEOUT"
CHANNEL_KINDS = ("projective", "exact", "zeno-ideal", "zeno-implementable")
LABEL_ORDER = ("G", "B", "E")


# ---------------------------------------------------------------------------
# control flow shared by the solver, log replay and the log tree


def _next_flaw(inst: QsatInstance, C: frozenset, I: frozenset) -> int | None:
    """Smallest flaw outside ``C`` and the inclusive neighbourhood of ``I``."""
    blocked = C | inst.graph.closed_set(I)
    for i in range(inst.num_flaws):
        if i not in blocked:
            return i
    return None


@dataclass(frozen=True)
class LoopState:
    """Classical bookkeeping of the solver: checked set, current round, past rounds."""

    C: frozenset = frozenset()
    I: frozenset = frozenset()
    rounds: tuple = ()

    def advance(self, inst: QsatInstance) -> tuple["LoopState", int | None]:
        """Start a new round if the current one is exhausted; return the next flaw (or ``None``)."""
        f = _next_flaw(inst, self.C, self.I)
        if f is not None:
            return self, f
        if self.C == inst.all_flaws:
            return self, None
        state = LoopState(self.C, frozenset(), self.rounds + (self.I,))
        return state, _next_flaw(inst, state.C, state.I)

    def after(self, inst: QsatInstance, f: int, label: str) -> "LoopState":
        if label == "G":
            return LoopState(self.C | {f}, self.I, self.rounds)
        if label == "B":
            return LoopState(self.C - inst.graph.neighbors[f], self.I | {f}, self.rounds)
        raise ValueError(f"no successor state after label {label!r}")

    def sequence(self) -> tuple:
        """Stable set sequence of the resampled flaws so far."""
        seq = tuple(s for s in self.rounds if s)
        return seq + ((self.I,) if self.I else ())


@dataclass(frozen=True)
class LogReplay:
    checked: frozenset
    rounds: tuple
    current: frozenset
    sequence: tuple
    probability: Fraction
    next_flaw: int | None
    terminal: str | None


@dataclass(frozen=True)
class MeasurementLog:
    """Outcome labels seen by the solver, e.g. ``"GGBG"``."""

    outcomes: str = ""

    def __post_init__(self):
        if set(self.outcomes) - set("GBE"):
            raise ValueError(f"invalid outcome labels in {self.outcomes!r}")
        if "E" in self.outcomes[:-1]:
            raise ValueError("an E outcome can only be the last entry")

    def __len__(self) -> int:
        return len(self.outcomes)

    @property
    def resamplings(self) -> int:
        return self.outcomes.count("B")

    def extend(self, label: str) -> "MeasurementLog":
        return MeasurementLog(self.outcomes + label)

    def replay(self, inst: QsatInstance) -> LogReplay:
        """Reconstruct ``C``, the rounds, the stable set sequence, ``p_L`` and the next flaw."""
        state = LoopState()
        prob = Fraction(1)
        g_run = 0
        for pos, label in enumerate(self.outcomes):
            state, f = state.advance(inst)
            if f is None:
                raise ValueError(f"log continues after the solver has finished (position {pos})")
            if label == "E":
                return LogReplay(state.C, state.rounds, state.I, state.sequence(), prob, f, ERROR)
            g_run = g_run + 1 if label == "G" else 0
            if g_run > inst.num_flaws:
                raise ValueError("more consecutive G outcomes than flaws")
            if label == "B":
                prob *= inst.probabilities[f]
            state = state.after(inst, f, label)
        state, f = state.advance(inst)
        return LogReplay(state.C, state.rounds, state.I, state.sequence(), prob, f,
                         SUCCESS if f is None else None)


# ---------------------------------------------------------------------------
# parameters and records


@dataclass
class SolverParams:
    theta: float = 1.0
    t: int = 1
    tau: int = 1
    beta: float = 1.0
    max_resamplings: int | None = None
    seed: int = 0
    channel_kind: str = "projective"
    repetitions: int = 1
    final_tau: int = 0
    bound: float | None = None
    gamma: float | None = None
    gamma_full: float | None = None

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if self.t < 1 or self.tau < 1:
            raise ValueError("t and tau must be at least 1")
        if self.channel_kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.channel_kind!r}")
        if self.max_resamplings is not None and self.max_resamplings < 0:
            raise ValueError("max_resamplings must be non-negative")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunRecord:
    terminal: str
    log: MeasurementLog
    resample_count: int
    final_state: np.ndarray = field(repr=False)
    residual_energy: float
    ground_overlap: float
    channel_uses: int = 0
    repetitions: int = 1
    iterations: int = 0

    def to_dict(self, include_state: bool = False) -> dict:
        out = {
            "terminal": self.terminal,
            "log": self.log.outcomes,
            "resample_count": self.resample_count,
            "residual_energy": self.residual_energy,
            "ground_overlap": self.ground_overlap,
            "channel_uses": self.channel_uses,
            "repetitions": self.repetitions,
            "iterations": self.iterations,
        }
        if include_state:
            out["final_state"] = [[[z.real, z.imag] for z in row] for row in self.final_state]
        return out


def _normalise(rho: np.ndarray) -> np.ndarray:
    tr = float(np.trace(rho).real)
    return rho / tr if tr > 0 else rho


def _finish(inst: QsatInstance, terminal: str, log: MeasurementLog, rho: np.ndarray, **kw) -> RunRecord:
    rho = _normalise(rho)
    energy = float(np.trace(inst.hamiltonian() @ rho).real)
    overlap = float(np.trace(inst.kernel_projector(inst.all_flaws) @ rho).real)
    return RunRecord(terminal, log, log.resamplings, rho, energy, overlap, **kw)


def sample_label(out: LabeledState, rng: np.random.Generator, order: Sequence[str] = LABEL_ORDER) -> str:
    """Pick a label with probability proportional to its branch trace."""
    labels = [l for l in order if l in out.branches]
    weights = np.array([max(out.trace(l), 0.0) for l in labels])
    total = weights.sum()
    if total <= 0:
        raise ValueError("all branches have zero trace")
    u = rng.random() * total
    acc = 0.0
    for label, w in zip(labels, weights):
        acc += w
        if u < acc:
            return label
    return labels[int(np.flatnonzero(weights)[-1])]


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for trial ``trial`` of an experiment seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def run(
    inst: QsatInstance,
    params: SolverParams,
    rng: np.random.Generator | None = None,
    channel=None,
    observer: Callable[[frozenset, np.ndarray], None] | None = None,
) -> RunRecord:
    """One trajectory of the resampling solver.

    Starting from the maximally mixed state, flaws are addressed in list order
    subject to the round structure; each channel outcome is sampled with
    probability equal to its branch trace and the branch is renormalised.
    ``observer(C, rho)`` is called at every channel application.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    if channel is None:
        channel = make_channel(params.channel_kind, inst, params.theta, params.t, params.tau)
    rho = linalg.identity(inst.dim) / inst.dim
    state = LoopState()
    log = MeasurementLog()
    uses = 0
    budget = params.max_resamplings
    while True:
        state, f = state.advance(inst)
        if f is None:
            return _finish(inst, SUCCESS, log, rho, channel_uses=uses)
        if observer is not None:
            observer(state.C, rho)
        out = channel.apply(rho, state.C, f)
        uses += 1
        label = sample_label(out, rng)
        log = log.extend(label)
        branch = _normalise(out[label])
        if label == "E":
            return _finish(inst, ERROR, log, branch, channel_uses=uses)
        if label == "B":
            if budget is not None and log.resamplings > budget:
                return _finish(inst, TIMEOUT, log, branch, channel_uses=uses)
            branch = resample(branch, f, inst)
        state = state.after(inst, f, label)
        rho = branch


def run_trials(inst: QsatInstance, params: SolverParams, trials: int, channel=None) -> list[RunRecord]:
    if channel is None:
        channel = make_channel(params.channel_kind, inst, params.theta, params.t, params.tau)
    return [run(inst, params, trial_rng(params.seed, i), channel) for i in range(trials)]


# ---------------------------------------------------------------------------
# exhaustive log tree


@dataclass
class LogNode:
    log: str
    probability: Fraction
    checked: frozenset
    trace: float
    gap: float
    state: np.ndarray | None = None


@dataclass
class LogTreeReport:
    nodes: int = 0
    success_mass: float = 0.0
    error_mass: float = 0.0
    frontier_mass: float = 0.0
    expected_resamplings: float = 0.0
    at_least: list = field(default_factory=list)
    worst_gap: float = math.inf
    root_gap: float = math.nan
    violations: list = field(default_factory=list)
    error_violations: list = field(default_factory=list)
    worst_error_excess: float = -math.inf
    injective: bool = True
    sequence_mass: dict = field(default_factory=dict)
    node_list: list = field(default_factory=list)

    @property
    def truncated_tail_sum(self) -> float:
        """``sum_{k <= K} P(at least k resamplings)``."""
        return math.fsum(self.at_least)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.error_violations and self.injective

    def to_dict(self) -> dict:
        return {
            "nodes": self.nodes,
            "success_mass": self.success_mass,
            "error_mass": self.error_mass,
            "frontier_mass": self.frontier_mass,
            "expected_resamplings_truncated": self.expected_resamplings,
            "at_least": self.at_least,
            "worst_psd_gap": self.worst_gap,
            "root_gap": self.root_gap,
            "violations": self.violations,
            "error_violations": self.error_violations,
            "worst_error_excess": self.worst_error_excess,
            "injective": self.injective,
            "ok": self.ok,
        }


def enumerate_log_tree(
    inst: QsatInstance,
    channel,
    max_resamples: int,
    theta: float = 0.0,
    measure: ProgressMeasure | None = None,
    tol: float = 1e-8,
    error_slack: float = 1e-10,
    prune: float = 1e-15,
    keep_states: bool = False,
) -> LogTreeReport:
    """Expand every measurement log with at most ``max_resamples`` B outcomes.

    At each non-error node the unnormalised state is compared with
    ``p_L * P_{V^{C_L}} / N``; where an error child exists its trace is compared
    with ``2 theta`` times the trace of the B child.  Branches with trace below
    ``prune`` are not expanded.  The (K+1)-th B outcome is not expanded; its
    mass is reported as the frontier.
    """
    if measure is None:
        measure = getattr(channel, "default_measure", EXACT_MEASURE)
    rep = LogTreeReport(at_least=[0.0] * max_resamples)
    seq_seen: dict[tuple, str] = {}
    dim = inst.dim
    stack = [("", LoopState(), linalg.identity(dim) / dim, Fraction(1))]
    terminated = [0.0] * (max_resamples + 1)
    while stack:
        log, state, rho, prob = stack.pop()
        rep.nodes += 1
        tr = float(np.trace(rho).real)
        bound = float(prob) * measure.projector(inst, state.C) / dim
        gap = linalg.psd_gap(rho, bound)
        if log == "":
            rep.root_gap = gap
        rep.worst_gap = min(rep.worst_gap, gap)
        if not linalg.psd_leq(rho, bound, tol):
            rep.violations.append(f"log {log or '(empty)'}: min eig of bound - state is {gap:.3e}")
        if keep_states:
            rep.node_list.append(LogNode(log, prob, state.C, tr, gap, rho))
        state, f = state.advance(inst)
        k = log.count("B")
        if f is None:
            rep.success_mass += tr
            terminated[k] += tr
            continue
        out = channel.apply(rho, state.C, f)
        tb = out.trace("B")
        if "E" in out.branches:
            te = out.trace("E")
            rep.error_mass += te
            terminated[k] += te
            excess = te - 2 * theta * tb
            rep.worst_error_excess = max(rep.worst_error_excess, excess)
            if excess > error_slack:
                rep.error_violations.append(
                    f"log {log or '(empty)'}: error trace {te:.3e} > 2 theta x {tb:.3e}"
                )
        if tb > prune:
            if k + 1 > max_resamples:
                rep.frontier_mass += tb
            else:
                rep.at_least[k] += tb
                child = state.after(inst, f, "B")
                new_log = log + "B"
                seq = child.sequence()
                if seq in seq_seen:
                    rep.injective = False
                seq_seen[seq] = new_log
                new_prob = prob * inst.probabilities[f]
                rep.sequence_mass[k + 1] = rep.sequence_mass.get(k + 1, Fraction(0)) + new_prob
                stack.append((new_log, child, resample(out["B"], f, inst), new_prob))
        if out.trace("G") > prune:
            stack.append((log + "G", state.after(inst, f, "G"), out["G"], prob))
    rep.expected_resamplings = math.fsum(k * m for k, m in enumerate(terminated))
    return rep


def resampling_upper_estimate(inst: QsatInstance, tree: LogTreeReport) -> float:
    """``sum_{k<=K} P(>= k)`` plus a certified bound on ``sum_{k>K}`` stable-sequence weight."""
    K = len(tree.at_least)
    tail = certified_tail(inst.graph, inst.probabilities, K + 1)
    return tree.truncated_tail_sum + tail.upper


# ---------------------------------------------------------------------------
# parameter selection and the boosted procedure


def parameters_from_bound(R: float, num_flaws: int, d: int, gamma: float) -> dict:
    """``theta, beta, t, tau`` and the resampling budget from a resampling bound ``R``."""
    if R <= 0 or gamma <= 0:
        raise ValueError("need positive R and gamma")
    theta = 1.0 / (12.0 * R)
    beta = 1.0 / (6.0 * (num_flaws + 6.0 * R * d))
    g = min(gamma, 1.0) if math.isfinite(gamma) else 1.0
    t = max(1, math.ceil(math.log(3.0 / theta) / (theta * g)))
    tau = max(1, math.ceil((num_flaws / g) * (math.log(1.0 / beta) + math.log(t + 1.0) + math.log(4.0))))
    return {"theta": theta, "beta": beta, "t": t, "tau": tau, "max_resamplings": math.floor(6.0 * R)}


def boost_repetitions(epsilon: float) -> int:
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    return max(1, math.ceil(4.0 * math.log(1.0 / epsilon) - 1e-12))


def purification_rounds(num_flaws: int, gamma_full: float, delta: float) -> int:
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if math.isinf(gamma_full):
        return 0
    return max(1, math.ceil((num_flaws / gamma_full) * math.log(8.0 / delta)))


def select_parameters(
    inst: QsatInstance,
    condition: str = "SHC",
    delta: float = 0.1,
    epsilon: float = 0.1,
    witness: Sequence | None = None,
    gamma: float | None = None,
    gamma_full: float | None = None,
    seed: int = 0,
) -> SolverParams:
    """Parameters for the implementable weak-measurement solver.

    ``R`` is the ``n``-scaled resampling bound for the chosen condition (which
    must hold).  Both the uniform gap and the gap of the full Hamiltonian are
    computed exactly unless supplied.
    """
    R = resampling_bound(inst, condition, witness).scaled
    if gamma is None:
        gamma = uniform_gap(inst)
    if gamma_full is None:
        gamma_full = inst.subset_gap(inst.all_flaws)
    d = inst.graph.max_closed_degree()
    p = parameters_from_bound(R, inst.num_flaws, d, gamma)
    return SolverParams(
        theta=p["theta"], t=p["t"], tau=p["tau"], beta=p["beta"],
        max_resamplings=p["max_resamplings"], seed=seed, channel_kind="zeno-implementable",
        repetitions=boost_repetitions(epsilon), final_tau=purification_rounds(inst.num_flaws, gamma_full, delta),
        bound=R, gamma=gamma, gamma_full=gamma_full,
    )


class BoostedSolver:
    """Repeat the solver until a run succeeds and passes a final approximate kernel projection."""

    def __init__(self, inst: QsatInstance, params: SolverParams):
        self.inst = inst
        self.params = params
        self.channel = make_channel(params.channel_kind, inst, params.theta, params.t, params.tau)
        self.final = approx_projection_superop(inst, inst.all_flaws, params.final_tau)

    def purify(self, rho: np.ndarray, rng: np.random.Generator) -> np.ndarray | None:
        kept = unvec(self.final @ vec(rho), self.inst.dim)
        p = float(np.trace(kept).real)
        if rng.random() < p:
            return kept / p
        return None

    def run(self, rng: np.random.Generator) -> RunRecord:
        uses = 0
        last = None
        for rep in range(1, self.params.repetitions + 1):
            rec = run(self.inst, self.params, rng, self.channel)
            uses += rec.channel_uses
            last = rec
            if rec.terminal != SUCCESS:
                continue
            purified = self.purify(rec.final_state, rng)
            if purified is None:
                last = _finish(self.inst, ERROR, rec.log, rec.final_state, channel_uses=uses, repetitions=rep)
                continue
            return _finish(self.inst, SUCCESS, rec.log, purified, channel_uses=uses, repetitions=rep)
        return _finish(self.inst, last.terminal, last.log, last.final_state,
                       channel_uses=uses, repetitions=self.params.repetitions)


def boosted_run(
    inst: QsatInstance,
    condition: str = "SHC",
    delta: float = 0.1,
    epsilon: float = 0.1,
    rng: np.random.Generator | None = None,
    params: SolverParams | None = None,
) -> RunRecord:
    if params is None:
        params = select_parameters(inst, condition, delta, epsilon)
    if rng is None:
        rng = np.random.default_rng(params.seed)
    return BoostedSolver(inst, params).run(rng)


# ---------------------------------------------------------------------------
# the cautionary alternative algorithm


def alternative_algorithm_run(
    inst: QsatInstance,
    rng: np.random.Generator,
    iterations: int,
    initial_state: np.ndarray | None = None,
    observer: Callable[[frozenset, np.ndarray], None] | None = None,
) -> RunRecord:
    """Measure the joint kernel of ``C + f``; on failure resample ``f`` and uncheck its neighbourhood.

    Stops with SUCCESS once every flaw is checked, or with TIMEOUT after
    ``iterations`` loop iterations.
    """
    rho = linalg.identity(inst.dim) / inst.dim if initial_state is None else _normalise(
        linalg.as_matrix(initial_state))
    C: frozenset = frozenset()
    log = MeasurementLog()
    for it in range(iterations):
        if C == inst.all_flaws:
            return _finish(inst, SUCCESS, log, rho, iterations=it)
        if observer is not None:
            observer(C, rho)
        f = min(inst.all_flaws - C)
        pv = inst.kernel_projector(C | {f})
        kept = pv @ rho @ pv
        p = float(np.trace(kept).real)
        if rng.random() < p:
            rho = kept / p
            C = C | {f}
            log = log.extend("G")
        else:
            q = linalg.identity(inst.dim) - pv
            rho = resample(_normalise(q @ rho @ q), f, inst)
            C = C - inst.graph.closed(f)
            log = log.extend("B")
    terminal = SUCCESS if C == inst.all_flaws else TIMEOUT
    return _finish(inst, terminal, log, rho, iterations=iterations)

