"""Flaws, dependency graphs, independent-set polynomials and LLL-type conditions.

Flaw sets are represented as ``frozenset`` of flaw *indices* (positions in the
instance's flaw list); the list order is the fixed selection order used by the
solver.  Probabilities are exact ``Fraction`` values because a projector's
trace is an integer, so ``p_f = rank / 2**k`` is dyadic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import linalg

PROJECTOR_TOL = 1e-9
MAX_INDEPENDENT_SET_FLAWS = 20
MAX_GAP_FLAWS = 16

FlawSet = frozenset


class EnumerationLimitError(ValueError):
    pass


class ConditionNotSatisfied(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Flaw:
    """A local orthogonal projector ``local_projector`` acting on ``support``."""

    id: str
    support: tuple[int, ...]
    local_projector: np.ndarray = field(repr=False)

    def __post_init__(self):
        support = tuple(int(q) for q in self.support)
        if not support:
            raise ValueError(f"flaw {self.id!r}: empty support")
        if len(set(support)) != len(support):
            raise ValueError(f"flaw {self.id!r}: repeated qubit in support {support}")
        if list(support) != sorted(support):
            raise ValueError(f"flaw {self.id!r}: support {support} must be sorted")
        proj = linalg.as_matrix(self.local_projector)
        if proj.shape[0] != 2 ** len(support):
            raise ValueError(
                f"flaw {self.id!r}: projector dimension {proj.shape[0]} "
                f"does not match support size {len(support)}"
            )
        herm_err = linalg.trace_norm(proj - linalg.dagger(proj))
        idem_err = linalg.trace_norm(proj @ proj - proj)
        if herm_err > PROJECTOR_TOL or idem_err > PROJECTOR_TOL:
            raise ValueError(
                f"flaw {self.id!r}: not an orthogonal projector "
                f"(|P - P^+|_1 = {herm_err:.2e}, |P^2 - P|_1 = {idem_err:.2e})"
            )
        proj = proj.copy()
        proj.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "local_projector", proj)

    @property
    def rank(self) -> int:
        return int(round(float(np.trace(self.local_projector).real)))

    @property
    def probability(self) -> Fraction:
        return Fraction(self.rank, 2 ** len(self.support))


def flaw_probability(f: Flaw) -> Fraction:
    """``Tr(P_f^loc) / 2^|b(f)|``, exactly."""
    return f.probability


def product_probability(flaws: Iterable[Flaw]) -> Fraction:
    out = Fraction(1)
    for f in flaws:
        out *= f.probability
    return out


@dataclass(frozen=True)
class DependencyGraph:
    """``neighbors[i]`` is the set of flaws other than ``i`` sharing a qubit with it."""

    neighbors: tuple[frozenset, ...]

    @property
    def size(self) -> int:
        return len(self.neighbors)

    def closed(self, i: int) -> frozenset:
        return self.neighbors[i] | {i}

    def closed_set(self, flaws: Iterable[int]) -> frozenset:
        out: set[int] = set()
        for i in flaws:
            out |= self.closed(i)
        return frozenset(out)

    def open_set(self, flaws: Iterable[int]) -> frozenset:
        out: set[int] = set()
        for i in flaws:
            out |= self.neighbors[i]
        return frozenset(out)

    def is_independent(self, flaws: Iterable[int]) -> bool:
        s = frozenset(flaws)
        return not (self.open_set(s) & s)

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.size) for j in sorted(self.neighbors[i]) if i < j]

    def max_closed_degree(self) -> int:
        return max((len(self.closed(i)) for i in range(self.size)), default=0)


def graph_from_supports(supports: Sequence[Sequence[int]]) -> DependencyGraph:
    sets = [set(s) for s in supports]
    return DependencyGraph(
        tuple(
            frozenset(j for j in range(len(sets)) if j != i and sets[i] & sets[j])
            for i in range(len(sets))
        )
    )


def graph_from_edges(m: int, edges: Iterable[tuple[int, int]]) -> DependencyGraph:
    nb: list[set[int]] = [set() for _ in range(m)]
    for a, b in edges:
        if a == b:
            raise ValueError("self loops are not allowed")
        nb[a].add(b)
        nb[b].add(a)
    return DependencyGraph(tuple(frozenset(s) for s in nb))


class QsatInstance:
    """``n`` qubits and an ordered list of flaws.

    Embedded projectors, kernel projectors of sub-Hamiltonians and subset gaps
    are cached, since the solver asks for the same ones repeatedly.
    """

    def __init__(self, n: int, flaws: Sequence[Flaw]):
        self.n = int(n)
        if self.n <= 0:
            raise ValueError("need at least one qubit")
        linalg.check_size(self.n)
        self.flaws: tuple[Flaw, ...] = tuple(flaws)
        ids = [f.id for f in self.flaws]
        if len(set(ids)) != len(ids):
            raise ValueError(f"flaw ids are not unique: {ids}")
        for f in self.flaws:
            if max(f.support) >= self.n:
                raise ValueError(f"flaw {f.id!r}: support {f.support} exceeds {self.n} qubits")
        self._kernel_cache: dict[frozenset, np.ndarray] = {}
        self._gap_cache: dict[frozenset, float] = {}

    def __repr__(self) -> str:
        return f"QsatInstance(n={self.n}, flaws={[f.id for f in self.flaws]})"

    @property
    def dim(self) -> int:
        return 2**self.n

    @property
    def num_flaws(self) -> int:
        return len(self.flaws)

    @property
    def all_flaws(self) -> frozenset:
        return frozenset(range(self.num_flaws))

    def index(self, flaw_id: str) -> int:
        for i, f in enumerate(self.flaws):
            if f.id == flaw_id:
                return i
        raise KeyError(flaw_id)

    def ids(self, flaws: Iterable[int]) -> list[str]:
        return [self.flaws[i].id for i in sorted(flaws)]

    @cached_property
    def graph(self) -> DependencyGraph:
        return graph_from_supports([f.support for f in self.flaws])

    @cached_property
    def probabilities(self) -> tuple[Fraction, ...]:
        return tuple(f.probability for f in self.flaws)

    @cached_property
    def projectors(self) -> tuple[np.ndarray, ...]:
        """Flaw projectors embedded in the full ``2^n`` space."""
        out = []
        for f in self.flaws:
            p = linalg.embed_local(f.local_projector, f.support, self.n)
            p.setflags(write=False)
            out.append(p)
        return tuple(out)

    def hamiltonian(self, subset: Iterable[int] | None = None) -> np.ndarray:
        idx = self.all_flaws if subset is None else frozenset(subset)
        h = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for i in sorted(idx):
            h += self.projectors[i]
        return h

    def kernel_projector(self, subset: Iterable[int]) -> np.ndarray:
        """Projector onto ``V^S``, the common kernel of the flaws in ``S``."""
        key = frozenset(subset)
        p = self._kernel_cache.get(key)
        if p is None:
            if not key:
                p = linalg.identity(self.dim)
            elif len(key) == 1:
                (i,) = key
                p = linalg.identity(self.dim) - self.projectors[i]
            else:
                p = linalg.kernel_projector(self.hamiltonian(key))
            p.setflags(write=False)
            self._kernel_cache[key] = p
        return p

    def subset_gap(self, subset: Iterable[int]) -> float:
        key = frozenset(subset)
        g = self._gap_cache.get(key)
        if g is None:
            g = linalg.smallest_nonzero_eig(self.hamiltonian(key)) if key else math.inf
            self._gap_cache[key] = g
        return g

    def commutes(self, atol: float = 1e-10) -> bool:
        ps = self.projectors
        for i, j in itertools.combinations(range(len(ps)), 2):
            if np.max(np.abs(ps[i] @ ps[j] - ps[j] @ ps[i])) > atol:
                return False
        return True


def dependency_graph(inst: QsatInstance) -> DependencyGraph:
    return inst.graph


def sub_hamiltonian(inst: QsatInstance, subset: Iterable[int]) -> np.ndarray:
    """``H^S``: sum of the embedded projectors of the flaws in ``S``."""
    return inst.hamiltonian(subset)


def uniform_gap(inst: QsatInstance, subset: Iterable[int] | None = None) -> float:
    """Smallest nonzero eigenvalue of ``H^S`` (given ``S``) or its minimum over all subsets."""
    if subset is not None:
        return inst.subset_gap(subset)
    if inst.num_flaws > MAX_GAP_FLAWS:
        raise EnumerationLimitError(
            f"uniform gap over {inst.num_flaws} flaws exceeds the limit of {MAX_GAP_FLAWS}"
        )
    best = math.inf
    for r in range(1, inst.num_flaws + 1):
        for s in itertools.combinations(range(inst.num_flaws), r):
            best = min(best, inst.subset_gap(s))
    return best


def _canonical(sets: Iterable[frozenset]) -> list[frozenset]:
    return sorted(sets, key=lambda s: (len(s), sorted(s)))


def independent_sets(
    g: DependencyGraph,
    within: Iterable[int] | None = None,
    limit: int = MAX_INDEPENDENT_SET_FLAWS,
) -> list[frozenset]:
    """All independent sets (including the empty set), ordered by size then lexicographically."""
    verts = sorted(range(g.size) if within is None else set(within))
    if len(verts) > limit:
        raise EnumerationLimitError(
            f"independent-set enumeration over {len(verts)} flaws exceeds the limit of {limit}"
        )
    out: list[frozenset] = []

    def extend(current: frozenset, blocked: frozenset, start: int) -> None:
        out.append(current)
        for k in range(start, len(verts)):
            v = verts[k]
            if v not in blocked:
                extend(current | {v}, blocked | g.closed(v), k + 1)

    extend(frozenset(), frozenset(), 0)
    return _canonical(out)


def _q_empty(g: DependencyGraph, verts: frozenset, x: Sequence, memo: dict):
    """``q_empty`` of the subgraph induced on ``verts`` via deletion of a vertex."""
    if not verts:
        return 1
    hit = memo.get(verts)
    if hit is not None:
        return hit
    v = min(verts)
    val = _q_empty(g, verts - {v}, x, memo) - x[v] * _q_empty(g, verts - g.closed(v), x, memo)
    memo[verts] = val
    return val


def _exactify(x: Sequence) -> list:
    out = []
    for v in x:
        if isinstance(v, (Fraction, int)):
            out.append(Fraction(v))
        else:
            out.append(Fraction(float(v)))
    return out


class IndependencePolynomial:
    """Evaluates ``q_I(x)`` for one graph and weight vector, sharing a memo table."""

    def __init__(self, g: DependencyGraph, x: Sequence):
        if len(x) != g.size:
            raise ValueError(f"weight vector has {len(x)} entries for {g.size} flaws")
        self.g = g
        self.x = _exactify(x)
        self._memo: dict = {}

    def q(self, I: Iterable[int] = ()) -> Fraction:
        s = frozenset(I)
        if not self.g.is_independent(s):
            raise ValueError(f"{sorted(s)} is not an independent set")
        weight = Fraction(1)
        for i in s:
            weight *= self.x[i]
        rest = frozenset(range(self.g.size)) - self.g.closed_set(s)
        return weight * _q_empty(self.g, rest, self.x, self._memo)


def indep_polynomial(g: DependencyGraph, x: Sequence, I: Iterable[int] = ()) -> Fraction:
    """``q_I(x) = sum over independent S containing I of (-1)^(|S|-|I|) prod_{f in S} x_f``.

    Float weights are converted exactly to ``Fraction`` so that the sign tests
    used by the Shearer check are not exposed to rounding.
    """
    return IndependencePolynomial(g, x).q(I)


@dataclass
class ConditionReport:
    condition: str
    satisfied: bool
    witness: tuple | int | None = None
    q_values: dict | None = None
    detail: str = ""

    def to_dict(self, inst: QsatInstance | None = None) -> dict:
        out: dict = {"condition": self.condition, "satisfied": self.satisfied, "detail": self.detail}
        if isinstance(self.witness, tuple):
            out["witness"] = [float(w) for w in self.witness]
        else:
            out["witness"] = self.witness
        if self.q_values is not None:
            rows = []
            for s, v in self.q_values.items():
                key = inst.ids(s) if inst is not None else sorted(s)
                rows.append({"set": key, "q": float(v), "q_exact": str(v)})
            out["q_values"] = rows
        return out


def _probs(inst: QsatInstance, p: Sequence | None) -> list[Fraction]:
    return list(inst.probabilities) if p is None else _exactify(p)


def slc_threshold(d: int) -> float:
    return 1.0 / (d * math.e)


def glc_violations(g: DependencyGraph, p: Sequence, x: Sequence) -> list[int]:
    """Flaws with ``p_f > x_f * prod_{g in Gamma(f)} (1 - x_g)``, compared exactly."""
    ps, xs = _exactify(p), _exactify(x)
    bad = []
    for i in range(g.size):
        rhs = xs[i]
        for j in g.neighbors[i]:
            rhs *= 1 - xs[j]
        if ps[i] > rhs:
            bad.append(i)
    return bad


def cec_violations(g: DependencyGraph, p: Sequence, y: Sequence) -> list[int]:
    """Flaws with ``y_f < p_f * sum over independent J in Gamma+(f) of prod_J y``."""
    ps, ys = _exactify(p), _exactify(y)
    bad = []
    for i in range(g.size):
        total = Fraction(0)
        for J in independent_sets(g, within=g.closed(i)):
            term = Fraction(1)
            for j in J:
                term *= ys[j]
            total += term
        if ys[i] < ps[i] * total:
            bad.append(i)
    return bad


def shc_holds(g: DependencyGraph, p: Sequence) -> bool:
    q = shearer_values(g, p)
    return q[frozenset()] > 0 and all(v >= 0 for v in q.values())


def check_slc(inst: QsatInstance, p: Sequence | None = None) -> ConditionReport:
    d = inst.graph.max_closed_degree()
    probs = _probs(inst, p)
    thr = slc_threshold(d) if d else math.inf
    bad = [inst.flaws[i].id for i, pf in enumerate(probs) if float(pf) > thr]
    return ConditionReport(
        "SLC",
        not bad,
        witness=d,
        detail=f"d={d}, threshold 1/(d e)={thr:.6g}" + (f", violated by {bad}" if bad else ""),
    )


def default_glc_witness(inst: QsatInstance, p: Sequence | None = None) -> tuple[Fraction, ...]:
    """``x_f = 1/d``, or ``x_f = p_f`` when no two flaws interact (``d = 1``)."""
    d = inst.graph.max_closed_degree()
    if d >= 2:
        return tuple(Fraction(1, d) for _ in range(inst.num_flaws))
    # 1/d = 1 is outside (0, 1); x_f = p_f is the tightest valid choice for isolated flaws
    tiny = Fraction(1, 2**60)
    return tuple(max(pf, tiny) for pf in _probs(inst, p))


def check_glc(inst: QsatInstance, x: Sequence | None = None, p: Sequence | None = None) -> ConditionReport:
    probs = _probs(inst, p)
    if x is None:
        xs = list(default_glc_witness(inst, probs))
    else:
        xs = _exactify(x)
        if len(xs) != inst.num_flaws:
            raise ValueError(f"witness has {len(xs)} entries for {inst.num_flaws} flaws")
        if any(not (0 < v < 1) for v in xs):
            raise ValueError("GLC witness entries must lie in (0, 1)")
    if any(not (0 < v < 1) for v in xs):
        return ConditionReport("GLC", False, witness=tuple(xs), detail="default witness outside (0, 1)")
    bad = [inst.flaws[i].id for i in glc_violations(inst.graph, probs, xs)]
    return ConditionReport(
        "GLC", not bad, witness=tuple(xs), detail=f"violated by {bad}" if bad else ""
    )


def check_cec(inst: QsatInstance, y: Sequence, p: Sequence | None = None) -> ConditionReport:
    probs = _probs(inst, p)
    ys = _exactify(y)
    if len(ys) != inst.num_flaws:
        raise ValueError(f"witness has {len(ys)} entries for {inst.num_flaws} flaws")
    if any(v <= 0 for v in ys):
        raise ValueError("CEC witness entries must be positive")
    bad = [inst.flaws[i].id for i in cec_violations(inst.graph, probs, ys)]
    return ConditionReport(
        "CEC", not bad, witness=tuple(ys), detail=f"violated by {bad}" if bad else ""
    )


def shearer_values(g: DependencyGraph, p: Sequence) -> dict[frozenset, Fraction]:
    poly = IndependencePolynomial(g, p)
    return {I: poly.q(I) for I in independent_sets(g)}


def check_shc(inst: QsatInstance, p: Sequence | None = None) -> ConditionReport:
    probs = _probs(inst, p)
    q = shearer_values(inst.graph, probs)
    q0 = q[frozenset()]
    negative = [s for s, v in q.items() if v < 0]
    ok = q0 > 0 and not negative
    if q0 <= 0:
        detail = f"q_empty = {float(q0):.6g} is not positive"
    elif negative:
        detail = f"{len(negative)} independent sets with q_I < 0"
    else:
        detail = f"q_empty = {float(q0):.6g}"
    return ConditionReport("SHC", ok, q_values=q, detail=detail)


@dataclass(frozen=True)
class ResamplingBound:
    condition: str
    core: float
    scaled: float
    q_empty: float

    def to_dict(self) -> dict:
        return {"condition": self.condition, "core": self.core, "n_scaled": self.scaled,
                "q_empty": self.q_empty}


def _log_inv(q: Fraction) -> float:
    return math.log(q.denominator) - math.log(q.numerator)


def shc_ratios(g: DependencyGraph, p: Sequence) -> tuple[Fraction, list[Fraction]]:
    poly = IndependencePolynomial(g, p)
    q0 = poly.q()
    return q0, [poly.q({i}) / q0 for i in range(g.size)]


def core_quantities(
    inst: QsatInstance, condition: str, witness: Sequence | None = None, p: Sequence | None = None
) -> tuple[float, float]:
    """Return ``(A, B)`` with the bound shaped as ``4 A (... + min[ln 1/q_empty, B])``.

    Raises ``ConditionNotSatisfied`` if the condition fails with the witness.
    """
    probs = _probs(inst, p)
    cond = condition.upper()
    if cond == "SLC":
        rep = check_slc(inst, probs)
        if not rep.satisfied:
            raise ConditionNotSatisfied(rep.detail)
        cond, witness = "GLC", default_glc_witness(inst, probs)
    q0 = indep_polynomial(inst.graph, probs)
    if q0 <= 0:
        raise ConditionNotSatisfied("q_empty is not positive")
    log_q = _log_inv(q0)
    if cond == "GLC":
        rep = check_glc(inst, witness, probs)
        if not rep.satisfied:
            raise ConditionNotSatisfied(rep.detail)
        xs = [float(v) for v in rep.witness]
        a = math.fsum(v / (1 - v) for v in xs)
        b = math.fsum(-math.log1p(-v) for v in xs)
    elif cond == "CEC":
        if witness is None:
            raise ValueError("CEC needs an explicit witness y")
        rep = check_cec(inst, witness, probs)
        if not rep.satisfied:
            raise ConditionNotSatisfied(rep.detail)
        ys = [float(v) for v in rep.witness]
        a = math.fsum(ys)
        b = math.fsum(math.log1p(v) for v in ys)
    elif cond == "SHC":
        rep = check_shc(inst, probs)
        if not rep.satisfied:
            raise ConditionNotSatisfied(rep.detail)
        _, ratios = shc_ratios(inst.graph, probs)
        a = math.fsum(float(r) for r in ratios)
        b = math.fsum(math.log1p(float(r)) for r in ratios)
    else:
        raise ValueError(f"unknown condition {condition!r}")
    return a, min(log_q, b)


def resampling_bound(
    inst: QsatInstance, condition: str, witness: Sequence | None = None, p: Sequence | None = None
) -> ResamplingBound:
    """Closed-form upper bound on ``sum_k min(1, sum over stable sequences of size k of p)``.

    ``core`` is ``1 + 4 A (1 + min[ln 1/q_empty, B])``; ``scaled`` is ``n * core``.
    """
    a, m = core_quantities(inst, condition, witness, p)
    core = 1.0 + 4.0 * a * (1.0 + m)
    q0 = float(indep_polynomial(inst.graph, _probs(inst, p)))
    return ResamplingBound(condition.upper(), core, inst.n * core, q0)


def check_all(inst: QsatInstance, cec_witness: Sequence | None = None) -> dict[str, ConditionReport]:
    """Run every checker; CEC is only evaluated when a witness is supplied."""
    out = {
        "SLC": check_slc(inst),
        "GLC": check_glc(inst),
        "SHC": check_shc(inst),
    }
    if cec_witness is not None:
        out["CEC"] = check_cec(inst, cec_witness)
    return out


def implication_violations(reports: Mapping[str, ConditionReport]) -> list[str]:
    """Pairs where a stronger condition holds but a weaker one fails."""
    out = []
    chain = [("SLC", "GLC"), ("GLC", "SHC"), ("CEC", "SHC")]
    for strong, weak in chain:
        if strong in reports and weak in reports:
            if reports[strong].satisfied and not reports[weak].satisfied:
                out.append(f"{strong} holds but {weak} fails")
    return out
