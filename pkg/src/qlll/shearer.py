"""Stable set sequences, their weighted sums, and closed-form and tail bounds.

A stable set sequence is a list of non-empty independent sets ``I_1, ..., I_s``
with ``I_{r+1}`` contained in the inclusive neighbourhood of ``I_r``.  Its size
is ``sum |I_r|`` and its weight is the product of the flaw probabilities of
all members.  Resampling histories of the solver are indexed by such sequences,
so bounds on their total weight bound the expected number of resamplings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .instance import (
    ConditionNotSatisfied,
    DependencyGraph,
    EnumerationLimitError,
    IndependencePolynomial,
    _exactify,
    cec_violations,
    glc_violations,
    independent_sets,
    indep_polynomial,
    shc_holds,
)

MAX_SEQUENCE_SIZE = 10
MAX_SEQUENCE_FLAWS = 8
DEFAULT_CROSSOVER = 8

StableSetSequence = tuple  # tuple of frozensets


def is_stable_sequence(g: DependencyGraph, seq: Sequence[frozenset]) -> bool:
    for i, s in enumerate(seq):
        if not s or not g.is_independent(s):
            return False
        if i and not s <= g.closed_set(seq[i - 1]):
            return False
    return True


def sequence_size(seq: Sequence[frozenset]) -> int:
    return sum(len(s) for s in seq)


def sequence_weight(seq: Sequence[frozenset], p: Sequence) -> Fraction:
    ps = _exactify(p)
    w = Fraction(1)
    for s in seq:
        for i in s:
            w *= ps[i]
    return w


def _check_limits(g: DependencyGraph, k: int, max_size: int) -> None:
    if k < 0:
        raise ValueError("sequence size must be non-negative")
    if k > max_size:
        raise EnumerationLimitError(f"sequence size {k} exceeds the limit of {max_size}")
    if g.size > MAX_SEQUENCE_FLAWS:
        raise EnumerationLimitError(
            f"{g.size} flaws exceeds the sequence-enumeration limit of {MAX_SEQUENCE_FLAWS}"
        )


def enumerate_sequences(
    g: DependencyGraph, k: int, max_size: int = MAX_SEQUENCE_SIZE
) -> list[StableSetSequence]:
    """All stable set sequences of total size ``k``, depth first in lexicographic set order."""
    _check_limits(g, k, max_size)
    all_sets = [s for s in independent_sets(g) if s]
    out: list[StableSetSequence] = []

    def extend(prefix: list, allowed: frozenset | None, remaining: int) -> None:
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for s in all_sets:
            if len(s) > remaining:
                break
            if allowed is not None and not s <= allowed:
                continue
            prefix.append(s)
            extend(prefix, g.closed_set(s), remaining - len(s))
            prefix.pop()

    extend([], None, k)
    return out


def weighted_sum(g: DependencyGraph, p: Sequence, k: int, max_size: int = MAX_SEQUENCE_SIZE) -> Fraction:
    """Exact ``sum over sequences of size k of p_seq``, by dynamic programming over the last set."""
    _check_limits(g, k, max_size)
    if k == 0:
        return Fraction(1)
    ps = _exactify(p)
    sets = [s for s in independent_sets(g) if s]
    weight = {}
    for s in sets:
        w = Fraction(1)
        for i in s:
            w *= ps[i]
        weight[s] = w

    @lru_cache(maxsize=None)
    def tail(last: frozenset, remaining: int) -> Fraction:
        # weight of all continuations of a sequence ending in `last`
        if remaining == 0:
            return Fraction(1)
        allowed = g.closed_set(last)
        total = Fraction(0)
        for s in sets:
            if len(s) <= remaining and s <= allowed:
                total += weight[s] * tail(s, remaining - len(s))
        return total

    return sum((weight[s] * tail(s, k - len(s)) for s in sets if len(s) <= k), Fraction(0))


def _require(ok: bool, msg: str) -> None:
    if not ok:
        raise ConditionNotSatisfied(msg)


def _validate(g: DependencyGraph, p: Sequence, condition: str, witness: Sequence | None) -> str:
    cond = condition.upper()
    if cond == "GLC":
        if witness is None:
            raise ValueError("GLC needs a witness x")
        xs = _exactify(witness)
        _require(all(0 <= v < 1 for v in xs), "GLC witness must lie in [0, 1)")
        _require(not glc_violations(g, p, xs), "GLC fails for the given witness")
    elif cond == "CEC":
        if witness is None:
            raise ValueError("CEC needs a witness y")
        ys = _exactify(witness)
        _require(all(v >= 0 for v in ys), "CEC witness must be non-negative")
        _require(not cec_violations(g, p, ys), "CEC fails for the given witness")
    elif cond == "SHC":
        _require(shc_holds(g, p), "Shearer's condition fails")
    else:
        raise ValueError(f"unknown condition {condition!r}")
    return cond


def path_estimate(g: DependencyGraph, p: Sequence, condition: str, witness: Sequence | None = None) -> float:
    """Closed-form upper bound on the total weight of all stable set sequences."""
    cond = _validate(g, p, condition, witness)
    if cond == "GLC":
        return math.prod(1.0 / (1.0 - float(v)) for v in witness)
    if cond == "CEC":
        return math.prod(1.0 + float(v) for v in witness)
    return 1.0 / float(indep_polynomial(g, p))


def _inflate(p: Sequence, eps) -> list[Fraction]:
    factor = 1 + Fraction(eps)
    return [v * factor for v in _exactify(p)]


def tail_bound_slack(
    g: DependencyGraph, p: Sequence, epsilon: float, condition: str, witness: Sequence | None, r: float
) -> tuple[float, float]:
    """Return ``(T, (1+eps)^-r)``: sequences of size at least ``T + r`` weigh at most the bound.

    The inflated probabilities ``p (1 + eps)`` must satisfy the condition.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    p_inf = _inflate(p, epsilon)
    _require(all(v < 1 for v in p_inf), "inflated probabilities reach 1")
    cond = _validate(g, p_inf, condition, witness)
    ln1e = math.log1p(epsilon)
    if cond == "GLC":
        T = -math.fsum(math.log1p(-float(v)) for v in witness) / ln1e
    elif cond == "CEC":
        T = math.fsum(math.log1p(float(v)) for v in witness) / ln1e
    else:
        q0 = indep_polynomial(g, p_inf)
        T = (math.log(q0.denominator) - math.log(q0.numerator)) / ln1e
    return T, (1.0 + epsilon) ** (-r)


def tail_bound_noslack(
    g: DependencyGraph, p: Sequence, condition: str, witness: Sequence | None, t: float
) -> float:
    """Size ``T`` beyond which stable sequences weigh at most ``e^-t`` in total."""
    cond = _validate(g, p, condition, witness)
    q0 = indep_polynomial(g, p)
    log_q = math.log(q0.denominator) - math.log(q0.numerator)
    if cond == "GLC":
        xs = [float(v) for v in witness]
        a = math.fsum(v / (1 - v) for v in xs)
        b = math.fsum(-math.log1p(-v) for v in xs)
    elif cond == "CEC":
        ys = [float(v) for v in witness]
        a = math.fsum(ys)
        b = math.fsum(math.log1p(v) for v in ys)
    else:
        poly = IndependencePolynomial(g, p)
        ratios = [float(poly.q({i}) / q0) for i in range(g.size)]
        a = math.fsum(ratios)
        b = math.fsum(math.log1p(v) for v in ratios)
    return 4.0 * a * (t + 1.0 + min(log_q, b))


def default_epsilon_grid() -> list[Fraction]:
    # 2^(j/4) / 1024 for j = 0..56: roughly 1e-3 .. 16
    return [Fraction(round(2 ** (j / 4) * 2**20), 2**30) for j in range(57)]


@dataclass(frozen=True)
class TailCertificate:
    start: int
    upper: float
    enumerated: float
    completion: float
    epsilon: float | None


def certified_tail(
    g: DependencyGraph,
    p: Sequence,
    start: int,
    crossover: int = DEFAULT_CROSSOVER,
    grid: Sequence | None = None,
) -> TailCertificate:
    """Rigorous upper bound on the weight of all stable sequences of size ``>= start``.

    Sizes up to ``crossover`` are summed exactly.  The remainder uses the slack
    bound ``sum_{size >= m} p_seq <= (1+eps)^-m / q_empty(p (1+eps))`` minimised
    over ``eps`` values for which the inflated vector still satisfies Shearer's
    condition, and also ``1/q_empty(p) - sum_{size < m}``; the smaller is used.
    """
    start = max(0, math.ceil(start))
    _require(shc_holds(g, p), "Shearer's condition fails")
    partial = Fraction(0)
    for k in range(start, crossover + 1):
        partial += weighted_sum(g, p, k)
    m = max(start, crossover + 1)

    best, best_eps = math.inf, None
    for eps in default_epsilon_grid() if grid is None else grid:
        p_inf = _inflate(p, eps)
        if any(v >= 1 for v in p_inf) or not shc_holds(g, p_inf):
            continue
        q0 = indep_polynomial(g, p_inf)
        val = float(Fraction(q0.denominator, q0.numerator)) * (1.0 + float(eps)) ** (-m)
        if val < best:
            best, best_eps = val, float(eps)

    # all sequences weigh at most 1/q_empty(p); subtract what is below m
    below = sum((weighted_sum(g, p, k) for k in range(0, min(m, MAX_SEQUENCE_SIZE + 1))), Fraction(0))
    q0 = indep_polynomial(g, p)
    if m <= MAX_SEQUENCE_SIZE + 1:
        direct = float(Fraction(q0.denominator, q0.numerator) - below)
        if direct < best:
            best, best_eps = max(direct, 0.0), None
    return TailCertificate(start, float(partial) + best, float(partial), best, best_eps)
