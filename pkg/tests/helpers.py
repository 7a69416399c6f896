"""Small instances shared across the test modules."""

from __future__ import annotations

import numpy as np

from qlll.generators import (
    appendix_e_instance,
    appendix_f_instance,
    random_commuting_instance,
    random_rank_instance,
    single_flaw_instance,
)
from qlll.instance import Flaw, QsatInstance, check_shc


def diag_flaw(fid: str, support, bad_states) -> Flaw:
    """Flaw projecting onto the listed computational basis states of its support."""
    k = len(support)
    d = np.zeros(2**k)
    for b in bad_states:
        d[int(b, 2)] = 1.0
    return Flaw(fid, tuple(support), np.diag(d).astype(np.complex128))


def two_adjacent() -> QsatInstance:
    """Two flaws sharing qubit 1, each of probability 1/4."""
    return QsatInstance(3, [diag_flaw("a", (0, 1), ["11"]), diag_flaw("b", (1, 2), ["11"])])


def two_independent() -> QsatInstance:
    return QsatInstance(4, [diag_flaw("a", (0, 1), ["11"]), diag_flaw("b", (2, 3), ["11"])])


def commuting_chain() -> QsatInstance:
    """Path a - b - c of rank-one diagonal 2-local flaws on four qubits (p = 1/4, Shearer holds)."""
    return QsatInstance(4, [
        diag_flaw("a", (0, 1), ["11"]),
        diag_flaw("b", (1, 2), ["10"]),
        diag_flaw("c", (2, 3), ["01"]),
    ])


def slc_chain(n: int = 6) -> QsatInstance:
    """3-local rank-one diagonal flaws overlapping pairwise in one qubit (p = 1/8).

    For ``n = 6`` there are two flaws, so ``d = 2`` and SLC holds (1/8 <= 1/(2e)).
    """
    starts = range(0, n - 2, 2)
    states = ["111", "101", "010", "110"]
    return QsatInstance(n, [diag_flaw(f"f{i}", (s, s + 1, s + 2), [states[i % 4]])
                            for i, s in enumerate(starts)])


def random_noncommuting_shc(seed: int = 7, n: int = 3, m: int = 3) -> QsatInstance:
    """Haar-random rank-one 2-local flaws, regenerated until Shearer's condition holds."""
    rng = np.random.default_rng(seed)
    while True:
        inst = random_rank_instance(n, m, 2, 1, rng)
        if check_shc(inst).satisfied and not inst.commutes():
            return inst


def log_tree_fixtures() -> dict[str, QsatInstance]:
    """Fixtures with n <= 4 and at most three flaws, two of them non-commuting."""
    return {
        "single": single_flaw_instance(1, 1),
        "adjacent": two_adjacent(),
        "chain": commuting_chain(),
        "appendix_f": appendix_f_instance(0.01),
        "random3": random_noncommuting_shc(7),
    }


def shc_fixture_set() -> dict[str, QsatInstance]:
    """Every small fixture (at most four flaws) that satisfies Shearer's condition."""
    pool = {
        "single_quarter": single_flaw_instance(2, 1),
        "single_half": single_flaw_instance(1, 1),
        "adjacent": two_adjacent(),
        "independent": two_independent(),
        "chain": commuting_chain(),
        "appendix_f": appendix_f_instance(0.01),
        "appendix_e": appendix_e_instance(),
        "random3": random_noncommuting_shc(7),
        "random4": random_noncommuting_shc(11, n=4, m=4),
    }
    rng = np.random.default_rng(5)
    for i in range(3):
        pool[f"commuting{i}"] = random_commuting_instance(5, 4, 3, 1, rng)
    return {k: v for k, v in pool.items() if check_shc(v).satisfied}


def slc_commuting_fixtures() -> dict[str, QsatInstance]:
    """Commuting fixtures with n <= 6 that satisfy the symmetric condition."""
    from qlll.instance import check_slc

    pool = {
        "single_quarter": single_flaw_instance(2, 1),
        "single_eighth": single_flaw_instance(3, 1),
        "slc_chain": slc_chain(6),
        "overlap2": QsatInstance(4, [diag_flaw("a", (0, 1, 2), ["111"]), diag_flaw("b", (1, 2, 3), ["000"])]),
    }
    rng = np.random.default_rng(21)
    found = 0
    while found < 2:
        inst = random_commuting_instance(6, 3, 3, 1, rng)
        if check_slc(inst).satisfied and inst.graph.edges():
            pool[f"random{found}"] = inst
            found += 1
    return {k: v for k, v in pool.items() if check_slc(v).satisfied}
