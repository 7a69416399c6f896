"""Instance generators and the fixed example instances used throughout the tests."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import linalg
from .instance import Flaw, QsatInstance


def haar_projector(k: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    """Projector onto a Haar-random ``rank``-dimensional subspace of ``k`` qubits."""
    dim = 2**k
    if not 0 <= rank <= dim:
        raise ValueError(f"rank {rank} out of range for {k} qubits")
    if rank == 0:
        return np.zeros((dim, dim), dtype=np.complex128)
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    v = q[:, :rank]
    p = v @ linalg.dagger(v)
    return (p + linalg.dagger(p)) / 2


def diagonal_projector(k: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    """Projector onto ``rank`` randomly chosen computational basis states of ``k`` qubits."""
    dim = 2**k
    chosen = rng.choice(dim, size=rank, replace=False)
    d = np.zeros(dim)
    d[chosen] = 1.0
    return np.diag(d).astype(np.complex128)


def _random_supports(n: int, m: int, k: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    if k > n:
        raise ValueError(f"locality {k} exceeds {n} qubits")
    return [tuple(sorted(int(q) for q in rng.choice(n, size=k, replace=False))) for _ in range(m)]


def random_rank_instance(
    n: int, m: int, k: int, rank: int, rng: np.random.Generator,
    supports: Sequence[Sequence[int]] | None = None,
) -> QsatInstance:
    """``m`` flaws, each a Haar-random rank-``rank`` projector on ``k`` random qubits."""
    sups = _random_supports(n, m, k, rng) if supports is None else [tuple(s) for s in supports]
    flaws = [Flaw(f"f{i}", s, haar_projector(len(s), rank, rng)) for i, s in enumerate(sups)]
    return QsatInstance(n, flaws)


def random_commuting_instance(
    n: int, m: int, k: int, rank: int, rng: np.random.Generator,
    supports: Sequence[Sequence[int]] | None = None,
) -> QsatInstance:
    """Flaws diagonal in the computational basis, hence pairwise commuting."""
    sups = _random_supports(n, m, k, rng) if supports is None else [tuple(s) for s in supports]
    flaws = [Flaw(f"f{i}", s, diagonal_projector(len(s), rank, rng)) for i, s in enumerate(sups)]
    return QsatInstance(n, flaws)


def chain_supports(n: int, k: int, cycle: bool = False) -> list[tuple[int, ...]]:
    count = n if cycle else n - k + 1
    return [tuple(sorted({(i + j) % n for j in range(k)})) for i in range(count)]


def chain_instance(n: int, k: int, rank: int, rng: np.random.Generator,
                   cycle: bool = False, commuting: bool = False) -> QsatInstance:
    sups = chain_supports(n, k, cycle)
    make = random_commuting_instance if commuting else random_rank_instance
    return make(n, len(sups), k, rank, rng, supports=sups)


def appendix_e_instance() -> QsatInstance:
    """Three commuting flaws on four qubits whose resampling steps do not commute."""
    one = np.diag([0.0, 1.0]).astype(np.complex128)
    phi = 0.6 * linalg.ket("00") + 0.8 * linalg.ket("11")
    return QsatInstance(4, [
        Flaw("a", (0, 1), np.kron(one, linalg.identity(2))),
        Flaw("b", (2, 3), np.kron(linalg.identity(2), one)),
        Flaw("c", (1, 2), np.outer(phi, phi.conj())),
    ])


def appendix_f_instance(eps: float = 0.01) -> QsatInstance:
    """Two qubits; the only common ground state is ``|10>``.

    ``p1`` projects onto ``sqrt(eps)|00> + sqrt(1-eps)|11>`` and ``p2`` onto
    ``|1>`` of the second qubit.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    psi = math.sqrt(eps) * linalg.ket("00") + math.sqrt(1 - eps) * linalg.ket("11")
    return QsatInstance(2, [
        Flaw("p1", (0, 1), np.outer(psi, psi.conj())),
        Flaw("p2", (1,), np.diag([0.0, 1.0]).astype(np.complex128)),
    ])


APPENDIX_F_GROUND_INDEX = 2  # |10>


def single_flaw_instance(k: int = 1, rank: int = 1) -> QsatInstance:
    """One diagonal flaw of probability ``rank / 2**k``."""
    d = np.zeros(2**k)
    d[2**k - rank:] = 1.0
    return QsatInstance(k, [Flaw("f0", tuple(range(k)), np.diag(d).astype(np.complex128))])


def one_qubit_pair_instance() -> QsatInstance:
    """``|1><1|`` and ``|+><+|`` on a single qubit (uniform gap ``1 - 1/sqrt 2``)."""
    plus = (linalg.ket("0") + linalg.ket("1")) / math.sqrt(2)
    return QsatInstance(1, [
        Flaw("z", (0,), np.diag([0.0, 1.0]).astype(np.complex128)),
        Flaw("x", (0,), np.outer(plus, plus.conj())),
    ])


def generate(kind: str, rng: np.random.Generator, **kw) -> QsatInstance:
    """Dispatch by generator name, as used on the command line."""
    if kind == "random-rank":
        return random_rank_instance(kw["n"], kw["m"], kw["k"], kw.get("rank", 1), rng)
    if kind == "random-commuting":
        return random_commuting_instance(kw["n"], kw["m"], kw["k"], kw.get("rank", 1), rng)
    if kind in ("chain", "cycle"):
        return chain_instance(kw["n"], kw["k"], kw.get("rank", 1), rng,
                              cycle=kind == "cycle", commuting=kw.get("commuting", False))
    if kind == "appendix-e":
        return appendix_e_instance()
    if kind == "appendix-f":
        return appendix_f_instance(kw.get("eps", 0.01))
    raise ValueError(f"unknown generator {kind!r}")


GENERATOR_KINDS = ("random-rank", "random-commuting", "chain", "cycle", "appendix-e", "appendix-f")
