"""Dense complex linear algebra on qubit registers.

Operators are plain ``numpy`` arrays of dtype ``complex128``.  Qubit 0 is the
most significant bit of a computational-basis index, so ``|q0 q1 ... q_{n-1}>``
has index ``q0 * 2**(n-1) + ... + q_{n-1}``.
"""

from __future__ import annotations

import os
from typing import NamedTuple, Sequence

import numpy as np

DEFAULT_MAX_QUBITS = 14
ZERO_TOL = 1e-8
SVD_REL_TOL = 1e-8


class SimulationSizeError(ValueError):
    """Raised when an operator would exceed the configured qubit limit."""


class NotHermitianError(ValueError):
    pass


class NotPSDError(ValueError):
    pass


def max_qubits() -> int:
    """Qubit limit, overridable through ``QLLL_MAX_QUBITS``."""
    raw = os.environ.get("QLLL_MAX_QUBITS")
    if raw is None:
        return DEFAULT_MAX_QUBITS
    return int(raw)


def check_size(n: int) -> None:
    if n > max_qubits():
        raise SimulationSizeError(
            f"{n} qubits exceeds the simulation limit of {max_qubits()} "
            "(set QLLL_MAX_QUBITS to raise it)"
        )


def as_matrix(a) -> np.ndarray:
    """Validate and convert ``a`` to a square finite complex matrix."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=np.complex128)


def ket(bits: str) -> np.ndarray:
    """Computational basis vector, e.g. ``ket("10")``."""
    v = np.zeros(2 ** len(bits), dtype=np.complex128)
    v[int(bits, 2)] = 1.0
    return v


def projector_onto(vectors) -> np.ndarray:
    """Orthogonal projector onto the span of the given column vectors."""
    vs = np.atleast_2d(np.asarray(vectors, dtype=np.complex128))
    if vs.shape[0] == 1 and vs.shape[1] > 1:
        vs = vs.T
    q, r = np.linalg.qr(vs)
    keep = np.abs(np.diag(r)) > 1e-12
    q = q[:, keep]
    return q @ q.conj().T


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def tensor(a, b) -> np.ndarray:
    """Kronecker product with the indices of ``a`` outermost."""
    a = as_matrix(a)
    b = as_matrix(b)
    dim = a.shape[0] * b.shape[0]
    if dim > 2 ** max_qubits():
        raise SimulationSizeError(f"tensor product dimension {dim} exceeds the limit")
    return np.kron(a, b)


def _num_qubits(dim: int) -> int:
    n = dim.bit_length() - 1
    if 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def _check_qubits(qubits: Sequence[int], n: int) -> list[int]:
    qs = [int(q) for q in qubits]
    if len(set(qs)) != len(qs):
        raise ValueError(f"repeated qubit index in {qs}")
    for q in qs:
        if not 0 <= q < n:
            raise ValueError(f"qubit index {q} out of range for {n} qubits")
    return qs


def _to_front(rho: np.ndarray, n: int, front: Sequence[int]) -> tuple[np.ndarray, list[int]]:
    """Reshape ``rho`` into ``(d_front, d_rest, d_front, d_rest)`` with ``front`` qubits first."""
    rest = [q for q in range(n) if q not in front]
    perm = list(front) + rest
    t = rho.reshape([2] * (2 * n))
    t = t.transpose(perm + [p + n for p in perm])
    df = 2 ** len(front)
    dr = 2 ** len(rest)
    return t.reshape(df, dr, df, dr), perm


def _from_front(t: np.ndarray, n: int, perm: Sequence[int]) -> np.ndarray:
    inv = np.argsort(perm)
    t = t.reshape([2] * (2 * n))
    t = t.transpose(list(inv) + [p + n for p in inv])
    return t.reshape(2**n, 2**n)


def embed_local(op, support: Sequence[int], n: int) -> np.ndarray:
    """Act with ``op`` on the ``support`` qubits (in the given order) and as identity elsewhere."""
    op = as_matrix(op)
    check_size(n)
    qs = _check_qubits(support, n)
    if op.shape[0] != 2 ** len(qs):
        raise ValueError(
            f"operator of dimension {op.shape[0]} does not match support of size {len(qs)}"
        )
    rest_dim = 2 ** (n - len(qs))
    full = np.einsum("ac,bd->abcd", op, identity(rest_dim))
    rest = [q for q in range(n) if q not in qs]
    return _from_front(full, n, qs + rest)


def partial_trace(rho, traced: Sequence[int], n: int) -> np.ndarray:
    """Trace out the ``traced`` qubits; the remaining qubits keep their relative order."""
    rho = as_matrix(rho)
    if rho.shape[0] != 2**n:
        raise ValueError(f"state of dimension {rho.shape[0]} is not a {n}-qubit operator")
    qs = _check_qubits(traced, n)
    t, _ = _to_front(rho, n, sorted(qs))
    return np.einsum("aiaj->ij", t)


def replace_with_maximally_mixed(rho: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """``Tr_Q[rho] (x) Id_Q / 2^|Q|`` with the identity placed back on the ``qubits``."""
    qs = sorted(_check_qubits(qubits, n))
    t, perm = _to_front(np.asarray(rho, dtype=np.complex128), n, qs)
    reduced = np.einsum("aiaj->ij", t)
    df = 2 ** len(qs)
    out = np.einsum("ab,ij->aibj", identity(df) / df, reduced)
    return _from_front(out, n, perm)


class HermitianEig(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


class Svd(NamedTuple):
    """``A = W diag(s) U^dagger`` with ``s`` descending."""

    W: np.ndarray
    s: np.ndarray
    U: np.ndarray


def is_hermitian(a: np.ndarray, atol: float = 1e-10) -> bool:
    scale = max(1.0, float(np.max(np.abs(a))))
    return bool(np.max(np.abs(a - dagger(a)), initial=0.0) <= atol * scale)


def hermitian_eig(a) -> HermitianEig:
    a = as_matrix(a)
    if not is_hermitian(a):
        raise NotHermitianError("matrix is not Hermitian")
    vals, vecs = np.linalg.eigh((a + dagger(a)) / 2)
    return HermitianEig(vals, vecs)


def svd(a) -> Svd:
    a = as_matrix(a)
    w, s, vh = np.linalg.svd(a)
    return Svd(w, s, dagger(vh))


def sign_threshold(s: np.ndarray, rel_tol: float = SVD_REL_TOL) -> np.ndarray:
    """Element-wise sign of singular values; values at or below ``rel_tol * max`` count as zero."""
    if s.size == 0 or s[0] <= 0:
        return np.zeros_like(s)
    return (s > rel_tol * s[0]).astype(float)


def trace_norm(a) -> float:
    """Sum of singular values."""
    a = as_matrix(a)
    if is_hermitian(a, atol=1e-13):
        return float(np.sum(np.abs(np.linalg.eigvalsh((a + dagger(a)) / 2))))
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def spectral_norm(a) -> float:
    return float(np.linalg.norm(as_matrix(a), 2))


def min_eigenvalue(a: np.ndarray) -> float:
    a = as_matrix(a)
    if not is_hermitian(a):
        raise NotHermitianError("matrix is not Hermitian")
    return float(np.linalg.eigvalsh((a + dagger(a)) / 2)[0])


def psd_leq(a, b, tol: float = 1e-8) -> bool:
    """Semidefinite comparison ``a <= b`` with a tolerance relative to ``||b - a||_1``."""
    return psd_gap(a, b) >= -tol * max(1.0, trace_norm(as_matrix(b) - as_matrix(a)))


def psd_gap(a, b) -> float:
    """Smallest eigenvalue of ``b - a`` (negative when ``a <= b`` fails)."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    if not (is_hermitian(a) and is_hermitian(b)):
        raise NotHermitianError("psd comparison needs Hermitian operands")
    return min_eigenvalue(b - a)


def _scaled_tol(vals: np.ndarray, zero_tol: float) -> float:
    norm = float(np.max(np.abs(vals), initial=0.0))
    return zero_tol * max(1.0, norm)


def _psd_spectrum(h, zero_tol: float) -> tuple[np.ndarray, np.ndarray, float]:
    vals, vecs = hermitian_eig(h)
    tol = _scaled_tol(vals, zero_tol)
    if vals.size and vals[0] < -tol:
        raise NotPSDError(f"eigenvalue {vals[0]:.3e} is below -{tol:.1e}")
    return vals, vecs, tol


def kernel_projector(h, zero_tol: float = ZERO_TOL) -> np.ndarray:
    """Orthogonal projector onto the eigenvectors of ``h`` with eigenvalue <= ``zero_tol``."""
    vals, vecs, tol = _psd_spectrum(h, zero_tol)
    v = vecs[:, vals <= tol]
    p = v @ dagger(v)
    return (p + dagger(p)) / 2


def smallest_nonzero_eig(h, zero_tol: float = ZERO_TOL) -> float:
    """Smallest eigenvalue above ``zero_tol``, or ``inf`` when ``h`` vanishes."""
    vals, _, tol = _psd_spectrum(h, zero_tol)
    pos = vals[vals > tol]
    return float(pos[0]) if pos.size else float("inf")


def range_projector(a, zero_tol: float = ZERO_TOL) -> np.ndarray:
    """Projector onto the column space of ``a``, via the spectrum of ``a a^dagger``."""
    a = as_matrix(a)
    return identity(a.shape[0]) - kernel_projector(a @ dagger(a), zero_tol)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random unit-trace density matrix (Ginibre ensemble)."""
    k = dim if rank is None else rank
    g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)
