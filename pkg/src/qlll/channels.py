"""Quantum operations used by the resampling solver.

Every labelled channel returns a :class:`LabeledState` mapping classical labels
to unnormalised operators.  Channels used inside the solver loop share the
interface ``channel.apply(rho, C, f)`` where ``C`` is the checked flaw set and
``f`` the flaw being addressed, both as flaw indices.

For repeated use, the weak-measurement channel is compiled into Liouville
superoperators (row-major vectorisation, ``vec(A X B) = (A kron B^T) vec(X)``)
so that ``t`` rounds cost a logarithmic number of matrix products.
"""

from __future__ import annotations

import math
from decimal import Decimal, localcontext
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import linalg
from .instance import QsatInstance

BRANCH_LABELS = ("G", "B", "E", "P", "D", "b", "g")
PRECONDITION_TOL = 1e-8
SUPEROPERATOR_MAX_QUBITS = 5


class PreconditionError(ValueError):
    """Raised when a channel input is not supported on the required subspace."""


@dataclass
class LabeledState:
    """Unnormalised output operators keyed by classical label.

    ``parts`` holds finer-grained diagnostics (for instance the two error
    kinds of the weak-measurement channel) that are already summed into
    ``branches``.
    """

    branches: dict[str, np.ndarray]
    parts: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, label: str) -> np.ndarray:
        return self.branches[label]

    def trace(self, label: str) -> float:
        b = self.branches.get(label)
        return 0.0 if b is None else float(np.trace(b).real)

    def traces(self) -> dict[str, float]:
        return {k: float(np.trace(v).real) for k, v in self.branches.items()}

    def total_trace(self) -> float:
        return math.fsum(self.traces().values())

    def labels(self) -> list[str]:
        return list(self.branches)


# ---------------------------------------------------------------------------
# progress measures


@dataclass(frozen=True)
class ProgressMeasure:
    """``exact``: ``V^C`` is the common kernel of ``C``.  ``trivial``: always the full space."""

    kind: str = "exact"

    def __post_init__(self):
        if self.kind not in ("exact", "trivial"):
            raise ValueError(f"unknown progress measure {self.kind!r}")

    def projector(self, inst: QsatInstance, C: Iterable[int]) -> np.ndarray:
        if self.kind == "trivial":
            return linalg.identity(inst.dim)
        return inst.kernel_projector(C)


EXACT_MEASURE = ProgressMeasure("exact")
TRIVIAL_MEASURE = ProgressMeasure("trivial")


# ---------------------------------------------------------------------------
# elementary operations


def _conj(m: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return m @ rho @ linalg.dagger(m)


def _check_state(rho, inst: QsatInstance) -> np.ndarray:
    rho = linalg.as_matrix(rho)
    if rho.shape[0] != inst.dim:
        raise ValueError(f"state of dimension {rho.shape[0]} does not match {inst.n} qubits")
    return rho


def resample(rho, f: int, inst: QsatInstance) -> np.ndarray:
    """Replace the qubits of flaw ``f`` by maximally mixed ones."""
    rho = _check_state(rho, inst)
    return linalg.replace_with_maximally_mixed(rho, inst.flaws[f].support, inst.n)


def weak_operators(proj: np.ndarray, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """``(M_b, M_g) = (sqrt(theta) P, Id - (1 - sqrt(1 - theta)) P)``."""
    if not 0 < theta <= 1:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    mb = math.sqrt(theta) * proj
    mg = linalg.identity(proj.shape[0]) - (1.0 - math.sqrt(1.0 - theta)) * proj
    return mb, mg


def weak_measure(rho, f: int, theta: float, inst: QsatInstance) -> LabeledState:
    rho = _check_state(rho, inst)
    mb, mg = weak_operators(inst.projectors[f], theta)
    return LabeledState({"b": _conj(mb, rho), "g": _conj(mg, rho)})


def projective_measure(rho, f: int, inst: QsatInstance) -> LabeledState:
    """Measure ``(P_f, Id - P_f)`` and label the outcomes ``B`` and ``G``."""
    rho = _check_state(rho, inst)
    p = inst.projectors[f]
    q = linalg.identity(inst.dim) - p
    return LabeledState({"G": _conj(q, rho), "B": _conj(p, rho)})


def leakage(rho: np.ndarray, proj: np.ndarray) -> float:
    """``tr((Id - P) rho)``."""
    return float(np.trace(rho).real - np.trace(proj @ rho).real)


# ---------------------------------------------------------------------------
# exact channel


@dataclass(frozen=True)
class RotationData:
    svd: linalg.Svd
    signs: np.ndarray
    rot: np.ndarray          # full W U^dagger, unitary
    partial: np.ndarray      # W sgn(S) U^dagger

    @property
    def image_projector(self) -> np.ndarray:
        w = self.svd.W * self.signs
        return w @ linalg.dagger(self.svd.W)

    @property
    def source_projector(self) -> np.ndarray:
        u = self.svd.U * self.signs
        return u @ linalg.dagger(self.svd.U)


def rotation_data(inst: QsatInstance, C: Iterable[int], f: int) -> RotationData:
    """SVD of ``P_f P_{V^C}`` and the derived rotation."""
    pv = inst.kernel_projector(C)
    dec = linalg.svd(inst.projectors[f] @ pv)
    signs = linalg.sign_threshold(dec.s)
    rot = dec.W @ linalg.dagger(dec.U)
    partial = (dec.W * signs) @ linalg.dagger(dec.U)
    return RotationData(dec, signs, rot, partial)


def exact_channel(rho, C: Iterable[int], f: int, inst: QsatInstance, rot: RotationData | None = None) -> LabeledState:
    """Measure ``V^{C+f}``; on failure rotate the state into the image of ``P_f``.

    ``rho`` must lie in ``V^C``; the input is validated rather than projected.
    """
    rho = _check_state(rho, inst)
    C = frozenset(C)
    pv = inst.kernel_projector(C)
    tr = float(np.trace(rho).real)
    leak = leakage(rho, pv)
    if leak > PRECONDITION_TOL * max(tr, 0.0) + 1e-15:
        raise PreconditionError(
            f"input leaks {leak:.3e} of trace {tr:.3e} out of the checked subspace"
        )
    if rot is None:
        rot = rotation_data(inst, C, f)
    pvf = inst.kernel_projector(C | {f})
    qvf = linalg.identity(inst.dim) - pvf
    good = _conj(pvf, rho)
    bad = _conj(rot.rot @ qvf, rho)
    return LabeledState({"G": good, "B": bad})


@dataclass
class SubspaceReport:
    image_residual: float
    source_residual: float
    domination_gap: float
    commuting_sign_residual: float | None = None

    @property
    def max_residual(self) -> float:
        return max(self.image_residual, self.source_residual, max(0.0, -self.domination_gap))

    def ok(self, tol: float = 1e-8) -> bool:
        return self.max_residual <= tol


def subspace_identities_check(C: Iterable[int], f: int, inst: QsatInstance) -> SubspaceReport:
    """Residuals of the three identities linking the SVD of ``P_f P_V`` to the subspaces.

    * projector onto ``im(P_f P_V)`` equals ``W sgn(S) W^dagger``
    * ``P_V - P_{V_f}`` equals ``U sgn(S) U^dagger``
    * projector onto ``im(P_f P_V)`` is dominated by ``P_f P_{V'}`` where ``V'``
      is the kernel of the checked flaws not adjacent to ``f``
    """
    C = frozenset(C)
    data = rotation_data(inst, C, f)
    pf = inst.projectors[f]
    pv = inst.kernel_projector(C)
    pvf = inst.kernel_projector(C | {f})
    im = linalg.range_projector(pf @ pv)
    image_res = linalg.trace_norm(im - data.image_projector)
    source_res = linalg.trace_norm((pv - pvf) - data.source_projector)
    far = C - inst.graph.closed(f)
    bound = pf @ inst.kernel_projector(far)
    bound = (bound + linalg.dagger(bound)) / 2
    gap = linalg.psd_gap(im, bound)
    comm = None
    if inst.commutes():
        comm = float(np.max(np.abs(data.svd.s - data.signs), initial=0.0))
    return SubspaceReport(image_res, source_res, gap, comm)


# ---------------------------------------------------------------------------
# kernel projections


def kernel_projection_ideal(rho, S: Iterable[int], inst: QsatInstance) -> LabeledState:
    """Project onto ``V^S``; the rejected part is replaced by the maximally mixed state."""
    rho = _check_state(rho, inst)
    pv = inst.kernel_projector(S)
    kept = _conj(pv, rho)
    rest = float(np.trace(rho).real - np.trace(kept).real)
    return LabeledState({"P": kept, "D": rest * linalg.identity(inst.dim) / inst.dim})


def _average_complement_step(rho: np.ndarray, comps: Sequence[np.ndarray]) -> np.ndarray:
    out = np.zeros_like(rho)
    for q in comps:
        out += q @ rho @ q
    return out / len(comps)


def kernel_projection_approx(
    rho,
    S: Iterable[int],
    tau: int,
    inst: QsatInstance,
    rng: np.random.Generator | None = None,
) -> LabeledState:
    """``tau`` rounds of: pick a flaw of ``S`` uniformly and measure it; stop on detection.

    Without ``rng`` the averaged channel is returned (``P`` is the ``tau``-fold
    iterate of ``X -> mean_f (Id - P_f) X (Id - P_f)``, ``D`` the depolarised
    remainder).  With ``rng`` a single trajectory is sampled and only the
    realised branch is returned, carrying the full input trace.
    """
    rho = _check_state(rho, inst)
    if tau < 0:
        raise ValueError("tau must be non-negative")
    S = sorted(set(S))
    ident = linalg.identity(inst.dim)
    tr = float(np.trace(rho).real)
    if not S or tau == 0:
        return LabeledState({"P": rho.copy(), "D": np.zeros_like(rho)})
    comps = [ident - inst.projectors[i] for i in S]
    if rng is None:
        cur = rho
        for _ in range(tau):
            cur = _average_complement_step(cur, comps)
        rest = tr - float(np.trace(cur).real)
        return LabeledState({"P": cur, "D": rest * ident / inst.dim})
    cur = rho / tr
    for _ in range(tau):
        k = int(rng.integers(len(S)))
        kept = comps[k] @ cur @ comps[k]
        stay = float(np.trace(kept).real)
        if rng.random() >= stay:
            return LabeledState({"D": tr * ident / inst.dim})
        cur = kept / stay
    return LabeledState({"P": tr * cur})


# ---------------------------------------------------------------------------
# Liouville representation


def superop_conj(m: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> M X M^dagger`` acting on row-major ``vec(X)``."""
    return np.kron(m, m.conj())


def vec(x: np.ndarray) -> np.ndarray:
    return x.reshape(-1)


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return v.reshape(dim, dim)


def trace_functional(dim: int) -> np.ndarray:
    return vec(linalg.identity(dim))


def power_and_sum(k: np.ndarray, t: int) -> tuple[np.ndarray, np.ndarray]:
    """``(K^t, sum_{i<t} K^i)`` by binary doubling."""
    ident = np.eye(k.shape[0], dtype=k.dtype)
    power, total = ident, np.zeros_like(k)    # K^m and sum_{i<m} K^i for m built so far
    base, base_sum = k, ident                  # K^b and sum_{i<b} K^i for b = 2^j
    m = t
    while m:
        if m & 1:
            total = total + power @ base_sum
            power = power @ base
        m >>= 1
        if m:
            base_sum = base_sum + base @ base_sum
            base = base @ base
    return power, total


def matrix_power(k: np.ndarray, t: int) -> np.ndarray:
    return np.linalg.matrix_power(k, t)


def approx_projection_superop(inst: QsatInstance, S: Iterable[int], tau: int) -> np.ndarray:
    """Liouville matrix of the kept (``P``) branch of the approximate kernel projection."""
    S = sorted(set(S))
    d2 = inst.dim**2
    if not S or tau == 0:
        return np.eye(d2, dtype=np.complex128)
    ident = linalg.identity(inst.dim)
    step = sum(superop_conj(ident - inst.projectors[i]) for i in S) / len(S)
    return matrix_power(step, tau)


# ---------------------------------------------------------------------------
# weak-measurement (Zeno) channel


def _check_zeno_params(theta: float, t: int, mode: str, tau: int | None) -> None:
    if not 0 < theta <= 1:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    if t < 1:
        raise ValueError("t must be at least 1")
    if mode not in ("ideal", "implementable"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "implementable" and (tau is None or tau < 0):
        raise ValueError("implementable mode needs tau >= 0")


def zeno_channel(
    rho,
    C: Iterable[int],
    f: int,
    theta: float,
    t: int,
    inst: QsatInstance,
    mode: str = "ideal",
    tau: int | None = None,
) -> LabeledState:
    """Up to ``t`` rounds of a weak measurement of ``f`` each followed by a check of ``V^C``.

    Outcome ``B`` on the first weak detection, ``E`` (kept as ``E1``/``E2`` in
    ``parts``) if the state leaves ``V^C`` during the rounds or is not found in
    ``V^{C+f}`` at the end, ``G`` otherwise.  In ``implementable`` mode the
    non-local subspace checks are replaced by the approximate kernel
    projection with ``tau`` rounds and its depolarised branch counts as an
    error.  This is the direct step-by-step reference implementation.
    """
    _check_zeno_params(theta, t, mode, tau)
    rho = _check_state(rho, inst)
    C = frozenset(C)
    mb, mg = weak_operators(inst.projectors[f], theta)
    ident = linalg.identity(inst.dim)
    bad = np.zeros_like(rho)
    e1 = np.zeros_like(rho)
    cur = rho
    for _ in range(t):
        bad += _conj(mb, cur)
        after = _conj(mg, cur)
        if mode == "ideal":
            pv = inst.kernel_projector(C)
            e1 += _conj(ident - pv, after)
            cur = _conj(pv, after)
        else:
            proj = kernel_projection_approx(after, C, tau, inst)
            e1 += proj["D"]
            cur = proj["P"]
    if mode == "ideal":
        pvf = inst.kernel_projector(C | {f})
        good = _conj(pvf, cur)
        e2 = _conj(ident - pvf, cur)
    else:
        proj = kernel_projection_approx(cur, C | {f}, tau, inst)
        good, e2 = proj["P"], proj["D"]
    return LabeledState({"G": good, "B": bad, "E": e1 + e2}, {"E1": e1, "E2": e2})


@dataclass
class _CompiledStep:
    maps: dict[str, np.ndarray]      # label -> Liouville matrix


class ZenoChannel:
    """Weak-measurement channel compiled per ``(C, f)`` into Liouville matrices.

    Falls back to :func:`zeno_channel` for registers too large to compile.
    """

    name = "zeno"
    default_measure = EXACT_MEASURE

    def __init__(self, inst: QsatInstance, theta: float, t: int, mode: str = "ideal",
                 tau: int | None = None, compile_limit: int = SUPEROPERATOR_MAX_QUBITS):
        _check_zeno_params(theta, t, mode, tau)
        self.inst = inst
        self.theta = float(theta)
        self.t = int(t)
        self.mode = mode
        self.tau = tau
        self.compile = inst.n <= compile_limit
        self._cache: dict[tuple[frozenset, int], _CompiledStep] = {}
        self._proj_cache: dict[frozenset, np.ndarray] = {}
        self.name = f"zeno-{mode}"

    def _approx(self, S: frozenset) -> np.ndarray:
        m = self._proj_cache.get(S)
        if m is None:
            m = approx_projection_superop(self.inst, S, self.tau)
            self._proj_cache[S] = m
        return m

    def compiled(self, C: Iterable[int], f: int) -> _CompiledStep:
        key = (frozenset(C), int(f))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        inst = self.inst
        C = key[0]
        dim = inst.dim
        ident = linalg.identity(dim)
        mb, mg = weak_operators(inst.projectors[f], self.theta)
        lmb, lmg = superop_conj(mb), superop_conj(mg)
        if self.mode == "ideal":
            pv = inst.kernel_projector(C)
            pvf = inst.kernel_projector(C | {f})
            k = superop_conj(pv @ mg)
            kt, st = power_and_sum(k, self.t)
            maps = {
                "G": superop_conj(pvf) @ kt,
                "B": lmb @ st,
                "E1": superop_conj((ident - pv) @ mg) @ st,
                "E2": superop_conj(ident - pvf) @ kt,
            }
        else:
            k = self._approx(C) @ lmg
            kt, st = power_and_sum(k, self.t)
            g = self._approx(C | {f}) @ kt
            tr = trace_functional(dim)
            mixed = vec(ident) / dim
            lost_rounds = tr @ ((lmg - k) @ st)
            lost_final = tr @ (kt - g)
            maps = {
                "G": g,
                "B": lmb @ st,
                "E1": np.outer(mixed, lost_rounds),
                "E2": np.outer(mixed, lost_final),
            }
        step = _CompiledStep(maps)
        self._cache[key] = step
        return step

    def apply(self, rho: np.ndarray, C: Iterable[int], f: int) -> LabeledState:
        if not self.compile:
            return zeno_channel(rho, C, f, self.theta, self.t, self.inst, self.mode, self.tau)
        step = self.compiled(C, f)
        dim = self.inst.dim
        v = vec(np.asarray(rho, dtype=np.complex128))
        out = {k: unvec(m @ v, dim) for k, m in step.maps.items()}
        e1, e2 = out.pop("E1"), out.pop("E2")
        out["E"] = e1 + e2
        return LabeledState(out, {"E1": e1, "E2": e2})


class ExactChannel:
    name = "exact"
    default_measure = EXACT_MEASURE

    def __init__(self, inst: QsatInstance):
        self.inst = inst
        self._rot: dict[tuple[frozenset, int], RotationData] = {}

    def apply(self, rho: np.ndarray, C: Iterable[int], f: int) -> LabeledState:
        key = (frozenset(C), int(f))
        rot = self._rot.get(key)
        if rot is None:
            rot = rotation_data(self.inst, key[0], f)
            self._rot[key] = rot
        return exact_channel(rho, key[0], f, self.inst, rot)


class ProjectiveChannel:
    """Plain projective measurement of ``P_f``, ignoring the checked set."""

    name = "projective"
    default_measure = EXACT_MEASURE

    def __init__(self, inst: QsatInstance):
        self.inst = inst

    def apply(self, rho: np.ndarray, C: Iterable[int], f: int) -> LabeledState:
        return projective_measure(rho, f, self.inst)


def make_channel(kind: str, inst: QsatInstance, theta: float | None = None, t: int | None = None,
                 tau: int | None = None):
    if kind == "projective":
        return ProjectiveChannel(inst)
    if kind == "exact":
        return ExactChannel(inst)
    if kind == "zeno-ideal":
        return ZenoChannel(inst, theta, t, "ideal")
    if kind == "zeno-implementable":
        return ZenoChannel(inst, theta, t, "implementable", tau)
    raise ValueError(f"unknown channel kind {kind!r}")


# ---------------------------------------------------------------------------
# verification helpers


def zeno_rounds(theta: float, gamma: float) -> int:
    """Smallest ``t`` with ``t >= ln(3/theta) / (theta * min(gamma, 1))``."""
    return max(1, math.ceil(math.log(3.0 / theta) / (theta * min(gamma, 1.0))))


def random_state_in(proj: np.ndarray, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random unit-trace density matrix supported on the range of ``proj``."""
    rho = linalg.random_density_matrix(proj.shape[0], rng, rank)
    rho = proj @ rho @ proj
    tr = float(np.trace(rho).real)
    if tr <= 1e-12:
        return np.zeros_like(rho)
    return (rho + linalg.dagger(rho)) / (2 * tr)


@dataclass
class ProgressiveReport:
    checked: int = 0
    violations: list[str] = field(default_factory=list)
    worst_good_gap: float = math.inf
    worst_bad_gap: float = math.inf
    worst_error_ratio: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_progressive(
    channel,
    measure: ProgressMeasure,
    theta: float,
    inst: QsatInstance,
    configs: Sequence[tuple[Iterable[int], int]],
    rng: np.random.Generator,
    states_per_config: int = 5,
    tol: float = 1e-8,
    weak_error: bool = False,
) -> ProgressiveReport:
    """Check the Good, Bad and Error properties for each ``(C, f)``.

    With ``weak_error`` the error property is checked against the total
    output trace instead of the Bad branch.
    """
    rep = ProgressiveReport()
    for C, f in configs:
        C = frozenset(C)
        pv = measure.projector(inst, C)
        out = channel.apply(pv, C, f)
        target_g = measure.projector(inst, C | {f})
        far = measure.projector(inst, C - inst.graph.closed(f))
        target_b = inst.projectors[f] @ far
        target_b = (target_b + linalg.dagger(target_b)) / 2
        gap_g = linalg.psd_gap(out["G"], target_g)
        gap_b = linalg.psd_gap(out["B"], target_b)
        rep.worst_good_gap = min(rep.worst_good_gap, gap_g)
        rep.worst_bad_gap = min(rep.worst_bad_gap, gap_b)
        tag = f"C={sorted(C)}, f={f}"
        if not linalg.psd_leq(out["G"], target_g, tol):
            rep.violations.append(f"{tag}: Good branch exceeds target (gap {gap_g:.3e})")
        if not linalg.psd_leq(out["B"], target_b, tol):
            rep.violations.append(f"{tag}: Bad branch exceeds target (gap {gap_b:.3e})")
        for _ in range(states_per_config):
            rho = random_state_in(pv, rng)
            o = channel.apply(rho, C, f)
            e = o.trace("E")
            ref = o.total_trace() if weak_error else o.trace("B")
            if e > 2 * theta * ref + tol:
                rep.violations.append(f"{tag}: error trace {e:.3e} exceeds 2 theta x {ref:.3e}")
            if ref > 0:
                rep.worst_error_ratio = max(rep.worst_error_ratio, e / ref)
        rep.checked += 1
    return rep


def _random_hermitian_unit(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random pure state or normalised difference of two pure states (trace norm 1)."""
    a = linalg.random_pure_state(dim, rng)
    if rng.random() < 0.5:
        return np.outer(a, a.conj())
    b = linalg.random_pure_state(dim, rng)
    x = np.outer(a, a.conj()) - np.outer(b, b.conj())
    return x / linalg.trace_norm(x)


def channel_distance_lower_bound(
    qa: Callable[[np.ndarray], LabeledState],
    qb: Callable[[np.ndarray], LabeledState],
    dim: int,
    trials: int,
    rng: np.random.Generator,
    inputs: Sequence[np.ndarray] = (),
) -> float:
    """Largest sampled ``sum_label |qa(A)_label - qb(A)_label|_1`` over unit trace-norm inputs."""
    best = 0.0
    candidates = list(inputs) + [_random_hermitian_unit(dim, rng) for _ in range(trials)]
    for a in candidates:
        oa, ob = qa(a), qb(a)
        total = 0.0
        for label in set(oa.branches) | set(ob.branches):
            xa = oa.branches.get(label, np.zeros((dim, dim), dtype=np.complex128))
            xb = ob.branches.get(label, np.zeros((dim, dim), dtype=np.complex128))
            total += linalg.trace_norm(xa - xb)
        best = max(best, total)
    return best


def projection_error_bound(gap: float, size: int, tau: int) -> float:
    """``4 exp(-gap tau / |S|)``."""
    if size == 0:
        return 0.0
    if math.isinf(gap):
        return 0.0 if tau > 0 else 4.0
    return 4.0 * math.exp(-gap * tau / size)


def _geometric_sum_decimal(theta: float, sigma: float, t: int) -> Decimal:
    """Closed form ``(1 - r^(2t)) / (1 - r^2)`` with ``r = 1 - (1 - sqrt(1 - theta)) sigma^2``."""
    th, sg = Decimal(theta), Decimal(sigma)
    a = (1 - (1 - th).sqrt()) * sg * sg
    if a == 0:
        return Decimal(t)
    r2 = (1 - a) ** 2
    return (1 - r2**t) / (1 - r2)


def geometric_sum(theta: float, sigma: float, t: int) -> float:
    """``sum_{i<t} (1 - (1 - sqrt(1 - theta)) sigma^2)^(2 i)``, evaluated in 60-digit decimal arithmetic."""
    with localcontext() as ctx:
        ctx.prec = 60
        return float(_geometric_sum_decimal(theta, sigma, t))


def geometric_sum_check(theta: float, sigma: float, t: int) -> bool:
    if not (0 < theta <= 1 and 0 < sigma <= 1 and t >= 1):
        raise ValueError("need theta, sigma in (0, 1] and t >= 1")
    with localcontext() as ctx:
        ctx.prec = 60
        lhs = _geometric_sum_decimal(theta, sigma, t)
        return lhs <= 1 / (Decimal(sigma) ** 2 * Decimal(theta))


def smallest_singular_value(inst: QsatInstance, C: Iterable[int], f: int) -> float:
    """Smallest nonzero singular value of ``P_f P_{V^C}`` (``inf`` if the product vanishes)."""
    data = rotation_data(inst, C, f)
    nz = data.svd.s[data.signs > 0]
    return float(nz[-1]) if nz.size else math.inf
