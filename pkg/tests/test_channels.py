from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qlll import linalg
from qlll.channels import (
    EXACT_MEASURE,
    TRIVIAL_MEASURE,
    ExactChannel,
    PreconditionError,
    ProjectiveChannel,
    ZenoChannel,
    channel_distance_lower_bound,
    exact_channel,
    geometric_sum,
    geometric_sum_check,
    kernel_projection_approx,
    kernel_projection_ideal,
    power_and_sum,
    projection_error_bound,
    random_state_in,
    resample,
    rotation_data,
    smallest_singular_value,
    subspace_identities_check,
    verify_progressive,
    weak_measure,
    zeno_channel,
    zeno_rounds,
)
from qlll.generators import (
    appendix_f_instance,
    random_commuting_instance,
    random_rank_instance,
    single_flaw_instance,
)
from qlll.instance import QsatInstance, uniform_gap

from helpers import diag_flaw, random_noncommuting_shc

seeds = st.integers(0, 2**32 - 1)


def pure(bits):
    v = linalg.ket(bits)
    return np.outer(v, v.conj())


def random_config(rng, n=3, m=3, commuting=False):
    make = random_commuting_instance if commuting else random_rank_instance
    inst = make(n, m, 2, 1, rng)
    f = int(rng.integers(m))
    others = [i for i in range(m) if i != f]
    C = frozenset(i for i in others if rng.random() < 0.6)
    return inst, C, f


# ---------------------------------------------------------------------------
# resampling and weak measurement


def test_resample_examples():
    inst = QsatInstance(2, [diag_flaw("a", (0,), ["1"]), diag_flaw("b", (1,), ["1"])])
    assert np.allclose(resample(np.eye(4) / 4, 0, inst), np.eye(4) / 4)
    out = resample(pure("11"), 0, inst)
    assert np.allclose(out, linalg.tensor(np.eye(2) / 2, np.diag([0, 1])))


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_resample_commutes_with_disjoint_operators(seed):
    rng = np.random.default_rng(seed)
    inst = QsatInstance(3, [diag_flaw("a", (0,), ["1"])])
    rho = linalg.random_density_matrix(8, rng)
    u = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0]
    big = linalg.embed_local(u, [1, 2], 3)
    lhs = resample(big @ rho @ big.conj().T, 0, inst)
    rhs = big @ resample(rho, 0, inst) @ big.conj().T
    assert linalg.trace_norm(lhs - rhs) <= 1e-10


def test_weak_measure_examples():
    rng = np.random.default_rng(0)
    inst = random_rank_instance(2, 1, 2, 1, rng)
    rho = linalg.random_density_matrix(4, rng)
    p = inst.projectors[0]
    out = weak_measure(rho, 0, 1.0, inst)
    assert np.allclose(out["b"], p @ rho @ p)
    q = np.eye(4) - p
    assert np.allclose(out["g"], q @ rho @ q)
    out = weak_measure(q @ rho @ q, 0, 0.3, inst)
    assert np.allclose(out["b"], 0)
    out = weak_measure(rho, 0, 0.3, inst)
    assert out.trace("b") == pytest.approx(0.3 * np.trace(p @ rho @ p).real)
    assert out.total_trace() == pytest.approx(1)
    with pytest.raises(ValueError):
        weak_measure(rho, 0, 0.0, inst)


# ---------------------------------------------------------------------------
# exact channel


def test_exact_channel_matches_projective_on_commuting():
    rng = np.random.default_rng(1)
    for _ in range(10):
        inst, C, f = random_config(rng, n=4, m=3, commuting=True)
        rho = random_state_in(inst.kernel_projector(C), rng)
        ex = exact_channel(rho, C, f, inst)
        pr = ProjectiveChannel(inst).apply(rho, C, f)
        assert linalg.trace_norm(ex["G"] - pr["G"]) <= 1e-9
        assert linalg.trace_norm(ex["B"] - pr["B"]) <= 1e-9


def test_exact_channel_zero_overlap_gives_no_bad_branch():
    inst = QsatInstance(1, [diag_flaw("a", (0,), ["1"]), diag_flaw("b", (0,), ["1"])])
    rho = pure("0")
    out = exact_channel(rho, {0}, 1, inst)
    assert np.allclose(out["B"], 0)
    assert out.trace("G") == pytest.approx(1)


def test_exact_channel_precondition():
    inst = appendix_f_instance(0.01)
    with pytest.raises(PreconditionError):
        exact_channel(np.eye(4) / 4, {1}, 0, inst)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_exact_channel_branch_subspaces(seed):
    rng = np.random.default_rng(seed)
    inst, C, f = random_config(rng)
    rho = random_state_in(inst.kernel_projector(C), rng)
    out = exact_channel(rho, C, f, inst)
    pvf = inst.kernel_projector(C | {f})
    assert linalg.trace_norm(pvf @ out["G"] - out["G"]) <= 1e-8
    far = inst.kernel_projector(C - inst.graph.closed(f))
    target = inst.projectors[f] @ far
    assert linalg.trace_norm(target @ out["B"] - out["B"]) <= 1e-8
    assert out.total_trace() == pytest.approx(1, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_rotation_well_defined_across_svds(seed):
    # A different SVD (column phases) must act identically on V^C - V^{C+f}.
    rng = np.random.default_rng(seed)
    inst, C, f = random_config(rng)
    data = rotation_data(inst, C, f)
    phases = np.exp(1j * rng.uniform(0, 2 * math.pi, size=inst.dim))
    w2, u2 = data.svd.W * phases, data.svd.U * phases
    rot2 = w2 @ u2.conj().T
    diff = inst.kernel_projector(C) - inst.kernel_projector(C | {f})
    assert linalg.trace_norm((data.rot - rot2) @ diff) <= 1e-8


def test_subspace_identities_examples():
    rng = np.random.default_rng(2)
    inst, C, f = random_config(rng, n=4, m=3, commuting=True)
    rep = subspace_identities_check(C, f, inst)
    assert rep.ok() and rep.commuting_sign_residual <= 1e-8
    orth = QsatInstance(1, [diag_flaw("a", (0,), ["1"]), diag_flaw("b", (0,), ["1"])])
    rep = subspace_identities_check({0}, 1, orth)
    assert rep.ok()
    assert np.allclose(rotation_data(orth, {0}, 1).partial, 0)
    inst = random_noncommuting_shc(7)
    for f in range(3):
        assert subspace_identities_check({i for i in range(3) if i != f}, f, inst).ok()


def test_singular_value_lower_bound():
    rng = np.random.default_rng(3)
    for _ in range(30):
        inst, C, f = random_config(rng)
        sigma = smallest_singular_value(inst, C, f)
        if math.isfinite(sigma):
            assert sigma**2 >= min(inst.subset_gap(C | {f}), 1) - 1e-9


# ---------------------------------------------------------------------------
# kernel projections


def test_kernel_projection_ideal_examples():
    inst = appendix_f_instance(0.01)
    pv = inst.kernel_projector({0})
    rho = random_state_in(pv, np.random.default_rng(0))
    out = kernel_projection_ideal(rho, {0}, inst)
    assert np.allclose(out["D"], 0, atol=1e-12)
    out = kernel_projection_ideal(np.eye(4) / 4, {0, 1}, inst)
    assert out.trace("P") == pytest.approx(1 / 4)
    out = kernel_projection_ideal(np.eye(4) / 4, [], inst)
    assert np.allclose(out["P"], np.eye(4) / 4) and np.allclose(out["D"], 0)


def test_kernel_projection_approx_examples():
    inst = random_commuting_instance(3, 2, 2, 1, np.random.default_rng(4))
    rho = linalg.random_density_matrix(8, np.random.default_rng(5))
    out = kernel_projection_approx(rho, {0, 1}, 0, inst)
    assert np.allclose(out["P"], rho) and np.allclose(out["D"], 0)
    # energy eigenstate of a commuting instance: P trace after one round is 1 - E/|S|
    h = inst.hamiltonian()
    diag = np.real(np.diag(h))
    i = int(np.argmax(diag))
    e = np.zeros(8)
    e[i] = 1
    out = kernel_projection_approx(np.diag(e).astype(complex), {0, 1}, 1, inst)
    assert out.trace("P") == pytest.approx(1 - diag[i] / 2)


def test_kernel_projection_trajectory_average():
    inst = random_noncommuting_shc(7)
    rho = linalg.random_density_matrix(8, np.random.default_rng(6))
    S, tau = {0, 1}, 3
    avg = kernel_projection_approx(rho, S, tau, inst)
    rng = np.random.default_rng(7)
    acc = np.zeros((8, 8), dtype=complex)
    trials = 4000
    for _ in range(trials):
        out = kernel_projection_approx(rho, S, tau, inst, rng)
        if "P" in out.branches:
            acc += out["P"]
    assert linalg.trace_norm(acc / trials - avg["P"]) < 0.05


def test_kernel_projection_error_bound():
    inst = random_noncommuting_shc(11, n=4, m=4)
    rng = np.random.default_rng(8)
    S = {0, 1, 2}
    gap = uniform_gap(inst, S)
    for tau in (1, 5, 20):
        q_ideal = lambda a: kernel_projection_ideal(a, S, inst)  # noqa: E731
        q_approx = lambda a: kernel_projection_approx(a, S, tau, inst)  # noqa: E731
        lb = channel_distance_lower_bound(q_ideal, q_approx, inst.dim, 10, rng)
        assert lb <= projection_error_bound(gap, len(S), tau) + 1e-9


def test_channel_distance_examples():
    inst = single_flaw_instance(1, 1)
    rng = np.random.default_rng(9)
    q = lambda a: kernel_projection_ideal(a, {0}, inst)  # noqa: E731
    assert channel_distance_lower_bound(q, q, 2, 10, rng) == 0
    q0 = lambda a: kernel_projection_approx(a, {0}, 0, inst)  # noqa: E731
    assert channel_distance_lower_bound(q, q0, 2, 0, rng, inputs=[pure("1")]) > 0


# ---------------------------------------------------------------------------
# the weak-measurement channel


def test_zeno_commuting_theta_one_is_projective():
    rng = np.random.default_rng(10)
    for _ in range(5):
        inst, C, f = random_config(rng, n=4, m=3, commuting=True)
        rho = random_state_in(inst.kernel_projector(C), rng)
        z = zeno_channel(rho, C, f, 1.0, 1, inst)
        pr = ProjectiveChannel(inst).apply(rho, C, f)
        assert linalg.trace_norm(z["G"] - pr["G"]) <= 1e-9
        assert linalg.trace_norm(z["B"] - pr["B"]) <= 1e-9
        assert z.trace("E") <= 1e-12


def test_zeno_fixed_point():
    rng = np.random.default_rng(11)
    inst, C, f = random_config(rng)
    rho = random_state_in(inst.kernel_projector(C | {f}), rng)
    out = zeno_channel(rho, C, f, 0.2, 7, inst)
    assert np.allclose(out["G"], rho, atol=1e-12)
    assert out.trace("B") <= 1e-12 and out.trace("E") <= 1e-12


@pytest.mark.parametrize("mode", ["ideal", "implementable"])
def test_compiled_matches_direct(mode):
    rng = np.random.default_rng(12)
    inst, C, f = random_config(rng)
    rho = random_state_in(inst.kernel_projector(C), rng)
    ch = ZenoChannel(inst, 0.1, 13, mode, tau=4)
    a = ch.apply(rho, C, f)
    b = zeno_channel(rho, C, f, 0.1, 13, inst, mode, tau=4)
    for k in ("G", "B", "E"):
        assert linalg.trace_norm(a[k] - b[k]) <= 1e-12
    for k in ("E1", "E2"):
        assert linalg.trace_norm(a.parts[k] - b.parts[k]) <= 1e-12


def test_zeno_error_below_bad_with_enough_rounds():
    rng = np.random.default_rng(13)
    theta = 0.05
    for _ in range(10):
        inst, C, f = random_config(rng)
        t = zeno_rounds(theta, inst.subset_gap(C | {f}))
        rho = random_state_in(inst.kernel_projector(C), rng)
        out = ZenoChannel(inst, theta, t).apply(rho, C, f)
        assert out.trace("E") <= 2 * theta * out.trace("B") + 1e-10


def test_zeno_e2_decay():
    rng = np.random.default_rng(14)
    theta = 0.1
    for _ in range(10):
        inst, C, f = random_config(rng)
        sigma = smallest_singular_value(inst, C, f)
        if not math.isfinite(sigma):
            continue
        pv, pvf = inst.kernel_projector(C), inst.kernel_projector(C | {f})
        rho = random_state_in(pv, rng)
        for t in (1, 5, 20):
            out = zeno_channel(rho, C, f, theta, t, inst)
            d = pv - pvf
            bound = math.exp(-t * sigma**2 * theta) * np.trace(d @ rho @ d).real
            assert np.trace(out.parts["E2"]).real <= bound + 1e-10


def test_zeno_parameter_errors():
    inst = single_flaw_instance()
    with pytest.raises(ValueError):
        zeno_channel(np.eye(2) / 2, [], 0, 0.0, 1, inst)
    with pytest.raises(ValueError):
        zeno_channel(np.eye(2) / 2, [], 0, 0.5, 0, inst)
    with pytest.raises(ValueError):
        ZenoChannel(inst, 0.5, 3, "implementable")


def test_power_and_sum():
    rng = np.random.default_rng(15)
    k = rng.normal(size=(5, 5)) / 3
    for t in (1, 2, 7, 16):
        kt, s = power_and_sum(k, t)
        assert np.allclose(kt, np.linalg.matrix_power(k, t))
        assert np.allclose(s, sum(np.linalg.matrix_power(k, i) for i in range(t)))


# ---------------------------------------------------------------------------
# progressive channels


def configs_for(inst, rng, count):
    out = []
    for _ in range(count):
        f = int(rng.integers(inst.num_flaws))
        C = frozenset(i for i in range(inst.num_flaws) if i != f and rng.random() < 0.6)
        out.append((C, f))
    return out


def test_exact_channel_progressive():
    rng = np.random.default_rng(16)
    inst = random_noncommuting_shc(11, n=4, m=4)
    rep = verify_progressive(ExactChannel(inst), EXACT_MEASURE, 0.0, inst, configs_for(inst, rng, 8), rng)
    assert rep.ok, rep.violations


def test_projective_progressive_under_trivial_measure():
    rng = np.random.default_rng(17)
    inst = random_noncommuting_shc(7)
    rep = verify_progressive(ProjectiveChannel(inst), TRIVIAL_MEASURE, 0.0, inst,
                             configs_for(inst, rng, 8), rng)
    assert rep.ok, rep.violations


def test_zeno_progressive():
    rng = np.random.default_rng(18)
    inst = random_noncommuting_shc(7)
    theta = 0.05
    t = zeno_rounds(theta, uniform_gap(inst))
    rep = verify_progressive(ZenoChannel(inst, theta, t), EXACT_MEASURE, theta, inst,
                             configs_for(inst, rng, 6), rng)
    assert rep.ok, rep.violations


def test_verify_progressive_reports_violation():
    class Leaky:
        def __init__(self, inst):
            self.inst = inst

        def apply(self, rho, C, f):
            out = ExactChannel(self.inst).apply(rho, C, f)
            # report the whole input as Good: exceeds the Good target whenever B is non-zero
            return type(out)({"G": out["G"] + out["B"], "B": np.zeros_like(rho), "E": 0.5 * rho})

    rng = np.random.default_rng(19)
    inst = random_noncommuting_shc(7)
    rep = verify_progressive(Leaky(inst), EXACT_MEASURE, 0.0, inst, [(frozenset(), 0)], rng)
    assert not rep.ok


# ---------------------------------------------------------------------------
# the geometric sum


def test_geometric_sum_examples():
    assert geometric_sum(1.0, 1.0, 1) == 1.0
    assert geometric_sum_check(1.0, 1.0, 1)
    assert geometric_sum(0.5, 1.0, 10_000) <= 2
    for th in np.arange(1, 11) / 10:
        for sg in np.arange(1, 11) / 10:
            for t in range(1, 101):
                assert geometric_sum_check(float(th), float(sg), t)
    with pytest.raises(ValueError):
        geometric_sum_check(0.0, 1.0, 1)


# ---------------------------------------------------------------------------
# hygiene


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_channels_trace_preserving_and_positive(seed):
    rng = np.random.default_rng(seed)
    inst, C, f = random_config(rng)
    rho = random_state_in(inst.kernel_projector(C), rng)
    outs = [
        exact_channel(rho, C, f, inst),
        ProjectiveChannel(inst).apply(rho, C, f),
        zeno_channel(rho, C, f, 0.2, 5, inst),
        zeno_channel(rho, C, f, 0.2, 5, inst, "implementable", 3),
        kernel_projection_ideal(rho, C | {f}, inst),
        kernel_projection_approx(rho, C | {f}, 4, inst),
        weak_measure(rho, f, 0.3, inst),
    ]
    for out in outs:
        assert out.total_trace() == pytest.approx(1, abs=1e-9)
        for b in out.branches.values():
            assert linalg.min_eigenvalue(b) >= -1e-9
