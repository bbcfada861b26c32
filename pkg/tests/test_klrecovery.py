import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rsbcodes.channels import NoiseParams, combined_channel, identity_channel, loss_channel, rotated_channel
from rsbcodes.codes import logical_operators, projector, trivial_code, two_mode_binomial
from rsbcodes.fock import (
    FockSpace,
    beam_splitter,
    creation,
    annihilation,
    matrix_exponential,
    number_operator,
    random_density_matrix,
    total_number_operator,
)
from rsbcodes.klrecovery import (
    RecoveryMap,
    bare_binomial,
    channel_consistency_residual,
    complete_to_unitary,
    first_order_dephasing,
    first_order_loss,
    kl_check,
    kl_check_first_order,
    logical_fidelity,
    modular_povm,
    recovery_dephasing_n4,
    recovery_loss,
    recovery_loss_n2,
    recovery_loss_n4,
    syndrome_projector,
    verify_cptp,
)

QUARTER = math.pi / 4


def _setup(N, kind, s, delta=QUARTER, phi=None, seed=3):
    phi = math.pi / (2 * N) if phi is None else phi
    sp = FockSpace(2, 3 * N + 1)
    code = bare_binomial(sp, N)
    u = beam_splitter(sp, 0, 1, delta, phi)
    if kind == "loss":
        ch = rotated_channel(combined_channel(sp, NoiseParams(s, s, 0, 0)), u)
        rec = recovery_loss(sp, N, delta, s, s)
        ops = first_order_loss(sp, delta, s, s, N)
    else:
        ch = rotated_channel(combined_channel(sp, NoiseParams(0, 0, s, s)), u)
        rec = recovery_dephasing_n4(sp, delta, phi, s, s)
        ops = first_order_dephasing(sp, delta, phi, s, s, N)
    rho_l = random_density_matrix(2, np.random.default_rng(seed), 1)
    return sp, code, ch, rec, ops, rho_l


def test_modular_povm():
    sp = FockSpace(1, 7)
    assert len(modular_povm(sp, 0, 1)) == 1
    assert np.allclose(modular_povm(sp, 0, 1)[0], np.eye(7))
    p0, p1 = modular_povm(sp, 0, 2)
    assert list(np.flatnonzero(np.diag(p0))) == [0, 2, 4, 6]
    for N in (2, 3, 4):
        ps = modular_povm(sp, 0, N)
        assert np.array_equal(sum(ps), np.eye(7))
        for i in range(N):
            for j in range(i + 1, N):
                assert not np.any(ps[i] @ ps[j])
    with pytest.raises(ValueError):
        modular_povm(sp, 0, 8)


def test_first_order_loss_coefficients():
    sp = FockSpace(2, 7)
    k1, k2 = 3e-4, 1e-4
    ops = first_order_loss(sp, 0.0, k1, k2)
    assert np.allclose(ops.m0, 0.5 * (k1 * number_operator(sp, 0) + k2 * number_operator(sp, 1)))
    ops = first_order_loss(sp, QUARTER, k1, k2)
    half = (k1 + k2) / 2
    assert np.allclose(ops.m0, 0.5 * half * total_number_operator(sp))
    assert np.allclose(ops.jumps[0][1], math.sqrt(half) * annihilation(sp, 0))
    assert [lab for lab, _ in ops.jumps] == [(1, 0), (0, 1)]
    assert np.max(np.abs(ops.m0 - ops.m0.conj().T)) <= 1e-12


def test_first_order_dephasing_structure():
    sp = FockSpace(2, 13)
    ops = first_order_dephasing(sp, 0.0, 0.3, 1e-3, 2e-3, 4)
    assert not np.any(ops.jumps[2][1]) and not np.any(ops.jumps[3][1])
    assert [lab for lab, _ in ops.jumps][2:] == [(1, 3), (3, 1)]
    delta, phi, g1, g2 = QUARTER, 0.2, 1e-3, 2e-3
    m4 = first_order_dephasing(sp, delta, phi, g1, g2, 4).m0
    m2 = first_order_dephasing(sp, delta, phi, g1, g2, 2).m0
    hop = creation(sp, 0) @ annihilation(sp, 1)
    pair = np.exp(-2j * phi) * hop @ hop
    sc = math.sin(delta) * math.cos(delta)
    assert np.allclose(m2 - m4, 0.5 * (g1 + g2) * sc * sc * (pair + pair.conj().T), atol=1e-15)
    assert np.max(np.abs(m2 - m2.conj().T)) <= 1e-12
    with pytest.raises(ValueError):
        first_order_dephasing(sp, delta, phi, g1, g2, 3)


@pytest.mark.parametrize("N,kind", [(2, "loss"), (4, "loss"), (4, "dephasing")])
def test_channel_consistency_is_second_order(N, kind):
    r = [channel_consistency_residual(c, ch, ops, rl)
         for _, c, ch, _, ops, rl in (_setup(N, kind, s) for s in (1e-4, 1e-5))]
    assert 80 <= r[0] / r[1] <= 120


def test_channel_consistency_absolute_symmetric_loss():
    _, code, ch, _, ops, rho_l = _setup(2, "loss", 1e-4)
    assert channel_consistency_residual(code, ch, ops, rho_l) <= 1e-7


def test_kl_loss_n2_examples():
    sp = FockSpace(2, 7)
    code = bare_binomial(sp, 2)
    k1, k2 = 2e-3, 5e-4
    ops = first_order_loss(sp, 0.0, k1, k2, 2)
    p = projector(code)
    a_op = k1 * number_operator(sp, 0) + k2 * number_operator(sp, 1)
    assert np.max(np.abs(p @ a_op @ p - (2 * k1 + 2 * k2) * p)) <= 1e-12
    m1, m2 = ops.jumps[0][1], ops.jumps[1][1]
    assert np.max(np.abs(p @ m1.conj().T @ m2 @ p)) <= 1e-15
    assert kl_check_first_order(code, ops).deviation <= 1e-12


@pytest.mark.parametrize("N", [2, 4])
@pytest.mark.parametrize("delta", np.linspace(0, math.pi, 5))
def test_kl_loss_any_delta(N, delta):
    sp = FockSpace(2, 3 * N + 1)
    rep = kl_check_first_order(bare_binomial(sp, N), first_order_loss(sp, delta, 1e-3, 3e-3, N))
    assert rep.satisfied


def test_kl_dephasing_contrast():
    sp4 = FockSpace(2, 13)
    ops4 = first_order_dephasing(sp4, QUARTER, math.pi / 8, 1e-3, 1e-3, 4)
    assert kl_check_first_order(bare_binomial(sp4, 4), ops4).satisfied
    sp2 = FockSpace(2, 7)
    ops2 = first_order_dephasing(sp2, QUARTER, math.pi / 4, 1e-3, 1e-3, 2)
    rep = kl_check_first_order(bare_binomial(sp2, 2), ops2)
    m1, m2 = ops2.jumps[2][1], ops2.jumps[3][1]
    assert not rep.satisfied
    assert rep.deviation >= 0.1 * np.linalg.norm(m2.conj().T @ m1, 2)


def test_kl_report_fields():
    sp = FockSpace(2, 7)
    code = bare_binomial(sp, 2)
    rep = kl_check(code, [np.eye(sp.dim), annihilation(sp, 0)], labels=["I", "a1"])
    assert np.max(np.abs(rep.lam - rep.lam.conj().T)) <= 1e-12
    doc = json.loads(rep.to_json())
    assert doc["labels"] == ["I", "a1"] and doc["satisfied"] == rep.satisfied
    assert rep.deviation >= 0


def test_complete_to_unitary():
    assert np.allclose(complete_to_unitary([], 4), np.eye(4))
    e = np.eye(5)
    t = (e[0] + e[3]) / math.sqrt(2)
    u = complete_to_unitary([(t, e[4]), (e[1], e[2])], 5)
    assert np.max(np.abs(u @ e[4] - t)) <= 1e-12
    assert np.max(np.abs(u @ e[2] - e[1])) <= 1e-12
    assert np.max(np.abs(u.conj().T @ u - np.eye(5))) <= 1e-12
    assert np.array_equal(u, complete_to_unitary([(t, e[4]), (e[1], e[2])], 5))
    with pytest.raises(ValueError):
        complete_to_unitary([(2 * e[0], e[1])], 5)


def test_verify_cptp():
    sp = FockSpace(2, 7)
    assert verify_cptp(identity_channel(sp)) == 0
    rec = recovery_loss_n2(sp, QUARTER, 1e-3, 1e-3)
    assert verify_cptp(rec) <= 1e-10
    dropped = RecoveryMap(sp, rec.branches[1:])
    assert verify_cptp(dropped) > 0.5


@pytest.mark.parametrize("factory,N", [(recovery_loss_n2, 2), (recovery_loss_n4, 4)])
def test_loss_recovery_branches_are_unitary_times_projector(factory, N):
    sp = FockSpace(2, 3 * N + 1)
    rec = factory(sp, QUARTER, 1e-3, 2e-3)
    assert len(rec.branches) == N * N
    assert verify_cptp(rec) <= 1e-10
    for name, k in rec.branches:
        p = syndrome_projector(sp, N, int(name[0]), int(name[1]))
        assert np.allclose(k @ p, k)
        assert np.max(np.abs(k.conj().T @ k - p)) <= 1e-10


def test_dephasing_recovery_structure():
    sp = FockSpace(2, 13)
    rec = recovery_dephasing_n4(sp, QUARTER, math.pi / 8, 1e-3, 1e-3)
    names = [n for n, _ in rec.branches]
    assert {"00L", "00E", "13", "31"} <= set(names)
    assert len(names) == 17
    assert verify_cptp(rec) <= 1e-10
    with pytest.raises(ValueError):
        recovery_dephasing_n4(sp, 0.3, 0.0, 1e-3, 1e-3)


def _branch_sum(rec, out, names):
    return sum(rec.branch(n) @ out @ rec.branch(n).conj().T for n in names)


@pytest.mark.parametrize("N,no_jump,jump", [(2, ["00"], ["10", "01"]), (4, ["00"], ["30", "03"])])
def test_loss_branch_coefficients(N, no_jump, jump):
    s = 1e-4
    sp, code, ch, rec, _, rho_l = _setup(N, "loss", s)
    w = code.encoder
    rho = w @ rho_l @ w.conj().T
    out = ch(rho)
    g = 2 * s
    x0 = _branch_sum(rec, out, no_jump)
    xj = _branch_sum(rec, out, jump)
    c0 = (1 - np.trace(x0).real) / g
    cj = np.trace(xj).real / g
    assert c0 == pytest.approx(N, rel=0.01)
    assert cj == pytest.approx(N, rel=0.01)
    assert np.max(np.abs(x0 - (1 - c0 * g) * rho)) <= 1e-6
    assert np.max(np.abs(xj - cj * g * rho)) <= 1e-6


def test_dephasing_branch_coefficients():
    s = 1e-4
    sp, code, ch, rec, ops, rho_l = _setup(4, "dephasing", s)
    w = code.encoder
    rho = w @ rho_l @ w.conj().T
    out = ch(rho)
    g = 2 * s
    x0 = _branch_sum(rec, out, ["00L", "00E"])
    xj = _branch_sum(rec, out, ["13", "31"])
    assert (1 - np.trace(x0).real) / g == pytest.approx(10, rel=0.01)
    assert np.trace(xj).real / g == pytest.approx(10, rel=0.01)
    # after U00 alone: rho - 30 (g1 + g2) rho plus the n_tot sandwich term
    pc = projector(code)
    u00 = matrix_exponential(ops.m0 @ pc - pc @ ops.m0)
    p00 = syndrome_projector(sp, 4, 0, 0)
    xi = u00 @ p00 @ out @ p00 @ u00.conj().T
    nt = total_number_operator(sp)
    c = -np.trace(xi - rho - 0.25 * g * nt @ rho @ nt).real / g
    assert c == pytest.approx(30, rel=0.01)


@settings(max_examples=8, deadline=None)
@given(st.floats(1e-5, 1e-3))
def test_loss_recovery_beats_first_order(s):
    _, code, ch, rec, _, _ = _setup(2, "loss", s)
    fe, _ = logical_fidelity(code, lambda r: rec(ch(r)))
    assert 1 - fe <= 20 * s * s


def test_logical_fidelity_examples():
    code = two_mode_binomial(2, 0.3, 0.1)
    assert logical_fidelity(code, lambda r: r) == pytest.approx((1.0, 1.0))
    x_l, _ = logical_operators(code)
    fe, fa = logical_fidelity(code, lambda r: x_l @ r @ x_l.conj().T)
    assert fe == pytest.approx(0.0, abs=1e-12)
    assert fa == pytest.approx(1 / 3)


@pytest.mark.parametrize("kt", [1e-3, 0.05, 0.4])
def test_trivial_code_loss_closed_form(kt):
    code = trivial_code(3)
    fe, fa = logical_fidelity(code, loss_channel(code.space, 0, kt))
    p = 1 - math.exp(-kt)
    oracle = (2 - p + 2 * math.sqrt(1 - p)) / 4
    assert fe == pytest.approx(oracle, abs=1e-12)
    assert fa == pytest.approx((2 * oracle + 1) / 3, abs=1e-12)
