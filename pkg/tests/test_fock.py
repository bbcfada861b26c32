import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rsbcodes.fock import (
    FockSpace,
    annihilation,
    beam_splitter,
    block_product,
    bs_generators,
    creation,
    exp_conserving,
    fock_state,
    is_hermitian,
    is_unitary,
    matrix_exponential,
    number_operator,
    partial_trace,
    random_density_matrix,
    rotation,
    tensor,
    total_number_operator,
)

angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


def test_space_dimension_and_index_order():
    sp = FockSpace(3, 4)
    assert sp.dim == 64
    assert sp.index((1, 2, 3)) == 1 * 16 + 2 * 4 + 3
    assert sp.occupations(27) == (1, 2, 3)
    with pytest.raises(ValueError):
        FockSpace(0, 3)
    with pytest.raises(ValueError):
        sp.index((4, 0, 0))


def test_annihilation_examples():
    sp = FockSpace(1, 6)
    a = annihilation(sp, 0)
    assert np.allclose(a @ fock_state(sp, [1]), fock_state(sp, [0]))
    assert np.allclose(a @ fock_state(sp, [0]), 0)
    assert a[3, 4] == pytest.approx(2.0)
    with pytest.raises(IndexError):
        annihilation(sp, 1)


def test_annihilation_embedded_on_second_mode():
    sp = FockSpace(2, 4)
    a2 = annihilation(sp, 1)
    out = a2 @ fock_state(sp, (2, 3))
    assert np.allclose(out, math.sqrt(3) * fock_state(sp, (2, 2)))


def test_number_operator():
    sp = FockSpace(1, 8)
    n = number_operator(sp, 0)
    assert np.allclose(n @ fock_state(sp, [0]), 0)
    assert np.allclose(n @ fock_state(sp, [5]), 5 * fock_state(sp, [5]))
    a = annihilation(sp, 0)
    ada = creation(sp, 0) @ a
    assert np.max(np.abs(ada - n)) <= 1e-14


def test_number_operator_matches_ladder_product_two_modes():
    sp = FockSpace(2, 5)
    for m in range(2):
        a = annihilation(sp, m)
        assert np.max(np.abs(a.conj().T @ a - number_operator(sp, m))) <= 1e-14


def test_generators():
    sp = FockSpace(2, 5)
    gp, gm = bs_generators(sp, 0, 1)
    assert np.allclose(gp @ fock_state(sp, (1, 0)), fock_state(sp, (0, 1)))
    assert np.max(np.abs(gm - gm.conj().T)) == 0
    assert is_hermitian(gp)
    with pytest.raises(ValueError):
        bs_generators(sp, 1, 1)


def test_generator_commutator_against_dense_oracle():
    # truncation only spoils the top-level rows/columns
    sp = FockSpace(2, 6)
    gp, gm = bs_generators(sp, 0, 1)
    comm = gm @ gp - gp @ gm
    target = 2j * (number_operator(sp, 0) - number_operator(sp, 1))
    inner = np.flatnonzero(np.all(np.indices(sp.shape).reshape(2, -1) < sp.cutoff - 1, axis=0))
    sub = np.ix_(inner, inner)
    assert np.max(np.abs(comm[sub] - target[sub])) <= 1e-12


def test_matrix_exponential_examples():
    sp = FockSpace(1, 5)
    n = number_operator(sp, 0)
    assert np.allclose(matrix_exponential(n, 0), np.eye(5))
    assert np.allclose(matrix_exponential(n, 1j * math.pi) @ fock_state(sp, [1]), -fock_state(sp, [1]))
    with pytest.raises(ValueError):
        matrix_exponential(np.array([[np.inf]]))


@pytest.mark.parametrize("sign", [1, -1])
def test_half_swap_heisenberg_action(sign):
    # with G- = i(a1^† a2 - h.c.) the quarter turn sends a1^† to sign * a2^†
    sp = FockSpace(2, 5)
    _, gm = bs_generators(sp, 0, 1)
    u = matrix_exponential(gm, sign * 1j * math.pi / 2)
    lhs = u @ creation(sp, 0) @ u.conj().T
    rhs = sign * creation(sp, 1)
    low = np.flatnonzero(sp.total_numbers() < sp.cutoff - 1)
    assert np.max(np.abs((lhs - rhs)[:, low])) <= 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_hermitian_exponential_against_eigendecomposition(seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    h = (g + g.conj().T) / 2
    w, v = np.linalg.eigh(h)
    oracle = (v * np.exp(0.3 * w)) @ v.conj().T
    got = matrix_exponential(h, 0.3)
    assert np.linalg.norm(got - oracle) <= 1e-12 * np.linalg.norm(oracle)
    assert is_unitary(matrix_exponential(h, 1j * 0.7))


def test_general_exponential_uses_pade():
    m = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert np.allclose(matrix_exponential(m, 2.0), [[1, 2], [0, 1]])


def test_beam_splitter_examples():
    sp = FockSpace(2, 4)
    assert np.allclose(beam_splitter(sp, 0, 1, 0.0, 0.3), np.eye(sp.dim))
    u = beam_splitter(sp, 0, 1, math.pi / 2, 0.0)
    assert np.allclose(u @ fock_state(sp, (1, 0)), -fock_state(sp, (0, 1)))
    with pytest.raises(ValueError):
        beam_splitter(sp, 0, 0, 0.1, 0.1)


def test_beam_splitter_matches_scipy_oracle():
    from scipy.linalg import expm

    sp = FockSpace(2, 4)
    a1, a2 = annihilation(sp, 0), annihilation(sp, 1)
    d, p = 0.7, 0.4
    oracle = expm(d * (a1.conj().T @ a2 * np.exp(-1j * p) - a2.conj().T @ a1 * np.exp(1j * p)))
    assert np.max(np.abs(beam_splitter(sp, 0, 1, d, p) - oracle)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(angles, angles)
def test_beam_splitter_heisenberg_and_inverse(delta, phi):
    sp = FockSpace(2, 5)
    u = beam_splitter(sp, 0, 1, delta, phi)
    assert is_unitary(u)
    a1, a2 = annihilation(sp, 0), annihilation(sp, 1)
    lhs = u.conj().T @ a1 @ u
    rhs = a1 * math.cos(delta) + a2 * np.exp(-1j * phi) * math.sin(delta)
    # photon-number conservation keeps states with total < cutoff - 1 exact
    low = np.flatnonzero(sp.total_numbers() < sp.cutoff - 1)
    assert np.max(np.abs((lhs - rhs)[:, low])) <= 1e-10
    assert np.max(np.abs(u @ beam_splitter(sp, 0, 1, -delta, phi) - np.eye(sp.dim))) <= 1e-10
    ntot = total_number_operator(sp)
    assert np.max(np.abs(u @ ntot - ntot @ u)) <= 1e-10


def test_tensor():
    assert np.allclose(tensor(np.eye(3), np.eye(3)), np.eye(9))
    D, N = 5, 2
    v = tensor(fock_state(FockSpace(1, D), [0]), fock_state(FockSpace(1, D), [N]))
    assert v[N] == 1
    with pytest.raises(TypeError):
        tensor(np.eye(2), np.ones(2))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_tensor_product_action(seed):
    rng = np.random.default_rng(seed)
    A, B = rng.normal(size=(3, 3)), rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    x, y = rng.normal(size=3), rng.normal(size=4)
    assert np.max(np.abs(tensor(A, B) @ tensor(x, y) - tensor(A @ x, B @ y))) <= 1e-13


def test_partial_trace_examples():
    rng = np.random.default_rng(1)
    sp = FockSpace(2, 3)
    rho = random_density_matrix(sp.dim, rng)
    assert np.allclose(partial_trace(rho, sp, [0, 1]), rho)
    r1, r2 = random_density_matrix(3, rng), random_density_matrix(3, rng)
    prod = np.kron(r1, r2)
    assert np.allclose(partial_trace(prod, sp, [0]), r1)
    assert np.allclose(partial_trace(prod, sp, [1]), r2)
    with pytest.raises(ValueError):
        partial_trace(rho, sp, [])
    with pytest.raises(IndexError):
        partial_trace(rho, sp, [2])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_partial_trace_against_double_sum(seed):
    rng = np.random.default_rng(seed)
    sp = FockSpace(2, 3)
    rho = random_density_matrix(sp.dim, rng)
    D = sp.cutoff
    oracle0 = np.zeros((D, D), dtype=complex)
    oracle1 = np.zeros((D, D), dtype=complex)
    for i in range(D):
        for j in range(D):
            for k in range(D):
                oracle0[i, j] += rho[i * D + k, j * D + k]
                oracle1[i, j] += rho[k * D + i, k * D + j]
    assert np.max(np.abs(partial_trace(rho, sp, [0]) - oracle0)) <= 1e-13
    assert np.max(np.abs(partial_trace(rho, sp, [1]) - oracle1)) <= 1e-13
    assert abs(np.trace(oracle0) - 1) <= 1e-12


def test_partial_trace_three_modes_keeps_order():
    rng = np.random.default_rng(3)
    rs = [random_density_matrix(2, rng) for _ in range(3)]
    sp = FockSpace(3, 2)
    rho = np.kron(np.kron(rs[0], rs[1]), rs[2])
    assert np.allclose(partial_trace(rho, sp, [2, 0]), np.kron(rs[0], rs[2]))


def test_rotation_examples():
    sp = FockSpace(1, 9)
    assert np.allclose(rotation(sp, 0, 0), np.eye(9))
    assert np.max(np.abs(rotation(sp, 0, 2 * math.pi) - np.eye(9))) <= 1e-12
    for N in (2, 4, 8):
        assert np.allclose(rotation(sp, 0, math.pi / N) @ fock_state(sp, [N]), -fock_state(sp, [N]))


@settings(max_examples=15, deadline=None)
@given(angles, angles)
def test_blockwise_exponential_matches_dense(delta, phi):
    sp = FockSpace(2, 5)
    gp, gm = bs_generators(sp, 0, 1)
    h = math.cos(phi) * gm + math.sin(phi) * gp
    dense = matrix_exponential(h, 1j * delta)
    assert np.max(np.abs(exp_conserving(h, sp, 1j * delta) - dense)) <= 1e-12
    n0 = number_operator(sp, 0)
    assert np.max(np.abs(block_product(sp, dense, n0, dense.conj().T) - dense @ n0 @ dense.conj().T)) <= 1e-12
