"""Knill-Laflamme analysis, first-order error operators and syndrome-based recovery maps."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .codes import Code, projector, two_mode_binomial
from .fock import (
    FockSpace,
    annihilation,
    creation,
    fock_state,
    matrix_exponential,
    number_operator,
    tensor,
)


@dataclass(frozen=True, eq=False)
class KLReport:
    labels: tuple[str, ...]
    lam: np.ndarray
    deviation: float
    tolerance: float
    pairs: tuple[tuple[int, int], ...] = ()
    worst_pair: tuple[int, int] | None = None

    @property
    def satisfied(self) -> bool:
        return self.deviation <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "lambda": [[[float(z.real), float(z.imag)] for z in row] for row in self.lam],
            "deviation": self.deviation,
            "tolerance": self.tolerance,
            "satisfied": self.satisfied,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True, eq=False)
class FirstOrderOps:
    """Surviving first-order part of a weak channel: ``rho - {M0, rho} + sum_j K_j rho K_j^†``.

    ``jumps`` lists the individual error operators with their modular syndromes
    (used for the KL check). ``kraus_terms`` holds the operators entering the
    sandwich terms; it differs from ``jumps`` when several jumps come from one
    coherent term of the channel.
    """

    m0: np.ndarray
    jumps: tuple[tuple[tuple[int, int], np.ndarray], ...]
    kraus_terms: tuple[np.ndarray, ...]
    N: int

    def error_set(self) -> tuple[list[np.ndarray], list[str], list[tuple[int, int]]]:
        """Errors ``[I, M0, jumps...]`` and the pairs that enter at first order.

        First order means every pair among ``{I} + jumps`` plus ``(I, M0)``.
        """
        eye = np.eye(self.m0.shape[0], dtype=complex)
        errors = [eye, self.m0] + [op for _, op in self.jumps]
        labels = ["I", "M0"] + [f"J{i + 1}[{l},{m}]" for i, ((l, m), _) in enumerate(self.jumps)]
        basic = [0] + list(range(2, len(errors)))
        pairs = [(0, 1)] + list(combinations_with_replacement(basic, 2))
        return errors, labels, pairs

    def superoperator(self, rho: np.ndarray) -> np.ndarray:
        out = rho - (self.m0 @ rho + rho @ self.m0)
        for k in self.kraus_terms:
            out = out + k @ rho @ k.conj().T
        return out


@dataclass(frozen=True, eq=False)
class RecoveryMap:
    space: FockSpace
    branches: tuple[tuple[str, np.ndarray], ...]
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def kraus(self) -> list[np.ndarray]:
        return [op for _, op in self.branches]

    def branch(self, name: str) -> np.ndarray:
        for lab, op in self.branches:
            if lab == name:
                return op
        raise KeyError(name)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.kraus)


def modular_povm(space: FockSpace, mode: int, N: int) -> list[np.ndarray]:
    """Projectors ``P_l = sum_n |Nn + l><Nn + l|`` on ``mode``, ``l = 0..N-1``."""
    if not 1 <= N <= space.cutoff:
        raise ValueError(f"modulus {N} must lie in 1..cutoff")
    n = space.mode_numbers(mode)
    return [np.diag((n % N == l).astype(complex)) for l in range(N)]


def syndrome_projector(space: FockSpace, N: int, l: int, m: int) -> np.ndarray:
    n1, n2 = space.mode_numbers(0), space.mode_numbers(1)
    return np.diag(((n1 % N == l) & (n2 % N == m)).astype(complex))


def modular_measurement(space: FockSpace, N: int, rho: np.ndarray) -> np.ndarray:
    """Non-selective two-mode modular number measurement ``sum_lm P_lm rho P_lm``."""
    n1, n2 = space.mode_numbers(0), space.mode_numbers(1)
    key = (n1 % N) * N + n2 % N
    return np.where(key[:, None] == key[None, :], rho, 0)


def _rotation_weights(delta: float) -> tuple[float, float]:
    return math.cos(delta) ** 2, math.sin(delta) ** 2


def first_order_loss(space: FockSpace, delta: float, kappa1: float, kappa2: float, N: int = 2) -> FirstOrderOps:
    """``M0 = (A' n1 + B' n2) / 2``, ``M1 = sqrt(A') a1``, ``M2 = sqrt(B') a2`` with
    ``A' = k1 c^2 + k2 s^2`` and ``B' = k2 c^2 + k1 s^2``."""
    c2, s2 = _rotation_weights(delta)
    a_coef = kappa1 * c2 + kappa2 * s2
    b_coef = kappa2 * c2 + kappa1 * s2
    m0 = 0.5 * (a_coef * number_operator(space, 0) + b_coef * number_operator(space, 1))
    m1 = math.sqrt(a_coef) * annihilation(space, 0)
    m2 = math.sqrt(b_coef) * annihilation(space, 1)
    jumps = (((N - 1, 0), m1), ((0, N - 1), m2))
    return FirstOrderOps(m0, jumps, (m1, m2), N)


def first_order_dephasing(space: FockSpace, delta: float, phi: float, gamma1: float, gamma2: float,
                          N: int) -> FirstOrderOps:
    """First-order dephasing operators in the de-rotated frame.

    ``M0`` carries the no-jump anticommutator terms (the ``(a1^† a2)^2`` pair
    only for ``N = 2``); jumps are ``sqrt(g1) X1``, ``sqrt(g2) X2`` with
    ``X1 = n1 c^2 + n2 s^2``, ``X2 = n2 c^2 + n1 s^2`` and the exchange errors
    ``sqrt(g1 + g2) sc e^{-i phi} a1^† a2`` and its partner.
    """
    if N < 2 or N % 2:
        raise ValueError("N must be a positive even integer")
    c2, s2 = _rotation_weights(delta)
    sc = math.sin(delta) * math.cos(delta)
    n1, n2 = number_operator(space, 0), number_operator(space, 1)
    x1 = n1 * c2 + n2 * s2
    x2 = n2 * c2 + n1 * s2
    hop12 = creation(space, 0) @ annihilation(space, 1)
    hop21 = hop12.conj().T
    g = gamma1 + gamma2
    m0 = 0.5 * (gamma1 * x1 @ x1 + gamma2 * x2 @ x2)
    m0 = m0 + 0.5 * g * sc * sc * (hop12 @ hop21 + hop21 @ hop12)
    if N == 2:
        pair = np.exp(-2j * phi) * hop12 @ hop12
        m0 = m0 + 0.5 * g * sc * sc * (pair + pair.conj().T)
    d1, d2 = math.sqrt(gamma1) * x1, math.sqrt(gamma2) * x2
    m1 = math.sqrt(g) * sc * np.exp(-1j * phi) * hop12
    m2 = math.sqrt(g) * sc * np.exp(1j * phi) * hop21
    jumps = (((0, 0), d1), ((0, 0), d2), ((1, N - 1), m1), ((N - 1, 1), m2))
    return FirstOrderOps(m0, jumps, (d1, d2, m1 + m2), N)


def kl_check(code: Code, errors, tol: float = 1e-10, labels=None, pairs=None) -> KLReport:
    """Knill-Laflamme matrix ``lam_ij = tr(P E_i^† E_j P) / d`` and the worst deviation
    ``|| P E_i^† E_j P - lam_ij P ||`` over ``pairs`` (default: all pairs)."""
    w = code.encoder
    d = code.d
    errors = [np.asarray(e) for e in errors]
    images = [e @ w for e in errors]
    n = len(errors)
    labels = tuple(labels) if labels is not None else tuple(f"E{i}" for i in range(n))
    pairs = tuple(pairs) if pairs is not None else tuple((i, j) for i in range(n) for j in range(n))
    lam = np.zeros((n, n), dtype=complex)
    deviation, worst = 0.0, None
    for i in range(n):
        for j in range(n):
            g = images[i].conj().T @ images[j]
            lam[i, j] = np.trace(g) / d
            if (i, j) in pairs or (j, i) in pairs:
                dev = float(np.linalg.norm(g - lam[i, j] * np.eye(d), 2))
                if dev > deviation:
                    deviation, worst = dev, (i, j)
    return KLReport(labels, lam, deviation, tol, pairs, worst)


def kl_check_first_order(code: Code, ops: FirstOrderOps, tol: float = 1e-10) -> KLReport:
    errors, labels, pairs = ops.error_set()
    return kl_check(code, errors, tol, labels, pairs)


def _orthonormal(vectors: list[np.ndarray], tol: float = 1e-10) -> bool:
    if not vectors:
        return True
    m = np.array(vectors).T
    return bool(np.abs(m.conj().T @ m - np.eye(len(vectors))).max() <= tol)


def _extend_basis(vectors: list[np.ndarray], dim: int) -> list[np.ndarray]:
    """Gram-Schmidt over standard basis vectors in ascending index order."""
    basis = [v.astype(complex) for v in vectors]
    for i in range(dim):
        if len(basis) == dim:
            break
        e = np.zeros(dim, dtype=complex)
        e[i] = 1.0
        for _ in range(2):  # re-orthogonalize for stability
            for b in basis:
                e = e - (b.conj() @ e) * b
        norm = np.linalg.norm(e)
        if norm > 1e-8:
            basis.append(e / norm)
    return basis[len(vectors):]


def complete_to_unitary(pairs, dim: int) -> np.ndarray:
    """Unitary sending each source ket to its target ket; the complements of the
    two spans are matched in the order produced by :func:`_extend_basis`."""
    targets = [np.asarray(t, dtype=complex) for t, _ in pairs]
    sources = [np.asarray(s, dtype=complex) for _, s in pairs]
    if not (_orthonormal(targets) and _orthonormal(sources)):
        raise ValueError("targets and sources must each be orthonormal")
    t_full = np.array(targets + _extend_basis(targets, dim)).T
    s_full = np.array(sources + _extend_basis(sources, dim)).T
    return t_full @ s_full.conj().T


def verify_cptp(channel_or_map) -> float:
    """``|| I - sum K^† K ||`` (operator norm)."""
    kraus = channel_or_map.kraus
    dim = kraus[0].shape[1]
    gram = sum(k.conj().T @ k for k in kraus)
    return float(np.linalg.norm(np.eye(dim) - gram, 2))


def bare_binomial(space: FockSpace, N: int) -> Code:
    """Two-mode binomial code with no mixing, in ``space``."""
    return two_mode_binomial(N, 0.0, 0.0, cutoff=space.cutoff)


def _single_mode_unitary(space: FockSpace, N: int) -> np.ndarray:
    """``(|0> + |2N>)/sqrt2 <2N-1| + |N><N-1| + completion`` on one mode."""
    d = space.cutoff
    e = np.eye(d, dtype=complex)
    plus = (e[0] + e[2 * N]) / math.sqrt(2)
    return complete_to_unitary([(plus, e[2 * N - 1]), (e[N], e[N - 1])], d)


def _branches(space: FockSpace, N: int, special: dict) -> tuple[tuple[str, np.ndarray], ...]:
    out = []
    for l in range(N):
        for m in range(N):
            p = syndrome_projector(space, N, l, m)
            ops = special.get((l, m))
            if ops is None:
                out.append((f"{l}{m}", p))
            else:
                out.extend((f"{l}{m}{tag}", u @ p) for tag, u in ops)
    return tuple(out)


def recovery_loss(space: FockSpace, N: int, delta: float, kappa1: float, kappa2: float) -> RecoveryMap:
    """Modular-measurement recovery of the ``K=2`` binomial code against first-order loss."""
    if space.modes != 2 or space.cutoff < 2 * N + 1:
        raise ValueError("needs a two-mode space with cutoff >= 2N+1")
    code = bare_binomial(space, N)
    pc = projector(code)
    m0 = first_order_loss(space, delta, kappa1, kappa2, N).m0
    u00 = matrix_exponential(m0 @ pc - pc @ m0)
    single = _single_mode_unitary(space, N)
    eye = np.eye(space.cutoff)
    special = {
        (0, 0): [("", u00)],
        (N - 1, 0): [("", tensor(single, eye))],
        (0, N - 1): [("", tensor(eye, single))],
    }
    return RecoveryMap(space, _branches(space, N, special), f"loss N={N}")


def recovery_loss_n2(space: FockSpace, delta: float, kappa1: float, kappa2: float) -> RecoveryMap:
    return recovery_loss(space, 2, delta, kappa1, kappa2)


def recovery_loss_n4(space: FockSpace, delta: float, kappa1: float, kappa2: float) -> RecoveryMap:
    return recovery_loss(space, 4, delta, kappa1, kappa2)


def dephasing_error_words(space: FockSpace, N: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """``|E, N>`` and ``|N, E>`` with ``|E> = (|0> - |2N>)/sqrt2``."""
    s = 1 / math.sqrt(2)
    e0 = s * (fock_state(space, (0, N)) - fock_state(space, (2 * N, N)))
    e1 = s * (fock_state(space, (N, 0)) - fock_state(space, (N, 2 * N)))
    return e0, e1


def recovery_dephasing_n4(space: FockSpace, delta: float, phi: float, gamma1: float, gamma2: float) -> RecoveryMap:
    """Recovery of the ``K=2, N=4`` code against first-order dephasing.

    Syndrome ``(0,0)``: ``U00 = exp([M0, P_C])`` followed by ``{P_L, P_E}``
    with ``P_E`` spanning ``|E,4>, |4,E>`` and a correcting unitary on the
    ``P_E`` outcome. Syndromes ``(1,3)`` and ``(3,1)`` undo a photon exchange.
    """
    N = 4
    if not any(abs(delta - t) < 1e-9 for t in (math.pi / 4, 3 * math.pi / 4)):
        raise ValueError("first-order dephasing recovery requires delta = pi/4 or 3pi/4")
    if space.modes != 2 or space.cutoff < 3 * N + 1:
        raise ValueError("needs a two-mode space with cutoff >= 3N+1")
    code = bare_binomial(space, N)
    zero, one = code.words
    pc = projector(code)
    m0 = first_order_dephasing(space, delta, phi, gamma1, gamma2, N).m0
    u00 = matrix_exponential(m0 @ pc - pc @ m0)
    e0, e1 = dephasing_error_words(space, N)
    p_e = np.outer(e0, e0.conj()) + np.outer(e1, e1.conj())
    p_l = np.eye(space.dim) - p_e
    u_e = complete_to_unitary([(one, e1), (zero, e0)], space.dim)

    def ket(*occ):
        return fock_state(space, occ)

    spread = (ket(1, 3) + 3 * ket(9, 3)) / math.sqrt(10)
    u13 = complete_to_unitary([(one, ket(5, 7)), (zero, spread)], space.dim)
    spread31 = (ket(3, 1) + 3 * ket(3, 9)) / math.sqrt(10)
    u31 = complete_to_unitary([(one, spread31), (zero, ket(7, 5))], space.dim)
    special = {
        (0, 0): [("L", p_l @ u00), ("E", u_e @ p_e @ u00)],
        (1, 3): [("", u13)],
        (3, 1): [("", u31)],
    }
    return RecoveryMap(space, _branches(space, N, special), "dephasing N=4")


def logical_channel(code: Code, physical_map) -> np.ndarray:
    """Choi-style array ``L[a, b] = W^† map(|a_N><b_N|) W`` (``d x d`` blocks).

    Maps whose output is already ``d``-dimensional are taken as decoded.
    """
    w = code.encoder
    d = code.d
    out = np.zeros((d, d, d, d), dtype=complex)
    for a in range(d):
        for b in range(d):
            y = physical_map(np.outer(w[:, a], w[:, b].conj()))
            out[a, b] = y if y.shape == (d, d) else w.conj().T @ y @ w
    return out


def logical_fidelity(code: Code, physical_map) -> tuple[float, float]:
    """``(F_e, F_avg)`` of the codespace compression of ``physical_map``."""
    d = code.d
    lc = logical_channel(code, physical_map)
    fe = float(np.real(sum(lc[a, b, a, b] for a in range(d) for b in range(d)))) / d ** 2
    return fe, (d * fe + 1) / (d + 1)


def channel_consistency_residual(code: Code, channel, ops: FirstOrderOps, rho_logical: np.ndarray) -> float:
    """Largest entry of ``M(N~(rho)) - M(first-order(rho))`` with ``M`` the modular measurement."""
    w = code.encoder
    rho = w @ rho_logical @ w.conj().T
    space = code.space
    exact = modular_measurement(space, ops.N, channel(rho))
    approx = modular_measurement(space, ops.N, ops.superoperator(rho))
    return float(np.abs(exact - approx).max())
