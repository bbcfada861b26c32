"""Code families: multimode rotation-symmetric qudit codes and their baselines."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping

import numpy as np

from .fock import (
    FockSpace,
    block_product,
    bs_generators,
    exp_conserving,
    fock_state,
    number_operator,
)

ROTATION_SYMMETRIC = {"two_mode_binomial", "two_mode_general", "multimode_qudit", "single_mode_binomial"}

DENSE_DIM_CAP = 4096

CoefficientTable = dict  # multi-index tuple -> complex amplitude


@dataclass(frozen=True, eq=False)
class Code:
    """Orthonormal logical basis ``words[k] = |k_N>`` plus construction metadata.

    ``mixer`` is the passive linear-optics unitary applied on top of the bare
    Fock-space words; ``unrotated_words`` undoes it.
    """

    space: FockSpace
    words: np.ndarray
    N: int
    family: str
    K: int | None = None
    angles: tuple[float, float] = (0.0, 0.0)
    theta: tuple = ()
    table: CoefficientTable | None = None
    mixer: np.ndarray | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def d(self) -> int:
        return self.words.shape[0]

    @property
    def encoder(self) -> np.ndarray:
        """Isometry ``dim x d`` whose columns are the codewords."""
        return self.words.T

    @property
    def rotation_symmetric(self) -> bool:
        return self.family in ROTATION_SYMMETRIC

    @property
    def unitary(self) -> np.ndarray:
        return np.eye(self.space.dim, dtype=complex) if self.mixer is None else self.mixer

    @property
    def unrotated_words(self) -> np.ndarray:
        return (self.unitary.conj().T @ self.words.T).T

    def rotated_number(self, mode: int) -> np.ndarray:
        """``U n_mode U^†``, the number operator of the encoding mode ``mode``."""
        u = self.unitary
        return block_product(self.space, u, number_operator(self.space, mode), u.conj().T)

    def with_words(self, words: np.ndarray) -> "Code":
        return Code(self.space, words, self.N, self.family, self.K, self.angles, self.theta,
                    self.table, self.mixer, self.notes)


def normalize_table(table: Mapping) -> tuple[CoefficientTable, bool]:
    """Return a unit-norm copy of ``table`` and whether it had to be rescaled."""
    table = {tuple(int(i) for i in key): complex(val) for key, val in table.items()}
    norm = math.sqrt(sum(abs(v) ** 2 for v in table.values()))
    if norm == 0:
        raise ValueError("coefficient table is identically zero")
    if abs(norm - 1) <= 1e-12:
        return table, False
    return {k: v / norm for k, v in table.items()}, True


def multimode_mixer(space: FockSpace, theta) -> np.ndarray:
    """``exp{i sum_{j<k} (theta-_jk G-_jk + theta+_jk G+_jk)}`` for ``theta = [((j, k), t_minus, t_plus), ...]``."""
    gen = np.zeros((space.dim, space.dim), dtype=complex)
    for (j, k), t_minus, t_plus in theta:
        g_plus, g_minus = bs_generators(space, j, k)
        gen += t_minus * g_minus + t_plus * g_plus
    return exp_conserving(gen, space, 1j)


def two_mode_theta(delta: float, phi: float) -> tuple:
    # matches fock.beam_splitter(space, 0, 1, delta, phi)
    return (((0, 1), -delta * math.cos(phi), -delta * math.sin(phi)),)


def _qudit_words(space: FockSpace, d: int, N: int, table: CoefficientTable) -> np.ndarray:
    words = np.zeros((d, space.dim), dtype=complex)
    for k in range(d):
        for idx, f in table.items():
            occ = [(d * idx[(k + i) % d] + (k + i) % d) * N for i in range(d)]
            if max(occ) >= space.cutoff:
                raise ValueError(f"coefficient {idx} needs Fock level {max(occ)} >= cutoff {space.cutoff}")
            words[k] += f * fock_state(space, occ)
    return words


def _apply_mixer(words: np.ndarray, mixer: np.ndarray | None) -> np.ndarray:
    return words if mixer is None else (mixer @ words.T).T


def multimode_qudit(d: int, N: int, table: Mapping, theta=(), cutoff: int | None = None) -> Code:
    """Qudit codewords on ``d`` modes; word ``k`` has mode-``j`` support on ``(d n + (k+j mod d)) N``.

    ``table`` maps ``(n_0, ..., n_{d-1})`` to amplitudes; the label ``n_j``
    follows the residue class ``j`` as it cycles through the modes.
    """
    if N < 2 or N % 2:
        raise ValueError("rotation order N must be a positive even integer")
    if d < 2:
        raise ValueError("qudit dimension must be at least 2")
    table, rescaled = normalize_table(table)
    if any(len(k) != d for k in table):
        raise ValueError(f"table keys must have length {d}")
    if cutoff is None:
        # the mixer can pile every photon into one mode; the half-swaps in
        # logical_operators() need room for any two modes' photons
        levels = [sorted(d * n + i for i, n in enumerate(key)) for key in table]
        cutoff = max(sum(lv) if theta else sum(lv[-2:]) for lv in levels) * N + 1
    space = FockSpace(d, cutoff)
    if space.dim > DENSE_DIM_CAP:
        raise ValueError(f"dense dimension {space.dim} exceeds {DENSE_DIM_CAP}; use a smaller table or cutoff")
    notes = ()
    if rescaled:
        warnings.warn("coefficient table renormalized", stacklevel=2)
        notes = ("coefficient table renormalized",)
    mixer = multimode_mixer(space, theta) if theta else None
    words = _apply_mixer(_qudit_words(space, d, N, table), mixer)
    return Code(space, words, N, "multimode_qudit", theta=tuple(theta), table=table, mixer=mixer, notes=notes)


def two_mode_general(N: int, table: Mapping, delta: float = 0.0, phi: float = 0.0,
                     cutoff: int | None = None, family: str = "two_mode_general") -> Code:
    """``|0_N> = U sum f_mn |2mN, (2n+1)N>``, ``|1_N> = U sum f_mn |(2n+1)N, 2mN>``."""
    if N < 2 or N % 2:
        raise ValueError("rotation order N must be a positive even integer")
    table, rescaled = normalize_table(table)
    if cutoff is None:
        cutoff = max(2 * m + 2 * n + 1 for m, n in table) * N + 1
    space = FockSpace(2, cutoff)
    notes = ()
    if rescaled:
        warnings.warn("coefficient table renormalized", stacklevel=2)
        notes = ("coefficient table renormalized",)
    theta = two_mode_theta(delta, phi)
    mixer = multimode_mixer(space, theta)
    words = _apply_mixer(_qudit_words(space, 2, N, table), mixer)
    return Code(space, words, N, family, angles=(delta, phi), theta=theta, table=table,
                mixer=mixer, notes=notes)


def two_mode_binomial(N: int, delta: float | None = None, phi: float | None = None,
                      cutoff: int | None = None) -> Code:
    """Dual-rail binomial code ``U (|0>+|2N>)/sqrt2 (x) |N>`` and its swap.

    Angles default to the dephasing-optimal preset ``(pi/4, pi/(2N))``.
    """
    if N < 2 or N % 2:
        raise ValueError("rotation order N must be a positive even integer")
    delta = math.pi / 4 if delta is None else delta
    phi = math.pi / (2 * N) if phi is None else phi
    cutoff = 3 * N + 1 if cutoff is None else cutoff
    if cutoff < 2 * N + 1:
        raise ValueError(f"cutoff {cutoff} below 2N+1 = {2 * N + 1}")
    space = FockSpace(2, cutoff)
    s = 1 / math.sqrt(2)
    bare = np.array([
        s * (fock_state(space, (0, N)) + fock_state(space, (2 * N, N))),
        s * (fock_state(space, (N, 0)) + fock_state(space, (N, 2 * N))),
    ])
    theta = two_mode_theta(delta, phi)
    mixer = multimode_mixer(space, theta)
    return Code(space, _apply_mixer(bare, mixer), N, "two_mode_binomial", K=2, angles=(delta, phi),
                theta=theta, table={(0, 0): s, (1, 0): s}, mixer=mixer)


def cat_table(N: int, alpha: float, m_max: int, n_max: int) -> CoefficientTable:
    """Truncated cat-like coefficients ``alpha^{2mN + (2n+1)N} / sqrt((2mN)! ((2n+1)N)!)``."""
    table = {}
    for m, n in product(range(m_max + 1), range(n_max + 1)):
        p, q = 2 * m * N, (2 * n + 1) * N
        table[(m, n)] = alpha ** (p + q) / math.sqrt(math.factorial(p) * math.factorial(q))
    return table


def single_mode_binomial(N: int, K: int = 2, cutoff: int | None = None) -> Code:
    """Single-mode binomial code with spacing ``N``; ``K=2`` gives ``(|0>+|2N>)/sqrt2, |N>``."""
    if K < 1:
        raise ValueError("K must be positive")
    cutoff = K * N + 1 if cutoff is None else cutoff
    if cutoff < K * N + 1:
        raise ValueError(f"cutoff {cutoff} below KN+1 = {K * N + 1}")
    space = FockSpace(1, cutoff)
    words = np.zeros((2, space.dim), dtype=complex)
    for k in range(K + 1):
        words[k % 2, k * N] = math.sqrt(math.comb(K, k))
    words /= np.linalg.norm(words, axis=1, keepdims=True)
    return Code(space, words, N, "single_mode_binomial", K=K)


def trivial_code(cutoff: int = 2) -> Code:
    """Fock ``|0>, |1>`` encoding used for the break-even reference."""
    space = FockSpace(1, cutoff)
    return Code(space, np.eye(2, space.dim, dtype=complex), 1, "trivial")


def projector(code: Code) -> np.ndarray:
    w = code.encoder
    return w @ w.conj().T


def dual_words(code: Code) -> tuple[np.ndarray, np.ndarray]:
    if code.d != 2:
        raise ValueError("dual words are defined for qubit codes only")
    zero, one = code.words
    return (zero + one) / math.sqrt(2), (zero - one) / math.sqrt(2)


def _codespace_swap(code: Code) -> np.ndarray:
    w = code.encoder
    p = w @ w.conj().T
    return np.eye(code.space.dim) - p + w[:, [1, 0]] @ w.conj().T


def logical_operators(code: Code) -> tuple[np.ndarray, np.ndarray]:
    """Physical ``(X_L, Z_L)``.

    Multimode families use the linear-optics representation:
    ``X_L = U (prod_i exp(-i pi/2 G-_{i,i+1}))^† U^†`` and
    ``Z_L = U exp(i 2 pi n_0 / (N d)) U^†``. Single-mode and trivial codes get
    a codespace swap for ``X_L`` and ``exp(i pi n / N)`` for ``Z_L``.
    """
    space, u = code.space, code.unitary
    if code.family in ("single_mode_binomial", "trivial"):
        z = np.diag(np.exp(1j * math.pi * space.mode_numbers(0) / code.N))
        return _codespace_swap(code), z
    d = code.d
    x = np.eye(space.dim, dtype=complex)
    for i in range(d - 1):
        _, g_minus = bs_generators(space, i, i + 1)
        x = block_product(space, x, exp_conserving(g_minus, space, -1j * math.pi / 2))
    x = block_product(space, u, x.conj().T, u.conj().T)
    z = block_product(space, u, np.diag(np.exp(2j * math.pi * space.mode_numbers(0) / (code.N * d))),
                      u.conj().T)
    return x, z


def restrict(code: Code, op: np.ndarray) -> np.ndarray:
    """Matrix elements ``<i_N| op |j_N>``."""
    w = code.encoder
    return w.conj().T @ op @ w


def code_to_dict(code: Code) -> dict:
    amps = {}
    for k, word in enumerate(code.words):
        nz = np.flatnonzero(word)
        amps[str(k)] = {str(int(i)): [float(word[i].real), float(word[i].imag)] for i in nz}
    table = None
    if code.table is not None:
        table = [[list(key), float(v.real), float(v.imag)] for key, v in code.table.items()]
    return {
        "family": code.family,
        "N": code.N,
        "K": code.K,
        "d": code.d,
        "modes": code.space.modes,
        "cutoff": code.space.cutoff,
        "angles": list(code.angles),
        "theta": [[list(jk), tm, tp] for jk, tm, tp in code.theta],
        "table": table,
        "amplitudes": amps,
    }


def code_from_dict(doc: dict) -> Code:
    space = FockSpace(doc["modes"], doc["cutoff"])
    words = np.zeros((doc["d"], space.dim), dtype=complex)
    for k, entries in doc["amplitudes"].items():
        for i, (re, im) in entries.items():
            words[int(k), int(i)] = complex(re, im)
    theta = tuple((tuple(jk), tm, tp) for jk, tm, tp in doc.get("theta", []))
    table = None
    if doc.get("table") is not None:
        table = {tuple(key): complex(re, im) for key, re, im in doc["table"]}
    mixer = multimode_mixer(space, theta) if theta else None
    return Code(space, words, doc["N"], doc["family"], doc.get("K"), tuple(doc["angles"]), theta,
                table, mixer)


def code_to_json(code: Code) -> str:
    return json.dumps(code_to_dict(code))


def code_from_json(text: str) -> Code:
    return code_from_dict(json.loads(text))
