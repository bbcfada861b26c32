"""Truncated Fock-space linear algebra.

States and operators are plain complex numpy arrays. A :class:`FockSpace`
carries the truncation metadata that fixes their shapes. Flat indices are
row-major over modes with mode 0 the slowest index, so ``|n0, n1>`` sits at
``n0 * cutoff + n1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class FockSpace:
    """``modes`` bosonic modes, each truncated to Fock levels ``0..cutoff-1``."""

    modes: int
    cutoff: int

    def __post_init__(self):
        if self.modes < 1 or self.cutoff < 1:
            raise ValueError(f"modes and cutoff must be positive, got {self.modes}, {self.cutoff}")

    @property
    def dim(self) -> int:
        return self.cutoff ** self.modes

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cutoff,) * self.modes

    def check_mode(self, mode: int) -> None:
        if not 0 <= mode < self.modes:
            raise IndexError(f"mode {mode} out of range for {self.modes} modes")

    def index(self, occupations: Sequence[int]) -> int:
        if len(occupations) != self.modes:
            raise ValueError(f"expected {self.modes} occupation numbers, got {len(occupations)}")
        if any(not 0 <= n < self.cutoff for n in occupations):
            raise ValueError(f"occupations {tuple(occupations)} exceed cutoff {self.cutoff}")
        return int(np.ravel_multi_index(tuple(occupations), self.shape))

    def occupations(self, index: int) -> tuple[int, ...]:
        return tuple(int(n) for n in np.unravel_index(index, self.shape))

    def mode_numbers(self, mode: int) -> np.ndarray:
        """Photon number of ``mode`` for every flat basis index."""
        self.check_mode(mode)
        grids = np.indices(self.shape).reshape(self.modes, -1)
        return grids[mode]

    def total_numbers(self) -> np.ndarray:
        return np.indices(self.shape).reshape(self.modes, -1).sum(axis=0)


def fock_state(space: FockSpace, occupations: Sequence[int]) -> np.ndarray:
    psi = np.zeros(space.dim, dtype=complex)
    psi[space.index(occupations)] = 1.0
    return psi


def embed(op: np.ndarray, space: FockSpace, mode: int) -> np.ndarray:
    """Lift a single-mode ``cutoff x cutoff`` operator onto ``mode`` of ``space``."""
    space.check_mode(mode)
    if op.shape != (space.cutoff, space.cutoff):
        raise ValueError(f"single-mode operator must be {space.cutoff}x{space.cutoff}")
    eye = np.eye(space.cutoff)
    factors = [op if m == mode else eye for m in range(space.modes)]
    return reduce(np.kron, factors).astype(complex)


def single_mode_annihilation(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), k=1).astype(complex)


def annihilation(space: FockSpace, mode: int) -> np.ndarray:
    return embed(single_mode_annihilation(space.cutoff), space, mode)


def creation(space: FockSpace, mode: int) -> np.ndarray:
    return annihilation(space, mode).conj().T


def number_operator(space: FockSpace, mode: int) -> np.ndarray:
    return np.diag(space.mode_numbers(mode).astype(complex))


def total_number_operator(space: FockSpace) -> np.ndarray:
    return np.diag(space.total_numbers().astype(complex))


def hop_operator(space: FockSpace, j: int, k: int) -> np.ndarray:
    """``a_j^† a_k`` assembled directly from basis indices (``j != k``)."""
    occ = np.indices(space.shape).reshape(space.modes, -1)
    ok = (occ[k] > 0) & (occ[j] < space.cutoff - 1)
    src = np.flatnonzero(ok)
    moved = occ[:, src].copy()
    moved[k] -= 1
    moved[j] += 1
    dst = np.ravel_multi_index(tuple(moved), space.shape)
    op = np.zeros((space.dim, space.dim), dtype=complex)
    op[dst, src] = np.sqrt(occ[k, src] * (occ[j, src] + 1.0))
    return op


def bs_generators(space: FockSpace, j: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(G+, G-)`` with ``G+ = a_j^† a_k + h.c.`` and ``G- = i(a_j^† a_k - h.c.)``."""
    space.check_mode(j)
    space.check_mode(k)
    if j == k:
        raise ValueError("beam-splitter generators need two distinct modes")
    hop = hop_operator(space, j, k)
    return hop + hop.conj().T, 1j * (hop - hop.conj().T)


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol * max(1.0, np.max(np.abs(a), initial=0.0)))


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])), initial=0.0) <= tol)


def matrix_exponential(h: np.ndarray, scale: complex = 1.0) -> np.ndarray:
    """Return ``exp(scale * h)``.

    Hermitian and anti-Hermitian exponents go through an eigendecomposition,
    which keeps the anti-Hermitian case unitary to machine precision. Anything
    else falls back to scaling-and-squaring with a degree-13 Pade approximant
    (``scipy.linalg.expm``).
    """
    h = np.asarray(h, dtype=complex)
    if not np.all(np.isfinite(h)) or not np.isfinite(scale):
        raise ValueError("matrix exponential of non-finite entries")
    a = scale * h
    if is_hermitian(a):
        w, v = np.linalg.eigh((a + a.conj().T) / 2)
        return (v * np.exp(w)) @ v.conj().T
    b = -1j * a
    if is_hermitian(b):
        w, v = np.linalg.eigh((b + b.conj().T) / 2)
        return (v * np.exp(1j * w)) @ v.conj().T
    return linalg.expm(a)


def beam_splitter(space: FockSpace, j: int, k: int, delta: float, phi: float) -> np.ndarray:
    """Two-mode mixer with ``U^† a_j U = a_j cos(delta) + a_k e^{-i phi} sin(delta)``.

    Equivalently ``U = exp[delta (a_j^† a_k e^{-i phi} - a_k^† a_j e^{i phi})]``.
    """
    space.check_mode(j)
    space.check_mode(k)
    if j == k:
        raise ValueError("beam splitter needs two distinct modes")
    hop = hop_operator(space, j, k) * np.exp(-1j * phi)
    return matrix_exponential(hop - hop.conj().T, delta)


def rotation(space: FockSpace, mode: int, angle: float) -> np.ndarray:
    """Phase-space rotation ``exp(i angle n_mode)``."""
    return np.diag(np.exp(1j * angle * space.mode_numbers(mode)))


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two states or two operators (never one of each)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != b.ndim or a.ndim not in (1, 2):
        raise TypeError("tensor() needs two state vectors or two operators")
    return np.kron(a, b)


def partial_trace(rho: np.ndarray, space: FockSpace, keep: Iterable[int]) -> np.ndarray:
    """Trace out every mode not listed in ``keep``; kept modes stay in ascending order."""
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("keep must name at least one mode")
    for m in keep:
        space.check_mode(m)
    n = space.modes
    t = np.asarray(rho).reshape(space.shape * 2)
    traced = [m for m in range(n) if m not in keep]
    # trace the highest modes first so remaining axis numbers stay valid
    for offset, m in enumerate(sorted(traced, reverse=True)):
        remaining = n - offset
        t = np.trace(t, axis1=m, axis2=m + remaining)
    d = space.cutoff ** len(keep)
    return t.reshape(d, d)


def photon_number_blocks(space: FockSpace) -> dict[int, np.ndarray]:
    """Flat indices grouped by total photon number."""
    totals = space.total_numbers()
    return {int(n): np.flatnonzero(totals == n) for n in np.unique(totals)}


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def check_density_matrix(rho: np.ndarray, tol: float = 1e-10) -> None:
    """Raise ``ValueError`` unless ``rho`` is Hermitian, unit trace and PSD."""
    if not is_hermitian(rho, 1e-12):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError(f"density matrix trace {np.trace(rho).real} != 1")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -tol:
        raise ValueError("density matrix has a negative eigenvalue")


def _blocks_of(space: FockSpace) -> list[np.ndarray]:
    return list(photon_number_blocks(space).values())


def exp_conserving(h: np.ndarray, space: FockSpace, scale: complex = 1.0) -> np.ndarray:
    """``exp(scale * h)`` for ``h`` commuting with the total photon number, one block at a time."""
    out = np.zeros((space.dim, space.dim), dtype=complex)
    for idx in _blocks_of(space):
        sub = np.ix_(idx, idx)
        out[sub] = matrix_exponential(h[sub], scale)
    return out


def block_product(space: FockSpace, *ops: np.ndarray) -> np.ndarray:
    """Matrix product of number-conserving operators evaluated block by block."""
    out = np.zeros((space.dim, space.dim), dtype=complex)
    for idx in _blocks_of(space):
        sub = np.ix_(idx, idx)
        out[sub] = reduce(np.matmul, [op[sub] for op in ops])
    return out
