"""Canonical phase measurements, torus distributions and the dephasing KL entries of dual words."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channels import NoiseParams, combined_channel
from .codes import Code, dual_words, two_mode_binomial
from .fock import FockSpace
from .optrec import optimal_recovery


@dataclass(frozen=True)
class PhaseGrid:
    G: int = 64

    def __post_init__(self):
        if self.G < 2:
            raise ValueError("a phase grid needs at least two points")

    @property
    def angles(self) -> np.ndarray:
        return 2 * math.pi * np.arange(self.G) / self.G

    @property
    def step(self) -> float:
        return 2 * math.pi / self.G

    def resolves(self, N: int) -> bool:
        return self.G >= 8 * N


def phase_state(cutoff: int, phi: float) -> np.ndarray:
    """Truncated canonical phase state ``sum_{n<D} e^{i n phi} |n>`` (unnormalized)."""
    return np.exp(1j * phi * np.arange(cutoff))


def phase_povm_element(cutoff: int, phi: float) -> np.ndarray:
    """``Pi(phi) = |phi><phi| / 2 pi``."""
    v = phase_state(cutoff, phi)
    return np.outer(v, v.conj()) / (2 * math.pi)


@dataclass(frozen=True, eq=False)
class TorusDistribution:
    grid: PhaseGrid
    p: np.ndarray  # density on the grid, p[g1, g2]

    @property
    def measure(self) -> float:
        return self.grid.step ** 2

    @property
    def total(self) -> float:
        return float(self.p.sum() * self.measure)

    def cell_probabilities(self) -> np.ndarray:
        return self.p * self.measure

    def shifted(self, k1: int, k2: int) -> "TorusDistribution":
        return TorusDistribution(self.grid, np.roll(self.p, (k1, k2), axis=(0, 1)))

    def rows(self):
        a = self.grid.angles
        for g1 in range(self.grid.G):
            for g2 in range(self.grid.G):
                yield a[g1], a[g2], self.p[g1, g2]

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["phi1", "phi2", "p"])
            for r in self.rows():
                w.writerow([f"{x:.12g}" for x in r])
        return path


def _amplitude_spectrum(amps: np.ndarray, G: int) -> np.ndarray:
    """``sum_n psi[n1, n2] e^{-i (n1 phi1 + n2 phi2)}`` on the grid, folding levels modulo ``G``."""
    D = amps.shape[0]
    folded = np.zeros((G, G), dtype=complex)
    for n1 in range(D):
        for n2 in range(D):
            folded[n1 % G, n2 % G] += amps[n1, n2]
    return np.fft.fft2(folded)


def joint_phase_distribution(state: np.ndarray, space: FockSpace, grid: PhaseGrid | None = None,
                             frame: np.ndarray | None = None) -> TorusDistribution:
    """``p(phi1, phi2) = <psi| Pi(phi1) (x) Pi(phi2) |psi>`` for a two-mode vector or density matrix.

    ``frame`` is applied as ``frame^† psi`` before measuring, i.e. the
    measurement is made on the modes rotated by ``frame``.
    The result is renormalized so that its grid sum is one.
    """
    if space.modes != 2:
        raise ValueError("joint phase distributions need a two-mode space")
    grid = grid or PhaseGrid()
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        ensemble = [(1.0, state)]
    else:
        w, v = np.linalg.eigh((state + state.conj().T) / 2)
        ensemble = [(float(x), v[:, k]) for k, x in enumerate(w) if x > 1e-14]
    p = np.zeros((grid.G, grid.G))
    for weight, vec in ensemble:
        if frame is not None:
            vec = frame.conj().T @ vec
        spec = _amplitude_spectrum(vec.reshape(space.shape), grid.G)
        p += weight * np.abs(spec) ** 2
    p /= 4 * math.pi ** 2
    total = p.sum() * grid.step ** 2
    if total <= 0:
        raise ValueError("state has no weight on the grid")
    return TorusDistribution(grid, p / total)


def distinguishability(p: TorusDistribution, q: TorusDistribution) -> tuple[float, float]:
    """``(total variation, Bhattacharyya overlap)`` of two distributions on the same grid."""
    if p.grid != q.grid:
        raise ValueError("distributions live on different grids")
    a, b = p.cell_probabilities(), q.cell_probabilities()
    tv = 0.5 * float(np.abs(a - b).sum())
    bc = float(np.sqrt(np.clip(a, 0, None) * np.clip(b, 0, None)).sum())
    return min(tv, 1.0), min(bc, 1.0)


def dual_distributions(code: Code, grid: PhaseGrid | None = None, kraus: np.ndarray | None = None,
                       rotated_frame: bool = True) -> tuple[TorusDistribution, TorusDistribution]:
    """Phase distributions of ``|+_N>, |-_N>`` (optionally after a Kraus operator).

    With ``rotated_frame`` the modes measured are the code's rotated modes.
    """
    frame = code.unitary if rotated_frame else None
    out = []
    for w in dual_words(code):
        v = kraus @ w if kraus is not None else w
        out.append(joint_phase_distribution(v, code.space, grid, frame))
    return out[0], out[1]


def dual_bin_operators(code: Code, grid: PhaseGrid | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Two-outcome POVM from a binned joint phase measurement of the rotated modes.

    A cell votes for ``+`` when the noiseless ``|+_N>`` is at least as likely
    there as ``|-_N>``. Completeness holds when ``G`` is at least the cutoff.
    """
    grid = grid or PhaseGrid()
    plus, minus = dual_distributions(code, grid)
    vote = plus.p >= minus.p
    D = code.space.cutoff
    a = grid.angles
    single = np.exp(1j * np.outer(np.arange(D), a))  # columns are phase states
    vecs = np.einsum("ig,jh->ijgh", single, single).reshape(D * D, grid.G, grid.G)
    scale = grid.step ** 2 / (4 * math.pi ** 2)
    u = code.unitary
    ops = []
    for mask in (vote, ~vote):
        v = vecs[:, mask]
        m = scale * (v @ v.conj().T)
        ops.append(u @ m @ u.conj().T)
    return ops[0], ops[1]


# ---------------------------------------------------------------- KL entries

def _kraus_diagonal(space: FockSpace, theta1: float, theta2: float) -> np.ndarray:
    return np.exp(1j * (theta1 * space.mode_numbers(0) + theta2 * space.mode_numbers(1)))


def dual_entries(code: Code, theta1: float, theta2: float) -> np.ndarray:
    """2x2 matrix ``<i| exp(i A~(theta1, theta2)) |j>`` over the dual words ``(+, -)``.

    The rotated-frame error ``exp(i A~)`` on bare words equals the diagonal
    rotation ``exp(i (theta1 n1 + theta2 n2))`` on the rotated words.
    """
    plus, minus = dual_words(code)
    phases = _kraus_diagonal(code.space, theta1, theta2)
    basis = np.array([plus, minus]).T
    return basis.conj().T @ (phases[:, None] * basis)


def dual_offdiagonal(code: Code, theta1: float, theta2: float) -> complex:
    return complex(dual_entries(code, theta1, theta2)[1, 0])


def dual_diagonal_gap(code: Code, theta1: float, theta2: float) -> float:
    e = dual_entries(code, theta1, theta2)
    return float(abs(e[0, 0] - e[1, 1]))


# ---------------------------------------------------------------- landscape

@dataclass(frozen=True)
class LandscapePoint:
    delta: float
    phi: float
    infidelity: float
    residual: float
    feasibility: float


def default_landscape_axes(N: int, points: int = 17) -> tuple[np.ndarray, np.ndarray]:
    return np.linspace(0, math.pi, points), np.linspace(0, math.pi / N, points)


def infidelity_landscape(N: int, K: int, gamma_t: float, deltas, phis, options=None) -> list[LandscapePoint]:
    """Optimal-recovery entanglement infidelity over ``(delta, phi)`` under symmetric dephasing."""
    if K != 2:
        raise ValueError("the two-mode binomial family is implemented for K=2")
    out = []
    params = NoiseParams.symmetric(gamma=gamma_t)
    channel = None
    for delta in deltas:
        for phi in phis:
            code = two_mode_binomial(N, float(delta), float(phi))
            if channel is None:
                channel = combined_channel(code.space, params)
            res = optimal_recovery(code, channel, options)
            out.append(LandscapePoint(float(delta), float(phi), 1.0 - res.fidelity,
                                      res.optimality_residual, res.feasibility_defect))
    return out


def landscape_argmin(points: list[LandscapePoint]) -> LandscapePoint:
    return min(points, key=lambda p: p.infidelity)
