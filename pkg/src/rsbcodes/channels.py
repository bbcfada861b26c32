"""Kraus channels: loss, dephasing, their products, rotated frames and correlated dephasing."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from itertools import product

import numpy as np

from .fock import (
    FockSpace,
    bs_generators,
    embed,
    exp_conserving,
    is_hermitian,
    number_operator,
    single_mode_annihilation,
)

DEFAULT_TOL = 1e-10
TAIL_TOL = 1e-12
MAX_MATERIALIZED_KRAUS = 4096


def _is_diagonal(op: np.ndarray) -> bool:
    return not np.any(op - np.diag(np.diag(op)))


@dataclass(frozen=True, eq=False)
class Stage:
    """One Kraus set. Diagonal sets are applied as a Hadamard product with ``sum_k k k^H``."""

    kraus: tuple[np.ndarray, ...]
    diagonal: bool = False

    @classmethod
    def of(cls, kraus) -> "Stage":
        kraus = tuple(np.asarray(k, dtype=complex) for k in kraus)
        return cls(kraus, all(_is_diagonal(k) for k in kraus))

    def __post_init__(self):
        if self.diagonal:
            diags = np.array([np.diag(k) for k in self.kraus])
            object.__setattr__(self, "_mask", diags.T @ diags.conj())

    def apply(self, rho: np.ndarray) -> np.ndarray:
        if self.diagonal:
            return self._mask * rho
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    def adjoint(self, op: np.ndarray) -> np.ndarray:
        if self.diagonal:
            return self._mask.conj() * op
        return sum(k.conj().T @ op @ k for k in self.kraus)


@dataclass(frozen=True, eq=False)
class Channel:
    """Composition of Kraus stages, optionally seen through a unitary frame.

    ``stages`` are listed as written, so the last stage acts first. With a
    frame ``U`` the channel is ``rho -> U^† N(U rho U^†) U``, i.e. every Kraus
    operator becomes ``U^† K U``.
    """

    space: FockSpace
    stages: tuple[Stage, ...]
    frame: np.ndarray | None = None
    tolerance: float = DEFAULT_TOL
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def kraus_count(self) -> int:
        return math.prod(len(s.kraus) for s in self.stages)

    @property
    def diagonal(self) -> bool:
        return self.frame is None and all(s.diagonal for s in self.stages)

    @property
    def kraus(self) -> list[np.ndarray]:
        """Materialized Kraus list ``[K_1 K_2 ... ]`` in stage order."""
        if "kraus" not in self._cache:
            if self.kraus_count > MAX_MATERIALIZED_KRAUS:
                raise MemoryError(f"{self.kraus_count} Kraus operators; use apply() instead")
            ops = [reduce(np.matmul, combo) for combo in product(*(s.kraus for s in self.stages))]
            if self.frame is not None:
                u = self.frame
                ops = [u.conj().T @ k @ u for k in ops]
            self._cache["kraus"] = ops
        return self._cache["kraus"]

    @property
    def completeness_defect(self) -> float:
        """Operator norm of ``I - sum K^† K``."""
        if "defect" not in self._cache:
            eye = np.eye(self.space.dim, dtype=complex)
            gram = eye
            for stage in self.stages:
                gram = stage.adjoint(gram)
            self._cache["defect"] = float(np.linalg.norm(eye - gram, 2))
        return self._cache["defect"]

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return apply(self, rho)


def apply(channel: Channel, rho: np.ndarray) -> np.ndarray:
    """``sum_k K rho K^†``.

    Hermitian inputs get a Hermitian output (rounding-level anti-Hermitian parts
    are symmetrized away); other operators, such as ``|a><b|``, pass through
    linearly.
    """
    out = np.asarray(rho, dtype=complex)
    hermitian = is_hermitian(out, 1e-14)
    u = channel.frame
    if u is not None:
        out = u @ out @ u.conj().T
    for stage in reversed(channel.stages):
        out = stage.apply(out)
    if u is not None:
        out = u.conj().T @ out @ u
    return (out + out.conj().T) / 2 if hermitian else out


def compose(*channels: Channel, label: str = "") -> Channel:
    """``channels[0] o channels[1] o ...`` for frameless channels on a common space."""
    space = channels[0].space
    if any(c.space != space or c.frame is not None for c in channels):
        raise ValueError("compose() needs frameless channels on one space")
    stages = tuple(s for c in channels for s in c.stages)
    return Channel(space, stages, tolerance=max(c.tolerance for c in channels), label=label)


def identity_channel(space: FockSpace) -> Channel:
    return Channel(space, (Stage.of([np.eye(space.dim)]),), label="identity")


def _check_strength(x: float, name: str) -> None:
    if not np.isfinite(x) or x < 0:
        raise ValueError(f"{name} must be a finite non-negative number, got {x}")


def loss_kraus(cutoff: int, kappa_t: float, max_jumps: int | None = None) -> list[np.ndarray]:
    """Single-mode ``L_p = sqrt((1-e^{-kt})^p / p!) e^{-kt n / 2} a^p``."""
    _check_strength(kappa_t, "kappa t")
    max_jumps = cutoff - 1 if max_jumps is None else max_jumps
    if kappa_t == 0:
        return [np.eye(cutoff, dtype=complex)]
    a = single_mode_annihilation(cutoff)
    damp = np.diag(np.exp(-0.5 * kappa_t * np.arange(cutoff)))
    lam = -math.expm1(-kappa_t)
    ops, ap = [], np.eye(cutoff, dtype=complex)
    for p in range(max_jumps + 1):
        ops.append(math.sqrt(lam ** p / math.factorial(p)) * damp @ ap)
        ap = ap @ a
    return ops


def dephasing_order(gamma_t: float, n_max: int, tol: float = TAIL_TOL) -> int:
    """Smallest ``r`` with ``x^{r+1}/(r+1)! e^{-x} <= tol`` for ``x = gamma_t n_max^2``."""
    x = gamma_t * n_max ** 2
    r, term = 0, x * math.exp(-x)
    while term > tol:
        r += 1
        term *= x / (r + 1)
    return r


def dephasing_kraus(cutoff: int, gamma_t: float, max_r: int | None = None) -> list[np.ndarray]:
    """Single-mode ``D_r = sqrt((gt)^r / r!) e^{-gt n^2 / 2} n^r`` (all diagonal)."""
    _check_strength(gamma_t, "gamma t")
    if gamma_t == 0:
        return [np.eye(cutoff, dtype=complex)]
    max_r = dephasing_order(gamma_t, cutoff - 1) if max_r is None else max_r
    n = np.arange(cutoff, dtype=float)
    ops = [np.diag(np.exp(-0.5 * gamma_t * n ** 2)).astype(complex)]
    with np.errstate(divide="ignore"):
        log_n = np.log(n)
    for r in range(1, max_r + 1):
        # log form avoids overflow of (gt)^r n^{2r} / r! for large r
        logs = 0.5 * (r * math.log(gamma_t) - math.lgamma(r + 1)) - 0.5 * gamma_t * n ** 2 + r * log_n
        ops.append(np.diag(np.exp(logs)).astype(complex))
    return ops


def loss_channel(space: FockSpace, mode: int, kappa_t: float, max_jumps: int | None = None) -> Channel:
    ops = [embed(k, space, mode) for k in loss_kraus(space.cutoff, kappa_t, max_jumps)]
    return Channel(space, (Stage.of(ops),), label=f"loss[{mode}]")


def dephasing_channel(space: FockSpace, mode: int, gamma_t: float, max_r: int | None = None) -> Channel:
    ops = [embed(k, space, mode) for k in dephasing_kraus(space.cutoff, gamma_t, max_r)]
    return Channel(space, (Stage.of(ops),), label=f"dephasing[{mode}]")


@dataclass(frozen=True)
class NoiseParams:
    """Dimensionless strengths ``kappa_i t`` (loss) and ``gamma_i t`` (dephasing) for two modes."""

    kappa1: float = 0.0
    kappa2: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0

    def __post_init__(self):
        for name in ("kappa1", "kappa2", "gamma1", "gamma2"):
            _check_strength(getattr(self, name), name)

    @classmethod
    def symmetric(cls, kappa: float = 0.0, gamma: float = 0.0) -> "NoiseParams":
        return cls(kappa, kappa, gamma, gamma)

    @property
    def loss_only(self) -> bool:
        return self.gamma1 == 0 and self.gamma2 == 0

    @property
    def dephasing_only(self) -> bool:
        return self.kappa1 == 0 and self.kappa2 == 0


def combined_channel(space: FockSpace, params: NoiseParams, max_jumps: int | None = None,
                     max_r: int | None = None) -> Channel:
    """Kraus set ``{L1_p L2_q D1_r D2_s}`` on the first two modes (losses act after dephasing)."""
    if space.modes < 2:
        raise ValueError("combined channel needs two modes")
    stages = []
    for mode, kt in ((0, params.kappa1), (1, params.kappa2)):
        if kt > 0:
            stages.append(loss_channel(space, mode, kt, max_jumps).stages[0])
    for mode, gt in ((0, params.gamma1), (1, params.gamma2)):
        if gt > 0:
            stages.append(dephasing_channel(space, mode, gt, max_r).stages[0])
    if not stages:
        return identity_channel(space)
    return Channel(space, tuple(stages), label="combined")


def rotated_channel(channel: Channel, u: np.ndarray) -> Channel:
    """``rho -> U^† N(U rho U^†) U``; every Kraus operator becomes ``U^† K U``."""
    frame = u if channel.frame is None else channel.frame @ u
    return Channel(channel.space, channel.stages, frame, channel.tolerance, f"rotated {channel.label}".strip())


def rotated_a_dephasing_generator(space: FockSpace, theta1: float, theta2: float, delta: float,
                                  phi: float) -> np.ndarray:
    """``A~ = n1 (t1 c^2 + t2 s^2) + n2 (t2 c^2 + t1 s^2) + (t1 - t2) sc (e^{-i phi} a1^† a2 + h.c.)``."""
    c, s = math.cos(delta), math.sin(delta)
    g_plus, g_minus = bs_generators(space, 0, 1)
    hop = (math.cos(phi) * g_plus - math.sin(phi) * g_minus)  # e^{-i phi} a1^† a2 + h.c.
    n1, n2 = number_operator(space, 0), number_operator(space, 1)
    return (n1 * (theta1 * c * c + theta2 * s * s) + n2 * (theta2 * c * c + theta1 * s * s)
            + (theta1 - theta2) * s * c * hop)


def continuous_dephasing_kraus(space: FockSpace, theta1: float, theta2: float, delta: float = 0.0,
                               phi: float = 0.0) -> np.ndarray:
    """Rotated random-rotation Kraus operator ``exp(i A~(theta1, theta2))``."""
    return exp_conserving(rotated_a_dephasing_generator(space, theta1, theta2, delta, phi), space, 1j)


@dataclass(frozen=True)
class PhaseMixture:
    """Discrete distribution of common rotation angles."""

    angles: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.angles) != len(self.weights) or not self.angles:
            raise ValueError("angles and weights must be non-empty and of equal length")
        w = np.asarray(self.weights)
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("weights must be non-negative and sum to one")

    @classmethod
    def point(cls, angle: float = 0.0) -> "PhaseMixture":
        return cls((float(angle),), (1.0,))

    @classmethod
    def gaussian(cls, sigma: float, nodes: int = 41, rule: str = "hermite") -> "PhaseMixture":
        """Zero-mean normal angle distribution with standard deviation ``sigma``."""
        if sigma < 0:
            raise ValueError("sigma must be non-negative")
        if sigma == 0:
            return cls.point()
        if rule == "hermite":
            x, w = np.polynomial.hermite.hermgauss(nodes)
            angles, weights = math.sqrt(2) * sigma * x, w / math.sqrt(math.pi)
        elif rule == "uniform":
            angles = np.linspace(-6 * sigma, 6 * sigma, nodes)
            weights = np.exp(-angles ** 2 / (2 * sigma ** 2))
        else:
            raise ValueError(f"unknown quadrature rule {rule!r}")
        weights = weights / weights.sum()
        return cls(tuple(float(a) for a in angles), tuple(float(p) for p in weights))


def correlated_dephasing(space: FockSpace, mixture: PhaseMixture, modes=(0, 1)) -> Channel:
    """Kraus ``sqrt(p_k) exp(i phi_k (n_1 + n_2))`` over the listed modes."""
    ntot = sum(space.mode_numbers(m) for m in modes)
    ops = [math.sqrt(p) * np.diag(np.exp(1j * a * ntot)) for a, p in zip(mixture.angles, mixture.weights)]
    return Channel(space, (Stage.of(ops),), label="correlated dephasing")


def total_number_blocks_preserved(channel: Channel, rho: np.ndarray, tol: float = 1e-12) -> bool:
    """True if ``channel`` maps block-diagonal (in total photon number) inputs to block-diagonal outputs."""
    totals = channel.space.total_numbers()
    off = totals[:, None] != totals[None, :]
    out = apply(channel, np.where(off, 0, rho))
    return bool(np.abs(out[off]).max(initial=0.0) <= tol)


__all__ = [
    "Channel",
    "NoiseParams",
    "PhaseMixture",
    "Stage",
    "apply",
    "combined_channel",
    "compose",
    "continuous_dephasing_kraus",
    "correlated_dephasing",
    "dephasing_channel",
    "dephasing_kraus",
    "dephasing_order",
    "identity_channel",
    "loss_channel",
    "loss_kraus",
    "rotated_a_dephasing_generator",
    "rotated_channel",
]
