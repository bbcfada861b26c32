"""Logical gates on two-mode codes and the correlated-dephasing correction circuit.

Two-register states are stored as matrices ``psi[i, j]`` with ``i`` indexing
the first code's space and ``j`` the second, so ``(A (x) B) vec(psi)`` is
``A @ psi @ B.T``. Dense four-mode operators are only built on request and
only for small spaces.
"""
from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass

import numpy as np

from .channels import PhaseMixture
from .codes import Code, dual_words
from .fock import bs_generators, exp_conserving, is_unitary
from .phasedist import PhaseGrid, dual_bin_operators

DENSE_CAP = 4096

H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
S = np.diag([1, 1j])
T = np.diag([1, cmath.exp(1j * math.pi / 4)])
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0 + 0j, -1.0])
CZ = np.diag([1.0 + 0j, 1, 1, -1])
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def _require_two_mode(code: Code) -> None:
    if code.space.modes != 2 or code.d != 2:
        raise ValueError("gates are defined for two-mode qubit codes")


def _require_even(*orders: int) -> None:
    for n in orders:
        if n % 2:
            raise ValueError(f"rotation order {n} must be even")


def phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``min_t ||a - e^{it} b||_max``, the deviation up to a global phase."""
    overlap = np.vdot(b, a)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-300 else 1.0
    return float(np.abs(a - phase * b).max())


@dataclass(frozen=True, eq=False)
class GateReport:
    label: str
    logical: np.ndarray
    target: np.ndarray
    leakage: float
    up_to_phase: bool = False

    @property
    def deviation(self) -> float:
        if self.up_to_phase:
            return phase_distance(self.logical, self.target)
        return float(np.abs(self.logical - self.target).max())

    def to_dict(self) -> dict:
        enc = lambda m: [[[float(z.real), float(z.imag)] for z in row] for row in m]
        return {"label": self.label, "logical": enc(self.logical), "target": enc(self.target),
                "deviation": self.deviation, "leakage": self.leakage}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# ---------------------------------------------------------------- single code

def s_gate(code: Code) -> np.ndarray:
    """Self-Kerr phase ``U exp(i pi n_1^2 / (2 N^2)) U^†``."""
    _require_two_mode(code)
    _require_even(code.N)
    n1 = code.space.mode_numbers(0)
    u = code.unitary
    return (u * np.exp(1j * math.pi * n1 ** 2 / (2 * code.N ** 2))) @ u.conj().T


def logical_action(code: Code, op: np.ndarray) -> tuple[np.ndarray, float]:
    """``(W^† op W, ||(I - P) op W||)``."""
    w = code.encoder
    image = op @ w
    inside = w.conj().T @ image
    return inside, float(np.linalg.norm(image - w @ inside, 2))


def s_report(code: Code) -> GateReport:
    logical, leak = logical_action(code, s_gate(code))
    return GateReport("S", logical, S, leak)


# ---------------------------------------------------------------- two codes

def _to_frame(psi: np.ndarray, a: Code, b: Code) -> np.ndarray:
    return a.unitary.conj().T @ psi @ b.unitary.conj()


def _from_frame(psi: np.ndarray, a: Code, b: Code) -> np.ndarray:
    return a.unitary @ psi @ b.unitary.T


def apply_cz(psi: np.ndarray, a: Code, b: Code) -> np.ndarray:
    """Cross-Kerr ``exp(i pi n_1 (x) n_3 / (N M))`` on a two-register state."""
    _require_even(a.N, b.N)
    p = _to_frame(psi, a, b)
    n1 = a.space.mode_numbers(0)
    n3 = b.space.mode_numbers(0)
    p = p * np.exp(1j * math.pi * np.outer(n1, n3) / (a.N * b.N))
    return _from_frame(p, a, b)


def _hop_powers(target: Code, angle: float, top: int) -> list[np.ndarray]:
    """``V^k`` for ``k = 0..top`` with ``V = U_t exp(i angle G-) U_t^†`` in the target space."""
    _, g_minus = bs_generators(target.space, 0, 1)
    u = target.unitary
    v = u @ exp_conserving(g_minus, target.space, 1j * angle) @ u.conj().T
    out = [np.eye(target.space.dim, dtype=complex)]
    for _ in range(top):
        out.append(out[-1] @ v)
    return out


def _mixer_powers(control: Code, target: Code) -> list[np.ndarray]:
    return _hop_powers(target, math.pi / (2 * control.N), int(control.space.mode_numbers(0).max()))


def _controlled(p: np.ndarray, control: Code, powers: list[np.ndarray]) -> np.ndarray:
    u = control.unitary
    p = u.conj().T @ p
    n1 = control.space.mode_numbers(0)
    out = np.empty_like(p)
    for k in np.unique(n1):
        rows = n1 == k
        out[rows] = p[rows] @ powers[k].T
    return u @ out


def apply_controlled_mixer(psi: np.ndarray, control: Code, target: Code, control_first: bool = True) -> np.ndarray:
    """``exp(i pi/(2 N_c) n_c (x) G-_t)`` with ``n_c`` the first rotated mode of the control code.

    ``control_first`` says whether the control is the row register of ``psi``.
    """
    _require_even(control.N, target.N)
    powers = _mixer_powers(control, target)
    if control_first:
        return _controlled(psi, control, powers)
    return _controlled(psi.T, control, powers).T


def _dense_from(apply, a: Code, b: Code) -> np.ndarray:
    n, m = a.space.dim, b.space.dim
    if n * m > DENSE_CAP:
        raise ValueError(f"dense two-code operator of dimension {n * m} exceeds {DENSE_CAP}")
    cols = []
    for k in range(n * m):
        e = np.zeros(n * m, dtype=complex)
        e[k] = 1
        cols.append(apply(e.reshape(n, m)).reshape(-1))
    return np.array(cols).T


def cz_gate(a: Code, b: Code) -> np.ndarray:
    """Dense four-mode ``CZ_{NM}`` (small spaces only)."""
    return _dense_from(lambda p: apply_cz(p, a, b), a, b)


def cx_gate(control: Code, target: Code) -> np.ndarray:
    """Dense four-mode ``CX = exp(i pi/(2N) n_1 (x) G-_34)`` (small spaces only)."""
    _require_even(control.N, target.N)
    powers = _mixer_powers(control, target)
    return _dense_from(lambda p: _controlled(p, control, powers), control, target)


def two_code_action(a: Code, b: Code, apply) -> tuple[np.ndarray, float]:
    """4x4 logical matrix of a two-register map and its leakage out of the product codespace."""
    wa, wb = a.encoder, b.encoder
    logical = np.zeros((4, 4), dtype=complex)
    leak = 0.0
    for i in range(2):
        for j in range(2):
            out = apply(np.outer(wa[:, i], wb[:, j]))
            coeffs = wa.conj().T @ out @ wb.conj()
            logical[:, 2 * i + j] = coeffs.reshape(-1)
            leak = max(leak, float(np.linalg.norm(out - wa @ coeffs @ wb.T)))
    return logical, leak


def cz_report(a: Code, b: Code) -> GateReport:
    logical, leak = two_code_action(a, b, lambda p: apply_cz(p, a, b))
    return GateReport("CZ", logical, CZ, leak)


def cx_report(control: Code, target: Code) -> GateReport:
    logical, leak = two_code_action(control, target, lambda p: apply_controlled_mixer(p, control, target))
    return GateReport("CX", logical, CNOT, leak)


# ---------------------------------------------------------------- correlated dephasing

@dataclass(frozen=True, eq=False)
class CorrectionResult:
    auxiliary: np.ndarray  # logical 2x2 density matrix on the auxiliary code
    data: np.ndarray  # physical density matrix left on the data modes
    auxiliary_physical: np.ndarray
    fidelity: float


def _pure_decomposition(rho: np.ndarray, tol: float = 1e-14):
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    return [(float(p), v[:, k]) for k, p in enumerate(w) if p > tol]


def correlated_ec_circuit(data: Code, aux: Code, mixture: PhaseMixture, rho_logical: np.ndarray) -> CorrectionResult:
    """Encode ``rho`` in ``data``, dephase collectively, then run ``CX_{NL}`` followed by ``CX_{LN}``.

    The auxiliary register starts in ``|0_L>``. Returns the auxiliary logical
    state, the data-register physical state and the fidelity of the
    auxiliary state with ``rho``.
    """
    _require_two_mode(data)
    _require_two_mode(aux)
    _require_even(data.N, aux.N)
    wd, wa = data.encoder, aux.encoder
    n_tot = data.space.total_numbers()
    zero_l = wa[:, 0]
    forward, backward = _mixer_powers(data, aux), _mixer_powers(aux, data)
    rho_aux = np.zeros((aux.space.dim, aux.space.dim), dtype=complex)
    rho_data = np.zeros((data.space.dim, data.space.dim), dtype=complex)
    for p, vec in _pure_decomposition(rho_logical):
        psi0 = wd @ vec
        for angle, weight in zip(mixture.angles, mixture.weights):
            psi = np.exp(1j * angle * n_tot) * psi0
            joint = np.outer(psi, zero_l)
            joint = _controlled(joint, data, forward)
            joint = _controlled(joint.T, aux, backward).T
            rho_aux += p * weight * (joint.T @ joint.conj())
            rho_data += p * weight * (joint @ joint.conj().T)
    logical = wa.conj().T @ rho_aux @ wa
    fid = state_fidelity(logical, rho_logical)
    return CorrectionResult(logical, rho_data, rho_aux, fid)


def state_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``."""
    if rho.shape == (2, 2):
        # qubit closed form; avoids square roots of round-off eigenvalues
        dets = max(np.linalg.det(rho).real, 0.0) * max(np.linalg.det(sigma).real, 0.0)
        return float(np.real(np.trace(rho @ sigma)) + 2 * math.sqrt(dets))
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    root = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    inner = np.linalg.eigvalsh(root @ sigma @ root)
    return float(np.sum(np.sqrt(np.clip(inner, 0, None))) ** 2)


# ---------------------------------------------------------------- teleported gates

@dataclass(frozen=True, eq=False)
class TeleportBranch:
    outcomes: tuple
    probability: float
    state: np.ndarray  # normalized logical state vector of the auxiliary code (idealized model)
    target: np.ndarray

    @property
    def deviation(self) -> float:
        return phase_distance(self.state, self.target)


def _dual_measure(joint: np.ndarray, data: Code) -> list[tuple[float, np.ndarray]]:
    """Project the data register on ``|+_N>, |-_N>``; unnormalized auxiliary vectors."""
    out = []
    for dual in dual_words(data):
        vec = dual.conj() @ joint
        out.append((float(np.vdot(vec, vec).real), vec))
    return out


def _teleport_once(psi_logical: np.ndarray, data: Code, aux: Code, resource: np.ndarray):
    """One CZ gadget: data holds ``psi``, auxiliary holds ``resource``; yields ``(b, p, aux logical)``."""
    joint = np.outer(data.encoder @ psi_logical, aux.encoder @ resource)
    joint = apply_cz(joint, data, aux)
    for b, (p, vec) in enumerate(_dual_measure(joint, data)):
        logical = aux.encoder.conj().T @ vec
        yield b, p, logical / math.sqrt(p) if p > 0 else logical


_RESOURCE = {
    "H": np.array([1, 1], dtype=complex) / math.sqrt(2),
    "T": np.array([1, cmath.exp(1j * math.pi / 4)], dtype=complex) / math.sqrt(2),
}


def teleported_gate(kind: str, data: Code, psi_logical: np.ndarray, aux: Code | None = None) -> list[TeleportBranch]:
    """Gate teleportation through a CZ gadget and an idealized dual-basis readout of the data.

    ``H``: auxiliary ``|+_N>``; branch ``b`` leaves ``X^b H |psi>``.
    ``T``: a teleported ``H`` followed by a gadget with auxiliary ``|T_N>``,
    which alone leaves ``T H`` on ``b = 0`` and ``X T^† H`` on ``b = 1``. The
    first outcome is undone with a logical ``X`` and the second gets the
    Clifford fix-up ``X S X``, so branch ``(b_1, b_2)`` leaves
    ``X^{b_2} T |psi>`` up to a global phase.
    """
    aux = aux or data
    _require_two_mode(data)
    _require_two_mode(aux)
    psi = np.asarray(psi_logical, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    if kind == "H":
        return [TeleportBranch((b,), p, v, np.linalg.matrix_power(X, b) @ H @ psi)
                for b, p, v in _teleport_once(psi, data, aux, _RESOURCE["H"])]
    if kind != "T":
        raise ValueError(f"unknown teleported gate {kind!r}")
    branches = []
    for b1, p1, v1 in _teleport_once(psi, data, aux, _RESOURCE["H"]):
        start = np.linalg.matrix_power(X, b1) @ v1  # logical X undoes the first outcome
        for b2, p2, v2 in _teleport_once(start, aux, aux, _RESOURCE["T"]):
            # b2 = 1 leaves X T^† H start; X S X turns it into X T H start
            if b2:
                v2 = X @ S @ X @ v2
            branches.append(TeleportBranch((b1, b2), p1 * p2, v2, np.linalg.matrix_power(X, b2) @ T @ psi))
    return branches


def teleported_gate_phase_model(kind: str, data: Code, psi_logical: np.ndarray, grid_points: int = 64,
                                aux: Code | None = None) -> float:
    """Average infidelity of a teleported ``H`` when the dual-basis readout is a binned canonical phase measurement.

    Each torus cell is assigned to the dual word with the larger likelihood.
    Only ``kind="H"`` is modelled.
    """
    if kind != "H":
        raise ValueError("the phase-readout model covers the teleported H gadget")
    aux = aux or data
    psi = np.asarray(psi_logical, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    joint = apply_cz(np.outer(data.encoder @ psi, aux.encoder @ _RESOURCE["H"]), data, aux)
    wa = aux.encoder
    fidelity = 0.0
    for b, m in enumerate(dual_bin_operators(data, PhaseGrid(grid_points))):
        rho = joint.T @ m.T @ joint.conj()
        logical = wa.conj().T @ rho @ wa
        target = np.linalg.matrix_power(X, b) @ H @ psi
        fidelity += float(np.real(np.vdot(target, logical @ target)))
    return 1.0 - fidelity


def gate_reports(code: Code, other: Code | None = None) -> list[GateReport]:
    other = other or code
    return [s_report(code), cz_report(code, other), cx_report(code, other)]


def is_gate_unitary(op: np.ndarray, tol: float = 1e-10) -> bool:
    return is_unitary(op, tol)
