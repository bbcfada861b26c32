"""Channel-adapted optimal recovery by semidefinite programming.

The recovery ``R`` maps the physical space (dimension ``n``) to the logical
space (dimension ``d``). Its Choi matrix uses the input-slow convention
``X[(i, a), (i', b)] = R(|i><i'|)[a, b]``. The entanglement fidelity of
``R o N o encode`` is ``tr(X C) / d^2`` with
``C[(i, a), (i', b)] = conj(sigma_ab[i, i'])`` and
``sigma_ab = N(|a_N><b_N|)``. The program

    maximize tr(X C) / d^2   subject to  X >= 0,  tr_out X = I_n

is solved through its dual ``min tr Y  s.t.  Y (x) I_d >= C / d^2`` with an
alternating-direction augmented Lagrangian (boundary-point) iteration. Both
iterates are repaired into exactly feasible points at the end, so the
returned duality gap is a certified bound on suboptimality.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.csgraph import connected_components

from .channels import (
    Channel,
    NoiseParams,
    apply,
    combined_channel,
    compose,
    correlated_dephasing,
    dephasing_channel,
    identity_channel,
    loss_channel,
)
from .codes import Code, trivial_code
from .klrecovery import logical_fidelity

log = logging.getLogger(__name__)

DEFAULT_DIM_CAP = 400


class DimensionCapExceeded(ValueError):
    pass


class SolverNotConverged(RuntimeError):
    def __init__(self, message: str, result: "SDPResult"):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True, eq=False)
class ChoiMatrix:
    """``J = sum_xy |x><y| (x) Phi(|x><y|)``: input index slow, output index fast."""

    din: int
    dout: int
    matrix: np.ndarray

    def partial_trace_output(self) -> np.ndarray:
        return np.einsum("iaja->ij", self.matrix.reshape(self.din, self.dout, self.din, self.dout))

    @property
    def feasibility_defect(self) -> float:
        return float(np.linalg.norm(self.partial_trace_output() - np.eye(self.din), 2))

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(_herm(self.matrix)).min())

    def kraus(self, tol: float = 1e-14) -> list[np.ndarray]:
        return choi_to_kraus(self, tol)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        j = self.matrix.reshape(self.din, self.dout, self.din, self.dout)
        # Phi(rho)[a, b] = sum_ij rho[i, j] J[(i, a), (j, b)]
        return np.einsum("ij,iajb->ab", rho, j)


def _herm(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


def _eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian eigendecomposition; retries with the QR-based LAPACK driver
    when divide-and-conquer fails to converge."""
    a = _herm(a)
    try:
        return np.linalg.eigh(a)
    except np.linalg.LinAlgError:
        return linalg.eigh(a, driver="ev")


def kraus_to_choi(kraus, din: int) -> ChoiMatrix:
    dout = kraus[0].shape[0]
    # column i of K is K|i>, so vec over (i, a) is K.T flattened
    vecs = np.array([np.asarray(k).T.reshape(-1) for k in kraus])
    return ChoiMatrix(din, dout, vecs.T @ vecs.conj())


def choi_to_kraus(choi: ChoiMatrix, tol: float = 1e-14) -> list[np.ndarray]:
    w, v = _eigh(choi.matrix)
    ops = []
    for lam, vec in zip(w, v.T):
        if lam > tol * max(1.0, w.max()):
            ops.append(math.sqrt(lam) * vec.reshape(choi.din, choi.dout).T)
    return ops


def _codeword_images(channel, code: Code) -> np.ndarray:
    """``sigma[a, b] = N(|a_N><b_N|)`` as an array ``(d, d, n, n)``."""
    w = code.encoder
    d = code.d
    n = w.shape[0]
    sig = np.zeros((d, d, n, n), dtype=complex)
    for a in range(d):
        for b in range(a, d):
            sig[a, b] = channel(np.outer(w[:, a], w[:, b].conj()))
            if b != a:
                sig[b, a] = sig[a, b].conj().T
    return sig


def channel_choi(channel, code: Code) -> ChoiMatrix:
    """Choi matrix of ``N o encode`` (logical input, physical output); trace ``d``."""
    sig = _codeword_images(channel, code)
    d, _, n, _ = sig.shape
    return ChoiMatrix(d, n, sig.transpose(0, 2, 1, 3).reshape(d * n, d * n))


def fidelity_matrix(sig: np.ndarray) -> np.ndarray:
    """``C[(i, a), (i', b)] = conj(sigma_ab[i, i'])`` from ``sigma`` of shape ``(d, d, n, n)``."""
    d, _, n, _ = sig.shape
    return sig.conj().transpose(2, 0, 3, 1).reshape(n * d, n * d)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iters: int = 20000
    check_every: int = 20
    mu: float = 1.0
    seed: int = 0
    dim_cap: int = DEFAULT_DIM_CAP
    support_tol: float = 1e-13
    feasibility_tol: float = 1e-8
    residual_tol: float = 1e-6


@dataclass(frozen=True, eq=False)
class SDPResult:
    recovery: ChoiMatrix
    fidelity: float
    upper_bound: float
    feasibility_defect: float
    optimality_residual: float
    iterations: int
    converged: bool
    trace: tuple = field(default=(), repr=False)

    @property
    def average_fidelity(self) -> float:
        d = self.recovery.dout
        return (d * self.fidelity + 1) / (d + 1)


@dataclass(frozen=True)
class _Block:
    fidelity: float
    upper: float
    x: np.ndarray
    iters: int
    trace: tuple


def _psd_split(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = _eigh(m)
    pos = (v * np.clip(w, 0, None)) @ v.conj().T
    return pos, pos - m


def _ptrace_out(x: np.ndarray, r: int, d: int) -> np.ndarray:
    return np.einsum("iaja->ij", x.reshape(r, d, r, d))


def _certify(x: np.ndarray, y: np.ndarray, c: np.ndarray, r: int, d: int) -> tuple[float, float, np.ndarray]:
    """Exactly feasible primal value, exactly feasible dual bound, repaired primal."""
    w, v = _eigh(x)
    x = (v * np.clip(w, 0, None)) @ v.conj().T
    pw, pv = _eigh(_ptrace_out(x, r, d))
    if pw.min() <= 0:
        x = np.kron(np.eye(r), np.eye(d) / d)
    else:
        s = np.kron((pv / np.sqrt(pw)) @ pv.conj().T, np.eye(d))
        x = s @ x @ s.conj().T
    primal = float(np.real(np.vdot(c, x)))  # tr(X C) for Hermitian C
    y = _herm(y)
    z = np.kron(y, np.eye(d)) - c
    zw, zv = _eigh(z)
    if zw.min() < 0:
        shift = r * -zw.min()
        neg = (zv * np.clip(-zw, 0, None)) @ zv.conj().T
        alt = d * float(np.real(np.trace(neg)))
        if alt < shift:
            y = y + d * _herm(_ptrace_out(neg, r, d))
        else:
            y = y - zw.min() * np.eye(r)
    return primal, float(np.real(np.trace(y))), x


def _solve_block(c: np.ndarray, r: int, d: int, opts: SolverOptions) -> _Block:
    """Boundary-point iteration on ``min <-C, X>  s.t.  tr_out X = I, X >= 0``."""
    cs = -c
    x = np.kron(np.eye(r), np.eye(d) / d)
    s = np.zeros_like(c)
    b = np.eye(r)
    mu = mu0 = opts.mu * max(1.0, float(np.abs(c).max()))
    trace = []
    best = None
    it = 0
    for it in range(1, opts.max_iters + 1):
        # y-update: A A^* = d I
        y = -(mu * (_ptrace_out(x, r, d) - b) + _ptrace_out(s - cs, r, d)) / d
        v = cs - np.kron(y, np.eye(d)) - mu * x
        s, neg = _psd_split(v)
        x = neg / mu
        if it % opts.check_every == 0 or it == opts.max_iters:
            pinf = np.linalg.norm(_ptrace_out(x, r, d) - b)
            dinf = np.linalg.norm(cs - np.kron(y, np.eye(d)) - s)
            primal, upper, xr = _certify(x, -y, c, r, d)
            gap = upper - primal
            trace.append((it, primal, upper, float(pinf), float(dinf), mu))
            if best is None or gap < best[1] - best[0]:
                best = (primal, upper, xr)
            if gap <= opts.tol:
                break
            # the dual residual scales with mu, the primal one inversely
            if pinf > 0 and dinf > 0:
                mu *= float(np.clip(math.sqrt(pinf / dinf), 0.2, 5.0))
                mu = min(max(mu, 1e-6 * mu0), 1e6 * mu0)
    primal, upper, xr = best
    return _Block(primal, upper, xr, it, tuple(trace))


def _solve_rank_one(c: np.ndarray) -> _Block:
    """One input state: the best output is the top eigenvector of ``c``, with value ``lambda_max``."""
    w, v = _eigh(c)
    x = np.outer(v[:, -1], v[:, -1].conj())
    value = float(w[-1])
    return _Block(value, value, x, 0, ())


def _support_basis(sig: np.ndarray, tol: float) -> np.ndarray:
    d = sig.shape[0]
    total = _herm(sum(sig[a, a] for a in range(d)))
    w, v = _eigh(total)
    keep = w > tol * max(1.0, w.max())
    return v[:, keep]


def output_blocks(sig: np.ndarray, tol: float = 1e-13) -> list[np.ndarray]:
    """Connected components of the joint sparsity pattern of all ``sigma_ab``.

    Every output operator is block diagonal in this partition, so pinching an
    optimal recovery onto it changes neither feasibility nor the objective.
    """
    pattern = np.abs(sig).max(axis=(0, 1))
    scale = max(float(pattern.max()), 1.0)
    adj = sparse.csr_matrix(pattern > tol * scale)
    count, labels = connected_components(adj, directed=False)
    return [np.flatnonzero(labels == k) for k in range(count)]


def _reduce(c_full: np.ndarray, basis: np.ndarray, d: int) -> np.ndarray:
    t = np.kron(basis.conj(), np.eye(d))
    return _herm(t.conj().T @ c_full @ t)


def _embed(x: np.ndarray, basis: np.ndarray, n: int, d: int) -> np.ndarray:
    t = np.kron(basis.conj(), np.eye(d))
    comp = np.eye(n) - basis @ basis.conj().T
    return t @ x @ t.conj().T + np.kron(comp.conj(), np.eye(d) / d)


def _solve_sig(sig: np.ndarray, groups, opts: SolverOptions) -> SDPResult:
    d, _, n, _ = sig.shape
    c_full = fidelity_matrix(sig) / d ** 2
    x_full = np.zeros((n * d, n * d), dtype=complex)
    covered = np.zeros((n, n), dtype=complex)
    fid = upper = 0.0
    iters = 0
    trace = []
    bases = []
    for idx in groups:
        sub = sig[:, :, idx][:, :, :, idx]
        basis_local = _support_basis(sub, opts.support_tol)
        if basis_local.shape[1] == 0:
            continue
        basis = np.zeros((n, basis_local.shape[1]), dtype=complex)
        basis[idx] = basis_local
        if basis.shape[1] > opts.dim_cap:
            raise DimensionCapExceeded(f"reduced dimension {basis.shape[1]} exceeds cap {opts.dim_cap}")
        bases.append(basis)
    hard = max(sum(b.shape[1] > 1 for b in bases), 1)
    for basis in bases:
        r = basis.shape[1]
        c = _reduce(c_full, basis, d)
        # blocks are independent programs; normalise each and share the tolerance by weight
        weight = float(np.real(np.trace(c)))
        if r == 1:
            blk = _solve_rank_one(c / weight)
        else:
            local = replace(opts, tol=min(opts.tol / (weight * hard), 1e-2))
            blk = _solve_block(c / weight, r, d, local)
        t = np.kron(basis.conj(), np.eye(d))
        x_full += t @ blk.x @ t.conj().T
        covered += basis @ basis.conj().T
        fid += weight * blk.fidelity
        upper += weight * blk.upper
        iters = max(iters, blk.iters)
        trace.extend(blk.trace)
    comp = np.eye(n) - covered
    x_full += np.kron(comp.conj(), np.eye(d) / d)
    choi = ChoiMatrix(n, d, x_full)
    residual = max(upper - fid, 0.0)
    feas = choi.feasibility_defect
    converged = residual <= opts.residual_tol and feas <= opts.feasibility_tol
    for row in trace:
        log.debug("iter %d primal %.15g dual %.15g pinf %.3g dinf %.3g mu %.3g", *row)
    return SDPResult(choi, min(fid, 1.0 + 1e-12), upper, feas, residual, iters, converged, tuple(trace))


def optimal_recovery(code: Code, channel, options: SolverOptions | None = None, path: str = "auto") -> SDPResult:
    """Optimal entanglement-fidelity recovery for ``channel o encode``.

    ``path`` picks the problem layout: ``"dense"`` keeps the full physical
    space, ``"support"`` restricts to the support of the channel output and
    ``"block"`` (the default behind ``"auto"``) further splits that support
    into the connected components of the output sparsity pattern. The
    split is exact: every optimal recovery can be pinched onto it.
    """
    opts = options or SolverOptions()
    sig = _codeword_images(channel, code)
    n = sig.shape[2]
    if path == "auto":
        path = "block"
    if path == "dense":
        if n > opts.dim_cap:
            raise DimensionCapExceeded(f"physical dimension {n} exceeds cap {opts.dim_cap}")
        d = code.d
        c = fidelity_matrix(sig) / d ** 2
        blk = _solve_block(_herm(c), n, d, opts)
        choi = ChoiMatrix(n, d, blk.x)
        residual = max(blk.upper - blk.fidelity, 0.0)
        feas = choi.feasibility_defect
        return SDPResult(choi, blk.fidelity, blk.upper, feas, residual, blk.iters,
                         residual <= opts.residual_tol and feas <= opts.feasibility_tol, blk.trace)
    if path == "support":
        groups = [np.arange(n)]
    elif path == "block":
        groups = output_blocks(sig, opts.support_tol)
    else:
        raise ValueError(f"unknown path {path!r}")
    return _solve_sig(sig, groups, opts)


def _single_mode_channel(space, params: NoiseParams) -> Channel:
    """Loss after dephasing on mode 0 with the first-mode rates of ``params``."""
    stages = []
    if params.kappa1 > 0:
        stages.append(loss_channel(space, 0, params.kappa1))
    if params.gamma1 > 0:
        stages.append(dephasing_channel(space, 0, params.gamma1))
    return compose(*stages) if stages else identity_channel(space)


def breakeven(params: NoiseParams, cutoff: int = 2) -> float:
    """Average fidelity of the Fock ``{|0>, |1>}`` qubit with no recovery.

    Only the first mode of ``params`` is used.
    """
    code = trivial_code(cutoff)
    return logical_fidelity(code, _single_mode_channel(code.space, params))[1]


def breakeven_closed_form(kappa_t: float = 0.0, gamma_t: float = 0.0) -> float:
    """Average fidelity of the bare ``{|0>, |1>}`` qubit.

    Loss damps the excited population by ``1 - p`` with ``p = 1 - e^{-kappa t}``
    and the coherence by ``sqrt(1 - p)``; dephasing multiplies the coherence by
    ``e^{-gamma t / 2}``, so ``F_e = (2 - p + 2 sqrt(1 - p) e^{-gamma t / 2}) / 4``.
    """
    p = -math.expm1(-kappa_t)
    fe = (2 - p + 2 * math.sqrt(1 - p) * math.exp(-gamma_t / 2)) / 4
    return (2 * fe + 1) / 3


@dataclass(frozen=True)
class SweepRecord:
    code: str
    family: str
    N: int
    K: int | None
    delta: float
    phi: float
    channel: str
    strength: float
    F_e: float
    F_avg: float
    feasibility: float
    residual: float
    iters: int


def noise_for(kind: str, strength: float) -> NoiseParams:
    if kind == "loss":
        return NoiseParams.symmetric(kappa=strength)
    if kind == "dephasing":
        return NoiseParams.symmetric(gamma=strength)
    if kind == "combined":
        return NoiseParams.symmetric(kappa=strength, gamma=strength)
    raise ValueError(f"unknown channel kind {kind!r}")


def physical_channel(code: Code, kind: str, strength: float) -> Channel:
    """Channel of ``kind`` on the code's modes (single-mode codes see mode-1 rates only)."""
    params = noise_for(kind, strength)
    if code.space.modes >= 2:
        return combined_channel(code.space, params)
    return _single_mode_channel(code.space, params)


def fidelity_sweep(codes: dict[str, Code], kind: str, strengths, options: SolverOptions | None = None,
                   path: str = "auto") -> list[SweepRecord]:
    """Optimal-recovery fidelities on a grid; the trivial code is scored without recovery."""
    records = []
    for name, code in codes.items():
        for s in strengths:
            ch = physical_channel(code, kind, s)
            if code.family == "trivial":
                fe, fa = logical_fidelity(code, ch)
                rec = SweepRecord(name, code.family, code.N, code.K, 0.0, 0.0, kind, s, fe, fa, 0.0, 0.0, 0)
            else:
                res = optimal_recovery(code, ch, options, path)
                rec = SweepRecord(name, code.family, code.N, code.K, code.angles[0], code.angles[1], kind, s,
                                  res.fidelity, res.average_fidelity, res.feasibility_defect,
                                  res.optimality_residual, res.iterations)
            records.append(rec)
    return records


__all__ = [
    "ChoiMatrix",
    "DimensionCapExceeded",
    "SDPResult",
    "SolverNotConverged",
    "SolverOptions",
    "SweepRecord",
    "apply",
    "breakeven",
    "breakeven_closed_form",
    "channel_choi",
    "choi_to_kraus",
    "correlated_dephasing",
    "fidelity_matrix",
    "fidelity_sweep",
    "kraus_to_choi",
    "noise_for",
    "optimal_recovery",
    "physical_channel",
]
