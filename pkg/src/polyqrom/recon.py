"""State reconstruction with a linear combination of unitaries, SWAP-test
fidelity, and reconstruction metrics."""
from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log2

import numpy as np

from . import qsim
from .opqnn import OpqnnModel, _full_index, basis_matrix, enumerate_indices
from .qsim import CLOSED, OPEN, Circuit, Gate

NORM_TOL = 1e-10


class DegenerateReconstructionError(RuntimeError):
    """LCU post-selection succeeds with (numerically) zero probability."""


@dataclass
class FidelityReport:
    fidelity: float
    p0: float
    mode: str = "exact"
    shots: int = 0


@dataclass
class LcuPlan:
    k: int
    coefficient_state: np.ndarray
    indices: list[int]
    phases: np.ndarray


# ---------------------------------------------------------------------------
# amplitude encoding


def _pattern(bits: int, wires) -> tuple[tuple[int, int], ...]:
    n = len(wires)
    return tuple((w, (bits >> (n - 1 - i)) & 1) for i, w in enumerate(wires))


def amplitude_encode(v, n_qubits: int | None = None) -> Circuit:
    """Circuit taking ``|0...0>`` to ``v / ||v||``.

    Binary tree of uniformly controlled R_y rotations (most significant
    qubit first), followed by controlled diagonal phase corrections on the
    last qubit.
    """
    v = np.asarray(v, dtype=complex).reshape(-1)
    norm = np.linalg.norm(v)
    if not norm > 0:
        raise ValueError("cannot encode the zero vector")
    need = max(1, ceil(log2(v.size))) if v.size > 1 else 1
    n = need if n_qubits is None else n_qubits
    if v.size > 2**n:
        raise ValueError(f"vector of length {v.size} does not fit {n} qubits")
    amps = np.zeros(2**n, dtype=complex)
    amps[: v.size] = v / norm
    mag = np.abs(amps)

    circ = Circuit(n)
    for level in range(n):
        blocks = mag.reshape(2**level, 2, -1)
        for prefix in range(2**level):
            n0 = np.linalg.norm(blocks[prefix, 0])
            n1 = np.linalg.norm(blocks[prefix, 1])
            if n0 == 0 and n1 == 0:
                continue
            theta = 2 * np.arctan2(n1, n0)
            if theta == 0:
                continue
            circ.add(qsim.ry(theta), level, _pattern(prefix, list(range(level))), name="RY")
    phases = np.angle(amps).reshape(-1, 2)
    for prefix in range(2 ** (n - 1)):
        p0, p1 = phases[prefix]
        if p0 == 0 and p1 == 0:
            continue
        diag = np.diag([np.exp(1j * p0), np.exp(1j * p1)])
        circ.add(diag, n - 1, _pattern(prefix, list(range(n - 1))), name="PH")
    return circ


# ---------------------------------------------------------------------------
# LCU


def lcu_plan(model: OpqnnModel, x, ordering: str = "diagonal") -> LcuPlan:
    x = np.asarray(x, dtype=complex).reshape(-1)
    m = x.size
    if m < 1 or not np.any(x != 0):
        raise ValueError("need at least one nonzero coefficient")
    k = ceil(log2(m)) if m > 1 else 0
    weights = np.sqrt(np.abs(x))
    coeff = np.zeros(2**k)
    coeff[:m] = weights / np.linalg.norm(weights)
    return LcuPlan(k, coeff, enumerate_indices(model.layout, m, ordering), np.angle(x))


def lcu_circuit(model: OpqnnModel, plan: LcuPlan) -> Circuit:
    """``U_x``, multiplexed ``e^{i phi_i} U_theta T_i``, then ``U_x^dagger``.

    Wires ``0..k-1`` are the coefficient register; the model register follows.
    """
    layout = model.layout
    k, n = plan.k, layout.total_qubits
    total = k + n
    reg = list(range(k, total))
    circ = Circuit(total)
    if k:
        ux = amplitude_encode(plan.coefficient_state, k)
        circ.add_block("U_x", ux.gates)
    body = model.circuit().embed(total, reg).gates
    for sel, data_index in enumerate(plan.indices):
        if plan.coefficient_state[sel] == 0:
            continue
        ctrl = _pattern(sel, list(range(k)))
        full = _full_index(layout, data_index)
        gates = [Gate(qsim.X, (reg[q],), ctrl, "T") for q in range(n) if (full >> (n - 1 - q)) & 1]
        gates += [g.with_controls(ctrl) for g in body]
        phi = plan.phases[sel]
        if phi != 0:
            gates.append(Gate(np.exp(1j * phi) * np.eye(2), (reg[0],), ctrl, "phase"))
        circ.add_block(f"U_{sel}", gates)
    if k:
        circ.add_block("U_x^dg", ux.inverse().gates)
    return circ


def lcu_reconstruct(model: OpqnnModel, x, ordering: str = "diagonal") -> tuple[np.ndarray, float]:
    """Normalized ``sum_i x_i a_i`` and the post-selection success probability."""
    plan = lcu_plan(model, x, ordering)
    circ = lcu_circuit(model, plan)
    out = qsim.run(circ, qsim.new_basis_state(circ.n_qubits, 0))
    kept = list(range(plan.k)) + [plan.k + a for a in model.layout.ancilla_qubits]
    state = qsim.postselect(out, kept, 0)
    p = float(np.vdot(state, state).real)
    if p < 1e-14:
        raise DegenerateReconstructionError(f"LCU success probability {p:.2e} is too small")
    return state / np.sqrt(p), p


def direct_reconstruct(A: np.ndarray, x) -> np.ndarray:
    """``normalize(A @ x)``; columns of ``x`` are handled independently."""
    y = A @ x
    norm = np.linalg.norm(y, axis=0)
    if np.any(norm < 1e-7):
        raise DegenerateReconstructionError("reconstruction vanishes")
    return y / norm


# ---------------------------------------------------------------------------
# SWAP test


def swap_test_circuit(n: int) -> Circuit:
    circ = Circuit(2 * n + 1)
    circ.add(qsim.H, 0, name="H")
    for q in range(n):
        circ.add(qsim.SWAP, (1 + q, 1 + n + q), [(0, CLOSED)], name="CSWAP")
    circ.add(qsim.H, 0, name="H")
    return circ


def swap_test(psi, phi, cfg=None, rng: np.random.Generator | None = None) -> FidelityReport:
    """``F = 2 P(0) - 1`` from the controlled-SWAP circuit.

    Inputs must already be unit norm; sub-normalized states would inflate
    nothing here but are rejected so the caller normalizes explicitly.
    """
    psi = np.asarray(psi, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    if psi.shape != phi.shape:
        raise ValueError("states must have equal dimension")
    for name, s in (("psi", psi), ("phi", phi)):
        if abs(np.vdot(s, s).real - 1) > NORM_TOL:
            raise ValueError(f"{name} is not normalized")
    n = qsim.n_qubits_of(psi)
    start = np.kron(np.array([1, 0], dtype=complex), np.kron(psi, phi))
    out = qsim.run(swap_test_circuit(n), start)
    half = out.shape[0] // 2
    p0 = float(np.vdot(out[:half], out[:half]).real)
    if cfg is not None and cfg.mode == "sampled":
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        p0 = rng.binomial(cfg.shots, min(max(p0, 0.0), 1.0)) / cfg.shots
        return FidelityReport(2 * p0 - 1, p0, "sampled", cfg.shots)
    return FidelityReport(2 * p0 - 1, p0)


def fidelity(psi, phi) -> float:
    """``|<psi|phi>|^2`` computed directly (vectorized over trailing columns)."""
    return np.abs(np.einsum("i...,i...->...", np.conj(psi), phi)) ** 2


def reconstruction_loss(psi, model: OpqnnModel, x, ordering: str = "diagonal",
                        method: str = "lcu") -> float:
    """``1 - F`` between ``psi`` and the reconstruction from coefficients ``x``.

    ``method="lcu"`` simulates the LCU and SWAP circuits; ``"direct"`` uses
    ``normalize(A x)`` and the closed-form overlap, which agree to 1e-10.
    """
    psi = np.asarray(psi, dtype=complex)
    if abs(np.linalg.norm(psi) - 1) > NORM_TOL:
        raise ValueError("psi must be unit norm")
    if method == "lcu":
        state, _ = lcu_reconstruct(model, x, ordering)
        return 1.0 - swap_test(psi, state).fidelity
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    A = basis_matrix(model, len(x), ordering)
    return 1.0 - float(fidelity(psi, direct_reconstruct(A, np.asarray(x))))


def mse(field_a, field_b) -> float:
    a, b = np.asarray(field_a, dtype=float), np.asarray(field_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def reconstruct_grid(A: np.ndarray, x, norm: float, shape) -> np.ndarray:
    """Field-valued reconstruction ``norm * Re(A x)`` (``A x`` approximates the unit state)."""
    return (norm * (A @ np.asarray(x)).real).reshape(shape)


def batch_fidelities(A: np.ndarray, states: np.ndarray, lam: float, sesquilinear: bool = True) -> np.ndarray:
    """Fidelity of each column of ``states`` with its least-squares reconstruction.

    Columns whose reconstruction vanishes come back as NaN so callers can
    skip them; the LCU path would reject those with a degenerate error.
    """
    from .projection import cross_from_basis, gram_from_basis, tikhonov_solve

    states = np.asarray(states, dtype=complex)
    single = states.ndim == 1
    S = states[:, None] if single else states
    X = tikhonov_solve(gram_from_basis(A, sesquilinear), cross_from_basis(A, S, sesquilinear), lam)
    Y = A @ X
    norm = np.linalg.norm(Y, axis=0)
    ok = norm >= 1e-7
    F = np.full(S.shape[1], np.nan)
    F[ok] = np.abs(np.einsum("ij,ij->j", S[:, ok].conj(), Y[:, ok])) ** 2 / norm[ok] ** 2
    return F[0] if single else F
