"""Gram matrix / cross vector estimation and the regularized normal-equation solve.

The overlaps are bilinear by default, ``G[i, j] = sum_k a_i[k] a_j[k]`` and
``b[i] = sum_k a_i[k] psi[k]``, i.e. ``A.T @ A`` and ``A.T @ psi`` with a
plain transpose. ``sesquilinear=True`` switches to ``A^H``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qsim
from .opqnn import OpqnnModel, _full_index, basis_matrix, enumerate_indices
from .qsim import CLOSED, OPEN, Circuit

DEFAULT_LAMBDA = 1e-6
MAX_DIRECT_DIM = 2**12
RESIDUAL_TOL = 1e-10


class EstimationError(RuntimeError):
    """Sampled estimator retained no shots."""


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    mode: str = "exact"  # or "sampled"
    shots: int = 100_000
    seed: int = 0
    sesquilinear: bool = False

    def __post_init__(self):
        if self.mode not in ("exact", "sampled"):
            raise ValueError(f"unknown estimator mode {self.mode!r}")
        if self.mode == "sampled" and self.shots < 1:
            raise ValueError("sampled mode needs shots >= 1")


@dataclass
class ProjectionResult:
    gram: np.ndarray
    cross: np.ndarray
    x: np.ndarray
    lam: float


# ---------------------------------------------------------------------------
# Hadamard test


def hadamard_test_circuit(prepare_left: Circuit, prepare_right: Circuit, part: str = "real",
                          ancillas: Sequence[int] = (), sesquilinear: bool = False) -> Circuit:
    """Interference circuit for ``<l*|r>`` (or ``<l|r>`` when ``sesquilinear``).

    Wire 0 is the control. Wires ``1..w`` hold the shared register; the left
    preparation uses its own ancillas there, while the right preparation has
    its ancillas relabelled onto fresh wires appended after the register.
    """
    if prepare_left.n_qubits != prepare_right.n_qubits:
        raise ValueError("both preparations must act on the same register width")
    w = prepare_left.n_qubits
    ancillas = list(ancillas)
    total = 1 + w + len(ancillas)
    left_map = list(range(1, w + 1))
    right_map = list(left_map)
    for k, a in enumerate(ancillas):
        right_map[a] = 1 + w + k
    left = prepare_left if sesquilinear else prepare_left.conjugate()

    circ = Circuit(total)
    circ.add(qsim.H, 0, name="H")
    if part == "imaginary":
        circ.add(qsim.S, 0, name="S")
    elif part != "real":
        raise ValueError(f"part must be 'real' or 'imaginary', not {part!r}")
    circ.add_block("left", left.embed(total, left_map).controlled([(0, OPEN)]).gates)
    circ.add_block("right", prepare_right.embed(total, right_map).controlled([(0, CLOSED)]).gates)
    circ.add(qsim.H, 0, name="H")
    return circ


def _kept_probabilities(state: np.ndarray, n: int, ancilla_wires: Sequence[int]) -> tuple[float, float]:
    psi = qsim.postselect(state, list(ancilla_wires), 0)
    half = psi.shape[0] // 2
    p0 = float(np.vdot(psi[:half], psi[:half]).real)
    p1 = float(np.vdot(psi[half:], psi[half:]).real)
    return p0, p1


def hadamard_probabilities(prepare_left: Circuit, prepare_right: Circuit, part: str = "real",
                           ancillas: Sequence[int] = (), sesquilinear: bool = False) -> tuple[float, float]:
    """Exact ``(P(c=0, anc=0), P(c=1, anc=0))`` of the interference circuit."""
    circ = hadamard_test_circuit(prepare_left, prepare_right, part, ancillas, sesquilinear)
    w = prepare_left.n_qubits
    anc_wires = [1 + a for a in ancillas] + list(range(1 + w, circ.n_qubits))
    state = qsim.run(circ, qsim.new_basis_state(circ.n_qubits, 0))
    return _kept_probabilities(state, circ.n_qubits, anc_wires)


def estimate_from_probabilities(p0: float, p1: float, part: str, cfg: EstimatorConfig,
                                rng: np.random.Generator | None = None) -> float:
    """Exact value, or the shot-frequency estimate drawn from the three outcomes
    (control 0 kept, control 1 kept, discarded)."""
    if cfg.mode == "sampled":
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        n0, n1 = qsim.sample_counts([p0, p1], cfg.shots, rng)
        if n0 + n1 == 0:
            raise EstimationError("no shot had every ancilla in |0>")
        p0, p1 = n0 / cfg.shots, n1 / cfg.shots
    return p0 - p1 if part == "real" else p1 - p0


def hadamard_test(prepare_left: Circuit, prepare_right: Circuit, part: str = "real",
                  cfg: EstimatorConfig = EstimatorConfig(), ancillas: Sequence[int] = (),
                  rng: np.random.Generator | None = None) -> float:
    """Estimate Re or Im of the overlap of the two prepared (post-selected) vectors.

    Shots count only when every ancilla reads 0. The estimate is
    ``P(c=0, anc=0) - P(c=1, anc=0)``, which is ``2 P(0) - 1`` whenever no
    ancilla is present; with ancillas it is the kept-shot fraction times the
    conditional ``2 P(0 | kept) - 1``, so sub-normalization factors survive.
    With the S gate the sign flips: ``Im = P(c=1, kept) - P(c=0, kept)``.
    """
    p0, p1 = hadamard_probabilities(prepare_left, prepare_right, part, ancillas, cfg.sesquilinear)
    return estimate_from_probabilities(p0, p1, part, cfg, rng)


def hadamard_sigma(value_re: float, kept: float, shots: int) -> float:
    """Standard deviation of the shot estimator whose outcomes are +1, -1 or 0.

    ``value_re`` is the exact ``P0 - P1``; ``kept`` is ``P0 + P1``.
    """
    var = kept - value_re**2
    return float(np.sqrt(max(var, 0.0) / shots))


def _prep_basis(model: OpqnnModel, i: int) -> Circuit:
    """``T_i`` followed by the model circuit, on the full model register."""
    layout = model.layout
    n = layout.total_qubits
    c = Circuit(n)
    full = _full_index(layout, i)
    for q in range(n):
        if (full >> (n - 1 - q)) & 1:
            c.add(qsim.X, q, name="T")
    c.extend(model.circuit().gates)
    return c


def _rng(cfg: EstimatorConfig, key, part: int):
    return np.random.default_rng([cfg.seed, *key, part]) if cfg.mode == "sampled" else None


def probability_table(pairs, ancillas, sesquilinear: bool) -> np.ndarray:
    """``(len(pairs), 2, 2)`` array: [pair, real/imag, kept outcome c=0/c=1]."""
    out = np.empty((len(pairs), 2, 2))
    for k, (left, right) in enumerate(pairs):
        for j, part in enumerate(("real", "imaginary")):
            out[k, j] = hadamard_probabilities(left, right, part, ancillas, sesquilinear)
    return out


def estimates_from_table(table: np.ndarray, keys, cfg: EstimatorConfig) -> np.ndarray:
    """Complex estimates from a probability table; sampled draws are seeded per
    ``(cfg.seed, *key, part)`` so entries are reproducible individually."""
    out = np.empty(len(keys), dtype=complex)
    for k, key in enumerate(keys):
        re = estimate_from_probabilities(*table[k, 0], "real", cfg, _rng(cfg, key, 0))
        im = estimate_from_probabilities(*table[k, 1], "imaginary", cfg, _rng(cfg, key, 1))
        out[k] = complex(re, im)
    return out


def gram_table(model: OpqnnModel, m: int, ordering: str = "diagonal", sesquilinear: bool = False):
    """Hadamard-test outcome probabilities for every Gram entry, with their keys."""
    idx = enumerate_indices(model.layout, m, ordering)
    preps = [_prep_basis(model, i) for i in idx]
    pairs = [(preps[a], preps[b]) for a in range(m) for b in range(m)]
    keys = [(0, a, b) for a in range(m) for b in range(m)]
    return probability_table(pairs, model.layout.ancilla_qubits, sesquilinear), keys


def estimate_gram(model: OpqnnModel, m: int, ordering: str = "diagonal",
                  cfg: EstimatorConfig = EstimatorConfig()) -> np.ndarray:
    """Every ``G[i, j]`` from a pair of Hadamard tests (real and imaginary)."""
    table, keys = gram_table(model, m, ordering, cfg.sesquilinear)
    return estimates_from_table(table, keys, cfg).reshape(m, m)


def _embed_data_prep(model: OpqnnModel, psi_prep: Circuit) -> Circuit:
    data = model.layout.data_qubits
    if psi_prep.n_qubits != len(data):
        raise ValueError(
            f"state preparation has {psi_prep.n_qubits} qubits, data register has {len(data)}"
        )
    return psi_prep.embed(model.layout.total_qubits, data)


def cross_table(model: OpqnnModel, psi_prep: Circuit, m: int, ordering: str = "diagonal",
                sesquilinear: bool = False):
    idx = enumerate_indices(model.layout, m, ordering)
    right = _embed_data_prep(model, psi_prep)
    pairs = [(_prep_basis(model, i), right) for i in idx]
    return probability_table(pairs, model.layout.ancilla_qubits, sesquilinear), [(1, k) for k in range(m)]


def estimate_cross(model: OpqnnModel, psi_prep: Circuit, m: int, ordering: str = "diagonal",
                   cfg: EstimatorConfig = EstimatorConfig()) -> np.ndarray:
    """``b[i]`` from Hadamard tests between ``U T_i`` and the preparation of psi."""
    table, keys = cross_table(model, psi_prep, m, ordering, cfg.sesquilinear)
    return estimates_from_table(table, keys, cfg)


# ---------------------------------------------------------------------------
# direct computation


def _guard(model: OpqnnModel):
    if model.layout.dim > MAX_DIRECT_DIM:
        raise qsim.CapacityError(f"direct overlaps limited to dimension {MAX_DIRECT_DIM}")


def gram_from_basis(A: np.ndarray, sesquilinear: bool = False) -> np.ndarray:
    return (A.conj().T if sesquilinear else A.T) @ A


def cross_from_basis(A: np.ndarray, psi: np.ndarray, sesquilinear: bool = False) -> np.ndarray:
    return (A.conj().T if sesquilinear else A.T) @ psi


def direct_gram(model: OpqnnModel, m: int, ordering: str = "diagonal", sesquilinear: bool = False) -> np.ndarray:
    _guard(model)
    return gram_from_basis(basis_matrix(model, m, ordering), sesquilinear)


def direct_cross(model: OpqnnModel, psi: np.ndarray, m: int, ordering: str = "diagonal",
                 sesquilinear: bool = False) -> np.ndarray:
    _guard(model)
    psi = np.asarray(psi)
    if psi.shape[0] != model.layout.dim:
        raise ValueError(f"state length {psi.shape[0]} does not match data dimension {model.layout.dim}")
    return cross_from_basis(basis_matrix(model, m, ordering), psi, sesquilinear)


# ---------------------------------------------------------------------------
# solve


def tikhonov_solve(G: np.ndarray, b: np.ndarray, lam: float = DEFAULT_LAMBDA) -> np.ndarray:
    """Solve ``(G + lam I) x = b`` by LU with partial pivoting.

    ``b`` may hold several right-hand sides as columns. One step of
    iterative refinement is applied, and the residual bound
    ``||(G + lam I) x - b|| <= 1e-10 (1 + ||b||)`` is enforced per column.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    G = np.asarray(G, dtype=complex)
    b = np.asarray(b, dtype=complex)
    M = G + lam * np.eye(G.shape[0])
    if lam == 0 and np.linalg.cond(M) > 1e12:
        raise SingularSystemError("Gram matrix is singular at lambda=0; use lambda > 0")
    try:
        x = np.linalg.solve(M, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"{exc}; use lambda > 0") from exc
    x = x + np.linalg.solve(M, b - M @ x)
    res = np.linalg.norm(M @ x - b, axis=0)
    bound = RESIDUAL_TOL * (1 + np.linalg.norm(b, axis=0))
    if not np.all(np.isfinite(x)) or np.any(res > bound):
        raise SingularSystemError(f"residual {np.max(res):.3e} exceeds {np.max(bound):.3e}")
    return x


def project(model: OpqnnModel, psi: np.ndarray, m: int, ordering: str = "diagonal",
            lam: float = DEFAULT_LAMBDA, sesquilinear: bool = False) -> ProjectionResult:
    """Direct-path convenience: Gram, cross vector and coefficients for one state."""
    A = basis_matrix(model, m, ordering)
    G = gram_from_basis(A, sesquilinear)
    b = cross_from_basis(A, psi, sesquilinear)
    return ProjectionResult(G, b, tikhonov_solve(G, b, lam), lam)
