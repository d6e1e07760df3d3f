"""Exact statevector simulation of controlled-gate circuits.

Qubit 0 is the most significant bit of the basis index, so the top wire of a
circuit diagram is the leftmost bit of ``|b_0 b_1 ... b_{n-1}>``.

States are plain complex numpy arrays of length ``2**n``. Post-selected
states are allowed to be sub-normalized and are never renormalized here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import Iterable, Sequence

import numpy as np

UNITARITY_TOL = 1e-12
MAX_UNITARY_QUBITS = 12

OPEN, CLOSED = 0, 1


class CapacityError(ValueError):
    """Requested object would exceed the simulator's memory guard."""


# ---------------------------------------------------------------------------
# standard gate matrices

_S2 = 1 / sqrt(2)
H = np.array([[1, 1], [1, -1]], dtype=complex) * _S2
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
S = np.array([[1, 0], [0, 1j]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)


def phase(theta: float) -> np.ndarray:
    """diag(1, e^{i theta}); equals rz(theta) up to a global phase."""
    return np.array([[1, 0], [0, np.exp(1j * theta)]], dtype=complex)


# ---------------------------------------------------------------------------
# gates and circuits


@dataclass(frozen=True)
class Gate:
    """A 1- or 2-qubit unitary on ``targets`` with open/closed ``controls``.

    ``controls`` is a tuple of ``(qubit, polarity)`` pairs; polarity 1
    (closed) conditions on ``|1>``, polarity 0 (open) on ``|0>``.
    """

    matrix: np.ndarray
    targets: tuple[int, ...]
    controls: tuple[tuple[int, int], ...] = ()
    name: str = ""

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(
            self, "controls", tuple((int(q), int(p)) for q, p in self.controls)
        )
        k = len(self.targets)
        if k not in (1, 2) or mat.shape != (2**k, 2**k):
            raise ValueError(f"gate {self.name!r}: matrix shape {mat.shape} does not fit {k} targets")
        ctrl = [q for q, _ in self.controls]
        qubits = list(self.targets) + ctrl
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"gate {self.name!r}: targets and controls must be disjoint")
        if any(p not in (OPEN, CLOSED) for _, p in self.controls):
            raise ValueError("control polarity must be 0 (open) or 1 (closed)")
        err = np.abs(mat.conj().T @ mat - np.eye(2**k)).max()
        if err > UNITARITY_TOL:
            raise ValueError(f"gate {self.name!r} is not unitary (error {err:.2e})")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets + tuple(q for q, _ in self.controls)

    def conjugate(self) -> "Gate":
        return Gate(self.matrix.conj(), self.targets, self.controls, self.name + "*")

    def transpose(self) -> "Gate":
        # control projectors are real and diagonal, so only the target block transposes
        return Gate(self.matrix.T, self.targets, self.controls, self.name + "^T")

    def dagger(self) -> "Gate":
        return Gate(self.matrix.conj().T, self.targets, self.controls, self.name + "^dg")

    def with_controls(self, extra: Iterable[tuple[int, int]]) -> "Gate":
        return Gate(self.matrix, self.targets, self.controls + tuple(extra), self.name)

    def remap(self, mapping: Sequence[int] | dict) -> "Gate":
        return Gate(
            self.matrix,
            tuple(mapping[t] for t in self.targets),
            tuple((mapping[q], p) for q, p in self.controls),
            self.name,
        )


@dataclass
class Circuit:
    """Ordered gate list on ``n_qubits`` wires.

    Named blocks (``add_block``) are recorded as ``(name, start, stop)`` slices
    of ``gates`` so that composite pieces such as an incrementer or a QFT
    stay identifiable after expansion.
    """

    n_qubits: int
    gates: list[Gate] = field(default_factory=list)
    blocks: list[tuple[str, int, int]] = field(default_factory=list)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("a circuit needs at least one qubit")
        for g in self.gates:
            self._check(g)

    def _check(self, gate: Gate):
        if max(gate.qubits) >= self.n_qubits or min(gate.qubits) < 0:
            raise ValueError(
                f"gate {gate.name!r} touches qubits {gate.qubits} outside a {self.n_qubits}-qubit circuit"
            )

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def add(self, matrix, targets, controls=(), name: str = "") -> "Circuit":
        if isinstance(targets, int):
            targets = (targets,)
        return self.append(Gate(matrix, tuple(targets), tuple(controls), name))

    def append(self, gate: Gate) -> "Circuit":
        self._check(gate)
        self.gates.append(gate)
        return self

    def extend(self, gates: Iterable[Gate]) -> "Circuit":
        for g in gates:
            self.append(g)
        return self

    def add_block(self, name: str, gates: Iterable[Gate]) -> "Circuit":
        start = len(self.gates)
        self.extend(gates)
        self.blocks.append((name, start, len(self.gates)))
        return self

    def block(self, name: str) -> list[Gate]:
        for bname, start, stop in self.blocks:
            if bname == name:
                return self.gates[start:stop]
        raise KeyError(name)

    def copy(self) -> "Circuit":
        return Circuit(self.n_qubits, list(self.gates), list(self.blocks))

    def _mapped(self, fn, reverse=False) -> "Circuit":
        gates = [fn(g) for g in (reversed(self.gates) if reverse else self.gates)]
        if reverse:
            n = len(self.gates)
            blocks = [(b, n - stop, n - start) for b, start, stop in reversed(self.blocks)]
        else:
            blocks = list(self.blocks)
        return Circuit(self.n_qubits, gates, blocks)

    def conjugate(self) -> "Circuit":
        return self._mapped(Gate.conjugate)

    def transpose(self) -> "Circuit":
        return self._mapped(Gate.transpose, reverse=True)

    def inverse(self) -> "Circuit":
        return self._mapped(Gate.dagger, reverse=True)

    def controlled(self, controls: Iterable[tuple[int, int]]) -> "Circuit":
        controls = tuple(controls)
        return self._mapped(lambda g: g.with_controls(controls))

    def embed(self, n_qubits: int, mapping: Sequence[int] | dict) -> "Circuit":
        """Relabel wires through ``mapping`` into a wider circuit."""
        out = Circuit(n_qubits)
        for g in self.gates:
            out.append(g.remap(mapping))
        out.blocks = list(self.blocks)
        return out


def conjugate_circuit(circuit: Circuit) -> Circuit:
    """Circuit whose unitary is the entrywise complex conjugate of ``circuit``'s."""
    return circuit.conjugate()


# ---------------------------------------------------------------------------
# states


def new_basis_state(n: int, i: int) -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one qubit")
    if not 0 <= i < 2**n:
        raise ValueError(f"basis index {i} out of range for {n} qubits")
    psi = np.zeros(2**n, dtype=complex)
    psi[i] = 1.0
    return psi


def n_qubits_of(state: np.ndarray) -> int:
    dim = state.shape[0]
    n = dim.bit_length() - 1
    if n < 1 or 2**n != dim:
        raise ValueError(f"state length {dim} is not a power of two >= 2")
    return n


def _apply_inplace(psi: np.ndarray, gate: Gate) -> None:
    """Apply ``gate`` to a tensor of shape ``(2,)*n`` (+ optional batch axes)."""
    idx: list = [slice(None)] * psi.ndim
    for q, pol in gate.controls:
        idx[q] = pol
    idx = tuple(idx)
    sub = psi[idx]
    ctrl = {q for q, _ in gate.controls}
    # axis position of each target inside the controlled sub-block
    tpos = [t - sum(1 for c in ctrl if c < t) for t in gate.targets]
    k = len(gate.targets)
    mat = gate.matrix.reshape((2,) * (2 * k))
    out = np.tensordot(mat, sub, axes=(list(range(k, 2 * k)), tpos))
    psi[idx] = np.moveaxis(out, list(range(k)), tpos)


def apply(state: np.ndarray, gate: Gate) -> np.ndarray:
    """Return ``gate`` applied to ``state`` (the input is left untouched)."""
    n = n_qubits_of(state)
    if max(gate.qubits) >= n:
        raise ValueError(f"gate acts on qubit {max(gate.qubits)} but state has {n} qubits")
    psi = np.array(state, dtype=complex).reshape((2,) * n)
    _apply_inplace(psi, gate)
    return psi.reshape(-1)


def run(circuit: Circuit, initial: np.ndarray) -> np.ndarray:
    """Apply every gate of ``circuit`` in order to ``initial``.

    ``initial`` may be a single state of length ``2**n`` or a matrix of shape
    ``(2**n, batch)`` whose columns are evolved together.
    """
    initial = np.asarray(initial)
    n = circuit.n_qubits
    if initial.shape[0] != 2**n or initial.ndim > 2:
        raise ValueError(
            f"initial state has shape {initial.shape}, circuit expects leading dimension {2**n}"
        )
    batch = initial.shape[1:]
    psi = np.array(initial, dtype=complex).reshape((2,) * n + batch)
    for g in circuit.gates:
        _apply_inplace(psi, g)
    return psi.reshape((2**n,) + batch)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    if circuit.n_qubits > MAX_UNITARY_QUBITS:
        raise CapacityError(
            f"refusing to build a {circuit.n_qubits}-qubit unitary (limit {MAX_UNITARY_QUBITS})"
        )
    return run(circuit, np.eye(2**circuit.n_qubits, dtype=complex))


def project_qubit(state: np.ndarray, qubit: int, outcome: int) -> tuple[np.ndarray, float]:
    """Zero the amplitudes with ``qubit != outcome``; no renormalization.

    Returns the projected state and the probability of ``outcome`` (the
    squared norm of the kept component).
    """
    n = n_qubits_of(state)
    if not 0 <= qubit < n:
        raise ValueError(f"qubit {qubit} out of range for {n} qubits")
    if outcome not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    psi = np.array(state, dtype=complex).reshape((2,) * n)
    idx = [slice(None)] * n
    idx[qubit] = 1 - outcome
    psi[tuple(idx)] = 0
    psi = psi.reshape(-1)
    return psi, float(np.vdot(psi, psi).real)


def postselect(state: np.ndarray, qubits: Sequence[int], outcome: int = 0) -> np.ndarray:
    """Keep the component with every qubit in ``qubits`` equal to ``outcome``
    and drop those wires; the remaining wires keep their relative order."""
    n = n_qubits_of(state) if state.ndim == 1 else state.shape[0].bit_length() - 1
    batch = state.shape[1:]
    psi = state.reshape((2,) * n + batch)
    idx = [slice(None)] * psi.ndim
    for q in qubits:
        idx[q] = outcome
    return psi[tuple(idx)].reshape((-1,) + batch)


def inner_sesquilinear(a: np.ndarray, b: np.ndarray) -> complex:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def inner_bilinear(a: np.ndarray, b: np.ndarray) -> complex:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.dot(a, b))


def sample_counts(probs: Sequence[float], shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial shot counts for outcome probabilities ``probs``.

    Any leftover mass (``1 - sum(probs)``) is treated as an extra discarded
    outcome, so callers can pass only the outcomes they keep.
    """
    p = np.clip(np.asarray(probs, dtype=float), 0.0, 1.0)
    rest = max(0.0, 1.0 - p.sum())
    full = np.append(p, rest)
    full = full / full.sum()
    return rng.multinomial(shots, full)[:-1]
