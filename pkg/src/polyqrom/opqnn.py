"""Orthogonal-polynomial parameterized circuits (QFT- and QDCT-inspired) and
the hardware-efficient baseline ansatz.

Circuit transcriptions
----------------------
QFT layer on ``n`` wires (wire 0 = most significant bit)::

    for j in 0..n-1:
        H on wire j
        for k in j+1..n-1:
            controlled-phase(theta) on wire j, controlled by wire k

``n(n-1)/2`` parameters. The canonical angle of the ``(j, k)`` slot is
``pi / 2**(k-j)``. The layer has no trailing swaps, so at canonical angles
it equals ``R @ F`` where ``F[j, k] = exp(2 pi i jk / N) / sqrt(N)`` and
``R`` is the bit-reversal permutation. The QFT *family* circuit used by
``OpqnnModel`` appends a fixed swap network that undoes ``R``; its basis
columns are then Fourier modes in frequency order.

The parameterized "R_z" slots are phase gates ``diag(1, e^{i theta})``,
which equal ``R_z(theta)`` up to global phase; the controlled versions
differ, and only the phase-gate form reproduces the Fourier transform.

QDCT layer on ``n + 1`` wires, wire 0 the ancilla::

    C-P_n          incrementer on the data wires, ancilla closed
    J              on the ancilla, open-controlled on every data wire
    B              on the ancilla
    CNOT ladder    ancilla -> every data wire
    C-P_n
    C              on the ancilla
    L_j            on data wires, ancilla open
    K_j            on data wires, ancilla closed
    F_{n+1}^T      parameterized: transpose of (QFT layer; swap network)
    CNOT ladder
    H              on the ancilla

``n(n+1)/2`` parameters, all inside the transposed Fourier block. The
whole circuit is the transpose of the Klappenecker-Roetteler DCT-II circuit,
so at canonical angles the ancilla-0 block is ``C2.T`` where ``C2`` is the
orthonormal DCT-II matrix; column ``i`` is the ``i``-th cosine basis vector
``cos(pi i (2k+1) / 2N)`` (a Chebyshev polynomial sampled at Chebyshev nodes).

Hardware-efficient ansatz block on ``n`` wires::

    R_y on every wire
    controlled-R_x ring, target t in [0, n-1, n-2, ..., 1], control t-1
    R_y on every wire
    controlled-R_x ring, target t in [n-2, n-1, 0, ..., n-3], control t+1

``4n`` parameters per block (``2`` for ``n == 1``, which has no couplings).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from math import pi, sqrt

import numpy as np

from . import qsim
from .qsim import CLOSED, OPEN, Circuit, Gate


class DegenerateBasisError(ValueError):
    """A post-selected basis column has zero norm."""


class Family(str, Enum):
    QFT = "qft"
    QDCT = "qdct"
    ANSATZ = "ansatz"


# ---------------------------------------------------------------------------
# gate set for the QDCT circuit


@dataclass(frozen=True)
class QdctGateSet:
    """Fixed gates of the QDCT circuit for an ``n``-qubit data register."""

    n: int

    @property
    def N(self) -> int:
        return 2**self.n

    @property
    def omega(self) -> complex:
        return complex(np.exp(1j * pi / (2 * self.N)))

    def K(self, j: int) -> np.ndarray:
        return np.diag([np.conj(self.omega) ** (2 ** (j - 1)), 1.0]).astype(complex)

    def L(self, j: int) -> np.ndarray:
        return np.diag([1.0, self.omega ** (2 ** (j - 1))]).astype(complex)

    @property
    def C(self) -> np.ndarray:
        return np.diag([1.0, np.conj(self.omega)]).astype(complex)

    B = np.array([[1, 1j], [1, -1j]], dtype=complex) / sqrt(2)
    J = np.array([[1, -1j], [-1j, 1]], dtype=complex) / sqrt(2)

    def incrementer(self, wires, controls=()) -> list[Gate]:
        """``|x> -> |x+1 mod N>`` on ``wires`` (``wires[0]`` most significant)."""
        gates = []
        n = len(wires)
        for k in range(n):
            ctrl = tuple((w, CLOSED) for w in wires[k + 1:]) + tuple(controls)
            gates.append(Gate(qsim.X, (wires[k],), ctrl, "inc"))
        return gates


def incrementer_circuit(n: int) -> Circuit:
    c = Circuit(n)
    c.add_block("P_n", QdctGateSet(n).incrementer(list(range(n))))
    return c


# ---------------------------------------------------------------------------
# parameter counts


def qft_param_count(n: int) -> int:
    return n * (n - 1) // 2


def qdct_param_count(n: int) -> int:
    return qft_param_count(n + 1)


def ansatz_block_param_count(n: int) -> int:
    return 2 if n == 1 else 4 * n


def ansatz_param_count(n: int, depth: int) -> int:
    return depth * ansatz_block_param_count(n)


def _check_len(theta, expected: int, what: str) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != expected:
        raise ValueError(f"{what} needs {expected} parameters, got {theta.size}")
    if not np.all(np.isfinite(theta)):
        raise ValueError(f"{what} parameters must be finite")
    return theta


# ---------------------------------------------------------------------------
# circuit builders (gate lists on arbitrary wires)


def _qft_layer_gates(wires, theta) -> list[Gate]:
    n = len(wires)
    gates, p = [], 0
    for j in range(n):
        gates.append(Gate(qsim.H, (wires[j],), (), "H"))
        for k in range(j + 1, n):
            gates.append(Gate(qsim.phase(theta[p]), (wires[j],), ((wires[k], CLOSED),), "CP"))
            p += 1
    return gates


def _swap_network(wires) -> list[Gate]:
    n = len(wires)
    return [Gate(qsim.SWAP, (wires[i], wires[n - 1 - i]), (), "SWAP") for i in range(n // 2)]


def canonical_qft_params(n: int) -> np.ndarray:
    return np.array([pi / 2 ** (k - j) for j in range(n) for k in range(j + 1, n)], dtype=float)


def canonical_qdct_params(n: int) -> np.ndarray:
    return canonical_qft_params(n + 1)


def build_qft_layer(n: int, theta) -> Circuit:
    theta = _check_len(theta, qft_param_count(n), f"{n}-qubit QFT layer")
    circ = Circuit(n)
    circ.add_block("qft", _qft_layer_gates(list(range(n)), theta))
    return circ


def _qdct_gates(wires, theta) -> list[tuple[str, list[Gate]]]:
    anc, data = wires[0], list(wires[1:])
    n = len(data)
    gs = QdctGateSet(n)
    a_closed, a_open = ((anc, CLOSED),), ((anc, OPEN),)
    ladder = [Gate(qsim.X, (d,), a_closed, "CNOT") for d in data]
    # data wire i (0-based) carries bit weight 2**(n-1-i), i.e. index j = n - i
    weight_index = {d: n - i for i, d in enumerate(data)}
    fourier = _qft_layer_gates(list(wires), theta) + _swap_network(list(wires))
    fourier_t = [g.transpose() for g in reversed(fourier)]
    return [
        ("C-P_n", gs.incrementer(data, a_closed)),
        ("J", [Gate(gs.J, (anc,), tuple((d, OPEN) for d in data), "J")]),
        ("B", [Gate(gs.B, (anc,), (), "B")]),
        ("cnot_ladder", ladder),
        ("C-P_n", gs.incrementer(data, a_closed)),
        ("C", [Gate(gs.C, (anc,), (), "C")]),
        ("L", [Gate(gs.L(weight_index[d]), (d,), a_open, "L") for d in data]),
        ("K", [Gate(gs.K(weight_index[d]), (d,), a_closed, "K") for d in data]),
        ("F^T", fourier_t),
        ("cnot_ladder", list(ladder)),
        ("H", [Gate(qsim.H, (anc,), (), "H")]),
    ]


def build_qdct_layer(n: int, theta) -> Circuit:
    """QDCT-inspired circuit on ``n + 1`` wires; wire 0 is the ancilla."""
    theta = _check_len(theta, qdct_param_count(n), f"{n}-qubit QDCT layer")
    circ = Circuit(n + 1)
    for name, gates in _qdct_gates(list(range(n + 1)), theta):
        circ.add_block(name, gates)
    return circ


def _ansatz_gates(wires, depth: int, theta) -> list[Gate]:
    n = len(wires)
    per = ansatz_block_param_count(n)
    gates = []
    for d in range(depth):
        t = iter(theta[d * per:(d + 1) * per])
        gates += [Gate(qsim.ry(next(t)), (w,), (), "RY") for w in wires]
        if n > 1:
            for tgt in [0] + list(range(n - 1, 0, -1)):
                ctl = (tgt - 1) % n
                gates.append(Gate(qsim.rx(next(t)), (wires[tgt],), ((wires[ctl], CLOSED),), "CRX"))
        gates += [Gate(qsim.ry(next(t)), (w,), (), "RY") for w in wires]
        if n > 1:
            for s in range(n):
                tgt = (n - 2 + s) % n
                ctl = (tgt + 1) % n
                gates.append(Gate(qsim.rx(next(t)), (wires[tgt],), ((wires[ctl], CLOSED),), "CRX"))
    return gates


def build_ansatz(n: int, depth: int, theta) -> Circuit:
    if depth < 1:
        raise ValueError("ansatz depth must be >= 1")
    theta = _check_len(theta, ansatz_param_count(n, depth), f"depth-{depth} ansatz")
    circ = Circuit(n)
    circ.add_block("ansatz", _ansatz_gates(list(range(n)), depth, theta))
    return circ


def matched_ansatz_depth(target_count: int, n: int) -> int:
    """Depth whose parameter count is closest to ``target_count`` (ties -> shallower)."""
    per = ansatz_block_param_count(n)
    return max(1, int(np.floor(target_count / per + 0.5 - 1e-12)))


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class RegisterLayout:
    data_qubits_per_axis: int = 6
    axes: int = 2
    ancilla_per_axis: int = 0

    def __post_init__(self):
        if self.axes not in (1, 2):
            raise ValueError("axes must be 1 or 2")
        if self.data_qubits_per_axis < 1 or self.ancilla_per_axis not in (0, 1):
            raise ValueError("invalid register layout")

    @property
    def qubits_per_axis(self) -> int:
        return self.data_qubits_per_axis + self.ancilla_per_axis

    @property
    def total_qubits(self) -> int:
        return self.axes * self.qubits_per_axis

    @property
    def dim(self) -> int:
        """Length of the encoded field (data register dimension)."""
        return 2 ** (self.axes * self.data_qubits_per_axis)

    def axis_wires(self, axis: int) -> list[int]:
        start = axis * self.qubits_per_axis
        return list(range(start, start + self.qubits_per_axis))

    @property
    def ancilla_qubits(self) -> list[int]:
        return [self.axis_wires(a)[0] for a in range(self.axes)] if self.ancilla_per_axis else []

    @property
    def data_qubits(self) -> list[int]:
        anc = set(self.ancilla_qubits)
        return [q for q in range(self.total_qubits) if q not in anc]


def param_count(family: Family | str, n: int, depth: int = 1) -> int:
    """Per-axis parameter count of a family on ``n`` data qubits."""
    family = Family(family)
    if family is Family.QFT:
        return qft_param_count(n)
    if family is Family.QDCT:
        return qdct_param_count(n)
    return ansatz_param_count(n, depth)


@dataclass
class OpqnnModel:
    """A basis-generating circuit family bound to a register layout and angles.

    Each axis register gets its own copy of the family circuit with its own
    slice of ``params`` (axis 0 first).
    """

    family: Family
    layout: RegisterLayout
    params: np.ndarray
    depth: int = 1
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.family = Family(self.family)
        if self.family is Family.QDCT and self.layout.ancilla_per_axis != 1:
            raise ValueError("the QDCT family needs one ancilla per axis")
        if self.family is not Family.QDCT and self.layout.ancilla_per_axis != 0:
            raise ValueError(f"the {self.family.value} family uses no ancilla")
        self.params = _check_len(self.params, self.n_params, f"{self.family.value} model")

    @classmethod
    def create(cls, family, n: int, axes: int = 2, init: str = "structured",
               depth: int | None = None, seed: int | None = None) -> "OpqnnModel":
        """Model with structured (canonical), random (``U(0, 2 pi)``) or zero angles.

        For the ansatz, ``depth=None`` picks the depth whose parameter count
        best matches the QDCT family on the same register; "structured"
        has no meaning there and falls back to zeros.
        """
        family = Family(family)
        layout = RegisterLayout(n, axes, 1 if family is Family.QDCT else 0)
        if family is Family.ANSATZ and depth is None:
            depth = matched_ansatz_depth(qdct_param_count(n), n)
        depth = depth or 1
        count = axes * param_count(family, n, depth)
        if init == "structured":
            if family is Family.QFT:
                params = np.tile(canonical_qft_params(n), axes)
            elif family is Family.QDCT:
                params = np.tile(canonical_qdct_params(n), axes)
            else:
                params = np.zeros(count)
        elif init == "random":
            params = np.random.default_rng(seed).uniform(0.0, 2 * pi, count)
        elif init == "zeros":
            params = np.zeros(count)
        else:
            raise ValueError(f"unknown init {init!r}")
        return cls(family, layout, params, depth)

    @property
    def n_params(self) -> int:
        return self.layout.axes * param_count(self.family, self.layout.data_qubits_per_axis, self.depth)

    def with_params(self, params) -> "OpqnnModel":
        return OpqnnModel(self.family, self.layout, np.array(params, dtype=float), self.depth)

    def axis_params(self, axis: int) -> np.ndarray:
        per = self.n_params // self.layout.axes
        return self.params[axis * per:(axis + 1) * per]

    def axis_circuit(self, axis: int = 0) -> Circuit:
        """Circuit on one axis register (local wires, ancilla first for QDCT)."""
        n = self.layout.data_qubits_per_axis
        theta = self.axis_params(axis)
        if self.family is Family.QFT:
            circ = build_qft_layer(n, theta)
            circ.add_block("bit_reversal", _swap_network(list(range(n))))
            return circ
        if self.family is Family.QDCT:
            return build_qdct_layer(n, theta)
        return build_ansatz(n, self.depth, theta)

    def circuit(self) -> Circuit:
        """Full circuit on ``layout.total_qubits`` wires (per-axis blocks in sequence)."""
        full = Circuit(self.layout.total_qubits)
        for a in range(self.layout.axes):
            local = self.axis_circuit(a)
            full.add_block(f"axis{a}", local.embed(full.n_qubits, self.layout.axis_wires(a)).gates)
        return full

    def axis_block(self, axis: int = 0) -> np.ndarray:
        """Post-selected ``2**n x 2**n`` block: ancilla in |0>, ancilla out <0|."""
        key = ("block", axis)
        if key not in self._cache:
            u = qsim.circuit_unitary(self.axis_circuit(axis))
            if self.layout.ancilla_per_axis:
                half = 2**self.layout.data_qubits_per_axis
                u = u[:half, :half]
            self._cache[key] = u
        return self._cache[key]


# ---------------------------------------------------------------------------
# basis extraction


def _full_index(layout: RegisterLayout, i: int) -> int:
    """Basis index of the full register for data index ``i`` with ancillas in |0>."""
    n = layout.data_qubits_per_axis
    idx = 0
    for a in range(layout.axes):
        part = (i >> (n * (layout.axes - 1 - a))) & (2**n - 1)
        idx = (idx << layout.qubits_per_axis) | part
    return idx


def basis_column(model: OpqnnModel, i: int) -> np.ndarray:
    """``alpha_i xi_i``: run the full circuit on ``|i>|0_anc>``, keep ancillas = 0.

    Not renormalized. Data index ``i`` is row-major over the axis registers.
    """
    layout = model.layout
    if not 0 <= i < layout.dim:
        raise ValueError(f"basis index {i} outside data dimension {layout.dim}")
    psi = qsim.new_basis_state(layout.total_qubits, _full_index(layout, i))
    out = qsim.run(model.circuit(), psi)
    col = qsim.postselect(out, layout.ancilla_qubits, 0)
    if np.vdot(col, col).real <= 1e-30:
        raise DegenerateBasisError(f"basis column {i} vanishes after post-selection")
    return col


def enumerate_indices(layout: RegisterLayout, m: int, ordering: str = "diagonal") -> list[int]:
    """Data indices of the first ``m`` basis columns.

    ``natural`` is ``0, 1, ..., m-1``. ``diagonal`` (two axes) walks the
    index pairs ``(r, c)`` by increasing ``r + c``, ties by increasing ``r``;
    on one axis it coincides with ``natural``.
    """
    if not 1 <= m <= layout.dim:
        raise ValueError(f"order m={m} must lie in [1, {layout.dim}]")
    if ordering == "natural" or layout.axes == 1:
        return list(range(m))
    if ordering != "diagonal":
        raise ValueError(f"unknown ordering {ordering!r}")
    side = 2**layout.data_qubits_per_axis
    return [r * side + c for r, c in diagonal_pairs(m, side)]


def diagonal_pairs(m: int, side: int) -> list[tuple[int, int]]:
    pairs = sorted(((r, c) for r in range(side) for c in range(side)), key=lambda p: (p[0] + p[1], p[0]))
    return pairs[:m]


def basis_matrix(model: OpqnnModel, m: int, ordering: str = "diagonal") -> np.ndarray:
    """``A = [a_s(0), ..., a_s(m-1)]`` built from the per-axis post-selected blocks.

    Agrees with stacking ``basis_column`` (the tests check the Kronecker
    factorization), but costs two small unitaries instead of ``m`` full runs.
    """
    layout = model.layout
    idx = enumerate_indices(layout, m, ordering)
    n = layout.data_qubits_per_axis
    side = 2**n
    if layout.axes == 1:
        A = model.axis_block(0)[:, idx]
    else:
        b0, b1 = model.axis_block(0), model.axis_block(1)
        A = np.stack([np.kron(b0[:, i // side], b1[:, i % side]) for i in idx], axis=1)
    norms = np.einsum("ij,ij->j", A.conj(), A).real
    if np.any(norms <= 1e-30):
        raise DegenerateBasisError(f"basis column {idx[int(np.argmin(norms))]} vanishes after post-selection")
    return A
