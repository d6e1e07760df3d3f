"""Oracle suite: every check compares a circuit-level quantity with an
independently computed classical reference."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.fft

from . import opqnn, projection, qsim, recon, train


@dataclass
class Check:
    name: str
    error: float
    tol: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error <= self.tol)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: error {self.error:.3e} (tol {self.tol:.0e}, {self.seconds:.2f} s)"


# ---------------------------------------------------------------------------
# classical references


def bit_reversal(n: int) -> np.ndarray:
    return np.array([int(format(i, f"0{n}b")[::-1], 2) if n else 0 for i in range(2**n)])


def dft_matrix(N: int) -> np.ndarray:
    """``F[j, k] = exp(2 pi i j k / N) / sqrt(N)``."""
    k = np.arange(N)
    return np.exp(2j * np.pi * np.outer(k, k) / N) / np.sqrt(N)


def qft_reference(n: int) -> np.ndarray:
    """Swap-free QFT layer: the DFT with its rows in bit-reversed order."""
    return dft_matrix(2**n)[bit_reversal(n), :]


def dct_basis(N: int) -> np.ndarray:
    """Orthonormal DCT-II basis vectors as columns."""
    return scipy.fft.dct(np.eye(N), type=2, norm="ortho", axis=0).T


def sign_aligned_error(cols: np.ndarray, ref: np.ndarray) -> float:
    """Max entry error after matching each column's global sign to the reference."""
    signs = np.sign(np.real(np.einsum("ij,ij->j", ref.conj(), cols)))
    signs[signs == 0] = 1
    return float(np.max(np.abs(cols * signs - ref)))


# ---------------------------------------------------------------------------
# checks


def check_qft(ns=(1, 2, 3, 6)) -> float:
    err = 0.0
    for n in ns:
        U = qsim.circuit_unitary(opqnn.build_qft_layer(n, opqnn.canonical_qft_params(n)))
        err = max(err, float(np.max(np.abs(U - qft_reference(n)))))
    return err


def check_qdct(ns=(1, 2, 3)) -> float:
    err = 0.0
    for n in ns:
        model = opqnn.OpqnnModel.create("qdct", n, axes=1)
        cols = np.stack([opqnn.basis_column(model, i) for i in range(2**n)], axis=1)
        cols = cols / np.linalg.norm(cols, axis=0)
        err = max(err, sign_aligned_error(cols, dct_basis(2**n)))
        err = max(err, float(np.max(np.abs(cols.conj().T @ cols - np.eye(2**n)))))
    return err


def check_estimators(n: int = 2, m: int = 4, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    err = 0.0
    for family in opqnn.Family:
        for ses in (False, True):
            model = opqnn.OpqnnModel.create(family, n, axes=2, init="random", seed=seed)
            cfg = projection.EstimatorConfig(sesquilinear=ses)
            psi = rng.normal(size=model.layout.dim) + 1j * rng.normal(size=model.layout.dim)
            psi /= np.linalg.norm(psi)
            G = projection.estimate_gram(model, m, cfg=cfg)
            b = projection.estimate_cross(model, recon.amplitude_encode(psi), m, cfg=cfg)
            err = max(err, float(np.max(np.abs(G - projection.direct_gram(model, m, sesquilinear=ses)))))
            err = max(err, float(np.max(np.abs(b - projection.direct_cross(model, psi, m, sesquilinear=ses)))))
    return err


def check_lcu(trials: int = 6, seed: int = 1) -> float:
    rng = np.random.default_rng(seed)
    err = 0.0
    for t in range(trials):
        family = list(opqnn.Family)[t % 3]
        model = opqnn.OpqnnModel.create(family, 2, axes=2, init="random", seed=seed + t)
        m = int(rng.integers(1, 7))
        x = rng.normal(size=m) + 1j * rng.normal(size=m)
        state, _ = recon.lcu_reconstruct(model, x)
        ref = recon.direct_reconstruct(opqnn.basis_matrix(model, m), x)
        err = max(err, float(np.max(np.abs(state - ref))))
    return err


def check_swap(trials: int = 50, seed: int = 2) -> float:
    rng = np.random.default_rng(seed)
    err = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 5))
        a, b = (rng.normal(size=2**n) + 1j * rng.normal(size=2**n) for _ in range(2))
        a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
        rep = recon.swap_test(a, b)
        err = max(err, abs(rep.fidelity - abs(np.vdot(a, b)) ** 2), abs(rep.fidelity - (2 * rep.p0 - 1)))
    return err


def check_solver(trials: int = 20, seed: int = 3) -> float:
    rng = np.random.default_rng(seed)
    err = 0.0
    for _ in range(trials):
        k = int(rng.integers(1, 17))
        M = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
        G = M @ M.T + k * np.eye(k)
        b = rng.normal(size=k) + 1j * rng.normal(size=k)
        x = projection.tikhonov_solve(G, b, 1e-6)
        ref = np.linalg.inv(G + 1e-6 * np.eye(k)) @ b
        err = max(err, float(np.max(np.abs(x - ref)) / (1 + np.max(np.abs(ref)))))
    return err


def check_schedule() -> float:
    cfg = train.TrainConfig()
    want = [1e-3] * 25 + [1e-4] * 25 + [1e-5] * 25
    got = [train.lr_at(e, cfg) for e in range(cfg.epochs)]
    return float(np.max(np.abs(np.array(got) - want) / np.array(want)))


def phase_loss(theta) -> float:
    """``1 - |<+|RZ(theta_0) H|0>|^2``: the simplest single-R_z fidelity loss."""
    c = qsim.Circuit(1).add(qsim.H, 0).add(qsim.rz(theta[0]), 0)
    out = qsim.run(c, qsim.new_basis_state(1, 0))
    plus = np.array([1, 1]) / np.sqrt(2)
    return 1.0 - abs(np.vdot(plus, out)) ** 2


def check_gradient() -> float:
    err = 0.0
    for t in np.linspace(-2.5, 2.5, 7):
        fd = train.finite_diff_grad(phase_loss, [t], 1e-4)
        ps = train.parameter_shift_grad(phase_loss, [t])
        err = max(err, float(abs(fd[0] - ps[0])))
    return err


CHECKS: dict[str, tuple[Callable[[], float], float]] = {
    "qft_equals_bit_reversed_dft": (check_qft, 1e-10),
    "qdct_equals_dct2_up_to_sign": (check_qdct, 1e-8),
    "hadamard_estimates_equal_direct": (check_estimators, 1e-12),
    "lcu_equals_normalized_combination": (check_lcu, 1e-10),
    "swap_test_equals_overlap": (check_swap, 1e-12),
    "tikhonov_equals_dense_inverse": (check_solver, 1e-10),
    "lr_schedule_step_decay": (check_schedule, 1e-12),
    "finite_difference_matches_shift_rule": (check_gradient, 1e-5),
}


def run_all(names=None) -> list[Check]:
    out = []
    for name, (fn, tol) in CHECKS.items():
        if names and name not in names:
            continue
        t0 = time.perf_counter()
        try:
            err = fn()
        except Exception:  # a crashing oracle counts as a violation
            err = float("inf")
        out.append(Check(name, err, tol, time.perf_counter() - t0))
    return out
