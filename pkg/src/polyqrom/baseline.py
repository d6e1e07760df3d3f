"""Classical tensor-product Chebyshev fitting on the same grid and solver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev

from .opqnn import diagonal_pairs
from .projection import DEFAULT_LAMBDA, cross_from_basis, gram_from_basis, tikhonov_solve


@dataclass
class ChebBasis:
    m: int
    ordering: str
    degrees: list[tuple[int, int]]
    x: np.ndarray  # row coordinates
    y: np.ndarray  # column coordinates
    columns: np.ndarray  # (H*W) x m


def cell_centres(k: int) -> np.ndarray:
    """``-1 + (2 r + 1) / k`` for ``r = 0..k-1``."""
    return -1.0 + (2 * np.arange(k) + 1) / k


def _degrees(H: int, W: int, m: int, ordering: str) -> list[tuple[int, int]]:
    if ordering == "natural":
        return [(k // W, k % W) for k in range(m)]
    if ordering != "diagonal":
        raise ValueError(f"unknown ordering {ordering!r}")
    if H != W:
        pairs = sorted(((p, q) for p in range(H) for q in range(W)), key=lambda d: (d[0] + d[1], d[0]))
        return pairs[:m]
    return diagonal_pairs(m, H)


def cheb_basis(H: int, W: int, m: int, ordering: str = "diagonal") -> ChebBasis:
    """Column ``k`` is ``T_p(x_r) T_q(y_c)`` flattened row-major, with ``(p, q)``
    the ``k``-th degree pair; ``x`` runs along rows and ``y`` along columns."""
    if not 1 <= m <= H * W:
        raise ValueError(f"order m={m} must lie in [1, {H * W}]")
    degrees = _degrees(H, W, m, ordering)
    x, y = cell_centres(H), cell_centres(W)
    Vx = chebyshev.chebvander(x, H - 1)
    Vy = chebyshev.chebvander(y, W - 1)
    cols = np.stack([np.outer(Vx[:, p], Vy[:, q]).ravel() for p, q in degrees], axis=1)
    return ChebBasis(m, ordering, degrees, x, y, cols)


def cheb_fit(field, m: int, lam: float = DEFAULT_LAMBDA, ordering: str = "diagonal",
             basis: ChebBasis | None = None) -> tuple[np.ndarray, float]:
    """Least-squares coefficients on the normalized field and the fidelity
    of the normalized reconstruction with it."""
    grid = np.asarray(getattr(field, "values", field), dtype=float)
    psi = grid.ravel()
    norm = np.linalg.norm(psi)
    if norm <= 1e-12:
        raise ValueError("cannot fit a zero field")
    psi = psi / norm
    B = basis if basis is not None else cheb_basis(*grid.shape, m, ordering)
    A = B.columns
    x = tikhonov_solve(gram_from_basis(A), cross_from_basis(A, psi), lam).real
    rec = A @ x
    rn = np.linalg.norm(rec)
    fid = 0.0 if rn < 1e-14 else float((psi @ rec / rn) ** 2)
    return x, fid


def cheb_features(states: np.ndarray, H: int, W: int, m: int, lam: float = DEFAULT_LAMBDA,
                  ordering: str = "diagonal") -> np.ndarray:
    """Chebyshev coefficients of many unit-norm real states (columns) as ``N x m`` features."""
    A = cheb_basis(H, W, m, ordering).columns
    S = np.asarray(states).real
    return tikhonov_solve(gram_from_basis(A), cross_from_basis(A, S), lam).real.T
