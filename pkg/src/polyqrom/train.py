"""Finite-difference gradients, Adam, the step-decay schedule, and the two
training loops (reconstruction and classification)."""
from __future__ import annotations

import csv
import io
import logging
import time
from decimal import Decimal
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .opqnn import OpqnnModel, basis_matrix
from .projection import DEFAULT_LAMBDA
from .recon import batch_fidelities

log = logging.getLogger(__name__)


class NumericalError(FloatingPointError):
    """A loss evaluation produced NaN or Inf."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 75
    base_lr: float = 1e-3
    decay_factor: float = 0.1
    decay_period_epochs: int = 25
    fd_epsilon: float = 1e-4
    lam: float = DEFAULT_LAMBDA
    m: int = 8
    seed: int = 0
    ordering: str = "diagonal"
    sesquilinear: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    batch_size: int | None = None
    workers: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.base_lr <= 0:
            raise ValueError("base_lr must be positive")
        if not 0 < self.decay_factor <= 1:
            raise ValueError("decay_factor must lie in (0, 1]")
        if self.decay_period_epochs < 1:
            raise ValueError("decay_period_epochs must be >= 1")
        if self.fd_epsilon <= 0:
            raise ValueError("fd_epsilon must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    if not 0 <= epoch < cfg.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {cfg.epochs})")
    # decimal arithmetic so 1e-3 * 0.1**2 comes out as the double nearest 1e-5
    k = epoch // cfg.decay_period_epochs
    return float(Decimal(repr(cfg.base_lr)) * Decimal(repr(cfg.decay_factor)) ** k)


# ---------------------------------------------------------------------------
# gradients and Adam


def finite_diff_grad(loss: Callable[[np.ndarray], float], theta, eps: float = 1e-4,
                     workers: int = 1) -> np.ndarray:
    """Central differences ``(L(t + eps e_i) - L(t - eps e_i)) / (2 eps)``.

    The ``2 len(theta)`` evaluations are independent; with ``workers > 1``
    they run on a thread pool and are reduced in a fixed order.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    theta = np.asarray(theta, dtype=float)
    points = []
    for i in range(theta.size):
        for sign in (1.0, -1.0):
            p = theta.copy()
            p[i] += sign * eps
            points.append(p)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            values = list(pool.map(loss, points))
    else:
        values = [loss(p) for p in points]
    values = np.asarray(values, dtype=float).reshape(theta.size, 2)
    if not np.all(np.isfinite(values)):
        raise NumericalError("loss returned a non-finite value during differentiation")
    return (values[:, 0] - values[:, 1]) / (2 * eps)


def parameter_shift_grad(loss: Callable[[np.ndarray], float], theta, shift: float = np.pi / 2) -> np.ndarray:
    """Two-term shift rule, exact for losses that are first-order trigonometric
    in each angle (expectation values of gates generated by a two-level operator)."""
    theta = np.asarray(theta, dtype=float)
    g = np.empty(theta.size)
    for i in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[i] += shift
        dn[i] -= shift
        g[i] = (loss(up) - loss(dn)) / (2 * np.sin(shift))
    return g


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8

    @classmethod
    def zeros(cls, n: int, beta1: float = 0.9, beta2: float = 0.999, eps_hat: float = 1e-8) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0, beta1, beta2, eps_hat)


def adam_step(state: AdamState, theta, grad, lr: float) -> tuple[np.ndarray, AdamState]:
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if theta.shape != grad.shape or theta.shape != state.first_moment.shape:
        raise ValueError("parameter, gradient and moment lengths differ")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1 - state.beta1) * grad
    v = state.beta2 * state.second_moment + (1 - state.beta2) * grad**2
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new = theta - lr * m_hat / (np.sqrt(v_hat) + state.eps_hat)
    return new, replace(state, first_moment=m, second_moment=v, step_count=t)


# ---------------------------------------------------------------------------
# history


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    test_metric: float
    wall_ms: float


@dataclass
class TrainHistory:
    """Per-epoch records plus the metrics at the starting parameters.

    ``metric`` names the test column: ``test_fidelity`` for reconstruction
    and ``test_accuracy`` for classification.
    """

    records: list[EpochRecord] = field(default_factory=list)
    initial_train_loss: float = float("nan")
    initial_test_metric: float = float("nan")
    metric: str = "test_fidelity"

    def __len__(self) -> int:
        return len(self.records)

    @property
    def train_loss(self) -> np.ndarray:
        return np.array([r.train_loss for r in self.records])

    @property
    def test_metric(self) -> np.ndarray:
        return np.array([r.test_metric for r in self.records])

    @property
    def final_test_metric(self) -> float:
        return self.records[-1].test_metric if self.records else self.initial_test_metric

    def to_csv(self, path=None, wall_time: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["epoch", "lr", "train_loss", self.metric] + (["wall_ms"] if wall_time else [])
        w.writerow(header)
        for r in self.records:
            row = [r.epoch, repr(r.lr), repr(r.train_loss), repr(r.test_metric)]
            w.writerow(row + ([f"{r.wall_ms:.3f}"] if wall_time else []))
        text = buf.getvalue()
        if path is not None:
            from ._files import atomic_write_text

            atomic_write_text(path, text)
        return text


# ---------------------------------------------------------------------------
# reconstruction


def _stack(states) -> np.ndarray:
    if isinstance(states, np.ndarray) and states.ndim == 2:
        return states.astype(complex, copy=False)
    cols = [getattr(s, "state", s) for s in states]
    if not cols:
        raise ValueError("empty sample set")
    return np.stack([np.asarray(c, dtype=complex) for c in cols], axis=1)


def dataset_fidelities(model: OpqnnModel, states, cfg: TrainConfig) -> np.ndarray:
    """Per-sample fidelity (NaN for samples whose reconstruction vanishes)."""
    A = basis_matrix(model, cfg.m, cfg.ordering)
    return batch_fidelities(A, _stack(states), cfg.lam, cfg.sesquilinear)


def _mean_loss(F: np.ndarray) -> float:
    ok = np.isfinite(F)
    if not ok.any():
        raise NumericalError("every sample produced a degenerate reconstruction")
    return float(np.mean(1.0 - F[ok]))


def mean_reconstruction_loss(model: OpqnnModel, states, cfg: TrainConfig) -> float:
    """Mean ``1 - F`` over samples, skipping (and logging) degenerate ones."""
    F = dataset_fidelities(model, states, cfg)
    skipped = int(np.sum(~np.isfinite(F)))
    if skipped:
        log.warning("skipped %d of %d samples with a vanishing reconstruction", skipped, F.size)
    return _mean_loss(F)


def _mean_fidelity(model, states, cfg) -> float:
    F = dataset_fidelities(model, states, cfg)
    ok = np.isfinite(F)
    return float(np.mean(F[ok])) if ok.any() else 0.0


def train_reconstruction(model: OpqnnModel, train_set, test_set, cfg: TrainConfig = TrainConfig()
                         ) -> tuple[OpqnnModel, TrainHistory]:
    """Full-batch Adam on the mean reconstruction loss.

    Each epoch records the training loss at the parameters it starts from
    and the test fidelity after its update.
    """
    S_train, S_test = _stack(train_set), _stack(test_set)
    history = TrainHistory(
        initial_train_loss=mean_reconstruction_loss(model, S_train, cfg),
        initial_test_metric=_mean_fidelity(model, S_test, cfg),
    )

    def loss(theta):
        return _mean_loss(dataset_fidelities(model.with_params(theta), S_train, cfg))

    theta = model.params.copy()
    adam = AdamState.zeros(theta.size, cfg.beta1, cfg.beta2, cfg.eps_hat)
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        lr = lr_at(epoch, cfg)
        current = mean_reconstruction_loss(model.with_params(theta), S_train, cfg)
        grad = finite_diff_grad(loss, theta, cfg.fd_epsilon, cfg.workers)
        theta, adam = adam_step(adam, theta, grad, lr)
        test_f = _mean_fidelity(model.with_params(theta), S_test, cfg)
        history.records.append(EpochRecord(epoch, lr, current, test_f, 1e3 * (time.perf_counter() - t0)))
    return model.with_params(theta), history


# ---------------------------------------------------------------------------
# classification


def train_classifier(model: OpqnnModel, fc, train_set, test_set, cfg: TrainConfig = TrainConfig(),
                     feature_mode: str | None = None, train_circuit: bool = True):
    """Joint training: circuit angles by finite differences, FC weights by the
    exact softmax cross-entropy gradient, both with Adam on the same schedule.

    ``train_set`` and ``test_set`` are ``(states, labels)`` pairs. Batches
    are the full training set unless ``cfg.batch_size`` is set, in which
    case a seeded shuffle is drawn every epoch.
    """
    from . import classify

    mode = feature_mode or classify.default_feature_mode(model.family)
    S_tr, y_tr = _stack(train_set[0]), np.asarray(train_set[1])
    S_te, y_te = _stack(test_set[0]), np.asarray(test_set[1])
    if np.unique(y_tr).size < 2 and fc.n_classes < 2:
        raise ValueError("classification needs at least two classes")

    def features(mdl, S):
        return classify.batch_features(mdl, S, cfg.m, cfg.lam, cfg.ordering, cfg.sesquilinear, mode)

    def test_accuracy(mdl, head):
        return classify.accuracy(classify.fc_forward(head, features(mdl, S_te))[2], y_te)

    history = TrainHistory(metric="test_accuracy")
    history.initial_train_loss = classify.cross_entropy(classify.fc_forward(fc, features(model, S_tr))[1], y_tr)
    history.initial_test_metric = test_accuracy(model, fc)

    rng = np.random.default_rng(cfg.seed)
    theta = model.params.copy()
    w = fc.flat()
    adam_c = AdamState.zeros(theta.size, cfg.beta1, cfg.beta2, cfg.eps_hat)
    adam_f = AdamState.zeros(w.size, cfg.beta1, cfg.beta2, cfg.eps_hat)
    n = S_tr.shape[1]
    bs = cfg.batch_size or n
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        lr = lr_at(epoch, cfg)
        order = rng.permutation(n) if cfg.batch_size else np.arange(n)
        losses = []
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            S_b, y_b = S_tr[:, idx], y_tr[idx]
            head = fc.from_flat(w)
            mdl = model.with_params(theta)
            loss_b, gW, gb = classify.fc_grad(head, features(mdl, S_b), y_b)
            losses.append(loss_b * idx.size)
            if train_circuit and theta.size:
                def circuit_loss(t):
                    probs = classify.fc_forward(head, features(model.with_params(t), S_b))[1]
                    return classify.cross_entropy(probs, y_b)

                g_theta = finite_diff_grad(circuit_loss, theta, cfg.fd_epsilon, cfg.workers)
                theta, adam_c = adam_step(adam_c, theta, g_theta, lr)
            w, adam_f = adam_step(adam_f, w, np.concatenate([gW.ravel(), gb]), lr)
        fc = fc.from_flat(w)
        acc = test_accuracy(model.with_params(theta), fc)
        history.records.append(EpochRecord(epoch, lr, float(np.sum(losses) / n), acc,
                                           1e3 * (time.perf_counter() - t0)))
    return model.with_params(theta), fc, history


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)


def initial_losses(models: Sequence[OpqnnModel], states, cfg: TrainConfig) -> np.ndarray:
    """Mean loss at the starting parameters for each model (the quantity compared
    in initialization studies)."""
    S = _stack(states)
    return np.array([mean_reconstruction_loss(mdl, S, cfg) for mdl in models])
