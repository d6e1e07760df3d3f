"""Reduced coefficients as features, a single fully connected softmax layer,
and the classification report."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import EncodedSample, FlowField, encode
from .opqnn import Family, OpqnnModel, basis_matrix
from .projection import (DEFAULT_LAMBDA, EstimatorConfig, cross_from_basis, estimate_cross, estimate_gram,
                         gram_from_basis, tikhonov_solve)
from .recon import amplitude_encode

PROB_FLOOR = 1e-12


def default_feature_mode(family) -> str:
    """Split complex (Re then Im) for complex bases, real parts for the cosine family."""
    return "real" if Family(family) is Family.QDCT else "split"


def feature_dim(m: int, mode: str) -> int:
    if mode not in ("real", "split"):
        raise ValueError(f"unknown feature mode {mode!r}")
    return m if mode == "real" else 2 * m


def realify(x: np.ndarray, mode: str) -> np.ndarray:
    """Coefficients (``m`` or ``m x N``) to real features (``f`` or ``N x f``)."""
    feature_dim(1, mode)
    x = np.asarray(x)
    out = x.real if mode == "real" else np.concatenate([x.real, x.imag], axis=0)
    return np.ascontiguousarray(out.T if out.ndim == 2 else out, dtype=float)


def batch_features(model: OpqnnModel, states: np.ndarray, m: int, lam: float = DEFAULT_LAMBDA,
                   ordering: str = "diagonal", sesquilinear: bool = True, mode: str | None = None) -> np.ndarray:
    """Features for many unit-norm states at once (columns of ``states``)."""
    mode = mode or default_feature_mode(model.family)
    A = basis_matrix(model, m, ordering)
    X = tikhonov_solve(gram_from_basis(A, sesquilinear), cross_from_basis(A, states, sesquilinear), lam)
    return realify(X, mode)


@dataclass(frozen=True)
class FeatureConfig:
    m: int = 6
    lam: float = DEFAULT_LAMBDA
    ordering: str = "diagonal"
    mode: str | None = None
    estimator: EstimatorConfig = field(default_factory=lambda: EstimatorConfig(sesquilinear=True))


def extract_features(model: OpqnnModel, sample, m: int | None = None,
                     cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Features of one sample through the circuit estimators.

    The Gram matrix and the cross vector come from Hadamard tests (exact or
    sampled per ``cfg.estimator``), the latter against an amplitude-encoding
    preparation of the sample.
    """
    m = cfg.m if m is None else m
    if isinstance(sample, FlowField):
        sample = encode(sample)
    psi = sample.state if isinstance(sample, EncodedSample) else np.asarray(sample, dtype=complex)
    if np.linalg.norm(psi) <= 1e-12:
        from .data import DegenerateFieldError

        raise DegenerateFieldError("cannot extract features from a zero field")
    psi = psi / np.linalg.norm(psi)
    G = estimate_gram(model, m, cfg.ordering, cfg.estimator)
    b = estimate_cross(model, amplitude_encode(psi, len(model.layout.data_qubits)), m, cfg.ordering, cfg.estimator)
    return realify(tikhonov_solve(G, b, cfg.lam), cfg.mode or default_feature_mode(model.family))


# ---------------------------------------------------------------------------
# fully connected head


@dataclass
class FcLayer:
    weights: np.ndarray  # f x c
    bias: np.ndarray  # c

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[1],):
            raise ValueError("weights must be f x c and bias length c")

    @classmethod
    def create(cls, n_features: int, n_classes: int = 4, seed: int = 0, scale: float = 0.01) -> "FcLayer":
        """Small Gaussian weights and zero bias, so early logits are nearly tied."""
        w = np.random.default_rng(seed).normal(0.0, scale, (n_features, n_classes))
        return cls(w, np.zeros(n_classes))

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights.shape[1]

    @property
    def n_params(self) -> int:
        return self.weights.size + self.bias.size

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights.ravel(), self.bias])

    def from_flat(self, w) -> "FcLayer":
        w = np.asarray(w, dtype=float)
        k = self.weights.size
        return FcLayer(w[:k].reshape(self.weights.shape), w[k:])


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def fc_forward(fc: FcLayer, features) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Logits ``W^T f + b``, softmax probabilities and argmax labels."""
    features = np.asarray(features, dtype=float)
    if features.shape[-1] != fc.n_features:
        raise ValueError(f"expected {fc.n_features} features, got {features.shape[-1]}")
    logits = features @ fc.weights + fc.bias
    return logits, softmax(logits), np.argmax(logits, axis=-1)


def cross_entropy(probs, labels) -> float:
    """Mean ``-log p_label`` with probabilities floored at 1e-12."""
    probs = np.atleast_2d(probs)
    labels = np.atleast_1d(np.asarray(labels, dtype=int))
    if np.any(labels < 0) or np.any(labels >= probs.shape[1]):
        raise ValueError("label outside the class range")
    p = np.maximum(probs[np.arange(labels.size), labels], PROB_FLOOR)
    return float(np.mean(-np.log(p)))


def accuracy(predictions, labels) -> float:
    predictions, labels = np.asarray(predictions), np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError("prediction and label counts differ")
    return float(np.mean(predictions == labels)) if labels.size else 0.0


def fc_grad(fc: FcLayer, features, labels) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy and its exact gradient with respect to weights and bias."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    labels = np.atleast_1d(np.asarray(labels, dtype=int))
    _, probs, _ = fc_forward(fc, features)
    loss = cross_entropy(probs, labels)
    delta = probs.copy()
    delta[np.arange(labels.size), labels] -= 1.0
    delta /= labels.size
    return loss, features.T @ delta, delta.sum(axis=0)


def parameter_budget(model: OpqnnModel | None, fc: FcLayer) -> int:
    return (model.n_params if model is not None else 0) + fc.n_params


# ---------------------------------------------------------------------------
# report


@dataclass
class ClassificationReport:
    family: str
    m: int
    n_features: int
    accuracy: float
    train_accuracy: float
    per_class_precision: list[float]
    circuit_params: int
    fc_params: int
    wall_ms: float = 0.0

    @property
    def parameter_budget(self) -> int:
        return self.circuit_params + self.fc_params

    def as_dict(self) -> dict:
        d = asdict(self)
        d["parameter_budget"] = self.parameter_budget
        return d


def per_class_precision(predictions, labels, n_classes: int) -> list[float]:
    predictions, labels = np.asarray(predictions), np.asarray(labels)
    out = []
    for c in range(n_classes):
        picked = predictions == c
        out.append(float(np.mean(labels[picked] == c)) if picked.any() else 0.0)
    return out


REPORT_COLUMNS = ["family", "m", "n_features", "circuit_params", "fc_params", "parameter_budget",
                  "train_accuracy", "accuracy", "per_class_precision", "wall_ms"]


def reports_to_csv(reports, wall_time: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = REPORT_COLUMNS if wall_time else REPORT_COLUMNS[:-1]
    w.writerow(cols)
    for r in reports:
        d = r.as_dict()
        d["per_class_precision"] = ";".join(repr(p) for p in r.per_class_precision)
        d["accuracy"], d["train_accuracy"] = repr(r.accuracy), repr(r.train_accuracy)
        d["wall_ms"] = f"{r.wall_ms:.3f}"
        w.writerow([d[c] for c in cols])
    return buf.getvalue()


def reports_to_json(reports) -> str:
    return json.dumps([r.as_dict() for r in reports], indent=2) + "\n"
