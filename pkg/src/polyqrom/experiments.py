"""End-to-end pipelines shared by the command line, the demos and the tests:
reconstruction runs, (family, m, seed) sweeps and classification."""
from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from . import baseline, classify, data
from .opqnn import Family, OpqnnModel, basis_matrix, qdct_param_count, qft_param_count, matched_ansatz_depth
from .projection import cross_from_basis, gram_from_basis, tikhonov_solve
from .recon import batch_fidelities, mse
from .train import TrainConfig, TrainHistory, mean_reconstruction_loss, train_classifier, train_reconstruction

FAMILIES = ("qft", "qdct", "ansatz", "chebyshev")


def _side_qubits(samples) -> tuple[int, int, int]:
    H, W = samples[0].source.values.shape
    if H != W:
        raise ValueError("the circuit families need square grids")
    return H, W, int(np.log2(H))


def make_model(family: str, n: int, init: str = "structured", seed: int = 0, depth: int | None = None,
               match: str = "qdct") -> OpqnnModel:
    """Two-axis model. An ansatz without an explicit depth is parameter-matched
    to the ``match`` family on the same register."""
    if Family(family) is Family.ANSATZ and depth is None:
        target = qdct_param_count(n) if match == "qdct" else qft_param_count(n)
        depth = matched_ansatz_depth(target, n)
    return OpqnnModel.create(family, n, axes=2, init=init, depth=depth, seed=seed)


def states_of(samples) -> np.ndarray:
    return np.stack([s.state for s in samples], axis=1)


def split_dataset(fields, strategy: str = "comprehensive", split_ratio: float = 0.8, seed: int = 0,
                  flow_type: str | None = None, condition: str | None = None, component: str | None = None):
    split = data.partition(fields, strategy, split_ratio, seed, flow_type, condition, component)
    return [data.encode(f) for f in split.train], [data.encode(f) for f in split.test]


def _grid_metrics(A: np.ndarray, samples, cfg: TrainConfig, real: bool = False) -> dict:
    S = states_of(samples)
    F = batch_fidelities(A, S, cfg.lam, cfg.sesquilinear)
    X = tikhonov_solve(gram_from_basis(A, cfg.sesquilinear), cross_from_basis(A, S, cfg.sesquilinear), cfg.lam)
    errs = []
    for k, s in enumerate(samples):
        rec = s.norm * (A @ X[:, k]).real
        errs.append(mse(rec.reshape(s.source.values.shape), s.source.values))
    F = np.where(np.isfinite(F), F, 0.0)
    return {"fidelity": F, "mse": np.array(errs), "coefficients": X}


def reconstruction_run(family: str, m: int, train_set, test_set, cfg: TrainConfig, init: str = "structured",
                       seed: int = 0, depth: int | None = None, train: bool = True) -> dict:
    """Train (or fit, for the Chebyshev baseline) and evaluate on the test set.

    With ``train=False`` the circuit is evaluated at its initial parameters.
    """
    cfg = replace(cfg, m=m, seed=seed)
    H, W, n = _side_qubits(train_set)
    t0 = time.perf_counter()
    if family == "chebyshev":
        ccfg = replace(cfg, sesquilinear=False)
        A = baseline.cheb_basis(H, W, m, cfg.ordering).columns.astype(complex)
        train_F = batch_fidelities(A, states_of(train_set), cfg.lam, False)
        metrics = _grid_metrics(A, test_set, ccfg)
        history = None
        initial_loss = float(np.mean(1 - train_F))
        n_params = 0
        model = None
        initial_test = float(np.mean(metrics["fidelity"]))
    else:
        model = make_model(family, n, init, seed, depth)
        n_params = model.n_params
        run_cfg = cfg
        initial_loss = mean_reconstruction_loss(model, states_of(train_set), run_cfg)
        if train:
            model, history = train_reconstruction(model, train_set, test_set, run_cfg)
            initial_test = history.initial_test_metric
        else:
            history = None
        metrics = _grid_metrics(basis_matrix(model, m, cfg.ordering), test_set, run_cfg)
        if history is None:
            initial_test = float(np.mean(metrics["fidelity"]))
    return {
        "family": family,
        "init": init if family != "chebyshev" else "fit",
        "m": m,
        "seed": seed,
        "n_params": n_params,
        "initial_loss": initial_loss,
        "initial_test_fidelity": initial_test,
        "test_fidelity": float(np.mean(metrics["fidelity"])),
        "test_mse": float(np.mean(metrics["mse"])),
        "per_sample_fidelity": metrics["fidelity"],
        "per_sample_mse": metrics["mse"],
        "history": history,
        "model": model,
        "wall_ms": 1e3 * (time.perf_counter() - t0),
    }


def sweep_cells(families, m_values, seeds: int, inits=("structured", "random")) -> list[tuple[str, str, int, int]]:
    """(family, init, m, seed) tuples in a fixed order.

    Structured starts and the Chebyshev fit are deterministic and get one
    cell; random starts get ``seeds`` cells. The ansatz has no structured start.
    """
    cells = []
    for fam in families:
        for m in m_values:
            if fam == "chebyshev":
                cells.append((fam, "fit", m, 0))
                continue
            for init in inits:
                if init == "structured" and fam != "ansatz":
                    cells.append((fam, init, m, 0))
                elif init == "random":
                    cells.extend((fam, init, m, s) for s in range(seeds))
    return cells


def summarize(rows: list[dict], key: str) -> list[dict]:
    """Mean and sample std of ``key`` per (family, init, m), in first-seen order."""
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        groups.setdefault((r["family"], r["init"], r["m"]), []).append(r[key])
    out = []
    for (fam, init, m), vals in groups.items():
        v = np.array(vals, dtype=float)
        out.append({"family": fam, "init": init, "m": m, "n": v.size, f"{key}_mean": float(v.mean()),
                    f"{key}_std": float(v.std(ddof=1)) if v.size > 1 else 0.0})
    return out


# ---------------------------------------------------------------------------
# classification


def classification_dataset(H: int = 16, W: int = 16, times=range(10), components=("u",)):
    """The frozen four-class set: every synthetic condition variant and time step,
    labelled by flow type in ``data.KINDS`` order."""
    fields = data.synth_dataset(data.KINDS, H, W, times, components)
    return labelled(fields)


def labelled(fields):
    kinds = [data.FLOW_TYPE[k] for k in data.KINDS]
    types = [t for t in kinds if any(f.flow_type == t for f in fields)]
    types += sorted({f.flow_type for f in fields} - set(types))
    labels = np.array([types.index(f.flow_type) for f in fields])
    samples = [data.encode(f) for f in fields]
    return samples, labels, types


def classification_run(family: str, samples, labels, cfg: TrainConfig, m: int = 6, seed: int = 0,
                       split_ratio: float = 0.8, n_features: int | None = None, n_classes: int | None = None
                       ) -> tuple[classify.ClassificationReport, TrainHistory]:
    """One head per family on a stratified split.

    The Chebyshev baseline uses ``n_features`` coefficients (default: the
    split-complex width ``2 m``) so its head matches the quantum one.
    """
    cfg = replace(cfg, m=m, seed=seed)
    n_classes = n_classes or int(np.max(labels)) + 1
    tr, te = data.stratified_split(samples, labels, split_ratio, seed)
    S = states_of(samples)
    t0 = time.perf_counter()
    if family == "chebyshev":
        H, W = samples[0].source.values.shape
        f = n_features or 2 * m
        feats = baseline.cheb_features(S, H, W, f, cfg.lam, cfg.ordering)
        scale = np.max(np.abs(feats[tr])) or 1.0
        feats = feats / scale
        fc = classify.FcLayer.create(f, n_classes, seed)
        fc, history = _train_head(fc, feats[tr], labels[tr], feats[te], labels[te], cfg)
        model = None
        pred_tr = classify.fc_forward(fc, feats[tr])[2]
        pred_te = classify.fc_forward(fc, feats[te])[2]
        used_m = f
    else:
        n = int(np.log2(samples[0].source.values.shape[0]))
        model = make_model(family, n, "structured", seed, match="qft")
        mode = classify.default_feature_mode(model.family)
        fc = classify.FcLayer.create(classify.feature_dim(m, mode), n_classes, seed)
        model, fc, history = train_classifier(model, fc, (S[:, tr], labels[tr]), (S[:, te], labels[te]), cfg)
        feats = classify.batch_features(model, S, m, cfg.lam, cfg.ordering, cfg.sesquilinear, mode)
        pred_tr = classify.fc_forward(fc, feats[tr])[2]
        pred_te = classify.fc_forward(fc, feats[te])[2]
        used_m = m
    report = classify.ClassificationReport(
        family=family,
        m=used_m,
        n_features=fc.n_features,
        accuracy=classify.accuracy(pred_te, labels[te]),
        train_accuracy=classify.accuracy(pred_tr, labels[tr]),
        per_class_precision=classify.per_class_precision(pred_te, labels[te], n_classes),
        circuit_params=model.n_params if model is not None else 0,
        fc_params=fc.n_params,
        wall_ms=1e3 * (time.perf_counter() - t0),
    )
    return report, history


def _train_head(fc, X_tr, y_tr, X_te, y_te, cfg: TrainConfig):
    """FC-only training on fixed features, same optimizer and schedule."""
    from .train import AdamState, EpochRecord, adam_step, lr_at

    history = TrainHistory(metric="test_accuracy")
    history.initial_train_loss = classify.cross_entropy(classify.fc_forward(fc, X_tr)[1], y_tr)
    history.initial_test_metric = classify.accuracy(classify.fc_forward(fc, X_te)[2], y_te)
    w = fc.flat()
    adam = AdamState.zeros(w.size, cfg.beta1, cfg.beta2, cfg.eps_hat)
    rng = np.random.default_rng(cfg.seed)
    n = len(y_tr)
    bs = cfg.batch_size or n
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        lr = lr_at(epoch, cfg)
        order = rng.permutation(n) if cfg.batch_size else np.arange(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            loss, gW, gb = classify.fc_grad(fc, X_tr[idx], y_tr[idx])
            total += loss * idx.size
            w, adam = adam_step(adam, w, np.concatenate([gW.ravel(), gb]), lr)
            fc = fc.from_flat(w)
        acc = classify.accuracy(classify.fc_forward(fc, X_te)[2], y_te)
        history.records.append(EpochRecord(epoch, lr, total / n, acc, 1e3 * (time.perf_counter() - t0)))
    return fc, history
