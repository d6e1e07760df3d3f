"""Command line driver.

Every command writes its outputs plus a ``manifest.json`` recording the
resolved configuration, so ``polyqrom rerun --manifest ...`` can replay it.

Exit codes: 0 success, 2 bad flags, 3 data problems, 4 numerical or
validation failures.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, classify, data, experiments, validation
from ._files import atomic_write_json, atomic_write_text
from .opqnn import DegenerateBasisError
from .projection import EstimationError, SingularSystemError
from .recon import DegenerateReconstructionError
from .train import NumericalError, TrainConfig

log = logging.getLogger("polyqrom")

EXIT_OK, EXIT_FLAGS, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
CSV_SCHEMA = "1"
TIMING_FIELDS = ("wall_ms",)
WORKERS_ENV = "POLYQROM_WORKERS"


class DataError(Exception):
    pass


class ValidationFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# argument types


def int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def str_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def m_range(text: str) -> list[int]:
    """``2..18`` (inclusive), ``2..18:4`` (with step) or ``2,6,10``."""
    try:
        if ".." in text:
            span, _, step = text.partition(":")
            lo, hi = (int(v) for v in span.split(".."))
            values = list(range(lo, hi + 1, int(step) if step else 1))
        else:
            values = int_list(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad m range {text!r}") from exc
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"bad m range {text!r}")
    return values


def grid_shape(text: str) -> tuple[int, int]:
    try:
        parts = [int(v) for v in text.lower().split("x")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from exc
    if len(parts) == 1:
        parts *= 2
    if len(parts) != 2 or any(p < 1 or p & (p - 1) for p in parts):
        raise argparse.ArgumentTypeError("grid sides must be powers of two, e.g. 16 or 16x16")
    return parts[0], parts[1]


def boolean(text) -> bool:
    if isinstance(text, bool):
        return text
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def family_list(text: str) -> list[str]:
    fams = str_list(text)
    bad = [f for f in fams if f not in experiments.FAMILIES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown families {bad}; choose from {experiments.FAMILIES}")
    return fams


# ---------------------------------------------------------------------------
# parser


def _train_flags(p: argparse.ArgumentParser):
    p.add_argument("--epochs", type=int, default=75)
    p.add_argument("--lr", type=float, default=1e-3, help="base learning rate")
    p.add_argument("--decay-factor", type=float, default=0.1)
    p.add_argument("--decay-period", type=int, default=25, help="epochs between decays")
    p.add_argument("--fd-epsilon", type=float, default=1e-4)
    p.add_argument("--lam", type=float, default=1e-6, help="Tikhonov regularization")
    p.add_argument("--ordering", choices=("diagonal", "natural"), default="diagonal")
    p.add_argument("--bilinear", type=boolean, nargs="?", const=True, default=False,
                   help="use the transpose (not conjugate-transpose) overlap in the solve")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)


def _data_flags(p: argparse.ArgumentParser, required: bool = True):
    p.add_argument("--data", type=Path, required=required, help="FFD1 dataset directory")
    p.add_argument("--strategy", choices=("comprehensive", "minimal_class"), default="comprehensive")
    p.add_argument("--split-ratio", type=float, default=0.8)
    p.add_argument("--flow-type", default=None)
    p.add_argument("--condition", default=None)
    p.add_argument("--component", choices=("u", "v"), default=None)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="polyqrom", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"polyqrom {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None, help="key=value file; flags override it")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        subs[name] = p
        return p

    p = add("synth", "write a synthetic FFD1 dataset")
    p.add_argument("--kind", type=str_list, default=list(data.KINDS), help="comma list or 'all'")
    p.add_argument("--grid", type=grid_shape, default=(16, 16))
    p.add_argument("--times", type=int, default=10, help="time steps per condition")
    p.add_argument("--components", type=str_list, default=["u", "v"])
    p.add_argument("--categories", type=str_list, default=["bc", "geo", "prop"])

    p = add("reconstruct", "train one family (or fit Chebyshev) and report test metrics")
    _data_flags(p)
    p.add_argument("--family", choices=experiments.FAMILIES, default="qdct")
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--init", choices=("structured", "random"), default="structured")
    p.add_argument("--depth", type=int, default=None, help="ansatz depth (default: parameter-matched)")
    p.add_argument("--emit-grids", type=boolean, nargs="?", const=True, default=False,
                   help="write reconstructed test grids as CSV")
    _train_flags(p)

    p = add("sweep", "fidelity and initial loss against m over families and seeds")
    _data_flags(p)
    p.add_argument("--m-range", type=m_range, default=list(range(2, 19)))
    p.add_argument("--families", type=family_list, default=list(experiments.FAMILIES))
    p.add_argument("--inits", type=str_list, default=["structured", "random"])
    p.add_argument("--seeds", type=int, default=5, help="random-init seeds per (family, m)")
    p.add_argument("--train", type=boolean, nargs="?", const=True, default=True,
                   help="train each cell (false: evaluate at initialization only)")
    p.add_argument("--workers", type=int, default=None, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    _train_flags(p)

    p = add("classify", "four-class flow-type classification report")
    _data_flags(p, required=False)
    p.add_argument("--families", type=family_list, default=["qft", "qdct", "chebyshev"])
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--m", type=int, default=6)
    p.add_argument("--grid", type=grid_shape, default=(16, 16), help="grid of the built-in synthetic set")
    _train_flags(p)

    add("validate", "run the oracle suite")

    p = add("rerun", "replay a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--check", type=boolean, nargs="?", const=True, default=False,
                   help="compare CSV digests with the manifest and fail on mismatch")
    return parser, subs


# ---------------------------------------------------------------------------
# config file and manifest


def read_config(path: Path) -> dict[str, str]:
    """Plain ``key = value`` lines; ``#`` starts a comment; keys use flag names."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_args(argv=None) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is not None:
        sp = subs[args.command]
        try:
            conf = read_config(args.config)
        except (OSError, ValueError) as exc:
            sp.error(str(exc))
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(conf) - known - {"config", "out"})
        if unknown:
            sp.error(f"unknown config keys: {', '.join(unknown)}")
        sp.set_defaults(**conf)  # string defaults go through each flag's type
        args = parser.parse_args(argv)
    return args


def train_config(args) -> TrainConfig:
    try:
        return TrainConfig(epochs=args.epochs, base_lr=args.lr, decay_factor=args.decay_factor,
                           decay_period_epochs=args.decay_period, fd_epsilon=args.fd_epsilon, lam=args.lam,
                           m=getattr(args, "m", 8), seed=args.seed, ordering=args.ordering,
                           sesquilinear=not args.bilinear, batch_size=args.batch_size)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, tuple):
        return list(value)
    return value


def snapshot(args) -> dict:
    skip = {"config", "out", "verbose", "manifest", "check", "workers"}
    return {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in skip}


def content_digest(path: Path) -> str:
    """SHA-256 of a CSV with timing columns removed (other files: raw bytes)."""
    path = Path(path)
    if path.suffix != ".csv":
        return hashlib.sha256(path.read_bytes()).hexdigest()
    rows = list(csv.reader(io.StringIO(path.read_text())))
    if not rows:
        return hashlib.sha256(b"").hexdigest()
    keep = [i for i, name in enumerate(rows[0]) if name not in TIMING_FIELDS]
    text = "\n".join(",".join(r[i] for i in keep) for r in rows)
    return hashlib.sha256(text.encode()).hexdigest()


def write_manifest(args, out: Path, outputs: list[Path], started: str, cfg: TrainConfig | None = None) -> Path:
    manifest = {
        "command": args.command,
        "config": snapshot(args),
        "train_config": asdict(cfg) if cfg is not None else None,
        "seed": getattr(args, "seed", None),
        "artifact_version": __version__,
        "csv_schema": CSV_SCHEMA,
        "started": started,
        "finished": _now(),
        "outputs": {str(p.relative_to(out)): content_digest(p) for p in sorted(outputs) if p.suffix == ".csv"},
    }
    return atomic_write_json(out / "manifest.json", manifest)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _out_dir(args, default: str) -> Path:
    out = Path(args.out) if args.out is not None else Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_rows(path: Path, rows: list[dict], columns: list[str]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return atomic_write_text(path, buf.getvalue())


# ---------------------------------------------------------------------------
# data loading


def load_fields(args) -> list[data.FlowField]:
    root = Path(args.data)
    if not root.is_dir():
        raise DataError(f"data directory {root} does not exist")
    try:
        fields = data.load_dataset(root)
    except (data.FormatError, OSError) as exc:
        raise DataError(str(exc)) from exc
    if not fields:
        raise DataError(f"no .ffd files under {root}")
    return fields


def load_split(args):
    fields = load_fields(args)
    try:
        return experiments.split_dataset(fields, args.strategy, args.split_ratio, args.seed, args.flow_type,
                                         args.condition, args.component)
    except (ValueError, data.DegenerateFieldError) as exc:
        raise DataError(str(exc)) from exc


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> list[Path]:
    out = _out_dir(args, "synth_data")
    kinds = list(data.KINDS) if args.kind in (["all"], []) else args.kind
    bad = [k for k in kinds if k not in data.KINDS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown kinds {bad}")
    H, W = args.grid
    fields = data.synth_dataset(kinds, H, W, range(args.times), args.components, args.categories)
    paths = data.save_dataset(fields, out)
    rows = [{"path": str(p.relative_to(out)), "flow_type": f.flow_type, "condition": f.condition,
             "component": f.component, "time_index": f.time_index, "height": f.height, "width": f.width}
            for p, f in zip(paths, fields)]
    return [write_rows(out / "index.csv", rows, list(rows[0]))]


def _per_sample_rows(result, test_set) -> list[dict]:
    return [{"flow_type": s.source.flow_type, "condition": s.source.condition, "component": s.source.component,
             "time_index": s.source.time_index, "fidelity": float(f), "mse": float(e)}
            for s, f, e in zip(test_set, result["per_sample_fidelity"], result["per_sample_mse"])]


def cmd_reconstruct(args) -> list[Path]:
    out = _out_dir(args, "reconstruct_out")
    cfg = train_config(args)
    train_set, test_set = load_split(args)
    result = experiments.reconstruction_run(args.family, args.m, train_set, test_set, cfg, args.init, args.seed,
                                            args.depth, train=args.family != "chebyshev")
    written = []
    if result["history"] is not None:
        written.append(out / "history.csv")
        result["history"].to_csv(written[-1])
    written.append(write_rows(out / "samples.csv", _per_sample_rows(result, test_set),
                              ["flow_type", "condition", "component", "time_index", "fidelity", "mse"]))
    metrics = {k: result[k] for k in ("family", "init", "m", "seed", "n_params", "initial_loss",
                                      "initial_test_fidelity", "test_fidelity", "test_mse", "wall_ms")}
    written.append(atomic_write_json(out / "metrics.json", metrics))
    if args.emit_grids:
        written += _emit_grids(args, result, test_set, out)
    log.info("test fidelity %.6f, mse %.3e", metrics["test_fidelity"], metrics["test_mse"])
    return written


def _emit_grids(args, result, test_set, out: Path) -> list[Path]:
    from . import baseline
    from .opqnn import basis_matrix
    from .projection import cross_from_basis, gram_from_basis, tikhonov_solve

    H, W = test_set[0].source.values.shape
    if result["model"] is None:
        A, ses = baseline.cheb_basis(H, W, args.m, args.ordering).columns, False
    else:
        A, ses = basis_matrix(result["model"], args.m, args.ordering), not args.bilinear
    paths = []
    for s in test_set:
        x = tikhonov_solve(gram_from_basis(A, ses), cross_from_basis(A, s.state, ses), args.lam)
        grid = s.norm * (A @ x).real
        f = s.source
        p = out / "grids" / f.flow_type / f.condition / f"{f.component}_{f.time_index}.csv"
        p.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(p, grid.reshape(H, W), delimiter=",", fmt="%.17g")
        paths.append(p)
    return paths


_SWEEP_STATE: dict = {}


def _sweep_init(train_set, test_set, cfg):
    _SWEEP_STATE.update(train=train_set, test=test_set, cfg=cfg)


def _sweep_cell(cell, train: bool, cell_dir: str):
    fam, init, m, seed = cell
    st = _SWEEP_STATE
    res = experiments.reconstruction_run(fam, m, st["train"], st["test"], st["cfg"], init, seed,
                                         train=train and fam != "chebyshev")
    row = {k: res[k] for k in ("family", "init", "m", "seed", "n_params", "initial_loss", "initial_test_fidelity",
                               "test_fidelity", "test_mse", "wall_ms")}
    atomic_write_json(Path(cell_dir) / f"{fam}_{init}_m{m}_s{seed}.json", row)
    return row


def worker_count(args) -> int:
    if getattr(args, "workers", None):
        return max(1, args.workers)
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def cmd_sweep(args) -> list[Path]:
    out = _out_dir(args, "sweep_out")
    cfg = train_config(args)
    train_set, test_set = load_split(args)
    cells = experiments.sweep_cells(args.families, args.m_range, args.seeds, tuple(args.inits))
    cell_dir = out / "cells"
    cell_dir.mkdir(exist_ok=True)
    workers = worker_count(args)
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=_sweep_init, initargs=(train_set, test_set, cfg)) as pool:
            futures = [pool.submit(_sweep_cell, c, args.train, str(cell_dir)) for c in cells]
            rows = [f.result() for f in futures]
    else:
        _sweep_init(train_set, test_set, cfg)
        rows = [_sweep_cell(c, args.train, str(cell_dir)) for c in cells]
    cols = ["family", "init", "m", "seed", "n_params", "initial_loss", "initial_test_fidelity", "test_fidelity",
            "test_mse", "wall_ms"]
    fid = experiments.summarize(rows, "test_fidelity")
    loss = experiments.summarize(rows, "initial_loss")
    return [
        write_rows(out / "cells.csv", rows, cols),
        write_rows(out / "fidelity_vs_m.csv", fid, list(fid[0])),
        write_rows(out / "initial_loss_vs_m.csv", loss, list(loss[0])),
    ]


def cmd_classify(args) -> list[Path]:
    out = _out_dir(args, "classify_out")
    cfg = train_config(args)
    if args.data is not None:
        try:
            fields = load_fields(args)
            if args.component:
                fields = [f for f in fields if f.component == args.component]
            samples, labels, types = experiments.labelled(fields)
        except (ValueError, data.DegenerateFieldError) as exc:
            raise DataError(str(exc)) from exc
    else:
        H, W = args.grid
        samples, labels, types = experiments.classification_dataset(H, W, components=(args.component or "u",))
    if len(types) != args.classes:
        raise DataError(f"dataset has {len(types)} flow types, --classes asks for {args.classes}")
    reports, written = [], []
    for fam in args.families:
        report, history = experiments.classification_run(fam, samples, labels, cfg, args.m, args.seed,
                                                         args.split_ratio, n_classes=args.classes)
        reports.append(report)
        written.append(out / f"history_{fam}.csv")
        history.to_csv(written[-1])
        log.info("%s: accuracy %.4f with %d parameters", fam, report.accuracy, report.parameter_budget)
    written.append(atomic_write_text(out / "report.csv", classify.reports_to_csv(reports)))
    written.append(atomic_write_text(out / "report.json", classify.reports_to_json(reports)))
    written.append(atomic_write_json(out / "classes.json", {"classes": types}))
    return written


def cmd_validate(args) -> list[Path]:
    checks = validation.run_all()
    for c in checks:
        print(c.line())
    written = []
    if args.out is not None:
        out = _out_dir(args, ".")
        rows = [{"check": c.name, "passed": c.passed, "error": c.error, "tol": c.tol} for c in checks]
        written.append(write_rows(out / "validation.csv", rows, ["check", "passed", "error", "tol"]))
    failed = [c.name for c in checks if not c.passed]
    if failed:
        raise ValidationFailure(f"{len(failed)} oracle check(s) failed: {', '.join(failed)}")
    return written


COMMANDS = {
    "synth": cmd_synth,
    "reconstruct": cmd_reconstruct,
    "sweep": cmd_sweep,
    "classify": cmd_classify,
    "validate": cmd_validate,
}


def cmd_rerun(args) -> list[Path]:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read manifest: {exc}") from exc
    command = manifest.get("command")
    if command not in COMMANDS:
        raise DataError(f"manifest names unknown command {command!r}")
    _, subs = build_parser()
    # parser defaults first, then the recorded values on top
    replay = argparse.Namespace(**{a.dest: a.default for a in subs[command]._actions if a.dest != "help"})
    for key, value in manifest["config"].items():
        if key in ("data",) and value is not None:
            value = Path(value)
        if key == "grid" and value is not None:
            value = tuple(value)
        setattr(replay, key, value)
    replay.command = command
    replay.out = args.out if args.out is not None else Path(args.manifest).parent
    replay.config = None
    started = _now()
    written = COMMANDS[command](replay)
    out = Path(replay.out)
    cfg = train_config(replay) if hasattr(replay, "epochs") else None
    write_manifest(replay, out, written, started, cfg)
    if args.check:
        got = {str(p.relative_to(out)): content_digest(p) for p in written if p.suffix == ".csv"}
        diff = sorted(k for k, v in manifest["outputs"].items() if got.get(k) != v)
        if diff:
            raise ValidationFailure(f"rerun differs from manifest in: {', '.join(diff)}")
        print(f"rerun reproduces {len(got)} CSV file(s)")
    return written


COMMANDS["rerun"] = cmd_rerun


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    started = _now()
    try:
        written = COMMANDS[args.command](args)
        if args.command != "rerun" and not (args.command == "validate" and args.out is None):
            cfg = train_config(args) if hasattr(args, "epochs") else None
            write_manifest(args, Path(args.out) if args.out else _default_out(args.command), written, started, cfg)
    except argparse.ArgumentTypeError as exc:
        print(f"polyqrom: error: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except DataError as exc:
        print(f"polyqrom: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValidationFailure as exc:
        print(f"polyqrom: validation failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SingularSystemError, DegenerateReconstructionError, DegenerateBasisError, NumericalError,
            EstimationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"polyqrom: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _default_out(command: str) -> Path:
    return Path({"synth": "synth_data", "reconstruct": "reconstruct_out", "sweep": "sweep_out",
                 "classify": "classify_out", "validate": "."}[command])


if __name__ == "__main__":
    sys.exit(main())
