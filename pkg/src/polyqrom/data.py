"""Flow-field containers, synthetic flows, FFD1 / CSV I/O, amplitude encoding
and the two dataset partition strategies.

FFD1 layout (all little-endian)::

    offset 0   b"FFD1"
    offset 4   u32 height
    offset 8   u32 width
    offset 12  u8  component tag (0 = u, 1 = v)
    offset 13  u32 time index
    offset 17  height * width float64 values, row-major

On disk a dataset lives under ``<flow_type>/<condition>/<component>_<t>.ffd``.
"""
from __future__ import annotations

import os
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"FFD1"
_HEADER = struct.Struct("<4sIIBI")
COMPONENTS = ("u", "v")
KINDS = ("cavity_vortex", "tube_profile", "dam_front", "cylinder_wake")
FLOW_TYPE = {"cavity_vortex": "cavity", "tube_profile": "tube", "dam_front": "dam", "cylinder_wake": "cylinder"}


class FormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class DegenerateFieldError(ValueError):
    pass


@dataclass
class FlowField:
    values: np.ndarray
    flow_type: str = "synthetic"
    condition: str = "default"
    component: str = "u"
    time_index: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("flow field values must be a 2-D grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("flow field contains NaN or Inf")
        if self.component not in COMPONENTS:
            raise ValueError(f"component must be one of {COMPONENTS}")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def key(self) -> tuple[str, str, str]:
        return self.flow_type, self.condition, self.component


@dataclass
class EncodedSample:
    state: np.ndarray
    norm: float
    source: FlowField


@dataclass
class DatasetSplit:
    train: list
    test: list
    strategy: str
    split_ratio: float
    seed: int | None = None


# ---------------------------------------------------------------------------
# encoding


def _is_pow2(k: int) -> bool:
    return k >= 1 and k & (k - 1) == 0


def encode(field: FlowField) -> EncodedSample:
    """Row-major amplitude encoding; the row index sits on the axis-0 register."""
    if not (_is_pow2(field.height) and _is_pow2(field.width)):
        raise ValueError(f"grid {field.height}x{field.width} is not power-of-two sized")
    flat = field.values.reshape(-1)
    norm = float(np.linalg.norm(flat))
    if norm <= 1e-12:
        raise DegenerateFieldError("field has (near) zero 2-norm and cannot be encoded")
    return EncodedSample((flat / norm).astype(complex), norm, field)


def decode(sample: EncodedSample) -> np.ndarray:
    return (sample.norm * sample.state.real).reshape(sample.source.values.shape)


# ---------------------------------------------------------------------------
# synthetic flows


def _grid(H: int, W: int):
    # cell centres in (0, 1); y follows rows, x follows columns
    y = (np.arange(H) + 0.5) / H
    x = (np.arange(W) + 0.5) / W
    return np.meshgrid(x, y)


DEFAULT_PARAMS = {
    "cavity_vortex": {"strength": 0.2, "skew": 1.0, "spinup": 4.0, "lid": 1.0},
    "tube_profile": {"velocity": 1.0, "develop": 0.3, "inlet": 0.0, "offset": 0.1},
    "dam_front": {"height": 1.0, "speed": 0.06, "width": 0.08, "start": 0.2},
    "cylinder_wake": {"circulation": 1.0, "spacing": 0.3, "core": 0.08, "drift": 0.03, "freestream": 1.0},
}

# condition variants per kind: bc / geo / prop style changes of one parameter each
CONDITIONS = {
    "cavity_vortex": {"bc": ("strength", [0.1, 0.2, 0.4]), "geo": ("skew", [0.8, 1.0, 1.4]),
                      "prop": ("spinup", [2.0, 4.0, 8.0])},
    "tube_profile": {"bc": ("velocity", [0.5, 1.0, 2.0]), "geo": ("inlet", [0.0, 0.1, 0.2]),
                     "prop": ("develop", [0.15, 0.3, 0.6])},
    "dam_front": {"bc": ("height", [0.5, 1.0, 2.0]), "geo": ("start", [0.1, 0.2, 0.3]),
                  "prop": ("width", [0.05, 0.08, 0.12])},
    "cylinder_wake": {"bc": ("circulation", [0.5, 1.0, 2.0]), "geo": ("spacing", [0.25, 0.3, 0.35]),
                      "prop": ("core", [0.06, 0.08, 0.1])},
}


def synth(kind: str, H: int, W: int, params: dict | None = None, t: int = 0,
          component: str = "u", condition: str = "default") -> FlowField:
    """Deterministic analytic stand-ins for the four benchmark flow types.

    cavity_vortex
        one recirculation cell from the stream function
        ``s(t) sin(pi x) sin(pi y**skew)``, ``s(t) = strength (1 - exp(-(t+1)/spinup))``,
        plus a ``lid``-driven shear layer along row 0 in ``u``.
    tube_profile
        parabolic profile in a channel spanning ``y in [offset, 1]``, developing
        along x over a length ``develop`` (growing slowly with t), entering at ``inlet``.
    dam_front
        ``tanh`` front at ``start + speed t`` with thickness ``width``.
    cylinder_wake
        free stream with a velocity deficit, plus a row of Gaussian vortices
        of alternating sign, ``spacing`` apart, drifting by ``drift`` per step.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown flow kind {kind!r}; expected one of {KINDS}")
    if not (_is_pow2(H) and _is_pow2(W)):
        raise ValueError("grid sides must be powers of two")
    if component not in COMPONENTS:
        raise ValueError(f"component must be one of {COMPONENTS}")
    if t < 0:
        raise ValueError("time index must be >= 0")
    p = dict(DEFAULT_PARAMS[kind])
    unknown = set(params or {}) - set(p)
    if unknown:
        raise ValueError(f"unknown parameters for {kind}: {sorted(unknown)}")
    p.update(params or {})
    x, y = _grid(H, W)

    if kind == "cavity_vortex":
        if p["skew"] <= 0 or p["spinup"] <= 0:
            raise ValueError("skew and spinup must be positive")
        s = p["strength"] * (1 - np.exp(-(t + 1) / p["spinup"]))
        ys = y ** p["skew"]
        dys = p["skew"] * y ** (p["skew"] - 1)
        u = s * np.pi * np.sin(np.pi * x) * np.cos(np.pi * ys) * dys
        v = -s * np.pi * np.cos(np.pi * x) * np.sin(np.pi * ys)
        # shear layer under the moving lid (row 0 is the lid side)
        u = u + p["lid"] * np.exp(-y / 0.1)
    elif kind == "tube_profile":
        if p["develop"] <= 0 or not 0 <= p["offset"] < 1:
            raise ValueError("develop must be positive and offset in [0, 1)")
        length = p["develop"] * (1 + 0.05 * t)
        ramp = 1 - np.exp(-(x + p["inlet"]) / length)
        # channel walls at y = offset and y = 1 (fluid below offset is at rest)
        eta = np.clip((y - p["offset"]) / (1 - p["offset"]), 0.0, 1.0)
        profile = 4 * eta * (1 - eta)
        u = p["velocity"] * profile * ramp
        v = p["velocity"] * 0.5 * (1 - 2 * eta) * np.exp(-(x + p["inlet"]) / length) * profile
    elif kind == "dam_front":
        if p["width"] <= 0:
            raise ValueError("width must be positive")
        front = dam_front_position(p, t)
        arg = (front - x) / p["width"]
        depth = np.clip(1.2 - y, 0.0, None)
        u = p["height"] * 0.5 * (1 + np.tanh(arg)) * depth
        v = -p["height"] * 0.5 / np.cosh(arg) ** 2 * y * (1 - y)
    else:
        if p["core"] <= 0 or p["spacing"] <= 0:
            raise ValueError("core and spacing must be positive")
        # free stream with a Gaussian velocity deficit behind the body
        u = p["freestream"] * (1 - 0.6 * np.exp(-((y - 0.5) ** 2) / 0.02) * np.exp(-x / 0.6))
        v = np.zeros_like(x)
        x0 = 0.15 + p["drift"] * t
        k = 0
        while x0 + k * p["spacing"] < 1.0 + 3 * p["core"]:
            xc = x0 + k * p["spacing"]
            yc = 0.5 + (0.12 if k % 2 == 0 else -0.12)
            gam = p["circulation"] * (1 if k % 2 == 0 else -1)
            r2 = (x - xc) ** 2 + (y - yc) ** 2
            g = gam * np.exp(-r2 / (2 * p["core"] ** 2))
            u += -g * (y - yc) / p["core"]
            v += g * (x - xc) / p["core"]
            k += 1
    values = u if component == "u" else v
    return FlowField(values, FLOW_TYPE[kind], condition, component, int(t))


def dam_front_position(params: dict, t: int) -> float:
    p = dict(DEFAULT_PARAMS["dam_front"])
    p.update(params)
    return p["start"] + p["speed"] * t


def synth_dataset(kinds: Sequence[str] = KINDS, H: int = 16, W: int = 16, times: Iterable[int] = range(10),
                  components: Sequence[str] = ("u",), categories: Sequence[str] = ("bc", "geo", "prop")) -> list[FlowField]:
    """Every (kind, condition variant, component, time) combination.

    Condition tags look like ``bc0``/``geo2``: the category and the variant index.
    """
    out = []
    times = list(times)
    for kind in kinds:
        for cat in categories:
            pname, values = CONDITIONS[kind][cat]
            for vi, val in enumerate(values):
                for comp in components:
                    for t in times:
                        out.append(synth(kind, H, W, {pname: val}, t, comp, f"{cat}{vi}"))
    return out


# ---------------------------------------------------------------------------
# FFD1 / CSV


def save_grid(field: FlowField, path) -> None:
    path = Path(path)
    header = _HEADER.pack(MAGIC, field.height, field.width, COMPONENTS.index(field.component), field.time_index)
    payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    tmp = path.with_suffix(path.suffix + ".tmp")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(tmp, "wb") as fh:
        fh.write(header + payload)
    os.replace(tmp, path)


_LAYOUT_RE = re.compile(r"^(?P<component>[uv])_(?P<t>\d+)\.ffd$")


def load_grid(path, flow_type: str | None = None, condition: str | None = None) -> FlowField:
    """Read an FFD1 file; flow type and condition come from the directory layout
    unless given explicitly."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"truncated header: expected {_HEADER.size} bytes, got {len(raw)}", len(raw))
    magic, h, w, tag, t = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if tag >= len(COMPONENTS):
        raise FormatError(f"unknown component tag {tag}", 12)
    expected = _HEADER.size + 8 * h * w
    if len(raw) != expected:
        raise FormatError(f"expected {expected} bytes for a {h}x{w} grid, got {len(raw)}", min(len(raw), expected))
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(h, w).astype(float)
    bad = np.flatnonzero(~np.isfinite(values.reshape(-1)))
    if bad.size:
        raise FormatError("non-finite value", _HEADER.size + 8 * int(bad[0]))
    if _LAYOUT_RE.match(path.name) and flow_type is None and condition is None:
        condition = path.parent.name
        flow_type = path.parent.parent.name
    return FlowField(values, flow_type or "unknown", condition or "default", COMPONENTS[tag], t)


def dataset_path(root, field: FlowField) -> Path:
    return Path(root) / field.flow_type / field.condition / f"{field.component}_{field.time_index}.ffd"


def save_dataset(fields: Iterable[FlowField], root) -> list[Path]:
    paths = []
    for f in fields:
        p = dataset_path(root, f)
        save_grid(f, p)
        paths.append(p)
    return paths


def load_dataset(root) -> list[FlowField]:
    root = Path(root)
    fields = [load_grid(p) for p in sorted(root.glob("*/*/*.ffd"))]
    return sorted(fields, key=lambda f: (f.flow_type, f.condition, f.component, f.time_index))


def load_csv(path, shape: tuple[int, int] | None = None, **meta) -> FlowField:
    """Plain numeric CSV grid (one row per line); optional shape check."""
    try:
        values = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise FormatError(f"unparsable CSV: {exc}", 0) from exc
    if shape is not None and values.shape != tuple(shape):
        raise FormatError(f"CSV grid has shape {values.shape}, expected {tuple(shape)}", 0)
    if not np.all(np.isfinite(values)):
        raise FormatError("non-finite value in CSV", 0)
    return FlowField(values, **meta)


def save_csv(field: FlowField, path) -> None:
    np.savetxt(path, field.values, delimiter=",", fmt="%.17g")


# ---------------------------------------------------------------------------
# partitions


def _n_train(n: int, ratio: float) -> int:
    if not 0 < ratio < 1:
        raise ValueError("split ratio must lie in (0, 1)")
    if n < 2:
        raise ValueError(f"need at least 2 samples to split, got {n}")
    return int(min(max(np.floor(ratio * n + 1e-9), 1), n - 1))


def partition(samples: Sequence[FlowField], strategy: str = "comprehensive", split_ratio: float = 0.8,
              seed: int = 0, flow_type: str | None = None, condition: str | None = None,
              component: str | None = None) -> DatasetSplit:
    """Split flow fields into train and test sets.

    ``minimal_class`` keeps one (flow type, condition, component) group and
    puts the earliest time steps in train. ``comprehensive`` pools every
    condition of a flow type and shuffles with ``seed``. Filters left as
    ``None`` default to the first group in sorted order.
    """
    pool = list(samples)
    if flow_type is None and pool:
        flow_type = sorted({s.flow_type for s in pool})[0]
    pool = [s for s in pool if s.flow_type == flow_type]
    if component is not None:
        pool = [s for s in pool if s.component == component]
    if strategy == "minimal_class":
        if condition is None and pool:
            condition = sorted({s.condition for s in pool})[0]
        if component is None and pool:
            component = sorted({s.component for s in pool})[0]
        pool = [s for s in pool if s.condition == condition and s.component == component]
        if not pool:
            raise ValueError("no samples match the requested group")
        pool.sort(key=lambda s: s.time_index)
        k = _n_train(len(pool), split_ratio)
        return DatasetSplit(pool[:k], pool[k:], strategy, split_ratio, None)
    if strategy != "comprehensive":
        raise ValueError(f"unknown strategy {strategy!r}")
    if condition is not None:
        pool = [s for s in pool if s.condition == condition]
    if not pool:
        raise ValueError("no samples match the requested flow type")
    pool.sort(key=lambda s: (s.condition, s.component, s.time_index))
    order = np.random.default_rng(seed).permutation(len(pool))
    k = _n_train(len(pool), split_ratio)
    return DatasetSplit([pool[i] for i in order[:k]], [pool[i] for i in order[k:]], strategy, split_ratio, seed)


def stratified_split(samples: Sequence, labels: Sequence[int], split_ratio: float = 0.8, seed: int = 0):
    """Seeded per-class shuffle split for labelled data; returns index arrays."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        k = _n_train(idx.size, split_ratio)
        train += idx[:k].tolist()
        test += idx[k:].tolist()
    return np.array(sorted(train)), np.array(sorted(test))
