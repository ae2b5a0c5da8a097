"""Reference MLP, MNIST access and the tiling of matrix-vector products.

Model files use a line-oriented text format so a model can be diffed and a
truncated file still reports which layer is missing::

    netcast-model 1
    meta {"baseline_accuracy": 0.978, ...}
    layers 3
    layer 0 rows 100 cols 784 activation relu input_scale 1.0
    bias <rows values>
    row <cols values>            (repeated rows times, row-major)
    end 0
    ...

Values are written with ``repr`` so a save/load round trip is bit-exact.
"""

from __future__ import annotations

import gzip
import json
import math
import struct
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from netcast.errors import InvalidArgument, ModelFormatError

ACTIVATIONS = ("relu", "identity")
REFERENCE_DIMS = (784, 100, 100, 10)
MODEL_MAGIC = "netcast-model 1"


def _frozen(a, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # (out_n, in_m)
    bias: np.ndarray  # (out_n,)
    activation: str = "relu"
    # recorded full-scale of this layer's inputs; inputs are divided by it before encoding
    input_scale: float = 1.0

    def __post_init__(self):
        w = _frozen(self.weights)
        b = _frozen(self.bias)
        if w.ndim != 2:
            raise ModelFormatError(f"weights must be 2-D, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise ModelFormatError(f"bias length {b.shape} does not match {w.shape[0]} rows")
        if not np.all(np.isfinite(w)) or not np.all(np.isfinite(b)):
            raise ModelFormatError("weights and biases must be finite")
        if self.activation not in ACTIVATIONS:
            raise ModelFormatError(f"unknown activation {self.activation!r}")
        if not (self.input_scale > 0 and math.isfinite(self.input_scale)):
            raise ModelFormatError(f"input_scale must be positive, got {self.input_scale}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "input_scale", float(self.input_scale))

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape


@dataclass(frozen=True)
class Model:
    layers: tuple[Layer, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ModelFormatError("model has no layers")
        for k in range(len(layers) - 1):
            if layers[k].shape[0] != layers[k + 1].shape[1]:
                raise ModelFormatError(
                    f"layer {k} has {layers[k].shape[0]} outputs but layer {k + 1} "
                    f"expects {layers[k + 1].shape[1]} inputs",
                    location=f"layer {k + 1}",
                )
        object.__setattr__(self, "layers", layers)

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.layers[0].shape[1],) + tuple(l.shape[0] for l in self.layers)

    @property
    def baseline_accuracy(self) -> float | None:
        return self.metadata.get("baseline_accuracy")


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # (n, 784) in [0, 1]
    labels: np.ndarray  # (n,) in [0, 10)

    def __post_init__(self):
        images = _frozen(self.images)
        labels = _frozen(self.labels, dtype=np.int64)
        if images.ndim != 2 or images.shape[0] != labels.shape[0]:
            raise InvalidArgument(
                f"{images.shape[0] if images.ndim else 0} images but {labels.shape[0]} labels"
            )
        if images.size and (images.min() < 0.0 or images.max() > 1.0):
            raise InvalidArgument("pixel values must lie in [0, 1]")
        if labels.size and (labels.min() < 0 or labels.max() > 9):
            raise InvalidArgument("labels must lie in [0, 10)")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    def head(self, n: int) -> "Dataset":
        return Dataset(self.images[:n], self.labels[:n])


@dataclass(frozen=True)
class TilingPlan:
    """Partition of ``b`` columns into chunks at most ``d`` wide."""

    b: int
    d: int
    steps: int
    chunks: tuple[tuple[int, int], ...]  # half-open column ranges, in order
    a: int | None = None

    def widths(self) -> list[int]:
        return [stop - start for start, stop in self.chunks]


def chunk_columns(b: int, d: int, rows: int | None = None) -> TilingPlan:
    """Split ``b`` columns into ``ceil(b / d)`` consecutive chunks of width ``d``.

    The last chunk may be narrower. ``rows`` is carried along for bookkeeping.
    """
    if int(b) != b or int(d) != d or b < 1 or d < 1:
        raise InvalidArgument(f"column count and chunk width must be positive integers, got b={b}, d={d}")
    b, d = int(b), int(d)
    steps = -(-b // d)
    chunks = tuple((s * d, min((s + 1) * d, b)) for s in range(steps))
    return TilingPlan(b=b, d=d, steps=steps, chunks=chunks, a=rows)


def matvec_reference(w, x) -> np.ndarray:
    """Noiseless float64 matrix-vector product; the oracle for every analog path."""
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.ndim != 2 or x.ndim != 1 or w.shape[1] != x.shape[0]:
        raise InvalidArgument(f"cannot multiply matrix {w.shape} by vector {x.shape}")
    return w @ x


def chunked_matvec(w, x, plan: TilingPlan) -> np.ndarray:
    """Evaluate ``w @ x`` chunk by chunk, accumulating partial sums in column order."""
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.shape[1] != plan.b or x.shape != (plan.b,):
        raise InvalidArgument(f"plan covers {plan.b} columns, got matrix {w.shape} and vector {x.shape}")
    acc = np.zeros(w.shape[0])
    for start, stop in plan.chunks:
        acc += w[:, start:stop] @ x[start:stop]
    return acc


# ---------------------------------------------------------------------------
# digital inference


def forward_digital(model: Model, images) -> np.ndarray:
    """Float64 forward pass; returns logits of shape (n, n_classes)."""
    a = np.atleast_2d(np.asarray(images, dtype=np.float64))
    for layer in model.layers:
        a = a @ layer.weights.T + layer.bias
        if layer.activation == "relu":
            a = np.maximum(a, 0.0)
    return a


def layer_inputs_digital(model: Model, images) -> list[np.ndarray]:
    """Inputs seen by each layer in the float64 forward pass."""
    a = np.atleast_2d(np.asarray(images, dtype=np.float64))
    out = []
    for layer in model.layers:
        out.append(a)
        a = a @ layer.weights.T + layer.bias
        if layer.activation == "relu":
            a = np.maximum(a, 0.0)
    return out


def predict_digital(model: Model, images) -> np.ndarray:
    return np.argmax(forward_digital(model, images), axis=1)


# ---------------------------------------------------------------------------
# model files


def save_model(model: Model, path) -> None:
    lines = [MODEL_MAGIC, "meta " + json.dumps(model.metadata, sort_keys=True), f"layers {len(model.layers)}"]
    for k, layer in enumerate(model.layers):
        rows, cols = layer.shape
        lines.append(
            f"layer {k} rows {rows} cols {cols} activation {layer.activation} "
            f"input_scale {layer.input_scale!r}"
        )
        lines.append("bias " + " ".join(repr(float(v)) for v in layer.bias))
        for r in range(rows):
            lines.append("row " + " ".join(repr(float(v)) for v in layer.weights[r]))
        lines.append(f"end {k}")
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_floats(text: str, where: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split()], dtype=np.float64)
    except ValueError as exc:
        raise ModelFormatError(str(exc), location=where) from None


def load_model(path) -> Model:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != MODEL_MAGIC:
        raise ModelFormatError(f"not a model file (expected header {MODEL_MAGIC!r})", location=f"{path}:1")
    pos = 1
    metadata = {}
    if pos < len(lines) and lines[pos].startswith("meta "):
        metadata = json.loads(lines[pos][5:])
        pos += 1
    if pos >= len(lines) or not lines[pos].startswith("layers "):
        raise ModelFormatError("missing 'layers' count", location=f"{path}:{pos + 1}")
    n_layers = int(lines[pos].split()[1])
    pos += 1

    layers = []
    for k in range(n_layers):
        where = f"{path}: layer {k}"
        if pos >= len(lines):
            raise ModelFormatError(f"file ends before layer {k} of {n_layers}", location=where)
        head = lines[pos].split()
        if len(head) < 10 or head[0] != "layer" or int(head[1]) != k:
            raise ModelFormatError(f"expected header for layer {k}, got {lines[pos][:40]!r}", location=f"{path}:{pos + 1}")
        fields = dict(zip(head[2::2], head[3::2]))
        rows, cols = int(fields["rows"]), int(fields["cols"])
        pos += 1
        if pos >= len(lines) or not lines[pos].startswith("bias"):
            raise ModelFormatError("missing bias line", location=where)
        bias = _parse_floats(lines[pos][4:], f"{path}:{pos + 1}")
        pos += 1
        weights = np.empty((rows, cols))
        for r in range(rows):
            if pos >= len(lines) or not lines[pos].startswith("row"):
                raise ModelFormatError(f"expected {rows} weight rows, found {r}", location=where)
            vals = _parse_floats(lines[pos][3:], f"{path}:{pos + 1}")
            if vals.size != cols:
                raise ModelFormatError(f"row {r} has {vals.size} values, expected {cols}", location=where)
            weights[r] = vals
            pos += 1
        if pos >= len(lines) or lines[pos].split() != ["end", str(k)]:
            raise ModelFormatError("missing end marker", location=where)
        pos += 1
        try:
            layers.append(Layer(weights, bias, fields["activation"], float(fields["input_scale"])))
        except ModelFormatError as exc:
            raise ModelFormatError(str(exc), location=where) from None
    return Model(tuple(layers), metadata)


def reference_model_path() -> Path:
    return Path(str(resources.files("netcast") / "data" / "reference_model.txt"))


def load_reference_model() -> Model:
    return load_model(reference_model_path())


# ---------------------------------------------------------------------------
# MNIST IDX files


def _open_maybe_gz(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx(path) -> np.ndarray:
    """Read an IDX file (optionally gzip-compressed) into a numpy array."""
    path = Path(path)
    with _open_maybe_gz(path) as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise ModelFormatError("file too short for an IDX header", location=str(path))
    zero, dtype_code, ndim = struct.unpack(">HBB", raw[:4])
    if zero != 0 or dtype_code != 0x08:
        raise ModelFormatError(f"unsupported IDX header {raw[:4].hex()}", location=str(path))
    dims = struct.unpack(f">{ndim}I", raw[4 : 4 + 4 * ndim])
    data = np.frombuffer(raw, dtype=np.uint8, offset=4 + 4 * ndim)
    if data.size != math.prod(dims):
        raise ModelFormatError(f"expected {math.prod(dims)} bytes of data, found {data.size}", location=str(path))
    return data.reshape(dims)


def _find(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz"):
        if (directory / name).exists():
            return directory / name
    raise FileNotFoundError(f"no {stem}[.gz] in {directory}")


def load_dataset(path=None, split: str = "t10k", limit: int | None = None) -> Dataset:
    """Load MNIST from a directory of IDX files; pixels are divided by 255.

    With ``path=None`` the test split bundled with the package is used.
    """
    directory = Path(path) if path is not None else Path(str(resources.files("netcast") / "data"))
    images = read_idx(_find(directory, f"{split}-images-idx3-ubyte"))
    labels = read_idx(_find(directory, f"{split}-labels-idx1-ubyte"))
    if images.shape[0] != labels.shape[0]:
        raise ModelFormatError(f"{images.shape[0]} images but {labels.shape[0]} labels", location=str(directory))
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    return Dataset(images.reshape(len(images), -1).astype(np.float64) / 255.0, labels.astype(np.int64))
