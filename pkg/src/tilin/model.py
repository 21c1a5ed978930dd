"""Network model: layer types, JSON loading, and exact forward evaluation.

Networks are small feed-forward classifiers stored as a JSON list of layers.
Convolutions and batch normalisation exist only as loader conveniences: both
are materialised into plain affine layers by :func:`normalize`, so the bound
propagation engine only ever sees affine, activation, and maxpool layers.
All numeric state is float64 and layers are immutable after construction.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

ACTIVATION_KINDS = ("relu", "sigmoid", "tanh", "arctan")


class NetworkFormatError(ValueError):
    """Raised when a network file is structurally invalid."""


class InputFormatError(ValueError):
    """Raised when an input-vector file cannot be parsed."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Tensor:
    """Dense array stored as a shape plus flat row-major float64 values."""

    shape: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        vals = _readonly(np.ravel(self.values))
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if any(s <= 0 for s in self.shape):
            raise NetworkFormatError(f"non-positive dimension in shape {self.shape}")
        if int(np.prod(self.shape)) != vals.size:
            raise NetworkFormatError(
                f"shape {self.shape} expects {int(np.prod(self.shape))} values, got {vals.size}"
            )
        if not np.all(np.isfinite(vals)):
            raise NetworkFormatError("tensor contains non-finite values")

    @classmethod
    def from_nested(cls, obj, name: str = "tensor") -> "Tensor":
        try:
            arr = np.asarray(obj, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise NetworkFormatError(f"{name}: not a rectangular numeric array: {exc}") from exc
        if arr.ndim == 0:
            arr = arr.reshape(1)
        return cls(arr.shape, arr.ravel())

    @property
    def array(self) -> np.ndarray:
        return self.values.reshape(self.shape)


@dataclass(frozen=True)
class Affine:
    """y = weight @ x + bias."""

    weight: np.ndarray  # (n_out, n_in)
    bias: np.ndarray  # (n_out,)

    def __post_init__(self):
        object.__setattr__(self, "weight", _readonly(self.weight))
        object.__setattr__(self, "bias", _readonly(self.bias))
        if self.weight.ndim != 2 or self.bias.ndim != 1:
            raise NetworkFormatError("affine weight must be 2-D and bias 1-D")
        if self.weight.shape[0] != self.bias.shape[0]:
            raise NetworkFormatError(
                f"affine bias length {self.bias.shape[0]} != weight rows {self.weight.shape[0]}"
            )

    @property
    def in_width(self) -> int:
        return self.weight.shape[1]

    @property
    def out_width(self) -> int:
        return self.weight.shape[0]


@dataclass(frozen=True)
class Conv2D:
    """2-D convolution over a (channels, height, width) input, zero padded."""

    filters: np.ndarray  # (c_out, c_in, kh, kw)
    bias: np.ndarray  # (c_out,)
    stride: tuple[int, int]
    padding: tuple[int, int]
    input_shape: tuple[int, int, int]  # (c_in, h, w)

    def __post_init__(self):
        object.__setattr__(self, "filters", _readonly(self.filters))
        object.__setattr__(self, "bias", _readonly(self.bias))
        object.__setattr__(self, "stride", tuple(int(s) for s in self.stride))
        object.__setattr__(self, "padding", tuple(int(p) for p in self.padding))
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        if self.filters.ndim != 4:
            raise NetworkFormatError("conv2d filters must be 4-D (c_out, c_in, kh, kw)")
        if self.bias.shape != (self.filters.shape[0],):
            raise NetworkFormatError("conv2d bias length must equal filter count")
        if self.filters.shape[1] != self.input_shape[0]:
            raise NetworkFormatError(
                f"conv2d expects {self.filters.shape[1]} input channels, "
                f"input_shape has {self.input_shape[0]}"
            )
        if any(s < 1 for s in self.stride) or any(p < 0 for p in self.padding):
            raise NetworkFormatError("conv2d stride must be >=1 and padding >=0")
        oh, ow = self.output_hw
        if oh < 1 or ow < 1:
            raise NetworkFormatError("conv2d output would be empty")

    @property
    def output_hw(self) -> tuple[int, int]:
        _, h, w = self.input_shape
        kh, kw = self.filters.shape[2:]
        oh = (h + 2 * self.padding[0] - kh) // self.stride[0] + 1
        ow = (w + 2 * self.padding[1] - kw) // self.stride[1] + 1
        return oh, ow

    @property
    def in_width(self) -> int:
        c, h, w = self.input_shape
        return c * h * w

    @property
    def out_width(self) -> int:
        oh, ow = self.output_hw
        return self.filters.shape[0] * oh * ow


@dataclass(frozen=True)
class Activation:
    """Elementwise nonlinearity: relu, sigmoid, tanh, or arctan."""

    kind: str

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise NetworkFormatError(
                f"unknown activation {self.kind!r}, expected one of {ACTIVATION_KINDS}"
            )


@dataclass(frozen=True)
class MaxPool:
    """Max over explicit index windows; windows may overlap."""

    windows: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        wins = tuple(tuple(int(i) for i in w) for w in self.windows)
        object.__setattr__(self, "windows", wins)
        if not wins or any(len(w) == 0 for w in wins):
            raise NetworkFormatError("maxpool needs at least one non-empty window")
        if any(i < 0 for w in wins for i in w):
            raise NetworkFormatError("maxpool window indices must be non-negative")
        for k, w in enumerate(wins):
            if len(set(w)) != len(w):
                raise NetworkFormatError(f"maxpool window {k} repeats an index")

    @property
    def out_width(self) -> int:
        return len(self.windows)


@dataclass(frozen=True)
class BatchNorm:
    """Per-feature y = scale * (x - mean) / sqrt(variance + epsilon) + shift."""

    scale: np.ndarray
    shift: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    epsilon: float = 1e-5

    def __post_init__(self):
        for name in ("scale", "shift", "mean", "variance"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        n = self.scale.shape[0]
        if not (self.shift.shape == self.mean.shape == self.variance.shape == (n,)):
            raise NetworkFormatError("batchnorm vectors must share one length")
        if np.any(self.variance + self.epsilon <= 0):
            raise NetworkFormatError("batchnorm variance + epsilon must be positive")

    @property
    def gain(self) -> np.ndarray:
        return self.scale / np.sqrt(self.variance + self.epsilon)


Layer = Union[Affine, Conv2D, Activation, MaxPool, BatchNorm]


@dataclass(frozen=True)
class Network:
    """Validated layer stack with a fixed input width."""

    input_dim: int
    layers: tuple[Layer, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.input_dim < 1:
            raise NetworkFormatError("input_dim must be positive")
        self.widths  # runs the chain validation

    @property
    def widths(self) -> list[int]:
        """Width of the input followed by each layer's output width."""
        chain = [int(self.input_dim)]
        for idx, layer in enumerate(self.layers):
            w = chain[-1]
            if isinstance(layer, (Affine, Conv2D)):
                if layer.in_width != w:
                    raise NetworkFormatError(
                        f"layer {idx}: expects {layer.in_width} inputs, previous width is {w}"
                    )
                chain.append(layer.out_width)
            elif isinstance(layer, Activation):
                chain.append(w)
            elif isinstance(layer, BatchNorm):
                if layer.scale.shape[0] != w:
                    raise NetworkFormatError(
                        f"layer {idx}: batchnorm width {layer.scale.shape[0]} != {w}"
                    )
                chain.append(w)
            elif isinstance(layer, MaxPool):
                top = max(i for win in layer.windows for i in win)
                if top >= w:
                    raise NetworkFormatError(
                        f"layer {idx}: maxpool index {top} out of range for width {w}"
                    )
                chain.append(layer.out_width)
            else:  # pragma: no cover - layer union is closed
                raise NetworkFormatError(f"layer {idx}: unknown layer type {type(layer)}")
        return chain

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    def is_normalized(self) -> bool:
        return all(isinstance(l, (Affine, Activation, MaxPool)) for l in self.layers)


# ---------------------------------------------------------------------------
# forward evaluation


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # piecewise form avoids overflow in exp for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def apply_activation(kind: str, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "sigmoid":
        return _sigmoid(x)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "arctan":
        return np.arctan(x)
    raise NetworkFormatError(f"unknown activation {kind!r}")


def _conv_forward(layer: Conv2D, x: np.ndarray) -> np.ndarray:
    """Direct sliding-window convolution on a (batch, in_width) array."""
    n = x.shape[0]
    c, h, w = layer.input_shape
    kh, kw = layer.filters.shape[2:]
    sh, sw = layer.stride
    ph, pw = layer.padding
    oh, ow = layer.output_hw
    padded = np.zeros((n, c, h + 2 * ph, w + 2 * pw))
    padded[:, :, ph:ph + h, pw:pw + w] = x.reshape(n, c, h, w)
    out = np.zeros((n, layer.filters.shape[0], oh, ow))
    for i in range(kh):
        for j in range(kw):
            patch = padded[:, :, i:i + sh * oh:sh, j:j + sw * ow:sw]
            out += np.einsum("ncij,oc->noij", patch, layer.filters[:, :, i, j])
    out += layer.bias[None, :, None, None]
    return out.reshape(n, -1)


def apply_layer(layer: Layer, x: np.ndarray) -> np.ndarray:
    """Evaluate one layer on a (batch, width) array."""
    if isinstance(layer, Affine):
        return x @ layer.weight.T + layer.bias
    if isinstance(layer, Conv2D):
        return _conv_forward(layer, x)
    if isinstance(layer, Activation):
        return apply_activation(layer.kind, x)
    if isinstance(layer, BatchNorm):
        return layer.gain * (x - layer.mean) + layer.shift
    if isinstance(layer, MaxPool):
        out = np.empty((x.shape[0], len(layer.windows)))
        for k, win in enumerate(layer.windows):
            out[:, k] = x[:, list(win)].max(axis=1)
        return out
    raise NetworkFormatError(f"unknown layer type {type(layer)}")


def forward_all(net: Network, x) -> list[np.ndarray]:
    """All intermediate outputs: entry 0 is the input, entry k+1 is layer k's output.

    Accepts a single vector or a (batch, input_dim) array; the returned arrays
    match the input's batch rank.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x.reshape(1, -1) if single else x
    if batch.shape[1] != net.input_dim:
        raise ValueError(f"input width {batch.shape[1]} != network input_dim {net.input_dim}")
    outs = [batch]
    for layer in net.layers:
        outs.append(apply_layer(layer, outs[-1]))
    if single:
        return [o[0] for o in outs]
    return outs


def forward(net: Network, x) -> np.ndarray:
    """Network output for a vector or a batch of vectors."""
    return forward_all(net, x)[-1]


# ---------------------------------------------------------------------------
# normalisation: conv expansion and batchnorm folding


def conv_to_affine(layer: Conv2D) -> Affine:
    """Materialise a convolution as an explicit dense affine layer.

    Built by index arithmetic, independently of the sliding-window evaluator,
    so the two can cross-check each other.
    """
    c, h, w = layer.input_shape
    c_out = layer.filters.shape[0]
    kh, kw = layer.filters.shape[2:]
    sh, sw = layer.stride
    ph, pw = layer.padding
    oh, ow = layer.output_hw
    weight = np.zeros((c_out * oh * ow, c * h * w))
    bias = np.zeros(c_out * oh * ow)
    for co in range(c_out):
        for oy in range(oh):
            for ox in range(ow):
                row = (co * oh + oy) * ow + ox
                bias[row] = layer.bias[co]
                for ci in range(c):
                    for i in range(kh):
                        iy = oy * sh + i - ph
                        if iy < 0 or iy >= h:
                            continue
                        for j in range(kw):
                            ix = ox * sw + j - pw
                            if ix < 0 or ix >= w:
                                continue
                            col = (ci * h + iy) * w + ix
                            weight[row, col] += layer.filters[co, ci, i, j]
    return Affine(weight, bias)


def fold_batchnorm(net: Network) -> Network:
    """Fold every BatchNorm into the adjacent affine layer (or a fresh one)."""
    layers: list[Layer] = []
    for layer in net.layers:
        if not isinstance(layer, BatchNorm):
            layers.append(layer)
            continue
        g = layer.gain
        if layers and isinstance(layers[-1], Affine):
            prev = layers.pop()
            weight = g[:, None] * prev.weight
            bias = g * (prev.bias - layer.mean) + layer.shift
            layers.append(Affine(weight, bias))
        else:
            layers.append(Affine(np.diag(g), layer.shift - g * layer.mean))
    return Network(net.input_dim, tuple(layers))


def normalize(net: Network) -> Network:
    """Expand convolutions and fold batchnorms; forward output is unchanged."""
    expanded = [conv_to_affine(l) if isinstance(l, Conv2D) else l for l in net.layers]
    return fold_batchnorm(Network(net.input_dim, tuple(expanded)))


def pool_windows(shape: tuple[int, int, int], size, stride=None) -> tuple[tuple[int, ...], ...]:
    """Channel-wise 2-D pooling windows for a (c, h, w) layout, as index groups."""
    c, h, w = (int(d) for d in shape)
    kh, kw = (size, size) if isinstance(size, int) else (int(size[0]), int(size[1]))
    if stride is None:
        stride = (kh, kw)
    sh, sw = (stride, stride) if isinstance(stride, int) else (int(stride[0]), int(stride[1]))
    if (h - kh) % sh or (w - kw) % sw:
        raise NetworkFormatError(f"pool {kh}x{kw} stride {sh}x{sw} does not tile {h}x{w}")
    wins = []
    for ci in range(c):
        for oy in range(0, h - kh + 1, sh):
            for ox in range(0, w - kw + 1, sw):
                wins.append(
                    tuple((ci * h + oy + i) * w + ox + j for i in range(kh) for j in range(kw))
                )
    return tuple(wins)


# ---------------------------------------------------------------------------
# JSON serialisation


def _pair(v) -> tuple[int, int]:
    if isinstance(v, (int, float)):
        return (int(v), int(v))
    return (int(v[0]), int(v[1]))


def layer_from_dict(obj: dict, idx: int) -> Layer:
    try:
        kind = obj["type"]
        if kind == "affine":
            return Affine(
                Tensor.from_nested(obj["weight"], "weight").array,
                Tensor.from_nested(obj["bias"], "bias").array,
            )
        if kind == "conv2d":
            return Conv2D(
                Tensor.from_nested(obj["filters"], "filters").array,
                Tensor.from_nested(obj["bias"], "bias").array,
                _pair(obj.get("stride", 1)),
                _pair(obj.get("padding", 0)),
                tuple(obj["input_shape"]),
            )
        if kind == "activation":
            return Activation(obj["kind"])
        if kind == "maxpool":
            if "windows" in obj:
                return MaxPool(tuple(tuple(w) for w in obj["windows"]))
            return MaxPool(
                pool_windows(tuple(obj["input_shape"]), obj["size"], obj.get("stride"))
            )
        if kind == "batchnorm":
            return BatchNorm(
                Tensor.from_nested(obj["scale"], "scale").array,
                Tensor.from_nested(obj["shift"], "shift").array,
                Tensor.from_nested(obj["mean"], "mean").array,
                Tensor.from_nested(obj["variance"], "variance").array,
                float(obj.get("epsilon", 1e-5)),
            )
        raise NetworkFormatError(f"unknown layer type {kind!r}")
    except KeyError as exc:
        raise NetworkFormatError(f"layer {idx}: missing field {exc}") from exc
    except NetworkFormatError as exc:
        raise NetworkFormatError(f"layer {idx}: {exc}") from exc


def network_from_dict(obj: dict) -> Network:
    if "input_dim" not in obj or "layers" not in obj:
        raise NetworkFormatError("network JSON needs 'input_dim' and 'layers'")
    layers = tuple(layer_from_dict(l, i) for i, l in enumerate(obj["layers"]))
    return Network(int(obj["input_dim"]), layers)


def layer_to_dict(layer: Layer) -> dict:
    if isinstance(layer, Affine):
        return {"type": "affine", "weight": layer.weight.tolist(), "bias": layer.bias.tolist()}
    if isinstance(layer, Conv2D):
        return {
            "type": "conv2d",
            "filters": layer.filters.tolist(),
            "bias": layer.bias.tolist(),
            "stride": list(layer.stride),
            "padding": list(layer.padding),
            "input_shape": list(layer.input_shape),
        }
    if isinstance(layer, Activation):
        return {"type": "activation", "kind": layer.kind}
    if isinstance(layer, MaxPool):
        return {"type": "maxpool", "windows": [list(w) for w in layer.windows]}
    if isinstance(layer, BatchNorm):
        return {
            "type": "batchnorm",
            "scale": layer.scale.tolist(),
            "shift": layer.shift.tolist(),
            "mean": layer.mean.tolist(),
            "variance": layer.variance.tolist(),
            "epsilon": layer.epsilon,
        }
    raise NetworkFormatError(f"unknown layer type {type(layer)}")


def network_to_dict(net: Network) -> dict:
    return {"input_dim": net.input_dim, "layers": [layer_to_dict(l) for l in net.layers]}


def load_network(path) -> Network:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise NetworkFormatError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    try:
        return network_from_dict(obj)
    except NetworkFormatError as exc:
        raise NetworkFormatError(f"{path}: {exc}") from exc


def save_network(net: Network, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net), fh)
        fh.write("\n")


# ---------------------------------------------------------------------------
# input vectors: JSON array, CSV rows, or IDX images

IDX_IMAGE_MAGIC = 0x00000803


def _load_idx_images(raw: bytes, path: Path) -> np.ndarray:
    if len(raw) < 16:
        raise InputFormatError(f"{path}: IDX header truncated")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise InputFormatError(f"{path}: IDX magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}")
    need = count * rows * cols
    body = np.frombuffer(raw, dtype=np.uint8, offset=16)
    if body.size != need:
        raise InputFormatError(f"{path}: IDX expects {need} pixels, found {body.size}")
    return body.reshape(count, rows * cols).astype(np.float64) / 255.0


def load_inputs(path, fmt: str | None = None) -> np.ndarray:
    """Load input vectors as a (count, width) float64 array.

    Formats: ``json`` (one array or a list of arrays), ``csv`` (one vector per
    row), ``idx`` (raw image file, pixels scaled by 1/255). When ``fmt`` is
    None it is sniffed from the extension, falling back to the IDX magic.
    """
    path = Path(path)
    if fmt is None:
        ext = path.suffix.lower()
        if ext == ".json":
            fmt = "json"
        elif ext == ".csv":
            fmt = "csv"
        else:
            fmt = "idx"
    if fmt not in ("json", "csv", "idx"):
        raise InputFormatError(f"unknown input format {fmt!r}, expected json, csv, or idx")
    try:
        if fmt == "json":
            with path.open("r", encoding="utf-8") as fh:
                obj = json.load(fh)
            arr = np.asarray(obj, dtype=np.float64)
            if arr.ndim == 1:
                arr = arr.reshape(1, -1)
            if arr.ndim != 2:
                raise InputFormatError(f"{path}: JSON inputs must be a vector or list of vectors")
            return arr
        if fmt == "csv":
            rows = []
            with path.open("r", encoding="utf-8") as fh:
                for ln, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        rows.append([float(tok) for tok in line.split(",")])
                    except ValueError as exc:
                        raise InputFormatError(f"{path}: line {ln}: {exc}") from exc
            if not rows:
                raise InputFormatError(f"{path}: no CSV rows")
            if len({len(r) for r in rows}) != 1:
                raise InputFormatError(f"{path}: CSV rows have differing lengths")
            return np.asarray(rows, dtype=np.float64)
        return _load_idx_images(path.read_bytes(), path)
    except OSError as exc:
        raise InputFormatError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputFormatError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    except ValueError as exc:
        if isinstance(exc, InputFormatError):
            raise
        raise InputFormatError(f"{path}: {exc}") from exc
