"""Feedforward network model: layered composition x -> W_d s(W_{d-1} ... s(W_1 x)).

A network is an ordered tuple of layers, each a weight matrix plus an
activation tag; the final layer applies no activation.  Supported tags are
``relu`` and ``identity`` (element-wise, 1-Lipschitz, positive-homogeneous)
and ``max_to_scalar`` (vector -> largest coordinate; 1-Lipschitz, positive-
homogeneous, output dimension 1).  Networks, layers and datasets are
immutable after construction and evaluation is pure.

Layer indices in the public API are 1-based throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import matlin
from .errors import ParseError, ShapeError

ACTIVATION_TAGS = ("relu", "identity", "max_to_scalar")
ELEMENTWISE_TAGS = ("relu", "identity")


def activation_batch(tag: str, z: np.ndarray) -> np.ndarray:
    """Apply an activation to a batch of pre-activations (rows are samples)."""
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "identity":
        return z
    if tag == "max_to_scalar":
        return z.max(axis=1, keepdims=True)
    raise ValueError(f"unknown activation tag {tag!r}")


@dataclass(frozen=True)
class Layer:
    """One layer: a weight matrix and the activation applied after it.

    activation is None only on the final layer of a network.
    """

    weight: np.ndarray
    activation: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "weight", matlin.as_matrix(self.weight))
        if self.activation is not None and self.activation not in ACTIVATION_TAGS:
            raise ValueError(f"unknown activation tag {self.activation!r}")

    @property
    def out_dim(self) -> int:
        # max_to_scalar collapses the layer output to a scalar
        return 1 if self.activation == "max_to_scalar" else self.weight.shape[0]


@dataclass(frozen=True)
class Network:
    """A feedforward network; depth d = number of layers."""

    layers: tuple[Layer, ...]
    input_dim: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ShapeError("a network needs at least one layer")
        if self.input_dim < 1:
            raise ShapeError(f"input_dim must be positive, got {self.input_dim}")
        if self.layers[-1].activation is not None:
            raise ShapeError("the final layer must not carry an activation")
        expect = self.input_dim
        for j, layer in enumerate(self.layers, start=1):
            rows, cols = layer.weight.shape
            if cols != expect:
                raise ShapeError(
                    f"layer {j} expects input dimension {cols}, previous output is {expect}"
                )
            if j < len(self.layers) and layer.activation is None:
                raise ShapeError(f"layer {j} is not final and must carry an activation")
            expect = layer.out_dim

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def width(self) -> int:
        return max(max(l.weight.shape) for l in self.layers)

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[0]


def sub_forward_batch(net: Network, b: int, r: int, x: np.ndarray) -> np.ndarray:
    """Evaluate layers b..r (1-based, inclusive) on a batch of inputs.

    Applies each layer's matrix then its activation, except no activation
    after layer r's matrix.
    """
    d = net.depth
    if not (1 <= b <= r <= d):
        raise ShapeError(f"layer range [{b}, {r}] out of bounds for depth {d}")
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    for j in range(b, r + 1):
        layer = net.layers[j - 1]
        if a.shape[1] != layer.weight.shape[1]:
            raise ShapeError(
                f"layer {j} expects input dimension {layer.weight.shape[1]}, got {a.shape[1]}"
            )
        z = a @ layer.weight.T
        a = z if j == r else activation_batch(layer.activation, z)
    return a


def sub_forward(net: Network, b: int, r: int, x) -> np.ndarray:
    """Single-input version of :func:`sub_forward_batch`."""
    return sub_forward_batch(net, b, r, np.asarray(x, dtype=np.float64)[None, :])[0]


def forward_batch(net: Network, x: np.ndarray) -> np.ndarray:
    return sub_forward_batch(net, 1, net.depth, x)


def forward(net: Network, x) -> np.ndarray:
    return sub_forward(net, 1, net.depth, x)


def lipschitz_product(net: Network, start: int = 1, stop: int | None = None) -> float:
    """Product of spectral norms over layers start..stop (1-based, inclusive).

    An upper bound on the Lipschitz constant of the corresponding sub-network.
    """
    stop = net.depth if stop is None else stop
    if not (1 <= start <= stop <= net.depth):
        raise ShapeError(f"layer range [{start}, {stop}] out of bounds for depth {net.depth}")
    prod = 1.0
    for j in range(start, stop + 1):
        prod *= matlin.matrix_norm(net.layers[j - 1].weight, matlin.SPECTRAL)
    return prod


@dataclass(frozen=True)
class NormProfile:
    """Per-layer norms and their aggregates for one network.

    gamma is the product of spectral norms, schatten_product the product of
    Schatten-p norms for the declared p, frobenius_product the product of
    Frobenius norms.  ratio_max is max_j rows_l2_sum(j)/spectral(j); it is
    None (with degenerate=True) when some layer is all zeros.
    """

    p: float
    spectral: tuple[float, ...]
    frobenius: tuple[float, ...]
    schatten: tuple[float, ...]
    rows_l2_sum: tuple[float, ...]
    rows_l1_max: tuple[float, ...]
    gamma: float
    schatten_product: float
    frobenius_product: float
    ratio_max: float | None
    degenerate: bool

    @property
    def depth(self) -> int:
        return len(self.spectral)

    @property
    def rows_l1_max_product(self) -> float:
        return float(np.prod(self.rows_l1_max))


def profile(net: Network, p: float = 2.0) -> NormProfile:
    """Norm profile of a network for Schatten exponent p in [1, 64] or inf."""
    kind = matlin.schatten(p)
    spec, frob, schat, r21, r1inf = [], [], [], [], []
    for layer in net.layers:
        w = layer.weight
        s = matlin.matrix_norm(w, matlin.SPECTRAL)
        spec.append(s)
        frob.append(matlin.matrix_norm(w, matlin.FROBENIUS))
        schat.append(s if kind.tag == "spectral" else matlin.matrix_norm(w, kind))
        r21.append(matlin.matrix_norm(w, matlin.ROWS_L2_SUM))
        r1inf.append(matlin.matrix_norm(w, matlin.ROWS_L1_MAX))
    degenerate = any(s == 0.0 for s in spec)
    ratio = None if degenerate else max(r / s for r, s in zip(r21, spec))
    return NormProfile(
        p=float(p),
        spectral=tuple(spec),
        frobenius=tuple(frob),
        schatten=tuple(schat),
        rows_l2_sum=tuple(r21),
        rows_l1_max=tuple(r1inf),
        gamma=float(np.prod(spec)),
        schatten_product=float(np.prod(schat)),
        frobenius_product=float(np.prod(frob)),
        ratio_max=ratio,
        degenerate=degenerate,
    )


@dataclass(frozen=True)
class Dataset:
    """A finite sample of equal-dimension points; radius is the largest norm."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ParseError("a dataset needs a non-empty 2-D point array")
        if not np.all(np.isfinite(pts)):
            raise ParseError("dataset points must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def radius(self) -> float:
        return float(np.sqrt((self.points * self.points).sum(axis=1)).max())


# ---------------------------------------------------------------------------
# Strict JSON file formats
# ---------------------------------------------------------------------------

def _require_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    keys = set(obj)
    unknown = keys - allowed
    if unknown:
        raise ParseError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = required - keys
    if missing:
        raise ParseError(f"{where}: missing field(s) {sorted(missing)}")


def network_to_obj(net: Network) -> dict:
    layers = []
    for j, layer in enumerate(net.layers, start=1):
        rows, cols = layer.weight.shape
        entry = {"rows": rows, "cols": cols, "data": [float(v) for v in layer.weight.ravel()]}
        if j < net.depth:
            entry["activation"] = layer.activation
        layers.append(entry)
    return {"input_dim": net.input_dim, "layers": layers}


def network_from_obj(obj) -> Network:
    if not isinstance(obj, dict):
        raise ParseError("network: top level must be an object")
    _require_keys(obj, {"input_dim", "layers"}, {"input_dim", "layers"}, "network")
    if not isinstance(obj["input_dim"], int) or isinstance(obj["input_dim"], bool):
        raise ParseError("network: input_dim must be an integer")
    if not isinstance(obj["layers"], list) or not obj["layers"]:
        raise ParseError("network: layers must be a non-empty array")
    n = len(obj["layers"])
    layers = []
    for j, entry in enumerate(obj["layers"], start=1):
        where = f"network layer {j}"
        if not isinstance(entry, dict):
            raise ParseError(f"{where}: must be an object")
        is_last = j == n
        allowed = {"rows", "cols", "data"} | (set() if is_last else {"activation"})
        _require_keys(entry, allowed, allowed, where)
        rows, cols = entry["rows"], entry["cols"]
        for name, v in (("rows", rows), ("cols", cols)):
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ParseError(f"{where}: {name} must be a positive integer")
        data = entry["data"]
        if not isinstance(data, list) or len(data) != rows * cols:
            raise ParseError(f"{where}: data must hold exactly rows*cols = {rows * cols} numbers")
        try:
            w = matlin.as_matrix([float(v) for v in data], rows, cols)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{where}: {exc}") from exc
        act = None if is_last else entry["activation"]
        if not is_last and act not in ACTIVATION_TAGS:
            raise ParseError(f"{where}: unknown activation {act!r}")
        layers.append(Layer(weight=w, activation=act))
    try:
        return Network(layers=tuple(layers), input_dim=obj["input_dim"])
    except ShapeError as exc:
        raise ParseError(f"network: {exc}") from exc


def dataset_to_obj(data: Dataset) -> dict:
    return {"points": [[float(v) for v in row] for row in data.points]}


def dataset_from_obj(obj) -> Dataset:
    if not isinstance(obj, dict):
        raise ParseError("dataset: top level must be an object")
    _require_keys(obj, {"points"}, {"points"}, "dataset")
    pts = obj["points"]
    if not isinstance(pts, list) or not pts:
        raise ParseError("dataset: points must be a non-empty array")
    width = None
    for i, row in enumerate(pts, start=1):
        if not isinstance(row, list):
            raise ParseError(f"dataset point {i}: must be an array of numbers")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"dataset point {i}: length {len(row)} differs from {width}")
    try:
        return Dataset(points=np.asarray(pts, dtype=np.float64))
    except (ParseError, ValueError) as exc:
        raise ParseError(f"dataset: {exc}") from exc


def load_network(path: str) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    try:
        return network_from_obj(obj)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def save_network(net: Network, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_obj(net), fh, indent=1)
        fh.write("\n")


def load_dataset(path: str) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    try:
        return dataset_from_obj(obj)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def save_dataset(data: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataset_to_obj(data), fh, indent=1)
        fh.write("\n")
