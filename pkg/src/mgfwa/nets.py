"""Fixed-weight MLP black boxes and the sphere test function.

The networks are the benchmark objectives: weights are drawn once from the
counter-based source and never change, and the scalar network output is the
fitness to minimize over the input.

Both objectives evaluate rows with compiled kernels that accumulate every
dot product in ascending input-index order. A row's value therefore does not
depend on how many other rows share the call, which is what lets serial and
threaded evaluation agree bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numba
import numpy as np

from .rng import Stream, uniform_grid

_SQRT_2_OVER_PI = 0.7978845608028654
_GELU_CUBIC = 0.044715

ACTIVATIONS = ("relu", "gelu")


@numba.njit(cache=True, nogil=True)
def _relu(x):
    return x if x > 0.0 else 0.0


@numba.njit(cache=True, nogil=True)
def _gelu(x):
    return 0.5 * x * (1.0 + math.tanh(_SQRT_2_OVER_PI * (x + _GELU_CUBIC * x * x * x)))


def relu(x: float) -> float:
    return float(_relu(float(x)))


def gelu(x: float) -> float:
    """GELU, tanh approximation (within 1e-3 of the erf form)."""
    return float(_gelu(float(x)))


@numba.njit(cache=True, nogil=True)
def _sphere_rows(rows):
    out = np.empty(rows.shape[0])
    for r in range(rows.shape[0]):
        acc = 0.0
        for d in range(rows.shape[1]):
            acc += rows[r, d] * rows[r, d]
        out[r] = acc
    return out


@numba.njit(cache=True, nogil=True, boundscheck=False, error_model="numpy")
def _mlp_rows(rows, params, dims, use_gelu):
    # params packs, per layer, W as (fan_in, fan_out) row-major followed by b.
    n_rows = rows.shape[0]
    n_layers = dims.shape[0] - 1
    width = 0
    for w in dims:
        width = max(width, w)
    act = np.zeros((n_rows, width))
    acc = np.empty((n_rows, width))
    act[:, :dims[0]] = rows
    off = 0
    for layer in range(n_layers):
        fan_in = dims[layer]
        fan_out = dims[layer + 1]
        weight = params[off:off + fan_in * fan_out].reshape(fan_in, fan_out)
        bias = params[off + fan_in * fan_out:off + fan_in * fan_out + fan_out]
        last = layer == n_layers - 1
        for r in range(n_rows):
            z = acc[r]
            a = act[r]
            for j in range(fan_out):
                z[j] = 0.0
            # ascending input index for every output unit
            for i in range(fan_in):
                ai = a[i]
                wi = weight[i]
                for j in range(fan_out):
                    z[j] += wi[j] * ai
            for j in range(fan_out):
                v = z[j] + bias[j]
                if not last:
                    v = _gelu(v) if use_gelu else _relu(v)
                a[j] = v
        off += fan_in * fan_out + fan_out
    return act[:, 0].copy()


def _as_rows(x, dim: int) -> np.ndarray:
    rows = np.ascontiguousarray(x, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows.reshape(1, -1)
    if rows.ndim != 2 or rows.shape[1] != dim:
        raise ValueError(f"expected input of dimension {dim}, got shape {np.shape(x)}")
    return rows


def sphere(x) -> float:
    """Sum of squared coordinates."""
    rows = np.ascontiguousarray(x, dtype=np.float64).reshape(1, -1)
    return float(_sphere_rows(rows)[0])


class Sphere:
    """Sphere objective of fixed dimension; global minimum 0 at the origin."""

    def __init__(self, dim: int):
        self.dim = int(dim)

    def __call__(self, x) -> float:
        return float(self.evaluate_rows(x)[0])

    def evaluate_rows(self, rows) -> np.ndarray:
        return _sphere_rows(_as_rows(rows, self.dim))

    def __repr__(self) -> str:
        return f"Sphere(dim={self.dim})"


@dataclass(frozen=True)
class NetSpec:
    """One row of the benchmark network table.

    ``hidden_layers`` counts hidden affine layers; the network has
    ``hidden_layers + 1`` affine layers in total.
    """

    net_id: int
    scale: str
    activation: str
    input_dim: int
    hidden_dim: int
    hidden_layers: int
    reported_params: int
    output_dim: int = 1

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if min(self.input_dim, self.hidden_dim, self.hidden_layers) < 1:
            raise ValueError("input_dim, hidden_dim and hidden_layers must be positive")
        if self.output_dim != 1:
            raise ValueError("only scalar-output networks are supported")

    @property
    def layer_dims(self) -> list[int]:
        return [self.input_dim] + [self.hidden_dim] * self.hidden_layers + [self.output_dim]


def param_count(spec: NetSpec) -> int:
    d, h, L = spec.input_dim, spec.hidden_dim, spec.hidden_layers
    return (d * h + h) + (L - 1) * (h * h + h) + (h + 1)


def _row(net_id, scale, act, d, h, layers, params):
    return NetSpec(net_id, scale, act, d, h, layers, params)


# Hidden-layer counts are solved from the parameter column; the printed
# counts for nets 10-12 are not reachable and are kept only for reference.
REGISTRY: dict[int, NetSpec] = {s.net_id: s for s in [
    _row(1, "small", "relu", 10, 16, 2, 465),
    _row(2, "small", "gelu", 10, 32, 5, 4_609),
    _row(3, "small", "relu", 20, 16, 5, 1_441),
    _row(4, "small", "gelu", 20, 32, 5, 4_929),
    _row(5, "medium", "relu", 100, 64, 8, 35_649),
    _row(6, "medium", "gelu", 100, 128, 8, 128_641),
    _row(7, "medium", "relu", 200, 64, 8, 42_049),
    _row(8, "medium", "gelu", 200, 128, 8, 141_441),
    _row(9, "large", "relu", 1000, 256, 11, 914_433),
    _row(10, "large", "gelu", 1000, 512, 11, 3_137_585),
    _row(11, "large", "relu", 2000, 256, 11, 1_173_433),
    _row(12, "large", "gelu", 2000, 512, 11, 3_657_585),
]}


def get_spec(net_id: int) -> NetSpec:
    try:
        return REGISTRY[int(net_id)]
    except (KeyError, ValueError):
        raise ValueError(f"unknown net id {net_id!r}; valid ids are 1..12") from None


class MlpBlackBox:
    """Fully connected network with frozen weights.

    ``weights[l]`` has shape ``(fan_in, fan_out)`` and ``biases[l]`` shape
    ``(fan_out,)``. The activation follows every layer except the last.
    """

    def __init__(self, spec: NetSpec, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray],
                 weight_seed: int | None = None):
        dims = spec.layer_dims
        if len(weights) != len(dims) - 1 or len(biases) != len(dims) - 1:
            raise ValueError(f"expected {len(dims) - 1} layers")
        ws, bs = [], []
        for layer, (w, b) in enumerate(zip(weights, biases)):
            w = np.array(w, dtype=np.float64)
            b = np.array(b, dtype=np.float64)
            if w.shape != (dims[layer], dims[layer + 1]) or b.shape != (dims[layer + 1],):
                raise ValueError(f"layer {layer}: bad shapes {w.shape}, {b.shape}")
            w.flags.writeable = False
            b.flags.writeable = False
            ws.append(w)
            bs.append(b)
        self.spec = spec
        self.weight_seed = weight_seed
        self.weights = tuple(ws)
        self.biases = tuple(bs)
        packed = np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(ws, bs)])
        packed.flags.writeable = False
        self._params = packed
        self._dims = np.array(dims, dtype=np.int64)
        self._gelu = spec.activation == "gelu"

    @property
    def dim(self) -> int:
        return self.spec.input_dim

    @property
    def n_params(self) -> int:
        return int(self._params.size)

    def __call__(self, x) -> float:
        return forward(self, x)

    def evaluate_rows(self, rows) -> np.ndarray:
        return _mlp_rows(_as_rows(rows, self.dim), self._params, self._dims, self._gelu)

    def __repr__(self) -> str:
        return f"MlpBlackBox(net_id={self.spec.net_id}, params={self.n_params})"


def build_net(spec: NetSpec, weight_seed: int = 0) -> MlpBlackBox:
    """Sample weights and biases uniformly in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``."""
    dims = spec.layer_dims
    weights, biases = [], []
    for layer in range(len(dims) - 1):
        fan_in, fan_out = dims[layer], dims[layer + 1]
        bound = 1.0 / math.sqrt(fan_in)
        u = uniform_grid(weight_seed, Stream.WEIGHTS, layer, [0], [0],
                         np.arange(fan_out), np.arange(fan_in))[0, 0]
        weights.append(((2.0 * u - 1.0) * bound).T)
        ub = uniform_grid(weight_seed, Stream.WEIGHTS, layer, [0], [1], np.arange(fan_out), [0])
        biases.append((2.0 * ub[0, 0, :, 0] - 1.0) * bound)
    return MlpBlackBox(spec, weights, biases, weight_seed=weight_seed)


def forward(net: MlpBlackBox, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != net.dim:
        raise ValueError(f"input must have length {net.dim}, got shape {x.shape}")
    return float(net.evaluate_rows(x)[0])


def net_to_json(net: MlpBlackBox) -> str:
    """Serialize a registry-style network as its spec plus weight seed."""
    if net.weight_seed is None:
        raise ValueError("only seeded networks can be exported; weights are never serialized")
    doc = asdict(net.spec)
    doc["weight_seed"] = net.weight_seed
    return json.dumps(doc, indent=2, sort_keys=True)


def net_from_json(text: str) -> MlpBlackBox:
    doc = json.loads(text)
    seed = doc.pop("weight_seed")
    return build_net(NetSpec(**doc), weight_seed=int(seed))
