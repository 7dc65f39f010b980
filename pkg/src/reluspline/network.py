"""Dense ReLU multilayer perceptron with a linear output layer.

Weights follow the ``(fan_out, fan_in)`` convention, so a layer maps a batch
``h`` (samples in rows) to ``h @ W.T + b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from reluspline.core import RngStream, as_matrix, check_finite, relu, uniform

__all__ = [
    "ForwardTrace",
    "Gradients",
    "MlpNetwork",
    "backprop",
    "clone_network",
    "forward",
    "glorot_uniform_init",
    "load_network",
    "mse",
    "predict",
    "save_network",
]

FORMAT_HEADER = "reluspline-network 1"


class MlpNetwork:
    """Layer sizes plus one weight matrix and bias vector per affine map.

    ``layer_sizes`` is ``[d_in, n_1, ..., n_K, d_out]``; there are ``K``
    hidden ReLU layers and one linear output layer, so ``K + 1`` weight
    matrices.
    """

    def __init__(self, layer_sizes: Sequence[int], weights, biases):
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64).reshape(-1) for b in biases]
        self._validate()

    def _validate(self) -> None:
        sizes = self.layer_sizes
        if len(sizes) < 2:
            raise ValueError("layer_sizes needs at least an input and an output size")
        if any(s < 1 for s in sizes):
            raise ValueError(f"all layer sizes must be >= 1, got {list(sizes)}")
        n_maps = len(sizes) - 1
        if len(self.weights) != n_maps or len(self.biases) != n_maps:
            raise ValueError(
                f"expected {n_maps} weight matrices and bias vectors, got "
                f"{len(self.weights)} and {len(self.biases)}"
            )
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (sizes[i + 1], sizes[i])
            if w.shape != want:
                raise ValueError(f"weights[{i}] has shape {w.shape}, expected {want}")
            if b.shape != (sizes[i + 1],):
                raise ValueError(f"biases[{i}] has length {b.size}, expected {sizes[i + 1]}")
            check_finite(w, f"weights[{i}]")
            check_finite(b, f"biases[{i}]")

    @property
    def d_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def d_out(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_hidden_layers(self) -> int:
        return len(self.layer_sizes) - 2

    def parameters(self) -> list[np.ndarray]:
        """Parameter arrays in the order W_1, b_1, W_2, b_2, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def set_parameters(self, params: Sequence[np.ndarray]) -> None:
        self.weights = list(params[0::2])
        self.biases = list(params[1::2])

    def parameter_names(self) -> list[str]:
        names = []
        for i in range(len(self.weights)):
            names.extend((f"weights[{i}]", f"biases[{i}]"))
        return names

    def __eq__(self, other) -> bool:
        if not isinstance(other, MlpNetwork):
            return NotImplemented
        return self.layer_sizes == other.layer_sizes and all(
            np.array_equal(p, q) for p, q in zip(self.parameters(), other.parameters())
        )

    def __repr__(self) -> str:
        return f"MlpNetwork(layer_sizes={list(self.layer_sizes)})"


@dataclass
class ForwardTrace:
    """Per-layer pre- and post-activations for a batch.

    ``postactivations[-1]`` is the network output (identity activation).
    """

    inputs: np.ndarray
    preactivations: list[np.ndarray]
    postactivations: list[np.ndarray]

    @property
    def output(self) -> np.ndarray:
        return self.postactivations[-1]

    @property
    def hidden(self) -> list[np.ndarray]:
        return self.postactivations[:-1]


class Gradients(NamedTuple):
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def as_list(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


def glorot_uniform_init(layer_sizes: Sequence[int], rng: RngStream) -> MlpNetwork:
    """Weights uniform on [-L, L] with L = sqrt(6 / (fan_in + fan_out)); zero biases."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ValueError("layer_sizes needs at least an input and an output size")
    if any(s < 1 for s in sizes):
        raise ValueError(f"all layer sizes must be >= 1, got {sizes}")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(uniform(rng, -limit, limit, fan_out, fan_in))
        biases.append(np.zeros(fan_out))
    return MlpNetwork(sizes, weights, biases)


def _check_inputs(net: MlpNetwork, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1 and net.d_in == 1:
        x = x.reshape(-1, 1)
    x = as_matrix(x, "x")
    if x.shape[1] != net.d_in:
        raise ValueError(
            f"input has {x.shape[1]} columns but the network expects {net.d_in} "
            f"(x shape {x.shape})"
        )
    return x


def forward(net: MlpNetwork, x) -> ForwardTrace:
    x = _check_inputs(net, x)
    pre, post = [], []
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w.T + b
        h = z if i == last else relu(z)
        pre.append(z)
        post.append(h)
    return ForwardTrace(x, pre, post)


def predict(net: MlpNetwork, x) -> np.ndarray:
    """Network output only; cheaper than :func:`forward` for large batches."""
    h = _check_inputs(net, x)
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.T + b
        if i != last:
            h = relu(h)
    return h


def mse(pred, target) -> float:
    """Mean over samples and output dimensions of the squared error."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"mse shape mismatch: pred {pred.shape} vs target {target.shape}")
    if pred.size == 0:
        raise ValueError("mse of empty arrays is undefined")
    diff = pred - target
    return float(np.mean(diff * diff))


def _check_target(net: MlpNetwork, n: int, target) -> np.ndarray:
    t = np.asarray(target, dtype=np.float64)
    if t.ndim == 1 and net.d_out == 1:
        t = t.reshape(-1, 1)
    if t.shape != (n, net.d_out):
        raise ValueError(f"target has shape {t.shape}, expected {(n, net.d_out)}")
    check_finite(t, "target")
    return t


def backprop(net: MlpNetwork, x, target, trace: ForwardTrace | None = None) -> Gradients:
    """Exact gradient of :func:`mse` with respect to every weight and bias.

    The ReLU derivative at a preactivation of exactly 0 is taken as 0.
    A precomputed ``trace`` for the same ``x`` may be passed to skip the
    forward pass.
    """
    if trace is None:
        trace = forward(net, x)
    x = trace.inputs
    t = _check_target(net, x.shape[0], target)
    out = trace.output
    delta = (2.0 / out.size) * (out - t)
    n_maps = len(net.weights)
    gw: list[np.ndarray] = [None] * n_maps  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n_maps  # type: ignore[list-item]
    for i in range(n_maps - 1, -1, -1):
        h_prev = x if i == 0 else trace.postactivations[i - 1]
        gw[i] = delta.T @ h_prev
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i]) * (trace.preactivations[i - 1] > 0.0)
    return Gradients(gw, gb)


def clone_network(net: MlpNetwork) -> MlpNetwork:
    return MlpNetwork(
        net.layer_sizes,
        [w.copy() for w in net.weights],
        [b.copy() for b in net.biases],
    )


def _fmt(values: np.ndarray) -> str:
    return " ".join(format(float(v), ".17g") for v in values.reshape(-1))


def dumps_network(net: MlpNetwork) -> str:
    lines = [FORMAT_HEADER, "layer_sizes " + " ".join(str(s) for s in net.layer_sizes)]
    for p in net.parameters():
        lines.append(_fmt(p))
    return "\n".join(lines) + "\n"


def loads_network(text: str) -> MlpNetwork:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != FORMAT_HEADER:
        raise ValueError(f"not a network file: expected header {FORMAT_HEADER!r}")
    if len(lines) < 2 or not lines[1].startswith("layer_sizes "):
        raise ValueError("network file is missing the layer_sizes line")
    sizes = [int(s) for s in lines[1].split()[1:]]
    n_maps = len(sizes) - 1
    if len(lines) != 2 + 2 * n_maps:
        raise ValueError(
            f"network file has {len(lines) - 2} parameter lines, expected {2 * n_maps}"
        )
    weights, biases = [], []
    for i in range(n_maps):
        w = np.array([float(v) for v in lines[2 + 2 * i].split()])
        b = np.array([float(v) for v in lines[3 + 2 * i].split()])
        if w.size != sizes[i + 1] * sizes[i]:
            raise ValueError(f"weights[{i}] has {w.size} values, expected {sizes[i + 1] * sizes[i]}")
        weights.append(w.reshape(sizes[i + 1], sizes[i]))
        biases.append(b)
    return MlpNetwork(sizes, weights, biases)


def save_network(net: MlpNetwork, path) -> None:
    Path(path).write_text(dumps_network(net), encoding="utf-8")


def load_network(path) -> MlpNetwork:
    return loads_network(Path(path).read_text(encoding="utf-8"))


def as_network(obj) -> MlpNetwork:
    """Accept an :class:`MlpNetwork` or a fitted estimator exposing ``net_``."""
    if isinstance(obj, MlpNetwork):
        return obj
    net = getattr(obj, "net_", None)
    if isinstance(net, MlpNetwork):
        return net
    raise TypeError(f"expected an MlpNetwork or a fitted ReluNetRegressor, got {type(obj).__name__}")
