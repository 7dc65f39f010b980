"""Exact piecewise-linear views of 1-D ReLU networks, plus 1-D target generators."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from reluspline.core import RngStream, check_finite, standard_normal, uniform
from reluspline.network import MlpNetwork, predict

__all__ = [
    "LineRestriction",
    "PwlFunction",
    "SplineNoiseData",
    "count_pieces",
    "extract_pwl",
    "random_linear_spline",
    "restrict_to_line",
    "sawtooth_dataset",
    "spline_plus_noise",
]

DEDUP_REL_TOL = 1e-12
DEFAULT_SLOPE_TOL = 1e-8


class PwlFunction:
    """Continuous piecewise-linear function on ``[breakpoints[0], breakpoints[-1]]``.

    Evaluation is linear interpolation between adjacent breakpoints, so the
    breakpoint table is an exact representation.
    """

    def __init__(self, breakpoints, values):
        bp = np.asarray(breakpoints, dtype=np.float64).reshape(-1)
        val = np.asarray(values, dtype=np.float64).reshape(-1)
        if bp.size < 2:
            raise ValueError("a PwlFunction needs at least two breakpoints")
        if bp.shape != val.shape:
            raise ValueError(f"{bp.size} breakpoints but {val.size} values")
        check_finite(bp, "breakpoints")
        check_finite(val, "values")
        if np.any(np.diff(bp) <= 0.0):
            raise ValueError("breakpoints must be strictly increasing")
        self.breakpoints = bp
        self.values = val

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    @property
    def boundary_slopes(self) -> tuple[float, float]:
        s = self.slopes
        return float(s[0]), float(s[-1])

    @property
    def n_segments(self) -> int:
        return self.breakpoints.size - 1

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        a, b = self.domain
        if np.any(t < a) or np.any(t > b):
            raise ValueError(f"evaluation points outside the domain [{a}, {b}]")
        return np.interp(t, self.breakpoints, self.values)

    def __repr__(self) -> str:
        a, b = self.domain
        return f"PwlFunction({self.breakpoints.size} breakpoints on [{a:g}, {b:g}])"

    @classmethod
    def from_samples(cls, x, y) -> "PwlFunction":
        """Interpolant through sorted samples (e.g. a sampled target curve)."""
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        order = np.argsort(x, kind="stable")
        return cls(x[order], y[order])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y"])
            for x, y in zip(self.breakpoints, self.values):
                w.writerow([format(float(x), ".17g"), format(float(y), ".17g")])

    @classmethod
    def from_csv(cls, path) -> "PwlFunction":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        return cls([float(r["x"]) for r in rows], [float(r["y"]) for r in rows])


def count_pieces(pwl: PwlFunction, slope_tol: float = DEFAULT_SLOPE_TOL) -> int:
    """Number of maximal constant-slope intervals.

    Adjacent segments merge when their slopes differ by at most
    ``slope_tol * (1 + max(|s_left|, |s_right|))``.
    """
    if slope_tol < 0:
        raise ValueError(f"slope_tol must be >= 0, got {slope_tol}")
    s = pwl.slopes
    left, right = s[:-1], s[1:]
    scale = 1.0 + np.maximum(np.abs(left), np.abs(right))
    return 1 + int(np.count_nonzero(np.abs(right - left) > slope_tol * scale))


@dataclass
class LineRestriction:
    """A network restricted to the line ``base + t * direction``."""

    base: np.ndarray
    direction: np.ndarray
    network: MlpNetwork

    def point(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64).reshape(-1, 1)
        return self.base[None, :] + t * self.direction[None, :]


def restrict_to_line(net: MlpNetwork, p, v) -> LineRestriction:
    """Fold the line ``p + t v`` into the first layer, giving a 1-input network."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if p.size != net.d_in or v.size != net.d_in:
        raise ValueError(
            f"base point and direction need {net.d_in} entries, got {p.size} and {v.size}"
        )
    check_finite(p, "base point")
    check_finite(v, "direction")
    if not np.any(v != 0.0):
        raise ValueError("line direction must be nonzero")
    w0, b0 = net.weights[0], net.biases[0]
    weights = [(w0 @ v).reshape(-1, 1)] + [w.copy() for w in net.weights[1:]]
    biases = [w0 @ p + b0] + [b.copy() for b in net.biases[1:]]
    sizes = (1,) + net.layer_sizes[1:]
    return LineRestriction(p, v, MlpNetwork(sizes, weights, biases))


def _hidden_preactivations(net: MlpNetwork, t: np.ndarray, layer: int) -> np.ndarray:
    """Preactivations of hidden layer ``layer`` (0-based) at the 1-D inputs ``t``."""
    h = t.reshape(-1, 1)
    for i in range(layer):
        h = np.maximum(h @ net.weights[i].T + net.biases[i], 0.0)
    return h @ net.weights[layer].T + net.biases[layer]


def _merge_knots(knots: np.ndarray, new: np.ndarray, tol: float) -> np.ndarray:
    """Union of sorted ``knots`` and ``new``; new points within ``tol`` of an
    accepted point are dropped."""
    if new.size == 0:
        return knots
    new = np.sort(new)
    # drop candidates that sit on an existing knot
    pos = np.searchsorted(knots, new)
    left = np.abs(new - knots[np.clip(pos - 1, 0, knots.size - 1)])
    right = np.abs(knots[np.clip(pos, 0, knots.size - 1)] - new)
    new = new[(left > tol) & (right > tol)]
    if new.size == 0:
        return knots
    # collapse clusters among the new candidates
    keep = [new[0]]
    for c in new[1:]:
        if c - keep[-1] > tol:
            keep.append(c)
    return np.union1d(knots, np.array(keep))


def extract_pwl(net: MlpNetwork, a: float, b: float) -> PwlFunction:
    """Exact piecewise-linear form of a 1-input, 1-output network on ``[a, b]``.

    Starts from the knot set ``{a, b}``. For each hidden layer in turn every
    neuron's preactivation is affine on each current piece (the layers below
    have already been linearised), so its zero crossings are found by linear
    interpolation of the values at the piece ends and added as knots.
    After the last hidden layer the network is affine between knots and the
    output values at the knots define the function.
    """
    if net.d_in != 1 or net.d_out != 1:
        raise ValueError(
            f"extract_pwl needs a 1-input, 1-output network, got {list(net.layer_sizes)}; "
            "use restrict_to_line to reduce a multi-input network to one input"
        )
    a, b = float(a), float(b)
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    tol = DEDUP_REL_TOL * (b - a)
    knots = np.array([a, b])
    for layer in range(net.n_hidden_layers):
        z = _hidden_preactivations(net, knots, layer)
        z0, z1 = z[:-1], z[1:]
        cross = ((z0 > 0.0) & (z1 < 0.0)) | ((z0 < 0.0) & (z1 > 0.0))
        seg, _ = np.nonzero(cross)
        if seg.size == 0:
            continue
        za, zb = z0[cross], z1[cross]
        ta, tb = knots[seg], knots[seg + 1]
        roots = ta + za / (za - zb) * (tb - ta)
        # strictly inside the piece
        roots = np.clip(roots, ta, tb)
        knots = _merge_knots(knots, roots, tol)
    values = predict(net, knots.reshape(-1, 1)).reshape(-1)
    return PwlFunction(knots, values)


# ---------------------------------------------------------------------------
# 1-D targets


def sawtooth_dataset(
    n_points: int, n_teeth: int = 16, domain: tuple[float, float] = (-1.0, 1.0)
) -> tuple[np.ndarray, np.ndarray]:
    """Sawtooth wave sampled on a uniform grid.

    Each of the ``n_teeth`` periods ramps linearly from 0 towards 1 and drops
    back; at a tooth boundary (including both domain ends) the value is 0.
    Returns column vectors ``x`` and ``y`` of shape ``(n_points, 1)``.
    """
    if n_points < 2:
        raise ValueError(f"n_points must be >= 2, got {n_points}")
    if n_teeth < 1:
        raise ValueError(f"n_teeth must be >= 1, got {n_teeth}")
    a, b = map(float, domain)
    if not a < b:
        raise ValueError(f"domain must satisfy a < b, got {domain}")
    x = np.linspace(a, b, n_points)
    u = (x - a) * (n_teeth / (b - a))
    near = np.round(u)
    u = np.where(np.abs(u - near) < 1e-9, near, u)
    y = u - np.floor(u)
    return x.reshape(-1, 1), y.reshape(-1, 1)


def random_linear_spline(
    n_knots: int, domain: tuple[float, float], rng: RngStream
) -> PwlFunction:
    """Spline with knots at the domain ends plus ``n_knots - 2`` uniform interior
    knots, and i.i.d. standard-normal knot values."""
    if n_knots < 2:
        raise ValueError(f"n_knots must be >= 2, got {n_knots}")
    a, b = map(float, domain)
    if not a < b:
        raise ValueError(f"domain must satisfy a < b, got {domain}")
    while True:
        interior = np.sort(uniform(rng, a, b, 1, n_knots - 2).reshape(-1)) if n_knots > 2 else np.empty(0)
        xs = np.concatenate([[a], interior, [b]])
        if np.all(np.diff(xs) > 0.0):
            break
    ys = standard_normal(rng, 1, n_knots).reshape(-1)
    return PwlFunction(xs, ys)


@dataclass
class SplineNoiseData:
    """Training data for the signal-plus-noise experiment; all arrays are (n, 1)."""

    x: np.ndarray
    y_clean: np.ndarray
    noise: np.ndarray
    y_noisy: np.ndarray

    def __iter__(self):
        return iter((self.x, self.y_clean, self.noise, self.y_noisy))


def spline_plus_noise(
    spline: PwlFunction, n_points: int, noise_sigma: float, rng: RngStream
) -> SplineNoiseData:
    """Sample ``spline`` on a uniform grid over its domain and add N(0, sigma^2) noise."""
    if n_points < 1:
        raise ValueError(f"n_points must be >= 1, got {n_points}")
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    a, b = spline.domain
    x = np.linspace(a, b, n_points).reshape(-1, 1)
    y_clean = spline(x)
    noise = noise_sigma * standard_normal(rng, n_points, 1)
    return SplineNoiseData(x, y_clean, noise, y_clean + noise)
