"""Measurements on trained networks: dead units, output size, and the
signal-plus-noise decomposition."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from reluspline.core import RngStream, as_matrix
from reluspline.network import (
    MlpNetwork,
    as_network,
    clone_network,
    forward,
    glorot_uniform_init,
    mse,
    predict,
)
from reluspline.optim import TrainConfig, TrialRecord, train
from reluspline.pwl import PwlFunction, SplineNoiseData

__all__ = [
    "BoostResult",
    "CensusReport",
    "DecompositionResult",
    "LayerCensus",
    "artificial_boost",
    "dead_neuron_census",
    "ensemble_mean_function",
    "noise_decomposition",
    "perfect_fit_reference",
    "size_metric",
]

logger = logging.getLogger(__name__)

GRID_POINTS = 512


def _fmt(v) -> str:
    return format(float(v), ".17g")


@dataclass(frozen=True)
class LayerCensus:
    layer: int  # 1-based hidden layer index
    neurons: int
    dead: float  # a count, or a mean count when averaged over trials
    frac: float


@dataclass
class CensusReport:
    layers: list[LayerCensus]

    @property
    def fractions(self) -> np.ndarray:
        return np.array([c.frac for c in self.layers])

    def layer(self, index: int) -> LayerCensus:
        """Census of hidden layer ``index`` (1-based)."""
        return self.layers[index - 1]

    @classmethod
    def mean(cls, reports: Sequence["CensusReport"]) -> "CensusReport":
        if not reports:
            raise ValueError("cannot average an empty list of census reports")
        layers = []
        for rows in zip(*(r.layers for r in reports)):
            dead = float(np.mean([c.dead for c in rows]))
            frac = float(np.mean([c.frac for c in rows]))
            layers.append(LayerCensus(rows[0].layer, rows[0].neurons, dead, frac))
        return cls(layers)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["layer", "neurons", "dead", "frac"])
            for c in self.layers:
                w.writerow([c.layer, c.neurons, _fmt(c.dead), _fmt(c.frac)])


def dead_neuron_census(net, x) -> CensusReport:
    """Count hidden units whose ReLU output is exactly 0 on every row of ``x``."""
    net = as_network(net)
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("census needs a nonempty dataset")
    trace = forward(net, x)
    layers = []
    for i, h in enumerate(trace.hidden):
        dead = int(np.count_nonzero(np.all(h == 0.0, axis=0)))
        layers.append(LayerCensus(i + 1, h.shape[1], dead, dead / h.shape[1]))
    return CensusReport(layers)


def size_metric(net, x) -> float:
    """Sum (not mean) of squared outputs over samples and output dimensions."""
    out = predict(as_network(net), x)
    return float(np.sum(out * out))


def perfect_fit_reference(y) -> float:
    """Sum of squared targets, the size an exact fit would reach."""
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("perfect_fit_reference needs nonempty targets")
    return float(np.sum(y * y))


def ensemble_mean_function(nets: Sequence, grid) -> np.ndarray:
    """Pointwise mean of 1-input, 1-output networks evaluated on ``grid``."""
    nets = [as_network(n) for n in nets]
    if not nets:
        raise ValueError("ensemble is empty")
    for n in nets:
        if n.d_in != 1 or n.d_out != 1:
            raise ValueError(
                f"ensemble members must be 1-input, 1-output networks, got {list(n.layer_sizes)}"
            )
    t = np.asarray(grid, dtype=np.float64).reshape(-1, 1)
    # sum in list order; np.mean over the stacked axis is order-stable too
    outs = np.stack([predict(n, t).reshape(-1) for n in nets])
    return outs.mean(axis=0)


# ---------------------------------------------------------------------------
# signal/noise decomposition


@dataclass
class DecompositionResult:
    """Per-checkpoint errors of the two noise approximations.

    ``mse_pure``: networks trained on the noise alone, compared with the noise.
    ``mse_diff``: each network trained on signal+noise minus the mean of the
    networks trained on the clean signal, compared with the noise.
    ``functions[epoch]`` holds grid evaluations with shape (trials, grid);
    ``pure_per_trial`` and ``diff_per_trial`` have shape (epochs, trials).
    """

    epochs: list[int]
    mse_pure: np.ndarray
    mse_diff: np.ndarray
    grid: np.ndarray
    pure_per_trial: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    diff_per_trial: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    functions: dict[int, dict[str, np.ndarray]] = field(default_factory=dict)
    trials: list[int] = field(default_factory=list)
    diverged_trials: list[int] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["checkpoint", "mse_pure", "mse_diff"])
            for e, p, d in zip(self.epochs, self.mse_pure, self.mse_diff):
                w.writerow([e, _fmt(p), _fmt(d)])

    def functions_to_csv(self, epoch: int, path) -> None:
        """Grid dump for one checkpoint: ``trial,x,f_noisy,f_clean_mean,f_noise,diff``."""
        f = self.functions[epoch]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trial", "x", "f_noisy", "f_clean_mean", "f_noise", "diff"])
            for row, trial in enumerate(self.trials):
                for j, x in enumerate(self.grid):
                    w.writerow([
                        trial,
                        _fmt(x),
                        _fmt(f["f_noisy"][row, j]),
                        _fmt(f["f_clean_mean"][j]),
                        _fmt(f["f_noise"][row, j]),
                        _fmt(f["diff"][row, j]),
                    ])


def _layer_sizes(net_template) -> list[int]:
    if isinstance(net_template, MlpNetwork):
        return list(net_template.layer_sizes)
    return [int(s) for s in net_template]


def _train_from(init: MlpNetwork, x, y, config, checkpoints) -> TrialRecord:
    return train(clone_network(init), x, y, config, checkpoint_epochs=checkpoints, keep_snapshots=True)


def noise_decomposition(
    spline_data: SplineNoiseData,
    net_template,
    train_config: TrainConfig,
    n_trials: int,
    checkpoints: Sequence[int],
    grid=None,
) -> DecompositionResult:
    """Train on X+N, X and N from shared per-trial initialisations and compare
    two estimates of N over training time.

    Trial ``k`` initialises with ``RngStream(train_config.seed + k)`` and
    trains all three copies with that same seed. A trial where any of the
    three runs diverges is dropped from every ensemble.
    """
    checkpoints = [int(c) for c in checkpoints]
    if not checkpoints:
        raise ValueError("need at least one checkpoint")
    if any(b < a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError(f"checkpoints must be nondecreasing, got {checkpoints}")
    if checkpoints[0] < 0 or checkpoints[-1] > train_config.epochs:
        raise ValueError(f"checkpoints must lie in [0, {train_config.epochs}], got {checkpoints}")
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    epochs = sorted(set(checkpoints))
    sizes = _layer_sizes(net_template)
    if sizes[0] != 1 or sizes[-1] != 1:
        raise ValueError(f"decomposition needs a 1-input, 1-output network, got {sizes}")
    x, y_clean, noise, y_noisy = spline_data
    if grid is None:
        grid = np.linspace(float(x.min()), float(x.max()), GRID_POINTS)
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)

    runs = []
    diverged = []
    for k in range(n_trials):
        cfg = train_config.with_seed(train_config.seed + k)
        init = glorot_uniform_init(sizes, RngStream(cfg.seed))
        recs = {
            name: _train_from(init, x, target, cfg, epochs)
            for name, target in (("noisy", y_noisy), ("clean", y_clean), ("noise", noise))
        }
        if any(r.diverged for r in recs.values()):
            diverged.append(k)
            logger.warning("decomposition trial %d diverged and is excluded", k)
            continue
        runs.append((k, recs))
    if not runs:
        raise RuntimeError("every decomposition trial diverged")

    pure_table, diff_table = [], []
    functions = {}
    gcol = grid.reshape(-1, 1)
    for e in epochs:
        clean_nets = [recs["clean"].snapshots[e] for _, recs in runs]
        clean_mean_train = ensemble_mean_function(clean_nets, x).reshape(-1, 1)
        clean_mean_grid = ensemble_mean_function(clean_nets, grid)
        pure, diff = [], []
        f_noisy, f_noise = [], []
        for _, recs in runs:
            noisy_net, noise_net = recs["noisy"].snapshots[e], recs["noise"].snapshots[e]
            diff.append(mse(predict(noisy_net, x) - clean_mean_train, noise))
            pure.append(mse(predict(noise_net, x), noise))
            f_noisy.append(predict(noisy_net, gcol).reshape(-1))
            f_noise.append(predict(noise_net, gcol).reshape(-1))
        pure_table.append(pure)
        diff_table.append(diff)
        f_noisy = np.array(f_noisy)
        functions[e] = {
            "f_noisy": f_noisy,
            "f_clean_mean": clean_mean_grid,
            "f_noise": np.array(f_noise),
            "diff": f_noisy - clean_mean_grid[None, :],
        }
    pure_table = np.array(pure_table)
    diff_table = np.array(diff_table)
    return DecompositionResult(
        epochs,
        pure_table.mean(axis=1),
        diff_table.mean(axis=1),
        grid,
        pure_table,
        diff_table,
        functions,
        [k for k, _ in runs],
        diverged,
    )


@dataclass
class BoostResult:
    """Outcome of fitting noise with a known carrier added and then removed."""

    grid: np.ndarray
    fit: np.ndarray  # trained output minus carrier, on the grid
    trained: np.ndarray  # raw trained output on the grid
    carrier: np.ndarray  # carrier on the grid
    mse: float  # MSE of (trained - carrier) against the noise at the training inputs
    network: MlpNetwork
    record: TrialRecord


def _carrier_values(carrier, t: np.ndarray) -> np.ndarray:
    if carrier is None:
        return np.zeros_like(t)
    return np.asarray(carrier(t), dtype=np.float64).reshape(t.shape)


def artificial_boost(
    noise_data,
    carrier: PwlFunction | Callable | None,
    net_template,
    config: TrainConfig,
    grid=None,
) -> BoostResult:
    """Fit ``noise + carrier``, then subtract the exact carrier.

    ``noise_data`` is an ``(x, noise)`` pair (or :class:`SplineNoiseData`, whose
    ``x`` and ``noise`` are used). The network is initialised from
    ``RngStream(config.seed)``; a ``None`` carrier means the zero function.
    """
    if isinstance(noise_data, SplineNoiseData):
        x, noise = noise_data.x, noise_data.noise
    else:
        x, noise = noise_data
    x = as_matrix(np.asarray(x, dtype=np.float64).reshape(-1, 1), "x")
    noise = np.asarray(noise, dtype=np.float64).reshape(-1, 1)
    sizes = _layer_sizes(net_template)
    if grid is None:
        grid = np.linspace(float(x.min()), float(x.max()), GRID_POINTS)
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    carrier_train = _carrier_values(carrier, x)
    net = glorot_uniform_init(sizes, RngStream(config.seed))
    record = train(net, x, noise + carrier_train, config)
    trained_train = predict(net, x)
    trained = predict(net, grid.reshape(-1, 1)).reshape(-1)
    carrier_grid = _carrier_values(carrier, grid)
    return BoostResult(
        grid=grid,
        fit=trained - carrier_grid,
        trained=trained,
        carrier=carrier_grid,
        mse=mse(trained_train - carrier_train, noise),
        network=net,
        record=record,
    )
