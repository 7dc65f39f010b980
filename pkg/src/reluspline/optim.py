"""Adadelta, batching policies, and the checkpointed training loop."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from reluspline.core import RngStream
from reluspline.network import MlpNetwork, backprop, clone_network, forward, mse

__all__ = [
    "AdadeltaState",
    "AggregateRecord",
    "BatchPolicy",
    "Checkpoint",
    "FixedDropRemainder",
    "FixedWithRemainder",
    "FullBatch",
    "RandomSample",
    "TrainConfig",
    "TrialRecord",
    "adadelta_step",
    "batches_per_epoch",
    "make_batches",
    "run_trials",
    "train",
    "write_trials_csv",
]

logger = logging.getLogger(__name__)


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass
class AdadeltaState:
    """Decayed accumulators of squared gradients and squared updates."""

    acc_grad: list[np.ndarray]
    acc_delta: list[np.ndarray]
    rho: float = 0.95
    epsilon: float = 1e-7
    lr: float = 1.0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray], rho=0.95, epsilon=1e-7, lr=1.0):
        if not 0.0 <= rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {rho}")
        if epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        return cls(
            [np.zeros_like(p, dtype=np.float64) for p in params],
            [np.zeros_like(p, dtype=np.float64) for p in params],
            rho=float(rho),
            epsilon=float(epsilon),
            lr=float(lr),
        )


def adadelta_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdadeltaState,
    names: Sequence[str] | None = None,
) -> tuple[list[np.ndarray], AdadeltaState]:
    """One Adadelta update.

    For each parameter block::

        acc_grad  <- rho * acc_grad + (1 - rho) * g**2
        delta     <- -sqrt(acc_delta + eps) / sqrt(acc_grad + eps) * g
        acc_delta <- rho * acc_delta + (1 - rho) * delta**2
        p         <- p + lr * delta

    Returns fresh parameter arrays; ``state`` is updated in place and also
    returned.
    """
    if not (len(params) == len(grads) == len(state.acc_grad)):
        raise ValueError(
            f"got {len(params)} parameter blocks, {len(grads)} gradients and "
            f"{len(state.acc_grad)} accumulator blocks"
        )
    rho, eps = state.rho, state.epsilon
    new_params = []
    for i, (p, g) in enumerate(zip(params, grads)):
        label = names[i] if names is not None else f"block {i}"
        if p.shape != g.shape:
            raise ValueError(f"gradient for {label} has shape {g.shape}, parameter has {p.shape}")
        # a finite sum means every entry is finite (an overflowing sum is
        # treated as divergence too)
        if not math.isfinite(g.sum()):
            raise NonFiniteGradientError(f"non-finite gradient in {label}")
        acc_g = state.acc_grad[i]
        acc_g *= rho
        acc_g += (1.0 - rho) * g * g
        delta = -np.sqrt(state.acc_delta[i] + eps) / np.sqrt(acc_g + eps) * g
        acc_d = state.acc_delta[i]
        acc_d *= rho
        acc_d += (1.0 - rho) * delta * delta
        new_params.append(p + state.lr * delta)
    return new_params, state


# ---------------------------------------------------------------------------
# batching


@dataclass(frozen=True)
class FullBatch:
    """Every epoch is a single step on all the data."""

    def describe(self) -> str:
        return "full"


@dataclass(frozen=True)
class FixedWithRemainder:
    """Batches of ``size``; leftover points form one smaller final batch."""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.size}")

    def describe(self) -> str:
        return f"fixed({self.size})"


@dataclass(frozen=True)
class FixedDropRemainder:
    """Batches of ``size``; leftover points are skipped for that epoch."""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.size}")

    def describe(self) -> str:
        return f"fixed-drop({self.size})"


@dataclass(frozen=True)
class RandomSample:
    """``steps_per_epoch`` batches, each drawn with replacement from all points."""

    size: int
    steps_per_epoch: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.size}")
        if self.steps_per_epoch < 1:
            raise ValueError(f"steps_per_epoch must be >= 1, got {self.steps_per_epoch}")

    def describe(self) -> str:
        return f"random({self.size}x{self.steps_per_epoch})"


BatchPolicy = Union[FullBatch, FixedWithRemainder, FixedDropRemainder, RandomSample]


def batches_per_epoch(policy: BatchPolicy, n: int) -> int:
    if isinstance(policy, FullBatch):
        return 1
    if isinstance(policy, FixedWithRemainder):
        return -(-n // policy.size)
    if isinstance(policy, FixedDropRemainder):
        return n // policy.size
    if isinstance(policy, RandomSample):
        return policy.steps_per_epoch
    raise TypeError(f"unknown batch policy {policy!r}")


def make_batches(n: int, policy: BatchPolicy, rng: RngStream, shuffle: bool) -> list[np.ndarray]:
    """Index arrays for one epoch.

    With ``shuffle`` the indices are permuted before slicing; it has no
    effect on :class:`FullBatch` or :class:`RandomSample`.
    """
    if n < 1:
        raise ValueError(f"need at least one data point, got n={n}")
    if isinstance(policy, FullBatch):
        return [np.arange(n)]
    if isinstance(policy, RandomSample):
        return [rng.integers(n, policy.size) for _ in range(policy.steps_per_epoch)]
    if not isinstance(policy, (FixedWithRemainder, FixedDropRemainder)):
        raise TypeError(f"unknown batch policy {policy!r}")
    order = rng.permutation(n) if shuffle else np.arange(n)
    b = policy.size
    stop = n if isinstance(policy, FixedWithRemainder) else (n // b) * b
    return [order[i : min(i + b, stop)] for i in range(0, stop, b)]


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    epochs: int
    batch_policy: BatchPolicy = field(default_factory=FullBatch)
    # None means: shuffle for batched policies
    shuffle_each_epoch: bool | None = None
    snapshot_every: int = 1
    seed: int = 0
    record_census: bool = False
    record_size: bool = True
    rho: float = 0.95
    epsilon: float = 1e-7
    lr: float = 1.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.snapshot_every < 1:
            raise ValueError(f"snapshot_every must be >= 1, got {self.snapshot_every}")

    @property
    def shuffle(self) -> bool:
        if self.shuffle_each_epoch is None:
            return not isinstance(self.batch_policy, FullBatch)
        return bool(self.shuffle_each_epoch)

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=int(seed))


@dataclass
class Checkpoint:
    epoch: int
    mse: float
    size: float | None = None
    dead_fractions: tuple[float, ...] | None = None


@dataclass
class TrialRecord:
    checkpoints: list[Checkpoint] = field(default_factory=list)
    diverged: bool = False
    steps: int = 0
    trial: int = 0
    seed: int = 0
    snapshots: dict[int, MlpNetwork] = field(default_factory=dict)

    @property
    def epochs(self) -> list[int]:
        return [c.epoch for c in self.checkpoints]

    def metric(self, name: str) -> np.ndarray:
        return np.array([getattr(c, name) for c in self.checkpoints], dtype=np.float64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrialRecord):
            return NotImplemented
        return (
            self.checkpoints == other.checkpoints
            and self.diverged == other.diverged
            and self.steps == other.steps
            and self.trial == other.trial
            and self.seed == other.seed
            and self.snapshots.keys() == other.snapshots.keys()
            and all(self.snapshots[k] == other.snapshots[k] for k in self.snapshots)
        )


def _checkpoint(net: MlpNetwork, x: np.ndarray, y: np.ndarray, epoch: int, config: TrainConfig):
    trace = forward(net, x)
    out = trace.output
    loss = mse(out, y) if np.all(np.isfinite(out)) else math.nan
    size = float(np.sum(out * out)) if config.record_size else None
    dead = None
    if config.record_census:
        dead = tuple(float(np.mean(np.all(h == 0.0, axis=0))) for h in trace.hidden)
    return Checkpoint(epoch, loss, size, dead)


def train(
    net: MlpNetwork,
    x,
    y,
    config: TrainConfig,
    checkpoint_epochs: Iterable[int] = (),
    keep_snapshots: bool = False,
) -> TrialRecord:
    """Train ``net`` in place with Adadelta and return its checkpoint record.

    Metrics are taken on the full training set at epoch 0, every
    ``config.snapshot_every`` epochs, at any extra ``checkpoint_epochs`` and
    at the final epoch. With ``keep_snapshots`` a copy of the network is
    stored for every checkpoint epoch.

    If the loss or a gradient becomes non-finite, training stops, the record
    keeps the checkpoints gathered so far, and ``diverged`` is set. The
    network is left at its last finite parameters.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
    if x.shape[1] != net.d_in or y.shape[1] != net.d_out:
        raise ValueError(
            f"data shapes x{x.shape}, y{y.shape} do not match network "
            f"{list(net.layer_sizes)}"
        )
    n = x.shape[0]
    extra = {int(e) for e in checkpoint_epochs}
    bad = [e for e in extra if e < 0 or e > config.epochs]
    if bad:
        raise ValueError(f"checkpoint epochs {sorted(bad)} outside [0, {config.epochs}]")
    marks = extra | set(range(0, config.epochs + 1, config.snapshot_every)) | {config.epochs}

    rng = RngStream(config.seed)
    # Adadelta is elementwise, so the update runs on one flat vector; the
    # network's arrays are views into it.
    shapes = [p.shape for p in net.parameters()]
    bounds = np.cumsum([0] + [int(np.prod(sh)) for sh in shapes])
    names = net.parameter_names()

    def unflatten(flat: np.ndarray) -> list[np.ndarray]:
        return [flat[bounds[i] : bounds[i + 1]].reshape(sh) for i, sh in enumerate(shapes)]

    flat = np.concatenate([p.ravel() for p in net.parameters()])
    net.set_parameters(unflatten(flat))
    state = AdadeltaState.zeros_like([flat], rho=config.rho, epsilon=config.epsilon, lr=config.lr)
    shuffle = config.shuffle
    record = TrialRecord(seed=config.seed)

    def mark(epoch: int) -> bool:
        cp = _checkpoint(net, x, y, epoch, config)
        if not math.isfinite(cp.mse):
            return False
        record.checkpoints.append(cp)
        if keep_snapshots:
            record.snapshots[epoch] = clone_network(net)
        return True

    mark(0)
    full = isinstance(config.batch_policy, FullBatch)
    for epoch in range(1, config.epochs + 1):
        batches = [None] if full else make_batches(n, config.batch_policy, rng, shuffle)
        for idx in batches:
            xb, yb = (x, y) if idx is None else (x[idx], y[idx])
            trace = forward(net, xb)
            if not math.isfinite(trace.output.sum()):
                record.diverged = True
                break
            grads = backprop(net, xb, yb, trace=trace).as_list()
            grad_flat = np.concatenate([g.ravel() for g in grads])
            try:
                (new_flat,), state = adadelta_step([flat], [grad_flat], state)
            except NonFiniteGradientError:
                bad = next(nm for nm, g in zip(names, grads) if not np.all(np.isfinite(g)))
                logger.warning("training diverged at epoch %d: non-finite gradient in %s", epoch, bad)
                record.diverged = True
                break
            if not math.isfinite(new_flat.sum()):
                record.diverged = True
                break
            flat = new_flat
            net.set_parameters(unflatten(flat))
            record.steps += 1
        if record.diverged:
            break
        if epoch in marks and not mark(epoch):
            record.diverged = True
            break
    return record


# ---------------------------------------------------------------------------
# trial aggregation


@dataclass
class AggregateRecord:
    """Per-checkpoint mean and standard deviation over the finished trials."""

    epochs: list[int]
    mean: dict[str, np.ndarray]
    std: dict[str, np.ndarray]
    n_used: int
    diverged_trials: list[int]
    records: list[TrialRecord]

    @property
    def n_diverged(self) -> int:
        return len(self.diverged_trials)


_METRICS = ("mse", "size")


def _aggregate(records: list[TrialRecord]) -> AggregateRecord:
    records = sorted(records, key=lambda r: r.trial)
    diverged = [r.trial for r in records if r.diverged]
    good = [r for r in records if not r.diverged]
    if not good:
        return AggregateRecord([], {}, {}, 0, diverged, records)
    epochs = good[0].epochs
    for r in good[1:]:
        if r.epochs != epochs:
            raise ValueError(f"trial {r.trial} has checkpoint epochs differing from trial {good[0].trial}")
    mean, std = {}, {}
    names = [m for m in _METRICS if all(c.__dict__[m] is not None for c in good[0].checkpoints)]
    if good[0].checkpoints and good[0].checkpoints[0].dead_fractions is not None:
        n_layers = len(good[0].checkpoints[0].dead_fractions)
        names += [f"dead_frac_layer_{i + 1}" for i in range(n_layers)]
    for name in names:
        if name.startswith("dead_frac_layer_"):
            layer = int(name.rsplit("_", 1)[1]) - 1
            table = np.array([[c.dead_fractions[layer] for c in r.checkpoints] for r in good])
        else:
            table = np.array([r.metric(name) for r in good])
        mean[name] = table.mean(axis=0)
        std[name] = table.std(axis=0)
    return AggregateRecord(list(epochs), mean, std, len(good), diverged, records)


def run_trials(
    config: TrainConfig,
    n_trials: int,
    trial_runner: Callable[[int, TrainConfig], TrialRecord],
    n_jobs: int = 1,
) -> AggregateRecord:
    """Run ``n_trials`` independent trials and average their checkpoints.

    Trial ``i`` receives ``config`` with ``seed = config.seed + i``. Records
    are reduced in trial-index order, so the result does not depend on the
    order in which trials finish. Diverged trials are excluded from the
    means and listed in ``diverged_trials``.
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    configs = [config.with_seed(config.seed + i) for i in range(n_trials)]
    if n_jobs == 1:
        records = [trial_runner(i, c) for i, c in enumerate(configs)]
    else:
        from joblib import Parallel, delayed

        records = Parallel(n_jobs=n_jobs)(
            delayed(trial_runner)(i, c) for i, c in enumerate(configs)
        )
    for i, r in enumerate(records):
        r.trial = i
    agg = _aggregate(list(records))
    if agg.diverged_trials:
        logger.warning("%d of %d trials diverged: %s", agg.n_diverged, n_trials, agg.diverged_trials)
    return agg


def _fmt(v) -> str:
    return "" if v is None else format(float(v), ".17g")


def write_trials_csv(records: Sequence[TrialRecord], path) -> None:
    """One row per checkpoint: ``trial,epoch,mse,size,dead_frac_layer_<i>...``."""
    n_layers = 0
    for r in records:
        for c in r.checkpoints:
            if c.dead_fractions is not None:
                n_layers = max(n_layers, len(c.dead_fractions))
    header = ["trial", "epoch", "mse", "size"] + [f"dead_frac_layer_{i + 1}" for i in range(n_layers)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in sorted(records, key=lambda r: r.trial):
            for c in r.checkpoints:
                dead = list(c.dead_fractions or ())
                dead += [None] * (n_layers - len(dead))
                w.writerow([r.trial, c.epoch, _fmt(c.mse), _fmt(c.size)] + [_fmt(d) for d in dead])
