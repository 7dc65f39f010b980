"""scikit-learn compatible wrapper around the network and training loop."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from reluspline.analysis import CensusReport, dead_neuron_census, size_metric
from reluspline.core import RngStream
from reluspline.network import forward, glorot_uniform_init, predict
from reluspline.optim import (
    FixedDropRemainder,
    FixedWithRemainder,
    FullBatch,
    RandomSample,
    TrainConfig,
    train,
)
from reluspline.pwl import PwlFunction, extract_pwl, restrict_to_line

__all__ = ["ReluNetRegressor", "batch_policy_from_params"]


def batch_policy_from_params(batch_size, remainder="keep", steps_per_epoch=None, n_samples=None):
    """Map sklearn-style batching parameters onto a batch policy.

    ``batch_size=None`` (or a batch at least as large as the data) gives
    full-batch training. ``remainder`` is ``"keep"`` (a smaller final batch),
    ``"drop"`` (leftover points skipped) or ``"random"`` (every batch drawn
    with replacement).
    """
    if batch_size is None or (n_samples is not None and batch_size >= n_samples):
        return FullBatch()
    if remainder == "keep":
        return FixedWithRemainder(int(batch_size))
    if remainder == "drop":
        return FixedDropRemainder(int(batch_size))
    if remainder == "random":
        if steps_per_epoch is None:
            if n_samples is None:
                raise ValueError("remainder='random' needs steps_per_epoch or n_samples")
            steps_per_epoch = -(-n_samples // int(batch_size))
        return RandomSample(int(batch_size), int(steps_per_epoch))
    raise ValueError(f"remainder must be 'keep', 'drop' or 'random', got {remainder!r}")


class ReluNetRegressor(RegressorMixin, BaseEstimator):
    """Dense ReLU network with a linear output, trained by Adadelta on MSE.

    Weights are Glorot-uniform, biases start at zero. Training is
    deterministic given ``random_state``, which seeds both the
    initialisation and the batch shuffling.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int, default=(32, 32, 32, 32)
    epochs : int, default=1000
    batch_size : int or None, default=None
        Samples per gradient step; ``None`` trains full-batch.
    remainder : {"keep", "drop", "random"}, default="keep"
        What to do with the points left over after the last full batch.
    steps_per_epoch : int or None, default=None
        Only for ``remainder="random"``; defaults to ``ceil(n / batch_size)``.
    shuffle : bool or None, default=None
        Reshuffle each epoch; ``None`` shuffles whenever batching is used.
    rho, epsilon, lr : float
        Adadelta decay, stabiliser and step multiplier.
    snapshot_every : int, default=100
        Checkpoint cadence (epochs) for ``record_``.
    record_census : bool, default=False
        Store per-layer dead fractions in each checkpoint.
    random_state : int, default=0

    Attributes
    ----------
    net_ : MlpNetwork
    record_ : TrialRecord
    n_features_in_ : int
    """

    def __init__(
        self,
        hidden_layer_sizes=(32, 32, 32, 32),
        epochs=1000,
        batch_size=None,
        remainder="keep",
        steps_per_epoch=None,
        shuffle=None,
        rho=0.95,
        epsilon=1e-7,
        lr=1.0,
        snapshot_every=100,
        record_census=False,
        random_state=0,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.epochs = epochs
        self.batch_size = batch_size
        self.remainder = remainder
        self.steps_per_epoch = steps_per_epoch
        self.shuffle = shuffle
        self.rho = rho
        self.epsilon = epsilon
        self.lr = lr
        self.snapshot_every = snapshot_every
        self.record_census = record_census
        self.random_state = random_state

    def _train_config(self, n_samples: int) -> TrainConfig:
        return TrainConfig(
            epochs=int(self.epochs),
            batch_policy=batch_policy_from_params(
                self.batch_size, self.remainder, self.steps_per_epoch, n_samples
            ),
            shuffle_each_epoch=self.shuffle,
            snapshot_every=int(self.snapshot_every),
            seed=int(self.random_state),
            record_census=bool(self.record_census),
            rho=self.rho,
            epsilon=self.epsilon,
            lr=self.lr,
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, multi_output=True, y_numeric=True)
        self._y_1d = y.ndim == 1
        Y = y.reshape(-1, 1) if y.ndim == 1 else y
        self.n_features_in_ = X.shape[1]
        self.n_outputs_ = Y.shape[1]
        sizes = [X.shape[1], *[int(h) for h in self.hidden_layer_sizes], Y.shape[1]]
        config = self._train_config(X.shape[0])
        self.net_ = glorot_uniform_init(sizes, RngStream(config.seed))
        self.record_ = train(self.net_, X, Y, config)
        if self.record_.diverged:
            raise FloatingPointError(
                f"training diverged after {self.record_.steps} steps; see record_"
            )
        return self

    def _validate_X(self, X) -> np.ndarray:
        check_is_fitted(self, "net_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but {type(self).__name__} "
                f"is expecting {self.n_features_in_} features as input"
            )
        return X

    def predict(self, X):
        X = self._validate_X(X)
        out = predict(self.net_, X)
        return out.reshape(-1) if self._y_1d else out

    def transform(self, X):
        """Activations of the last hidden layer (the learned ReLU features)."""
        X = self._validate_X(X)
        trace = forward(self.net_, X)
        return trace.hidden[-1] if trace.hidden else X

    def census(self, X) -> CensusReport:
        X = self._validate_X(X)
        return dead_neuron_census(self.net_, X)

    def size(self, X) -> float:
        X = self._validate_X(X)
        return size_metric(self.net_, X)

    def to_pwl(self, a: float, b: float, base=None, direction=None) -> PwlFunction:
        """Exact piecewise-linear form on ``[a, b]``, along a line when d_in > 1."""
        check_is_fitted(self, "net_")
        net = self.net_
        if base is not None or direction is not None:
            if base is None:
                base = np.zeros(net.d_in)
            if direction is None:
                raise ValueError("direction is required when restricting to a line")
            net = restrict_to_line(net, base, direction).network
        return extract_pwl(net, a, b)
