"""Train small dense ReLU networks and study them as linear splines."""

from reluspline.core import RngStream, matmul, relu, standard_normal, uniform
from reluspline.network import (
    ForwardTrace,
    MlpNetwork,
    backprop,
    clone_network,
    forward,
    glorot_uniform_init,
    load_network,
    mse,
    save_network,
)
from reluspline.optim import (
    AdadeltaState,
    FixedDropRemainder,
    FixedWithRemainder,
    FullBatch,
    RandomSample,
    TrainConfig,
    TrialRecord,
    adadelta_step,
    make_batches,
    run_trials,
    train,
)
from reluspline.pwl import (
    PwlFunction,
    count_pieces,
    extract_pwl,
    random_linear_spline,
    restrict_to_line,
    sawtooth_dataset,
    spline_plus_noise,
)
from reluspline.analysis import (
    artificial_boost,
    dead_neuron_census,
    ensemble_mean_function,
    noise_decomposition,
    perfect_fit_reference,
    size_metric,
)
from reluspline.estimator import ReluNetRegressor

__version__ = "0.1.0"

__all__ = [
    "AdadeltaState",
    "FixedDropRemainder",
    "FixedWithRemainder",
    "ForwardTrace",
    "FullBatch",
    "MlpNetwork",
    "PwlFunction",
    "RandomSample",
    "ReluNetRegressor",
    "RngStream",
    "TrainConfig",
    "TrialRecord",
    "adadelta_step",
    "artificial_boost",
    "backprop",
    "clone_network",
    "count_pieces",
    "dead_neuron_census",
    "ensemble_mean_function",
    "extract_pwl",
    "forward",
    "glorot_uniform_init",
    "load_network",
    "make_batches",
    "matmul",
    "mse",
    "noise_decomposition",
    "perfect_fit_reference",
    "random_linear_spline",
    "relu",
    "restrict_to_line",
    "run_trials",
    "save_network",
    "sawtooth_dataset",
    "size_metric",
    "spline_plus_noise",
    "standard_normal",
    "train",
    "uniform",
]
