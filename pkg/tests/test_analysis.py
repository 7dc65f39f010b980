import numpy as np
import pytest

from reluspline.analysis import (
    CensusReport,
    artificial_boost,
    dead_neuron_census,
    ensemble_mean_function,
    noise_decomposition,
    perfect_fit_reference,
    size_metric,
)
from reluspline.core import RngStream, standard_normal
from reluspline.network import MlpNetwork, glorot_uniform_init, mse, predict
from reluspline.optim import TrainConfig, train
from reluspline.pwl import PwlFunction, SplineNoiseData, random_linear_spline, spline_plus_noise

from conftest import naive_forward, random_net


def two_unit_net():
    # unit 1 is relu(x), unit 2 is relu(-x - 10): dead for |x| < 10
    return MlpNetwork(
        [1, 2, 1],
        [np.array([[1.0], [-1.0]]), np.array([[1.0, 1.0]])],
        [np.array([0.0, -10.0]), np.zeros(1)],
    )


class TestCensus:
    def test_hand_example(self):
        rep = dead_neuron_census(two_unit_net(), np.array([[-1.0], [2.0]]))
        assert rep.layer(1).dead == 1
        assert rep.layer(1).frac == 0.5

    def test_unit_alive_on_one_sample(self):
        rep = dead_neuron_census(two_unit_net(), np.array([[-1.0], [-3.0]]))
        assert rep.layer(1).dead == 2
        # x = -30 wakes the second unit only
        rep = dead_neuron_census(two_unit_net(), np.array([[-1.0], [-30.0]]))
        assert rep.layer(1).dead == 1
        rep = dead_neuron_census(two_unit_net(), np.array([[2.0], [-30.0]]))
        assert rep.layer(1).dead == 0

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_loop_oracle(self, seed):
        net = random_net([3, 7, 5, 6, 1], seed)
        x = standard_normal(RngStream(seed), 20, 3)
        _, pre = naive_forward(net, x)
        rep = dead_neuron_census(net, x)
        for i, z in enumerate(pre):
            dead = sum(all(z[r][j] <= 0.0 for r in range(len(z))) for j in range(len(z[0])))
            assert rep.layer(i + 1).dead == dead

    def test_adding_samples_never_increases_dead(self):
        net = random_net([2, 16, 16, 16, 1], 3, bias_scale=2.0)
        x = standard_normal(RngStream(0), 200, 2)
        prev = None
        for n in (5, 20, 80, 200):
            d = dead_neuron_census(net, x[:n]).fractions
            if prev is not None:
                assert np.all(d <= prev)
            prev = d

    def test_mean_and_csv(self, tmp_path):
        a = dead_neuron_census(two_unit_net(), np.array([[-1.0], [2.0]]))
        b = dead_neuron_census(two_unit_net(), np.array([[2.0], [-30.0]]))
        m = CensusReport.mean([a, b])
        assert m.layer(1).frac == 0.25
        m.to_csv(tmp_path / "c.csv")
        assert (tmp_path / "c.csv").read_text().splitlines() == ["layer,neurons,dead,frac", "1,2,0.5,0.25"]

    def test_empty_data(self):
        with pytest.raises(ValueError):
            dead_neuron_census(two_unit_net(), np.empty((0, 1)))


class TestSize:
    def test_hand_example(self):
        net = MlpNetwork([1, 1, 1], [np.array([[1.0]]), np.array([[2.0]])], [np.zeros(1), np.zeros(1)])
        # outputs 2, 4, 0
        assert size_metric(net, np.array([[1.0], [2.0], [-5.0]])) == 20.0

    def test_sum_over_outputs(self):
        net = random_net([2, 5, 3], 1)
        x = standard_normal(RngStream(1), 10, 2)
        assert size_metric(net, x) == pytest.approx(np.sum(naive_forward(net, x)[0] ** 2), rel=1e-12)

    def test_perfect_fit(self):
        assert perfect_fit_reference([[1.0], [-2.0], [3.0]]) == 14.0
        assert perfect_fit_reference(np.zeros((4, 2))) == 0.0
        with pytest.raises(ValueError):
            perfect_fit_reference([])

    def test_perfect_fit_gaussian_targets(self):
        # chi-squared with 2500 degrees of freedom: mean 2500, sd sqrt(5000)
        y = standard_normal(RngStream(7), 2500, 1)
        assert abs(perfect_fit_reference(y) - 2500) < 3 * np.sqrt(5000)

    def test_size_of_net_equals_perfect_fit_of_its_outputs(self):
        net = random_net([2, 8, 1], 2)
        x = standard_normal(RngStream(2), 30, 2)
        assert size_metric(net, x) == perfect_fit_reference(predict(net, x))


class TestEnsembleMean:
    def test_opposite_nets_cancel(self):
        net = random_net([1, 6, 1], 0)
        neg = MlpNetwork(net.layer_sizes, [w.copy() for w in net.weights], [b.copy() for b in net.biases])
        neg.weights[-1] *= -1
        neg.biases[-1] *= -1
        grid = np.linspace(-1, 1, 33)
        np.testing.assert_allclose(ensemble_mean_function([net, neg], grid), 0.0, atol=1e-15)

    def test_permutation_invariant(self):
        nets = [random_net([1, 6, 1], s) for s in range(5)]
        grid = np.linspace(-1, 1, 17)
        a = ensemble_mean_function(nets, grid)
        b = ensemble_mean_function(nets[::-1], grid)
        np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-15)

    def test_errors(self):
        with pytest.raises(ValueError):
            ensemble_mean_function([], [0.0])
        with pytest.raises(ValueError):
            ensemble_mean_function([random_net([2, 3, 1], 0)], [0.0])


def small_data(seed=0, sigma=0.3):
    rng = RngStream(seed)
    spline = random_linear_spline(5, (-1.0, 1.0), rng)
    return spline_plus_noise(spline, 16, sigma, rng)


class TestDecomposition:
    def test_zero_noise_single_trial(self):
        data = small_data(sigma=0.0)
        res = noise_decomposition(data, [1, 8, 8, 1], TrainConfig(epochs=30, seed=3), 1, [0, 10, 30])
        assert res.epochs == [0, 10, 30]
        assert np.all(res.mse_diff == 0.0)

    def test_checkpoint_zero_matches_init(self):
        data = small_data(1)
        cfg = TrainConfig(epochs=5, seed=11)
        res = noise_decomposition(data, [1, 8, 1], cfg, 3, [0, 5])
        pure, diff = [], []
        inits = [glorot_uniform_init([1, 8, 1], RngStream(11 + k)) for k in range(3)]
        mean_init = np.mean([predict(n, data.x) for n in inits], axis=0)
        for n in inits:
            pure.append(mse(predict(n, data.x), data.noise))
            diff.append(mse(predict(n, data.x) - mean_init, data.noise))
        assert res.mse_pure[0] == pytest.approx(np.mean(pure), rel=1e-12)
        assert res.mse_diff[0] == pytest.approx(np.mean(diff), rel=1e-12)
        assert res.pure_per_trial.shape == (2, 3)

    def test_pure_run_matches_direct_training(self):
        data = small_data(2)
        cfg = TrainConfig(epochs=12, seed=4)
        res = noise_decomposition(data, [1, 6, 6, 1], cfg, 2, [12])
        for k in range(2):
            net = glorot_uniform_init([1, 6, 6, 1], RngStream(4 + k))
            train(net, data.x, data.noise, cfg.with_seed(4 + k))
            assert res.pure_per_trial[0, k] == mse(predict(net, data.x), data.noise)

    def test_csv_outputs(self, tmp_path):
        res = noise_decomposition(small_data(), [1, 4, 1], TrainConfig(epochs=4), 2, [0, 4], grid=np.linspace(-1, 1, 5))
        res.to_csv(tmp_path / "d.csv")
        lines = (tmp_path / "d.csv").read_text().splitlines()
        assert lines[0] == "checkpoint,mse_pure,mse_diff" and len(lines) == 3
        res.functions_to_csv(4, tmp_path / "f.csv")
        lines = (tmp_path / "f.csv").read_text().splitlines()
        assert lines[0] == "trial,x,f_noisy,f_clean_mean,f_noise,diff" and len(lines) == 1 + 2 * 5

    def test_errors(self):
        data = small_data()
        cfg = TrainConfig(epochs=4)
        with pytest.raises(ValueError):
            noise_decomposition(data, [1, 4, 1], cfg, 1, [5])
        with pytest.raises(ValueError):
            noise_decomposition(data, [1, 4, 1], cfg, 1, [3, 1])
        with pytest.raises(ValueError):
            noise_decomposition(data, [2, 4, 1], cfg, 1, [1])
        with pytest.raises(ValueError):
            noise_decomposition(data, [1, 4, 1], cfg, 0, [1])


class TestBoost:
    def test_none_carrier_is_plain_training(self):
        data = small_data(3)
        cfg = TrainConfig(epochs=25, seed=8)
        res = artificial_boost(data, None, [1, 8, 1], cfg)
        net = glorot_uniform_init([1, 8, 1], RngStream(8))
        train(net, data.x, data.noise, cfg)
        assert res.mse == mse(predict(net, data.x), data.noise)
        np.testing.assert_array_equal(res.fit, res.trained)

    def test_fit_plus_carrier_is_trained(self):
        data = small_data(4)
        carrier = PwlFunction([-1.0, 0.0, 1.0], [2.0, -1.0, 3.0])
        res = artificial_boost(data, carrier, [1, 8, 8, 1], TrainConfig(epochs=20))
        scale = np.max(np.abs(res.trained))
        np.testing.assert_allclose(res.fit + res.carrier, res.trained, rtol=0, atol=4 * np.finfo(float).eps * scale)
        np.testing.assert_allclose(res.carrier, carrier(res.grid))

    def test_accepts_pair(self):
        data = small_data(5)
        a = artificial_boost((data.x, data.noise), None, [1, 4, 1], TrainConfig(epochs=3))
        b = artificial_boost(data, None, [1, 4, 1], TrainConfig(epochs=3))
        assert a.mse == b.mse
