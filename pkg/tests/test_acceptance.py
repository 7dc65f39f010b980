"""End-to-end acceptance checks.

Each test records one ``PASS``/``FAIL`` line with the measured numbers, then
asserts at the stated tolerance. The lines are printed in the terminal summary.
"""

import math
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import spearmanr

from reluspline.analysis import noise_decomposition
from reluspline.core import RngStream
from reluspline.harness import run_experiment, shipped_config
from reluspline.network import backprop, glorot_uniform_init, predict
from reluspline.optim import (
    AdadeltaState,
    FixedDropRemainder,
    FixedWithRemainder,
    FullBatch,
    TrainConfig,
    adadelta_step,
    make_batches,
    train,
)
from reluspline.pwl import count_pieces, extract_pwl, random_linear_spline, spline_plus_noise

from conftest import ACCEPTANCE_LINES, random_net
from oracles import finite_difference_check, slope_change_count

pytestmark = pytest.mark.acceptance


def report(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, detail


def csv_bytes(out_dir):
    return {p.name: p.read_bytes() for p in sorted(Path(out_dir).rglob("*.csv"))}


@pytest.fixture(scope="module")
def degenerate_runs(tmp_path_factory):
    cfg = shipped_config("degenerate-paper")
    a = run_experiment(cfg, tmp_path_factory.mktemp("degenerate_a"))
    b = run_experiment(cfg, tmp_path_factory.mktemp("degenerate_b"))
    return a, b


@pytest.fixture(scope="module")
def linearity_runs(tmp_path_factory):
    cfg = shipped_config("linearity-desk")
    a = run_experiment(cfg, tmp_path_factory.mktemp("linearity_a"))
    b = run_experiment(cfg, tmp_path_factory.mktemp("linearity_b"))
    return a, b


def test_criterion_01_dead_neurons(degenerate_runs):
    frac = degenerate_runs[0].summary["dead_fraction"]
    pct = {k: 100 * v for k, v in frac.items()}
    targets = {3: (5, 5), 10: (20, 10), 20: (30, 10)}
    within = all(abs(pct[k] - t) <= tol for k, (t, tol) in targets.items())
    ordered = pct[3] <= pct[10] <= pct[20]
    detail = "dead % at layers 3/10/20 = {:.1f}/{:.1f}/{:.1f} (targets 5±5/20±10/30±10), nondecreasing={}".format(
        pct[3], pct[10], pct[20], ordered
    )
    report(1, within and ordered, detail)


def test_criterion_02_gradients():
    worst, checked, skipped = 0.0, 0, 0
    for sizes in ([1, 8, 1], [1, 32, 32, 1], [3, 16, 16, 16, 2]):
        for seed in range(10):
            rng = RngStream(seed)
            net = glorot_uniform_init(sizes, rng)
            # nonzero biases so kinks fall inside the data
            for b in net.biases:
                b[...] = rng.standard_normal(1, b.size).reshape(-1) * 0.3
            x = rng.standard_normal(12, sizes[0])
            y = rng.standard_normal(12, sizes[-1])
            err, c, s = finite_difference_check(net, x, y, backprop(net, x, y))
            worst, checked, skipped = max(worst, err), checked + c, skipped + s
    report(2, worst < 1e-6, f"max relative error {worst:.2e} over {checked} parameters ({skipped} on a kink skipped)")


def _criterion3_net(i):
    g = np.random.default_rng(1000 + i)
    depth = int(g.integers(1, 5))
    width = int(g.integers(4, 65))
    sizes = [1] + [width] * depth + [1]
    if i % 2:
        return random_net(sizes, 1000 + i)
    rng = RngStream(1000 + i)
    net = glorot_uniform_init(sizes, rng)
    steps = int(g.integers(0, 501))
    if steps:
        spline = random_linear_spline(6, (-1.0, 1.0), rng)
        x, _, _, y = spline_plus_noise(spline, 32, 0.2, rng)
        train(net, x, y, TrainConfig(epochs=steps, snapshot_every=steps, record_size=False))
    return net


def test_criterion_03_extraction_oracle():
    worst, compared, mismatches = 0.0, 0, []
    a, b = -1.5, 1.5
    t = np.linspace(a, b, 10001)
    for i in range(200):
        net = _criterion3_net(i)
        f = extract_pwl(net, a, b)
        direct = predict(net, t.reshape(-1, 1)).reshape(-1)
        scale = max(float(np.max(np.abs(direct))), 1e-300)
        worst = max(worst, float(np.max(np.abs(f(t) - direct))) / scale)
        gap = float(np.min(np.diff(f.breakpoints)))
        if gap > 1e-6:
            fn = lambda s, net=net: predict(net, np.asarray(s, dtype=float).reshape(-1, 1)).reshape(-1)
            expected = slope_change_count(fn, a, b, gap / 100)
            compared += 1
            if count_pieces(f) != expected:
                mismatches.append((i, count_pieces(f), expected))
    ok = worst < 1e-9 and not mismatches
    report(3, ok, f"max relative deviation {worst:.2e}; piece counts compared on {compared} nets, mismatches {mismatches}")


def test_criterion_04_zero_bias_law():
    g = np.random.default_rng(4)
    worst = 0
    for i in range(100):
        depth = int(g.integers(1, 7))
        width = int(g.integers(4, 129))
        net = glorot_uniform_init([1] + [width] * depth + [1], RngStream(4000 + i))
        worst = max(worst, count_pieces(extract_pwl(net, -10.0, 10.0)))
    report(4, worst <= 2, f"max pieces over 100 zero-bias nets = {worst}")


def test_criterion_05_simplicity_bound():
    lines, ok = [], True
    for depth in (2, 3, 4):
        for width in (16, 32):
            within, most = 0, 0
            for trial in range(100):
                rng = RngStream(50_000 + 1000 * depth + 10 * width + trial)
                spline = random_linear_spline(8, (-1.0, 1.0), rng)
                x, _, _, y = spline_plus_noise(spline, 64, 0.3, rng)
                net = glorot_uniform_init([1] + [width] * depth + [1], rng)
                train(net, x, y, TrainConfig(epochs=100, snapshot_every=100))
                pieces = count_pieces(extract_pwl(net, -1.0, 1.0))
                within += pieces <= 10 * width * depth
                most = max(most, pieces)
            ok &= within >= 95
            lines.append(f"K={depth} N={width}: {within}/100 within, max {most}")
    report(5, ok, "; ".join(lines))


def test_criterion_06_undertraining(tmp_path):
    res = run_experiment(shipped_config("size-heatmap-desk"), tmp_path)
    perfect = res.summary["perfect_fit"]
    below, rhos = True, []
    for depth, grid in res.summary["grids"].items():
        for row, n in enumerate(grid["sizes"]):
            sizes = np.asarray(grid["size"][row])
            if n >= 100:
                below &= bool(np.all(sizes < perfect[n]))
            rhos.append(spearmanr(grid["epochs"], sizes).statistic)
    ok = below and min(rhos) > 0.8
    report(6, ok, f"size < sum(y^2) for n>=100: {below}; min per-row Spearman {min(rhos):.3f}")


def test_criterion_07_batching():
    rng = RngStream(0)
    keep = [len(b) for b in make_batches(1030, FixedWithRemainder(256), rng, shuffle=True)]
    drop = len(make_batches(1030, FixedDropRemainder(256), rng, shuffle=True))
    cfg = shipped_config("size-heatmap-batched-paper")
    small = cfg.batch_policy(1023)
    ok = keep == [256, 256, 256, 256, 6] and drop == 4 and small == FullBatch() and cfg.batch_policy(1024) == FixedWithRemainder(256)
    report(7, ok, f"remainder kept {keep}; dropped -> {drop} batches; n=1023 uses {small.describe()}")


def test_criterion_08_linearity(linearity_runs):
    s = linearity_runs[0].summary
    pure, diff = np.array(s["mse_pure"]), np.array(s["mse_diff"])
    decreasing = pure[-1] < pure[0] and diff[-1] < diff[0]
    ratios = pure[-3:] / diff[-3:]
    in_band = bool(np.all((ratios >= 0.5) & (ratios <= 2.0)))
    detail = "first->last pure {:.4g}->{:.4g}, diff {:.4g}->{:.4g}; final ratios {}".format(
        pure[0], pure[-1], diff[0], diff[-1], np.array2string(ratios, precision=3)
    )
    report(8, decreasing and in_band, detail)


def test_criterion_09_decomposition_sanity():
    rng = RngStream(9)
    spline = random_linear_spline(4, (-1.0, 1.0), rng)
    data = spline_plus_noise(spline, 8, 0.3, rng)
    cfg = TrainConfig(epochs=20000, snapshot_every=20000, seed=9, record_size=False)
    res = noise_decomposition(data, [1, 64, 64, 1], cfg, 3, [20000])
    value = float(res.mse_diff[-1])
    report(9, value < 1e-3, f"MSE(diff, N) = {value:.3e} after 20000 epochs on 8 points")


def test_criterion_10_determinism(degenerate_runs, linearity_runs):
    same = []
    for a, b in (degenerate_runs, linearity_runs):
        ba, bb = csv_bytes(a.out_dir), csv_bytes(b.out_dir)
        same.append(bool(ba) and ba == bb)
    report(10, all(same), f"byte-identical CSVs: degenerate={same[0]}, linearity={same[1]}")


def test_criterion_11_adadelta():
    state = AdadeltaState.zeros_like([np.zeros(1)])
    (p,), _ = adadelta_step([np.zeros(1)], [np.ones(1)], state)
    step = abs(float(p[0]))
    hand = math.sqrt(1e-7) / math.sqrt(0.05 + 1e-7)
    first_ok = abs(step - hand) / hand < 1e-8 and abs(step - 1.41421e-3) / 1.41421e-3 < 1e-5

    q = [np.array([0.0])]
    state = AdadeltaState.zeros_like(q)
    losses = [float((q[0][0] - 3.0) ** 2)]
    for _ in range(100):
        q, state = adadelta_step(q, [2 * (q[0] - 3.0)], state)
        losses.append(float((q[0][0] - 3.0) ** 2))
    monotone = all(b < a for a, b in zip(losses, losses[1:]))
    report(11, first_ok and monotone, f"first step {step:.10e} (hand {hand:.10e}); 100-step loss strictly decreasing={monotone}")
