"""Runners for the five experiments.

Every runner is a pure function of its config: trial ``i`` is seeded with
``base_seed + i`` and all outputs are written with 17 significant digits, so a
rerun reproduces the CSV files byte for byte.

Seeding per experiment:

* degenerate, size-heatmap(-batched): one stream per trial draws the inputs,
  then the targets, then the network weights.
* stuck: the sawtooth is deterministic; the stream only initialises weights.
* linearity: the spline and noise come from ``RngStream(base_seed + DATA_SEED_OFFSET)``;
  trial streams initialise weights.
"""

from __future__ import annotations

import csv
import logging
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from reluspline.analysis import (
    CensusReport,
    artificial_boost,
    dead_neuron_census,
    noise_decomposition,
    perfect_fit_reference,
)
from reluspline.core import RngStream, standard_normal
from reluspline.harness.config import ExperimentConfig, dump_config
from reluspline.harness.heatmap import HeatmapGrid, render_heatmap
from reluspline.network import glorot_uniform_init, predict
from reluspline.optim import TrainConfig, TrialRecord, run_trials, train, write_trials_csv
from reluspline.pwl import (
    count_pieces,
    extract_pwl,
    random_linear_spline,
    sawtooth_dataset,
    spline_plus_noise,
)

__all__ = ["EXPERIMENTS", "ExperimentResult", "gaussian_trial_data", "run_experiment"]

logger = logging.getLogger(__name__)

DATA_SEED_OFFSET = 2**32


def _fmt(v) -> str:
    return format(float(v), ".17g")


@dataclass
class ExperimentResult:
    out_dir: Path
    files: list[Path] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def add(self, path) -> Path:
        path = Path(path)
        self.files.append(path)
        return path


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def gaussian_trial_data(seed: int, n: int, d_in: int, d_out: int, rng: RngStream | None = None):
    """Standard-normal inputs and targets for one trial."""
    rng = RngStream(seed) if rng is None else rng
    x = standard_normal(rng, n, d_in)
    y = standard_normal(rng, n, d_out)
    return x, y


# ---------------------------------------------------------------------------


def _run_degenerate(cfg: ExperimentConfig, res: ExperimentResult, n_jobs: int) -> None:
    sizes = cfg.layer_sizes()
    n = cfg.data["n_points"]
    reports: list[CensusReport] = []
    records: list[TrialRecord] = []
    diverged = []
    for i in range(cfg.n_trials):
        seed = cfg.base_seed + i
        rng = RngStream(seed)
        x, y = gaussian_trial_data(seed, n, sizes[0], sizes[-1], rng)
        net = glorot_uniform_init(sizes, rng)
        rec = train(net, x, y, cfg.train_config(n, seed=seed, record_census=True))
        rec.trial = i
        records.append(rec)
        if rec.diverged:
            diverged.append(i)
            continue
        reports.append(dead_neuron_census(net, x))
    if not reports:
        raise RuntimeError("every degenerate trial diverged")
    mean = CensusReport.mean(reports)
    mean.to_csv(res.add(res.out_dir / "census.csv"))
    rows = []
    for i, rep in zip([r.trial for r in records if not r.diverged], reports):
        rows.extend([i, c.layer, c.neurons, int(c.dead), _fmt(c.frac)] for c in rep.layers)
    _write_rows(res.add(res.out_dir / "census_trials.csv"), ["trial", "layer", "neurons", "dead", "frac"], rows)
    write_trials_csv(records, res.add(res.out_dir / "trials.csv"))
    res.summary["dead_fraction"] = {l: mean.layer(l).frac for l in cfg["census"]["layers"]}
    res.summary["diverged_trials"] = diverged


def _size_trial_runner(n: int, sizes: list[int]) -> Callable[[int, TrainConfig], TrialRecord]:
    def runner(i: int, tc: TrainConfig) -> TrialRecord:
        rng = RngStream(tc.seed)
        x, y = gaussian_trial_data(tc.seed, n, sizes[0], sizes[-1], rng)
        net = glorot_uniform_init(sizes, rng)
        return train(net, x, y, tc)

    return runner


def _run_size_heatmap(cfg: ExperimentConfig, res: ExperimentResult, n_jobs: int) -> None:
    net_cfg = cfg.network
    data_sizes = sorted(cfg.data["sizes"])
    trials_dir = res.out_dir / "trials"
    trials_dir.mkdir(exist_ok=True)

    ref_rows = []
    ref_mean = {}
    for n in data_sizes:
        refs = []
        for i in range(cfg.n_trials):
            _, y = gaussian_trial_data(cfg.base_seed + i, n, net_cfg["inputs"], net_cfg["outputs"])
            refs.append(perfect_fit_reference(y))
            ref_rows.append([n, i, _fmt(refs[-1])])
        ref_mean[n] = float(np.mean(refs))
    _write_rows(res.add(res.out_dir / "perfect_fit.csv"), ["n", "trial", "sum_y2"], ref_rows)

    policies = {}
    summary = {}
    for depth in net_cfg["depths"]:
        sizes = cfg.layer_sizes(depth)
        mse_rows, size_rows, epochs = [], [], None
        for n in data_sizes:
            tc = cfg.train_config(n, seed=cfg.base_seed)
            policies[n] = tc.batch_policy.describe()
            agg = run_trials(tc, cfg.n_trials, _size_trial_runner(n, sizes), n_jobs=n_jobs)
            write_trials_csv(agg.records, res.add(trials_dir / f"depth{depth}_n{n}.csv"))
            if agg.n_used == 0:
                raise RuntimeError(f"every trial diverged for depth {depth}, n={n}")
            if epochs is None:
                epochs = agg.epochs
            mse_rows.append(agg.mean["mse"])
            size_rows.append(agg.mean["size"])
        for metric, rows in (("mse", mse_rows), ("size", size_rows)):
            grid = HeatmapGrid(data_sizes, epochs, np.array(rows), metric=f"{metric} depth {depth}")
            stem = f"heatmap_{metric}_depth{depth}"
            grid.to_csv(res.add(res.out_dir / f"{stem}.csv"))
            render_heatmap(grid, res.add(res.out_dir / f"{stem}.svg"))
        summary[depth] = {
            "epochs": epochs,
            "sizes": data_sizes,
            "mse": np.array(mse_rows),
            "size": np.array(size_rows),
        }
    res.summary["grids"] = summary
    res.summary["perfect_fit"] = ref_mean
    res.summary["batch_policy"] = policies


def _run_stuck(cfg: ExperimentConfig, res: ExperimentResult, n_jobs: int) -> None:
    d = cfg.data
    a, b = d["domain"]
    x, y = sawtooth_dataset(d["n_points"], d["n_teeth"], (a, b))
    sizes = cfg.layer_sizes()
    checkpoints = sorted(set(cfg["checkpoints"]))
    grid = np.linspace(a, b, cfg["grid_points"])
    _write_rows(res.add(res.out_dir / "target.csv"), ["x", "y"], [[_fmt(u), _fmt(v)] for u, v in zip(x[:, 0], y[:, 0])])
    pwl_dir = res.out_dir / "pwl"
    pwl_dir.mkdir(exist_ok=True)

    fn_rows, piece_rows, records = [], [], []
    pieces = {}
    for i in range(cfg.n_trials):
        seed = cfg.base_seed + i
        net = glorot_uniform_init(sizes, RngStream(seed))
        rec = train(net, x, y, cfg.train_config(len(x), seed=seed), checkpoint_epochs=checkpoints, keep_snapshots=True)
        rec.trial = i
        records.append(rec)
        by_epoch = {c.epoch: c for c in rec.checkpoints}
        for e in checkpoints:
            if e not in rec.snapshots:
                continue
            snap = rec.snapshots[e]
            out = predict(snap, grid.reshape(-1, 1)).reshape(-1)
            fn_rows.extend([i, e, _fmt(u), _fmt(v)] for u, v in zip(grid, out))
            pwl = extract_pwl(snap, a, b)
            pwl.to_csv(res.add(pwl_dir / f"trial{i}_epoch{e}.csv"))
            k = count_pieces(pwl)
            pieces[(i, e)] = k
            piece_rows.append([i, e, k, _fmt(by_epoch[e].mse)])
        rec.snapshots.clear()
    _write_rows(res.add(res.out_dir / "functions.csv"), ["trial", "epoch", "x", "y"], fn_rows)
    _write_rows(res.add(res.out_dir / "pieces.csv"), ["trial", "epoch", "pieces", "mse"], piece_rows)
    write_trials_csv(records, res.add(res.out_dir / "trials.csv"))
    res.summary["pieces"] = pieces
    res.summary["diverged_trials"] = [r.trial for r in records if r.diverged]


def _curve_epochs(epochs: int, count: int) -> list[int]:
    if count <= 0:
        return []
    return sorted({max(1, int(round(epochs * (k + 1) / count))) for k in range(count)})


def _run_linearity(cfg: ExperimentConfig, res: ExperimentResult, n_jobs: int) -> None:
    d = cfg.data
    domain = tuple(d["domain"])
    data_rng = RngStream(cfg.base_seed + DATA_SEED_OFFSET)
    spline = random_linear_spline(d["n_knots"], domain, data_rng)
    sigma = d["noise_sigma"]
    if sigma is None:
        clean = spline(np.linspace(domain[0], domain[1], d["n_points"]))
        sigma = d["noise_ratio"] * float(np.std(clean))
    data = spline_plus_noise(spline, d["n_points"], sigma, data_rng)

    epochs_total = cfg.train["epochs"]
    checkpoints = sorted(set(cfg["checkpoints"]))
    curve = _curve_epochs(epochs_total, cfg["curve_points"])
    all_epochs = sorted(set(checkpoints) | set(curve))
    grid = np.linspace(domain[0], domain[1], cfg["grid_points"])
    tc = cfg.train_config(d["n_points"], seed=cfg.base_seed)
    sizes = cfg.layer_sizes()
    dec = noise_decomposition(data, sizes, tc, cfg.n_trials, all_epochs, grid=grid)

    spline.to_csv(res.add(res.out_dir / "spline.csv"))
    _write_rows(
        res.add(res.out_dir / "data.csv"),
        ["x", "y_clean", "noise", "y_noisy"],
        [[_fmt(v) for v in row] for row in np.hstack([data.x, data.y_clean, data.noise, data.y_noisy])],
    )
    idx = {e: k for k, e in enumerate(dec.epochs)}
    _write_rows(
        res.add(res.out_dir / "decomposition.csv"),
        ["checkpoint", "mse_pure", "mse_diff"],
        [[e, _fmt(dec.mse_pure[idx[e]]), _fmt(dec.mse_diff[idx[e]])] for e in checkpoints],
    )
    if curve:
        _write_rows(
            res.add(res.out_dir / "mse_curve.csv"),
            ["epoch", "mse_pure", "mse_diff"],
            [[e, _fmt(dec.mse_pure[idx[e]]), _fmt(dec.mse_diff[idx[e]])] for e in curve],
        )
    for e in checkpoints:
        dec.functions_to_csv(e, res.add(res.out_dir / f"functions_epoch{e}.csv"))
    res.summary.update(
        checkpoints=checkpoints,
        mse_pure=[float(dec.mse_pure[idx[e]]) for e in checkpoints],
        mse_diff=[float(dec.mse_diff[idx[e]]) for e in checkpoints],
        noise_sigma=sigma,
        diverged_trials=dec.diverged_trials,
    )

    boost = cfg["boost"]
    if boost["enabled"]:
        if boost["carrier"] == "signal":
            carrier = spline
        else:
            carrier = random_linear_spline(boost["carrier_knots"], domain, data_rng)
        final = idx[epochs_total] if epochs_total in idx else len(dec.epochs) - 1
        rows = []
        for row, k in enumerate(dec.trials):
            out = artificial_boost((data.x, data.noise), carrier, sizes, tc.with_seed(tc.seed + k), grid=grid)
            rows.append([k, _fmt(out.mse), _fmt(dec.pure_per_trial[final, row])])
        _write_rows(res.add(res.out_dir / "boost.csv"), ["trial", "mse_boost", "mse_pure"], rows)
        res.summary["boost"] = [(float(r[1]), float(r[2])) for r in rows]


EXPERIMENTS: dict[str, Callable] = {
    "degenerate": _run_degenerate,
    "size-heatmap": _run_size_heatmap,
    "size-heatmap-batched": _run_size_heatmap,
    "stuck": _run_stuck,
    "linearity": _run_linearity,
}


def _write_manifest(cfg: ExperimentConfig, res: ExperimentResult) -> None:
    from reluspline import __version__

    (res.out_dir / "config.yaml").write_text(dump_config(cfg), encoding="utf-8")
    lines = [
        f"experiment={cfg.name}",
        f"tier={cfg.tier}",
        f"base_seed={cfg.base_seed}",
        f"n_trials={cfg.n_trials}",
        "config_file=config.yaml",
        f"reluspline_version={__version__}",
        f"numpy_version={np.__version__}",
        f"python_version={platform.python_version()}",
        "rng=numpy PCG64; gaussians by Box-Muller",
    ]
    for f in res.files:
        lines.append(f"output={f.relative_to(res.out_dir).as_posix()}")
    (res.out_dir / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_experiment(config: ExperimentConfig, out_dir=None, n_jobs: int = 1) -> ExperimentResult:
    """Run one experiment and write its CSVs, SVGs, config echo and manifest."""
    if config.name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {config.name!r}; choose from {', '.join(EXPERIMENTS)}")
    out = Path(out_dir if out_dir is not None else config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from None
    res = ExperimentResult(out)
    logger.info("running %s (%s tier, %d trials) into %s", config.name, config.tier, config.n_trials, out)
    EXPERIMENTS[config.name](config, res, n_jobs)
    _write_manifest(config, res)
    return res
