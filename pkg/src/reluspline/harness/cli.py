"""Command-line interface (``reluspline ...``)."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from reluspline.analysis import dead_neuron_census, size_metric
from reluspline.core import RngStream, standard_normal
from reluspline.harness.config import (
    EXPERIMENT_NAMES,
    ConfigError,
    load_config,
    shipped_config,
    shipped_config_names,
)
from reluspline.harness.experiments import run_experiment
from reluspline.harness.heatmap import HeatmapGrid, render_heatmap
from reluspline.estimator import batch_policy_from_params
from reluspline.network import glorot_uniform_init, load_network, save_network
from reluspline.optim import TrainConfig, train, write_trials_csv
from reluspline.pwl import (
    count_pieces,
    extract_pwl,
    random_linear_spline,
    restrict_to_line,
    sawtooth_dataset,
    spline_plus_noise,
)

__all__ = ["build_parser", "cli", "main"]


class CliError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="reluspline",
        description="Train dense ReLU networks and analyse them as linear splines.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    exp = sub.add_parser("experiment", help="run one of the bundled experiments")
    exp_sub = exp.add_subparsers(dest="exp_command", metavar="ACTION")
    exp_sub.required = True
    run = exp_sub.add_parser("run", help="run an experiment and write its outputs")
    run.add_argument("name", choices=EXPERIMENT_NAMES)
    run.add_argument("--config", type=Path, help="YAML config file (default: the shipped config for --tier)")
    run.add_argument("--tier", choices=("desk", "paper"), default="desk", help="shipped config tier (default: desk)")
    run.add_argument("--trials", type=int, help="override n_trials")
    run.add_argument("--seed", type=int, help="override base_seed")
    run.add_argument("--out", type=Path, help="output directory")
    run.add_argument("--jobs", type=int, default=1, help="parallel trial workers (default: 1)")
    exp_sub.add_parser("list", help="list the shipped configs")
    show = exp_sub.add_parser("show", help="print a shipped config")
    show.add_argument("config_name")

    tr = sub.add_parser("train", help="train a single network")
    tr.add_argument("--layers", type=_ints, default=[1, 32, 32, 32, 32, 1], help="layer sizes, e.g. 1,32,32,1")
    tr.add_argument("--data", choices=("gaussian", "sawtooth", "spline"), default="gaussian")
    tr.add_argument("--n-points", type=int, default=64)
    tr.add_argument("--epochs", type=int, default=1000)
    tr.add_argument("--batch-size", type=int, help="samples per step (default: full batch)")
    tr.add_argument("--remainder", choices=("keep", "drop", "random"), default="keep")
    tr.add_argument("--snapshot-every", type=int, default=100)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--teeth", type=int, default=16, help="sawtooth teeth")
    tr.add_argument("--knots", type=int, default=8, help="spline knots")
    tr.add_argument("--sigma", type=float, default=0.3, help="spline noise standard deviation")
    tr.add_argument("--save-net", type=Path, help="write the trained network here")
    tr.add_argument("--record", type=Path, help="write the checkpoint CSV here")

    for name, helptext in (("census", "dead-unit census of a saved network"), ("size", "sum of squared outputs")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--net", type=Path, required=True)
        src = c.add_mutually_exclusive_group()
        src.add_argument("--inputs", type=Path, help="CSV of input rows")
        src.add_argument("--n-points", type=int, default=1000, help="draw this many Gaussian inputs")
        c.add_argument("--seed", type=int, default=0)
        c.add_argument("--out", type=Path, help="write CSV here instead of stdout")

    pw = sub.add_parser("pwl", help="piecewise-linear analysis")
    pw_sub = pw.add_subparsers(dest="pwl_command", metavar="ACTION")
    pw_sub.required = True
    ex = pw_sub.add_parser("extract", help="extract the exact pieces of a network on [a, b]")
    ex.add_argument("--net", type=Path, required=True)
    ex.add_argument("--a", type=float, default=-1.0)
    ex.add_argument("--b", type=float, default=1.0)
    ex.add_argument("--line", type=_floats, help="base point p (comma-separated) for multi-input networks")
    ex.add_argument("--direction", type=_floats, help="direction v (comma-separated) for multi-input networks")
    ex.add_argument("--slope-tol", type=float, default=1e-8)
    ex.add_argument("--out", type=Path, help="write breakpoints as x,y CSV")

    pl = sub.add_parser("plot", help="render figures")
    pl_sub = pl.add_subparsers(dest="plot_command", metavar="ACTION")
    pl_sub.required = True
    hm = pl_sub.add_parser("heatmap", help="render a heatmap CSV to SVG")
    hm.add_argument("csv", type=Path)
    hm.add_argument("--out", type=Path, help="SVG path (default: alongside the CSV)")
    hm.add_argument("--vmin", type=float)
    hm.add_argument("--vmax", type=float)
    return p


def _cmd_experiment(args) -> int:
    if args.exp_command == "list":
        for name in shipped_config_names():
            print(name)
        return 0
    if args.exp_command == "show":
        print(shipped_config(args.config_name).dump(), end="")
        return 0
    cfg = load_config(args.config) if args.config else shipped_config(f"{args.name}-{args.tier}")
    if cfg.name != args.name:
        raise CliError(f"config {args.config} is for experiment {cfg.name!r}, not {args.name!r}")
    cfg = cfg.with_overrides(n_trials=args.trials, base_seed=args.seed)
    res = run_experiment(cfg, out_dir=args.out, n_jobs=args.jobs)
    print(f"wrote {len(res.files) + 2} files to {res.out_dir}")
    return 0


def _training_data(args, d_in: int, d_out: int, rng: RngStream):
    n = args.n_points
    if args.data == "gaussian":
        return standard_normal(rng, n, d_in), standard_normal(rng, n, d_out)
    if d_in != 1 or d_out != 1:
        raise CliError(f"--data {args.data} needs a 1-input, 1-output network (--layers 1,...,1)")
    if args.data == "sawtooth":
        return sawtooth_dataset(n, args.teeth)
    spline = random_linear_spline(args.knots, (-1.0, 1.0), rng)
    data = spline_plus_noise(spline, n, args.sigma, rng)
    return data.x, data.y_noisy


def _cmd_train(args) -> int:
    if len(args.layers) < 2:
        raise CliError("--layers needs at least an input and an output size")
    rng = RngStream(args.seed)
    x, y = _training_data(args, args.layers[0], args.layers[-1], rng)
    net = glorot_uniform_init(args.layers, rng)
    config = TrainConfig(
        epochs=args.epochs,
        batch_policy=batch_policy_from_params(args.batch_size, args.remainder, n_samples=len(x)),
        snapshot_every=args.snapshot_every,
        seed=args.seed,
        record_census=True,
    )
    record = train(net, x, y, config)
    last = record.checkpoints[-1]
    print(f"epochs={last.epoch} steps={record.steps} mse={last.mse:.6g} size={last.size:.6g}"
          + (" DIVERGED" if record.diverged else ""))
    if args.save_net:
        save_network(net, args.save_net)
    if args.record:
        write_trials_csv([record], args.record)
    return 1 if record.diverged else 0


def _inputs(args, d_in: int) -> np.ndarray:
    if args.inputs is not None:
        try:
            x = np.loadtxt(args.inputs, delimiter=",", ndmin=2)
        except ValueError:
            x = np.loadtxt(args.inputs, delimiter=",", ndmin=2, skiprows=1)
        return x
    return standard_normal(RngStream(args.seed), args.n_points, d_in)


def _cmd_census(args) -> int:
    net = load_network(args.net)
    report = dead_neuron_census(net, _inputs(args, net.d_in))
    if args.out:
        report.to_csv(args.out)
    else:
        print("layer,neurons,dead,frac")
        for c in report.layers:
            print(f"{c.layer},{c.neurons},{int(c.dead)},{c.frac:.17g}")
    return 0


def _cmd_size(args) -> int:
    net = load_network(args.net)
    value = size_metric(net, _inputs(args, net.d_in))
    if args.out:
        Path(args.out).write_text(f"size\n{value:.17g}\n", encoding="utf-8")
    else:
        print(f"{value:.17g}")
    return 0


def _cmd_pwl(args) -> int:
    net = load_network(args.net)
    if net.d_in > 1 and (args.line is None or args.direction is None):
        raise CliError(
            f"the network has {net.d_in} inputs; pass --line P and --direction V "
            "to restrict it to the line P + t*V"
        )
    if args.line is not None or args.direction is not None:
        if args.line is None or args.direction is None:
            raise CliError("--line and --direction must be given together")
        net = restrict_to_line(net, args.line, args.direction).network
    pwl = extract_pwl(net, args.a, args.b)
    if args.out:
        pwl.to_csv(args.out)
    print(f"breakpoints={pwl.breakpoints.size} pieces={count_pieces(pwl, args.slope_tol)}")
    return 0


def _cmd_plot(args) -> int:
    grid = HeatmapGrid.from_csv(args.csv)
    grid.vmin, grid.vmax = args.vmin, args.vmax
    out = args.out or args.csv.with_suffix(".svg")
    render_heatmap(grid, out)
    print(f"wrote {out}")
    return 0


_COMMANDS = {
    "experiment": _cmd_experiment,
    "train": _cmd_train,
    "census": _cmd_census,
    "size": _cmd_size,
    "pwl": _cmd_pwl,
    "plot": _cmd_plot,
}


def cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (CliError, ConfigError, ValueError, TypeError, OSError, RuntimeError) as exc:
        print(f"reluspline: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
