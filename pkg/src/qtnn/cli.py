"""Benchmark command line.

Subcommands: gen-data, train, eval, activation-table, bound-states,
dump-misclassified. Each accepts --config and explicit flags that override
config keys (flag wins, then config file, then defaults). Exit codes:
0 success, 2 config error, 3 data-format error, 4 I/O error.

Report-path commands write a rendered PNG next to every CSV they emit. Two
concurrent invocations must not share an --out-dir; no locking is provided.
"""

from __future__ import annotations

import argparse
import os
import sys

from .activation import Barrier
from .config import ConfigError, parse_config
from .data import DataFormatError
from .rng import SeedStream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_IO = 4


def _add_config_args(parser, need_model=True):
    parser.add_argument("--config", help="key=value config file")
    group = parser.add_argument_group("config overrides (flag wins)")
    group.add_argument("--model", choices=("qt-bnn", "relu-bnn", "qt-rnn", "relu-rnn"))
    group.add_argument("--barrier-height", dest="barrier.height")
    group.add_argument("--barrier-width", dest="barrier.width")
    group.add_argument("--energy-map", dest="energy_map", choices=("smooth", "clamp"))
    group.add_argument("--hidden")
    group.add_argument("--epochs")
    group.add_argument("--lr")
    group.add_argument("--batch")
    group.add_argument("--mc-samples", dest="mc_samples")
    group.add_argument("--beta")
    group.add_argument("--seed")
    group.add_argument("--data-path", dest="data.path")
    group.add_argument("--synthetic-count", dest="data.synthetic.count")
    group.add_argument("--split-fraction", dest="split.fraction")
    parser.set_defaults(_need_model=need_model)


_CONFIG_KEYS = ("model", "barrier.height", "barrier.width", "energy_map",
                "hidden", "epochs", "lr", "batch", "mc_samples", "beta",
                "seed", "data.path", "data.synthetic.count", "split.fraction")


def _config_from_args(args):
    text = ""
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    overrides = {key: getattr(args, key, None) for key in _CONFIG_KEYS}
    return parse_config(text, overrides)


def _cmd_gen_data(args) -> int:
    from . import data

    try:
        seed = int(args.seed_value)
        count = int(args.count)
        root = SeedStream(seed, 0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    # spawn(4) matches the in-run dataset stream, so gen-data reproduces the
    # exact set a training run with this seed would synthesise
    if args.kind == "images":
        ds = data.synth_vehicle_images(count, root.spawn(4))
        with open(args.out, "wb") as fh:
            fh.write(data.write_cifar_binary(ds))
        print(f"wrote {len(ds)} records to {args.out}")
    else:
        phrases = data.gen_phrases(data.Lexicon(), root.spawn(4))
        data.write_phrase_corpus(args.out, phrases)
        print(f"wrote {len(phrases)} phrases to {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    from . import harness

    cfg = _config_from_args(args)
    records = harness.run_experiment(cfg, args.out_dir)
    last_train = next((r for r in reversed(records) if r.split == "train"), None)
    if last_train is not None:
        print(f"{cfg.model} seed {cfg.seed}: {last_train.epoch} epochs, final "
              f"train accuracy {last_train.accuracy:.4f}")
    print(f"metrics: {os.path.join(args.out_dir, 'metrics.csv')}")
    print(f"checkpoint: {os.path.join(args.out_dir, harness.CHECKPOINT_NAME)}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    from . import harness

    cfg = _config_from_args(args)
    rows = harness.evaluate(cfg, args.checkpoint)
    lines = ["split,loss,accuracy"]
    lines += [f"{split},{loss!r},{acc!r}" for split, loss, acc in rows]
    out = "\n".join(lines)
    print(out)
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(out + "\n")
    return EXIT_OK


def _barrier_from_args(args) -> Barrier:
    """Barrier for the physics commands: flag, else config value, else 1/1."""
    cfg_h = cfg_w = None
    if args.config or args.model:
        cfg = _config_from_args(args)
        cfg_h, cfg_w = cfg.barrier_height, cfg.barrier_width
    flag_h = getattr(args, "barrier.height", None)
    flag_w = getattr(args, "barrier.width", None)
    try:
        v0 = float(flag_h) if flag_h is not None else (cfg_h if cfg_h is not None else 1.0)
        a = float(flag_w) if flag_w is not None else (cfg_w if cfg_w is not None else 1.0)
        return Barrier(v0, a)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_activation_table(args) -> int:
    from . import harness, plots

    barrier = _barrier_from_args(args)
    try:
        e_min, e_max, steps = float(args.e_min), float(args.e_max), int(args.steps)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = harness.activation_table(barrier, e_min, e_max, steps)
    harness.write_activation_table(args.out, rows)
    fig_path = os.path.splitext(args.out)[0] + ".png"
    plots.save_activation_figure(rows, fig_path, barrier.height, barrier.width)
    print(f"wrote {len(rows)} rows to {args.out} (figure: {fig_path})")
    return EXIT_OK


def _cmd_bound_states(args) -> int:
    from . import harness

    print(harness.bound_states_table(_barrier_from_args(args)))
    return EXIT_OK


def _cmd_dump_misclassified(args) -> int:
    from . import harness

    cfg = _config_from_args(args)
    count = harness.dump_misclassified(cfg, args.checkpoint, args.out_dir)
    print(f"wrote {count} misclassified images to {args.out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtnn",
        description="Quantum-tunnelling activation networks: train, evaluate "
                    "and export benchmark data.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="synthesise a dataset file")
    p.add_argument("--kind", choices=("images", "phrases"), required=True)
    p.add_argument("--count", default="2500", help="record count (images only)")
    p.add_argument("--seed", dest="seed_value", default="0")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="run one experiment end to end")
    _add_config_args(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the config's data")
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="optional CSV destination")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("activation-table",
                       help="tabulate T(E) and dT/dE over an energy range")
    _add_config_args(p, need_model=False)
    p.add_argument("--e-min", required=True)
    p.add_argument("--e-max", required=True)
    p.add_argument("--steps", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_activation_table)

    p = sub.add_parser("bound-states",
                       help="print the barrier's bound-state levels")
    _add_config_args(p, need_model=False)
    p.set_defaults(func=_cmd_bound_states)

    p = sub.add_parser("dump-misclassified",
                       help="export misclassified test images as PPM files")
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_dump_misclassified)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"data format error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
