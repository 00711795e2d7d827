"""``dhmamba`` command line.

Every subcommand writes CSV and/or plain PGM files; ``--plot`` additionally
renders PNG figures next to them (needs matplotlib).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .. import rng as rng_mod
from ..mrisim import make_mask, phantom
from ..scan import dump_rows, get_paths
from ..tensor import serialize
from . import report
from .checkpoint import load_checkpoint
from .config import TrainConfig, dump_config, load_config, preset_model
from .cost import COLUMNS as COST_COLUMNS
from .cost import count_cost
from .erf import conv_control, erf_map, support
from .evaluate import evaluate
from .train import TrainingDiverged, train

MODEL_FLAGS = {
    "groups": int,
    "blocks": int,
    "channels": int,
    "state_size": int,
    "stride": int,
    "n_lr": int,
    "shuffle": int,
    "expand": int,
    "dt_rank": int,
}
TRAIN_FLAGS = {
    "steps": int,
    "batch_size": int,
    "lr_init": float,
    "lr_final": float,
    "weight_decay": float,
    "grad_clip": float,
    "n_train": int,
    "size": int,
    "mask_kind": str,
    "af": float,
}


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _emit_csv(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        report.write_text(path, text)


# ----------------------------------------------------------------- mask
def cmd_mask(args) -> int:
    h = args.h or args.w
    spec = make_mask(args.kind, h, args.w, args.af, args.seed)
    out = Path(args.out)
    report.write_pgm(out, spec.mask, lo=0.0, hi=1.0, maxval=1)
    print(f"{args.kind} mask {h}x{args.w} AF={args.af} seed={args.seed}: "
          f"sampled fraction {spec.sampled_fraction:.4f} -> {out}")
    if args.plot:
        report.plot_image(out.with_suffix(".png"), spec.mask, f"{args.kind} AF={args.af}")
    return 0


# -------------------------------------------------------------- phantom
def cmd_phantom(args) -> int:
    h = args.h or args.w
    ph = phantom(h, args.w, args.seed, n_ellipses=args.n_ellipses)
    out = Path(args.out)
    report.write_pgm(out, ph.magnitude, lo=0.0, hi=1.0)
    if args.complex_out:
        serialize.save_complex(args.complex_out, {"image": ph.image}, {"seed": args.seed})
    print(f"phantom {h}x{args.w} seed={args.seed} -> {out}")
    if args.plot:
        report.plot_image(out.with_suffix(".png"), ph.magnitude, f"phantom seed={args.seed}")
    return 0


# ------------------------------------------------------------ scan-dump
def cmd_scan_dump(args) -> int:
    h = args.h or args.w
    paths = get_paths(args.family, h, args.w)
    if not 0 <= args.index < len(paths):
        raise ValueError(f"--index must be in 0..{len(paths) - 1}")
    path = paths[args.index]
    _emit_csv(report.to_csv(("t", "i", "j", "ring"), dump_rows(path)), args.out)
    if args.plot and args.out not in (None, "-"):
        img = np.empty((h, args.w))
        for t, i, j, _ in dump_rows(path):
            img[i, j] = t
        report.plot_image(Path(args.out).with_suffix(".png"), img, f"{path.name} visit order", cmap="viridis")
    return 0


# ---------------------------------------------------------------- train
def _train_config(args) -> TrainConfig:
    cfg = load_config(args.config) if args.config else TrainConfig()
    if args.preset:
        cfg = cfg.with_(model=preset_model(args.preset).with_(seed=cfg.model.seed))
    model_kw = {k: getattr(args, k) for k in MODEL_FLAGS if getattr(args, k) is not None}
    train_kw = {k: getattr(args, k) for k in TRAIN_FLAGS if getattr(args, k) is not None}
    if args.seed is not None:
        seed = args.seed
    elif args.config:
        seed = None  # the file's seeds stand
    else:
        seed = rng_mod.default_seed(cfg.seed)
    if seed is not None:
        model_kw["seed"] = seed
        train_kw["seed"] = seed
    return cfg.with_(model=cfg.model.with_(**model_kw), **train_kw)


def _eval_outputs(rep, out: Path, plot: bool) -> None:
    report.write_text(out / "metrics.csv", rep.metrics_csv())
    summary = rep.summary()
    report.write_text(out / "summary.txt", summary + "\n")
    print(summary)
    if plot:
        report.plot_metrics(out / "metrics.png", rep)


def cmd_train(args) -> int:
    cfg = _train_config(args)
    out = _out_dir(args.out)
    if args.dry_run:
        print(dump_config(cfg))
        return 0
    try:
        ckpt, rep = train(cfg, out, progress_every=args.log_every)
    except TrainingDiverged as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return 1
    losses = rep.loss_values()
    if losses.size:
        k = min(10, losses.size)
        print(f"trained {cfg.steps} steps in {rep.seconds:.1f}s: "
              f"first-{k} mean loss {losses[:k].mean():.5f}, last-{k} mean loss {losses[-k:].mean():.5f}")
    print(f"checkpoint -> {out / 'model.ckpt'}")
    if args.plot and losses.size:
        report.plot_losses(out / "losses.png", rep)
    if args.eval:
        _eval_outputs(evaluate(ckpt, args.eval), out, args.plot)
    return 0


# ----------------------------------------------------------------- eval
def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    rep = evaluate(ckpt, args.n_images, args.mask_kind, args.af, args.seed)
    _eval_outputs(rep, _out_dir(args.out), args.plot)
    return 0


# ------------------------------------------------------------------ erf
def cmd_erf(args) -> int:
    out = _out_dir(args.out)
    if args.control:
        size = args.size or 32
        fwd = conv_control()
    else:
        if not args.ckpt:
            raise ValueError("erf needs --ckpt or --control")
        ckpt = load_checkpoint(args.ckpt)
        size = args.size or ckpt.config.size
        fwd = ckpt.model()
    seed = args.seed if args.seed is not None else 0
    ph = phantom(size, size, seed)
    image = np.stack([ph.image.real, ph.image.imag])
    i = args.i if args.i is not None else size // 2
    j = args.j if args.j is not None else size // 2
    m = erf_map(fwd, image, (i, j))
    report.write_text(out / "erf.csv", report.grid_csv(m))
    report.write_pgm(out / "erf.pgm", np.log10(m + 1e-12 * max(m.max(), 1e-300)))
    n = support(m)
    print(f"erf at ({i}, {j}): nonzero support {n}/{m.size} ({100 * n / m.size:.1f}%)")
    if args.plot:
        report.plot_image(out / "erf.png", np.log10(m + 1e-12 * max(m.max(), 1e-300)), "log10 |grad|", cmap="magma")
    return 0


# ----------------------------------------------------------------- cost
def cmd_cost(args) -> int:
    model = load_config(args.config).model if args.config else preset_model(args.preset)
    model_kw = {k: getattr(args, k) for k in MODEL_FLAGS if getattr(args, k, None) is not None}
    model = model.with_(**model_kw)
    h = args.h or args.w
    rep = count_cost(model, h, args.w)
    _emit_csv(report.to_csv(COST_COLUMNS, rep.csv_rows()), args.out)
    if args.out not in (None, "-"):
        print(f"params {rep.params}  MACs {rep.macs}  ({rep.macs / 1e9:.3f} G) -> {args.out}")
    if args.plot and args.out not in (None, "-"):
        macs = [count_cost(model.with_(n_lr=n), h, args.w).macs for n in range(5)]
        report.plot_cost(Path(args.out).with_suffix(".png"), list(range(5)), macs)
    return 0


# ------------------------------------------------------------- selftest
def cmd_selftest(args) -> int:
    from .selftest import run

    return 0 if run(verbose=not args.quiet) else 1


# --------------------------------------------------------------- parser
def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model overrides")
    for name, typ in MODEL_FLAGS.items():
        g.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dhmamba", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mask", help="write an undersampling mask as PGM")
    p.add_argument("--kind", choices=("cartesian", "radial", "random"), default="cartesian")
    p.add_argument("--af", type=float, default=4)
    p.add_argument("--w", type=int, default=256)
    p.add_argument("--h", type=int, default=None, help="defaults to --w")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="mask.pgm")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_mask)

    p = sub.add_parser("phantom", help="write a synthetic phantom magnitude as PGM")
    p.add_argument("--w", type=int, default=64)
    p.add_argument("--h", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-ellipses", type=int, default=6)
    p.add_argument("--out", default="phantom.pgm")
    p.add_argument("--complex-out", default=None, help="also store the complex image in a tensor container")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_phantom)

    p = sub.add_parser("scan-dump", help="CSV of (t, i, j, ring) for one scan path")
    p.add_argument("--family", choices=("raster", "circular"), default="circular")
    p.add_argument("--index", type=int, default=0, help="path number 0..3")
    p.add_argument("--w", type=int, default=8)
    p.add_argument("--h", type=int, default=None)
    p.add_argument("--out", default=None, help="file path, or stdout when omitted")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_scan_dump)

    p = sub.add_parser("train", help="train on synthetic phantoms")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--preset", choices=("desk", "paper"), default=None)
    p.add_argument("--seed", type=int, default=None, help=f"falls back to ${rng_mod.ENV_SEED}")
    for name, typ in TRAIN_FLAGS.items():
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, default=None)
    _add_model_flags(p)
    p.add_argument("--out", default="run")
    p.add_argument("--eval", type=int, default=0, metavar="N", help="evaluate on N held-out images afterwards")
    p.add_argument("--log-every", type=int, default=0)
    p.add_argument("--dry-run", action="store_true", help="print the resolved config and exit")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint against zero-filling")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--n-images", type=int, default=8)
    p.add_argument("--mask-kind", choices=("cartesian", "radial", "random"), default=None)
    p.add_argument("--af", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="eval")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("erf", help="effective receptive field map")
    p.add_argument("--ckpt", default=None)
    p.add_argument("--control", action="store_true", help="use a single 3x3 convolution instead")
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--i", type=int, default=None)
    p.add_argument("--j", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="erf")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_erf)

    p = sub.add_parser("cost", help="parameter and MAC accounting as CSV")
    p.add_argument("--preset", choices=("desk", "paper"), default="desk")
    p.add_argument("--config", default=None)
    p.add_argument("--w", type=int, default=None)
    p.add_argument("--h", type=int, default=None)
    _add_model_flags(p)
    p.add_argument("--out", default=None)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(fn=cmd_cost)

    p = sub.add_parser("selftest", help="run the built-in oracle checks")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "cost" and args.w is None:
        args.w = 256 if args.preset == "paper" and not args.config else 32
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"dhmamba {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

