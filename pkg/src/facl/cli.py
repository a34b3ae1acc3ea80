"""Command-line entry point: ``facl <command> ...``."""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .config import AblationConfig, dump_config, load_config
from .data import Workspace, decode_image, load_split
from .errors import FaclError
from .runs import create_run_dir, write_json


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="root seed (overrides the config)")
    p.add_argument("--out-dir", default="runs", help="parent directory for run directories")
    p.add_argument("--data-root", default=None, help="workspace root (default: $FACL_DATA_ROOT or ./facl_data)")


def cmd_synth(args):
    from .synthetic import write_image_folder

    root = write_image_folder(args.dest, args.kind, args.train_per_class, args.test_per_class,
                              seed=args.seed or 0, size=args.resolution)
    print(root)


def cmd_ingest(args):
    ws = Workspace(args.data_root)
    m = ws.ingest(args.root, args.id, layout=args.layout, resolution=args.resolution,
                  test_fraction=args.test_fraction)
    print(f"{m.id}: {m.num_classes} classes, {len(m.splits['train'])} train / {len(m.splits['test'])} test, "
          f"{len(m.quarantined)} quarantined, checksum {m.checksum[:12]}")


def cmd_train_surrogate(args):
    from .experiments import train_surrogate
    from .models import SurrogateTrainConfig

    kwargs = {} if args.width is None else {"width": args.width}
    cfg = SurrogateTrainConfig(epochs=args.epochs, learning_rate=args.lr, seed=args.seed or 0)
    _, acc = train_surrogate(Workspace(args.data_root), args.dataset, args.arch, args.model_id, cfg, **kwargs)
    print(f"test accuracy {acc:.2f}%")


def _train_config(args):
    from .training import make_ablation_config

    cfg = load_config(args.config) if args.config else load_config_defaults()
    if args.variant:
        cfg = make_ablation_config(cfg, args.variant)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def load_config_defaults():
    from .config import TrainConfig

    return TrainConfig()


def cmd_train(args):
    from .experiments import run_training

    run_dir = run_training(Workspace(args.data_root), _train_config(args), args.out_dir)
    print(run_dir)


def cmd_eval(args):
    from .experiments import evaluate_generator

    rec = evaluate_generator(Workspace(args.data_root), args.generator, args.victim, args.dataset,
                             args.epsilon, args.limit)
    run_dir = create_run_dir(args.out_dir, "eval", rec.config_hash or "nohash")
    write_json(run_dir / "record.json", rec.to_dict())
    print(json.dumps(rec.to_dict(), indent=1))
    print(run_dir)


def cmd_ablate(args):
    from .experiments import run_ablation
    from .report import format_summary, write_report

    cfg = load_config(args.config, kind="ablation") if args.config else AblationConfig()
    if args.seed is not None:
        cfg = AblationConfig(cfg.train.replace(seed=args.seed), cfg.variants, cfg.victims, (args.seed,), cfg.eval_limit)
    run_dir, _ = run_ablation(Workspace(args.data_root), cfg, args.out_dir)
    print(format_summary(write_report(run_dir)))
    print(run_dir)


def cmd_report(args):
    from .report import format_summary, write_report

    print(format_summary(write_report(args.run)))


def _to_png(arr, path, offset=0.0):
    img = np.clip(np.asarray(arr, dtype=np.float64) + offset, 0, 255).astype(np.uint8)
    if img.ndim == 3:
        img = img.transpose(1, 2, 0)
    Image.fromarray(img).save(path)


def cmd_spectra(args):
    from . import spectral

    cfg = load_config(args.config) if args.config else load_config_defaults()
    if args.image:
        image = decode_image(args.image, args.resolution).astype(np.float64)
    else:
        manifest = Workspace(args.data_root).dataset(args.dataset)
        image = load_split(manifest, "train")[0][args.index].astype(np.float64)
    shape = image.shape[-2:]
    thresholds = cfg.thresholds
    params = cfg.randomization.with_seed(args.seed or 0)
    run_dir = create_run_dir(args.out_dir, "spectra", cfg.hash())
    dump_config(cfg, run_dir / "config.yaml")
    for kind in ("band_pass", "band_reject"):
        m = spectral.build_band_mask(thresholds, shape, kind).values.numpy()
        _to_png(m * 255, run_dir / f"mask_{kind}.png")
    m = spectral.build_band_mask(thresholds, shape, "fadr_random", params).values.numpy()
    span = max(params.rho, 1e-12)
    _to_png((m - 1) / span * 127.5, run_dir / "mask_fadr_random.png", offset=127.5)
    mid, lowhigh = spectral.band_decompose(image, thresholds)
    _to_png(image, run_dir / "input.png")
    _to_png(mid, run_dir / "mid_band.png", offset=127.5)
    _to_png(lowhigh, run_dir / "low_high_band.png")
    _to_png(spectral.fadr_transform(image, thresholds, params), run_dir / "fadr.png")
    log_spec = np.log1p(np.abs(spectral.dct2(image))).mean(0)
    _to_png(log_spec / log_spec.max() * 255, run_dir / "log_spectrum.png")
    print(run_dir)


def build_parser():
    parser = argparse.ArgumentParser(prog="facl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a procedural image-folder dataset")
    p.add_argument("--kind", choices=("shapes", "glyphs"), required=True)
    p.add_argument("--dest", required=True)
    p.add_argument("--train-per-class", type=int, default=400)
    p.add_argument("--test-per-class", type=int, default=100)
    p.add_argument("--resolution", type=int, default=32)
    _common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="build a dataset manifest from an image folder")
    p.add_argument("--root", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--layout", choices=("auto", "split", "flat"), default="auto")
    p.add_argument("--resolution", type=int, default=32)
    p.add_argument("--test-fraction", type=float, default=0.2)
    _common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train-surrogate", help="train a zoo classifier and register it")
    p.add_argument("--dataset", required=True)
    p.add_argument("--arch", choices=("vgg", "resnet", "densenet"), required=True)
    p.add_argument("--model-id", default=None)
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--lr", type=float, default=3e-3)
    p.add_argument("--width", type=int, default=None)
    _common(p)
    p.set_defaults(func=cmd_train_surrogate)

    p = sub.add_parser("train", help="train a perturbation generator")
    p.add_argument("--config", default=None)
    p.add_argument("--variant", default=None)
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a generator against a victim")
    p.add_argument("--generator", required=True)
    p.add_argument("--victim", required=True)
    p.add_argument("--dataset", default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--limit", type=int, default=None)
    _common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the ablation suite")
    p.add_argument("--config", default=None)
    _common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="tables and plots for a run directory")
    p.add_argument("--run", required=True)
    _common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("spectra", help="dump band masks and decompositions as images")
    p.add_argument("--config", default=None)
    p.add_argument("--image", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--resolution", type=int, default=32)
    _common(p)
    p.set_defaults(func=cmd_spectra)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        args.func(args)
    except (FaclError, FileNotFoundError) as exc:
        print(f"facl: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
