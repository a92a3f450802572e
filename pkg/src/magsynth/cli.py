"""Command-line entry point: ``magsynth {generate,debug,demo,evaluate}``."""

import argparse
import json
import logging
import sys
from dataclasses import replace

from ._validation import ConfigurationError
from .metrics import evaluate_paths
from .pipeline import DEMO_DOWN_FACTOR, GenerationConfig, debug_sample, generate, generation_succeeded, kernel_demo, load_config


def _config(args):
    cfg = load_config(args.config) if args.config else GenerationConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if getattr(args, "n", None) is not None:
        overrides["n_samples"] = args.n
    return replace(cfg, **overrides) if overrides else cfg


def _cmd_generate(args):
    cfg = _config(args)
    manifest = generate(cfg, args.out)
    ok = generation_succeeded(manifest)
    print(f"produced {manifest['n_produced']}/{manifest['n_requested']} samples in {args.out}")
    for f in manifest["failures"]:
        print(f"  sample {f['index']} failed: {f['error']}", file=sys.stderr)
    return 0 if ok else 1


def _cmd_debug(args):
    cfg = _config(args)
    paths, scene = debug_sample(cfg, args.index, args.out)
    print(f"sample {args.index}: alpha={scene.alpha:.4f}, {len(scene.placed)} objects")
    for p in paths:
        print(f"  {p}")
    return 0


def _cmd_demo(args):
    _, path = kernel_demo(args.pair, args.alpha, out_path=args.out, down_factor=args.down_factor,
                          scan_seed=args.scan_seed)
    print(path)
    return 0


def _cmd_evaluate(args):
    result = evaluate_paths(args.pred, args.gt)
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="magsynth", description="Motion magnification training data synthesis.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log informational messages.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="Generate a dataset of (I_A, I_B, I_amp) triplets.")
    gen.add_argument("--config", help="JSON file with GenerationConfig fields.")
    gen.add_argument("--out", required=True, help="Output directory.")
    gen.add_argument("--seed", type=int, help="Global seed (overrides the config).")
    gen.add_argument("--workers", type=int, help="Worker processes (overrides the config).")
    gen.add_argument("--n", type=int, help="Number of samples (overrides the config).")
    gen.set_defaults(func=_cmd_generate)

    dbg = sub.add_parser("debug", help="Write the diagnostic bundle of one sample.")
    dbg.add_argument("--config", help="JSON file with GenerationConfig fields.")
    dbg.add_argument("--index", type=int, required=True, help="Sample index.")
    dbg.add_argument("--out", required=True, help="Bundle directory.")
    dbg.add_argument("--seed", type=int, help="Global seed (overrides the config).")
    dbg.set_defaults(func=_cmd_debug)

    demo = sub.add_parser("demo", help="Run the latent magnification chain on a generated pair.")
    demo.add_argument("--pair", required=True, help="Directory holding I_A.png and I_B.png.")
    demo.add_argument("--alpha", type=float, required=True, help="Magnification factor.")
    demo.add_argument("--out", help="Output PNG (default: <pair>/I_demo.png).")
    demo.add_argument("--down-factor", type=int, default=DEMO_DOWN_FACTOR, help="Deep/shallow feature ratio.")
    demo.add_argument("--scan-seed", type=int, help="Enable a random selective-scan stage with this seed.")
    demo.set_defaults(func=_cmd_demo)

    ev = sub.add_parser("evaluate", help="RMSE/PSNR between predictions and ground truth.")
    ev.add_argument("--pred", required=True, help="Predicted PNG or directory.")
    ev.add_argument("--gt", required=True, help="Ground-truth PNG or directory.")
    ev.add_argument("--out", help="Write the JSON report here instead of stdout.")
    ev.set_defaults(func=_cmd_evaluate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
