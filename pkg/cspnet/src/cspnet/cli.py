"""Command-line entry points: train and infer."""

from __future__ import annotations

import argparse
import sys

from .config import CspNetConfig
from .data import DatasetError
from .train import infer, train

EXIT_OK = 0
EXIT_CONFIG = 2


def build_parser():
    p = argparse.ArgumentParser(prog="cspnet")
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("train")
    t.add_argument("--dataset", required=True)
    t.add_argument("--out", default=".")
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    t.add_argument("--real-valued", action="store_true", dest="real_valued")
    t.add_argument("--no-cbam", action="store_true", dest="no_cbam")
    i = sub.add_parser("infer")
    i.add_argument("--checkpoint", required=True)
    i.add_argument("--dataset", required=True)
    i.add_argument("--out", default=".")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            kw = {"dataset": args.dataset, "seed": args.seed,
                  "complex_layers": not args.real_valued,
                  "use_cbam": not args.no_cbam}
            for name in ("epochs", "lr", "batch_size"):
                if getattr(args, name) is not None:
                    kw[name] = getattr(args, name)
            history = train(CspNetConfig(**kw), args.out)
            print(f"final loss {history[-1]['loss']:.6f}")
        else:
            paths = infer(args.checkpoint, args.dataset, args.out)
            print(f"wrote {len(paths)} states")
    except (DatasetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
