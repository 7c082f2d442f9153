"""zooexport command line: `export` writes bundle files, `verify` re-checks them."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .export import ExportJob, export, verify


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zooexport",
        description="Run classifiers over a dataset and write zoodetect bundle files. "
                    "Penultimate features are the input to the final nn.Linear head.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="export features/logits for one split")
    p.add_argument("--models", required=True, help="comma-separated registry names "
                                                   "(torchvision names or 'toy-cnn')")
    p.add_argument("--dataset", default="synthetic",
                   help="synthetic | folder:PATH | cifar10 | cifar100")
    p.add_argument("--split", required=True, help="dataset split to iterate")
    p.add_argument("--role", default="", help="manifest role (default: the split name); "
                                              "bundles need id_train and id_val")
    p.add_argument("--out", required=True, help="bundle output directory")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--device", default="cpu")
    p.add_argument("--weights", default="none", choices=("none", "default"),
                   help="'default' fetches published checkpoints (needs network/cache)")
    p.add_argument("--n", type=int, default=64, help="synthetic dataset size")
    p.add_argument("--image-size", type=int, default=32)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data-root", default=".")
    p.add_argument("--score", default="knn", choices=("msp", "energy", "mahalanobis", "knn"))
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--tpr0", type=float, default=0.95)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("verify", help="re-check a bundle directory")
    p.add_argument("dir")
    p.set_defaults(func=cmd_verify)
    return parser


def cmd_export(args) -> int:
    job = ExportJob(
        models=tuple(m.strip() for m in args.models.split(",") if m.strip()),
        dataset=args.dataset,
        split=args.split,
        role=args.role,
        out_dir=Path(args.out),
        batch_size=args.batch_size,
        device=args.device,
        weights=args.weights,
        n=args.n,
        image_size=args.image_size,
        classes=args.classes,
        seed=args.seed,
        data_root=args.data_root,
        score=args.score,
        k=args.k,
        normalize=not args.no_normalize,
        tpr0=args.tpr0,
    )
    result = export(job)
    for path in result.written:
        print(f"wrote {path}")
    for name, err in result.errors.items():
        print(f"error [{name}]: {err}", file=sys.stderr)
    return 0 if result.ok else 1


def cmd_verify(args) -> int:
    report = verify(Path(args.dir))
    print(report.format(), end="")
    return 0 if report.ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
