"""Command-line entry point.

Subcommands cover the full pipeline: ``score`` (stage-1 inference over a
manifest), ``bench`` (end-to-end evaluation report), ``simulate``
(Monte Carlo checks), and ``explain`` (per-sample attribution).

Exit codes: 0 success, 1 validation error (bad flags, bad manifest, bad
ranges), 2 runtime error.  Reports are byte-stable across reruns: fixed
field order, floats at 6 significant digits, no timestamps.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from .errors import ConfigError, ZooDetectError
from .ensemble import SCHEMES, EnsembleConfig
from .ingest import ID_VAL, ZooManifest, load_manifest, validate_bundle, write_matrix, write_score_sidecar
from .metrics import DetectionReport, bench
from .pvalue import pvalue_matrix
from .scores import score_table
from .sim import (
    IdUniformSimConfig,
    MixtureSimConfig,
    SynthBenchConfig,
    explain_sample,
    simulate_id_uniform,
    simulate_mixture,
    synth_benchmark,
)


def _fmt(x: float) -> str:
    return format(x, ".6g")


def _quant(x: float) -> float:
    return float(_fmt(x))


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_schemes(raw: str) -> tuple[str, ...]:
    schemes = tuple(s.strip() for s in raw.split(",") if s.strip())
    if not schemes:
        raise ConfigError("empty scheme list")
    for s in schemes:
        if s not in SCHEMES:
            raise ConfigError(f"unknown scheme {s!r}; expected one of {SCHEMES}")
    return schemes


def _check_tpr0(value: float) -> float:
    if not 0 < value < 1:
        raise ConfigError(f"tpr0 must lie in (0, 1), got {value}")
    return value


def _load(path: str) -> ZooManifest:
    manifest = load_manifest(path)
    validate_bundle(manifest)
    return manifest


def _write_report(report: DetectionReport, csv_path: Path, quiet: bool) -> None:
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(report.to_csv())
    json_path = csv_path.with_suffix(".json")
    json_path.write_text(report.to_json())
    if not quiet:
        print(report.to_text(), end="")
        print(f"wrote {csv_path} and {json_path}")


def cmd_score(args) -> int:
    manifest = _load(args.manifest)
    if args.split not in manifest.splits():
        raise ConfigError(f"unknown split {args.split!r}; manifest has {sorted(manifest.splits())}")
    table = score_table(manifest, args.split)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"scores_{args.split}.zfm"
    write_matrix(table.values, path)
    write_score_sidecar(path, table.model_names, table.configs, args.split)
    if not args.quiet:
        print(f"wrote {table.n}x{table.m} score table to {path}")
    return 0


def cmd_bench(args) -> int:
    manifest = _load(args.manifest)
    schemes = _parse_schemes(args.schemes)
    tpr0 = _check_tpr0(args.tpr0) if args.tpr0 is not None else None
    ood = tuple(s.strip() for s in args.ood.split(",") if s.strip()) if args.ood else None
    report = bench(manifest, schemes=schemes, tpr0=tpr0, ood_splits=ood)
    _write_report(report, Path(args.report), args.quiet)
    return 0


def cmd_simulate_id_uniform(args) -> int:
    cfg = IdUniformSimConfig(m=args.m, tpr0=_check_tpr0(args.tpr0), trials=args.trials,
                             seed=args.seed, schemes=_parse_schemes(args.schemes))
    results = simulate_id_uniform(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_lines = ["scheme,tpr,stderr,trials"]
    for s, est in results.items():
        csv_lines.append(f"{s},{_fmt(est.tpr)},{_fmt(est.stderr)},{est.trials}")
    (out / "id_uniform_tpr.csv").write_text("\n".join(csv_lines) + "\n")
    doc = {
        "config": {"m": cfg.m, "tpr0": cfg.tpr0, "trials": cfg.trials,
                   "seed": cfg.seed, "schemes": list(cfg.schemes)},
        "results": {s: {"tpr": _quant(est.tpr), "stderr": _quant(est.stderr)}
                    for s, est in results.items()},
    }
    (out / "id_uniform_tpr.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if not args.quiet:
        for s, est in results.items():
            print(f"{s:<8} TPR {_fmt(est.tpr)} (stderr {_fmt(est.stderr)})")
    return 0


def cmd_simulate_mixture(args) -> int:
    if not 0 < args.alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {args.alpha}")
    cfg = MixtureSimConfig(m=args.m, pi=args.pi, g_shape=args.g_shape,
                           alpha=args.alpha, trials=args.trials, seed=args.seed)
    stats = simulate_mixture(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "config": {"m": cfg.m, "pi": cfg.pi, "g_shape": cfg.g_shape,
                   "alpha": cfg.alpha, "trials": cfg.trials, "seed": cfg.seed},
        "stats": {
            "mean_tpr_like": _quant(stats.mean_tpr_like),
            "fdr": _quant(stats.fdr),
            "fdr_stderr": _quant(stats.fdr_stderr),
            "rejection_fraction": _quant(stats.rejection_fraction),
            "detection_rate": _quant(stats.detection_rate),
            "detection_rate_stderr": _quant(stats.detection_rate_stderr),
        },
    }
    (out / "mixture_power.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if not args.quiet:
        print(f"detection_rate {_fmt(stats.detection_rate)}  fdr {_fmt(stats.fdr)}  "
              f"rejection_fraction {_fmt(stats.rejection_fraction)}")
    return 0


def cmd_simulate_synth(args) -> int:
    kwargs = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        if not isinstance(raw, dict):
            raise ConfigError("synth config must be a JSON object")
        allowed = set(SynthBenchConfig.__dataclass_fields__)
        unknown = set(raw) - allowed
        if unknown:
            raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
        for key in ("ood_means", "projections"):
            if key in raw:
                raw[key] = tuple(tuple(v) for v in raw[key])
        if "ood_scales" in raw:
            raw["ood_scales"] = tuple(raw["ood_scales"])
        kwargs.update(raw)
    if args.seed is not None:
        kwargs["seed"] = args.seed
    report = synth_benchmark(SynthBenchConfig(**kwargs))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_report(report, out / "synth_report.csv", args.quiet)
    return 0


def cmd_explain(args) -> int:
    manifest = _load(args.manifest)
    if args.ood not in manifest.splits():
        raise ConfigError(f"unknown split {args.ood!r}; manifest has {sorted(manifest.splits())}")
    ref = score_table(manifest, ID_VAL)
    test = score_table(manifest, args.ood)
    if not 0 <= args.index < test.n:
        raise ConfigError(f"--index {args.index} out of range for split with {test.n} samples")
    pmat = pvalue_matrix(ref, test)
    tpr0 = args.tpr0 if args.tpr0 is not None else manifest.tpr0
    config = EnsembleConfig(scheme=args.scheme, tpr0=_check_tpr0(tpr0))
    record = explain_sample(pmat.values[args.index], config, pmat.model_names)
    print(f"sample {args.index} of {args.ood}: {record.format()}")
    pvals = ", ".join(f"{name}={_fmt(p)}" for name, p in zip(pmat.model_names, pmat.values[args.index]))
    print(f"p-values: {pvals}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zoodetect",
                     description="Model-zoo OOD detection: scores, p-values, BH ensembling.")

    def add_common(p):
        p.add_argument("--seed", type=int, default=0, help="RNG seed where used")
        p.add_argument("--threads", type=int, default=0,
                       help="worker threads, 0 = all (results never depend on this)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        p.add_argument("--out", default=".", help="output directory")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", parents=[], help="compute and persist a score table")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True)
    add_common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bench", help="run the full benchmark and write a report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--tpr0", type=float, default=None)
    p.add_argument("--schemes", default="bh")
    p.add_argument("--ood", default=None, help="comma-separated OOD splits (default: all)")
    p.add_argument("--report", default="report.csv")
    add_common(p)
    p.set_defaults(func=cmd_bench)

    sim = sub.add_parser("simulate", help="Monte Carlo verification runs")
    sim_sub = sim.add_subparsers(dest="sim_command", required=True)

    p = sim_sub.add_parser("id-uniform", help="TPR of each scheme on uniform p-values")
    p.add_argument("--m", type=int, default=7)
    p.add_argument("--tpr0", type=float, default=0.95)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--schemes", default=",".join(SCHEMES))
    add_common(p)
    p.set_defaults(func=cmd_simulate_id_uniform)

    p = sim_sub.add_parser("mixture", help="BH power and FDR against a mixture alternative")
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--pi", type=float, default=0.2)
    p.add_argument("--g-shape", dest="g_shape", type=float, default=0.1)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--trials", type=int, default=100_000)
    add_common(p)
    p.set_defaults(func=cmd_simulate_mixture)

    p = sim_sub.add_parser("synth", help="complementary-zoo synthetic benchmark")
    p.add_argument("--config", default=None, help="JSON file of SynthBenchConfig fields")
    add_common(p)
    p.set_defaults(func=cmd_simulate_synth)

    p = sub.add_parser("explain", help="attribute one sample's decision to models")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ood", required=True, help="split containing the sample")
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--tpr0", type=float, default=None)
    p.add_argument("--scheme", default="bh", choices=SCHEMES)
    add_common(p)
    p.set_defaults(func=cmd_explain)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        if args.threads < 0:
            raise ConfigError(f"--threads must be >= 0, got {args.threads}")
        return args.func(args)
    except (ZooDetectError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
