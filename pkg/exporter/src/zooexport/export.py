"""Run models over a dataset split and write the detection bundle files.

Determinism contract: evaluation mode, no shuffling, single-process data
loading, seeded initialization.  Two runs of the same job on the same
hardware/backend produce byte-identical files (float kernels can differ
across BLAS builds; that caveat travels with the bundle, not this tool).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader

from .data import build_dataset
from .formats import (
    load_or_init_manifest,
    read_zfm1,
    read_zfm1_header,
    save_manifest,
    upsert_model_paths,
    write_zfm1,
)
from .models import FeatureTap, build_model

REQUIRED_ROLES = ("id_train", "id_val")


@dataclass
class ExportJob:
    models: tuple[str, ...]
    dataset: str = "synthetic"
    split: str = "train"
    role: str = ""                 # manifest role; defaults to the split name
    out_dir: Path = Path("bundle")
    batch_size: int = 32
    device: str = "cpu"
    weights: str = "none"
    # synthetic-dataset shape
    n: int = 64
    image_size: int = 32
    classes: int = 10
    seed: int = 0
    data_root: str = "."
    # manifest score config (used only when creating a fresh manifest)
    score: str = "knn"
    k: int = 10
    normalize: bool = True
    tpr0: float = 0.95

    def effective_role(self) -> str:
        return self.role or self.split


@dataclass
class ExportResult:
    written: list[Path] = field(default_factory=list)
    errors: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors


def _export_one(job: ExportJob, name: str, out: Path) -> list[Path]:
    model = build_model(name, weights=job.weights, classes=job.classes).to(job.device)
    dataset = build_dataset(job.dataset, job.split, n=job.n, image_size=job.image_size,
                            classes=job.classes, seed=job.seed, data_root=job.data_root)
    loader = DataLoader(dataset, batch_size=job.batch_size, shuffle=False, num_workers=0)

    tap = FeatureTap(model)
    feature_chunks, logit_chunks = [], []
    try:
        for batch, _labels in loader:
            feats, logits = tap.run(batch.to(job.device))
            feature_chunks.append(feats.cpu().to(torch.float32).numpy())
            logit_chunks.append(logits.cpu().to(torch.float32).numpy())
    finally:
        tap.close()

    features = np.concatenate(feature_chunks, axis=0)
    logits = np.concatenate(logit_chunks, axis=0)
    role = job.effective_role()
    feature_file = f"{name}_{role}_features.zfm"
    logit_file = f"{name}_{role}_logits.zfm"
    write_zfm1(features, out / feature_file)
    write_zfm1(logits, out / logit_file)
    return [out / feature_file, out / logit_file]


def export(job: ExportJob) -> ExportResult:
    """Export every requested model; partial outputs are removed on failure.

    The bundle manifest in the output directory is created on first use
    and extended on later calls, so exporting the mandatory ``id_train``
    and ``id_val`` roles (plus any test splits) is a sequence of jobs
    against one directory.
    """
    out = Path(job.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = load_or_init_manifest(out, score=job.score, k=job.k,
                                normalize=job.normalize, tpr0=job.tpr0)
    result = ExportResult()
    for name in job.models:
        created: list[Path] = []
        try:
            created = _export_one(job, name, out)
            upsert_model_paths(doc, name, job.effective_role(),
                               created[0].name, created[1].name)
            result.written.extend(created)
        except Exception as exc:
            for p in created:
                p.unlink(missing_ok=True)
            result.errors[name] = str(exc)
    if result.written:
        result.written.append(save_manifest(doc, out))
    return result


@dataclass
class VerifyReport:
    lines: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def format(self) -> str:
        out = list(self.lines)
        out += [f"ERROR: {e}" for e in self.errors]
        out.append("bundle OK" if self.ok else "bundle INVALID")
        return "\n".join(out) + "\n"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def verify(out_dir: Path) -> VerifyReport:
    """Re-check an exported bundle: manifest, shapes, payloads, checksums."""
    out = Path(out_dir)
    report = VerifyReport()
    manifest_path = out / "manifest.json"
    if not manifest_path.is_file():
        report.errors.append(f"missing manifest: {manifest_path}")
        return report
    try:
        doc = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        report.errors.append(f"manifest unparsable: {exc}")
        return report
    models = doc.get("models")
    if not isinstance(models, list) or not models:
        report.errors.append("manifest has no models")
        return report

    for entry in models:
        name = entry.get("name", "<unnamed>")
        for family in ("feature_paths", "logit_paths"):
            cols_seen = None
            for role, rel in sorted(entry.get(family, {}).items()):
                path = out / rel
                if not path.is_file():
                    report.errors.append(f"{name}/{role}: missing file {path.name}")
                    continue
                try:
                    rows, cols = read_zfm1_header(path)
                    matrix = read_zfm1(path)
                except ValueError as exc:
                    report.errors.append(f"{name}/{role}: {exc}")
                    continue
                if not np.all(np.isfinite(matrix)):
                    report.errors.append(f"{name}/{role}: non-finite values in {path.name}")
                    continue
                if cols_seen is None:
                    cols_seen = cols
                elif cols != cols_seen:
                    report.errors.append(
                        f"{name}: {family} cols differ across roles ({cols_seen} vs {cols})")
                report.lines.append(
                    f"{name:<12} {role:<10} {family[:-6]:<8} {rows}x{cols}  sha256:{_sha256(path)}")
        roles = set(entry.get("feature_paths", {})) | set(entry.get("logit_paths", {}))
        for required in REQUIRED_ROLES:
            if required not in roles:
                report.errors.append(f"{name}: mandatory role {required!r} not exported yet")
    return report
