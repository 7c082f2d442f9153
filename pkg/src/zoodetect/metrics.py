"""TPR/FPR/AUC evaluation and benchmark reports.

Positive = ID throughout: TPR is the fraction of ID samples kept, FPR the
fraction of OOD samples wrongly kept.  An ensembled detector emits binary
decisions rather than a scalar score, so its ROC is traced by sweeping the
target level tpr0 over a fixed grid and recording (FPR, TPR) at each
level; AUC is the trapezoidal area with (0,0) and (1,1) appended.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DivisionByZeroGuard, EmptyInput
from .ensemble import SCHEMES, Decision, EnsembleConfig, decide_batch, ood_mask, reject_statistics
from .ingest import ID_VAL, TEST_ID, ZooManifest
from .pvalue import Label, PValueMatrix, pvalue_matrix
from .scores import score_table

DEFAULT_GRID_STEP = 0.0005


@dataclass(frozen=True)
class DetectionCounts:
    """2x2 decision-vs-truth table (works per sample set or per hypothesis set).

    U: ID detected ID     V: ID detected OOD    (m0 = U + V ID total)
    T: OOD detected ID    S: OOD detected OOD   (m1 = T + S OOD total)
    k = V + S detections overall.
    """

    U: int
    V: int
    T: int
    S: int

    @property
    def m0(self) -> int:
        return self.U + self.V

    @property
    def m1(self) -> int:
        return self.T + self.S

    @property
    def k(self) -> int:
        return self.V + self.S


def _labels(decisions) -> list[Label]:
    out = []
    for d in decisions:
        out.append(d.label if isinstance(d, Decision) else Label(d))
    return out


def confusion(id_decisions, ood_decisions) -> DetectionCounts:
    """Count decisions against truth for an ID batch and an OOD batch."""
    id_labels = _labels(id_decisions)
    ood_labels = _labels(ood_decisions)
    if not id_labels or not ood_labels:
        raise EmptyInput("both decision vectors must be nonempty")
    u = sum(1 for l in id_labels if l is Label.ID)
    s = sum(1 for l in ood_labels if l is Label.OOD)
    return DetectionCounts(U=u, V=len(id_labels) - u, T=len(ood_labels) - s, S=s)


def tpr_fpr(c: DetectionCounts) -> tuple[float, float]:
    """(TPR, FPR) = (U/m0, T/m1)."""
    if c.m0 == 0 or c.m1 == 0:
        raise DivisionByZeroGuard(f"empty population: m0={c.m0}, m1={c.m1}")
    return c.U / c.m0, c.T / c.m1


@dataclass(frozen=True)
class AucGrid:
    step: float
    points: tuple[tuple[float, float, float], ...]  # (target_level, tpr, fpr)


def _as_matrix(pvals) -> np.ndarray:
    if isinstance(pvals, PValueMatrix):
        return pvals.values
    return np.asarray(pvals, dtype=np.float64)


def auc_sweep(id_pvals, ood_pvals, scheme: str = "bh",
              step: float = DEFAULT_GRID_STEP) -> tuple[float, AucGrid]:
    """Sweep the target level over {0, step, ..., 1} and integrate the ROC.

    With m = 1 this reduces to sweeping the score threshold over reference
    quantiles and closely matches the classic rank-statistic AUC.
    """
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}")
    if not 0 < step <= 1:
        raise ConfigError(f"step must lie in (0, 1], got {step}")
    n_steps = round(1.0 / step)
    if abs(n_steps * step - 1.0) > 1e-9:
        raise ConfigError(f"step {step} does not divide 1 evenly")

    id_m = _as_matrix(id_pvals)
    ood_m = _as_matrix(ood_pvals)
    if id_m.shape[1] != ood_m.shape[1]:
        raise ConfigError("id and ood p-value matrices disagree on model count")

    q_id, strict = reject_statistics(id_m, scheme)
    q_ood, _ = reject_statistics(ood_m, scheme)
    levels = np.linspace(0.0, 1.0, n_steps + 1)
    alphas = 1.0 - levels
    # kept (decided ID) iff NOT rejected at level alpha
    if strict:
        tpr = np.array([(q_id >= a).mean() for a in alphas])
        fpr = np.array([(q_ood >= a).mean() for a in alphas])
    else:
        tpr = np.array([(q_id > a).mean() for a in alphas])
        fpr = np.array([(q_ood > a).mean() for a in alphas])

    xs = np.concatenate(([0.0], fpr, [1.0]))
    ys = np.concatenate(([0.0], tpr, [1.0]))
    order = np.lexsort((ys, xs))
    auc = float(np.trapezoid(ys[order], xs[order]))
    grid = AucGrid(step=step, points=tuple(zip(levels.tolist(), tpr.tolist(), fpr.tolist())))
    return auc, grid


def rank_auc(id_scores, ood_scores) -> float:
    """Classic threshold-free AUC: P(id score > ood score) + 0.5 P(tie)."""
    a = np.asarray(id_scores, dtype=np.float64).ravel()
    b = np.asarray(ood_scores, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptyInput("both score samples must be nonempty")
    order = np.sort(b)
    greater = np.searchsorted(order, a, side="left")
    ties = np.searchsorted(order, a, side="right") - greater
    return float((greater.sum() + 0.5 * ties.sum()) / (a.size * b.size))


@dataclass(frozen=True)
class ReportRow:
    method: str
    dataset: str
    tpr: float   # percent
    fpr: float   # percent
    auc: float   # percent


@dataclass(frozen=True)
class DetectionReport:
    rows: tuple[ReportRow, ...]
    metadata: dict = field(default_factory=dict)

    def row(self, method: str, dataset: str) -> ReportRow:
        for r in self.rows:
            if r.method == method and r.dataset == dataset:
                return r
        raise KeyError((method, dataset))

    def to_csv(self) -> str:
        lines = ["method,dataset,tpr,fpr,auc"]
        for r in self.rows:
            lines.append(f"{r.method},{r.dataset},{_fmt(r.tpr)},{_fmt(r.fpr)},{_fmt(r.auc)}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "metadata": self.metadata,
            "rows": [
                {"method": r.method, "dataset": r.dataset,
                 "tpr": _quant(r.tpr), "fpr": _quant(r.fpr), "auc": _quant(r.auc)}
                for r in self.rows
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        header = f"{'method':<18} {'dataset':<14} {'TPR':>8} {'FPR':>8} {'AUC':>8}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            lines.append(f"{r.method:<18} {r.dataset:<14} {_fmt(r.tpr):>8} "
                         f"{_fmt(r.fpr):>8} {_fmt(r.auc):>8}")
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return format(x, ".6g")


def _quant(x: float) -> float:
    return float(_fmt(x))


def manifest_hash(manifest: ZooManifest) -> str:
    if manifest.path is None:
        return ""
    return hashlib.sha256(Path(manifest.path).read_bytes()).hexdigest()


def bench(manifest: ZooManifest, schemes=("bh",), tpr0: float | None = None,
          ood_splits=None, step: float = DEFAULT_GRID_STEP,
          seed: int | None = None) -> DetectionReport:
    """Full pipeline over a manifest: scores, p-values, decisions, report.

    The reference distribution comes from the ``id_val`` split; ``test_id``
    supplies the TPR estimate.  Each configured scheme gets one row per OOD
    split plus an unweighted Average row.
    """
    for s in schemes:
        if s not in SCHEMES:
            raise ConfigError(f"unknown scheme {s!r}; expected one of {SCHEMES}")
    tpr0 = manifest.tpr0 if tpr0 is None else tpr0
    if not 0 < tpr0 < 1:
        raise ConfigError(f"tpr0 must lie in (0, 1), got {tpr0}")
    if ood_splits is None:
        ood_splits = manifest.ood_splits()
    available = set(manifest.splits())
    for s in ood_splits:
        if s not in available:
            raise ConfigError(f"unknown OOD split {s!r}; manifest has {sorted(available)}")
    if TEST_ID not in available:
        raise ConfigError(f"manifest needs a {TEST_ID!r} split to estimate TPR")

    ref = score_table(manifest, ID_VAL)
    id_pvals = pvalue_matrix(ref, score_table(manifest, TEST_ID))
    ood_pvals = {name: pvalue_matrix(ref, score_table(manifest, name)) for name in ood_splits}

    alpha = 1.0 - tpr0
    rows: list[ReportRow] = []
    for scheme in schemes:
        id_kept = ~ood_mask(id_pvals.values, scheme, alpha)
        tpr = float(id_kept.mean()) * 100.0
        fprs, aucs = [], []
        for name in ood_splits:
            ood_kept = ~ood_mask(ood_pvals[name].values, scheme, alpha)
            fpr = float(ood_kept.mean()) * 100.0
            auc, _ = auc_sweep(id_pvals, ood_pvals[name], scheme, step)
            rows.append(ReportRow(method=scheme, dataset=name, tpr=tpr, fpr=fpr, auc=auc * 100.0))
            fprs.append(fpr)
            aucs.append(auc * 100.0)
        if fprs:
            rows.append(ReportRow(method=scheme, dataset="Average", tpr=tpr,
                                  fpr=float(np.mean(fprs)), auc=float(np.mean(aucs))))

    metadata = {
        "manifest_sha256": manifest_hash(manifest),
        "schemes": list(schemes),
        "tpr0": _quant(tpr0),
        "grid_step": step,
        "ood_splits": list(ood_splits),
        "seed": seed,
    }
    return DetectionReport(rows=tuple(rows), metadata=metadata)
