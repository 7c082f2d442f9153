"""Empirical p-values against ID validation scores, and the hard-threshold view.

The p-value of a test score s under one model is the fraction of reference
(ID validation) scores that are <= s.  Ties count inclusively, so p = 0 is
possible (s below every reference score) and p = 1 is attained at the
maximum.  Low p-value = OOD-like.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import EmptyInput, ModelOrderMismatch, NonFiniteInput
from .scores import ScoreTable


class Label(str, Enum):
    ID = "ID"
    OOD = "OOD"


@dataclass(frozen=True)
class EmpiricalCdf:
    """Sorted ID validation scores for one model."""

    sorted_scores: np.ndarray
    model_name: str = ""

    @property
    def n_ref(self) -> int:
        return self.sorted_scores.shape[0]


def build_cdf(ref_scores, model_name: str = "") -> EmpiricalCdf:
    """Sort a reference score sample; result is independent of input order."""
    v = np.asarray(ref_scores, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptyInput("reference scores are empty")
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput("reference scores contain NaN/Inf")
    return EmpiricalCdf(sorted_scores=np.sort(v), model_name=model_name)


def empirical_pvalue(cdf: EmpiricalCdf, test_score: float,
                     conformal_smoothing: bool = False) -> float:
    """#{ref <= test_score} / n_ref, via binary search on the sorted reference.

    ``conformal_smoothing`` switches to (count+1)/(n_ref+1) for callers who
    need strictly positive p-values.
    """
    if not math.isfinite(test_score):
        raise NonFiniteInput(f"test score is not finite: {test_score}")
    count = int(np.searchsorted(cdf.sorted_scores, test_score, side="right"))
    if conformal_smoothing:
        return (count + 1) / (cdf.n_ref + 1)
    return count / cdf.n_ref


def pvalues_for_column(cdf: EmpiricalCdf, test_scores,
                       conformal_smoothing: bool = False) -> np.ndarray:
    """Vectorized :func:`empirical_pvalue` over a test score vector."""
    t = np.asarray(test_scores, dtype=np.float64)
    if not np.all(np.isfinite(t)):
        raise NonFiniteInput("test scores contain NaN/Inf")
    counts = np.searchsorted(cdf.sorted_scores, t, side="right")
    if conformal_smoothing:
        return (counts + 1) / (cdf.n_ref + 1)
    return counts / cdf.n_ref


@dataclass(frozen=True)
class PValueMatrix:
    """n x m matrix of p-values; column order matches the score tables."""

    values: np.ndarray
    model_names: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


def pvalue_matrix(ref: ScoreTable, test: ScoreTable,
                  conformal_smoothing: bool = False) -> PValueMatrix:
    """Stage-2 testing: p-value of every test score against its model's reference column."""
    if ref.model_names != test.model_names:
        raise ModelOrderMismatch(
            f"reference models {ref.model_names} != test models {test.model_names}")
    cols = []
    for j, name in enumerate(ref.model_names):
        cdf = build_cdf(ref.values[:, j], model_name=name)
        cols.append(pvalues_for_column(cdf, test.values[:, j], conformal_smoothing))
    values = np.column_stack(cols) if cols else np.empty((test.n, 0))
    return PValueMatrix(values=values, model_names=test.model_names)


@dataclass(frozen=True)
class ThresholdSet:
    """Per-model hard thresholds at one target level (the classic detector view)."""

    lambdas: np.ndarray
    tpr0: float

    @property
    def m(self) -> int:
        return self.lambdas.shape[0]


def thresholds_at_tpr(ref: ScoreTable, tpr0: float) -> ThresholdSet:
    """One hard threshold per zoo model from a reference score table."""
    lambdas = np.array([threshold_at_tpr(build_cdf(ref.values[:, j], name), tpr0)
                        for j, name in enumerate(ref.model_names)])
    return ThresholdSet(lambdas=lambdas, tpr0=tpr0)


def threshold_at_tpr(cdf: EmpiricalCdf, tpr0: float) -> float:
    """Hard threshold keeping at least a tpr0 fraction of the reference ID scores.

    Returns the floor((1-tpr0)*n_ref)-th ascending order statistic
    (1-indexed), or -inf when that index is 0.  With the inclusive decision
    rule (score >= threshold => ID) this keeps slightly more than tpr0 of
    the reference when ties sit at the threshold.

    The p-value rule ``p < 1-tpr0`` and this threshold classify non-tied
    scores identically whenever (1-tpr0)*n_ref is an integer; for other
    levels the two rules can differ on the single order-statistic gap at
    the boundary.
    """
    if not 0 < tpr0 < 1:
        raise ValueError(f"tpr0 must lie in (0, 1), got {tpr0}")
    # epsilon guard: 1-tpr0 in floats may land a hair under an exact decimal
    idx = math.floor((1.0 - tpr0) * cdf.n_ref + 1e-9)
    if idx < 1:
        return -math.inf
    return float(cdf.sorted_scores[idx - 1])


def threshold_decision(score: float, threshold: float) -> Label:
    """ID iff score >= threshold (boundary inclusive)."""
    if not math.isfinite(score):
        raise NonFiniteInput(f"score is not finite: {score}")
    return Label.ID if score >= threshold else Label.OOD
