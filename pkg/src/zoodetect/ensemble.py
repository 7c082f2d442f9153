"""Combine per-model p-values into one ID/OOD decision.

The main scheme runs the Benjamini-Hochberg step-up procedure at level
alpha = 1 - tpr0: the sample is OOD iff some sorted p-value satisfies
p_(k) <= (k/m) * alpha.  For independent uniform p-values the rejection
event then has probability exactly alpha (Simes identity), which is what
keeps the ID true-positive rate at tpr0 regardless of the zoo size.

Three baselines for comparison: ``naive`` (any p < alpha), ``average``
(mean p < alpha), and ``voting`` (strict majority of p < alpha).  BH uses
<= at the threshold; the baselines use strict <.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyInput, PValueOutOfRange
from .pvalue import Label, PValueMatrix

SCHEMES = ("bh", "naive", "average", "voting")


@dataclass(frozen=True)
class EnsembleConfig:
    scheme: str = "bh"
    tpr0: float = 0.95

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not 0 < self.tpr0 < 1:
            raise ConfigError(f"tpr0 must lie in (0, 1), got {self.tpr0}")
        if self.tpr0 <= 0.5:
            warnings.warn(f"tpr0={self.tpr0} <= 0.5 is outside the regime the "
                          "TPR guarantee assumes", stacklevel=2)

    @property
    def alpha(self) -> float:
        return 1.0 - self.tpr0


@dataclass(frozen=True)
class Decision:
    """Outcome for one sample.

    ``k_reject`` is the size of the BH rejection set (the largest k whose
    sorted p-value passes; 0 for ID).  ``contributing_models`` holds the
    original column indices of the models behind the decision, which for
    BH are the k_reject smallest p-values (ties broken by lower index).
    """

    label: Label
    k_reject: int
    contributing_models: tuple[int, ...]
    sorted_pvalues: np.ndarray

    @property
    def is_ood(self) -> bool:
        return self.label is Label.OOD


def _check_pvalues(pvalues) -> np.ndarray:
    p = np.asarray(pvalues, dtype=np.float64).ravel()
    if p.size == 0:
        raise EmptyInput("p-value vector is empty")
    if not np.all((p >= 0.0) & (p <= 1.0)):
        raise PValueOutOfRange(f"p-values outside [0, 1]: min={p.min()}, max={p.max()}")
    return p


def bh_decide(pvalues, config: EnsembleConfig) -> Decision:
    """Benjamini-Hochberg step-up decision over one sample's p-values."""
    p = _check_pvalues(pvalues)
    m = p.size
    order = np.argsort(p, kind="stable")
    sorted_p = p[order]
    thresholds = (np.arange(1, m + 1) / m) * config.alpha
    passed = sorted_p <= thresholds
    if passed.any():
        k = m - int(np.argmax(passed[::-1]))
        return Decision(label=Label.OOD, k_reject=k,
                        contributing_models=tuple(int(i) for i in order[:k]),
                        sorted_pvalues=sorted_p)
    return Decision(label=Label.ID, k_reject=0, contributing_models=(),
                    sorted_pvalues=sorted_p)


def naive_decide(pvalues, config: EnsembleConfig) -> Decision:
    """OOD iff any single p-value falls below alpha (no multiplicity control)."""
    p = _check_pvalues(pvalues)
    sorted_p = np.sort(p)
    hits = np.flatnonzero(p < config.alpha)
    if hits.size:
        return Decision(label=Label.OOD, k_reject=int(hits.size),
                        contributing_models=tuple(int(i) for i in hits),
                        sorted_pvalues=sorted_p)
    return Decision(label=Label.ID, k_reject=0, contributing_models=(),
                    sorted_pvalues=sorted_p)


def average_decide(pvalues, config: EnsembleConfig) -> Decision:
    """OOD iff the mean p-value falls below alpha.

    The scheme has no per-model attribution; when it fires, every model is
    reported as contributing (a reporting convention, nothing deeper).
    """
    p = _check_pvalues(pvalues)
    sorted_p = np.sort(p)
    if p.mean() < config.alpha:
        return Decision(label=Label.OOD, k_reject=p.size,
                        contributing_models=tuple(range(p.size)),
                        sorted_pvalues=sorted_p)
    return Decision(label=Label.ID, k_reject=0, contributing_models=(),
                    sorted_pvalues=sorted_p)


def voting_decide(pvalues, config: EnsembleConfig) -> Decision:
    """OOD iff strictly more than half of the p-values fall below alpha."""
    p = _check_pvalues(pvalues)
    sorted_p = np.sort(p)
    votes = np.flatnonzero(p < config.alpha)
    if votes.size * 2 > p.size:
        return Decision(label=Label.OOD, k_reject=int(votes.size),
                        contributing_models=tuple(int(i) for i in votes),
                        sorted_pvalues=sorted_p)
    return Decision(label=Label.ID, k_reject=0, contributing_models=(),
                    sorted_pvalues=sorted_p)


_DECIDERS = {
    "bh": bh_decide,
    "naive": naive_decide,
    "average": average_decide,
    "voting": voting_decide,
}


def decide(pvalues, config: EnsembleConfig) -> Decision:
    return _DECIDERS[config.scheme](pvalues, config)


def decide_batch(pmat: PValueMatrix, config: EnsembleConfig) -> list[Decision]:
    """Row-wise decisions for a whole p-value matrix."""
    if pmat.n and pmat.m:
        _check_pvalues(pmat.values.ravel())
    decider = _DECIDERS[config.scheme]
    return [decider(row, config) for row in pmat.values]


def reject_statistics(pvalues_matrix: np.ndarray, scheme: str) -> tuple[np.ndarray, bool]:
    """Per-row scalar statistic q with: OOD at level alpha iff q <= alpha (or q < alpha).

    Returns (q, strict) where ``strict`` tells whether the comparison is
    strict.  This is the fast path behind level sweeps and the Monte Carlo
    harness; it gives decisions identical to the per-sample deciders:

    - bh:      q = min_k m * p_(k) / k           (OOD iff q <= alpha)
    - naive:   q = min p                         (OOD iff q <  alpha)
    - average: q = mean p                        (OOD iff q <  alpha)
    - voting:  q = (floor(m/2)+1)-th smallest p  (OOD iff q <  alpha)
    """
    p = np.asarray(pvalues_matrix, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("expected an (n, m) p-value matrix")
    m = p.shape[1]
    if m == 0:
        raise EmptyInput("p-value matrix has no columns")
    if scheme == "bh":
        sorted_p = np.sort(p, axis=1)
        q = (sorted_p * (m / np.arange(1, m + 1))).min(axis=1)
        return q, False
    if scheme == "naive":
        return p.min(axis=1), True
    if scheme == "average":
        return p.mean(axis=1), True
    if scheme == "voting":
        rank = m // 2  # 0-indexed position of the (floor(m/2)+1)-th smallest
        q = np.partition(p, rank, axis=1)[:, rank]
        return q, True
    raise ConfigError(f"unknown scheme {scheme!r}")


def ood_mask(pvalues_matrix: np.ndarray, scheme: str, alpha: float) -> np.ndarray:
    """Boolean OOD decision per row, via :func:`reject_statistics`."""
    q, strict = reject_statistics(pvalues_matrix, scheme)
    return (q < alpha) if strict else (q <= alpha)
