"""Per-model detection scores: MSP, energy, Mahalanobis, and KNN.

All scores share one orientation: higher means more ID-like.  The energy
score is therefore the negated energy ``T * logsumexp(logits / T)``, and
the distance scores are negated distances.

Scalar functions (`msp_score`, `energy_score`, ...) implement the
per-sample contracts; the ``*_scores`` variants are the vectorized forms
used by :func:`score_table` and the simulation harness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING
import warnings

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from .errors import (
    ConfigError,
    DimMismatch,
    EmptyClass,
    EmptyVector,
    KTooLarge,
    LabelOutOfRange,
    MissingInput,
    NonFiniteInput,
    SingularCovariance,
    ZeroNormVector,
)

if TYPE_CHECKING:  # pragma: no cover
    from .ingest import ZooManifest

SCORE_KINDS = ("msp", "energy", "mahalanobis", "knn")

# Element budget for one block of the (queries x bank x dim) difference
# tensor. Bounds memory only; the value never affects results.
_KNN_BLOCK_ELEMS = 1 << 22


@dataclass(frozen=True)
class ScoreConfig:
    """How to turn one model's outputs into a detection score."""

    kind: str = "knn"
    k: int = 50
    temperature: float = 1.0
    normalize: bool = True
    cov_ridge: float = 1e-6

    def __post_init__(self):
        if self.kind not in SCORE_KINDS:
            raise ConfigError(f"unknown score kind {self.kind!r}; expected one of {SCORE_KINDS}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be > 0, got {self.temperature}")
        if self.cov_ridge < 0:
            raise ConfigError(f"cov_ridge must be >= 0, got {self.cov_ridge}")

    def describe(self) -> str:
        if self.kind == "msp":
            return "msp"
        if self.kind == "energy":
            return f"energy(T={self.temperature:g})"
        if self.kind == "mahalanobis":
            return f"mahalanobis(ridge={self.cov_ridge:g})"
        return f"knn(k={self.k}, normalize={self.normalize})"


@dataclass(frozen=True)
class MahalanobisModel:
    """Per-class means plus the inverse of the ridge-regularized shared covariance."""

    class_means: np.ndarray    # (C, d)
    precision: np.ndarray      # (d, d)
    class_count: int

    @property
    def dim(self) -> int:
        return self.class_means.shape[1]


@dataclass(frozen=True)
class ScoreTable:
    """n x m matrix of scores; column j belongs to ``model_names[j]``."""

    values: np.ndarray                    # (n, m) float64
    model_names: tuple[str, ...]
    configs: tuple[ScoreConfig, ...]
    split: str = ""

    def __post_init__(self):
        if self.values.ndim != 2:
            raise DimMismatch("score table must be 2-D")
        if self.values.shape[1] != len(self.model_names):
            raise DimMismatch("one name per column required")
        if len(self.configs) != len(self.model_names):
            raise DimMismatch("one score config per column required")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


def _check_logits(logits) -> np.ndarray:
    v = np.asarray(logits, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise EmptyVector("logits must be a nonempty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput("logits contain NaN/Inf")
    return v


def msp_score(logits) -> float:
    """Maximum softmax probability, computed with the subtract-max trick.

    Stays in (0, 1] even for logits of magnitude ~1e3.
    """
    v = _check_logits(logits)
    shifted = v - v.max()
    e = np.exp(shifted)
    return float(e.max() / e.sum())


def msp_scores(logit_rows: np.ndarray) -> np.ndarray:
    """Row-wise :func:`msp_score` over an (n, C) logit matrix."""
    v = np.asarray(logit_rows, dtype=np.float64)
    shifted = v - v.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e.max(axis=1) / e.sum(axis=1)


def energy_score(logits, temperature: float = 1.0) -> float:
    """Negated energy ``T * log(sum(exp(logits / T)))``; higher = more ID-like."""
    v = _check_logits(logits)
    if not temperature > 0:
        raise ConfigError(f"temperature must be > 0, got {temperature}")
    return float(temperature * logsumexp(v / temperature))


def energy_scores(logit_rows: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    v = np.asarray(logit_rows, dtype=np.float64)
    return temperature * logsumexp(v / temperature, axis=1)


def fit_mahalanobis(features, labels, class_count: int | None = None,
                    cov_ridge: float = 1e-6) -> MahalanobisModel:
    """Fit per-class means and a shared (pooled / n) covariance with a ridge.

    The covariance is the pooled within-class scatter divided by the total
    sample count n, plus ``cov_ridge * I``.  Warns when n <= d, where the
    scatter matrix is rank deficient and only the ridge keeps it invertible.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or x.size == 0:
        raise EmptyVector("features must be a nonempty 2-D matrix")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("features contain NaN/Inf")
    n, d = x.shape
    if y.shape != (n,):
        raise DimMismatch(f"labels must have shape ({n},), got {y.shape}")
    c = int(class_count) if class_count is not None else int(y.max()) + 1
    if y.min() < 0 or y.max() >= c:
        raise LabelOutOfRange(f"labels must lie in [0, {c}), got range [{y.min()}, {y.max()}]")
    if n <= d:
        warnings.warn(
            f"fitting a {d}-dim covariance from only {n} samples; "
            "the estimate relies on the ridge", stacklevel=2)

    means = np.empty((c, d))
    scatter = np.zeros((d, d))
    for cls in range(c):
        rows = x[y == cls]
        if rows.shape[0] == 0:
            raise EmptyClass(f"class {cls} has no samples")
        mu = rows.mean(axis=0)
        means[cls] = mu
        centered = rows - mu
        scatter += centered.T @ centered
    cov = scatter / n + cov_ridge * np.eye(d)

    try:
        chol = scipy.linalg.cho_factor(cov, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SingularCovariance(f"shared covariance is not positive definite: {exc}") from exc
    precision = scipy.linalg.cho_solve(chol, np.eye(d))
    precision = (precision + precision.T) / 2.0
    return MahalanobisModel(class_means=means, precision=precision, class_count=c)


def mahalanobis_score(model: MahalanobisModel, feature) -> float:
    """Negative squared Mahalanobis distance to the nearest class mean."""
    z = np.asarray(feature, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] != model.dim:
        raise DimMismatch(f"feature must have shape ({model.dim},), got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise NonFiniteInput("feature contains NaN/Inf")
    return float(mahalanobis_scores(model, z[None, :])[0])


def mahalanobis_scores(model: MahalanobisModel, features: np.ndarray) -> np.ndarray:
    """Row-wise :func:`mahalanobis_score` over an (n, d) matrix."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise DimMismatch(f"features must be (n, {model.dim}), got {x.shape}")
    best = np.full(x.shape[0], np.inf)
    for mu in model.class_means:
        diff = x - mu
        d2 = np.einsum("ij,jk,ik->i", diff, model.precision, diff)
        np.minimum(best, d2, out=best)
    return -best


def _l2_normalize(rows: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ZeroNormVector(f"cannot normalize zero-norm {what}")
    return rows / norms


def knn_score(query, bank, k: int, normalize: bool = True) -> float:
    """Negative Euclidean distance from the query to its k-th nearest bank row.

    Ties are resolved by the k-th order statistic of the full distance
    multiset, so the result matches a brute-force sort exactly.
    """
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1:
        raise DimMismatch("query must be a 1-D vector")
    return float(knn_scores(q[None, :], bank, k, normalize)[0])


def knn_scores(queries: np.ndarray, bank, k: int, normalize: bool = True) -> np.ndarray:
    """Row-wise :func:`knn_score`, evaluated blockwise against the bank."""
    q = np.asarray(queries, dtype=np.float64)
    b = np.asarray(bank, dtype=np.float64)
    if b.ndim != 2 or q.ndim != 2:
        raise DimMismatch("queries and bank must be 2-D")
    if q.shape[1] != b.shape[1]:
        raise DimMismatch(f"dimension mismatch: queries d={q.shape[1]}, bank d={b.shape[1]}")
    if k < 1 or k > b.shape[0]:
        raise KTooLarge(f"k={k} with only {b.shape[0]} bank rows")
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(b))):
        raise NonFiniteInput("queries/bank contain NaN/Inf")
    if normalize:
        q = _l2_normalize(q, "query")
        b = _l2_normalize(b, "bank row")

    n, d = b.shape
    out = np.empty(q.shape[0])
    # direct differences (not the |q|^2 - 2q.b + |b|^2 expansion): matches a
    # brute-force distance computation bit-for-bit, which the oracle checks
    block = max(1, _KNN_BLOCK_ELEMS // (n * d))
    for start in range(0, q.shape[0], block):
        chunk = q[start:start + block]
        d2 = ((chunk[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        if k < n:
            kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
        else:
            kth = d2.max(axis=1)
        out[start:start + block] = -np.sqrt(kth)
    return out


def _effective_labels(manifest: "ZooManifest", name: str) -> np.ndarray | None:
    """Training labels for per-class Mahalanobis fitting.

    The manifest carries no label files; when id_train logits exist their
    argmax stands in for class labels, otherwise the fit collapses to a
    single class (distance to the ID centroid).
    """
    if manifest.has_logits(name, "id_train"):
        return np.argmax(manifest.logits(name, "id_train"), axis=1)
    return None


def score_column(manifest: "ZooManifest", name: str, split: str) -> np.ndarray:
    """Scores for one model on one split, per the model's effective config."""
    cfg = manifest.effective_config(name)
    if cfg.kind in ("msp", "energy"):
        if not manifest.has_logits(name, split):
            raise MissingInput(f"model {name!r} needs logits for split {split!r} to compute {cfg.kind}")
        logits = manifest.logits(name, split)
        if cfg.kind == "msp":
            return msp_scores(logits)
        return energy_scores(logits, cfg.temperature)

    if not manifest.has_features(name, split):
        raise MissingInput(f"model {name!r} needs features for split {split!r} to compute {cfg.kind}")
    feats = manifest.features(name, split)
    if cfg.kind == "knn":
        if not manifest.has_features(name, "id_train"):
            raise MissingInput(f"model {name!r} needs id_train features as the KNN bank")
        bank = manifest.features(name, "id_train")
        return knn_scores(feats, bank, cfg.k, cfg.normalize)

    # mahalanobis
    if not manifest.has_features(name, "id_train"):
        raise MissingInput(f"model {name!r} needs id_train features to fit mahalanobis")
    train = manifest.features(name, "id_train")
    labels = _effective_labels(manifest, name)
    if labels is None:
        labels = np.zeros(train.shape[0], dtype=np.int64)
    model = fit_mahalanobis(train, labels, cov_ridge=cfg.cov_ridge)
    return mahalanobis_scores(model, feats)


def score_table(manifest: "ZooManifest", split: str) -> ScoreTable:
    """Stage-1 inference: score every sample of a split under every zoo model."""
    names = manifest.model_names()
    cols = [score_column(manifest, name, split) for name in names]
    lengths = {c.shape[0] for c in cols}
    if len(lengths) > 1:
        raise DimMismatch(f"models disagree on row count for split {split!r}: {sorted(lengths)}")
    values = np.column_stack(cols) if cols else np.empty((0, 0))
    configs = tuple(manifest.effective_config(name) for name in names)
    return ScoreTable(values=values, model_names=tuple(names), configs=configs, split=split)
