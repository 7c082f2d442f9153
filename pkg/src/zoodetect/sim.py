"""Monte Carlo verification harness and the synthetic complementary-zoo benchmark.

Three checks anchor the statistical claims the ensembling relies on:

- ID samples with independent detectors yield independent uniform
  p-values, so the BH rejection event has probability exactly alpha
  (Simes identity) while the naive any-detector rule collapses to
  1 - (1-alpha)^m.  `simulate_id_uniform` measures both.
- Against a mixture alternative (a fixed fraction pi of "active" models
  whose p-values concentrate near 0), BH keeps the false discovery rate
  at or below (1-pi) * alpha and detects with probability growing in m.
  `simulate_mixture` measures this.
- A zoo of deliberately complementary models (each sees only a subset of
  feature axes) beats every one of its members on pooled OOD data while
  holding TPR at the target.  `synth_benchmark` builds that scenario from
  Gaussian clusters and runs the full score -> p-value -> BH pipeline.

All randomness flows from one seed through numpy SeedSequence sub-streams,
spawned per fixed-size trial block, so results are reproducible and
independent of how blocks are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ensemble import SCHEMES, EnsembleConfig, decide, ood_mask
from .errors import ConfigError
from .metrics import AucGrid, DetectionCounts, DetectionReport, ReportRow, auc_sweep
from .pvalue import Label, build_cdf, pvalues_for_column, threshold_at_tpr
from .scores import knn_scores

_BLOCK = 1 << 15  # trials per RNG sub-stream; fixed so results never depend on scheduling


def _block_rngs(seed: int, trials: int):
    n_blocks = (trials + _BLOCK - 1) // _BLOCK
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    sizes = [_BLOCK] * (n_blocks - 1) + [trials - _BLOCK * (n_blocks - 1)]
    for child, size in zip(children, sizes):
        yield np.random.default_rng(child), size


@dataclass(frozen=True)
class IdUniformSimConfig:
    m: int = 7
    tpr0: float = 0.95
    trials: int = 1_000_000
    seed: int = 0
    schemes: tuple[str, ...] = SCHEMES

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not 0 < self.tpr0 < 1:
            raise ConfigError(f"tpr0 must lie in (0, 1), got {self.tpr0}")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}")


@dataclass(frozen=True)
class TprEstimate:
    scheme: str
    tpr: float
    stderr: float
    trials: int


def simulate_id_uniform(cfg: IdUniformSimConfig) -> dict[str, TprEstimate]:
    """Acceptance rate of each scheme on i.i.d. uniform p-values (the ID null).

    Every scheme sees the same draws, so cross-scheme comparisons are paired.
    """
    alpha = 1.0 - cfg.tpr0
    rejected = {s: 0 for s in cfg.schemes}
    for rng, size in _block_rngs(cfg.seed, cfg.trials):
        pvals = rng.random((size, cfg.m))
        for s in cfg.schemes:
            rejected[s] += int(ood_mask(pvals, s, alpha).sum())
    out = {}
    for s in cfg.schemes:
        tpr = 1.0 - rejected[s] / cfg.trials
        se = math.sqrt(max(tpr * (1.0 - tpr), 0.0) / cfg.trials)
        out[s] = TprEstimate(scheme=s, tpr=tpr, stderr=se, trials=cfg.trials)
    return out


@dataclass(frozen=True)
class MixtureSimConfig:
    m: int = 100
    pi: float = 0.2
    g_shape: float = 0.1
    alpha: float = 0.05
    trials: int = 100_000
    seed: int = 0
    keep_counts: bool = False

    def __post_init__(self):
        if not 0 < self.pi <= 1:
            raise ConfigError(f"pi must lie in (0, 1], got {self.pi}")
        if self.g_shape <= 0:
            raise ConfigError(f"g_shape must be > 0, got {self.g_shape}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.m < 1 or self.trials < 1:
            raise ConfigError("m and trials must be >= 1")

    @property
    def n_active(self) -> int:
        return int(round(self.pi * self.m))


@dataclass(frozen=True)
class PowerStats:
    """Aggregates over trials of the per-trial hypothesis contingency table."""

    mean_tpr_like: float       # E[S / m1]; 0 when no model is active
    fdr: float                 # E[V / max(k, 1)]
    rejection_fraction: float  # E[k / m]
    detection_rate: float      # P(S >= 1)
    fdr_stderr: float
    detection_rate_stderr: float
    trials: int
    counts: tuple[DetectionCounts, ...] | None = None


def simulate_mixture(cfg: MixtureSimConfig) -> PowerStats:
    """BH behaviour when a fixed fraction of models separates the OOD source.

    Per trial: round(pi*m) "active" p-values drawn Beta(g_shape, 1) (CDF
    u^g_shape, concentrating near 0 for g_shape < 1) and the rest uniform;
    BH runs at level alpha and the rejections are tallied against truth.
    """
    m, a = cfg.m, cfg.n_active
    thresholds = (np.arange(1, m + 1) / m) * cfg.alpha
    is_null = np.concatenate([np.zeros(a, dtype=bool), np.ones(m - a, dtype=bool)])

    sum_s_frac = 0.0
    sum_fdr = 0.0
    sum_fdr_sq = 0.0
    sum_k = 0.0
    detections = 0
    kept: list[DetectionCounts] = []

    for rng, size in _block_rngs(cfg.seed, cfg.trials):
        active = rng.beta(cfg.g_shape, 1.0, size=(size, a)) if a else np.empty((size, 0))
        nulls = rng.random((size, m - a)) if m - a else np.empty((size, 0))
        pvals = np.concatenate([active, nulls], axis=1)

        order = np.argsort(pvals, axis=1, kind="stable")
        sorted_p = np.take_along_axis(pvals, order, axis=1)
        passed = sorted_p <= thresholds
        any_pass = passed.any(axis=1)
        k = np.where(any_pass, m - np.argmax(passed[:, ::-1], axis=1), 0)

        null_rank = np.cumsum(is_null[order], axis=1)
        v = np.where(k >= 1,
                     np.take_along_axis(null_rank, np.maximum(k - 1, 0)[:, None], axis=1)[:, 0],
                     0)
        s = k - v

        per_trial_fdr = v / np.maximum(k, 1)
        sum_fdr += float(per_trial_fdr.sum())
        sum_fdr_sq += float((per_trial_fdr ** 2).sum())
        sum_k += float(k.sum())
        detections += int((s >= 1).sum())
        if a:
            sum_s_frac += float((s / a).sum())
        if cfg.keep_counts:
            kept.extend(DetectionCounts(U=int(m - a - vi), V=int(vi),
                                        T=int(a - si), S=int(si))
                        for vi, si in zip(v, s))

    t = cfg.trials
    fdr = sum_fdr / t
    det = detections / t
    fdr_var = max(sum_fdr_sq / t - fdr ** 2, 0.0)
    return PowerStats(
        mean_tpr_like=(sum_s_frac / t) if a else 0.0,
        fdr=fdr,
        rejection_fraction=sum_k / (t * m),
        detection_rate=det,
        fdr_stderr=math.sqrt(fdr_var / t),
        detection_rate_stderr=math.sqrt(max(det * (1.0 - det), 0.0) / t),
        trials=t,
        counts=tuple(kept) if cfg.keep_counts else None,
    )


@dataclass(frozen=True)
class SynthBenchConfig:
    """Gaussian ID cluster plus OOD clusters, viewed through per-model axis subsets.

    Defaults give two models and two OOD clusters where each model's view
    separates exactly one cluster and is blind to the other.
    """

    dim: int = 4
    n_train: int = 2000
    n_val: int = 10_000
    n_test_id: int = 10_000
    n_test_ood: int = 2000
    id_scale: float = 1.0
    ood_means: tuple[tuple[float, ...], ...] = ((3.0, 3.0, 0.0, 0.0), (0.0, 0.0, 3.0, 3.0))
    ood_scales: tuple[float, ...] = (1.0, 1.0)
    projections: tuple[tuple[int, ...], ...] = ((0, 1), (2, 3))
    k: int = 10
    tpr0: float = 0.95
    seed: int = 0
    grid_step: float = 0.02

    def __post_init__(self):
        if len(self.ood_means) != len(self.ood_scales):
            raise ConfigError("one scale per OOD cluster required")
        for mean in self.ood_means:
            if len(mean) != self.dim:
                raise ConfigError(f"cluster mean {mean} does not have dim={self.dim}")
        for axes in self.projections:
            if not axes or max(axes) >= self.dim or min(axes) < 0:
                raise ConfigError(f"projection axes {axes} out of range for dim={self.dim}")
        if self.k < 1 or self.k > self.n_train:
            raise ConfigError(f"k={self.k} incompatible with n_train={self.n_train}")
        if not 0 < self.tpr0 < 1:
            raise ConfigError(f"tpr0 must lie in (0, 1), got {self.tpr0}")

    @property
    def model_names(self) -> tuple[str, ...]:
        return tuple(f"view{''.join(map(str, axes))}" for axes in self.projections)

    @property
    def cluster_names(self) -> tuple[str, ...]:
        return tuple(f"cluster{i}" for i in range(len(self.ood_means)))


def synth_benchmark(cfg: SynthBenchConfig) -> DetectionReport:
    """Run the full pipeline on the synthetic zoo and report BH vs each single model.

    Single-model rows use the classic hard threshold at tpr0 on that
    model's scores; the ``pooled`` dataset concatenates all OOD clusters.
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    train = rng.normal(0.0, cfg.id_scale, (cfg.n_train, cfg.dim))
    val = rng.normal(0.0, cfg.id_scale, (cfg.n_val, cfg.dim))
    test_id = rng.normal(0.0, cfg.id_scale, (cfg.n_test_id, cfg.dim))
    clusters = [
        rng.normal(0.0, scale, (cfg.n_test_ood, cfg.dim)) + np.asarray(mean)
        for mean, scale in zip(cfg.ood_means, cfg.ood_scales)
    ]

    def model_scores(x: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
        return knn_scores(x[:, axes], train[:, axes], cfg.k, normalize=False)

    ref_cols, id_cols, ood_cols = [], [], {name: [] for name in cfg.cluster_names}
    for axes in cfg.projections:
        ref_cols.append(model_scores(val, axes))
        id_cols.append(model_scores(test_id, axes))
        for name, cluster in zip(cfg.cluster_names, clusters):
            ood_cols[name].append(model_scores(cluster, axes))

    cdfs = [build_cdf(col) for col in ref_cols]
    id_p = np.column_stack([pvalues_for_column(c, col) for c, col in zip(cdfs, id_cols)])
    ood_p = {name: np.column_stack([pvalues_for_column(c, col)
                                    for c, col in zip(cdfs, ood_cols[name])])
             for name in cfg.cluster_names}
    pooled_p = np.concatenate([ood_p[name] for name in cfg.cluster_names], axis=0)
    datasets = list(cfg.cluster_names) + ["pooled"]
    ood_by_dataset = dict(ood_p, pooled=pooled_p)

    alpha = 1.0 - cfg.tpr0
    rows: list[ReportRow] = []

    bh_tpr = float((~ood_mask(id_p, "bh", alpha)).mean()) * 100.0
    for name in datasets:
        kept = float((~ood_mask(ood_by_dataset[name], "bh", alpha)).mean()) * 100.0
        auc, _ = auc_sweep(id_p, ood_by_dataset[name], "bh", cfg.grid_step)
        rows.append(ReportRow(method="bh", dataset=name, tpr=bh_tpr, fpr=kept, auc=auc * 100.0))

    for j, model in enumerate(cfg.model_names):
        lam = threshold_at_tpr(cdfs[j], cfg.tpr0)
        tpr = float((id_cols[j] >= lam).mean()) * 100.0
        for name in datasets:
            if name == "pooled":
                col = np.concatenate([ood_cols[c][j] for c in cfg.cluster_names])
            else:
                col = ood_cols[name][j]
            fpr = float((col >= lam).mean()) * 100.0
            auc, _ = auc_sweep(id_p[:, [j]], ood_by_dataset[name][:, [j]], "bh", cfg.grid_step)
            rows.append(ReportRow(method=model, dataset=name, tpr=tpr, fpr=fpr, auc=auc * 100.0))

    metadata = {
        "seed": cfg.seed,
        "tpr0": cfg.tpr0,
        "k": cfg.k,
        "n_train": cfg.n_train,
        "n_val": cfg.n_val,
        "n_test_id": cfg.n_test_id,
        "n_test_ood": cfg.n_test_ood,
        "models": list(cfg.model_names),
        "clusters": list(cfg.cluster_names),
    }
    return DetectionReport(rows=tuple(rows), metadata=metadata)


@dataclass(frozen=True)
class Attribution:
    """Which models drove one sample's decision."""

    label: Label
    k_reject: int
    contributing: tuple[str, ...]
    solo_detector: bool

    def format(self) -> str:
        if self.label is Label.ID:
            return "ID, no contributors"
        names = ", ".join(self.contributing)
        solo = " [solo-detector]" if self.solo_detector else ""
        return f"OOD via {self.k_reject} model(s): {names}{solo}"


def explain_sample(pvalues, config: EnsembleConfig, model_names) -> Attribution:
    """Decision plus named contributing models for one p-value row.

    The solo-detector flag marks OOD decisions carried by exactly one
    model, the interesting case when zoo members complement each other.
    """
    names = tuple(model_names)
    d = decide(pvalues, config)
    if len(names) != d.sorted_pvalues.size:
        raise ConfigError(f"{d.sorted_pvalues.size} p-values but {len(names)} model names")
    contributing = tuple(names[i] for i in d.contributing_models)
    return Attribution(label=d.label, k_reject=d.k_reject,
                       contributing=contributing,
                       solo_detector=(d.label is Label.OOD and d.k_reject == 1))
