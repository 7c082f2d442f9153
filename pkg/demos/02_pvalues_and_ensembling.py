# From scores to p-values to one ensembled ID/OOD decision.
#
# The p-value of a test score is the fraction of ID validation scores at or
# below it, so ID test points get roughly uniform p-values and OOD points
# get small ones.  The Benjamini-Hochberg step-up rule combines one p-value
# per zoo model while keeping the ID acceptance rate at the target.

import numpy as np

from zoodetect import (
    EnsembleConfig,
    bh_decide,
    build_cdf,
    empirical_pvalue,
    explain_sample,
    naive_decide,
    threshold_at_tpr,
    threshold_decision,
)

rng = np.random.default_rng(1)

# --- one model: p-value vs hard threshold ----------------------------------
ref_scores = rng.normal(size=10_000)          # ID validation scores
cdf = build_cdf(ref_scores, model_name="demo")

for s in (-3.0, -1.0, 0.0, 2.0):
    print(f"score {s:+.1f} -> p-value {empirical_pvalue(cdf, s):.4f}")

lam = threshold_at_tpr(cdf, tpr0=0.9)
print(f"\nhard threshold at TPR 90%: {lam:.4f}")
for s in (lam - 0.01, lam, lam + 0.01):
    p = empirical_pvalue(cdf, s)
    print(f"score {s:+.4f}: p={p:.4f}  p-rule={'OOD' if p < 0.1 else 'ID '}"
          f"  threshold-rule={threshold_decision(s, lam).value}")

# --- many models: BH vs the naive union ------------------------------------
config = EnsembleConfig(scheme="bh", tpr0=0.95)
names = ["resnet_a", "resnet_b", "vit_c"]

# A sample only one model recognizes as OOD:
pvals = [0.002, 0.60, 0.35]
decision = bh_decide(pvals, config)
print("\nBH on", pvals, "->", decision.label.value, "k_reject =", decision.k_reject)
print(explain_sample(pvals, config, names).format())

# Borderline p-values that each miss their own BH threshold:
pvals = [0.03, 0.04, 0.9]
print("\nBH on", pvals, "->", bh_decide(pvals, config).label.value)
print("naive on", pvals, "->", naive_decide(pvals, config).label.value,
      " (no multiplicity control: any p < 0.05 fires)")
