# Walk through the four detection scores on tiny synthetic data.
# Higher score = more ID-like, for every score kind.

import numpy as np

from zoodetect import (
    energy_score,
    fit_mahalanobis,
    knn_score,
    mahalanobis_score,
    msp_score,
)

rng = np.random.default_rng(0)

# --- logit-based scores ---------------------------------------------------
confident = np.array([9.0, 0.5, 0.3])   # classifier is sure: looks ID
flat = np.array([0.4, 0.5, 0.3])        # classifier is lost: looks OOD

print("MSP  confident:", round(msp_score(confident), 4), " flat:", round(msp_score(flat), 4))
print("Energy confident:", round(energy_score(confident), 4),
      " flat:", round(energy_score(flat), 4))

# A huge logit does not overflow the softmax
print("MSP with logit 1000:", msp_score([1000.0, 0.0]))

# --- feature-based scores -------------------------------------------------
# Two Gaussian classes in 2-D; fit per-class means + shared covariance.
features = np.concatenate([
    rng.normal(loc=(-2, 0), scale=0.5, size=(100, 2)),
    rng.normal(loc=(+2, 0), scale=0.5, size=(100, 2)),
])
labels = np.repeat([0, 1], 100)
gaussian_fit = fit_mahalanobis(features, labels)

near = np.array([-2.1, 0.1])   # sits inside class 0
far = np.array([0.0, 6.0])     # far from both classes
print("Mahalanobis near:", round(mahalanobis_score(gaussian_fit, near), 2),
      " far:", round(mahalanobis_score(gaussian_fit, far), 2))

# KNN: negative distance to the k-th nearest training point.
print("KNN near:", round(knn_score(near, features, k=5, normalize=False), 3),
      " far:", round(knn_score(far, features, k=5, normalize=False), 3))

# The classic 3-4-5 triangle, k-th neighbor rank spelled out:
bank = np.array([[0.0, 0.0], [1.0, 0.0], [4.0, 0.0]])
for k in (1, 2, 3):
    print(f"k={k} from origin over {{(0,0),(1,0),(4,0)}}:",
          knn_score([0.0, 0.0], bank, k=k, normalize=False))
