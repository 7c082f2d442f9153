# The on-disk side: ZFM1 matrix files, a zoo manifest, and the benchmark
# pipeline run from those files (what the `zoodetect` CLI wraps).
#
# Run from anywhere; writes into ./demo_bundle.

import json
from pathlib import Path

import numpy as np

from zoodetect import bench, load_manifest, read_matrix, validate_bundle, write_matrix

out = Path("demo_bundle")
out.mkdir(exist_ok=True)

rng = np.random.default_rng(3)
dim = 4

# One shared feature space; each model sees two of the four axes.
train = rng.normal(size=(500, dim))
val = rng.normal(size=(3000, dim))
test_id = rng.normal(size=(1000, dim))
ood = rng.normal(size=(600, dim))
ood[:300, :2] += 3.5   # cluster visible to viewA
ood[300:, 2:] += 3.5   # cluster visible to viewB

models = []
for name, axes in (("viewA", (0, 1)), ("viewB", (2, 3))):
    for split, arr in (("id_train", train), ("id_val", val),
                       ("test_id", test_id), ("far_clusters", ood)):
        write_matrix(arr[:, axes].astype(np.float32), out / f"{name}_{split}.zfm")
    models.append({"name": name,
                   "feature_paths": {s: f"{name}_{s}.zfm"
                                     for s in ("id_train", "id_val", "test_id", "far_clusters")}})

manifest_path = out / "manifest.json"
manifest_path.write_text(json.dumps(
    {"score": "knn", "k": 5, "normalize": False, "tpr0": 0.95, "models": models}, indent=2))

# Round-trip sanity: ZFM1 files read back bit-exactly.
back = read_matrix(out / "viewA_id_train.zfm")
assert back.tobytes() == train[:, (0, 1)].astype(np.float32).tobytes()
print(f"wrote {len(models) * 4} ZFM1 files; viewA id_train reads back as {back.shape}")

manifest = load_manifest(manifest_path)
summary = validate_bundle(manifest)
for s in summary.models:
    print(f"model {s.name}: n_train={s.n_train} n_val={s.n_val} d={s.dim} ready={s.ready}")

report = bench(manifest, schemes=("bh", "naive"), step=0.01)
print()
print(report.to_text())
print("equivalent CLI:")
print(f"  zoodetect bench --manifest {manifest_path} --schemes bh,naive --report report.csv")
print(f"  zoodetect explain --manifest {manifest_path} --ood far_clusters --index 0")
