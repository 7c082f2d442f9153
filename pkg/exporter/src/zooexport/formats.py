"""Bundle formats the detection toolkit ingests: ZFM1 matrices + manifest JSON.

Implemented against the published format contract (21-byte little-endian
header, float32 row-major payload; strict-schema manifest), not against the
toolkit's code: the files are the interface.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"ZFM1"
DTYPE_FLOAT32 = 0x01
HEADER_LEN = 21


def write_zfm1(matrix: np.ndarray, path: Path) -> None:
    """Write a 2-D array as ZFM1, casting to float32 at write time."""
    m = np.ascontiguousarray(np.asarray(matrix, dtype="<f4"))
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"matrix must be 2-D with positive dims, got {m.shape}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BQQ", DTYPE_FLOAT32, m.shape[0], m.shape[1]))
        fh.write(m.tobytes(order="C"))


def read_zfm1_header(path: Path) -> tuple[int, int]:
    """(rows, cols) from a ZFM1 header; raises ValueError on malformed files."""
    with open(path, "rb") as fh:
        header = fh.read(HEADER_LEN)
    if len(header) < HEADER_LEN or header[:4] != MAGIC:
        raise ValueError(f"{path}: not a ZFM1 file")
    code, rows, cols = struct.unpack("<BQQ", header[4:])
    if code != DTYPE_FLOAT32:
        raise ValueError(f"{path}: unsupported dtype code 0x{code:02x}")
    return int(rows), int(cols)


def read_zfm1(path: Path) -> np.ndarray:
    rows, cols = read_zfm1_header(path)
    with open(path, "rb") as fh:
        fh.seek(HEADER_LEN)
        payload = fh.read(rows * cols * 4)
    if len(payload) < rows * cols * 4:
        raise ValueError(f"{path}: payload truncated "
                         f"({len(payload)} of {rows * cols * 4} bytes)")
    return np.frombuffer(payload, dtype="<f4").reshape(rows, cols).copy()


def load_or_init_manifest(out_dir: Path, score: str, k: int, normalize: bool,
                          tpr0: float) -> dict:
    """Existing manifest in out_dir, or a fresh skeleton with the score config."""
    path = out_dir / "manifest.json"
    if path.exists():
        doc = json.loads(path.read_text())
        if not isinstance(doc, dict) or "models" not in doc:
            raise ValueError(f"{path}: existing file is not a bundle manifest")
        return doc
    doc = {"score": score, "normalize": normalize, "tpr0": tpr0, "models": []}
    if score == "knn":
        doc["k"] = k
    return doc


def upsert_model_paths(doc: dict, model: str, role: str,
                       feature_file: str, logit_file: str) -> None:
    """Record one exported split under the model entry, creating it if new."""
    entry = next((e for e in doc["models"] if e.get("name") == model), None)
    if entry is None:
        entry = {"name": model, "feature_paths": {}, "logit_paths": {}}
        doc["models"].append(entry)
    entry.setdefault("feature_paths", {})[role] = feature_file
    entry.setdefault("logit_paths", {})[role] = logit_file


def save_manifest(doc: dict, out_dir: Path) -> Path:
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
