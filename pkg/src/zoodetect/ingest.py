"""On-disk matrix format (ZFM1), CSV fallback, and the model-zoo manifest.

ZFM1 layout, all little-endian:

    bytes 0-3   magic ``ZFM1``
    byte  4     dtype code (0x01 = float32; only code in v1)
    bytes 5-12  rows, unsigned 64-bit
    bytes 13-20 cols, unsigned 64-bit
    then        rows*cols float32 values, row-major

Matrices are plain 2-D float32 numpy arrays in memory.  Files with a
``.csv`` extension are read as headerless numeric CSV instead (ingest
fallback only; writing always produces ZFM1).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimMismatch,
    DimOverflow,
    DuplicateModelName,
    MagicMismatch,
    MissingSplit,
    NonFiniteValue,
    SchemaError,
    TruncatedFile,
    UnreadableMatrix,
)
from .scores import SCORE_KINDS, ScoreConfig, score_column  # noqa: F401  (re-exported pipeline entry)

MAGIC = b"ZFM1"
DTYPE_FLOAT32 = 0x01
HEADER_LEN = 21
_MAX_ELEMENTS = 1 << 40  # sanity cap on rows*cols

ID_TRAIN = "id_train"
ID_VAL = "id_val"
TEST_ID = "test_id"
REQUIRED_SPLITS = (ID_TRAIN, ID_VAL)

_MANIFEST_KEYS = {"models", "score", "k", "temperature", "normalize", "tpr0"}
_MODEL_KEYS = {"name", "feature_paths", "logit_paths", "score", "k", "temperature", "normalize"}


def write_matrix(matrix, path) -> None:
    """Write a 2-D float32 matrix as a ZFM1 file; readable back bit-exactly."""
    m = np.ascontiguousarray(np.asarray(matrix, dtype="<f4"))
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimOverflow(f"matrix must be 2-D with positive dims, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteValue("refusing to write NaN/Inf values")
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BQQ", DTYPE_FLOAT32, rows, cols))
        fh.write(m.tobytes(order="C"))


def _read_zfm1(path, validate: bool) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(HEADER_LEN)
        if len(header) < 4 or header[:4] != MAGIC:
            raise MagicMismatch(f"{path}: not a ZFM1 file")
        if len(header) < HEADER_LEN:
            raise TruncatedFile(f"{path}: header cut short at {len(header)} bytes")
        dtype_code, rows, cols = struct.unpack("<BQQ", header[4:])
        if dtype_code != DTYPE_FLOAT32:
            raise MagicMismatch(f"{path}: unsupported dtype code 0x{dtype_code:02x}")
        if rows < 1 or cols < 1 or rows * cols > _MAX_ELEMENTS:
            raise DimOverflow(f"{path}: declared shape {rows}x{cols} out of range")
        count = rows * cols
        payload = fh.read(count * 4)
        if len(payload) < count * 4:
            raise TruncatedFile(
                f"{path}: payload needs {count * 4} bytes, found {len(payload)}")
    data = np.frombuffer(payload, dtype="<f4", count=count).reshape(rows, cols)
    if validate and not np.all(np.isfinite(data)):
        raise NonFiniteValue(f"{path}: matrix contains NaN/Inf")
    return data.copy()


def _read_csv(path, validate: bool) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", dtype=np.float32, ndmin=2)
    except ValueError as exc:
        raise UnreadableMatrix(f"{path}: cannot parse CSV: {exc}") from exc
    if data.size == 0:
        raise TruncatedFile(f"{path}: empty CSV")
    if validate and not np.all(np.isfinite(data)):
        raise NonFiniteValue(f"{path}: matrix contains NaN/Inf")
    return data


def read_matrix(path, validate: bool = True) -> np.ndarray:
    """Read a ZFM1 (or ``.csv``) file into a 2-D float32 array."""
    if str(path).endswith(".csv"):
        return _read_csv(path, validate)
    return _read_zfm1(path, validate)


def peek_dims(path) -> tuple[int, int]:
    """Dimensions of a matrix file without loading the payload (CSV is fully parsed)."""
    if str(path).endswith(".csv"):
        m = _read_csv(path, validate=False)
        return m.shape
    with open(path, "rb") as fh:
        header = fh.read(HEADER_LEN)
    if len(header) < 4 or header[:4] != MAGIC:
        raise MagicMismatch(f"{path}: not a ZFM1 file")
    if len(header) < HEADER_LEN:
        raise TruncatedFile(f"{path}: header cut short")
    _, rows, cols = struct.unpack("<BQQ", header[4:])
    return int(rows), int(cols)


@dataclass(frozen=True)
class ModelEntry:
    """One zoo model: where its matrices live plus optional score overrides."""

    name: str
    feature_paths: dict[str, Path] = field(default_factory=dict)
    logit_paths: dict[str, Path] = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)

    def splits(self) -> tuple[str, ...]:
        seen = list(self.feature_paths)
        seen += [s for s in self.logit_paths if s not in self.feature_paths]
        return tuple(seen)


@dataclass(frozen=True)
class ZooManifest:
    """Validated model zoo: ordered models, global score config, split roles.

    Model order is the contract: column j of every score table and p-value
    matrix downstream refers to ``models[j]``.  ``id_val`` is assumed to be
    ID data disjoint from ``id_train``; that property lives in how the
    input files were produced and cannot be checked here.
    """

    models: tuple[ModelEntry, ...]
    score_config: ScoreConfig
    tpr0: float = 0.95
    path: Path | None = None

    def model_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.models)

    @property
    def m(self) -> int:
        return len(self.models)

    def splits(self) -> tuple[str, ...]:
        seen: list[str] = []
        for entry in self.models:
            for s in entry.splits():
                if s not in seen:
                    seen.append(s)
        return tuple(seen)

    def ood_splits(self) -> tuple[str, ...]:
        reserved = set(REQUIRED_SPLITS) | {TEST_ID}
        return tuple(s for s in self.splits() if s not in reserved)

    def _entry(self, name: str) -> ModelEntry:
        for entry in self.models:
            if entry.name == name:
                return entry
        raise KeyError(name)

    def effective_config(self, name: str) -> ScoreConfig:
        entry = self._entry(name)
        base = self.score_config
        ov = entry.overrides
        return ScoreConfig(
            kind=ov.get("score", base.kind),
            k=ov.get("k", base.k),
            temperature=ov.get("temperature", base.temperature),
            normalize=ov.get("normalize", base.normalize),
            cov_ridge=base.cov_ridge,
        )

    def has_features(self, name: str, split: str) -> bool:
        return split in self._entry(name).feature_paths

    def has_logits(self, name: str, split: str) -> bool:
        return split in self._entry(name).logit_paths

    def features(self, name: str, split: str) -> np.ndarray:
        return read_matrix(self._entry(name).feature_paths[split])

    def logits(self, name: str, split: str) -> np.ndarray:
        return read_matrix(self._entry(name).logit_paths[split])


@dataclass(frozen=True)
class ModelSummary:
    name: str
    n_train: int
    n_val: int
    dim: int
    ready: bool
    note: str = ""


@dataclass(frozen=True)
class BundleSummary:
    m: int
    models: tuple[ModelSummary, ...]

    @property
    def all_ready(self) -> bool:
        return all(s.ready for s in self.models)


def _expect(cond: bool, msg: str) -> None:
    if not cond:
        raise SchemaError(msg)


def _parse_paths(raw, base: Path, model: str, key: str) -> dict[str, Path]:
    _expect(isinstance(raw, dict), f"model {model!r}: {key} must be an object")
    out: dict[str, Path] = {}
    for split, p in raw.items():
        _expect(isinstance(split, str) and split, f"model {model!r}: split names must be strings")
        _expect(isinstance(p, str), f"model {model!r}: path for split {split!r} must be a string")
        resolved = (base / p).resolve() if not Path(p).is_absolute() else Path(p)
        if not resolved.is_file():
            raise SchemaError(f"model {model!r}: {key}[{split!r}] does not resolve: {resolved}")
        out[split] = resolved
    return out


def _check_family_dims(name: str, paths: dict[str, Path], what: str) -> int | None:
    cols = None
    for split, p in paths.items():
        try:
            _, c = peek_dims(p)
        except (MagicMismatch, TruncatedFile, OSError) as exc:
            raise SchemaError(f"model {name!r}: cannot read {what} for split {split!r}: {exc}") from exc
        if cols is None:
            cols = c
        elif c != cols:
            raise DimMismatch(
                f"model {name!r}: {what} cols differ across splits ({cols} vs {c} for {split!r})")
    return cols


def load_manifest(path) -> ZooManifest:
    """Load and fully validate a manifest JSON document.

    Relative matrix paths resolve against the manifest's directory.  The
    schema is strict: unknown keys anywhere are rejected.
    """
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    _expect(isinstance(doc, dict), "manifest root must be an object")
    unknown = set(doc) - _MANIFEST_KEYS
    _expect(not unknown, f"unknown manifest keys: {sorted(unknown)}")
    _expect("models" in doc, "manifest missing required key 'models'")
    _expect("score" in doc, "manifest missing required key 'score'")
    _expect(isinstance(doc["models"], list) and doc["models"], "'models' must be a nonempty array")
    _expect(isinstance(doc["score"], str), "'score' must be a string")

    tpr0 = doc.get("tpr0", 0.95)
    _expect(isinstance(tpr0, (int, float)) and 0 < tpr0 < 1, "'tpr0' must lie in (0, 1)")
    cfg_kwargs = {"kind": doc["score"]}
    for key in ("k", "temperature", "normalize"):
        if key in doc:
            cfg_kwargs[key] = doc[key]
    try:
        score_config = ScoreConfig(**cfg_kwargs)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad score configuration: {exc}") from exc

    base = path.parent
    entries: list[ModelEntry] = []
    names: set[str] = set()
    for i, raw in enumerate(doc["models"]):
        _expect(isinstance(raw, dict), f"models[{i}] must be an object")
        unknown = set(raw) - _MODEL_KEYS
        _expect(not unknown, f"models[{i}]: unknown keys {sorted(unknown)}")
        _expect(isinstance(raw.get("name"), str) and raw["name"], f"models[{i}] needs a string 'name'")
        name = raw["name"]
        if name in names:
            raise DuplicateModelName(f"model name {name!r} appears twice")
        names.add(name)

        feature_paths = _parse_paths(raw.get("feature_paths", {}), base, name, "feature_paths")
        logit_paths = _parse_paths(raw.get("logit_paths", {}), base, name, "logit_paths")
        _expect(feature_paths or logit_paths,
                f"model {name!r} provides neither feature_paths nor logit_paths")
        overrides = {k: raw[k] for k in ("score", "k", "temperature", "normalize") if k in raw}
        if "score" in overrides:
            _expect(overrides["score"] in SCORE_KINDS,
                    f"model {name!r}: unknown score override {overrides['score']!r}")

        entry = ModelEntry(name=name, feature_paths=feature_paths,
                           logit_paths=logit_paths, overrides=overrides)
        for required in REQUIRED_SPLITS:
            if required not in entry.splits():
                raise MissingSplit(f"model {name!r} lacks the {required!r} split")
        _check_family_dims(name, feature_paths, "features")
        _check_family_dims(name, logit_paths, "logits")
        entries.append(entry)

    return ZooManifest(models=tuple(entries), score_config=score_config,
                       tpr0=float(tpr0), path=path)


def validate_bundle(manifest: ZooManifest) -> BundleSummary:
    """Read every referenced matrix and report per-model shape and readiness.

    Readiness means the model provides what its effective score kind needs
    (logits for msp/energy, features for knn/mahalanobis).  A not-ready
    model is reported, not fatal.
    """
    summaries = []
    for entry in manifest.models:
        cfg = manifest.effective_config(entry.name)
        note = ""
        family = entry.logit_paths if cfg.kind in ("msp", "energy") else entry.feature_paths
        ready = all(s in family for s in REQUIRED_SPLITS)
        if not ready:
            kind_needs = "logits" if cfg.kind in ("msp", "energy") else "features"
            note = f"score kind {cfg.kind!r} needs {kind_needs} for id_train/id_val"
        if cfg.kind == "knn" and ready:
            n_train = peek_dims(entry.feature_paths[ID_TRAIN])[0]
            if cfg.k > n_train:
                ready, note = False, f"k={cfg.k} exceeds id_train rows ({n_train})"

        for split, p in list(entry.feature_paths.items()) + list(entry.logit_paths.items()):
            try:
                read_matrix(p, validate=True)
            except (MagicMismatch, TruncatedFile, NonFiniteValue, DimOverflow, OSError) as exc:
                raise UnreadableMatrix(f"model {entry.name!r}, split {split!r}: {exc}") from exc

        def _rows(paths: dict[str, Path], split: str) -> int:
            return peek_dims(paths[split])[0] if split in paths else 0

        n_train = _rows(entry.feature_paths, ID_TRAIN) or _rows(entry.logit_paths, ID_TRAIN)
        n_val = _rows(entry.feature_paths, ID_VAL) or _rows(entry.logit_paths, ID_VAL)
        if entry.feature_paths:
            dim = peek_dims(next(iter(entry.feature_paths.values())))[1]
        else:
            dim = peek_dims(next(iter(entry.logit_paths.values())))[1]
        summaries.append(ModelSummary(name=entry.name, n_train=n_train, n_val=n_val,
                                      dim=dim, ready=ready, note=note))
    return BundleSummary(m=manifest.m, models=tuple(summaries))


def write_score_sidecar(table_path, model_names, configs, split: str) -> None:
    """JSON sidecar naming the columns of a persisted score table."""
    sidecar = {
        "split": split,
        "model_names": list(model_names),
        "score_configs": [c.describe() for c in configs],
    }
    Path(str(table_path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")
