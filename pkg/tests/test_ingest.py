import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zoodetect.errors import (
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
from zoodetect.ingest import (
    load_manifest,
    peek_dims,
    read_matrix,
    validate_bundle,
    write_matrix,
)


def write_manifest(path, doc):
    path.write_text(json.dumps(doc))
    return path


def make_matrix_file(dirpath, name, array):
    p = dirpath / name
    write_matrix(np.asarray(array, dtype=np.float32), p)
    return p


class TestZfm1Format:
    def test_direct_encoding(self, tmp_path):
        p = tmp_path / "m.zfm"
        write_matrix(np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32), p)
        m = read_matrix(p)
        assert m.shape == (2, 2)
        np.testing.assert_array_equal(m, [[1.0, 2.0], [3.0, 4.0]])

    def test_1x1_is_25_bytes(self, tmp_path):
        p = tmp_path / "one.zfm"
        write_matrix(np.array([[0.0]], dtype=np.float32), p)
        assert p.stat().st_size == 25  # 4 magic + 1 dtype + 8 rows + 8 cols + 4 payload

    def test_2x3_payload_and_header(self, tmp_path):
        p = tmp_path / "m.zfm"
        write_matrix(np.zeros((2, 3), dtype=np.float32), p)
        assert p.stat().st_size == 21 + 24

    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        m = rng.normal(size=(13, 5)).astype(np.float32)
        m[0, 0] = -0.0
        m[1, 1] = np.float32(1e-38)
        p = tmp_path / "m.zfm"
        write_matrix(m, p)
        back = read_matrix(p)
        assert back.dtype == np.float32
        assert back.tobytes() == m.tobytes()

    @settings(max_examples=25, deadline=None)
    @given(
        rows=st.integers(1, 20),
        cols=st.integers(1, 20),
        seed=st.integers(0, 2**31 - 1),
    )
    def test_round_trip_property(self, tmp_path_factory, rows, cols, seed):
        m = np.random.default_rng(seed).normal(size=(rows, cols)).astype(np.float32)
        p = tmp_path_factory.mktemp("rt") / "m.zfm"
        write_matrix(m, p)
        assert read_matrix(p).tobytes() == m.tobytes()

    def test_magic_mismatch(self, tmp_path):
        p = tmp_path / "bad.zfm"
        p.write_bytes(b"NOPE" + b"\x00" * 30)
        with pytest.raises(MagicMismatch):
            read_matrix(p)

    def test_unsupported_dtype_code(self, tmp_path):
        p = tmp_path / "bad.zfm"
        p.write_bytes(b"ZFM1" + struct.pack("<BQQ", 0x02, 1, 1) + b"\x00" * 4)
        with pytest.raises(MagicMismatch):
            read_matrix(p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "trunc.zfm"
        # declares 3x3 but carries 2 floats
        p.write_bytes(b"ZFM1" + struct.pack("<BQQ", 0x01, 3, 3) + b"\x00" * 8)
        with pytest.raises(TruncatedFile):
            read_matrix(p)

    def test_truncated_header(self, tmp_path):
        p = tmp_path / "trunc.zfm"
        p.write_bytes(b"ZFM1\x01\x00")
        with pytest.raises(TruncatedFile):
            read_matrix(p)

    def test_zero_dims_rejected(self, tmp_path):
        p = tmp_path / "z.zfm"
        p.write_bytes(b"ZFM1" + struct.pack("<BQQ", 0x01, 0, 4))
        with pytest.raises(DimOverflow):
            read_matrix(p)

    def test_huge_dims_rejected(self, tmp_path):
        p = tmp_path / "huge.zfm"
        p.write_bytes(b"ZFM1" + struct.pack("<BQQ", 0x01, 2**62, 2**62))
        with pytest.raises(DimOverflow):
            read_matrix(p)

    def test_nonfinite_rejected_when_validating(self, tmp_path):
        p = tmp_path / "nan.zfm"
        payload = struct.pack("<4f", 1.0, float("nan"), 3.0, 4.0)
        p.write_bytes(b"ZFM1" + struct.pack("<BQQ", 0x01, 2, 2) + payload)
        with pytest.raises(NonFiniteValue):
            read_matrix(p, validate=True)
        m = read_matrix(p, validate=False)
        assert np.isnan(m[0, 1])

    def test_write_rejects_nan(self, tmp_path):
        with pytest.raises(NonFiniteValue):
            write_matrix(np.array([[np.nan]], dtype=np.float32), tmp_path / "x.zfm")

    def test_write_unwritable_path_is_oserror(self, tmp_path):
        with pytest.raises(OSError):
            write_matrix(np.ones((1, 1), dtype=np.float32), tmp_path / "no" / "dir" / "x.zfm")

    def test_peek_dims(self, tmp_path):
        p = make_matrix_file(tmp_path, "m.zfm", np.zeros((7, 3)))
        assert peek_dims(p) == (7, 3)


class TestCsvFallback:
    def test_csv_matches_zfm1(self, tmp_path):
        m = np.array([[1.5, -2.25], [0.125, 4.0]], dtype=np.float32)
        zp = make_matrix_file(tmp_path, "m.zfm", m)
        cp = tmp_path / "m.csv"
        cp.write_text("1.5,-2.25\n0.125,4.0\n")
        np.testing.assert_allclose(read_matrix(cp), read_matrix(zp), rtol=1e-6)

    def test_csv_crlf(self, tmp_path):
        cp = tmp_path / "m.csv"
        cp.write_bytes(b"1.0,2.0\r\n3.0,4.0\r\n")
        np.testing.assert_array_equal(read_matrix(cp), [[1.0, 2.0], [3.0, 4.0]])

    def test_csv_single_row_is_2d(self, tmp_path):
        cp = tmp_path / "m.csv"
        cp.write_text("1.0,2.0,3.0\n")
        assert read_matrix(cp).shape == (1, 3)

    def test_csv_garbage(self, tmp_path):
        cp = tmp_path / "m.csv"
        cp.write_text("a,b\nc,d\n")
        with pytest.raises(UnreadableMatrix):
            read_matrix(cp)


@pytest.fixture
def zoo_dir(tmp_path):
    """Two KNN models with complete splits, 4-dim features."""
    rng = np.random.default_rng(0)
    files = {}
    for model in ("alpha", "beta"):
        for split, n in (("id_train", 40), ("id_val", 30), ("test_id", 10), ("svhn", 8)):
            files[(model, split)] = make_matrix_file(
                tmp_path, f"{model}_{split}.zfm", rng.normal(size=(n, 4)))
    doc = {
        "score": "knn",
        "k": 5,
        "normalize": False,
        "models": [
            {"name": model,
             "feature_paths": {split: f"{model}_{split}.zfm"
                               for split in ("id_train", "id_val", "test_id", "svhn")}}
            for model in ("alpha", "beta")
        ],
    }
    write_manifest(tmp_path / "manifest.json", doc)
    return tmp_path


class TestManifest:
    def test_load_and_order(self, zoo_dir):
        man = load_manifest(zoo_dir / "manifest.json")
        assert man.m == 2
        assert man.model_names() == ("alpha", "beta")
        assert man.ood_splits() == ("svhn",)
        assert man.effective_config("alpha").k == 5

    def test_seven_model_manifest(self, tmp_path):
        rng = np.random.default_rng(1)
        models = []
        for i in range(7):
            name = f"m{i}"
            for split in ("id_train", "id_val"):
                make_matrix_file(tmp_path, f"{name}_{split}.zfm", rng.normal(size=(12, 3)))
            models.append({"name": name,
                           "feature_paths": {s: f"{name}_{s}.zfm" for s in ("id_train", "id_val")}})
        write_manifest(tmp_path / "zoo.json", {"score": "knn", "k": 2, "models": models})
        assert load_manifest(tmp_path / "zoo.json").m == 7

    def test_unknown_top_level_key(self, zoo_dir):
        doc = json.loads((zoo_dir / "manifest.json").read_text())
        doc["typo_key"] = 1
        p = write_manifest(zoo_dir / "bad.json", doc)
        with pytest.raises(SchemaError):
            load_manifest(p)

    def test_missing_models_key(self, tmp_path):
        p = write_manifest(tmp_path / "bad.json", {"score": "knn"})
        with pytest.raises(SchemaError):
            load_manifest(p)

    def test_empty_models_list(self, tmp_path):
        p = write_manifest(tmp_path / "bad.json", {"score": "knn", "models": []})
        with pytest.raises(SchemaError):
            load_manifest(p)

    def test_duplicate_model_name(self, zoo_dir):
        doc = json.loads((zoo_dir / "manifest.json").read_text())
        doc["models"].append(dict(doc["models"][0]))
        p = write_manifest(zoo_dir / "dup.json", doc)
        with pytest.raises(DuplicateModelName):
            load_manifest(p)

    def test_missing_split(self, tmp_path):
        make_matrix_file(tmp_path, "t.zfm", np.zeros((4, 2)))
        doc = {"score": "knn", "models": [
            {"name": "a", "feature_paths": {"id_train": "t.zfm"}}]}
        p = write_manifest(tmp_path / "m.json", doc)
        with pytest.raises(MissingSplit):
            load_manifest(p)

    def test_dim_mismatch_across_splits(self, tmp_path):
        make_matrix_file(tmp_path, "train.zfm", np.zeros((4, 512)))
        make_matrix_file(tmp_path, "val.zfm", np.zeros((4, 64)))
        doc = {"score": "knn", "models": [
            {"name": "a", "feature_paths": {"id_train": "train.zfm", "id_val": "val.zfm"}}]}
        p = write_manifest(tmp_path / "m.json", doc)
        with pytest.raises(DimMismatch):
            load_manifest(p)

    def test_unresolved_path(self, tmp_path):
        doc = {"score": "knn", "models": [
            {"name": "a", "feature_paths": {"id_train": "nope.zfm", "id_val": "nope.zfm"}}]}
        p = write_manifest(tmp_path / "m.json", doc)
        with pytest.raises(SchemaError):
            load_manifest(p)

    def test_bad_tpr0(self, zoo_dir):
        doc = json.loads((zoo_dir / "manifest.json").read_text())
        doc["tpr0"] = 1.5
        p = write_manifest(zoo_dir / "bad.json", doc)
        with pytest.raises(SchemaError):
            load_manifest(p)

    def test_model_score_override(self, tmp_path):
        rng = np.random.default_rng(2)
        make_matrix_file(tmp_path, "f_train.zfm", rng.normal(size=(10, 4)))
        make_matrix_file(tmp_path, "f_val.zfm", rng.normal(size=(10, 4)))
        make_matrix_file(tmp_path, "l_train.zfm", rng.normal(size=(10, 3)))
        make_matrix_file(tmp_path, "l_val.zfm", rng.normal(size=(10, 3)))
        doc = {"score": "knn", "k": 3, "models": [
            {"name": "a",
             "feature_paths": {"id_train": "f_train.zfm", "id_val": "f_val.zfm"}},
            {"name": "b", "score": "energy", "temperature": 2.0,
             "logit_paths": {"id_train": "l_train.zfm", "id_val": "l_val.zfm"}},
        ]}
        man = load_manifest(write_manifest(tmp_path / "m.json", doc))
        assert man.effective_config("a").kind == "knn"
        cfg_b = man.effective_config("b")
        assert cfg_b.kind == "energy" and cfg_b.temperature == 2.0


class TestValidateBundle:
    def test_all_ready(self, zoo_dir):
        summary = validate_bundle(load_manifest(zoo_dir / "manifest.json"))
        assert summary.m == 2
        assert summary.all_ready
        by_name = {s.name: s for s in summary.models}
        assert by_name["alpha"].n_train == 40
        assert by_name["alpha"].n_val == 30
        assert by_name["alpha"].dim == 4

    def test_knn_without_features_not_ready(self, tmp_path):
        rng = np.random.default_rng(3)
        make_matrix_file(tmp_path, "l_train.zfm", rng.normal(size=(10, 3)))
        make_matrix_file(tmp_path, "l_val.zfm", rng.normal(size=(10, 3)))
        doc = {"score": "knn", "k": 2, "models": [
            {"name": "a", "logit_paths": {"id_train": "l_train.zfm", "id_val": "l_val.zfm"}}]}
        summary = validate_bundle(load_manifest(write_manifest(tmp_path / "m.json", doc)))
        assert not summary.all_ready
        assert not summary.models[0].ready
        assert "features" in summary.models[0].note

    def test_corrupt_matrix_is_unreadable(self, zoo_dir):
        man = load_manifest(zoo_dir / "manifest.json")
        target = zoo_dir / "alpha_svhn.zfm"
        data = bytearray(target.read_bytes())
        target.write_bytes(data[: len(data) - 8])
        with pytest.raises(UnreadableMatrix):
            validate_bundle(man)


def test_manifest_column_order_is_stable(zoo_dir):
    """Column j downstream always refers to models[j]."""
    from zoodetect.scores import score_table

    man = load_manifest(zoo_dir / "manifest.json")
    table = score_table(man, "id_val")
    assert table.model_names == man.model_names()
    single = {}
    for name in man.model_names():
        from zoodetect.scores import score_column
        single[name] = score_column(man, name, "id_val")
    for j, name in enumerate(man.model_names()):
        np.testing.assert_array_equal(table.values[:, j], single[name])
