import json

import numpy as np
import pytest

from fringekit import (
    DatasetError,
    HeightMap,
    Mask,
    Sample,
    ScalarImage,
    export_dataset,
    load_dataset,
    split_counts,
)


def make_sample(i, rng, size=8):
    data = rng.normal(size=(size, size)).astype(np.float32)
    z = rng.uniform(0, 50, size=(size, size)).astype(np.float32)
    valid = rng.random((size, size)) > 0.1
    z = np.where(valid, z, np.float32(np.nan))
    return Sample(
        id=f"{i:05d}",
        input=ScalarImage(data),
        truth=HeightMap(ScalarImage(z), Mask(valid)),
        provenance={"seed": i},
    )


def dir_snapshot(root):
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestSplitCounts:
    def test_explicit_counts(self):
        assert split_counts((540, 60, 72), 672) == (540, 60, 72)

    def test_counts_must_sum(self):
        with pytest.raises(ValueError):
            split_counts((540, 60, 72), 600)

    def test_ratios_floor_train_first(self):
        assert split_counts((0.8, 0.1, 0.1), 10) == (8, 1, 1)
        # 11 * 0.8 = 8.8 -> 8, remainder goes train-first
        assert split_counts((0.8, 0.1, 0.1), 11) == (9, 1, 1)

    def test_ratios_must_sum_to_one(self):
        with pytest.raises(ValueError):
            split_counts((0.8, 0.1, 0.2), 10)

    def test_ratio_sum_tolerance(self):
        assert split_counts((0.8, 0.1, 0.1 + 5e-10), 10) == (8, 1, 1)


class TestExportLoad:
    def test_roundtrip(self, tmp_path, rng):
        samples = [make_sample(i, rng) for i in range(10)]
        manifest = export_dataset(samples, (0.8, 0.1, 0.1), seed=3, out_dir=tmp_path)
        assert [len(manifest.splits[k]) for k in ("train", "validation", "test")] == [
            8, 1, 1,
        ]
        loaded, reader = load_dataset(tmp_path)
        assert loaded.to_dict() == manifest.to_dict()
        s = reader.load(samples[0].id)
        assert s.input == samples[0].input
        assert s.truth.image == samples[0].truth.image
        assert s.mask == samples[0].mask
        assert s.provenance == {"seed": 0}

    def test_export_load_reexport_byte_identical(self, tmp_path, rng):
        samples = [make_sample(i, rng) for i in range(6)]
        d1 = tmp_path / "one"
        d2 = tmp_path / "two"
        export_dataset(samples, (4, 1, 1), seed=9, out_dir=d1)
        _, reader = load_dataset(d1)
        reloaded = [reader.load(s.id) for s in samples]
        export_dataset(reloaded, (4, 1, 1), seed=9, out_dir=d2)
        assert dir_snapshot(d1) == dir_snapshot(d2)

    def test_same_seed_same_split(self, tmp_path, rng):
        samples = [make_sample(i, rng) for i in range(12)]
        m1 = export_dataset(samples, (10, 1, 1), seed=5, out_dir=tmp_path / "a")
        m2 = export_dataset(samples, (10, 1, 1), seed=5, out_dir=tmp_path / "b")
        assert m1.splits == m2.splits

    def test_different_seed_different_split(self, tmp_path, rng):
        samples = [make_sample(i, rng) for i in range(30)]
        m1 = export_dataset(samples, (28, 1, 1), seed=1, out_dir=tmp_path / "a")
        m2 = export_dataset(samples, (28, 1, 1), seed=2, out_dir=tmp_path / "b")
        assert m1.splits != m2.splits

    def test_splits_disjoint_and_complete(self, tmp_path, rng):
        samples = [make_sample(i, rng) for i in range(20)]
        manifest = export_dataset(samples, (0.8, 0.1, 0.1), seed=0, out_dir=tmp_path)
        ids = manifest.all_ids()
        assert len(ids) == 20
        assert len(set(ids)) == 20

    def test_duplicate_ids_rejected(self, tmp_path, rng):
        samples = [make_sample(1, rng), make_sample(1, rng)]
        with pytest.raises(ValueError, match="duplicate"):
            export_dataset(samples, (0.8, 0.1, 0.1), seed=0, out_dir=tmp_path)

    def test_missing_file_names_id(self, tmp_path, rng):
        samples = [make_sample(i, rng) for i in range(4)]
        export_dataset(samples, (2, 1, 1), seed=0, out_dir=tmp_path)
        (tmp_path / "samples" / "00002" / "height.pfm").unlink()
        _, reader = load_dataset(tmp_path)
        with pytest.raises(DatasetError, match="00002"):
            reader.load("00002")

    def test_corrupt_pfm_names_path(self, tmp_path, rng):
        samples = [make_sample(i, rng) for i in range(4)]
        export_dataset(samples, (2, 1, 1), seed=0, out_dir=tmp_path)
        bad = tmp_path / "samples" / "00001" / "input.pfm"
        bad.write_bytes(b"Pq\nbroken")
        _, reader = load_dataset(tmp_path)
        with pytest.raises(Exception, match="input.pfm"):
            reader.load("00001")

    def test_overlapping_split_ids_rejected(self, tmp_path, rng):
        samples = [make_sample(i, rng) for i in range(4)]
        export_dataset(samples, (2, 1, 1), seed=0, out_dir=tmp_path)
        doc = json.loads((tmp_path / "manifest.json").read_text())
        doc["splits"]["test"] = doc["splits"]["train"][:1]
        (tmp_path / "manifest.json").write_text(json.dumps(doc))
        with pytest.raises(DatasetError, match="more than one split"):
            load_dataset(tmp_path)

    def test_dimension_mismatch_detected(self, tmp_path, rng):
        samples = [make_sample(i, rng) for i in range(4)]
        export_dataset(samples, (2, 1, 1), seed=0, out_dir=tmp_path)
        doc = json.loads((tmp_path / "manifest.json").read_text())
        doc["image_size"]["width"] = 16
        (tmp_path / "manifest.json").write_text(json.dumps(doc))
        _, reader = load_dataset(tmp_path)
        with pytest.raises(DatasetError, match="shape"):
            reader.load("00000")

    def test_paper_counts(self, tmp_path, rng):
        samples = [make_sample(i, rng, size=2) for i in range(672)]
        manifest = export_dataset(samples, (540, 60, 72), seed=0, out_dir=tmp_path)
        assert len(manifest.splits["train"]) == 540
        assert len(manifest.splits["validation"]) == 60
        assert len(manifest.splits["test"]) == 72
