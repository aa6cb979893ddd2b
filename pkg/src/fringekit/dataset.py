"""Single-shot dataset export/import: samples, splits, manifest.

Directory layout:

    <out_dir>/
      manifest.json
      samples/<id>/input.pfm        single fringe image (highest f, first shift)
      samples/<id>/height.pfm       ground-truth height (mm, NaN where invalid)
      samples/<id>/mask.pgm         validity mask
      samples/<id>/provenance.json  seed + scene summary

The manifest is the sole contract consumed by the training component; rasters
and the split assignment are byte-reproducible from the same seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .formats import read_mask_pgm, read_pfm, write_mask_pgm, write_pfm
from .raster import HeightMap, Mask, ScalarImage

MANIFEST_VERSION = 1
SPLIT_NAMES = ("train", "validation", "test")


class DatasetError(RuntimeError):
    """Inconsistent dataset directory or manifest."""


@dataclass(frozen=True)
class Sample:
    """One exported sample: input fringe image, truth height, validity mask."""

    id: str
    input: ScalarImage
    truth: HeightMap
    provenance: dict

    def __post_init__(self):
        if self.input.shape != self.truth.shape:
            raise ValueError(
                f"sample {self.id}: input {self.input.shape} vs "
                f"truth {self.truth.shape}"
            )

    @property
    def mask(self) -> Mask:
        return self.truth.mask


@dataclass(frozen=True)
class DatasetManifest:
    version: int
    splits: dict  # split name -> list of sample ids
    width: int
    height: int
    fringe_spec: dict
    calibration_file: str | None
    units: str = "mm"

    def all_ids(self) -> list[str]:
        return [i for name in SPLIT_NAMES for i in self.splits.get(name, [])]

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "splits": {name: list(self.splits.get(name, [])) for name in SPLIT_NAMES},
            "image_size": {"width": self.width, "height": self.height},
            "fringe_spec": self.fringe_spec,
            "calibration_file": self.calibration_file,
            "units": self.units,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DatasetManifest":
        try:
            return cls(
                version=int(doc["version"]),
                splits={name: list(doc["splits"][name]) for name in SPLIT_NAMES},
                width=int(doc["image_size"]["width"]),
                height=int(doc["image_size"]["height"]),
                fringe_spec=dict(doc.get("fringe_spec", {})),
                calibration_file=doc.get("calibration_file"),
                units=doc.get("units", "mm"),
            )
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"malformed manifest: {exc}") from exc


def split_counts(split, n: int) -> tuple[int, int, int]:
    """Resolve a (train, validation, test) split into absolute counts.

    Three ints are taken as explicit counts (must sum to n); three floats as
    ratios summing to 1 (floor-based counts, remainders assigned train-first).
    """
    if len(split) != 3:
        raise ValueError("split must have exactly 3 entries")
    if all(isinstance(s, (int, np.integer)) for s in split):
        counts = tuple(int(s) for s in split)
        if any(c < 0 for c in counts):
            raise ValueError(f"split counts must be >= 0: {counts}")
        if sum(counts) != n:
            raise ValueError(
                f"split counts {counts} sum to {sum(counts)}, expected {n}"
            )
        return counts
    ratios = tuple(float(s) for s in split)
    if any(r <= 0 for r in ratios):
        raise ValueError(f"split ratios must be positive: {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {sum(ratios)!r}")
    counts = [int(np.floor(r * n)) for r in ratios]
    remainder = n - sum(counts)
    for i in range(remainder):
        counts[i % 3] += 1
    return tuple(counts)


def _sample_dir(root: Path, sample_id: str) -> Path:
    return root / "samples" / sample_id


def write_sample(sample: Sample, root) -> None:
    d = _sample_dir(Path(root), sample.id)
    d.mkdir(parents=True, exist_ok=True)
    write_pfm(sample.input, d / "input.pfm")
    write_pfm(sample.truth.image, d / "height.pfm")
    write_mask_pgm(sample.mask, d / "mask.pgm")
    (d / "provenance.json").write_text(json.dumps(sample.provenance, indent=2) + "\n")


def export_dataset(
    samples: Sequence[Sample],
    split,
    seed: int,
    out_dir,
    fringe_spec: dict | None = None,
    calibration_file: str | None = None,
) -> DatasetManifest:
    """Shuffle deterministically, split contiguously, write everything out."""
    if not samples:
        raise ValueError("no samples to export")
    ids = [s.id for s in samples]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValueError(f"duplicate sample ids: {dupes}")
    shape = samples[0].input.shape
    for s in samples:
        if s.input.shape != shape:
            raise ValueError("all samples in a dataset must share dimensions")

    n_train, n_val, n_test = split_counts(split, len(samples))
    order = np.random.default_rng(seed).permutation(len(samples))
    shuffled = [samples[i] for i in order]
    splits = {
        "train": [s.id for s in shuffled[:n_train]],
        "validation": [s.id for s in shuffled[n_train : n_train + n_val]],
        "test": [s.id for s in shuffled[n_train + n_val :]],
    }

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for s in samples:
        write_sample(s, out)
    manifest = DatasetManifest(
        version=MANIFEST_VERSION,
        splits=splits,
        width=shape[1],
        height=shape[0],
        fringe_spec=fringe_spec or {},
        calibration_file=calibration_file,
    )
    (out / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), indent=2) + "\n"
    )
    return manifest


class DatasetReader:
    """Lazy access to exported samples by id."""

    def __init__(self, root: Path, manifest: DatasetManifest):
        self.root = Path(root)
        self.manifest = manifest

    def load(self, sample_id: str) -> Sample:
        d = _sample_dir(self.root, sample_id)
        for name in ("input.pfm", "height.pfm", "mask.pgm", "provenance.json"):
            if not (d / name).exists():
                raise DatasetError(
                    f"sample {sample_id!r}: missing file {d / name}"
                )
        image = read_pfm(d / "input.pfm")
        height = read_pfm(d / "height.pfm")
        mask = read_mask_pgm(d / "mask.pgm")
        expected = (self.manifest.height, self.manifest.width)
        for name, shape in (("input", image.shape), ("height", height.shape),
                            ("mask", mask.shape)):
            if shape != expected:
                raise DatasetError(
                    f"sample {sample_id!r}: {name} shape {shape} does not match "
                    f"manifest {expected}"
                )
        provenance = json.loads((d / "provenance.json").read_text())
        return Sample(
            id=sample_id,
            input=image,
            truth=HeightMap(height, mask),
            provenance=provenance,
        )


def load_dataset(root) -> tuple[DatasetManifest, DatasetReader]:
    """Read and validate a dataset directory; samples load lazily by id."""
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"no manifest.json under {root}")
    manifest = DatasetManifest.from_dict(json.loads(manifest_path.read_text()))

    seen: set[str] = set()
    for name in SPLIT_NAMES:
        for sample_id in manifest.splits.get(name, []):
            if sample_id in seen:
                raise DatasetError(
                    f"sample id {sample_id!r} appears in more than one split"
                )
            seen.add(sample_id)
            d = _sample_dir(root, sample_id)
            if not d.is_dir():
                raise DatasetError(f"sample {sample_id!r}: directory missing")
    return manifest, DatasetReader(root, manifest)
