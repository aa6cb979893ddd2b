"""Height-map error metrics and model comparison reports.

RMSE is the root mean squared error in mm over jointly valid pixels. MRE is
the mean absolute error normalized by the scene depth range (the dimensionless
companion metric); both ignore pixels that are invalid in either map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .raster import DimensionMismatchError, HeightMap


def _joint_errors(pred: HeightMap, truth: HeightMap) -> np.ndarray:
    if pred.shape != truth.shape:
        raise DimensionMismatchError(
            f"prediction {pred.shape} vs truth {truth.shape}"
        )
    both = pred.mask.valid & truth.mask.valid
    if not np.any(both):
        raise ValueError("no jointly valid pixels to evaluate")
    # accumulate in float64 even when the rasters are float32 from disk
    return pred.image.data[both].astype(np.float64) - truth.image.data[
        both
    ].astype(np.float64)


def rmse(pred: HeightMap, truth: HeightMap) -> float:
    """Root mean squared height error (mm) over jointly valid pixels."""
    e = _joint_errors(pred, truth)
    return float(np.sqrt(np.mean(e * e)))


def mre(pred: HeightMap, truth: HeightMap, depth_range: float) -> float:
    """Mean |error| / depth_range over jointly valid pixels (dimensionless)."""
    if depth_range <= 0:
        raise ValueError("depth_range must be positive")
    e = _joint_errors(pred, truth)
    return float(np.mean(np.abs(e)) / depth_range)


@dataclass(frozen=True)
class SampleScore:
    id: str
    mre: float
    rmse_mm: float
    valid_pixel_count: int


@dataclass(frozen=True)
class EvalReport:
    """Aggregate metrics plus the per-sample breakdown they came from."""

    mre: float
    rmse_mm: float
    valid_pixel_count: int
    per_sample: tuple = ()

    def __post_init__(self):
        if self.mre < 0 or self.rmse_mm < 0:
            raise ValueError("metrics must be non-negative")
        object.__setattr__(self, "per_sample", tuple(self.per_sample))

    def to_dict(self) -> dict:
        return {
            "mre": self.mre,
            "rmse_mm": self.rmse_mm,
            "valid_pixel_count": self.valid_pixel_count,
            "per_sample": [
                {
                    "id": s.id,
                    "mre": s.mre,
                    "rmse_mm": s.rmse_mm,
                    "valid_pixel_count": s.valid_pixel_count,
                }
                for s in self.per_sample
            ],
        }


def evaluate_pairs(
    pairs: Sequence[tuple[str, HeightMap, HeightMap]], depth_range: float
) -> EvalReport:
    """Score (id, prediction, truth) pairs and pool them pixel-weighted."""
    if not pairs:
        raise ValueError("nothing to evaluate")
    scores = []
    sq_sum = 0.0
    abs_sum = 0.0
    count = 0
    for sample_id, pred, truth in pairs:
        e = _joint_errors(pred, truth)
        n = len(e)
        scores.append(
            SampleScore(
                id=sample_id,
                mre=float(np.mean(np.abs(e)) / depth_range),
                rmse_mm=float(np.sqrt(np.mean(e * e))),
                valid_pixel_count=n,
            )
        )
        sq_sum += float(np.sum(e * e))
        abs_sum += float(np.sum(np.abs(e)))
        count += n
    return EvalReport(
        mre=abs_sum / count / depth_range,
        rmse_mm=float(np.sqrt(sq_sum / count)),
        valid_pixel_count=count,
        per_sample=tuple(scores),
    )


def compare_models(reports: Mapping[str, EvalReport]) -> list[str]:
    """Model names ordered by ascending RMSE; ties by MRE, then name."""
    if len(reports) < 2:
        raise ValueError("model comparison needs at least 2 reports")
    return sorted(reports, key=lambda k: (reports[k].rmse_mm, reports[k].mre, k))


def report_table(reports: Mapping[str, EvalReport]) -> str:
    """Aligned plain-text table: rows MRE / RMSE, one column per model."""
    names = list(reports)
    widths = [max(len(n), 10) for n in names]
    head = "Metric     " + "  ".join(n.rjust(w) for n, w in zip(names, widths))
    mre_row = "MRE        " + "  ".join(
        f"{reports[n].mre:.3e}".rjust(w) for n, w in zip(names, widths)
    )
    rmse_row = "RMSE (mm)  " + "  ".join(
        f"{reports[n].rmse_mm:.3f}".rjust(w) for n, w in zip(names, widths)
    )
    return "\n".join([head, mre_row, rmse_row])


def report_json(reports: Mapping[str, EvalReport]) -> str:
    doc = {name: rep.to_dict() for name, rep in reports.items()}
    if len(reports) >= 2:
        doc["ranking"] = compare_models(reports)
    return json.dumps(doc, indent=2)
