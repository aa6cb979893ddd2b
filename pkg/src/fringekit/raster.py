"""Core raster types and phase arithmetic shared by the whole toolkit.

Conventions
-----------
- Pixel (u, v) = (column, row), origin at the top-left corner.
- Arrays are row-major with shape (height, width).
- Invalid pixels carry NaN in float rasters; an explicit Mask is the
  authoritative record of validity.
- All types are immutable after construction, so they can be shared
  freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

TWO_PI = 2.0 * np.pi


class DimensionMismatchError(ValueError):
    """Raised when two rasters that must share dimensions do not."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ScalarImage:
    """Dense 2D grid of real values (gray levels, radians, or mm).

    The unit is carried by context; the class only guarantees shape and
    floating dtype. float32 input is kept as float32 (so file round trips
    stay bit-exact); everything else is converted to float64.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"image data must be 2D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image dimensions must be >= 1, got {arr.shape}")
        if arr.dtype != np.float32 and arr.dtype != np.float64:
            arr = arr.astype(np.float64)
        object.__setattr__(self, "data", _freeze(arr))

    def __eq__(self, other):
        if not isinstance(other, ScalarImage):
            return NotImplemented
        return self.data.dtype == other.data.dtype and np.array_equal(
            self.data, other.data, equal_nan=True
        )

    __hash__ = None

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True, eq=False)
class Mask:
    """Boolean validity raster qualifying an image of the same dimensions."""

    valid: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.valid)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2D, got shape {arr.shape}")
        if arr.dtype != np.bool_:
            arr = arr.astype(bool)
        object.__setattr__(self, "valid", _freeze(arr))

    def __eq__(self, other):
        if not isinstance(other, Mask):
            return NotImplemented
        return np.array_equal(self.valid, other.valid)

    __hash__ = None

    @property
    def width(self) -> int:
        return self.valid.shape[1]

    @property
    def height(self) -> int:
        return self.valid.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid.shape

    @classmethod
    def all_valid(cls, height: int, width: int) -> "Mask":
        return cls(np.ones((height, width), dtype=bool))

    def __and__(self, other: "Mask") -> "Mask":
        if self.shape != other.shape:
            raise DimensionMismatchError(
                f"mask shapes differ: {self.shape} vs {other.shape}"
            )
        return Mask(self.valid & other.valid)


@dataclass(frozen=True)
class PhaseMap:
    """Phase raster in radians; ``wrapped`` marks principal-interval values.

    Wrapped maps hold values in (-pi, pi] at every finite pixel.
    """

    image: ScalarImage
    wrapped: bool

    def __post_init__(self):
        if self.wrapped:
            vals = self.image.data
            finite = np.isfinite(vals)
            if np.any((vals[finite] <= -np.pi) | (vals[finite] > np.pi)):
                raise ValueError("wrapped phase values must lie in (-pi, pi]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape


@dataclass(frozen=True)
class HeightMap:
    """Metric height raster (mm) with its validity mask.

    Valid pixels are finite; invalid pixels normally carry NaN.
    """

    image: ScalarImage
    mask: Mask

    def __post_init__(self):
        if self.image.shape != self.mask.shape:
            raise DimensionMismatchError(
                f"height {self.image.shape} vs mask {self.mask.shape}"
            )
        if not np.all(np.isfinite(self.image.data[self.mask.valid])):
            raise ValueError("height map has non-finite values at valid pixels")

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape


def wrap_to_principal(theta):
    """Wrap angles onto the principal interval (-pi, pi].

    Defined as atan2(sin(theta), cos(theta)); inputs already inside the
    interval pass through unchanged, which makes the operation exactly
    idempotent. Accepts scalars or arrays.
    """
    arr = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("wrap_to_principal requires finite input")
    wrapped = np.arctan2(np.sin(arr), np.cos(arr))
    # atan2 can land on -pi exactly; -pi == pi (mod 2pi) and pi is the
    # representative inside the half-open interval.
    wrapped = np.where(wrapped == -np.pi, np.pi, wrapped)
    inside = (arr > -np.pi) & (arr <= np.pi)
    out = np.where(inside, arr, wrapped)
    if np.ndim(theta) == 0:
        return float(out)
    return out


def image_map_binary(
    a: ScalarImage, b: ScalarImage, f: Callable[[np.ndarray, np.ndarray], np.ndarray]
) -> ScalarImage:
    """Apply a pointwise binary function to two same-sized images."""
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"image shapes differ: {a.shape} vs {b.shape}"
        )
    return ScalarImage(f(a.data, b.data))
