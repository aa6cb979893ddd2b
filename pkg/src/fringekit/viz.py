"""Human-viewable renderings of height maps (binary PPM, fixed colormap)."""

from __future__ import annotations

import numpy as np

from .raster import HeightMap

# Fixed 9-anchor colormap (dark blue -> teal -> green -> yellow), linearly
# interpolated; perceptually ordered so monotone height reads as a monotone
# color ramp. Invalid pixels render black.
_ANCHORS = np.array(
    [
        [68, 1, 84],
        [71, 44, 122],
        [59, 81, 139],
        [44, 113, 142],
        [33, 144, 141],
        [39, 173, 129],
        [92, 200, 99],
        [170, 220, 50],
        [253, 231, 37],
    ],
    dtype=np.float64,
)


def colormap_rgb(t: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] to RGB bytes via the fixed anchor table."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    pos = t * (len(_ANCHORS) - 1)
    idx = np.minimum(pos.astype(int), len(_ANCHORS) - 2)
    frac = pos - idx
    lo = _ANCHORS[idx]
    hi = _ANCHORS[idx + 1]
    return np.rint(lo + frac[..., None] * (hi - lo)).astype(np.uint8)


def render_height_ppm(height: HeightMap, path) -> None:
    """Normalize valid heights to [0, 1], colorize, write binary PPM (P6)."""
    valid = height.mask.valid & np.isfinite(height.image.data)
    if not np.any(valid):
        raise ValueError("cannot render an all-invalid height map")
    z = height.image.data
    lo = z[valid].min()
    hi = z[valid].max()
    span = hi - lo
    t = (z - lo) / span if span > 0 else np.zeros_like(z)
    rgb = colormap_rgb(np.where(valid, t, 0.0))
    rgb[~valid] = 0
    header = f"P6\n{height.image.width} {height.image.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rgb.tobytes())
