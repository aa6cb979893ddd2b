"""Phase-shifting analysis and multi-frequency temporal unwrapping.

All operations are per-pixel and pure: no spatial propagation is involved,
which is what makes the temporal scheme robust to discontinuous surfaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .raster import TWO_PI, DimensionMismatchError, Mask, PhaseMap, ScalarImage


@dataclass(frozen=True)
class ModulationMap:
    """Fringe modulation amplitude (gray levels); low values mean shadow."""

    image: ScalarImage

    def __post_init__(self):
        vals = self.image.data
        finite = np.isfinite(vals)
        if np.any(vals[finite] < 0):
            raise ValueError("modulation must be non-negative at valid pixels")


def _check_stack(images: Sequence[ScalarImage], offsets: np.ndarray) -> np.ndarray:
    if len(images) < 3:
        raise ValueError(f"need at least 3 phase-shifted images, got {len(images)}")
    if len(offsets) != len(images):
        raise ValueError(
            f"{len(images)} images but {len(offsets)} phase offsets"
        )
    shape = images[0].shape
    for im in images[1:]:
        if im.shape != shape:
            raise DimensionMismatchError(
                f"image shapes differ within stack: {shape} vs {im.shape}"
            )
    return np.stack([im.data.astype(np.float64) for im in images])


def extract_wrapped_phase(
    images: Sequence[ScalarImage], offsets
) -> tuple[PhaseMap, ModulationMap]:
    """Least-squares phase and modulation from m >= 3 shifted images.

    Per pixel: S = sum_j I_j sin(d_j), C = sum_j I_j cos(d_j),
    phase = atan2(-S, C) and modulation = (2/m) * sqrt(S^2 + C^2). For the
    four-step case with offsets (0, pi/2, pi, 3pi/2) this is evaluated in
    the algebraically identical difference form atan2(I4-I2, I1-I3), which
    returns exact zeros for constant (fringe-free) input.

    Zero-modulation pixels get phase 0 (the atan2(0, 0) convention) and are
    expected to be masked downstream.
    """
    offsets = np.asarray(offsets, dtype=np.float64)
    stack = _check_stack(images, offsets)
    m = stack.shape[0]

    four_step = m == 4 and np.allclose(offsets, TWO_PI * np.arange(4) / 4, atol=0.0)
    if four_step:
        num = stack[3] - stack[1]
        den = stack[0] - stack[2]
    else:
        s = np.tensordot(np.sin(offsets), stack, axes=1)
        c = np.tensordot(np.cos(offsets), stack, axes=1)
        num = -s
        den = c

    phase = np.arctan2(num, den)
    phase = np.where(phase == -np.pi, np.pi, phase)
    modulation = (2.0 / m) * np.hypot(num, den)
    return (
        PhaseMap(ScalarImage(phase), wrapped=True),
        ModulationMap(ScalarImage(modulation)),
    )


def modulation_mask(
    mod: ModulationMap, nominal: float, threshold_fraction: float = 0.05
) -> Mask:
    """Validity mask: modulation >= threshold_fraction * nominal.

    ``nominal`` is the expected full-signal modulation (visibility * i0);
    pixels below the fraction of it are treated as shadow.
    """
    if not 0.0 < threshold_fraction < 1.0:
        raise ValueError("threshold_fraction must be in (0, 1)")
    if nominal <= 0:
        raise ValueError("nominal modulation must be positive")
    vals = mod.image.data
    valid = np.isfinite(vals) & (vals >= threshold_fraction * nominal)
    return Mask(valid)


def _round_half_away(x: np.ndarray) -> np.ndarray:
    # numpy rounds half-to-even; the ladder correction rounds ties away
    # from zero (noiseless data never produces ties).
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def unwrap_temporal(wrapped: Sequence[PhaseMap], frequencies) -> PhaseMap:
    """Unwrap a ladder of wrapped phase maps from f1 = 1 up to fn.

    The base map is remapped to [0, 2pi) (negatives + 2pi), which is the
    absolute phase of the single-fringe pattern. Each following rung i adds
    the 2pi multiple nearest to the prediction from the previous rung:

        phi_i = w_i + round((phi_{i-1} * f_i / f_{i-1} - w_i) / 2pi) * 2pi

    Everything is per-pixel; NaNs at masked pixels stay NaN.
    """
    freqs = [float(f) for f in frequencies]
    if len(wrapped) != len(freqs):
        raise ValueError(
            f"{len(wrapped)} phase maps but {len(freqs)} ladder frequencies"
        )
    if len(wrapped) < 2:
        raise ValueError("temporal unwrapping needs at least 2 frequencies")
    if freqs[0] != 1.0:
        raise ValueError("ladder must start at f1 = 1")
    if any(b <= a for a, b in zip(freqs, freqs[1:])):
        raise ValueError(f"ladder frequencies must be strictly increasing: {freqs}")
    shape = wrapped[0].shape
    for pm in wrapped:
        if pm.shape != shape:
            raise DimensionMismatchError("phase map dimensions differ across ladder")
        if not pm.wrapped:
            raise ValueError("unwrap_temporal expects wrapped phase maps")

    base = wrapped[0].image.data
    phi = np.where(base < 0, base + TWO_PI, base)
    for i in range(1, len(freqs)):
        w_i = wrapped[i].image.data
        predicted = phi * (freqs[i] / freqs[i - 1])
        order = _round_half_away((predicted - w_i) / TWO_PI)
        phi = w_i + order * TWO_PI
    return PhaseMap(ScalarImage(phi), wrapped=False)
