"""Sinusoidal fringe pattern synthesis.

Patterns follow I(u, v) = I0 * [1 + cos(2*pi*f*u/w + delta)] for vertical
fringes (u replaced by v and w by the image height for horizontal ones).
Generation is in floating point; 8-bit quantization is a simulator option,
not a property of the patterns themselves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import TWO_PI, ScalarImage

DEFAULT_FREQUENCIES = (1.0, 4.0, 20.0, 100.0)


@dataclass(frozen=True)
class FringeSpec:
    """Projection protocol: frequency ladder, shift count, modulation, size."""

    frequencies: tuple = DEFAULT_FREQUENCIES
    steps: int = 4
    i0: float = 100.0
    width: int = 256
    height: int = 256
    orientation: str = "vertical"

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.frequencies)
        object.__setattr__(self, "frequencies", freqs)
        if len(freqs) < 1 or freqs[0] != 1.0:
            raise ValueError("frequency ladder must start at f1 = 1")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError(f"frequencies must be strictly increasing: {freqs}")
        if self.steps < 3:
            raise ValueError("phase retrieval needs at least 3 shift steps")
        if self.i0 <= 0:
            raise ValueError("intensity modulation i0 must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("pattern dimensions must be >= 1")
        if self.orientation not in ("vertical", "horizontal"):
            raise ValueError(f"unknown orientation {self.orientation!r}")

    @property
    def n_frequencies(self) -> int:
        return len(self.frequencies)


def phase_shift_offsets(steps: int) -> np.ndarray:
    """Equally spaced phase-shift offsets delta_j = 2*pi*j/m, j = 0..m-1."""
    if steps < 3:
        raise ValueError("phase retrieval needs at least 3 shift steps")
    return TWO_PI * np.arange(steps) / steps


def carrier_phase(spec: FringeSpec, freq_index: int) -> ScalarImage:
    """Phase field 2*pi*f*u/w of one ladder frequency (no shift offset)."""
    if not 0 <= freq_index < spec.n_frequencies:
        raise IndexError(
            f"frequency index {freq_index} out of range 0..{spec.n_frequencies - 1}"
        )
    f = spec.frequencies[freq_index]
    if spec.orientation == "vertical":
        axis = np.arange(spec.width, dtype=np.float64)
        phase = TWO_PI * f * axis / spec.width
        field = np.broadcast_to(phase, (spec.height, spec.width))
    else:
        axis = np.arange(spec.height, dtype=np.float64)
        phase = TWO_PI * f * axis / spec.height
        field = np.broadcast_to(phase[:, None], (spec.height, spec.width))
    return ScalarImage(field)


def reference_pattern(spec: FringeSpec, freq_index: int, step_index: int) -> ScalarImage:
    """One projector reference pattern for (frequency, shift) indices.

    Values lie in [0, 2*i0].
    """
    if not 0 <= step_index < spec.steps:
        raise IndexError(f"step index {step_index} out of range 0..{spec.steps - 1}")
    offsets = phase_shift_offsets(spec.steps)
    phase = carrier_phase(spec, freq_index)
    return ScalarImage(spec.i0 * (1.0 + np.cos(phase.data + offsets[step_index])))
