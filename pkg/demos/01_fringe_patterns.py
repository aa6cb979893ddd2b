"""Generate the projector's reference fringe patterns and inspect them.

Writes one PFM per (frequency, shift) pair plus a quick statistics dump, and
checks the textbook identities: values in [0, 2*I0], mean over a period = I0.
"""

from pathlib import Path

import numpy as np

from fringekit import FringeSpec, phase_shift_offsets, reference_pattern, write_pfm

out = Path("out/patterns")
out.mkdir(parents=True, exist_ok=True)

spec = FringeSpec(frequencies=(1, 4, 20, 100), steps=4, i0=100.0,
                  width=512, height=384)
offsets = phase_shift_offsets(spec.steps)
print(f"ladder {spec.frequencies}, shifts {np.round(offsets, 4)} rad")

for i, f in enumerate(spec.frequencies):
    for j in range(spec.steps):
        pattern = reference_pattern(spec, i, j)
        write_pfm(pattern, out / f"f{f:g}_s{j}.pfm")
    pattern = reference_pattern(spec, i, 0).data
    # a full row spans exactly f periods, so its mean is the DC term I0
    print(
        f"f={f:>5g}: min {pattern.min():7.3f}  max {pattern.max():7.3f}  "
        f"row mean {pattern[0].mean():9.5f}  (period {spec.width / f:g} px)"
    )

print(f"\nwrote {spec.n_frequencies * spec.steps} patterns to {out}/")
