"""Gauge-plane calibration and metric reconstruction, start to finish.

Five flat planes at known heights are rendered with camera noise and 8-bit
quantization, the rational height model is fitted from them, and a held-out
scene is reconstructed and scored against its ground truth.
"""

import numpy as np

from fringekit import (
    FringeSpec,
    SceneParams,
    default_ground_truth_model,
    extract_wrapped_phase,
    fit,
    height_from_phase,
    modulation_mask,
    mre,
    phase_shift_offsets,
    random_scene,
    render_plane_stack,
    render_stack,
    rmse,
    unwrap_temporal,
)

size = 256
spec = FringeSpec(width=size, height=size)
truth_model = default_ground_truth_model(size, size)
offsets = phase_shift_offsets(spec.steps)


def recover_phase(stack, nominal):
    wrapped = []
    mod = None
    for row in stack:
        pm, mod = extract_wrapped_phase(row, offsets)
        wrapped.append(pm)
    return unwrap_temporal(wrapped, spec.frequencies), modulation_mask(mod, nominal)


# --- calibration from gauge planes -----------------------------------------
plane_heights = (5.0, 15.0, 25.0, 35.0, 45.0)
us, vs, phis, zs = [], [], [], []
for k, z in enumerate(plane_heights):
    res = render_plane_stack(z, truth_model, spec, noise_sigma=0.5,
                             quantize_8bit=True, seed=k)
    unwrapped, mask = recover_phase(res.stack, spec.i0)
    stride = 4
    vv, uu = np.mgrid[0:size:stride, 0:size:stride]
    keep = mask.valid[::stride, ::stride]
    us.append(uu[keep].astype(float))
    vs.append(vv[keep].astype(float))
    phis.append(unwrapped.image.data[::stride, ::stride][keep])
    zs.append(np.full(int(keep.sum()), z))

model = fit((np.concatenate(us), np.concatenate(vs),
             np.concatenate(phis), np.concatenate(zs)), (size, size))
print(f"fitted from {sum(len(u) for u in us)} samples on {len(plane_heights)} planes")
print(f"fit RMS: {model.fit_rms_mm:.5f} mm")

# --- held-out reconstruction -------------------------------------------------
scene = random_scene(321, SceneParams(noise_sigma=0.5, quantize_8bit=True),
                     size, size)
res = render_stack(scene, truth_model, spec)
unwrapped, mask = recover_phase(res.stack, spec.i0 * scene.contrast)
recon = height_from_phase(model, unwrapped, mask)

print(f"\nheld-out scene: RMSE {rmse(recon, res.truth):.5f} mm, "
      f"MRE {mre(recon, res.truth, depth_range=50.0):.2e} "
      f"(depth range 50 mm)")
print("the paper-scale accuracy bound for this setup is 0.1 mm RMSE")
