"""Synthetic scene generation and fringe-stack rendering.

The simulator defines the camera-plane phase directly through the inverse of
the rational height model with a chosen ground-truth coefficient set, instead
of ray tracing a projector/camera pair. That makes rendered stacks exactly
self-consistent with the analysis chain (phase extraction, temporal
unwrapping, height reconstruction), which is the point: physical realism is
a non-goal, end-to-end exactness is.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .calibration import CalibrationModel, CoordNormalization, rational_parts
from .patterns import FringeSpec, phase_shift_offsets
from .raster import HeightMap, Mask, ScalarImage

DEFAULT_DEPTH_RANGE = (0.0, 50.0)
# Phase band the default model maps the depth range onto. Keeping the band
# well inside (0, 200*pi) keeps the base-frequency phase clear of the
# [0, 2pi) boundary, which temporal unwrapping needs for absolute recovery.
_PHI_LOW = 0.05 * 200.0 * np.pi
_PHI_HIGH = 0.95 * 200.0 * np.pi
_SHADOW_SUPPRESSION = 0.01
_NOISE_STREAM = 0x5EED


class DegenerateGeometryError(RuntimeError):
    """Model inversion denominator too close to zero over the domain."""


# ---------------------------------------------------------------------------
# Height-field primitives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianBump:
    center: tuple[float, float]  # (u, v) pixels
    amplitude: float  # mm
    radius: float  # pixels (gaussian sigma)

    def evaluate(self, u, v):
        r2 = (u - self.center[0]) ** 2 + (v - self.center[1]) ** 2
        return self.amplitude * np.exp(-0.5 * r2 / self.radius**2)


@dataclass(frozen=True)
class SphericalCap:
    """Half-ellipsoid dome: height h at the center, 0 at the rim radius."""

    center: tuple[float, float]
    radius: float  # pixels
    height: float  # mm

    def evaluate(self, u, v):
        r2 = (u - self.center[0]) ** 2 + (v - self.center[1]) ** 2
        return self.height * np.sqrt(np.maximum(0.0, 1.0 - r2 / self.radius**2))


@dataclass(frozen=True)
class Cone:
    center: tuple[float, float]
    radius: float  # pixels
    height: float  # mm

    def evaluate(self, u, v):
        r = np.sqrt((u - self.center[0]) ** 2 + (v - self.center[1]) ** 2)
        return self.height * np.maximum(0.0, 1.0 - r / self.radius)


@dataclass(frozen=True)
class Ramp:
    """Linear wedge over a rectangular footprint; zero outside.

    The hard drop at the rectangle edges gives the height map genuine
    discontinuities (the multiple-separated-objects scenario).
    """

    rect: tuple[float, float, float, float]  # (u0, v0, u1, v1)
    height: float  # mm at the far edge
    axis: str = "u"  # gradient direction: "u" or "v"

    def evaluate(self, u, v):
        u0, v0, u1, v1 = self.rect
        inside = (u >= u0) & (u <= u1) & (v >= v0) & (v <= v1)
        if self.axis == "u":
            t = (u - u0) / max(u1 - u0, 1e-12)
        else:
            t = (v - v0) / max(v1 - v0, 1e-12)
        return np.where(inside, self.height * np.clip(t, 0.0, 1.0), 0.0)


Primitive = Union[GaussianBump, SphericalCap, Cone, Ramp]


@dataclass(frozen=True)
class HeightField:
    """Analytic ground-truth surface: primitive superposition on a z=0 plane."""

    primitives: tuple[Primitive, ...]
    width: int
    height: int

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        if self.width < 1 or self.height < 1:
            raise ValueError("height field extent must be >= 1 pixel")


def sample_height(field: HeightField, u, v):
    """Ground-truth height at (u, v); scalar or arrays, error out of extent."""
    u_arr = np.asarray(u, dtype=np.float64)
    v_arr = np.asarray(v, dtype=np.float64)
    if np.any((u_arr < 0) | (u_arr > field.width - 1) |
              (v_arr < 0) | (v_arr > field.height - 1)):
        raise ValueError("sample point outside the field extent")
    z = np.zeros(np.broadcast_shapes(u_arr.shape, v_arr.shape), dtype=np.float64)
    for prim in field.primitives:
        z = z + prim.evaluate(u_arr, v_arr)
    if np.ndim(u) == 0 and np.ndim(v) == 0:
        return float(z)
    return z


def height_grid(field: HeightField) -> np.ndarray:
    vv, uu = np.mgrid[0 : field.height, 0 : field.width]
    return sample_height(field, uu.astype(np.float64), vv.astype(np.float64))


# ---------------------------------------------------------------------------
# Ground-truth model (generative use of the rational height model)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroundTruthModel:
    """Calibration model used generatively; denominators validated on a grid."""

    model: CalibrationModel

    def __post_init__(self):
        validate_ground_truth(self.model)


def validate_ground_truth(model: CalibrationModel, grid_n: int = 25) -> None:
    """Check both denominators are bounded away from 0 over (u, v, z)."""
    lin = np.linspace(-1.0, 1.0, grid_n)
    uu, vv = np.meshgrid(lin, lin)
    _, b_c, a_d, b_d = rational_parts(model, uu, vv)
    z_lo, z_hi = model.depth_range
    zs = np.linspace(z_lo, z_hi, grid_n)

    inv_den = zs[:, None, None] * b_d[None] - b_c[None]
    inv_max = np.max(np.abs(inv_den))
    if inv_max == 0 or np.min(np.abs(inv_den)) < 1e-6 * inv_max:
        raise DegenerateGeometryError(
            "inversion denominator z*B_D - B_C approaches zero over the domain"
        )
    # forward denominator over the phase band induced by the depth range
    a_c = rational_parts(model, uu, vv)[0]
    phi = (a_c[None] - zs[:, None, None] * a_d[None]) / inv_den
    den = a_d[None] + phi * b_d[None]
    den_max = np.max(np.abs(den))
    if den_max == 0 or np.min(np.abs(den)) < 1e-6 * den_max:
        raise DegenerateGeometryError(
            "denominator D.p approaches zero over the domain"
        )


def default_ground_truth_model(
    width: int, height: int, depth_range: tuple[float, float] = DEFAULT_DEPTH_RANGE
) -> GroundTruthModel:
    """Built-in simulation-truth coefficients.

    Maps z = depth max to phase ~31.4 rad and z = depth min to ~596.9 rad,
    monotonically, so the base-frequency phase phi/100 stays inside (0, 2pi)
    with ~0.3 rad guard bands over the whole field. Small second-order terms
    exercise every basis coefficient without threatening monotonicity.
    """
    z_lo, z_hi = depth_range
    if not z_hi > z_lo:
        raise ValueError("depth range must be increasing")
    span = z_hi - z_lo
    c1 = -1.0 / _PHI_HIGH
    d1 = 2e-5
    d0 = (1.0 + c1 * _PHI_LOW) / span - d1 * _PHI_LOW
    c = np.array([c1, 1e-4, 1e-6, -1e-4, -1e-6, 2e-5, 1e-7, -1e-5, -1e-7, 1e-5, 1e-7])
    d = np.array([d0, d1, 1e-5, 2e-7, -1e-5, -2e-7, 2e-6, 1e-8, 2e-6, -1e-8, -1e-6, 1e-8])
    model = CalibrationModel(
        c=c,
        d=d,
        coord_norm=CoordNormalization.for_dims(width, height),
        depth_range=(float(z_lo), float(z_hi)),
    )
    return GroundTruthModel(model)


def phase_from_height(model: GroundTruthModel, u, v, z):
    """Invert z = (C.p)/(D.p) for phi at pixel coordinates.

    With C.p = A_C + phi*B_C and D.p = A_D + phi*B_D (phi-free and
    phi-carrying halves of the basis), phi = (A_C - z*A_D) / (z*B_D - B_C).
    """
    calib = model.model
    un, vn = calib.coord_norm.apply(u, v)
    a_c, b_c, a_d, b_d = rational_parts(calib, un, vn)
    z_arr = np.asarray(z, dtype=np.float64)
    den = z_arr * b_d - b_c
    absden = np.abs(den)
    if np.min(absden) < 1e-6 * max(np.max(absden), np.finfo(float).tiny):
        raise DegenerateGeometryError(
            "inversion denominator z*B_D - B_C too close to zero"
        )
    phi = (a_c - z_arr * a_d) / den
    if np.ndim(z) == 0 and np.ndim(u) == 0:
        return float(phi)
    return phi


# ---------------------------------------------------------------------------
# Scenes and rendering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SceneSpec:
    """Everything needed to render one sample deterministically.

    Albedo values must clear the downstream modulation-mask threshold
    (default 5% of nominal) for unshadowed pixels to survive masking.
    """

    height_field: HeightField
    albedo: ScalarImage
    ambient: float = 0.0
    contrast: float = 1.0  # fringe visibility in (0, 1]
    noise_sigma: float = 0.0  # gray levels
    quantize_8bit: bool = False
    shadow_regions: tuple = ()  # polygons: tuples of (u, v) vertices
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self,
            "shadow_regions",
            tuple(tuple((float(u), float(v)) for u, v in poly)
                  for poly in self.shadow_regions),
        )
        if self.albedo.shape != (self.height_field.height, self.height_field.width):
            raise ValueError("albedo dimensions must match the height field extent")
        a = self.albedo.data
        if np.any(a <= 0) or np.any(a > 1):
            raise ValueError("albedo values must lie in (0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0 < self.contrast <= 1:
            raise ValueError("contrast must lie in (0, 1]")


class RenderResult(NamedTuple):
    stack: list  # [n frequencies][m steps] of ScalarImage
    truth: HeightMap
    mask: Mask
    phase: np.ndarray  # highest-frequency unwrapped phase field (diagnostics)


def rasterize_polygons(polygons, height: int, width: int) -> np.ndarray:
    """Even-odd fill of polygons over pixel centers; True inside."""
    inside = np.zeros((height, width), dtype=bool)
    if not polygons:
        return inside
    vv, uu = np.mgrid[0:height, 0:width]
    for poly in polygons:
        verts = list(poly)
        if len(verts) < 3:
            raise ValueError("shadow polygon needs at least 3 vertices")
        hit = np.zeros_like(inside)
        n = len(verts)
        for i in range(n):
            u1, v1 = verts[i]
            u2, v2 = verts[(i + 1) % n]
            crosses = (v1 > vv) != (v2 > vv)
            with np.errstate(divide="ignore", invalid="ignore"):
                ucross = u1 + (vv - v1) / (v2 - v1) * (u2 - u1)
            hit ^= crosses & (uu < ucross)
        inside |= hit
    return inside


def _render_from_height(
    z: np.ndarray,
    albedo: np.ndarray,
    ambient: float,
    contrast: float,
    shadow: np.ndarray,
    noise_sigma: float,
    quantize: bool,
    seed: int,
    model: GroundTruthModel,
    spec: FringeSpec,
) -> tuple[list, np.ndarray]:
    h, w = z.shape
    vv, uu = np.mgrid[0:h, 0:w]
    phi_n = phase_from_height(model, uu.astype(np.float64), vv.astype(np.float64), z)

    offsets = phase_shift_offsets(spec.steps)
    f_n = spec.frequencies[-1]
    amp = albedo * spec.i0 * contrast
    amp = np.where(shadow, _SHADOW_SUPPRESSION * amp, amp)
    dc = albedo * spec.i0 + ambient

    rng = np.random.default_rng(np.random.SeedSequence([seed, _NOISE_STREAM]))
    stack = []
    for f in spec.frequencies:
        phi_i = phi_n * (f / f_n)
        row = []
        for delta in offsets:
            img = dc + amp * np.cos(phi_i + delta)
            if noise_sigma > 0:
                img = img + rng.normal(0.0, noise_sigma, size=img.shape)
            if quantize:
                img = np.rint(np.clip(img, 0.0, 255.0))
            row.append(ScalarImage(img))
        stack.append(row)
    return stack, phi_n


def render_stack(
    scene: SceneSpec, model: GroundTruthModel, spec: FringeSpec
) -> RenderResult:
    """Render the full multi-frequency phase-shifted stack of a scene.

    The phase ladder is exact by construction (phi_i = phi_n * f_i / f_n),
    so noiseless stacks unwrap exactly. Shadow polygons suppress the fringe
    term to 1% of nominal and are marked invalid in the returned mask; the
    ground-truth height map carries NaN there.
    """
    field = scene.height_field
    if (field.height, field.width) != (spec.height, spec.width):
        raise ValueError(
            f"scene extent {(field.width, field.height)} does not match "
            f"fringe spec {(spec.width, spec.height)}"
        )
    z = height_grid(field)
    z_lo, z_hi = model.model.depth_range
    if z.min() < z_lo - 1e-9 or z.max() > z_hi + 1e-9:
        raise ValueError(
            f"scene heights [{z.min():.3f}, {z.max():.3f}] exceed the model "
            f"depth range [{z_lo}, {z_hi}]"
        )

    shadow = rasterize_polygons(scene.shadow_regions, field.height, field.width)
    stack, phi_n = _render_from_height(
        z, scene.albedo.data, scene.ambient, scene.contrast, shadow,
        scene.noise_sigma, scene.quantize_8bit, scene.seed, model, spec,
    )
    valid = ~shadow
    truth = HeightMap(ScalarImage(np.where(valid, z, np.nan)), Mask(valid))
    return RenderResult(stack=stack, truth=truth, mask=Mask(valid), phase=phi_n)


def render_plane_stack(
    z_mm: float,
    model: GroundTruthModel,
    spec: FringeSpec,
    *,
    noise_sigma: float = 0.0,
    quantize_8bit: bool = False,
    seed: int = 0,
) -> RenderResult:
    """Render a gauge plane at constant height (for calibration)."""
    z = np.full((spec.height, spec.width), float(z_mm))
    shadow = np.zeros_like(z, dtype=bool)
    albedo = np.ones_like(z)
    stack, phi_n = _render_from_height(
        z, albedo, 0.0, 1.0, shadow, noise_sigma, quantize_8bit, seed, model, spec
    )
    valid = ~shadow
    truth = HeightMap(ScalarImage(z), Mask(valid))
    return RenderResult(stack=stack, truth=truth, mask=Mask(valid), phase=phi_n)


# ---------------------------------------------------------------------------
# Random scene generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SceneParams:
    """Ranges for random scene synthesis (all ranges inclusive)."""

    primitive_count: tuple[int, int] = (1, 4)
    amplitude_mm: tuple[float, float] = (5.0, 40.0)
    radius_px: tuple[float, float] = (12.0, 64.0)
    albedo: tuple[float, float] = (0.4, 1.0)
    ambient: float = 5.0
    contrast: float = 1.0
    noise_sigma: float = 0.5
    quantize_8bit: bool = True
    shadow_count: tuple[int, int] = (0, 2)
    depth_max: float = DEFAULT_DEPTH_RANGE[1]

    def __post_init__(self):
        for name in ("primitive_count", "amplitude_mm", "radius_px", "albedo",
                     "shadow_count"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ValueError(f"empty range for {name}: ({lo}, {hi})")
        if self.amplitude_mm[0] <= 0 or self.amplitude_mm[1] > self.depth_max:
            raise ValueError(
                "amplitude range must lie within (0, depth_max] = "
                f"(0, {self.depth_max}]"
            )


def random_scene(
    seed: int, params: SceneParams, width: int, height: int
) -> SceneSpec:
    """Deterministic scene from a seed: primitives, albedo, shadows.

    Amplitudes are rescaled when a superposition could exceed 90% of the
    depth range, keeping every scene inside the calibrated validity band.
    """
    rng = np.random.default_rng(seed)
    n_prim = int(rng.integers(params.primitive_count[0], params.primitive_count[1] + 1))
    amps = rng.uniform(*params.amplitude_mm, size=n_prim)
    total = amps.sum()
    limit = 0.9 * params.depth_max
    if total > limit:
        amps *= limit / total

    prims = []
    for k in range(n_prim):
        kind = int(rng.integers(0, 4))
        cu = float(rng.uniform(0, width - 1))
        cv = float(rng.uniform(0, height - 1))
        radius = float(rng.uniform(*params.radius_px))
        amp = float(amps[k])
        if kind == 0:
            prims.append(GaussianBump((cu, cv), amp, radius))
        elif kind == 1:
            prims.append(SphericalCap((cu, cv), radius, amp))
        elif kind == 2:
            prims.append(Cone((cu, cv), radius, amp))
        else:
            du = float(rng.uniform(radius, 2.5 * radius))
            dv = float(rng.uniform(radius, 2.5 * radius))
            u0 = min(max(cu - du / 2, 0.0), width - 2.0)
            v0 = min(max(cv - dv / 2, 0.0), height - 2.0)
            rect = (u0, v0, min(u0 + du, width - 1.0), min(v0 + dv, height - 1.0))
            prims.append(Ramp(rect, amp, axis="u" if rng.random() < 0.5 else "v"))

    field = HeightField(tuple(prims), width, height)
    albedo_value = float(rng.uniform(*params.albedo))
    albedo = ScalarImage(np.full((height, width), albedo_value))

    n_shadow = int(rng.integers(params.shadow_count[0], params.shadow_count[1] + 1))
    polygons = []
    for _ in range(n_shadow):
        cu = rng.uniform(0.1 * width, 0.9 * width)
        cv = rng.uniform(0.1 * height, 0.9 * height)
        n_vert = int(rng.integers(3, 6))
        angles = np.sort(rng.uniform(0, 2 * np.pi, size=n_vert))
        radii = rng.uniform(0.04, 0.15, size=n_vert) * min(width, height)
        verts = tuple(
            (float(np.clip(cu + r * np.cos(a), 0, width - 1)),
             float(np.clip(cv + r * np.sin(a), 0, height - 1)))
            for r, a in zip(radii, angles)
        )
        polygons.append(verts)

    return SceneSpec(
        height_field=field,
        albedo=albedo,
        ambient=params.ambient,
        contrast=params.contrast,
        noise_sigma=params.noise_sigma,
        quantize_8bit=params.quantize_8bit,
        shadow_regions=tuple(polygons),
        seed=int(seed),
    )
