"""Rational phase-to-height model: fitting, evaluation, serialization.

The model is z = (C.p) / (D.p) with the 12-term basis

    p = {1, phi, u, u*phi, v, v*phi, u^2, u^2*phi, v^2, v^2*phi, u*v, u*v*phi}

where (u, v) are affinely normalized pixel coordinates and phi is the
unwrapped phase of the highest-frequency fringes. The leading entry of C is
fixed at 1, which removes the global scale ambiguity and makes the fit a
linear least-squares problem.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raster import DimensionMismatchError, HeightMap, Mask, PhaseMap, ScalarImage

BASIS_SIZE = 12
CONDITION_LIMIT = 1e12


class DegenerateCalibrationError(RuntimeError):
    """Fit system is rank-deficient or numerically untrustworthy."""


class InvalidModelError(RuntimeError):
    """Fitted model violates the denominator sign invariant."""


class SingularDenominatorError(RuntimeError):
    """Model denominator vanished at a valid pixel."""


@dataclass(frozen=True)
class CoordNormalization:
    """Affine map from pixel (u, v) to normalized coordinates in [-1, 1]^2."""

    u_scale: float
    u_offset: float
    v_scale: float
    v_offset: float

    @classmethod
    def for_dims(cls, width: int, height: int) -> "CoordNormalization":
        u_scale = 2.0 / (width - 1) if width > 1 else 0.0
        v_scale = 2.0 / (height - 1) if height > 1 else 0.0
        return cls(u_scale, -1.0 if width > 1 else 0.0,
                   v_scale, -1.0 if height > 1 else 0.0)

    @classmethod
    def identity(cls) -> "CoordNormalization":
        return cls(1.0, 0.0, 1.0, 0.0)

    def apply(self, u, v):
        return (
            np.asarray(u, dtype=np.float64) * self.u_scale + self.u_offset,
            np.asarray(v, dtype=np.float64) * self.v_scale + self.v_offset,
        )


@dataclass(frozen=True, eq=False)
class CalibrationModel:
    """23 rational-model coefficients plus coordinate normalization."""

    c: np.ndarray  # c1..c11
    d: np.ndarray  # d0..d11
    coord_norm: CoordNormalization
    depth_range: tuple[float, float]
    fit_rms_mm: float = 0.0

    def __eq__(self, other):
        if not isinstance(other, CalibrationModel):
            return NotImplemented
        return (
            np.array_equal(self.c, other.c)
            and np.array_equal(self.d, other.d)
            and self.coord_norm == other.coord_norm
            and self.depth_range == other.depth_range
            and self.fit_rms_mm == other.fit_rms_mm
        )

    __hash__ = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=np.float64)
        d = np.asarray(self.d, dtype=np.float64)
        if c.shape != (11,):
            raise ValueError(f"expected 11 numerator coefficients, got {c.shape}")
        if d.shape != (12,):
            raise ValueError(f"expected 12 denominator coefficients, got {d.shape}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(d))):
            raise ValueError("model coefficients must be finite")
        c.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)
        object.__setattr__(
            self, "depth_range", (float(self.depth_range[0]), float(self.depth_range[1]))
        )


@dataclass(frozen=True)
class CalibrationSample:
    """One (pixel, unwrapped phase, known height) correspondence."""

    u: float
    v: float
    phi: float
    z: float


def build_basis(u_norm, v_norm, phi) -> np.ndarray:
    """The ordered 12-term basis vector; inputs broadcast, basis on last axis."""
    u, v, p = np.broadcast_arrays(
        np.asarray(u_norm, dtype=np.float64),
        np.asarray(v_norm, dtype=np.float64),
        np.asarray(phi, dtype=np.float64),
    )
    one = np.ones_like(u)
    return np.stack(
        [one, p, u, u * p, v, v * p, u * u, u * u * p, v * v, v * v * p, u * v, u * v * p],
        axis=-1,
    )


def _spatial_basis(u_norm, v_norm) -> np.ndarray:
    """Phase-free monomials {1, u, v, u^2, v^2, uv}, stacked on a new first axis."""
    u = np.asarray(u_norm, dtype=np.float64)
    v = np.asarray(v_norm, dtype=np.float64)
    one = np.ones_like(u)
    return np.stack([one, u, v, u * u, v * v, u * v])


def rational_parts(model: CalibrationModel, u_norm, v_norm):
    """Split C.p = A_C + phi*B_C and D.p = A_D + phi*B_D at normalized coords.

    Returns (A_C, B_C, A_D, B_D); used both for forward height evaluation and
    for the simulator's closed-form inversion.
    """
    s = _spatial_basis(u_norm, v_norm)
    c_full = np.concatenate([[1.0], model.c])
    a_c = np.tensordot(c_full[[0, 2, 4, 6, 8, 10]], s, axes=1)
    b_c = np.tensordot(c_full[[1, 3, 5, 7, 9, 11]], s, axes=1)
    a_d = np.tensordot(model.d[[0, 2, 4, 6, 8, 10]], s, axes=1)
    b_d = np.tensordot(model.d[[1, 3, 5, 7, 9, 11]], s, axes=1)
    return a_c, b_c, a_d, b_d


def predict_height(model: CalibrationModel, u, v, phi) -> np.ndarray:
    """z = (C.p)/(D.p) at pixel coordinates (normalization applied internally)."""
    un, vn = model.coord_norm.apply(u, v)
    a_c, b_c, a_d, b_d = rational_parts(model, un, vn)
    phi = np.asarray(phi, dtype=np.float64)
    return (a_c + phi * b_c) / (a_d + phi * b_d)


def _as_sample_arrays(samples):
    if isinstance(samples, tuple) and len(samples) == 4:
        u, v, phi, z = (np.asarray(a, dtype=np.float64).ravel() for a in samples)
    else:
        u = np.array([s.u for s in samples], dtype=np.float64)
        v = np.array([s.v for s in samples], dtype=np.float64)
        phi = np.array([s.phi for s in samples], dtype=np.float64)
        z = np.array([s.z for s in samples], dtype=np.float64)
    if not (len(u) == len(v) == len(phi) == len(z)):
        raise ValueError("sample arrays must have equal length")
    if not np.all(np.isfinite(u) & np.isfinite(v) & np.isfinite(phi) & np.isfinite(z)):
        raise ValueError("calibration samples must be finite")
    return u, v, phi, z


def _check_denominator_sign(model: CalibrationModel, phi_range, grid_n: int = 21):
    lin = np.linspace(-1.0, 1.0, grid_n)
    uu, vv = np.meshgrid(lin, lin)
    _, _, a_d, b_d = rational_parts(model, uu, vv)
    phis = np.linspace(phi_range[0], phi_range[1], 2 * grid_n)
    den = a_d[None, :, :] + phis[:, None, None] * b_d[None, :, :]
    if den.max() > 0 and den.min() < 0:
        raise InvalidModelError(
            "denominator D.p changes sign over the validation grid "
            f"(range [{den.min():.3e}, {den.max():.3e}])"
        )


def fit(
    samples,
    image_dims: tuple[int, int],
    normalize: bool = True,
    rcond: float = 1e-10,
) -> CalibrationModel:
    """Fit the 23 coefficients by linear least squares.

    ``samples`` is a sequence of CalibrationSample or a (u, v, phi, z) tuple
    of arrays; ``image_dims`` is (width, height) used for the coordinate
    normalization stored with the model. Each sample contributes one row of
    z*(D.p) = C.p rearranged with the leading C entry fixed at 1.

    Solved via truncated SVD (rank-revealing): the rational parameterization
    has exact gauge directions whenever the data lie on a sub-family of the
    model (numerator and denominator can absorb a common factor), and the
    minimum-norm solution in those directions predicts identically while
    keeping coefficients tame. Condition estimates of the retained spectrum
    beyond 1e12 are rejected.
    """
    u, v, phi, z = _as_sample_arrays(samples)
    n = len(u)
    if n < 23:
        raise DegenerateCalibrationError(
            f"need at least 23 samples to determine 23 coefficients, got {n}"
        )
    if len(np.unique(z)) < 3:
        raise DegenerateCalibrationError(
            "samples must span at least 3 distinct heights"
        )

    width, height = image_dims
    norm = CoordNormalization.for_dims(width, height) if normalize \
        else CoordNormalization.identity()
    un, vn = norm.apply(u, v)

    basis = build_basis(un, vn, phi)  # (n, 12)
    a = np.empty((n, 23), dtype=np.float64)
    a[:, :11] = basis[:, 1:]
    a[:, 11:] = -z[:, None] * basis
    b = np.full(n, -1.0)

    x, _, rank, sv = np.linalg.lstsq(a, b, rcond=rcond)
    if rank == 0:
        raise DegenerateCalibrationError("calibration system has rank 0")
    cond = sv[0] / sv[rank - 1]
    if cond > CONDITION_LIMIT:
        raise DegenerateCalibrationError(
            f"calibration system is degenerate: rank {rank}/23, "
            f"condition estimate {cond:.3e}"
        )

    model = CalibrationModel(
        c=x[:11],
        d=x[11:],
        coord_norm=norm,
        depth_range=(float(z.min()), float(z.max())),
    )
    _check_denominator_sign(model, (float(phi.min()), float(phi.max())))
    rms = float(np.sqrt(np.mean((predict_height(model, u, v, phi) - z) ** 2)))
    return CalibrationModel(
        c=model.c, d=model.d, coord_norm=norm,
        depth_range=model.depth_range, fit_rms_mm=rms,
    )


def height_from_phase(
    model: CalibrationModel, phase: PhaseMap, mask: Mask
) -> HeightMap:
    """Evaluate the model over an unwrapped phase map; invalid pixels -> NaN."""
    if phase.wrapped:
        raise ValueError("height_from_phase requires an unwrapped phase map")
    if phase.shape != mask.shape:
        raise DimensionMismatchError(
            f"phase {phase.shape} vs mask {mask.shape}"
        )
    h, w = phase.shape
    vv, uu = np.mgrid[0:h, 0:w]
    un, vn = model.coord_norm.apply(uu, vv)
    a_c, b_c, a_d, b_d = rational_parts(model, un, vn)
    phi = phase.image.data
    den = a_d + phi * b_d

    valid = mask.valid & np.isfinite(phi)
    if np.any(valid):
        absden = np.abs(den[valid])
        floor = 1e-12 * absden.max()
        bad = valid & (np.abs(den) <= floor)
        if np.any(bad):
            v_i, u_i = np.argwhere(bad)[0]
            raise SingularDenominatorError(
                f"denominator vanishes at valid pixel (u={u_i}, v={v_i})"
            )
    z = np.where(valid, (a_c + phi * b_c) / np.where(valid, den, 1.0), np.nan)
    return HeightMap(ScalarImage(z), Mask(valid))


def residual_stats(model: CalibrationModel, samples) -> dict:
    """RMS / max-abs / count of z_pred - z_true over calibration samples."""
    u, v, phi, z = _as_sample_arrays(samples)
    if len(u) == 0:
        raise ValueError("residual_stats needs at least one sample")
    r = predict_height(model, u, v, phi) - z
    return {
        "rms_mm": float(np.sqrt(np.mean(r * r))),
        "max_abs_mm": float(np.max(np.abs(r))),
        "count": int(len(r)),
    }


def save_model(model: CalibrationModel, path) -> None:
    """Write the calibration file (JSON, shortest round-trip float repr)."""
    doc = {
        "c": [float(x) for x in model.c],
        "d": [float(x) for x in model.d],
        "coord_norm": {
            "u_scale": model.coord_norm.u_scale,
            "u_offset": model.coord_norm.u_offset,
            "v_scale": model.coord_norm.v_scale,
            "v_offset": model.coord_norm.v_offset,
        },
        "depth_range": [model.depth_range[0], model.depth_range[1]],
        "fit_rms_mm": model.fit_rms_mm,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_model(path) -> CalibrationModel:
    doc = json.loads(Path(path).read_text())
    try:
        cn = doc["coord_norm"]
        return CalibrationModel(
            c=np.array(doc["c"], dtype=np.float64),
            d=np.array(doc["d"], dtype=np.float64),
            coord_norm=CoordNormalization(
                cn["u_scale"], cn["u_offset"], cn["v_scale"], cn["v_offset"]
            ),
            depth_range=(doc["depth_range"][0], doc["depth_range"][1]),
            fit_rms_mm=float(doc.get("fit_rms_mm", 0.0)),
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise ValueError(f"malformed calibration file {path}: {exc}") from exc
