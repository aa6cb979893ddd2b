"""fringekit: fringe projection profilometry toolkit.

Synthesizes multi-frequency phase-shifted fringe stacks of simulated scenes,
recovers metric height maps (phase shifting + temporal unwrapping + rational
height model), and exports single-shot fringe-image/height-map datasets.
"""

from .calibration import (
    CalibrationModel,
    CalibrationSample,
    CoordNormalization,
    DegenerateCalibrationError,
    InvalidModelError,
    SingularDenominatorError,
    build_basis,
    fit,
    height_from_phase,
    load_model,
    predict_height,
    residual_stats,
    save_model,
)
from .dataset import (
    DatasetError,
    DatasetManifest,
    DatasetReader,
    Sample,
    export_dataset,
    load_dataset,
    split_counts,
)
from .formats import FormatError, read_mask_pgm, read_pfm, write_mask_pgm, write_pfm
from .metrics import EvalReport, compare_models, evaluate_pairs, mre, rmse
from .patterns import (
    DEFAULT_FREQUENCIES,
    FringeSpec,
    carrier_phase,
    phase_shift_offsets,
    reference_pattern,
)
from .phase import (
    ModulationMap,
    extract_wrapped_phase,
    modulation_mask,
    unwrap_temporal,
)
from .raster import (
    DimensionMismatchError,
    HeightMap,
    Mask,
    PhaseMap,
    ScalarImage,
    image_map_binary,
    wrap_to_principal,
)
from .scenes import (
    Cone,
    DegenerateGeometryError,
    GaussianBump,
    GroundTruthModel,
    HeightField,
    Ramp,
    RenderResult,
    SceneParams,
    SceneSpec,
    SphericalCap,
    default_ground_truth_model,
    height_grid,
    phase_from_height,
    random_scene,
    render_plane_stack,
    render_stack,
    sample_height,
)

__version__ = "0.1.0"
