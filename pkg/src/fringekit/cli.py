"""Command-line surface: synth, calibrate, reconstruct, eval, render.

Commands take a TOML config (``--config``) plus flag overrides, flags
winning. Everything is deterministic given config + seed. Exit codes:
0 success, 1 runtime/data error, 2 config/usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import calibration, metrics, viz
from .dataset import Sample, export_dataset, load_dataset
from .formats import read_mask_pgm, read_pfm, write_mask_pgm, write_pfm
from .patterns import FringeSpec, phase_shift_offsets
from .phase import extract_wrapped_phase, modulation_mask, unwrap_temporal
from .raster import HeightMap, Mask, ScalarImage
from .scenes import (
    GroundTruthModel,
    SceneParams,
    default_ground_truth_model,
    random_scene,
    render_plane_stack,
    render_stack,
)

STACK_META = "stack.json"


class ConfigError(ValueError):
    """Invalid pipeline configuration; maps to exit code 2."""


@dataclass(frozen=True)
class PipelineConfig:
    fringe: FringeSpec
    scene: SceneParams
    model_source: str = "default"
    split: tuple = (0.8, 0.1, 0.1)
    count: int | None = None  # total samples when split is given as ratios
    out_dir: str = "dataset"
    keep_stacks: bool = False
    seed: int = 0
    jobs: int = 1


def _tuple2(value, name):
    try:
        a, b = value
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field {name!r} must have exactly 2 entries") from exc
    return (a, b)


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Parse and fully validate the TOML config before any work starts."""
    doc: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from exc
    overrides = overrides or {}

    fr = doc.get("fringe", {})
    sc = doc.get("scene", {})
    ds = doc.get("dataset", {})
    md = doc.get("model", {})

    def pick(section, key, default):
        return overrides.get(key, section.get(key, default))

    try:
        fringe = FringeSpec(
            frequencies=tuple(pick(fr, "frequencies", (1, 4, 20, 100))),
            steps=int(pick(fr, "steps", 4)),
            i0=float(pick(fr, "i0", 100.0)),
            width=int(pick(fr, "width", 256)),
            height=int(pick(fr, "height", 256)),
            orientation=str(pick(fr, "orientation", "vertical")),
        )
    except ValueError as exc:
        raise ConfigError(f"field [fringe]: {exc}") from exc

    try:
        scene = SceneParams(
            primitive_count=tuple(
                int(x) for x in _tuple2(pick(sc, "primitive_count", (1, 4)),
                                        "scene.primitive_count")
            ),
            amplitude_mm=tuple(
                float(x) for x in _tuple2(pick(sc, "amplitude_mm", (5.0, 40.0)),
                                          "scene.amplitude_mm")
            ),
            radius_px=tuple(
                float(x) for x in _tuple2(pick(sc, "radius_px", (12.0, 64.0)),
                                          "scene.radius_px")
            ),
            albedo=tuple(
                float(x) for x in _tuple2(pick(sc, "albedo", (0.4, 1.0)),
                                          "scene.albedo")
            ),
            ambient=float(pick(sc, "ambient", 5.0)),
            contrast=float(pick(sc, "contrast", 1.0)),
            noise_sigma=float(pick(sc, "noise_sigma", 0.5)),
            quantize_8bit=bool(pick(sc, "quantize_8bit", True)),
            shadow_count=tuple(
                int(x) for x in _tuple2(pick(sc, "shadow_count", (0, 2)),
                                        "scene.shadow_count")
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"field [scene]: {exc}") from exc

    split = overrides.get("split")
    if split is None:
        if "counts" in ds:
            split = tuple(int(x) for x in ds["counts"])
        elif "ratios" in ds:
            split = tuple(float(x) for x in ds["ratios"])
        else:
            split = (0.8, 0.1, 0.1)
    if len(split) != 3:
        raise ConfigError("field [dataset] counts/ratios: need exactly 3 entries")
    if not all(isinstance(s, (int, np.integer)) for s in split):
        if abs(sum(float(s) for s in split) - 1.0) > 1e-9:
            raise ConfigError(
                f"field [dataset] ratios: must sum to 1, got {sum(split)!r}"
            )

    count = overrides.get("count", ds.get("count"))
    return PipelineConfig(
        fringe=fringe,
        scene=scene,
        model_source=str(pick(md, "source", "default")),
        split=split,
        count=None if count is None else int(count),
        out_dir=str(pick(ds, "out_dir", "dataset")),
        keep_stacks=bool(pick(ds, "keep_stacks", False)),
        seed=int(overrides.get("seed", doc.get("seed", 0))),
        jobs=int(overrides.get("jobs", doc.get("jobs", 1))),
    )


def _resolve_model(config: PipelineConfig) -> GroundTruthModel:
    if config.model_source == "default":
        return default_ground_truth_model(config.fringe.width, config.fringe.height)
    model = calibration.load_model(config.model_source)
    return GroundTruthModel(model)


# ---------------------------------------------------------------------------
# Stack directories
# ---------------------------------------------------------------------------

def write_stack(stack, spec: FringeSpec, nominal_modulation: float, out_dir,
                plane_z: float | None = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "frequencies": list(spec.frequencies),
        "steps": spec.steps,
        "i0": spec.i0,
        "width": spec.width,
        "height": spec.height,
        "nominal_modulation": nominal_modulation,
    }
    if plane_z is not None:
        meta["plane_z"] = plane_z
    (out / STACK_META).write_text(json.dumps(meta, indent=2) + "\n")
    for i, row in enumerate(stack):
        for j, img in enumerate(row):
            write_pfm(img, out / f"f{i}_s{j}.pfm")


def read_stack(stack_dir):
    """Load a stack directory -> (meta dict, [n][m] ScalarImage)."""
    root = Path(stack_dir)
    meta_path = root / STACK_META
    if not meta_path.exists():
        raise FileNotFoundError(f"no {STACK_META} in {root}")
    meta = json.loads(meta_path.read_text())
    freqs = meta["frequencies"]
    steps = int(meta["steps"])
    missing = []
    found = []
    stack = []
    for i, f in enumerate(freqs):
        row = []
        complete = True
        for j in range(steps):
            p = root / f"f{i}_s{j}.pfm"
            if not p.exists():
                complete = False
                missing.append(f"f={f:g} step {j}")
                continue
            row.append(read_pfm(p))
        if complete:
            found.append(f"f={f:g}")
            stack.append(row)
    if missing:
        raise FileNotFoundError(
            f"stack {root} is incomplete: missing [{', '.join(missing)}]; "
            f"found complete frequencies [{', '.join(found)}]"
        )
    return meta, stack


def reconstruct_from_stack(meta: dict, stack, model: calibration.CalibrationModel,
                           threshold_fraction: float = 0.05) -> HeightMap:
    """extract -> mask -> unwrap -> height for one loaded stack."""
    offsets = phase_shift_offsets(int(meta["steps"]))
    wrapped = []
    top_modulation = None
    for row in stack:
        pm, mod = extract_wrapped_phase(row, offsets)
        wrapped.append(pm)
        top_modulation = mod
    mask = modulation_mask(
        top_modulation, float(meta["nominal_modulation"]), threshold_fraction
    )
    unwrapped = unwrap_temporal(wrapped, meta["frequencies"])
    return calibration.height_from_phase(model, unwrapped, mask)


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def _synth_one(task):
    index, sample_seed, config, model = task
    scene = random_scene(sample_seed, config.scene, config.fringe.width,
                         config.fringe.height)
    result = render_stack(scene, model, config.fringe)
    sample_id = f"{index:05d}"
    sample = Sample(
        id=sample_id,
        input=result.stack[-1][0],
        truth=result.truth,
        provenance={
            "seed": int(sample_seed),
            "primitives": len(scene.height_field.primitives),
            "shadow_regions": len(scene.shadow_regions),
            "noise_sigma": scene.noise_sigma,
            "quantize_8bit": scene.quantize_8bit,
        },
    )
    return sample, (result.stack if config.keep_stacks else None)


def cmd_synth(config: PipelineConfig) -> int:
    if all(isinstance(s, (int, np.integer)) for s in config.split):
        n = int(sum(config.split))
    elif config.count is not None:
        n = config.count
    else:
        raise ConfigError(
            "field [dataset]: synth needs counts = [540, 60, 72] or "
            "ratios plus a total count"
        )
    model = _resolve_model(config)
    seeds = np.random.SeedSequence(config.seed).generate_state(n, dtype=np.uint64)
    tasks = [(i, int(seeds[i]), config, model) for i in range(n)]

    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_synth_one, tasks, chunksize=4))
    else:
        results = [_synth_one(t) for t in tasks]

    out = Path(config.out_dir)
    samples = [r[0] for r in results]
    nominal = config.fringe.i0 * config.scene.contrast
    fringe_summary = {
        "frequencies": list(config.fringe.frequencies),
        "steps": config.fringe.steps,
        "i0": config.fringe.i0,
        "orientation": config.fringe.orientation,
        "nominal_modulation": nominal,
        "depth_range": [model.model.depth_range[0], model.model.depth_range[1]],
    }
    out.mkdir(parents=True, exist_ok=True)
    calibration.save_model(model.model, out / "model.json")
    manifest = export_dataset(
        samples, config.split, config.seed, out,
        fringe_spec=fringe_summary, calibration_file="model.json",
    )
    if config.keep_stacks:
        for (sample, stack) in results:
            write_stack(stack, config.fringe, nominal, out / "stacks" / sample.id)

    counts = {name: len(ids) for name, ids in manifest.splits.items()}
    print(f"exported {len(samples)} samples to {out}")
    print(f"splits: train={counts['train']} validation={counts['validation']} "
          f"test={counts['test']}")
    return 0


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------

def _plane_samples(phi: np.ndarray, mask: np.ndarray, z: float, stride: int):
    h, w = phi.shape
    vv, uu = np.mgrid[0:h:stride, 0:w:stride]
    keep = mask[::stride, ::stride]
    return (
        uu[keep].astype(np.float64),
        vv[keep].astype(np.float64),
        phi[::stride, ::stride][keep],
        np.full(int(keep.sum()), float(z)),
    )


def cmd_calibrate(config: PipelineConfig, args) -> int:
    spec = config.fringe
    parts: list[tuple] = []

    if args.planes:
        zs = [float(z) for z in args.planes.split(",")]
        if len(zs) < 3:
            raise ConfigError(f"--planes needs at least 3 heights, got {len(zs)}")
        model = _resolve_model(config)
        noise = config.scene.noise_sigma if args.noisy else 0.0
        quantize = config.scene.quantize_8bit if args.noisy else False
        offsets = phase_shift_offsets(spec.steps)
        for k, z in enumerate(zs):
            result = render_plane_stack(
                z, model, spec, noise_sigma=noise, quantize_8bit=quantize,
                seed=config.seed + k,
            )
            wrapped = []
            mod = None
            for row in result.stack:
                pm, mod = extract_wrapped_phase(row, offsets)
                wrapped.append(pm)
            mask = modulation_mask(mod, spec.i0)
            unwrapped = unwrap_temporal(wrapped, spec.frequencies)
            parts.append(_plane_samples(
                unwrapped.image.data, mask.valid, z, args.stride))
        dims = (spec.width, spec.height)
    elif args.stacks:
        root = Path(args.stacks)
        stack_dirs = sorted(d for d in root.iterdir() if (d / STACK_META).exists())
        if len(stack_dirs) < 3:
            raise ConfigError(
                f"--stacks {root}: need at least 3 plane stacks, found {len(stack_dirs)}"
            )
        meta = None
        for d in stack_dirs:
            meta, stack = read_stack(d)
            if "plane_z" not in meta:
                raise ConfigError(f"stack {d} has no plane_z in {STACK_META}")
            offsets = phase_shift_offsets(int(meta["steps"]))
            wrapped = []
            mod = None
            for row in stack:
                pm, mod = extract_wrapped_phase(row, offsets)
                wrapped.append(pm)
            mask = modulation_mask(mod, float(meta["nominal_modulation"]))
            unwrapped = unwrap_temporal(wrapped, meta["frequencies"])
            parts.append(_plane_samples(
                unwrapped.image.data, mask.valid, float(meta["plane_z"]), args.stride))
        dims = (int(meta["width"]), int(meta["height"]))
    else:
        raise ConfigError("calibrate needs --planes z1,z2,... or --stacks DIR")

    u = np.concatenate([p[0] for p in parts])
    v = np.concatenate([p[1] for p in parts])
    phi = np.concatenate([p[2] for p in parts])
    z = np.concatenate([p[3] for p in parts])
    model = calibration.fit((u, v, phi, z), dims)
    calibration.save_model(model, args.out)
    print(f"fitted {len(u)} samples from {len(parts)} planes; "
          f"fit RMS {model.fit_rms_mm:.6g} mm -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# reconstruct / eval / render
# ---------------------------------------------------------------------------

def cmd_reconstruct(config: PipelineConfig, args) -> int:
    model = calibration.load_model(args.model)
    meta, stack = read_stack(args.stack_dir)
    height = reconstruct_from_stack(meta, stack, model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_pfm(height.image, out / "height.pfm")
    write_mask_pgm(height.mask, out / "mask.pgm")
    valid = height.mask.valid
    print(f"reconstructed {args.stack_dir}: {int(valid.sum())} valid pixels, "
          f"height range [{np.nanmin(height.image.data):.3f}, "
          f"{np.nanmax(height.image.data):.3f}] mm -> {out}")
    return 0


def _load_prediction(pred_dir: Path, sample_id: str) -> HeightMap:
    d = pred_dir / sample_id
    height_path = d / "height.pfm"
    if not height_path.exists():
        raise FileNotFoundError(f"prediction for {sample_id!r}: {height_path} missing")
    img = read_pfm(height_path)
    mask_path = d / "mask.pgm"
    if mask_path.exists():
        mask = read_mask_pgm(mask_path)
    else:
        mask = Mask(np.isfinite(img.data))
    return HeightMap(img, mask)


def cmd_eval(config: PipelineConfig, args) -> int:
    manifest, reader = load_dataset(args.dataset)
    depth_range = manifest.fringe_spec.get("depth_range")
    if depth_range:
        span = float(depth_range[1]) - float(depth_range[0])
    else:
        span = None  # fall back to observed truth range

    reports = {}
    for pred_dir in args.pred_dirs:
        pred_root = Path(pred_dir)
        ids = sorted(p.name for p in pred_root.iterdir() if p.is_dir())
        if not ids:
            raise FileNotFoundError(f"no prediction subdirectories under {pred_root}")
        known = set(manifest.all_ids())
        unknown = [i for i in ids if i not in known]
        if unknown:
            raise ValueError(
                f"{pred_root}: predictions {unknown[:5]} not present in the dataset"
            )
        pairs = []
        z_lo, z_hi = np.inf, -np.inf
        for sample_id in ids:
            truth = reader.load(sample_id).truth
            pred = _load_prediction(pred_root, sample_id)
            pairs.append((sample_id, pred, truth))
            tv = truth.image.data[truth.mask.valid]
            if tv.size:
                z_lo = min(z_lo, float(tv.min()))
                z_hi = max(z_hi, float(tv.max()))
        pair_span = span if span is not None else max(z_hi - z_lo, 1e-12)
        reports[pred_root.name] = metrics.evaluate_pairs(pairs, pair_span)

    print(metrics.report_table(reports))
    if len(reports) >= 2:
        print("ranking (best first): " + ", ".join(metrics.compare_models(reports)))
    if args.out:
        Path(args.out).write_text(metrics.report_json(reports) + "\n")
        print(f"report -> {args.out}")
    return 0


def cmd_render(config: PipelineConfig, args) -> int:
    img = read_pfm(args.height)
    if args.mask:
        mask = read_mask_pgm(args.mask)
    else:
        mask = Mask(np.isfinite(img.data))
    height = HeightMap(img, mask)
    viz.render_height_ppm(height, args.out)
    print(f"rendered {args.height} -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _parse_size(text):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"size must look like 256x256: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fringekit",
        description="Fringe projection profilometry pipeline",
    )
    parser.add_argument("--config", help="TOML pipeline config")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--jobs", type=int, help="sample-level parallelism")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate scenes and export a dataset")
    p.add_argument("--out", help="output dataset directory")
    p.add_argument("--counts", help="train,val,test absolute counts, e.g. 540,60,72")
    p.add_argument("--count", type=int, help="total samples (with ratio splits)")
    p.add_argument("--size", type=_parse_size, help="image size WxH")
    p.add_argument("--noise-sigma", type=float, help="camera noise (gray levels)")
    p.add_argument("--quantize", dest="quantize", action="store_true", default=None)
    p.add_argument("--no-quantize", dest="quantize", action="store_false")
    p.add_argument("--keep-stacks", action="store_true", default=None,
                   help="also store the full multi-frequency stacks")

    p = sub.add_parser("calibrate", help="fit the rational height model")
    p.add_argument("--planes", help="comma-separated gauge plane heights (mm)")
    p.add_argument("--stacks", help="directory of plane stacks with plane_z metadata")
    p.add_argument("--noisy", action="store_true",
                   help="apply configured noise/quantization to synthetic planes")
    p.add_argument("--stride", type=int, default=4,
                   help="pixel subsampling stride for fit samples")
    p.add_argument("--size", type=_parse_size, help="image size WxH")
    p.add_argument("--out", required=True, help="output model.json")

    p = sub.add_parser("reconstruct", help="height map from a full stack")
    p.add_argument("stack_dir")
    p.add_argument("--model", required=True, help="calibration model.json")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("eval", help="score prediction directories vs a dataset")
    p.add_argument("pred_dirs", nargs="+")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", help="report JSON path")

    p = sub.add_parser("render", help="colormap PPM from a height.pfm")
    p.add_argument("height")
    p.add_argument("--mask", help="mask.pgm (default: finite pixels)")
    p.add_argument("--out", required=True)
    return parser


def _overrides_from_args(args) -> dict:
    over: dict = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.jobs is not None:
        over["jobs"] = args.jobs
    size = getattr(args, "size", None)
    if size:
        over["width"], over["height"] = size
    if getattr(args, "counts", None):
        try:
            over["split"] = tuple(int(x) for x in args.counts.split(","))
        except ValueError as exc:
            raise ConfigError(f"--counts must be three integers: {args.counts!r}") from exc
    if getattr(args, "count", None) is not None:
        over["count"] = args.count
    if getattr(args, "noise_sigma", None) is not None:
        over["noise_sigma"] = args.noise_sigma
    if getattr(args, "quantize", None) is not None:
        over["quantize_8bit"] = args.quantize
    if getattr(args, "out", None) and args.command == "synth":
        over["out_dir"] = args.out
    if getattr(args, "keep_stacks", None) is not None:
        over["keep_stacks"] = args.keep_stacks
    return over


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, _overrides_from_args(args))
        if args.command == "synth":
            return cmd_synth(config)
        if args.command == "calibrate":
            return cmd_calibrate(config, args)
        if args.command == "reconstruct":
            return cmd_reconstruct(config, args)
        if args.command == "eval":
            return cmd_eval(config, args)
        if args.command == "render":
            return cmd_render(config, args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
