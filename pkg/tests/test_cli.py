import json
import shutil

import numpy as np
import pytest

from fringekit import load_dataset, read_pfm, write_mask_pgm, write_pfm
from fringekit.cli import main
from fringekit.raster import Mask, ScalarImage


def run(*argv):
    return main([str(a) for a in argv])


def dir_snapshot(root):
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture
def tiny_dataset(tmp_path):
    """Noiseless 32x32 dataset with kept stacks; returns its directory."""
    out = tmp_path / "ds"
    code = run(
        "--seed", 11, "synth", "--out", out, "--counts", "4,1,1",
        "--size", "32x32", "--noise-sigma", 0.0, "--no-quantize", "--keep-stacks",
    )
    assert code == 0
    return out


class TestSynth:
    def test_counts_and_layout(self, tiny_dataset):
        manifest, reader = load_dataset(tiny_dataset)
        assert len(manifest.splits["train"]) == 4
        assert len(manifest.splits["validation"]) == 1
        assert len(manifest.splits["test"]) == 1
        sample = reader.load(manifest.splits["train"][0])
        assert sample.input.shape == (32, 32)
        assert (tiny_dataset / "model.json").exists()

    def test_single_sample_reproducible(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for out in (a, b):
            assert run("--seed", 3, "synth", "--out", out, "--counts", "1,0,0",
                       "--size", "32x32") == 0
        assert dir_snapshot(a) == dir_snapshot(b)

    def test_invalid_ratio_sum_exits_2(self, tmp_path):
        config = tmp_path / "bad.toml"
        config.write_text(
            "[dataset]\nratios = [0.7, 0.2, 0.2]\ncount = 4\n"
            'out_dir = "%s"\n' % (tmp_path / "x")
        )
        assert run("--config", config, "synth") == 2

    def test_ratio_error_names_field(self, tmp_path, capsys):
        config = tmp_path / "bad.toml"
        config.write_text("[dataset]\nratios = [0.7, 0.2, 0.2]\ncount = 4\n")
        assert run("--config", config, "synth") == 2
        assert "ratios" in capsys.readouterr().err

    def test_parallel_jobs_match_serial(self, tmp_path):
        a = tmp_path / "serial"
        b = tmp_path / "parallel"
        assert run("--seed", 5, "synth", "--out", a, "--counts", "4,0,0",
                   "--size", "32x32") == 0
        assert run("--seed", 5, "--jobs", 2, "synth", "--out", b, "--counts",
                   "4,0,0", "--size", "32x32") == 0
        assert dir_snapshot(a) == dir_snapshot(b)


class TestCalibrate:
    def test_noiseless_planes_fit(self, tmp_path, capsys):
        model_path = tmp_path / "model.json"
        code = run("--seed", 1, "calibrate", "--planes", "5,15,25,35,45",
                   "--size", "64x64", "--out", model_path)
        assert code == 0
        doc = json.loads(model_path.read_text())
        assert doc["fit_rms_mm"] < 1e-8
        assert "fit RMS" in capsys.readouterr().out

    def test_two_planes_exit_2(self, tmp_path):
        assert run("calibrate", "--planes", "5,45",
                   "--out", tmp_path / "m.json") == 2

    def test_noisy_planes_under_paper_bound(self, tmp_path):
        model_path = tmp_path / "model.json"
        code = run("--seed", 2, "calibrate", "--planes", "5,15,25,35,45",
                   "--size", "128x128", "--noisy", "--out", model_path)
        assert code == 0
        assert json.loads(model_path.read_text())["fit_rms_mm"] < 0.1

    def test_calibrate_from_stacks(self, tmp_path):
        # render plane stacks to disk first, then fit from the directory
        import fringekit as fk
        from fringekit.cli import write_stack

        spec = fk.FringeSpec(width=48, height=48)
        gt = fk.default_ground_truth_model(48, 48)
        stacks = tmp_path / "stacks"
        for z in (10.0, 25.0, 40.0):
            res = fk.render_plane_stack(z, gt, spec)
            write_stack(res.stack, spec, spec.i0, stacks / f"z{z:g}", plane_z=z)
        model_path = tmp_path / "model.json"
        assert run("calibrate", "--stacks", stacks, "--out", model_path) == 0
        assert json.loads(model_path.read_text())["fit_rms_mm"] < 1e-8


class TestReconstruct:
    def test_reconstructs_truth(self, tiny_dataset, tmp_path):
        manifest, reader = load_dataset(tiny_dataset)
        sample_id = manifest.splits["train"][0]
        out = tmp_path / "rec"
        code = run("reconstruct", tiny_dataset / "stacks" / sample_id,
                   "--model", tiny_dataset / "model.json", "--out", out)
        assert code == 0
        height = read_pfm(out / "height.pfm").data
        truth = reader.load(sample_id).truth
        both = truth.mask.valid & np.isfinite(height)
        err = np.sqrt(np.mean((height[both] - truth.image.data[both]) ** 2))
        assert err < 1e-6

    def test_shadow_pixels_invalid_in_output(self, tmp_path):
        import fringekit as fk
        from fringekit.cli import write_stack

        spec = fk.FringeSpec(width=48, height=48)
        gt = fk.default_ground_truth_model(48, 48)
        field = fk.HeightField((fk.GaussianBump((24, 24), 15.0, 6.0),), 48, 48)
        scene = fk.SceneSpec(
            height_field=field,
            albedo=ScalarImage(np.full((48, 48), 0.9)),
            shadow_regions=(((5, 5), (20, 8), (15, 20)),),
        )
        res = fk.render_stack(scene, gt, spec)
        stack_dir = tmp_path / "stack"
        write_stack(res.stack, spec, spec.i0, stack_dir)
        model_path = tmp_path / "model.json"
        fk.save_model(gt.model, model_path)
        out = tmp_path / "rec"
        assert run("reconstruct", stack_dir, "--model", model_path, "--out", out) == 0
        from fringekit import read_mask_pgm

        mask = read_mask_pgm(out / "mask.pgm")
        assert np.array_equal(mask.valid, res.mask.valid)
        assert np.any(~mask.valid)

    def test_missing_frequency_lists_found(self, tiny_dataset, tmp_path, capsys):
        manifest, _ = load_dataset(tiny_dataset)
        sample_id = manifest.splits["train"][0]
        broken = tmp_path / "broken"
        shutil.copytree(tiny_dataset / "stacks" / sample_id, broken)
        for j in range(4):
            (broken / f"f2_s{j}.pfm").unlink()
        code = run("reconstruct", broken,
                   "--model", tiny_dataset / "model.json", "--out", tmp_path / "o")
        assert code == 1
        err = capsys.readouterr().err
        assert "f=20" in err and "f=100" in err


class TestEval:
    def _make_predictions(self, dataset_dir, out_dir, bias=0.0):
        manifest, reader = load_dataset(dataset_dir)
        for sample_id in manifest.all_ids():
            truth = reader.load(sample_id).truth
            d = out_dir / sample_id
            d.mkdir(parents=True)
            data = truth.image.data + np.float32(bias)
            write_pfm(ScalarImage(data.astype(np.float32)), d / "height.pfm")
            write_mask_pgm(truth.mask, d / "mask.pgm")

    def test_perfect_predictions_zero(self, tiny_dataset, tmp_path, capsys):
        pred = tmp_path / "pred"
        self._make_predictions(tiny_dataset, pred)
        report = tmp_path / "report.json"
        assert run("eval", pred, "--dataset", tiny_dataset, "--out", report) == 0
        doc = json.loads(report.read_text())
        assert doc["pred"]["rmse_mm"] == 0.0
        assert doc["pred"]["mre"] == 0.0

    def test_known_bias(self, tiny_dataset, tmp_path):
        pred = tmp_path / "biased"
        self._make_predictions(tiny_dataset, pred, bias=1.0)
        report = tmp_path / "report.json"
        assert run("eval", pred, "--dataset", tiny_dataset, "--out", report) == 0
        doc = json.loads(report.read_text())
        assert doc["biased"]["rmse_mm"] == pytest.approx(1.0, rel=1e-5)

    def test_ranking_of_three(self, tiny_dataset, tmp_path, capsys):
        names = {"good": 0.1, "mid": 0.5, "bad": 2.0}
        for name, bias in names.items():
            self._make_predictions(tiny_dataset, tmp_path / name, bias=bias)
        report = tmp_path / "report.json"
        assert run("eval", tmp_path / "bad", tmp_path / "good", tmp_path / "mid",
                   "--dataset", tiny_dataset, "--out", report) == 0
        doc = json.loads(report.read_text())
        assert doc["ranking"] == ["good", "mid", "bad"]
        out = capsys.readouterr().out
        assert "ranking (best first): good, mid, bad" in out

    def test_unknown_id_errors(self, tiny_dataset, tmp_path):
        pred = tmp_path / "pred"
        self._make_predictions(tiny_dataset, pred)
        rogue = pred / "99999"
        rogue.mkdir()
        write_pfm(ScalarImage(np.zeros((32, 32), dtype=np.float32)),
                  rogue / "height.pfm")
        assert run("eval", pred, "--dataset", tiny_dataset) == 1


class TestRender:
    def test_constant_map_single_color(self, tmp_path):
        height = tmp_path / "h.pfm"
        write_pfm(ScalarImage(np.full((8, 8), 3.0, dtype=np.float32)), height)
        out = tmp_path / "h.ppm"
        assert run("render", height, "--out", out) == 0
        raw = out.read_bytes()
        assert raw.startswith(b"P6\n8 8\n255\n")
        rgb = np.frombuffer(raw.split(b"255\n", 1)[1], dtype=np.uint8).reshape(-1, 3)
        assert np.all(rgb == rgb[0])

    def test_ramp_monotone_gradient(self, tmp_path):
        data = np.tile(np.linspace(0, 10, 16, dtype=np.float32), (4, 1))
        height = tmp_path / "r.pfm"
        write_pfm(ScalarImage(data), height)
        out = tmp_path / "r.ppm"
        assert run("render", height, "--out", out) == 0
        pixels = np.frombuffer(out.read_bytes().split(b"255\n", 1)[1],
                               dtype=np.uint8).reshape(4, 16, 3)
        # green channel of the fixed colormap rises monotonically
        greens = pixels[0, :, 1].astype(int)
        assert np.all(np.diff(greens) >= 0)
        assert greens[-1] > greens[0]

    def test_nan_region_black(self, tmp_path):
        data = np.full((6, 6), 5.0, dtype=np.float32)
        data[:3, :3] = np.nan
        height = tmp_path / "n.pfm"
        write_pfm(ScalarImage(data), height)
        out = tmp_path / "n.ppm"
        assert run("render", height, "--out", out) == 0
        pixels = np.frombuffer(out.read_bytes().split(b"255\n", 1)[1],
                               dtype=np.uint8).reshape(6, 6, 3)
        assert np.all(pixels[:3, :3] == 0)
        assert np.all(pixels[3:, 3:] != 0)

    def test_all_invalid_exits_1(self, tmp_path):
        data = np.full((4, 4), np.nan, dtype=np.float32)
        height = tmp_path / "x.pfm"
        write_pfm(ScalarImage(data), height)
        assert run("render", height, "--out", tmp_path / "x.ppm") == 1

    def test_explicit_mask_respected(self, tmp_path):
        data = np.full((4, 4), 1.0, dtype=np.float32)
        height = tmp_path / "m.pfm"
        write_pfm(ScalarImage(data), height)
        mask = np.zeros((4, 4), dtype=bool)
        mask[0, 0] = True
        mask_path = tmp_path / "m.pgm"
        write_mask_pgm(Mask(mask), mask_path)
        out = tmp_path / "m.ppm"
        assert run("render", height, "--mask", mask_path, "--out", out) == 0
        pixels = np.frombuffer(out.read_bytes().split(b"255\n", 1)[1],
                               dtype=np.uint8).reshape(4, 4, 3)
        assert np.all(pixels[1:] == 0)
        assert np.any(pixels[0, 0] != 0)
