"""CLI front end: exit codes, argument validation, and all three subcommands
run end to end on small inputs."""

import re
import struct

import numpy as np
import pytest

from conftest import FIXTURES, make_blob_scene
from vecstyle.cli import main
from vecstyle.features import WeightStore, save_weights
from vecstyle.raster import write_png
from vecstyle.scene import extract_params
from vecstyle.svg_io import load_svg, save_svg, serialize_svg


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestArgumentHandling:
    @pytest.mark.parametrize(
        "argv",
        [["--help"], ["stylize", "--help"], ["gradcheck", "--help"], ["weights-info", "--help"]],
    )
    def test_help_exits_zero(self, argv, capsys):
        code, out, _ = run_cli(argv, capsys)
        assert code == 0
        assert "usage" in out.lower()

    def test_no_subcommand_is_usage_error(self, capsys):
        assert run_cli([], capsys)[0] == 2

    def test_unknown_flag_is_usage_error(self, capsys):
        code, _, err = run_cli(["gradcheck", "--scene", "x.svg", "--bogus"], capsys)
        assert code == 2
        assert "--bogus" in err

    @pytest.mark.parametrize(
        "argv",
        [
            ["gradcheck", "--scene", "x.svg", "--samples", "0"],
            ["gradcheck", "--scene", "x.svg", "--eps", "0"],
            ["gradcheck", "--scene", "x.svg", "--size", "-4"],
            ["stylize", "--content", "a", "--style", "b", "--weights", "c", "--out", "d", "--iters", "-1"],
            ["stylize", "--content", "a", "--style", "b", "--weights", "c", "--out", "d", "--lambda", "-2"],
        ],
    )
    def test_invalid_values_are_usage_errors(self, argv, capsys):
        assert run_cli(argv, capsys)[0] == 2

    def test_snapshot_every_requires_dir(self, tmp_path, capsys):
        scene_path = tmp_path / "c.svg"
        save_svg(make_blob_scene(seed=1), scene_path)
        code, _, err = run_cli(
            ["stylize", "--content", str(scene_path), "--style", "s.png",
             "--weights", "w", "--out", str(tmp_path / "o.svg"), "--snapshot-every", "2"],
            capsys,
        )
        assert code == 2
        assert "--snapshot-dir" in err

    def test_missing_content_file(self, capsys):
        code, _, err = run_cli(
            ["stylize", "--content", "missing.svg", "--style", "s.png",
             "--weights", "w", "--out", "o.svg"],
            capsys,
        )
        assert code == 3
        assert "missing.svg" in err

    def test_thread_env_must_be_integer(self, monkeypatch, capsys):
        monkeypatch.setenv("VECSTYLE_THREADS", "banana")
        code, _, err = run_cli(["weights-info", "--weights", "nope.vnstw"], capsys)
        assert code == 2
        assert "VECSTYLE_THREADS" in err

    def test_thread_env_rejects_negative(self, monkeypatch, capsys):
        monkeypatch.setenv("VECSTYLE_THREADS", "-1")
        assert run_cli(["weights-info", "--weights", "nope.vnstw"], capsys)[0] == 2


class TestGradcheck:
    def test_blob_pair_passes(self, capsys):
        code, out, err = run_cli(
            ["gradcheck", "--scene", str(FIXTURES / "blob_pair.svg"),
             "--size", "32", "--samples", "25", "--seed", "3"],
            capsys,
        )
        assert code == 0
        assert err == ""
        for group in ("points", "colors", "widths"):
            assert f"group {group}: max rel err" in out
        assert "OK (tolerance 0.01)" in out

    def test_degenerate_scene_completes(self, capsys):
        code, out, _ = run_cli(
            ["gradcheck", "--scene", str(FIXTURES / "degenerate.svg"),
             "--size", "32", "--samples", "25", "--seed", "3"],
            capsys,
        )
        assert code == 0
        assert "OK" in out

    def test_missing_scene(self, capsys):
        code, _, err = run_cli(["gradcheck", "--scene", "absent.svg"], capsys)
        assert code == 3
        assert "absent.svg" in err


class TestWeightsInfo:
    def test_full_store(self, synthetic_weights_path, capsys):
        code, out, err = run_cli(["weights-info", "--weights", str(synthetic_weights_path)], capsys)
        assert code == 0
        assert err == ""
        assert "conv1_1.weight  64x3x3x3  (1728 values)" in out
        assert "tensors: 37" in out
        assert "conv trunk parameters: 20024384" in out

    def test_unknown_tensor_warns_but_succeeds(self, synthetic_weights_path, tmp_path, capsys):
        # Full trunk plus one stray tensor, appended at the container level.
        data = synthetic_weights_path.read_bytes()
        count = int.from_bytes(data[6:10], "little")
        entry = (
            struct.pack("<H", len(b"extra.stuff")) + b"extra.stuff"
            + struct.pack("<B", 1) + struct.pack("<I", 3)
            + np.ones(3, np.float32).tobytes()
        )
        path = tmp_path / "extended.vnstw"
        path.write_bytes(data[:6] + struct.pack("<I", count + 1) + data[10:] + entry)
        code, out, err = run_cli(["weights-info", "--weights", str(path)], capsys)
        assert code == 0
        assert f"tensors: {count + 1}" in out
        assert "unknown tensor 'extra.stuff'" in err
        assert "conv" not in err

    def test_truncated_file(self, tmp_path, capsys):
        store = WeightStore({"conv1_1.bias": np.arange(64, dtype=np.float32)})
        path = tmp_path / "cut.vnstw"
        save_weights(store, path)
        path.write_bytes(path.read_bytes()[:-40])
        code, _, err = run_cli(["weights-info", "--weights", str(path)], capsys)
        assert code == 3
        assert "error:" in err


@pytest.fixture(scope="module")
def stylize_inputs(tmp_path_factory):
    """Small content SVG + matching 48x48 style PNG."""
    root = tmp_path_factory.mktemp("cli")
    content = root / "content.svg"
    save_svg(make_blob_scene(seed=4, n_shapes=2, size=48.0), content)
    rng = np.random.default_rng(9)
    write_png(rng.uniform(0.0, 1.0, (48, 48, 3)), root / "style.png")
    return content, root / "style.png"


def _stylize(argv_extra, out_path, stylize_inputs, weights, capsys):
    content, style = stylize_inputs
    return run_cli(
        ["stylize", "--content", str(content), "--style", str(style),
         "--weights", str(weights), "--out", str(out_path), *argv_extra],
        capsys,
    )


_INITIAL = re.compile(r"initial: total=(\S+) lpips=(\S+) contour=(\S+)")


class TestStylize:
    def test_short_run_writes_svg(self, stylize_inputs, synthetic_weights_path, tmp_path, capsys):
        out1 = tmp_path / "out1.svg"
        code, stdout, err = _stylize(
            ["--iters", "2", "--seed", "0"], out1, stylize_inputs, synthetic_weights_path, capsys
        )
        assert code == 0, err
        assert "working resolution: 48x48" in stdout
        assert f"wrote {out1}" in stdout
        result = load_svg(out1)
        original = load_svg(stylize_inputs[0])
        assert result.counts() == original.counts()

        # Colors must actually have moved after two optimizer steps.
        moved = extract_params(result).colors - extract_params(original).colors
        assert np.max(np.abs(moved)) > 1e-4

        # Same invocation again: byte-identical output file.
        out2 = tmp_path / "out2.svg"
        code, _, _ = _stylize(
            ["--iters", "2", "--seed", "0"], out2, stylize_inputs, synthetic_weights_path, capsys
        )
        assert code == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_zero_iterations_is_identity(self, stylize_inputs, synthetic_weights_path, tmp_path, capsys):
        out = tmp_path / "id.svg"
        code, stdout, _ = _stylize(
            ["--iters", "0"], out, stylize_inputs, synthetic_weights_path, capsys
        )
        assert code == 0
        assert serialize_svg(load_svg(stylize_inputs[0])) == out.read_text()
        assert "(0 iterations)" in stdout

    def test_contour_weight_changes_total_not_terms(
        self, stylize_inputs, synthetic_weights_path, tmp_path, capsys
    ):
        reports = {}
        for lam in ("0", "100"):
            code, stdout, _ = _stylize(
                ["--iters", "0", "--lambda", lam, "--seed", "7"],
                tmp_path / f"lam{lam}.svg", stylize_inputs, synthetic_weights_path, capsys,
            )
            assert code == 0
            reports[lam] = _INITIAL.search(stdout).groups()

        total0, lpips0, contour0 = reports["0"]
        total100, lpips100, contour100 = reports["100"]
        # Identical seed: the random draws match, so both raw terms agree
        # digit for digit; only the weighted total differs.
        assert lpips0 == lpips100
        assert contour0 == contour100
        assert total0 == lpips0
        assert float(total100) == pytest.approx(
            float(lpips100) + 100.0 * float(contour100), rel=1e-6
        )

    def test_snapshots_through_cli(self, stylize_inputs, synthetic_weights_path, tmp_path, capsys):
        snap = tmp_path / "snaps"
        code, _, _ = _stylize(
            ["--iters", "1", "--snapshot-every", "1", "--snapshot-dir", str(snap)],
            tmp_path / "s.svg", stylize_inputs, synthetic_weights_path, capsys,
        )
        assert code == 0
        assert (snap / "iter_000001.svg").exists()
        assert (snap / "iter_000001.png").exists()
        assert (snap / "history.csv").exists()

    def test_missing_style_file(self, stylize_inputs, synthetic_weights_path, tmp_path, capsys):
        content, _ = stylize_inputs
        code, _, err = run_cli(
            ["stylize", "--content", str(content), "--style", "void.png",
             "--weights", str(synthetic_weights_path), "--out", str(tmp_path / "o.svg")],
            capsys,
        )
        assert code == 3
        assert "void.png" in err
