import numpy as np

from dcinv.cli import main
from dcinv.fileio import load_data, load_manifest
from dcinv.trace import load_grid


class TestSimulate:
    def test_full_scale_row_count(self, tmp_path):
        """Case 1 at full scale writes a data file with 348 rows."""
        out = tmp_path / "sim"
        code = main(["simulate", "--case", "1", "--dip", "45", "--noise", "0.05",
                     "--seed", "7", "--out", str(out)])
        assert code == 0
        survey, values, std = load_data(out / "data.txt")
        assert values.size == 348
        rows = [l for l in (out / "data.txt").read_text().splitlines()
                if l and not l.startswith("#")]
        assert len(rows) == 348

    def test_desk_scale(self, tmp_path):
        out = tmp_path / "sim"
        code = main(["simulate", "--case", "2.2", "--scale", "desk",
                     "--out", str(out)])
        assert code == 0
        _, values, _ = load_data(out / "data.txt")
        assert values.size == 21
        truth, nx, nz = load_grid(out / "model_true.txt")
        assert (nx, nz) == (64, 19)


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self):
        assert main(["simulate", "--bogus"]) == 1

    def test_unknown_command_is_usage_error(self):
        assert main(["frobnicate"]) == 1

    def test_missing_config_is_io_error(self, tmp_path):
        code = main(["invert-dip", "--config", str(tmp_path / "missing.cfg"),
                     "--out", str(tmp_path / "o")])
        assert code == 3

    def test_missing_grid_is_io_error(self, tmp_path):
        code = main(["render", "--grid", str(tmp_path / "none.txt"),
                     "--out", str(tmp_path / "o.ppm")])
        assert code == 3

    def test_bad_case_is_usage_error(self, tmp_path):
        code = main(["simulate", "--case", "9", "--out", str(tmp_path / "o")])
        assert code == 1


class TestCheck:
    def test_self_tests_pass(self, capsys):
        assert main(["check"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out
        assert "FAIL" not in out


class TestInversionCommands:
    def test_invert_dip_writes_outputs(self, tmp_path):
        out = tmp_path / "dip"
        cfg = tmp_path / "run.cfg"
        cfg.write_text("[dip]\nepochs_stage1 = 300\nepochs_stage2 = 5\ntau = 50\n")
        code = main(["invert-dip", "--case", "1", "--scale", "desk",
                     "--config", str(cfg), "--out", str(out), "--seed", "0"])
        assert code == 0
        assert (out / "trace.txt").exists()
        assert (out / "model.txt").exists()
        assert (out / "checkpoint.npz").exists()
        model, nx, nz = load_grid(out / "model.txt")
        assert (nx, nz) == (64, 19)
        assert np.all(model > -8.0) and np.all(model < 0.0)

    def test_invert_conv_writes_outputs(self, tmp_path):
        out = tmp_path / "conv"
        code = main(["invert-conv", "--case", "1", "--scale", "desk",
                     "--out", str(out), "--seed", "0"])
        assert code == 0
        assert (out / "trace.txt").exists()
        assert (out / "model.txt").exists()

    def test_invert_from_data_file(self, tmp_path):
        sim_out = tmp_path / "sim"
        main(["simulate", "--case", "1", "--scale", "desk", "--out", str(sim_out)])
        out = tmp_path / "dip"
        cfg = tmp_path / "run.cfg"
        cfg.write_text("[dip]\nepochs_stage1 = 200\nepochs_stage2 = 3\n")
        code = main(["invert-dip", "--case", "1", "--scale", "desk",
                     "--config", str(cfg), "--data", str(sim_out / "data.txt"),
                     "--out", str(out)])
        assert code == 0
        manifest = load_manifest(out / "manifest.json")
        assert manifest["data"] == str(sim_out / "data.txt")


class TestReplay:
    def test_replay_reproduces_bitwise(self, tmp_path):
        """Replaying a manifest into a fresh directory reproduces the trace,
        model, and data files byte for byte."""
        out = tmp_path / "run1"
        cfg = tmp_path / "run.cfg"
        cfg.write_text("[dip]\nepochs_stage1 = 300\nepochs_stage2 = 10\n"
                       "dropout_rate = 0.1\ntau = 50\n")
        assert main(["invert-dip", "--case", "1", "--scale", "desk",
                     "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
        out2 = tmp_path / "run2"
        assert main(["replay", "--manifest", str(out / "manifest.json"),
                     "--out", str(out2)]) == 0
        for name in ("trace.txt", "model.txt", "data.txt", "model_true.txt"):
            assert (out / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_replay_simulation(self, tmp_path):
        out = tmp_path / "sim"
        main(["simulate", "--case", "2", "--scale", "desk", "--seed", "5",
              "--out", str(out)])
        out2 = tmp_path / "sim2"
        assert main(["replay", "--manifest", str(out / "manifest.json"),
                     "--out", str(out2)]) == 0
        assert (out / "data.txt").read_bytes() == (out2 / "data.txt").read_bytes()


class TestRenderCommand:
    def test_render_from_simulated_truth(self, tmp_path):
        out = tmp_path / "sim"
        main(["simulate", "--case", "1", "--scale", "desk", "--out", str(out)])
        img = tmp_path / "truth.ppm"
        code = main(["render", "--grid", str(out / "model_true.txt"),
                     "--out", str(img), "--upscale", "2", "--pad-x", "7",
                     "--pad-z", "7"])
        assert code == 0
        assert img.read_bytes().startswith(b"P6\n128 38\n255\n")


class TestPretrainedReuse:
    def test_stage1_checkpoint_is_saved_and_reusable(self, tmp_path):
        out1 = tmp_path / "first"
        cfg = tmp_path / "run.cfg"
        cfg.write_text("[dip]\nepochs_stage1 = 300\nepochs_stage2 = 3\ntau = 50\n")
        assert main(["invert-dip", "--case", "1", "--scale", "desk",
                     "--config", str(cfg), "--out", str(out1)]) == 0
        assert (out1 / "pretrained.npz").exists()
        out2 = tmp_path / "second"
        assert main(["invert-dip", "--case", "1", "--scale", "desk",
                     "--config", str(cfg), "--out", str(out2),
                     "--pretrained", str(out1 / "pretrained.npz")]) == 0
        # same pretrained start + same data/seeds -> identical trace
        assert ((out1 / "trace.txt").read_bytes()
                == (out2 / "trace.txt").read_bytes())
