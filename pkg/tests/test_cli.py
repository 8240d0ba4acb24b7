import json

import pandas as pd
import pytest

from dimersim.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main
from dimersim.core import NumericalError
from dimersim.experiments import build


@pytest.fixture
def out_dir(tmp_path):
    return tmp_path / "out"


class TestCommands:
    """End-to-end runs of the command line interface."""

    def test_fixed_points(self, out_dir):
        """Test that the region R2 example reports four fixed points."""
        code = main(["fixed-points", "--v", "1", "--gamma", "0.75", "--g", "3",
                     "--out", str(out_dir), "-q"])
        assert code == EXIT_OK
        report = json.loads((out_dir / "fixed-points.json").read_text())
        assert len(report["fixed_points"]) == 4
        assert report["index_sum"] == 2
        assert report["region"]["region"] == "R2"

    def test_hermitian_meanfield_norm(self, out_dir):
        code = main(["evolve-mf", "--g", "1", "--theta0", "1", "--t-max", "2",
                     "--n-times", "11", "--out", str(out_dir), "-q"])
        assert code == EXIT_OK
        df = pd.read_csv(out_dir / "evolve-mf.csv")
        assert len(df) == 11
        assert (df["norm"] - 1.0).abs().max() < 1e-10

    def test_microscopic_interaction(self, out_dir, tmp_path):
        dumped = tmp_path / "resolved.json"
        code = main(["evolve-mp", "--n-particles", "4", "--c-times-n", "0.5", "--t-max", "1",
                     "--n-times", "3", "--out", str(out_dir), "--dump-config", str(dumped),
                     "-q"])
        assert code == EXIT_OK
        config = json.loads(dumped.read_text())
        assert config["params"]["g"] == 0.5
        assert config["params"]["n_particles"] == 4

    def test_config_file(self, out_dir, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"params": {"gamma": 0.5, "g": 1.0}, "n_times": 4,
                                    "t_max": 1.0}))
        dumped = tmp_path / "resolved.json"
        code = main(["evolve-mf", "--config", str(path), "--g", "2", "--out", str(out_dir),
                     "--dump-config", str(dumped), "-q"])
        assert code == EXIT_OK
        config = json.loads(dumped.read_text())
        assert config["params"]["gamma"] == 0.5
        assert config["params"]["g"] == 2.0
        assert len(pd.read_csv(out_dir / "evolve-mf.csv")) == 4

    def test_reproduce(self, out_dir, monkeypatch):
        preset = {"name": "small", "command": "fixed-points",
                  "config": {"params": {"gamma": 0.5}}}
        monkeypatch.setattr(build, "load_figure_presets", lambda: [preset])
        assert main(["reproduce", "--out", str(out_dir), "-q"]) == EXIT_OK
        assert (out_dir / "small" / "fixed-points.json").exists()

    def test_version(self, capsys):
        assert main(["--version"]) == EXIT_OK
        assert "dimersim" in capsys.readouterr().out


class TestExitCodes:
    """Invalid input exits with 2 and numerical failures with 1."""

    @pytest.mark.parametrize("argv", [
        [],
        ["bogus"],
        ["fixed-points", "--bogus"],
        ["fixed-points", "--g", "1", "--c-times-n", "1"],
        ["fixed-points", "--gamma", "abc"],
        ["evolve-mf", "--variant", "hermitian"],
    ])
    def test_usage_errors(self, argv):
        assert main(argv) == EXIT_USAGE

    @pytest.mark.parametrize("argv", [
        ["fixed-points", "--v", "0"],
        ["fixed-points", "--gamma", "-1"],
        ["spectrum", "--n-particles", "3"],
        ["evolve-mp", "--t-max", "1"],
        ["manifolds", "--gamma", "0.5", "--g", "0.5"],
        ["spectrum", "--n-particles", "3", "--sweep", "gamma:0:1"],
        ["evolve-mf", "--n-times", "1"],
    ])
    def test_invalid_input(self, argv, out_dir):
        assert main(argv + ["--out", str(out_dir), "-q"]) == EXIT_USAGE

    def test_missing_config_file(self, tmp_path):
        assert main(["fixed-points", "--config", str(tmp_path / "none.json"), "-q"]) == EXIT_USAGE

    def test_numerical_failure(self, monkeypatch, out_dir):
        def fail(config, out_dir=None):
            raise NumericalError("step size underflow", last_time=1.0)

        monkeypatch.setattr(build, "run_config", fail)
        assert main(["evolve-mf", "--out", str(out_dir), "-q"]) == EXIT_NUMERICAL
