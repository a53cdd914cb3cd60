"""Command-line interface tests: config parsing, subcommands, exit codes."""

import math
from pathlib import Path

import numpy as np
import pytest

from shgimaging import cli
from shgimaging.errors import ConfigError

REPO_ROOT = Path(__file__).resolve().parents[1]
DEFAULT_CFG = REPO_ROOT / "configs" / "default.cfg"

SMALL_CFG = """
medium.sigma_mu = 0
medium.l_mu = 0.25
medium.grid_n = 32
medium.seed = 11
reflector.z_r = -0.2 0.5
reflector.delta = 0.056418958354775628
reflector.sigma_r = 2
reflector.chi = 1 0 0 1
omega = 8
n_illuminations = 4
sensors.radius = 3
grid.nx = 64
grid.ny = 64
"""


def write_cfg(tmp_path, text=SMALL_CFG, name="small.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestParseConfig:
    def test_default_file_reproduces_reference_scenario(self):
        cfg = cli.parse_config(DEFAULT_CFG.read_text())
        assert cfg.medium.sigma_mu == 0.02
        assert cfg.medium.l_mu == 0.25
        assert np.array_equal(cfg.reflector.z_r, np.array([-0.2, 0.5]))
        assert cfg.reflector.delta == 0.004 / math.pi
        assert cfg.reflector.sigma_r == 2.0
        assert cfg.omega == 8.0
        assert cfg.reflector.shape_area == math.pi

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            cli.parse_config(SMALL_CFG + "\nwavelength = 3\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            cli.parse_config(SMALL_CFG + "\nomega = 9\n")

    def test_missing_chi_message(self):
        text = "\n".join(
            ln for ln in SMALL_CFG.splitlines() if not ln.startswith("reflector.chi")
        )
        with pytest.raises(ConfigError, match="chi required for second-harmonic runs"):
            cli.parse_config(text)

    def test_missing_required_key(self):
        text = "\n".join(ln for ln in SMALL_CFG.splitlines() if not ln.startswith("omega"))
        with pytest.raises(ConfigError, match="omega"):
            cli.parse_config(text)

    def test_invalid_sigma_r_names_invariant(self):
        with pytest.raises(Exception, match="sigma_r must be > 0"):
            cli.parse_config(SMALL_CFG.replace("reflector.sigma_r = 2",
                                               "reflector.sigma_r = -1"))

    def test_bad_vector_lengths(self):
        with pytest.raises(ConfigError, match="z_r"):
            cli.parse_config(SMALL_CFG.replace("reflector.z_r = -0.2 0.5",
                                               "reflector.z_r = -0.2"))
        with pytest.raises(ConfigError, match="chi"):
            cli.parse_config(SMALL_CFG.replace("reflector.chi = 1 0 0 1",
                                               "reflector.chi = 1 0 0"))

    def test_line_number_in_errors(self):
        with pytest.raises(ConfigError, match="line 2"):
            cli.parse_config("omega = 8\nnot a pair\n")


class TestSimulate:
    def test_deterministic_and_file_count(self, tmp_path):
        cfg_path = write_cfg(tmp_path)
        rc = cli.main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / "a")])
        assert rc == 0
        rc = cli.main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / "b")])
        assert rc == 0
        a_files = sorted((tmp_path / "a").glob("*.csv"))
        boundary = [p for p in a_files if p.name != "medium.csv"]
        assert len(boundary) == 2 * 4  # two frequencies x four angles
        for f in a_files:
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_zero_chi_silences_second_harmonic(self, tmp_path):
        cfg_path = write_cfg(tmp_path, SMALL_CFG.replace(
            "reflector.chi = 1 0 0 1", "reflector.chi = 0 0 0 0"))
        out = tmp_path / "out"
        assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(out)]) == 0
        from shgimaging.forward import boundary_from_csv
        for path in out.glob("second_harmonic_*.csv"):
            bd, _ = boundary_from_csv(path)
            assert not np.any(bd.samples)

    def test_outputs_embed_resolved_config(self, tmp_path):
        cfg_path = write_cfg(tmp_path)
        out = tmp_path / "out"
        assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(out)]) == 0
        for name in ("medium.csv", "fundamental_000.csv"):
            text = (out / name).read_text()
            assert "# config: medium.seed = 11" in text
            assert "# config: omega = 8" in text

    def test_seed_precedence(self, tmp_path, monkeypatch):
        cfg_path = write_cfg(tmp_path, SMALL_CFG.replace("medium.sigma_mu = 0",
                                                         "medium.sigma_mu = 0.02"))
        runs = {}
        for label, env_seed, flag in (
            ("config", None, []),
            ("env", "123", []),
            ("flag", "123", ["--seed", "999"]),
        ):
            if env_seed is None:
                monkeypatch.delenv("SHG_SEED", raising=False)
            else:
                monkeypatch.setenv("SHG_SEED", env_seed)
            out = tmp_path / label
            assert cli.main(["simulate", "--config", str(cfg_path),
                             "--out", str(out)] + flag) == 0
            runs[label] = (out / "medium.csv").read_bytes()
        assert runs["config"] != runs["env"]
        assert runs["env"] != runs["flag"]
        assert b"medium.seed = 123" in runs["env"]
        assert b"medium.seed = 999" in runs["flag"]


class TestImage:
    def test_noiseless_localization(self, tmp_path, capsys):
        cfg_path = write_cfg(tmp_path)
        out = tmp_path / "run"
        assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(out)]) == 0
        assert cli.main(["image", "--config", str(cfg_path), "--data", str(out),
                         "--out", str(out)]) == 0
        text = (out / "localization.txt").read_text()
        cell = math.hypot(2.0 / 63.0, 2.0 / 63.0)
        for line in text.splitlines():
            if line.startswith(("I:", "J:")):
                dist = float(line.split("dist_to_z_r = ")[1].split(",")[0])
                assert dist <= cell
        for name in ("image_I.csv", "image_I.pgm", "image_J.csv", "image_J.pgm"):
            assert (out / name).exists()

    def test_missing_data_is_format_error(self, tmp_path):
        cfg_path = write_cfg(tmp_path)
        rc = cli.main(["image", "--config", str(cfg_path), "--data",
                       str(tmp_path / "nowhere"), "--out", str(tmp_path / "o")])
        assert rc == cli.EXIT_CONFIG


class TestSweep:
    def test_empty_values_usage_error(self, tmp_path):
        cfg_path = write_cfg(tmp_path)
        rc = cli.main(["sweep", "--config", str(cfg_path), "--sweep-param",
                       "medium_noise", "--sweep-values", "", "--trials", "2",
                       "--out", str(tmp_path / "s")])
        assert rc == cli.EXIT_CONFIG

    def test_volume_and_measurement_parameters(self, tmp_path):
        cfg_path = write_cfg(tmp_path, SMALL_CFG.replace("medium.sigma_mu = 0",
                                                         "medium.sigma_mu = 0.02"))
        for param, values in (("volume", "1e-3,1e-2"), ("measurement_noise", "0,0.5")):
            out = tmp_path / param
            rc = cli.main(["sweep", "--config", str(cfg_path), "--sweep-param", param,
                           "--sweep-values", values, "--trials", "2",
                           "--out", str(out)])
            assert rc == 0
            lines = (out / f"sweep_{param}.csv").read_text().splitlines()
            rows = [ln for ln in lines if ln and not ln.startswith(("#", "parameter_value"))]
            assert len(rows) == 2

    def test_small_sweep_rows_and_thread_determinism(self, tmp_path):
        cfg_path = write_cfg(tmp_path, SMALL_CFG.replace("medium.sigma_mu = 0",
                                                         "medium.sigma_mu = 0.02"))
        outs = []
        for label, threads in (("t1", "1"), ("t4", "4")):
            out = tmp_path / label
            rc = cli.main(["sweep", "--config", str(cfg_path), "--sweep-param",
                           "medium_noise", "--sweep-values", "0.02,0.05",
                           "--trials", "3", "--threads", threads, "--out", str(out)])
            assert rc == 0
            outs.append((out / "sweep_medium_noise.csv").read_bytes())
        assert outs[0] == outs[1]
        rows = [ln for ln in outs[0].decode().splitlines()
                if ln and not ln.startswith(("#", "parameter_value"))]
        assert len(rows) == 2
        assert (tmp_path / "t1" / "sweep_medium_noise_summary.json").exists()


class TestExitCodes:
    def test_selftest_passes(self, capsys):
        assert cli.main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert out.count("PASS") >= 6

    def test_missing_config_file_is_io_error(self, tmp_path):
        rc = cli.main(["simulate", "--config", str(tmp_path / "none.cfg"),
                       "--out", str(tmp_path)])
        assert rc == cli.EXIT_IO

    def test_bad_config_is_config_error(self, tmp_path):
        cfg_path = write_cfg(tmp_path, SMALL_CFG + "\nbogus.key = 1\n")
        rc = cli.main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path)])
        assert rc == cli.EXIT_CONFIG
