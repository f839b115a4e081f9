"""Config schema: validation, presets, grids and the shipped YAML files."""

import math
from pathlib import Path

import numpy as np
import pytest

from mapgate.config import (EXPERIMENTS, ConfigError, load_config,
                            parse_config, validate)
from mapgate.model import GHZ, MHZ, NS, US

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def _base(experiment="pert-compare", **over):
    mapping = {
        "experiment": experiment,
        "device": {"preset": "paper-default"},
        "drive": {"omega_d_GHz": 5.43, "Omega_MHz": [1.0, 5.0]},
    }
    mapping.update(over)
    return mapping


class TestValidMinimal:
    def test_pert_compare(self):
        cfg = parse_config(_base())
        assert cfg.experiment == "pert-compare"
        assert cfg.omega_d[0] == pytest.approx(5.43 * GHZ)
        assert np.allclose(cfg.omega_amp, [1.0 * MHZ, 5.0 * MHZ])
        assert cfg.device.d2 == 5

    def test_spectroscopy(self):
        cfg = parse_config(_base(
            "spectroscopy",
            drive={"omega_d_GHz": [5.1, 5.2], "Omega_MHz": 2.0},
            spectroscopy={"pulse_ns": 800.0}))
        assert cfg.pulse_len == pytest.approx(800 * NS)
        assert cfg.omega_d.size == 2

    def test_ramsey_with_grid_block(self):
        cfg = parse_config(_base(
            "ramsey-refocused",
            drive={"omega_d_GHz": 5.43, "Omega_MHz": 5.0},
            time_grid_ns={"start": 40.0, "stop": 4000.0, "num": 25}))
        assert cfg.time_grid.size == 25
        assert cfg.time_grid[0] == pytest.approx(40 * NS)
        assert cfg.time_grid[-1] == pytest.approx(4 * US)

    def test_sweep_defaults(self):
        cfg = parse_config(_base(
            "sweep", drive={"omega_d_GHz": [5.40, 5.45], "Omega_MHz": 10.0}))
        assert cfg.sweep_kind == "refocused"
        assert cfg.horizon == pytest.approx(5e-6)
        assert cfg.leak_threshold is None

    def test_qpt_with_preset_gate(self):
        cfg = parse_config({
            "experiment": "qpt",
            "device": {"preset": "calibrated", "with_noise": True},
            "qpt": {"gate": "shipped-refocused"},
            "numerics": {"shots": 3000},
        })
        assert cfg.gate.echoed
        assert cfg.shots == 3000
        assert cfg.device.t1_1 == pytest.approx(6e-6)

    def test_qpt_with_inline_gate(self):
        cfg = parse_config({
            "experiment": "qpt",
            "device": {"preset": "calibrated"},
            "qpt": {"gate": {"omega_d_GHz": 5.426, "Omega_MHz": 30.6,
                             "rise_fall_ns": 70.0, "dt_ns": 606.86,
                             "virtual_z_rad": [-1.6, 1.9],
                             "echoed": True}},
        })
        assert cfg.gate.dt == pytest.approx(606.86 * NS)
        assert cfg.gate.virtual_z == (-1.6, 1.9)

    def test_all_experiments_have_a_valid_form(self):
        assert set(EXPERIMENTS) == {"spectroscopy", "ramsey-direct",
                                    "ramsey-refocused", "sweep",
                                    "pert-compare", "qpt"}


class TestValidationErrors:
    def test_all_errors_collected_at_once(self):
        bad = {
            "experiment": "nope",
            "device": {"preset": "paper-default", "bogus": 1},
            "numerics": {"shots": -4},
            "seed": -1,
        }
        msgs = validate(bad)
        assert len(msgs) >= 4
        joined = "\n".join(msgs)
        for frag in ("experiment", "bogus", "shots", "seed"):
            assert frag in joined

    def test_parse_raises_with_error_list(self):
        with pytest.raises(ConfigError) as err:
            parse_config({"experiment": "qpt"})
        assert any("device" in m for m in err.value.errors)
        assert any("qpt.gate" in m for m in err.value.errors)

    def test_unknown_top_level_key(self):
        assert any("unknown key" in m for m in validate(_base(extra=1)))

    def test_preset_plus_explicit_device(self):
        bad = _base()
        bad["device"] = {"preset": "paper-default", "f1_GHz": 5.1}
        assert any("does not combine" in m for m in validate(bad))

    def test_t2_bound_enforced(self):
        bad = _base()
        bad["device"] = {"f1_GHz": 5.166, "f2_GHz": 5.668,
                         "anharm1_MHz": -220.0, "anharm2_MHz": -220.0,
                         "J_MHz": 3.0, "T1_us": 1.0, "T2_us": 3.0}
        assert any("T2" in m for m in validate(bad))

    def test_map_experiment_needs_four_levels(self):
        bad = _base("ramsey-refocused",
                    drive={"omega_d_GHz": 5.43, "Omega_MHz": 5.0},
                    time_grid_ns=[100.0, 400.0])
        bad["device"] = {"f1_GHz": 5.166, "f2_GHz": 5.668,
                         "anharm1_MHz": -220.0, "anharm2_MHz": -220.0,
                         "J_MHz": 3.0, "levels2": 3}
        assert any("|03>" in m for m in validate(bad))

    def test_bad_grid_block(self):
        bad = _base()
        bad["drive"] = {"omega_d_GHz": {"start": 5.4, "stop": 5.5},
                        "Omega_MHz": 5.0}
        assert any("start/stop/num" in m for m in validate(bad))

    def test_ramsey_rejects_amplitude_list(self):
        bad = _base("ramsey-direct",
                    drive={"omega_d_GHz": 5.43, "Omega_MHz": [1.0, 2.0]},
                    time_grid_ns=[100.0, 400.0])
        assert any("single amplitude" in m for m in validate(bad))

    def test_spectroscopy_pulse_must_fit_ramps(self):
        bad = _base("spectroscopy",
                    drive={"omega_d_GHz": 5.4, "Omega_MHz": 2.0,
                           "rise_fall_ns": 100.0},
                    spectroscopy={"pulse_ns": 150.0})
        assert any("rise and fall" in m for m in validate(bad))

    def test_refocused_grid_must_fit_four_ramps(self):
        bad = _base("ramsey-refocused",
                    drive={"omega_d_GHz": 5.43, "Omega_MHz": 5.0},
                    time_grid_ns=[20.0, 400.0])
        assert any("cannot fit the drive ramps" in m for m in validate(bad))
        ok = _base("ramsey-direct",
                   drive={"omega_d_GHz": 5.43, "Omega_MHz": 5.0},
                   time_grid_ns=[20.0, 400.0])
        assert validate(ok) == []

    def test_leak_threshold_range(self):
        bad = _base(numerics={"leak_threshold": 1.5})
        assert any("leak_threshold" in m for m in validate(bad))

    def test_unknown_gate_preset(self):
        bad = {"experiment": "qpt", "device": {"preset": "calibrated"},
               "qpt": {"gate": "shipped-banana"}}
        assert any("unknown preset" in m for m in validate(bad))

    def test_shots_inf_means_exact(self):
        cfg = parse_config(_base(numerics={"shots": "inf"}))
        assert cfg.shots is None


class TestShippedConfigs:
    @pytest.mark.parametrize("name", sorted(
        p.name for p in CONFIG_DIR.glob("*.yaml")))
    def test_parses_clean(self, name):
        cfg = load_config(CONFIG_DIR / name)
        assert cfg.experiment in EXPERIMENTS
        assert cfg.device is not None

    def test_repo_carries_the_reference_configs(self):
        names = {p.name for p in CONFIG_DIR.glob("*.yaml")}
        assert "paper_default.yaml" in names
        assert "calibrated_qpt.yaml" in names

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.yaml")

    def test_malformed_yaml_raises(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("experiment: [unclosed\n")
        with pytest.raises(ConfigError):
            load_config(path)
