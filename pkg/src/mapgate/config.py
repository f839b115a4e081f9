"""Experiment configuration: YAML in, validated ExperimentConfig out.

Every dimensioned key carries its unit as a suffix (_GHz, _MHz, _ns, _us,
_rad); values are converted to the internal rad/s and seconds on parse.
Unknown keys are rejected rather than ignored, and validation reports every
problem at once instead of stopping at the first.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .calibration import (SHIPPED_DIRECT, SHIPPED_REFOCUSED, GateCalibration,
                          calibrated_device)
from .model import GHZ, MHZ, NS, US, DeviceParams, default_device

EXPERIMENTS = ("spectroscopy", "ramsey-direct", "ramsey-refocused", "sweep",
               "pert-compare", "qpt")

# experiments that address the |11> -> |03>-like resonance and therefore
# need at least four levels on transmon 2
_MAP_EXPERIMENTS = ("ramsey-direct", "ramsey-refocused", "sweep",
                    "pert-compare", "qpt")

_GATE_PRESETS = {"shipped-refocused": SHIPPED_REFOCUSED,
                 "shipped-direct": SHIPPED_DIRECT}


class ConfigError(ValueError):
    """Invalid experiment configuration; ``errors`` lists every problem."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  - " +
                         "\n  - ".join(self.errors))


@dataclass
class ExperimentConfig:
    experiment: str
    device: DeviceParams
    port: str = "q2"
    omega_d: np.ndarray | None = None          # rad/s
    omega_amp: np.ndarray | None = None        # rad/s
    rise_fall: float = 10.0 * NS
    time_grid: np.ndarray | None = None        # s
    pulse_len: float | None = None             # s (spectroscopy)
    sweep_kind: str = "refocused"
    gate: GateCalibration | None = None        # qpt
    tol: float = 1e-8
    lindblad_tol: float = 1e-6
    horizon: float = 5e-6
    shots: int | None = None
    leak_threshold: float | None = None     # None: per-experiment default
    seed: int = 0
    workers: int = 1
    outdir: str = "out"
    phase_curves: bool = False
    raw: dict = field(default_factory=dict, repr=False)


def _check_keys(block, allowed, where, errors):
    for key in block:
        if key not in allowed:
            errors.append(f"{where}: unknown key {key!r} "
                          f"(allowed: {', '.join(sorted(allowed))})")


def _grid(value, unit, where, errors, scalar_ok=True):
    """Scalar, list, or {start, stop, num} linspace block, scaled by unit."""
    if value is None:
        return None
    if isinstance(value, dict):
        missing = {"start", "stop", "num"} - set(value)
        _check_keys(value, {"start", "stop", "num"}, where, errors)
        if missing:
            errors.append(f"{where}: grid block needs start/stop/num, "
                          f"missing {sorted(missing)}")
            return None
        try:
            num = int(value["num"])
            if num < 1:
                raise ValueError
            return np.linspace(float(value["start"]) * unit,
                               float(value["stop"]) * unit, num)
        except (TypeError, ValueError):
            errors.append(f"{where}: start/stop must be numbers, num a "
                          "positive integer")
            return None
    if isinstance(value, (list, tuple)):
        try:
            return np.array([float(v) for v in value]) * unit
        except (TypeError, ValueError):
            errors.append(f"{where}: list entries must be numbers")
            return None
    if scalar_ok:
        try:
            return np.array([float(value)]) * unit
        except (TypeError, ValueError):
            pass
    errors.append(f"{where}: expected a number, list, or start/stop/num "
                  "block")
    return None


def _pair(value, where, errors):
    if value is None:
        return (None, None)
    if isinstance(value, (int, float)):
        return (float(value), float(value))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        try:
            return (float(value[0]), float(value[1]))
        except (TypeError, ValueError):
            pass
    errors.append(f"{where}: expected a number or a [transmon1, transmon2] "
                  "pair")
    return (None, None)


def _device(block, errors) -> DeviceParams | None:
    if block is None:
        errors.append("device: block is required")
        return None
    allowed = {"preset", "with_noise", "f1_GHz", "f2_GHz", "anharm1_MHz",
               "anharm2_MHz", "J_MHz", "levels1", "levels2", "T1_us",
               "T2_us"}
    _check_keys(block, allowed, "device", errors)
    preset = block.get("preset")
    if preset is not None:
        extra = set(block) - {"preset", "with_noise"}
        if extra:
            errors.append(f"device: preset {preset!r} does not combine with "
                          f"explicit fields {sorted(extra)}")
        noise = bool(block.get("with_noise", False))
        if preset == "paper-default":
            return default_device(with_noise=noise)
        if preset == "calibrated":
            return calibrated_device(with_noise=noise)
        errors.append(f"device: unknown preset {preset!r} "
                      "(paper-default, calibrated)")
        return None
    required = ("f1_GHz", "f2_GHz", "anharm1_MHz", "anharm2_MHz", "J_MHz")
    missing = [k for k in required if k not in block]
    if missing:
        errors.append(f"device: missing keys {missing}")
        return None
    t1 = _pair(block.get("T1_us"), "device.T1_us", errors)
    t2 = _pair(block.get("T2_us"), "device.T2_us", errors)
    try:
        return DeviceParams.from_frequencies(
            float(block["f1_GHz"]), float(block["f2_GHz"]),
            float(block["anharm1_MHz"]), float(block["anharm2_MHz"]),
            float(block["J_MHz"]), levels1=int(block.get("levels1", 3)),
            levels2=int(block.get("levels2", 5)), t1_us=t1, t2_us=t2)
    except (TypeError, ValueError) as exc:
        errors.append(f"device: {exc}")
        return None


def _gate(block, errors) -> GateCalibration | None:
    if block is None:
        errors.append("qpt.gate: block is required for experiment=qpt")
        return None
    if isinstance(block, str):
        if block in _GATE_PRESETS:
            return _GATE_PRESETS[block]
        errors.append(f"qpt.gate: unknown preset {block!r} "
                      f"(one of {', '.join(sorted(_GATE_PRESETS))})")
        return None
    allowed = {"omega_d_GHz", "Omega_MHz", "rise_fall_ns", "dt_ns",
               "virtual_z_rad", "echoed", "port"}
    _check_keys(block, allowed, "qpt.gate", errors)
    missing = [k for k in ("omega_d_GHz", "Omega_MHz", "rise_fall_ns",
                           "dt_ns") if k not in block]
    if missing:
        errors.append(f"qpt.gate: missing keys {missing}")
        return None
    vz = block.get("virtual_z_rad", (0.0, 0.0))
    if not (isinstance(vz, (list, tuple)) and len(vz) == 2):
        errors.append("qpt.gate.virtual_z_rad: expected a [q1, q2] pair")
        return None
    try:
        return GateCalibration(
            omega_d=float(block["omega_d_GHz"]) * GHZ,
            omega_amp=float(block["Omega_MHz"]) * MHZ,
            rise_fall=float(block["rise_fall_ns"]) * NS,
            dt=float(block["dt_ns"]) * NS,
            virtual_z=(float(vz[0]), float(vz[1])),
            echoed=bool(block.get("echoed", True)),
            port=str(block.get("port", "q2")))
    except (TypeError, ValueError) as exc:
        errors.append(f"qpt.gate: {exc}")
        return None


def validate(mapping) -> list:
    """All validation problems of a raw config mapping (empty when valid)."""
    _, errors = _build(mapping)
    return errors


def parse_config(mapping) -> ExperimentConfig:
    cfg, errors = _build(mapping)
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            mapping = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: invalid YAML: {exc}"]) from exc
    if not isinstance(mapping, dict):
        raise ConfigError([f"{path}: top level must be a mapping"])
    return parse_config(mapping)


def _build(mapping):
    errors = []
    if not isinstance(mapping, dict):
        return None, ["top level must be a mapping"]
    top_allowed = {"experiment", "device", "drive", "time_grid_ns",
                   "spectroscopy", "sweep", "qpt", "numerics", "output",
                   "seed", "workers"}
    _check_keys(mapping, top_allowed, "top level", errors)

    experiment = mapping.get("experiment")
    if experiment not in EXPERIMENTS:
        errors.append(f"experiment: expected one of {EXPERIMENTS}, got "
                      f"{experiment!r}")
        experiment = None

    device = _device(mapping.get("device"), errors)
    if (device is not None and experiment in _MAP_EXPERIMENTS
            and device.d2 < 4):
        errors.append(
            f"device: experiment {experiment!r} addresses the |03> level; "
            f"levels2 must be at least 4, got {device.d2}")

    cfg = ExperimentConfig(experiment=experiment or "", device=device,
                           raw=dict(mapping))

    drive = mapping.get("drive") or {}
    if not isinstance(drive, dict):
        errors.append("drive: expected a mapping")
        drive = {}
    _check_keys(drive, {"port", "omega_d_GHz", "Omega_MHz", "rise_fall_ns"},
                "drive", errors)
    cfg.port = str(drive.get("port", "q2"))
    if cfg.port not in ("q1", "q2", "both"):
        errors.append(f"drive.port: expected q1, q2 or both, got {cfg.port!r}")
    cfg.omega_d = _grid(drive.get("omega_d_GHz"), GHZ, "drive.omega_d_GHz",
                        errors)
    cfg.omega_amp = _grid(drive.get("Omega_MHz"), MHZ, "drive.Omega_MHz",
                          errors)
    if "rise_fall_ns" in drive:
        try:
            cfg.rise_fall = float(drive["rise_fall_ns"]) * NS
            if cfg.rise_fall <= 0:
                raise ValueError
        except (TypeError, ValueError):
            errors.append("drive.rise_fall_ns: expected a positive number")

    cfg.time_grid = _grid(mapping.get("time_grid_ns"), NS, "time_grid_ns",
                          errors, scalar_ok=False)

    spect = mapping.get("spectroscopy") or {}
    _check_keys(spect, {"pulse_ns"}, "spectroscopy", errors)
    if "pulse_ns" in spect:
        cfg.pulse_len = float(spect["pulse_ns"]) * NS

    sweep = mapping.get("sweep") or {}
    _check_keys(sweep, {"kind"}, "sweep", errors)
    cfg.sweep_kind = str(sweep.get("kind", "refocused"))
    if cfg.sweep_kind not in ("refocused", "direct"):
        errors.append(f"sweep.kind: expected refocused or direct, got "
                      f"{cfg.sweep_kind!r}")

    qpt = mapping.get("qpt") or {}
    _check_keys(qpt, {"gate"}, "qpt", errors)
    if experiment == "qpt":
        cfg.gate = _gate(qpt.get("gate"), errors)

    numerics = mapping.get("numerics") or {}
    _check_keys(numerics, {"tol", "lindblad_tol", "horizon_us", "shots",
                           "leak_threshold"}, "numerics", errors)
    try:
        cfg.tol = float(numerics.get("tol", cfg.tol))
        cfg.lindblad_tol = float(numerics.get("lindblad_tol",
                                              cfg.lindblad_tol))
        if "leak_threshold" in numerics:
            cfg.leak_threshold = float(numerics["leak_threshold"])
            if not 0.0 < cfg.leak_threshold <= 1.0:
                errors.append("numerics.leak_threshold: expected a value "
                              "in (0, 1]")
        if "horizon_us" in numerics:
            cfg.horizon = float(numerics["horizon_us"]) * US
    except (TypeError, ValueError):
        errors.append("numerics: tolerances and horizon must be numbers")
    shots = numerics.get("shots")
    if shots is not None and shots != "inf":
        try:
            cfg.shots = int(shots)
            if cfg.shots <= 0:
                raise ValueError
        except (TypeError, ValueError):
            errors.append("numerics.shots: expected a positive integer, "
                          "'inf', or null")

    output = mapping.get("output") or {}
    _check_keys(output, {"dir", "phase_curves"}, "output", errors)
    cfg.outdir = str(output.get("dir", cfg.outdir))
    cfg.phase_curves = bool(output.get("phase_curves", False))

    for key, attr in (("seed", "seed"), ("workers", "workers")):
        if key in mapping:
            try:
                setattr(cfg, attr, int(mapping[key]))
                if getattr(cfg, attr) < 0 or (key == "workers"
                                              and cfg.workers < 1):
                    raise ValueError
            except (TypeError, ValueError):
                errors.append(f"{key}: expected a non-negative integer")

    # per-experiment completeness
    need = {
        "spectroscopy": (("drive.omega_d_GHz", cfg.omega_d),
                         ("drive.Omega_MHz", cfg.omega_amp),
                         ("spectroscopy.pulse_ns", cfg.pulse_len)),
        "ramsey-direct": (("drive.omega_d_GHz", cfg.omega_d),
                          ("drive.Omega_MHz", cfg.omega_amp),
                          ("time_grid_ns", cfg.time_grid)),
        "ramsey-refocused": (("drive.omega_d_GHz", cfg.omega_d),
                             ("drive.Omega_MHz", cfg.omega_amp),
                             ("time_grid_ns", cfg.time_grid)),
        "sweep": (("drive.omega_d_GHz", cfg.omega_d),
                  ("drive.Omega_MHz", cfg.omega_amp)),
        "pert-compare": (("drive.omega_d_GHz", cfg.omega_d),
                         ("drive.Omega_MHz", cfg.omega_amp)),
        "qpt": (),
    }
    if experiment in need:
        for name, value in need[experiment]:
            if value is None:
                errors.append(f"{name}: required for experiment "
                              f"{experiment!r}")
    if experiment in ("ramsey-direct", "ramsey-refocused", "pert-compare"):
        for name, value in (("drive.omega_d_GHz", cfg.omega_d),):
            if value is not None and value.size != 1:
                errors.append(f"{name}: experiment {experiment!r} takes a "
                              "single drive frequency")
    if experiment in ("ramsey-direct", "ramsey-refocused"):
        if cfg.omega_amp is not None and cfg.omega_amp.size != 1:
            errors.append("drive.Omega_MHz: ramsey experiments take a "
                          "single amplitude")
    # pulse geometry: every drive segment must fit its two ramps
    if (experiment == "spectroscopy" and cfg.pulse_len is not None
            and cfg.pulse_len < 2 * cfg.rise_fall):
        errors.append("spectroscopy.pulse_ns: pulse shorter than its "
                      "rise and fall ramps")
    if experiment in ("ramsey-direct", "ramsey-refocused") \
            and cfg.time_grid is not None and cfg.time_grid.size:
        ramps = (4 if experiment == "ramsey-refocused" else 2) * cfg.rise_fall
        if cfg.time_grid.min() < ramps - 1e-15:
            errors.append(
                f"time_grid_ns: shortest duration {cfg.time_grid.min() / NS:g}"
                f" ns cannot fit the drive ramps (needs >= {ramps / NS:g} ns "
                f"for {experiment})")
    return cfg, errors
