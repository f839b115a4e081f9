"""Experiment orchestration: dispatch, worker pool, result persistence.

Each run writes its artifacts plus a ``manifest.json`` whose file inventory
matches the directory contents exactly.  All randomness derives from the
config seed (per-grid-point substreams), so identical configs reproduce
identical CSV bytes regardless of worker count.
"""

import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, io
from .config import ExperimentConfig
from .dynamics import driven_dressed_energies
from .errors import LeakageRegionError
from .fringes import conditional_phase_curve
from .model import zeta_perturbative
from .protocols import (LEAK_THRESHOLD, rabi_spectroscopy,
                        ramsey_map_direct, ramsey_map_refocused,
                        sweep_gate_time)
from .tomography import qpt_pipeline


@dataclass
class RunManifest:
    experiment: str
    version: str
    seed: int
    workers: int
    config: dict
    files: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def write(self, outdir):
        payload = {
            "experiment": self.experiment, "version": self.version,
            "seed": self.seed, "workers": self.workers,
            "config": self.config, "files": sorted(self.files),
            "warnings": self.warnings, "timings": self.timings,
        }
        with open(Path(outdir) / "manifest.json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _rng_for(cfg: ExperimentConfig, *stream):
    if cfg.shots is None:
        return None
    return np.random.default_rng([cfg.seed, *stream])


# ---------------------------------------------------------------------------
# Experiment implementations
# ---------------------------------------------------------------------------

def _run_spectroscopy(cfg, outdir, manifest):
    spec_map = rabi_spectroscopy(
        cfg.device, cfg.omega_d, cfg.omega_amp, cfg.pulse_len, port=cfg.port,
        rise_fall=cfg.rise_fall, shots=cfg.shots, rng=_rng_for(cfg))
    io.write_spectroscopy_csv(outdir / "spectroscopy.csv", spec_map)
    manifest.files.append("spectroscopy.csv")


def _run_ramsey(cfg, outdir, manifest, kind):
    fn = ramsey_map_direct if kind == "direct" else ramsey_map_refocused
    records = []
    for init in (0, 1):
        rec = fn(cfg.device, float(cfg.omega_d[0]), float(cfg.omega_amp[0]),
                 cfg.time_grid, init=init, port=cfg.port, shots=cfg.shots,
                 rng=_rng_for(cfg, init), rise_fall=cfg.rise_fall,
                 tol=cfg.tol)
        name = f"fringe_init{init}.csv"
        io.write_fringe_csv(outdir / name, rec)
        manifest.files.append(name)
        records.append(rec)
    diff = conditional_phase_curve(records[1].phase, records[0].phase)
    io.write_table_csv(outdir / "phase_diff.csv",
                       ["time_ns", "phase_diff_rad"],
                       zip(records[0].sweep_variable / 1e-9, diff))
    manifest.files.append("phase_diff.csv")


def _sweep_point(args):
    (params, omega_d, omega_amp, kind, port, horizon, leak_threshold, shots,
     seed, idx, rise_fall, tol) = args
    rng = None if shots is None else np.random.default_rng([seed, idx])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = sweep_gate_time(params, [omega_d], [omega_amp], kind=kind,
                              port=port, horizon=horizon,
                              leak_threshold=leak_threshold, shots=shots,
                              rng=rng, rise_fall=rise_fall, tol=tol)[0]
    return res, [str(w.message) for w in caught]


def _run_sweep(cfg, outdir, manifest):
    points = [(float(wd), float(om))
              for om in cfg.omega_amp for wd in cfg.omega_d]
    leak = (cfg.leak_threshold if cfg.leak_threshold is not None
            else LEAK_THRESHOLD)
    jobs = [(cfg.device, wd, om, cfg.sweep_kind, cfg.port, cfg.horizon,
             leak, cfg.shots, cfg.seed, idx, cfg.rise_fall, cfg.tol)
            for idx, (wd, om) in enumerate(points)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_sweep_point, jobs))
    else:
        outcomes = [_sweep_point(job) for job in jobs]
    results = [res for res, _ in outcomes]
    for _, warns in outcomes:
        manifest.warnings.extend(warns)
    io.write_sweep_csv(outdir / "sweep.csv", results)
    manifest.files.append("sweep.csv")
    if cfg.phase_curves:
        io.write_phase_curves_csv(outdir / "phase_curves.csv", results)
        manifest.files.append("phase_curves.csv")
    return results


def _run_pert_compare(cfg, outdir, manifest):
    omega_d = float(cfg.omega_d[0])
    amps, pert, numeric = [], [], []
    for om in cfg.omega_amp:
        amps.append(float(om))
        pert.append(zeta_perturbative(cfg.device, omega_d, float(om)))
        try:
            numeric.append(driven_dressed_energies(cfg.device, omega_d,
                                                   float(om)).zeta)
        except LeakageRegionError as exc:
            manifest.warnings.append(
                f"Omega={om / (2e6 * math.pi):.3f} MHz: {exc}")
            numeric.append(math.nan)
    io.write_pert_compare_csv(outdir / "pert_compare.csv", amps, pert,
                              numeric)
    manifest.files.append("pert_compare.csv")


def _run_qpt(cfg, outdir, manifest):
    leak = 0.05 if cfg.leak_threshold is None else cfg.leak_threshold
    res = qpt_pipeline(cfg.device, cfg.gate, shots=cfg.shots,
                       rng=_rng_for(cfg), tol=cfg.lindblad_tol,
                       leak_threshold=leak)
    io.write_ptm_csv(outdir / "ptm_raw.csv", res.r_raw)
    io.write_ptm_csv(outdir / "ptm_phys.csv", res.r_phys)
    io.write_complex_matrix_csv(outdir / "choi.csv", res.choi)
    io.write_process_report(outdir / "process_report.txt", res)
    manifest.files += ["ptm_raw.csv", "ptm_phys.csv", "choi.csv",
                       "process_report.txt"]
    return res


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def run(cfg: ExperimentConfig, outdir=None) -> RunManifest:
    """Execute one configured experiment and persist its artifacts."""
    outdir = Path(cfg.outdir if outdir is None else outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(experiment=cfg.experiment, version=__version__,
                           seed=cfg.seed, workers=cfg.workers,
                           config=cfg.raw)
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if cfg.experiment == "spectroscopy":
            _run_spectroscopy(cfg, outdir, manifest)
        elif cfg.experiment in ("ramsey-direct", "ramsey-refocused"):
            _run_ramsey(cfg, outdir, manifest,
                        cfg.experiment.split("-")[1])
        elif cfg.experiment == "sweep":
            _run_sweep(cfg, outdir, manifest)
        elif cfg.experiment == "pert-compare":
            _run_pert_compare(cfg, outdir, manifest)
        elif cfg.experiment == "qpt":
            _run_qpt(cfg, outdir, manifest)
        else:
            raise ValueError(f"unknown experiment {cfg.experiment!r}")
    manifest.warnings.extend(str(w.message) for w in caught)
    manifest.timings["total_s"] = round(time.perf_counter() - t0, 3)
    manifest.files.append("manifest.json")
    manifest.write(outdir)
    return manifest
