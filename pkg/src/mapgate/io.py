"""CSV and text-report output.

Everything here is plain text: CSV for arrays (one schema per artifact,
documented on the writer), a human-readable report for process tomography.
Floats are rendered with repr-level precision through one shared formatter
so identical results serialize to identical bytes.
"""

import csv
import math

import numpy as np

from .model import GHZ, MHZ, NS
from .tomography import PAULI_LABELS


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".12g")


def write_table_csv(path, header, rows):
    """Generic deterministic CSV writer used by all exporters."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


_write_rows = write_table_csv


# ---------------------------------------------------------------------------
# Protocol artifacts
# ---------------------------------------------------------------------------

def write_fringe_csv(path, record):
    """One Ramsey fringe: time_ns, p1_cos, p1_sin, phase_rad, leak."""
    rows = zip(record.sweep_variable / NS, record.p1_q2, record.p1_q2_sin,
               record.phase, record.leakage)
    _write_rows(path, ["time_ns", "p1_cos", "p1_sin", "phase_rad", "leak"],
                rows)


def write_sweep_csv(path, results):
    """Gate-time sweep, one row per grid point.

    Columns: omega_d_GHz, Omega_MHz, phase_diff_rad, t_zzpi_ns, diverged.
    phase_diff_rad is the conditional phase reached at the reported gate
    time (+-pi by construction); diverged rows carry nan for both and 1 in
    the flag column.
    """
    rows = []
    for r in results:
        phase = math.nan if r.diverged else float(
            np.interp(r.t_zzpi, r.phase_times, r.phase_diff))
        rows.append((r.omega_d / GHZ, r.omega_amp / MHZ, phase,
                     r.t_zzpi / NS, r.diverged))
    _write_rows(path, ["omega_d_GHz", "Omega_MHz", "phase_diff_rad",
                       "t_zzpi_ns", "diverged"], rows)


def write_phase_curves_csv(path, results):
    """Long-format conditional-phase curves behind a sweep.

    Columns: omega_d_GHz, Omega_MHz, time_ns, phase_diff_rad; one block of
    rows per grid point, in sweep order.
    """
    rows = []
    for r in results:
        for t, ph in zip(r.phase_times, r.phase_diff):
            rows.append((r.omega_d / GHZ, r.omega_amp / MHZ, t / NS, ph))
    _write_rows(path, ["omega_d_GHz", "Omega_MHz", "time_ns",
                       "phase_diff_rad"], rows)


def write_populations_csv(path, times, populations):
    """Propagation time series: time_ns, P00, P01, P10, P11, leak_total."""
    rows = [(t / NS, *row) for t, row in zip(times, populations)]
    _write_rows(path, ["time_ns", "P00", "P01", "P10", "P11", "leak_total"],
                rows)


def write_spectroscopy_csv(path, spec_map):
    """Long-format depletion map: freq_GHz, Omega_MHz, signal."""
    rows = []
    for i, amp in enumerate(spec_map.amps):
        for j, f in enumerate(spec_map.freqs):
            rows.append((f / GHZ, amp / MHZ, spec_map.signal[i, j]))
    _write_rows(path, ["freq_GHz", "Omega_MHz", "signal"], rows)


def write_pert_compare_csv(path, omega_amps, zeta_pert, zeta_numeric):
    """Perturbative vs numeric conditional rate: Omega_MHz, zeta_pert_MHz,
    zeta_numeric_MHz.  All three columns are angular rates divided by 2pi
    MHz, matching the unit constants used everywhere else."""
    rows = zip(np.asarray(omega_amps) / MHZ,
               np.asarray(zeta_pert) / MHZ,
               np.asarray(zeta_numeric) / MHZ)
    _write_rows(path, ["Omega_MHz", "zeta_pert_MHz", "zeta_numeric_MHz"],
                rows)


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------

def write_ptm_csv(path, r):
    """16x16 PTM with Pauli labels on the header row and first column."""
    rows = [(PAULI_LABELS[i], *r[i]) for i in range(16)]
    _write_rows(path, ["", *PAULI_LABELS], rows)


def read_ptm_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[1:] != PAULI_LABELS:
            raise ValueError(f"{path}: unexpected PTM header")
        rows = list(reader)
    if [row[0] for row in rows] != PAULI_LABELS:
        raise ValueError(f"{path}: unexpected PTM row labels")
    return np.array([[float(v) for v in row[1:]] for row in rows])


def write_complex_matrix_csv(path, m, label=""):
    """Square complex matrix as interleaved re/im column pairs.

    Header: i, then re_0, im_0, re_1, im_1, ...; one row per matrix row.
    Used for Choi matrices and propagators.
    """
    m = np.asarray(m)
    n = m.shape[0]
    header = ["i"]
    for j in range(n):
        header += [f"re_{j}", f"im_{j}"]
    rows = []
    for i in range(n):
        row = [i]
        for j in range(n):
            row += [m[i, j].real, m[i, j].imag]
        rows.append(row)
    _write_rows(path, header, rows)


def read_complex_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = list(reader)
    n = len(rows)
    m = np.empty((n, n), dtype=complex)
    for i, row in enumerate(rows):
        vals = [float(v) for v in row[1:]]
        m[i] = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
    return m


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def process_report(result) -> str:
    """Human-readable process-tomography summary."""
    lines = [
        "process tomography summary",
        "--------------------------",
        f"average gate fidelity (raw PTM):       {result.f_raw:.6f}",
        f"average gate fidelity (CPTP projected): {result.f_proj:.6f}",
        f"process fidelity (raw PTM):            {result.process_f_raw:.6f}",
        f"process fidelity (CPTP projected):      {result.process_f_proj:.6f}",
        f"eta (negative raw-Choi eigenvalue mass): {result.eta:.6f}",
        f"worst preparation leakage mass:         {result.leakage:.6f}",
    ]
    if result.shots is not None:
        lines.append(f"shots per expectation value:            {result.shots}")
    if result.total_time is not None:
        lines.append(
            f"gate wall-clock time:                   "
            f"{result.total_time / NS:.2f} ns")
    return "\n".join(lines) + "\n"


def write_process_report(path, result):
    with open(path, "w") as fh:
        fh.write(process_report(result))
