"""Tune-up protocols: Rabi spectroscopy, MAP Ramsey experiments, sweeps.

All protocols build on the flat-top pulse family machinery: the working
frame co-rotates with the drive, so the propagator for any flat duration is
assembled from two fixed ramp propagators and one eigendecomposition, and a
whole duration sweep costs little more than a single propagation.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import fringes
from .dynamics import (DrivePulse, Idle, PulseSequence, Rotation, RotatingFrame,
                       driven_dressed_energies, flat_top_pieces,
                       frame_phase_unitary, rotation_unitary,
                       to_rotating_frame)
from .errors import LeakageRegionError
from .model import (GHZ, MHZ, NS, DeviceParams, dressed_qubit_frequencies,
                    static_dressed_states)

ROT_SLOT = 40.0 * NS            # single-qubit gate slot, kick at the center
RISE_FALL = 10.0 * NS
DEFAULT_HORIZON = 5e-6
# numerical guard on the fringe sweep: above this leak the qubit-space
# coherence radius shrinks toward zero and the quadrature phase is
# meaningless.  Transient coherent flopping of 10-20% at perfectly usable
# operating points must NOT flag; divergence proper comes from tracking
# ambiguity or a missing crossing.
LEAK_THRESHOLD = 0.5


# ---------------------------------------------------------------------------
# Result containers
# ---------------------------------------------------------------------------

@dataclass
class FringeRecord:
    """One Ramsey fringe: measured populations vs MAP drive duration.

    ``p1_q2`` is the cos-quadrature fringe (final analysis pulse in phase
    with the preparation pulse); ``p1_q2_sin`` repeats the measurement with
    the analysis pulse 90 degrees out of phase, which pins the sign of the
    accumulated phase.  ``phase`` is the unwrapped pointwise quadrature
    phase; fitted_* fields come from the cosine fit of ``p1_q2``.
    """

    sweep_variable: np.ndarray          # drive duration per point (s)
    p1_q2: np.ndarray
    init_label: str
    fitted_phase: float
    fitted_contrast: float
    fit_residual: float
    fit: fringes.CosineFit
    p1_q2_sin: np.ndarray
    phase: np.ndarray
    leakage: np.ndarray
    meas_qubit: int = 2

    def __post_init__(self):
        for arr in (self.p1_q2, self.p1_q2_sin):
            if np.any(arr < -1e-9) or np.any(arr > 1 + 1e-9):
                raise ValueError("populations outside [0, 1]")
        if not 0.0 <= self.fitted_contrast <= 1.0:
            raise ValueError("contrast outside [0, 1]")


@dataclass
class GateTimeResult:
    """Gate time extracted at one (drive frequency, amplitude) grid point."""

    omega_d: float                      # rad/s
    omega_amp: float                    # rad/s
    t_zzpi: float                       # total gate time (s); nan if diverged
    diverged: bool
    phase_times: np.ndarray = field(repr=False)   # total-time axis (s)
    phase_diff: np.ndarray = field(repr=False)    # conditional phase (rad)
    reason: str = ""

    def __post_init__(self):
        if not self.diverged and not self.t_zzpi > 0:
            raise ValueError("non-diverged result needs t_zzpi > 0")
        if self.diverged and not math.isnan(self.t_zzpi):
            raise ValueError("diverged result must not report a gate time")


@dataclass
class SpectroscopyMap:
    """Rabi amplitude spectroscopy: 1 - P(ground) over (frequency, amplitude)."""

    freqs: np.ndarray                   # rad/s
    amps: np.ndarray                    # rad/s
    signal: np.ndarray                  # shape (n_amp, n_freq)
    pulse_len: float


# ---------------------------------------------------------------------------
# Flat-top family: shared propagator pieces for duration sweeps
# ---------------------------------------------------------------------------

class _RamseyFamily:
    """Composable pieces for MAP Ramsey sequences at fixed drive settings.

    Gates are instantaneous logical-frame rotations fired at the center of
    their slots and conjugated into the working frame by the diagonal
    logical-to-frame map at the firing time; drive segments are flat-tops
    whose ramps are precomputed once.
    """

    def __init__(self, params: DeviceParams, omega_d, omega_amp, *,
                 port="q2", meas_qubit=2, rise_fall=RISE_FALL, tol=1e-8):
        if params.d2 < 4:
            raise ValueError(
                f"MAP protocols need at least 4 levels on transmon 2, got {params.d2}")
        self.params = params
        self.omega_d = omega_d
        self.omega_amp = omega_amp
        self.meas = meas_qubit
        self.control = 1 if meas_qubit == 2 else 2
        self.rise_fall = rise_fall
        self.logical = dressed_qubit_frequencies(params)
        probe = DrivePulse(duration=4 * rise_fall, amp=omega_amp, freq=omega_d,
                           port=port, rise_fall=rise_fall)
        (self.u_rise, self.u_fall, self._flat_eig, self._drift_eig,
         self.frame) = flat_top_pieces(params, probe, tol=tol)

    def _expi(self, eig, span):
        w, v = eig
        return (v * np.exp(-1j * w * span)) @ v.conj().T

    def drift(self, span):
        return self._expi(self._drift_eig, span)

    def drive(self, duration):
        """Flat-top propagator for one drive segment of total length duration."""
        if duration == 0.0:
            return np.eye(self.params.dim, dtype=complex)
        flat = duration - 2 * self.rise_fall
        if flat < -1e-15:
            raise ValueError(
                f"drive segment {duration / NS:.1f} ns shorter than the ramps")
        return self.u_fall @ self._expi(self._flat_eig, max(flat, 0.0)) @ self.u_rise

    def gate(self, rotations, t_abs):
        g = np.eye(self.params.dim, dtype=complex)
        for rot in rotations:
            g = rotation_unitary(self.params, rot) @ g
        d = frame_phase_unitary(self.params, self.frame, self.logical, t_abs)
        return d @ g @ d.conj().T

    def initial_state(self, init: int):
        n1, n2 = (init, 0) if self.control == 1 else (0, init)
        psi = np.zeros(self.params.dim, dtype=complex)
        psi[self.params.index(n1, n2)] = 1.0
        return psi

    def measured_p1_and_leak(self, psi):
        """Marginal P(meas qubit = 1) and total leakage out of the 2x2 box."""
        p = self.params
        prob = np.abs(psi) ** 2
        p1 = 0.0
        leak = 0.0
        for (n1, n2), pr in zip(p.labels(), prob):
            if n1 > 1 or n2 > 1:
                leak += pr
            elif (n1 if self.meas == 1 else n2) == 1:
                p1 += pr
        return float(p1), float(leak)

    # -- sequence assembly ---------------------------------------------------

    def direct(self, dt, init, analysis="x"):
        """X90 - MAP drive(dt) - analysis 90 on the measured qubit."""
        t = 0.0
        u = self.drift(0.5 * ROT_SLOT)
        u = self.gate([Rotation(self.meas, "x", math.pi / 2)],
                      t + 0.5 * ROT_SLOT) @ u
        u = self.drift(0.5 * ROT_SLOT) @ u
        t += ROT_SLOT
        u = self.drive(dt) @ u
        t += dt
        u = self.drift(0.5 * ROT_SLOT) @ u
        u = self.gate([Rotation(self.meas, analysis, math.pi / 2)],
                      t + 0.5 * ROT_SLOT) @ u
        u = self.drift(0.5 * ROT_SLOT) @ u
        return u @ self.initial_state(init)

    def refocused(self, dt, init, analysis="y"):
        """Echoed MAP sequence: drive halves split by X_pi on both transmons.

        X90(meas) - drive(dt/2) - XpiXpi - drive(dt/2) - analysis90(meas) -
        XpiXpi.  The echo slot in the middle is the only single-qubit time
        counted in the total gate duration convention (dt + one 40 ns slot).
        """
        both_pi = [Rotation(1, "x", math.pi), Rotation(2, "x", math.pi)]
        t = 0.0
        u = self.drift(0.5 * ROT_SLOT)
        u = self.gate([Rotation(self.meas, "x", math.pi / 2)],
                      0.5 * ROT_SLOT) @ u
        u = self.drift(0.5 * ROT_SLOT) @ u
        t += ROT_SLOT
        u = self.drive(0.5 * dt) @ u
        t += 0.5 * dt
        u = self.drift(0.5 * ROT_SLOT) @ u
        u = self.gate(both_pi, t + 0.5 * ROT_SLOT) @ u
        u = self.drift(0.5 * ROT_SLOT) @ u
        t += ROT_SLOT
        u = self.drive(0.5 * dt) @ u
        t += 0.5 * dt
        u = self.drift(0.5 * ROT_SLOT) @ u
        u = self.gate([Rotation(self.meas, analysis, math.pi / 2)],
                      t + 0.5 * ROT_SLOT) @ u
        u = self.drift(0.5 * ROT_SLOT) @ u
        t += ROT_SLOT
        u = self.drift(0.5 * ROT_SLOT) @ u
        u = self.gate(both_pi, t + 0.5 * ROT_SLOT) @ u
        u = self.drift(0.5 * ROT_SLOT) @ u
        return u @ self.initial_state(init)

    # -- fringe-rate predictions (seed fits, choose grids) --------------------

    def predicted_rates(self):
        """Per-branch fringe rates (rad/s) from the driven dressed energies.

        direct branch c: [E(c,1) - E(c,0)]_driven - [E(c,1) - E(c,0)]_static;
        refocused branch c: half the driven zeta, sign alternating with c.
        Raises LeakageRegionError when the operating point defeats state
        tracking.
        """
        driven = driven_dressed_energies(self.params, self.omega_d,
                                         self.omega_amp)
        energies, _, _ = static_dressed_states(self.params)
        if self.meas == 2:
            pairs = [((0, 1), (0, 0)), ((1, 1), (1, 0))]
        else:
            pairs = [((1, 0), (0, 0)), ((1, 1), (0, 1))]
        # driven energies live in the drive rotating frame; shift the static
        # differences by one drive quantum to compare like with like
        direct = [
            (driven.energies[a] - driven.energies[b])
            - (energies[a] - energies[b] - self.omega_d)
            for a, b in pairs]
        refocused = [+0.5 * driven.zeta, -0.5 * driven.zeta]
        return {"direct": direct, "refocused": refocused,
                "zeta": driven.zeta}


def _sample(p_arr, shots, rng):
    if shots is None:
        return p_arr
    if rng is None:
        raise ValueError("finite shots require an rng")
    clipped = np.clip(p_arr, 0.0, 1.0)
    return rng.binomial(int(shots), clipped) / float(shots)


def _fringe_record(family, kind, dt_grid, init, shots, rng,
                   freq_guess=None) -> FringeRecord:
    dt_grid = np.asarray(sorted(dt_grid), dtype=float)
    run = family.direct if kind == "direct" else family.refocused
    analysis = ("x", "y")
    y = {}
    leak = np.zeros_like(dt_grid)
    for ax in analysis:
        vals = np.empty_like(dt_grid)
        for i, dt in enumerate(dt_grid):
            psi = run(dt, init, analysis=ax)
            p1, lk = family.measured_p1_and_leak(psi)
            vals[i] = p1
            leak[i] = max(leak[i], lk)
        y[ax] = _sample(vals, shots, rng)
    y_cos, y_sin = y["x"], y["y"]
    # the qubit-space norm pins the fringe DC pointwise: the signal is
    # (1 - leak)/2 + A cos(phi) on one axis and (1 - leak)/2 - A sin(phi)
    # on the other, so no offset fit is needed (a mean-based estimate is
    # badly biased when the window covers under a fringe period)
    off = 0.5 * (1.0 - leak)
    phase = np.unwrap(np.arctan2(off - y_sin, y_cos - off))
    fit = fringes.fit_fringe(dt_grid, y_cos, freq_guess=freq_guess)
    if family.control == 1:
        label = f"{init}0"
    else:
        label = f"0{init}"
    return FringeRecord(sweep_variable=dt_grid, p1_q2=y_cos, init_label=label,
                        fitted_phase=fit.phase, fitted_contrast=fit.contrast,
                        fit_residual=fit.residual_rms, fit=fit,
                        p1_q2_sin=y_sin, phase=phase, leakage=leak,
                        meas_qubit=family.meas)


# ---------------------------------------------------------------------------
# Public protocol entry points
# ---------------------------------------------------------------------------

def ramsey_map_direct(params: DeviceParams, omega_d, omega_amp, dt_grid,
                      init=0, *, port="q2", meas_qubit=2, shots=None,
                      rng=None, rise_fall=RISE_FALL, tol=1e-8) -> FringeRecord:
    """Direct MAP Ramsey: fringe of the measured qubit vs drive duration.

    The fringe frequency for each control state is the drive-induced Stark
    shift of the measured qubit; the difference between the two init choices
    accumulates the conditional phase at rate zeta.
    """
    family = _RamseyFamily(params, omega_d, omega_amp, port=port,
                           meas_qubit=meas_qubit, rise_fall=rise_fall, tol=tol)
    try:
        guess = abs(family.predicted_rates()["direct"][init])
    except LeakageRegionError:
        guess = None
    return _fringe_record(family, "direct", dt_grid, init, shots, rng,
                          freq_guess=guess)


def ramsey_map_refocused(params: DeviceParams, omega_d, omega_amp, dt_grid,
                         init=0, *, port="q2", meas_qubit=2, shots=None,
                         rng=None, rise_fall=RISE_FALL, tol=1e-8) -> FringeRecord:
    """Echoed MAP Ramsey: single-qubit Stark phases cancel, ZZ survives.

    dt is the summed MAP drive time (two segments of dt/2); every dt must be
    at least 4 ramp times.  The paper wiring drives through the control
    qubit's port; an uncoupled drive line on transmon 1 cannot reproduce the
    observed activation strength, so the shipped calibration addresses the
    measured transmon's port (see README).
    """
    family = _RamseyFamily(params, omega_d, omega_amp, port=port,
                           meas_qubit=meas_qubit, rise_fall=rise_fall, tol=tol)
    try:
        guess = abs(family.predicted_rates()["refocused"][init])
    except LeakageRegionError:
        guess = None
    return _fringe_record(family, "refocused", dt_grid, init, shots, rng,
                          freq_guess=guess)


def conditional_phase_pair(params: DeviceParams, omega_d, omega_amp, dt_grid,
                           *, kind="refocused", port="q2", meas_qubit=2,
                           shots=None, rng=None, rise_fall=RISE_FALL,
                           tol=1e-8):
    """Both init branches plus the pointwise conditional-phase curve.

    Returns (record_ground, record_excited, phase_diff) with
    phase_diff = phase(control excited) - phase(control ground).
    """
    common = dict(port=port, meas_qubit=meas_qubit, shots=shots, rng=rng,
                  rise_fall=rise_fall, tol=tol)
    fn = ramsey_map_refocused if kind == "refocused" else ramsey_map_direct
    rec0 = fn(params, omega_d, omega_amp, dt_grid, init=0, **common)
    rec1 = fn(params, omega_d, omega_amp, dt_grid, init=1, **common)
    return rec0, rec1, fringes.conditional_phase_curve(rec1.phase, rec0.phase)


# ---------------------------------------------------------------------------
# Gate-time sweep
# ---------------------------------------------------------------------------

def _default_dt_grid(rate, horizon, n_points, min_dt, branch_rate):
    """Duration grid reaching past the expected pi crossing, Nyquist-safe."""
    if rate > 0:
        target = min(1.3 * math.pi / rate, horizon)
    else:
        target = horizon
    target = max(target, min_dt * (n_points + 1))
    step = (target - min_dt) / (n_points - 1)
    # keep per-branch fringe sampling unwrappable with margin
    if branch_rate > 0:
        step = min(step, 2.2 / branch_rate)
    n = max(n_points, int(math.ceil((target - min_dt) / step)) + 1)
    return np.linspace(min_dt, min_dt + step * (n - 1), n)


def sweep_gate_time(params: DeviceParams, omega_d_grid, omega_amp_grid, *,
                    kind="refocused", port="q2", horizon=DEFAULT_HORIZON,
                    n_points=33, leak_threshold=LEAK_THRESHOLD, shots=None,
                    rng=None, rise_fall=RISE_FALL, tol=1e-8):
    """[ZZ]pi gate time over a (drive frequency, amplitude) grid.

    Per grid point the conditional-phase curve is extracted from quadrature
    Ramsey fringes and the first |phase| = pi crossing is interpolated;
    the total-time convention adds one 40 ns refocusing slot for the echoed
    protocol.  A point is flagged diverged when dressed-state tracking fails
    at the operating point, when fringe leakage exceeds ``leak_threshold``,
    or when no crossing occurs within ``horizon`` of drive time.

    Returns a list of GateTimeResult, outer loop over amplitude, inner over
    frequency (row-major in the exported CSV).
    """
    results = []
    overhead = ROT_SLOT if kind == "refocused" else 0.0
    min_dt = (4 if kind == "refocused" else 2) * rise_fall
    for amp in omega_amp_grid:
        for omega_d in omega_d_grid:
            results.append(_gate_time_point(
                params, omega_d, amp, kind, port, horizon, n_points, min_dt,
                overhead, leak_threshold, shots, rng, rise_fall, tol))
    return results


def _gate_time_point(params, omega_d, amp, kind, port, horizon, n_points,
                     min_dt, overhead, leak_threshold, shots, rng, rise_fall,
                     tol):
    empty = np.array([])
    try:
        family = _RamseyFamily(params, omega_d, amp, port=port,
                               rise_fall=rise_fall, tol=tol)
        rates = family.predicted_rates()
    except LeakageRegionError as exc:
        return GateTimeResult(omega_d=omega_d, omega_amp=amp,
                              t_zzpi=math.nan, diverged=True,
                              phase_times=empty, phase_diff=empty,
                              reason=f"state tracking failed: {exc}")
    cond_rate = abs(rates["zeta"])
    branch = max(abs(r) for r in rates[kind])
    dt_grid = _default_dt_grid(cond_rate, horizon, n_points, min_dt, branch)
    dt_grid = dt_grid[dt_grid <= horizon + 1e-12]
    recs = [_fringe_record(family, kind, dt_grid, init, shots, rng,
                           freq_guess=abs(rates[kind][init]))
            for init in (0, 1)]
    phase_diff = fringes.conditional_phase_curve(recs[1].phase, recs[0].phase)
    total_times = dt_grid + overhead
    leak = np.maximum(recs[0].leakage, recs[1].leakage)
    if leak.max() > leak_threshold:
        return GateTimeResult(omega_d=omega_d, omega_amp=amp, t_zzpi=math.nan,
                              diverged=True, phase_times=total_times,
                              phase_diff=phase_diff,
                              reason=f"leakage {leak.max():.3f} above "
                                     f"{leak_threshold}")
    crossing = fringes.first_pi_crossing(dt_grid, phase_diff)
    if crossing is None:
        return GateTimeResult(omega_d=omega_d, omega_amp=amp, t_zzpi=math.nan,
                              diverged=True, phase_times=total_times,
                              phase_diff=phase_diff,
                              reason="no pi crossing within horizon")
    return GateTimeResult(omega_d=omega_d, omega_amp=amp,
                          t_zzpi=crossing + overhead, diverged=False,
                          phase_times=total_times, phase_diff=phase_diff)


# ---------------------------------------------------------------------------
# MAP gate assembly
# ---------------------------------------------------------------------------

def flat_top_family(params: DeviceParams, omega_d, omega_amp, *, port="q2",
                    meas_qubit=2, rise_fall=RISE_FALL, tol=1e-8):
    """Reusable pulse family for gate assembly at fixed drive settings."""
    return _RamseyFamily(params, omega_d, omega_amp, port=port,
                         meas_qubit=meas_qubit, rise_fall=rise_fall, tol=tol)


def gate_unitary(family, dt, *, echoed=True):
    """Working-frame propagator of the MAP gate alone, starting at t = 0.

    Echoed: drive(dt/2) - simultaneous X_pi on both transmons in one 40 ns
    slot - drive(dt/2), total dt + 40 ns.  Direct: a single flat-top of
    length dt.  No preparation or analysis pulses; pair with
    ``frame_phase_unitary`` at the total time to read the result in the
    logical frame.
    """
    if not echoed:
        return family.drive(dt)
    both_pi = [Rotation(1, "x", math.pi), Rotation(2, "x", math.pi)]
    u = family.drive(0.5 * dt)
    u = family.drift(0.5 * ROT_SLOT) @ u
    u = family.gate(both_pi, 0.5 * dt + 0.5 * ROT_SLOT) @ u
    u = family.drift(0.5 * ROT_SLOT) @ u
    u = family.drive(0.5 * dt) @ u
    return u


def gate_total_time(dt, *, echoed=True):
    return dt + (ROT_SLOT if echoed else 0.0)


def gate_logical_block(family, u, total_time):
    """Computational 4x4 block of a working-frame propagator, read in the
    logical (dressed f01) frame at the given absolute time."""
    d = frame_phase_unitary(family.params, family.frame, family.logical,
                            total_time)
    comp = [family.params.index(a, b) for a in (0, 1) for b in (0, 1)]
    return (d @ u)[np.ix_(comp, comp)]


def gate_pulse_sequence(omega_d, omega_amp, dt, *, echoed=True, port="q2",
                        rise_fall=RISE_FALL) -> PulseSequence:
    """The same gate as ``gate_unitary`` expressed as a PulseSequence.

    For density-matrix propagation; the two echo rotations are zero-duration
    kicks co-fired at the center of a shared 40 ns slot, which matches the
    unitary assembly exactly.
    """
    if not echoed:
        return PulseSequence([DrivePulse(duration=dt, amp=omega_amp,
                                         freq=omega_d, port=port,
                                         rise_fall=rise_fall)],
                             label="map-direct")
    half = dict(amp=omega_amp, freq=omega_d, port=port, rise_fall=rise_fall)
    return PulseSequence([
        DrivePulse(duration=0.5 * dt, **half),
        Idle(0.5 * ROT_SLOT),
        Rotation(1, "x", math.pi, duration=0.0),
        Rotation(2, "x", math.pi, duration=0.0),
        Idle(0.5 * ROT_SLOT),
        DrivePulse(duration=0.5 * dt, **half),
    ], label="map-refocused")


def gate_conditional_phase(u, params: DeviceParams, *, echoed=True) -> float:
    """Frame- and gauge-invariant conditional phase of a gate propagator.

    Single-qubit phases (drive Stark shifts, rotating-frame bookkeeping)
    drop out of the quoted combination, so the value needs no frame
    correction.  The echoed gate population sits on the anti-diagonal of the
    computational block, the direct gate on the diagonal.
    """
    comp = [params.index(a, b) for a in (0, 1) for b in (0, 1)]
    b = u[np.ix_(comp, comp)]
    if echoed:
        val = b[3, 0] * b[0, 3] * np.conj(b[1, 2] * b[2, 1])
    else:
        val = b[0, 0] * b[3, 3] * np.conj(b[1, 1] * b[2, 2])
    return float(np.angle(val))


def gate_leakage(u, params: DeviceParams) -> float:
    """Worst-case population left outside the 2x2 box over the four
    computational inputs."""
    comp = [params.index(a, b) for a in (0, 1) for b in (0, 1)]
    block = u[np.ix_(comp, comp)]
    kept = np.sum(np.abs(block) ** 2, axis=0)
    return float(np.max(1.0 - kept))


def gate_pi_crossing(family, dt_grid, *, echoed=True):
    """First |conditional phase| = pi crossing of the bare gate vs duration.

    Returns (dt_star, dt_grid, unwrapped phase) with dt_star = None when the
    curve never reaches pi on the grid.  The unwrap is re-anchored to the
    principal branch at the first point so the crossing search is
    insensitive to where the grid starts.
    """
    dt_grid = np.asarray(dt_grid, dtype=float)
    ph = np.empty_like(dt_grid)
    for i, dt in enumerate(dt_grid):
        ph[i] = gate_conditional_phase(gate_unitary(family, dt, echoed=echoed),
                                       family.params, echoed=echoed)
    ph = np.unwrap(ph)
    ph -= 2 * math.pi * round(ph[0] / (2 * math.pi))
    hit = np.nonzero(np.abs(ph) >= math.pi)[0]
    if hit.size == 0 or hit[0] == 0:
        return None, dt_grid, ph
    k = hit[0]
    target = math.copysign(math.pi, ph[k])
    frac = (target - ph[k - 1]) / (ph[k] - ph[k - 1])
    return float(dt_grid[k - 1] + frac * (dt_grid[k] - dt_grid[k - 1])), \
        dt_grid, ph


# ---------------------------------------------------------------------------
# Rabi amplitude spectroscopy
# ---------------------------------------------------------------------------

def rabi_spectroscopy(params: DeviceParams, freq_grid, amp_grid, pulse_len, *,
                      port="both", rise_fall=RISE_FALL, tol=1e-8,
                      shots=None, rng=None) -> SpectroscopyMap:
    """Depletion map 1 - P(|00>) after a flat-top pulse per (freq, amp).

    Heuristic precondition (warned, not enforced): the pulse should cover at
    least five Rabi periods of the slowest feature of interest,
    pulse_len >= 5 * 2pi / min(amp_grid), or weak lines stay unresolved.
    """
    freq_grid = np.asarray(sorted(freq_grid), dtype=float)
    amp_grid = np.asarray(sorted(amp_grid), dtype=float)
    if freq_grid.size == 0 or amp_grid.size == 0:
        raise ValueError("empty grid")
    slow = 5 * 2 * math.pi / amp_grid.min()
    if pulse_len < slow:
        warnings.warn(
            f"pulse of {pulse_len / NS:.0f} ns is under 5 Rabi periods of the "
            f"weakest amplitude ({slow / NS:.0f} ns); faint lines may be "
            "washed out", stacklevel=2)
    psi0 = np.zeros(params.dim, dtype=complex)
    psi0[params.index(0, 0)] = 1.0
    i00 = params.index(0, 0)
    signal = np.empty((amp_grid.size, freq_grid.size))
    for j, freq in enumerate(freq_grid):
        for i, amp in enumerate(amp_grid):
            pulse = DrivePulse(duration=pulse_len, amp=amp, freq=freq,
                               port=port, rise_fall=rise_fall)
            u_rise, u_fall, flat_eig, _, _ = flat_top_pieces(params, pulse,
                                                             tol=tol)
            w, v = flat_eig
            u_flat = (v * np.exp(-1j * w * (pulse_len - 2 * rise_fall))) @ v.conj().T
            psi = u_fall @ (u_flat @ (u_rise @ psi0))
            signal[i, j] = 1.0 - abs(psi[i00]) ** 2
    signal = _sample(signal, shots, rng)
    return SpectroscopyMap(freqs=freq_grid, amps=amp_grid, signal=signal,
                           pulse_len=pulse_len)


def extract_transition_lines(spec_map: SpectroscopyMap, params: DeviceParams,
                             *, min_contrast=0.08, window=8.0 * MHZ):
    """Fitted multi-photon line positions f_0n / n per transmon.

    Searches the depletion map near the Duffing-ladder predictions
    (dressed energies over n photons) and refines each peak with a local
    parabolic interpolation at the weakest amplitude row that resolves it.
    Returns {(qubit, "f01"|"f02/2"|"f03/3"): frequency rad/s}, omitting
    lines outside the scanned range or below ``min_contrast``.
    """
    energies, _, _ = static_dressed_states(params)
    e00 = energies[(0, 0)]
    lines = {}
    for qubit, dmax in ((1, params.d1), (2, params.d2)):
        for n in range(1, min(dmax, 4)):
            label = "f01" if n == 1 else f"f0{n}/{n}"
            target = (n, 0) if qubit == 1 else (0, n)
            guess = (energies[target] - e00) / n
            if not (spec_map.freqs.min() <= guess <= spec_map.freqs.max()):
                continue
            sel = np.abs(spec_map.freqs - guess) <= window
            if sel.sum() < 3:
                continue
            fitted = None
            for row in spec_map.signal:  # weakest drive first
                seg = row[sel]
                k = int(np.argmax(seg))
                if seg[k] < min_contrast:
                    continue
                fsel = spec_map.freqs[sel]
                if 0 < k < seg.size - 1:
                    # parabolic vertex through the three points around the max
                    y0, y1, y2 = seg[k - 1], seg[k], seg[k + 1]
                    denom = y0 - 2 * y1 + y2
                    shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
                    fitted = fsel[k] + shift * (fsel[1] - fsel[0])
                else:
                    fitted = fsel[k]
                break
            if fitted is not None:
                lines[(qubit, label)] = float(fitted)
    return lines
