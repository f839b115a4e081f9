"""Time evolution: rotating frames, pulse sequences, propagators.

The canonical working frame rotates both transmons at the drive frequency,
which makes the driven Hamiltonian time-independent under the rotating-wave
approximation (RWA) for flat envelopes.  Instantaneous single-qubit gates are
defined in the logical frames (each transmon co-rotating at its dressed 0->1
frequency) and are conjugated into the working frame by diagonal phase
unitaries, which is exact.  A lab-frame stepper without the RWA is retained
as a cross-check.

Time-dependent stretches (envelope ramps, off-frame drives) are integrated
with a 4th-order commutator-free scheme whose factors are plain matrix
exponentials, so the same compiled kernel serves all paths; accuracy is
controlled by step doubling against ``tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .backend import propagate_chain
from .errors import LeakageRegionError, ToleranceError
from .model import (
    MHZ,
    DeviceParams,
    OperatorMatrix,
    build_static_hamiltonian,
    dressed_qubit_frequencies,
    drive_quadratures,
    lowering_operator,
    number_operator,
)

# Gauss nodes and weights of the 4th-order commutator-free integrator.
_CF4_N1 = 0.5 - math.sqrt(3.0) / 6.0
_CF4_N2 = 0.5 + math.sqrt(3.0) / 6.0
_CF4_W1 = (3.0 - 2.0 * math.sqrt(3.0)) / 12.0
_CF4_W2 = (3.0 + 2.0 * math.sqrt(3.0)) / 12.0

DEFAULT_TOL = 1e-8
MAX_DOUBLINGS = 16


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RotatingFrame:
    """Frame rotating transmon k at nu_k (rad/s); (0, 0) is the lab frame."""

    nu1: float
    nu2: float

    @classmethod
    def drive(cls, omega_d: float) -> "RotatingFrame":
        """Both transmons co-rotating at the drive frequency."""
        return cls(omega_d, omega_d)

    @classmethod
    def lab(cls) -> "RotatingFrame":
        return cls(0.0, 0.0)

    @property
    def uniform(self) -> bool:
        return self.nu1 == self.nu2


def to_rotating_frame(params: DeviceParams, frame: RotatingFrame,
                      drive_freq: float | None = None):
    """Static Hamiltonian in ``frame`` plus a residual time-dependence report.

    Returns
    -------
    h_rot : OperatorMatrix
        H_static - nu1*n1 - nu2*n2.  Time-independent only when the residual
        list contains no finite-frequency entries.
    residuals : list of dict
        Each entry names a term that still oscillates in this frame and its
        angular frequency: the exchange term when nu1 != nu2, the co-rotating
        drive term at drive_freq - nu_port, and the counter-rotating drive
        term at drive_freq + nu_port (dropped under the RWA).
    """
    h = build_static_hamiltonian(params).entries.copy()
    h -= frame.nu1 * number_operator(params, 1)
    h -= frame.nu2 * number_operator(params, 2)
    residuals = []
    if params.j != 0.0 and frame.nu1 != frame.nu2:
        residuals.append({"term": "exchange", "freq": frame.nu1 - frame.nu2})
    if drive_freq is not None:
        for k, nu in ((1, frame.nu1), (2, frame.nu2)):
            if drive_freq != nu:
                residuals.append({"term": f"drive(q{k})", "freq": drive_freq - nu})
            residuals.append({"term": f"counter-rotating drive(q{k})",
                              "freq": drive_freq + nu, "dropped_by_rwa": True})
    op = OperatorMatrix(entries=h, dims=(params.d1, params.d2),
                        basis_tag=params.basis_tag(), name="H_rot")
    return op, residuals


def frame_phase_unitary(params: DeviceParams, frame: RotatingFrame,
                        logical: tuple, t: float) -> np.ndarray:
    """Diagonal map D(t) taking logical-frame gates into the working frame.

    A gate G calibrated in the logical frames (transmon k rotating at its
    dressed frequency logical[k]) applied at absolute time t acts in the
    working frame as D(t) G D(t)^dag with
    D(t) = exp(i t [(nu1 - w1) n1 + (nu2 - w2) n2]).
    """
    w1, w2 = logical
    phases = np.array([(frame.nu1 - w1) * n1 + (frame.nu2 - w2) * n2
                       for n1, n2 in params.labels()])
    return np.diag(np.exp(1j * t * phases))


# ---------------------------------------------------------------------------
# Pulse sequences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DrivePulse:
    """Flat-top microwave pulse with raised-cosine ramps.

    amp is the peak Rabi amplitude Omega (rad/s): the 0<->1 Rabi rate a
    resonant drive of this strength produces on the driven transmon.
    """

    duration: float
    amp: float
    freq: float
    phase: float = 0.0
    port: str = "q2"
    rise_fall: float = 10e-9

    def __post_init__(self):
        if self.duration < 2.0 * self.rise_fall:
            raise ValueError(
                f"pulse of {self.duration * 1e9:.1f} ns cannot fit two "
                f"{self.rise_fall * 1e9:.1f} ns ramps")

    def envelope(self, tau):
        """Dimensionless envelope at time tau from pulse start, in [0, 1]."""
        tau = np.asarray(tau, dtype=float)
        r = self.rise_fall
        up = np.where(tau < r, 0.5 * (1.0 - np.cos(np.pi * np.clip(tau, 0, r) / r)), 1.0) \
            if r > 0 else np.ones_like(tau)
        tail = self.duration - tau
        down = np.where(tail < r, 0.5 * (1.0 - np.cos(np.pi * np.clip(tail, 0, r) / r)), 1.0) \
            if r > 0 else np.ones_like(tau)
        inside = (tau >= 0) & (tau <= self.duration)
        return np.where(inside, up * down, 0.0)


@dataclass(frozen=True)
class Rotation:
    """Single-qubit rotation with a timing footprint.

    By default it is applied as an ideal instantaneous unitary at the center
    of its footprint (free evolution fills the rest); in pulse mode it becomes
    a resonant flat-top drive on the target transmon.
    """

    which: int
    axis: str
    angle: float
    duration: float = 40e-9

    def __post_init__(self):
        if self.which not in (1, 2):
            raise ValueError(f"rotation target must be 1 or 2, got {self.which}")
        if self.axis not in ("x", "y"):
            raise ValueError(f"rotation axis must be 'x' or 'y', got {self.axis!r}")
        if self.duration < 0:
            raise ValueError("rotation duration cannot be negative")


@dataclass(frozen=True)
class Idle:
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("idle duration cannot be negative")


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def __iter__(self):
        return iter(self.segments)


def rotation_unitary(params: DeviceParams, rot: Rotation) -> np.ndarray:
    """Ideal rotation embedded in the two lowest levels of the target transmon."""
    half = 0.5 * rot.angle
    if rot.axis == "x":
        block = np.array([[math.cos(half), -1j * math.sin(half)],
                          [-1j * math.sin(half), math.cos(half)]])
    else:
        block = np.array([[math.cos(half), -math.sin(half)],
                          [math.sin(half), math.cos(half)]])
    d = params.d1 if rot.which == 1 else params.d2
    g = np.eye(d, dtype=complex)
    g[:2, :2] = block
    if rot.which == 1:
        return np.kron(g, np.eye(params.d2, dtype=complex))
    return np.kron(np.eye(params.d1, dtype=complex), g)


def computational_indices(params: DeviceParams):
    """Product-basis indices of |00>, |01>, |10>, |11> in that order."""
    return [params.index(0, 0), params.index(0, 1),
            params.index(1, 0), params.index(1, 1)]


def computational_populations(params: DeviceParams, state: np.ndarray):
    """(P00, P01, P10, P11, leak_total) from a ket or a density matrix."""
    if state.ndim == 1:
        probs = np.abs(state) ** 2
    else:
        probs = np.real(np.diag(state))
    idx = computational_indices(params)
    p = [float(probs[i]) for i in idx]
    return (*p, float(probs.sum() - sum(p)))


# ---------------------------------------------------------------------------
# Closed-system propagation
# ---------------------------------------------------------------------------

@dataclass
class PropagationResult:
    """Propagator over a pulse sequence plus optional sampled populations."""

    u: np.ndarray | None
    superop: np.ndarray | None
    frame: RotatingFrame
    total_time: float
    times: np.ndarray | None = None
    populations: np.ndarray | None = None  # columns P00 P01 P10 P11 leak
    final_state: np.ndarray | None = None
    step_counts: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def unitarity_defect(self) -> float:
        if self.u is None:
            raise ValueError("no unitary propagator in this result")
        n = self.u.shape[0]
        return float(np.abs(self.u.conj().T @ self.u - np.eye(n)).max())


def _cf4_entries(coeff, edges):
    """CF4 chain entries ((x, y, dt) pairs, two per interval) for a stretch.

    coeff(t) must return the instantaneous (x, y) drive coefficients.
    """
    xs, ys, dts = [], [], []
    for a, b in zip(edges[:-1], edges[1:]):
        dt = b - a
        x1, y1 = coeff(a + _CF4_N1 * dt)
        x2, y2 = coeff(a + _CF4_N2 * dt)
        # Each factor integrates over dt/2 with reweighted coefficients; the
        # earlier-node-heavy factor acts first.
        xs.append(2.0 * (_CF4_W2 * x1 + _CF4_W1 * x2))
        ys.append(2.0 * (_CF4_W2 * y1 + _CF4_W1 * y2))
        dts.append(0.5 * dt)
        xs.append(2.0 * (_CF4_W1 * x1 + _CF4_W2 * x2))
        ys.append(2.0 * (_CF4_W1 * y1 + _CF4_W2 * y2))
        dts.append(0.5 * dt)
    return np.array(xs), np.array(ys), np.array(dts)


def _edges(t0, t1, n, extra=()):
    edges = np.linspace(t0, t1, n + 1)
    if len(extra):
        edges = np.unique(np.concatenate([edges, np.asarray(extra)]))
    return edges


class _StretchPlan:
    """One integrable piece of a sequence: drift, driven stretch, or gate."""

    def __init__(self, t0, t1, coeff=None, n0=8, gate=None, ops=None, exact=False):
        self.t0 = t0
        self.t1 = t1
        self.coeff = coeff      # None for drift-only (constant) evolution
        self.n0 = n0
        self.gate = gate        # instantaneous unitary applied at t0 == t1
        self.ops = ops          # (vx, vy) drive quadratures for this stretch
        self.exact = exact      # constant coefficients: no step doubling needed

    @property
    def span(self):
        return self.t1 - self.t0


def _plan_sequence(params, seq, frame, logical, rotation_mode, rise_fall_rot=0.25):
    """Expand a PulseSequence into stretch plans in the working frame."""
    plans = []
    t = 0.0
    for seg in seq:
        if isinstance(seg, Idle):
            plans.append(_StretchPlan(t, t + seg.duration))
            t += seg.duration
        elif isinstance(seg, Rotation):
            if rotation_mode == "ideal":
                if seg.duration > 0:
                    plans.append(_StretchPlan(t, t + 0.5 * seg.duration))
                tm = t + 0.5 * seg.duration
                d = frame_phase_unitary(params, frame, logical, tm)
                g = d @ rotation_unitary(params, seg) @ d.conj().T
                plans.append(_StretchPlan(tm, tm, gate=g))
                if seg.duration > 0:
                    plans.append(_StretchPlan(tm, t + seg.duration))
            elif rotation_mode == "pulse":
                if seg.duration <= 0:
                    raise ValueError("pulse-mode rotations need a finite duration")
                r = rise_fall_rot * seg.duration
                amp = seg.angle / (seg.duration - r)
                pulse = DrivePulse(duration=seg.duration, amp=amp,
                                   freq=logical[seg.which - 1],
                                   phase=0.0 if seg.axis == "x" else -0.5 * math.pi,
                                   port=f"q{seg.which}", rise_fall=r)
                plans.extend(_pulse_plans(params, pulse, t, frame))
                t += seg.duration
                continue
            else:
                raise ValueError(f"unknown rotation_mode {rotation_mode!r}")
            t += seg.duration
        elif isinstance(seg, DrivePulse):
            plans.extend(_pulse_plans(params, seg, t, frame))
            t += seg.duration
        else:
            raise TypeError(f"unknown segment type {type(seg).__name__}")
    return plans, t


def _pulse_plans(params, pulse, t0, frame):
    """Rise / flat / fall stretches for one drive pulse."""
    if not frame.uniform:
        raise ValueError("drive propagation requires a uniform rotating frame")
    rho = pulse.freq - frame.nu1  # residual drive rotation in this frame
    vx, vy = drive_quadratures(params, pulse.port)

    def coeff(t_abs):
        tau = t_abs - t0
        env = float(pulse.envelope(tau))
        theta = rho * t_abs + pulse.phase
        return (pulse.amp * env * math.cos(theta),
                pulse.amp * env * math.sin(theta))

    r = pulse.rise_fall
    # Base step counts: resolve the ramp shape and any residual rotation.
    per_ramp = 8 if r > 0 else 0
    res_steps = lambda span: int(math.ceil(abs(rho) * span / (2.0 * math.pi) * 8))
    plans = []
    if r > 0:
        plans.append(_StretchPlan(t0, t0 + r, coeff,
                                  n0=max(per_ramp, res_steps(r), 4), ops=(vx, vy)))
    flat0, flat1 = t0 + r, t0 + pulse.duration - r
    if flat1 > flat0:
        if rho == 0.0:
            # Constant coefficients: a single exact exponential step.
            plans.append(_StretchPlan(flat0, flat1, coeff, n0=1, ops=(vx, vy),
                                      exact=True))
        else:
            plans.append(_StretchPlan(flat0, flat1, coeff,
                                      n0=max(res_steps(flat1 - flat0), 8), ops=(vx, vy)))
    if r > 0:
        plans.append(_StretchPlan(t0 + pulse.duration - r, t0 + pulse.duration, coeff,
                                  n0=max(per_ramp, res_steps(r), 4), ops=(vx, vy)))
    return plans


def _drift_eig(h_rot):
    w, v = np.linalg.eigh(h_rot)
    return w, v


def _drift_unitary(eig, span):
    w, v = eig
    return (v * np.exp(-1j * w * span)) @ v.conj().T


def _stretch_unitary(h_rot, plan, tol):
    """Propagator for one driven stretch, step-doubled to ``tol``."""
    vx, vy = plan.ops
    if plan.exact:
        xm, ym = plan.coeff(0.5 * (plan.t0 + plan.t1))
        u = propagate_chain(h_rot, vx, vy, [xm], [ym], [plan.span])
        return u, 1
    n = plan.n0
    u_prev = None
    for _ in range(MAX_DOUBLINGS + 1):
        x, y, dt = _cf4_entries(plan.coeff, _edges(plan.t0, plan.t1, n))
        u = propagate_chain(h_rot, vx, vy, x, y, dt)
        if u_prev is not None and float(np.abs(u - u_prev).max()) <= tol:
            return u, n
        u_prev = u
        n *= 2
    raise ToleranceError(
        f"stretch [{plan.t0 * 1e9:.2f}, {plan.t1 * 1e9:.2f}] ns did not reach "
        f"tol={tol:g} within {MAX_DOUBLINGS} step doublings (n={n // 2})")


def _split_plan(plan, cuts):
    """Split a stretch plan at interior absolute times."""
    cuts = [c for c in sorted(cuts) if plan.t0 < c < plan.t1]
    if not cuts:
        return [plan]
    edges = [plan.t0, *cuts, plan.t1]
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        frac = max((b - a) / plan.span, 1e-12)
        sub = _StretchPlan(a, b, plan.coeff,
                           n0=max(2, int(math.ceil(plan.n0 * frac))),
                           ops=plan.ops, exact=plan.exact)
        out.append(sub)
    return out


def _default_frame(seq, logical):
    for seg in seq:
        if isinstance(seg, DrivePulse):
            return RotatingFrame.drive(seg.freq)
    return RotatingFrame.drive(0.5 * (logical[0] + logical[1]))


def propagate_unitary(params: DeviceParams, seq: PulseSequence,
                      frame: RotatingFrame | None = None, *,
                      tol: float = DEFAULT_TOL,
                      rotation_mode: str = "ideal",
                      logical: tuple | None = None,
                      initial_state: np.ndarray | None = None,
                      record_times=None) -> PropagationResult:
    """Closed-system propagator over a pulse sequence.

    Parameters
    ----------
    frame : RotatingFrame, optional
        Working frame; must rotate both transmons at the same rate.  Defaults
        to the frame of the first drive pulse.
    tol : float
        Step-doubling acceptance threshold (max-norm difference between
        successive refinements) for time-dependent stretches.
    rotation_mode : "ideal" or "pulse"
        Instantaneous logical-frame rotations vs finite resonant pulses.
    initial_state, record_times :
        When both are given, computational populations are sampled at the
        requested absolute times (a snapshot at a gate instant is taken
        before the gate fires).

    Returns
    -------
    PropagationResult with the working-frame propagator ``u``.
    """
    logical = dressed_qubit_frequencies(params) if logical is None else logical
    frame = _default_frame(seq, logical) if frame is None else frame
    if not frame.uniform:
        raise ValueError("propagate_unitary requires a uniform rotating frame")
    h_rot = to_rotating_frame(params, frame)[0].entries
    eig = _drift_eig(h_rot)
    plans, total = _plan_sequence(params, seq, frame, logical, rotation_mode)

    recording = record_times is not None
    if recording:
        if initial_state is None:
            raise ValueError("record_times requires an initial_state")
        rec = np.sort(np.asarray(record_times, dtype=float))
        if len(rec) and (rec[0] < -1e-15 or rec[-1] > total * (1 + 1e-12) + 1e-15):
            raise ValueError(f"record times outside [0, {total}]")
        expanded = []
        for plan in plans:
            if plan.gate is None and plan.span > 0:
                expanded.extend(_split_plan(plan, rec))
            else:
                expanded.append(plan)
        plans = expanded

    dim = params.dim
    u = np.eye(dim, dtype=complex)
    counts = {"stretches": 0, "exponentials": 0}
    times_out, pops_out = [], []

    def _snapshot(t_now):
        psi = u @ initial_state
        times_out.append(t_now)
        pops_out.append(computational_populations(params, psi))

    next_rec = 0
    if recording:
        while next_rec < len(rec) and rec[next_rec] <= 1e-15:
            _snapshot(0.0)
            next_rec += 1

    for plan in plans:
        if plan.gate is not None:
            u = plan.gate @ u
            continue
        if plan.span <= 0:
            continue
        if plan.coeff is None:
            u = _drift_unitary(eig, plan.span) @ u
            counts["exponentials"] += 1
        else:
            us, n = _stretch_unitary(h_rot, plan, tol)
            u = us @ u
            counts["stretches"] += 1
            counts["exponentials"] += 2 * n
        if recording:
            while next_rec < len(rec) and rec[next_rec] <= plan.t1 + 1e-15:
                _snapshot(rec[next_rec])
                next_rec += 1

    result = PropagationResult(
        u=u, superop=None, frame=frame, total_time=total,
        times=np.array(times_out) if recording else None,
        populations=np.array(pops_out) if recording else None,
        final_state=(u @ initial_state) if initial_state is not None else None,
        step_counts=counts)
    return result


def flat_top_pieces(params: DeviceParams, pulse: DrivePulse, *,
                    tol: float = DEFAULT_TOL):
    """Reusable pieces of a frame-resonant flat-top pulse.

    Returns (u_rise, u_fall, flat_eig, drift_eig, frame): the ramp
    propagators, the eigensystem of the constant flat-stretch Hamiltonian and
    of the undriven frame Hamiltonian.  Because the working frame co-rotates
    at the pulse frequency, the pieces do not depend on where the pulse sits
    in time, so tune-up sweeps can compose propagators for many durations
    from one set of pieces.
    """
    frame = RotatingFrame.drive(pulse.freq)
    h_rot = to_rotating_frame(params, frame)[0].entries
    vx, vy = drive_quadratures(params, pulse.port)
    r = pulse.rise_fall
    if r > 0:
        ramps = DrivePulse(duration=2 * r, amp=pulse.amp, freq=pulse.freq,
                           phase=pulse.phase, port=pulse.port, rise_fall=r)
        rise_plan, fall_plan = _pulse_plans(params, ramps, 0.0, frame)
        u_rise, _ = _stretch_unitary(h_rot, rise_plan, tol)
        u_fall, _ = _stretch_unitary(h_rot, fall_plan, tol)
    else:
        u_rise = u_fall = np.eye(params.dim, dtype=complex)
    h_flat = h_rot + pulse.amp * (math.cos(pulse.phase) * vx
                                  + math.sin(pulse.phase) * vy)
    return u_rise, u_fall, _drift_eig(h_flat), _drift_eig(h_rot), frame


# ---------------------------------------------------------------------------
# Open-system propagation
# ---------------------------------------------------------------------------

def collapse_operators(params: DeviceParams):
    """Multi-level collapse operators from the device T1/T2 values.

    Relaxation uses the annihilation operator scaled by sqrt(1/T1) (amplitude
    sqrt(n/T1) for the n -> n-1 step); pure dephasing at rate
    1/T_phi = 1/T2 - 1/(2 T1) acts through the number operator.
    """
    ops = []
    for k, t1, t2 in ((1, params.t1_1, params.t2_1), (2, params.t1_2, params.t2_2)):
        if t1 is not None:
            ops.append(math.sqrt(1.0 / t1) * lowering_operator(params, k))
        if t2 is not None:
            gamma_phi = 1.0 / t2 - (0.5 / t1 if t1 is not None else 0.0)
            if gamma_phi > 1e-12:
                ops.append(math.sqrt(2.0 * gamma_phi) * number_operator(params, k))
    return ops


def liouvillian(h: np.ndarray, c_ops) -> np.ndarray:
    """Lindblad generator as a matrix on row-stacked density matrices.

    vec(rho)[i*d+j] = rho[i, j]; A rho B maps to (A kron B^T) vec(rho).
    """
    d = h.shape[0]
    eye = np.eye(d, dtype=complex)
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c in c_ops:
        cc = c.conj().T @ c
        gen += np.kron(c, c.conj()) - 0.5 * (np.kron(cc, eye) + np.kron(eye, cc.T))
    return gen


def _gate_superop(g: np.ndarray) -> np.ndarray:
    return np.kron(g, g.conj())


def _stretch_superop(l0, lx, ly, plan, tol):
    """Superoperator for one driven stretch of Lindblad evolution."""
    def _chain(n):
        x, y, dt = _cf4_entries(plan.coeff, _edges(plan.t0, plan.t1, n))
        e = np.eye(l0.shape[0], dtype=complex)
        for xj, yj, dtj in zip(x, y, dt):
            e = scipy.linalg.expm((l0 + xj * lx + yj * ly) * dtj) @ e
        return e
    if plan.exact:
        xm, ym = plan.coeff(0.5 * (plan.t0 + plan.t1))
        return scipy.linalg.expm((l0 + xm * lx + ym * ly) * plan.span), 1
    n = plan.n0
    e_prev = None
    for _ in range(MAX_DOUBLINGS + 1):
        e = _chain(n)
        if e_prev is not None and float(np.abs(e - e_prev).max()) <= tol:
            return e, n
        e_prev = e
        n *= 2
    raise ToleranceError(
        f"Lindblad stretch [{plan.t0 * 1e9:.2f}, {plan.t1 * 1e9:.2f}] ns did not "
        f"reach tol={tol:g} within {MAX_DOUBLINGS} step doublings")


def propagate_lindblad(params: DeviceParams, seq: PulseSequence,
                       frame: RotatingFrame | None = None, *,
                       tol: float = 1e-6,
                       rotation_mode: str = "ideal",
                       logical: tuple | None = None,
                       initial_state: np.ndarray | None = None,
                       record_times=None) -> PropagationResult:
    """Open-system propagator (superoperator on row-stacked density matrices).

    Mirrors propagate_unitary; the collapse operators come from the device
    T1/T2 entries and are invariant under the rotating-frame transformation.
    ``initial_state`` may be a ket or a density matrix.
    """
    logical = dressed_qubit_frequencies(params) if logical is None else logical
    frame = _default_frame(seq, logical) if frame is None else frame
    if not frame.uniform:
        raise ValueError("propagate_lindblad requires a uniform rotating frame")
    h_rot = to_rotating_frame(params, frame)[0].entries
    c_ops = collapse_operators(params)
    l0 = liouvillian(h_rot, c_ops)
    dim = params.dim

    plans, total = _plan_sequence(params, seq, frame, logical, rotation_mode)
    recording = record_times is not None
    rho0 = None
    if initial_state is not None:
        rho0 = (np.outer(initial_state, initial_state.conj())
                if initial_state.ndim == 1 else np.asarray(initial_state, dtype=complex))
    if recording:
        if rho0 is None:
            raise ValueError("record_times requires an initial_state")
        rec = np.sort(np.asarray(record_times, dtype=float))
        expanded = []
        for plan in plans:
            if plan.gate is None and plan.span > 0:
                expanded.extend(_split_plan(plan, rec))
            else:
                expanded.append(plan)
        plans = expanded

    # Drive superoperator parts are rebuilt per port combination on demand.
    lx_cache = {}

    def _drive_parts(ops):
        key = id(ops[0])
        if key not in lx_cache:
            vx, vy = ops
            eye = np.eye(dim, dtype=complex)
            lx_cache[key] = (-1j * (np.kron(vx, eye) - np.kron(eye, vx.T)),
                             -1j * (np.kron(vy, eye) - np.kron(eye, vy.T)))
        return lx_cache[key]

    e_total = np.eye(dim * dim, dtype=complex)
    counts = {"stretches": 0, "exponentials": 0}
    times_out, pops_out = [], []
    warnings_out = []

    def _snapshot(t_now):
        rho = (e_total @ rho0.reshape(-1)).reshape(dim, dim)
        tr = float(np.real(np.trace(rho)))
        if abs(tr - 1.0) > 1e-8:
            warnings_out.append(f"trace drift {tr - 1.0:+.2e} at t={t_now * 1e9:.1f} ns")
        times_out.append(t_now)
        pops_out.append(computational_populations(params, rho))

    next_rec = 0
    if recording:
        while next_rec < len(rec) and rec[next_rec] <= 1e-15:
            _snapshot(0.0)
            next_rec += 1

    for plan in plans:
        if plan.gate is not None:
            e_total = _gate_superop(plan.gate) @ e_total
            continue
        if plan.span <= 0:
            continue
        if plan.coeff is None:
            e_total = scipy.linalg.expm(l0 * plan.span) @ e_total
            counts["exponentials"] += 1
        else:
            lx, ly = _drive_parts(plan.ops)
            es, n = _stretch_superop(l0, lx, ly, plan, tol)
            e_total = es @ e_total
            counts["stretches"] += 1
            counts["exponentials"] += 2 * n
        if recording:
            while next_rec < len(rec) and rec[next_rec] <= plan.t1 + 1e-15:
                _snapshot(rec[next_rec])
                next_rec += 1

    final_rho = None
    if rho0 is not None:
        final_rho = (e_total @ rho0.reshape(-1)).reshape(dim, dim)
    return PropagationResult(
        u=None, superop=e_total, frame=frame, total_time=total,
        times=np.array(times_out) if recording else None,
        populations=np.array(pops_out) if recording else None,
        final_state=final_rho, step_counts=counts, warnings=warnings_out)


# ---------------------------------------------------------------------------
# Driven dressed energies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DrivenDressedResult:
    """Computational dressed energies under a constant RWA drive."""

    energies: dict              # product label -> rot-frame energy (rad/s)
    zeta: float                 # E11 - E01 - E10 + E00 (frame-invariant)
    min_overlap: float          # worst squared overlap met during continuation
    n_steps: int
    omega_d: float
    omega_amp: float


def _dominant_characters(params, vec, count=2):
    weights = np.abs(vec) ** 2
    order = np.argsort(weights)[::-1][:count]
    labels = params.labels()
    return [(labels[i], float(weights[i])) for i in order]


def driven_dressed_energies(params: DeviceParams, omega_d: float,
                            omega_amp: float, *, port: str = "q2",
                            amp_step: float = 0.25 * MHZ,
                            min_steps: int = 8,
                            overlap_floor: float = 0.6) -> DrivenDressedResult:
    """Dressed computational energies under a constant drive (RWA frame).

    The four computational eigenstates are followed from zero drive up to
    ``omega_amp`` by maximum-overlap continuation in amplitude steps of at
    most ``amp_step``.  The operating point is declared a leakage region when
    a followed state drops to ``overlap_floor`` or below, either step to step
    or cumulatively against its zero-drive reference (an exactly resonant
    drive hybridizes 50/50 at the first step, so the floor must sit above
    0.5), or when two tracked states claim the same eigenvector.

    Returns rot-frame energies; zeta = E11 - E01 - E10 + E00 is
    frame-invariant because the frame shift is linear in excitation number.
    """
    frame = RotatingFrame.drive(omega_d)
    h0 = to_rotating_frame(params, frame)[0].entries
    vx, vy = drive_quadratures(params, port)
    hx = math.cos(0.0) * vx + math.sin(0.0) * vy  # drive along X by convention
    track_labels = [(0, 0), (0, 1), (1, 0), (1, 1)]

    w, v = np.linalg.eigh(h0)
    tracked = {}
    for lab in track_labels:
        row = params.index(*lab)
        k = int(np.argmax(np.abs(v[row, :]) ** 2))
        tracked[lab] = v[:, k]
    reference = dict(tracked)
    energies = {lab: None for lab in track_labels}

    n = max(min_steps, int(math.ceil(abs(omega_amp) / amp_step))) if omega_amp else 1
    min_overlap = 1.0
    amps = np.linspace(0.0, omega_amp, n + 1)
    for amp in amps[1:] if omega_amp else []:
        w, v = np.linalg.eigh(h0 + amp * hx)
        claims = {}
        new_tracked = {}
        for lab in track_labels:
            ov = np.abs(v.conj().T @ tracked[lab]) ** 2
            k = int(np.argmax(ov))
            best = float(ov[k])
            kept = float(np.abs(reference[lab].conj() @ v[:, k]) ** 2)
            min_overlap = min(min_overlap, best, kept)
            if best <= overlap_floor or kept <= overlap_floor:
                second = _dominant_characters(params, v[:, k])
                raise LeakageRegionError(
                    f"state |{lab[0]}{lab[1]}> lost its identity at "
                    f"Omega/2pi = {amp / MHZ:.3f} MHz, drive "
                    f"{omega_d / (2e9 * math.pi):.6f} GHz (step overlap "
                    f"{best:.3f}, kept {kept:.3f}; hybridizing with {second})")
            if k in claims:
                raise LeakageRegionError(
                    f"states |{claims[k]}> and |{lab}> claim the same dressed "
                    f"eigenvector at Omega/2pi = {amp / MHZ:.3f} MHz, drive "
                    f"{omega_d / (2e9 * math.pi):.6f} GHz")
            claims[k] = lab
            new_tracked[lab] = v[:, k]
            energies[lab] = float(w[k])
        tracked = new_tracked
    if omega_amp == 0.0:
        for lab in track_labels:
            row = params.index(*lab)
            k = int(np.argmax(np.abs(v[row, :]) ** 2))
            energies[lab] = float(w[k])
    zeta = (energies[(1, 1)] - energies[(0, 1)]
            - energies[(1, 0)] + energies[(0, 0)])
    return DrivenDressedResult(energies=energies, zeta=zeta,
                               min_overlap=min_overlap, n_steps=n,
                               omega_d=omega_d, omega_amp=omega_amp)


# ---------------------------------------------------------------------------
# Lab-frame cross-check (no RWA)
# ---------------------------------------------------------------------------

def propagate_lab_flattop(params: DeviceParams, pulse: DrivePulse, *,
                          tol: float = 1e-3, steps_per_period: int = 32):
    """Lab-frame propagator for one flat-top pulse, counter-rotating terms
    retained.

    The flat stretch is handled by exponentiating one drive period and
    raising it to the number of whole periods; ramps and the fractional
    remainder are stepped directly.  steps_per_period is doubled until the
    propagator changes by less than ``tol``.

    Returns (u_lab, steps_per_period_used).
    """
    h_lab = build_static_hamiltonian(params).entries
    vx, vy = drive_quadratures(params, pulse.port)
    period = 2.0 * math.pi / pulse.freq

    def coeff(t_abs):
        env = float(pulse.envelope(t_abs))
        return (2.0 * pulse.amp * env * math.cos(pulse.freq * t_abs + pulse.phase),
                0.0)

    r = pulse.rise_fall
    flat0, flat1 = r, pulse.duration - r

    def _build(spp):
        def _stepped(a, b):
            if b <= a:
                return np.eye(params.dim, dtype=complex)
            n = max(2, int(math.ceil((b - a) / period * spp)))
            x, y, dt = _cf4_entries(coeff, _edges(a, b, n))
            return propagate_chain(h_lab, vx, vy, x, y, dt)

        u = _stepped(0.0, flat0)
        n_whole = int(math.floor((flat1 - flat0) / period))
        if n_whole > 0:
            x, y, dt = _cf4_entries(coeff, _edges(flat0, flat0 + period, spp))
            u_p = propagate_chain(h_lab, vx, vy, x, y, dt)
            u = np.linalg.matrix_power(u_p, n_whole) @ u
        t_resume = flat0 + n_whole * period
        u = _stepped(t_resume, flat1) @ u
        u = _stepped(flat1, pulse.duration) @ u
        return u

    spp = steps_per_period
    u_prev = None
    for _ in range(MAX_DOUBLINGS + 1):
        u = _build(spp)
        if u_prev is not None and float(np.abs(u - u_prev).max()) <= tol:
            return u, spp
        u_prev = u
        spp *= 2
    raise ToleranceError(
        f"lab-frame stepping did not reach tol={tol:g} within {MAX_DOUBLINGS} "
        f"doublings of steps_per_period")
