"""Fringe analysis: cosine fits, quadrature phase curves, pi crossings."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import hilbert


@dataclass(frozen=True)
class CosineFit:
    """y(t) ~ offset + amplitude * cos(frequency * t + phase)."""

    frequency: float            # rad/s, >= 0 by fit convention
    phase: float                # rad, in (-pi, pi]
    amplitude: float            # >= 0
    offset: float
    residual_rms: float
    contrast: float             # 2*amplitude for population fringes, clipped
    method: str = "cosine"

    def __call__(self, t):
        return self.offset + self.amplitude * np.cos(self.frequency * t
                                                     + self.phase)


def _quadrature_lstsq(times, signal, freq):
    """Best (offset, a, b) for offset + a cos(w t) + b sin(w t); returns rss."""
    cols = np.column_stack([np.ones_like(times),
                            np.cos(freq * times), np.sin(freq * times)])
    coef, *_ = np.linalg.lstsq(cols, signal, rcond=None)
    resid = signal - cols @ coef
    return coef, float(resid @ resid)


def fit_cosine(times, signal, freq_guess=None, max_freq=None) -> CosineFit:
    """Least-squares cosine fit with offset, amplitude, phase and frequency free.

    The frequency is the only nonlinear parameter, so the fit scans a grid
    (FFT-seeded for uniform sampling, plus ``freq_guess`` when provided) and
    polishes the best candidate with a bounded scalar minimizer; the linear
    parameters come from exact least squares at each trial frequency.
    """
    times = np.asarray(times, dtype=float)
    signal = np.asarray(signal, dtype=float)
    if times.size < 5:
        raise ValueError("need at least 5 samples to fit a fringe")
    span = times.max() - times.min()
    dt = np.median(np.diff(np.sort(times)))
    nyquist = math.pi / dt
    if max_freq is None:
        max_freq = nyquist
    # candidate frequencies: dense low-frequency grid + FFT peak + caller guess
    cands = list(np.linspace(0.0, max_freq, 256))
    if times.size >= 8 and np.allclose(np.diff(times), dt, rtol=1e-6):
        spec = np.abs(np.fft.rfft(signal - signal.mean()))
        k = int(np.argmax(spec[1:])) + 1
        cands.append(2.0 * math.pi * k / (dt * times.size))
    if freq_guess is not None:
        cands.extend(abs(freq_guess) * f for f in (0.5, 0.9, 1.0, 1.1, 2.0))
    best_w, best_rss = 0.0, math.inf
    for w in cands:
        _, rss = _quadrature_lstsq(times, signal, w)
        if rss < best_rss:
            best_w, best_rss = w, rss
    # polish inside one grid cell; the residual is smooth in w
    cell = max(max_freq / 255, 2.0 * math.pi / (20.0 * span))
    res = minimize_scalar(lambda w: _quadrature_lstsq(times, signal, w)[1],
                          bounds=(max(0.0, best_w - cell), best_w + cell),
                          method="bounded",
                          options={"xatol": 1e-6 * max(best_w, cell)})
    w = float(res.x) if res.fun <= best_rss else best_w
    (off, a, b), rss = _quadrature_lstsq(times, signal, w)
    amp = math.hypot(a, b)
    phase = math.atan2(-b, a) if amp > 0 else 0.0
    return CosineFit(frequency=w, phase=phase, amplitude=amp, offset=float(off),
                     residual_rms=math.sqrt(rss / times.size),
                     contrast=float(np.clip(2.0 * amp, 0.0, 1.0)))


def hilbert_phase_slope(times, signal):
    """Fallback phase extraction: analytic-signal phase, unwrapped.

    Returns (frequency, phases).  Assumes uniform sampling and at least one
    full oscillation; end effects make this coarser than the cosine fit, so
    it is only used when the fit residual is rejected.
    """
    times = np.asarray(times, dtype=float)
    signal = np.asarray(signal, dtype=float)
    analytic = hilbert(signal - signal.mean())
    phases = np.unwrap(np.angle(analytic))
    k = max(1, times.size // 10)  # trim transient edges
    slope = np.polyfit(times[k:-k or None], phases[k:-k or None], 1)[0]
    return float(abs(slope)), phases


def fit_fringe(times, signal, freq_guess=None,
               residual_threshold=0.08) -> CosineFit:
    """Cosine fit with Hilbert fallback when the residual is out of spec.

    ``residual_threshold`` is relative to the fitted amplitude (or to the
    signal spread when the amplitude collapses).
    """
    fit = fit_cosine(times, signal, freq_guess=freq_guess)
    scale = max(fit.amplitude, np.ptp(signal) / 2.0, 1e-12)
    if fit.residual_rms <= residual_threshold * scale:
        return fit
    freq, phases = hilbert_phase_slope(times, signal)
    refit = fit_cosine(times, signal, freq_guess=freq)
    if refit.residual_rms < fit.residual_rms:
        fit = refit
    if fit.residual_rms <= residual_threshold * scale:
        return fit
    return CosineFit(frequency=freq, phase=float(phases[0]),
                     amplitude=fit.amplitude, offset=fit.offset,
                     residual_rms=fit.residual_rms, contrast=fit.contrast,
                     method="hilbert")


def phase_curve(y_cos, y_sin, offset=None):
    """Pointwise fringe phase from two quadrature signals, unwrapped.

    The protocols measure each fringe twice, with the final analysis pulse
    shifted by 90 degrees, so that cos- and sin-quadrature signals
    y_cos = off + A cos(phi), y_sin = off + A sin(phi) determine the signed
    phase phi(t) without the reflection ambiguity of a single cosine.
    """
    y_cos = np.asarray(y_cos, dtype=float)
    y_sin = np.asarray(y_sin, dtype=float)
    if offset is None:
        # fringe centers; the two quadratures share one baseline
        offset = 0.5 * (y_cos.mean() + y_sin.mean())
    return np.unwrap(np.arctan2(y_sin - offset, y_cos - offset))


def conditional_phase_curve(phase_excited, phase_ground):
    """Phase difference between control-excited and control-ground fringes."""
    return np.asarray(phase_excited) - np.asarray(phase_ground)


def resolve_fit_signs(fit_ground: CosineFit, fit_excited: CosineFit):
    """Recover relative fringe rotation signs from two cosine fits.

    A cosine fit cannot tell w t + phi from -(w t + phi).  Out-of-phase
    fringes (the refocused protocol) start aligned at t = 0, so the sign pair
    (s0, s1) minimizing the initial phase mismatch |wrap(s1 phi1 - s0 phi0)|
    is selected; the overall sign stays ambiguous, which is why the
    quadrature method is the default extraction path.
    """
    def wrap(x):
        return (x + math.pi) % (2.0 * math.pi) - math.pi

    best = None
    for s0 in (1, -1):
        for s1 in (1, -1):
            miss = abs(wrap(s1 * fit_excited.phase - s0 * fit_ground.phase))
            if best is None or miss < best[0]:
                best = (miss, s0, s1)
    return best[1], best[2]


def conditional_phase_from_fits(fit_ground: CosineFit, fit_excited: CosineFit,
                                t):
    """Signed conditional phase at time t from two single-quadrature fits."""
    s0, s1 = resolve_fit_signs(fit_ground, fit_excited)
    return (s1 * (fit_excited.frequency * t + fit_excited.phase)
            - s0 * (fit_ground.frequency * t + fit_ground.phase))


def first_pi_crossing(times, phase_diff):
    """First time |phase difference| reaches pi, linearly interpolated.

    Returns None when the curve stays inside (-pi, pi) over the samples.
    """
    times = np.asarray(times, dtype=float)
    mag = np.abs(np.asarray(phase_diff, dtype=float))
    if mag.size == 0:
        return None
    if mag[0] >= math.pi:
        return float(times[0])
    above = np.nonzero(mag >= math.pi)[0]
    if above.size == 0:
        return None
    k = int(above[0])
    t0, t1 = times[k - 1], times[k]
    m0, m1 = mag[k - 1], mag[k]
    return float(t0 + (math.pi - m0) * (t1 - t0) / (m1 - m0))
