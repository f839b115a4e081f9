"""Fringe fitting and phase extraction on synthetic signals."""

import math

import numpy as np
import pytest

from mapgate import fringes


def _wrap(x):
    return (x + math.pi) % (2 * math.pi) - math.pi


class TestCosineFit:
    def test_recovers_random_fringes(self, rng):
        # frequencies stay under the 160-sample Nyquist rate
        t = np.linspace(0.0, 3e-6, 160)
        for _ in range(25):
            w = rng.uniform(0.8e6, 20e6) * 2 * math.pi
            phi = rng.uniform(-math.pi, math.pi)
            amp = rng.uniform(0.1, 0.5)
            off = rng.uniform(0.3, 0.7)
            y = off + amp * np.cos(w * t + phi)
            fit = fringes.fit_cosine(t, y)
            assert abs(fit.frequency - w) / w < 1e-3
            assert abs(_wrap(fit.phase - phi)) < 1e-2
            assert abs(fit.amplitude - amp) < 1e-3
            assert abs(fit.offset - off) < 1e-3

    def test_noise_robustness(self, rng):
        t = np.linspace(0.0, 2e-6, 240)
        w = 2 * math.pi * 4.3e6
        y = 0.5 + 0.4 * np.cos(w * t + 0.7) + rng.normal(0, 0.02, t.size)
        fit = fringes.fit_cosine(t, y)
        assert abs(fit.frequency - w) / w < 0.01
        assert abs(_wrap(fit.phase - 0.7)) < 0.08

    def test_freq_guess_beats_aliasing(self):
        # undersampled on purpose; the guess selects the right branch
        t = np.linspace(0.0, 1e-6, 24)
        w = 2 * math.pi * 21e6
        y = 0.5 + 0.3 * np.cos(w * t)
        fit = fringes.fit_cosine(t, y, freq_guess=w, max_freq=2.2 * w)
        assert abs(fit.frequency - w) / w < 1e-3

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            fringes.fit_cosine(np.arange(4.0), np.zeros(4))

    def test_contrast_clipped_to_unit_interval(self):
        t = np.linspace(0, 1, 32)
        fit = fringes.fit_cosine(t, 0.5 + 0.7 * np.cos(6.0 * t))
        assert fit.contrast == 1.0


class TestQuadraturePhase:
    def test_recovers_nonlinear_phase(self):
        t = np.linspace(0.0, 4e-6, 300)
        phi = 2 * math.pi * 1.1e6 * t + 0.4 * np.sin(2 * math.pi * 0.9e6 * t)
        y_cos = 0.5 + 0.35 * np.cos(phi)
        y_sin = 0.5 + 0.35 * np.sin(phi)
        rec = fringes.phase_curve(y_cos, y_sin, offset=0.5)
        assert np.max(np.abs(rec - phi)) < 1e-9
        # auto-estimated offset is biased by the partial last period only
        rec_auto = fringes.phase_curve(y_cos, y_sin)
        assert np.max(np.abs(rec_auto - phi)) < 0.1

    def test_sign_sensitivity(self):
        # opposite rotation directions must come out with opposite signs
        t = np.linspace(0.0, 2e-6, 100)
        phi = 2 * math.pi * 1.5e6 * t
        up = fringes.phase_curve(0.5 + 0.4 * np.cos(phi),
                                 0.5 + 0.4 * np.sin(phi), offset=0.5)
        down = fringes.phase_curve(0.5 + 0.4 * np.cos(-phi),
                                   0.5 + 0.4 * np.sin(-phi), offset=0.5)
        assert np.allclose(up, -down, atol=1e-9)
        assert up[-1] > 0

    def test_conditional_phase_curve_is_difference(self):
        a = np.array([0.0, 1.0, 2.0])
        b = np.array([0.5, 0.5, 0.5])
        assert np.allclose(fringes.conditional_phase_curve(a, b), a - b)


class TestSignResolution:
    def test_opposed_fringes(self):
        # refocused-style branches: same t=0 phase, opposite rotation
        t = np.linspace(0.0, 2e-6, 150)
        w0, w1, c = 2 * math.pi * 2.0e6, 2 * math.pi * 2.6e6, 0.5
        fit0 = fringes.fit_cosine(t, 0.5 + 0.3 * np.cos(+w0 * t + c))
        fit1 = fringes.fit_cosine(t, 0.5 + 0.3 * np.cos(-w1 * t + c))
        t_probe = 0.7e-6
        diff = fringes.conditional_phase_from_fits(fit0, fit1, t_probe)
        assert abs(abs(diff) - (w0 + w1) * t_probe) < 0.02


class TestPiCrossing:
    def test_interpolates_linear_curve(self):
        t = np.linspace(0.0, 10.0, 21)
        slope = -0.8
        crossing = fringes.first_pi_crossing(t, slope * t)
        assert crossing == pytest.approx(math.pi / 0.8, rel=1e-12)

    def test_none_when_below_pi(self):
        t = np.linspace(0.0, 1.0, 11)
        assert fringes.first_pi_crossing(t, 0.5 * t) is None

    def test_first_sample_already_beyond(self):
        t = np.array([2.0, 3.0])
        assert fringes.first_pi_crossing(t, np.array([4.0, 5.0])) == 2.0

    def test_wiggly_curve_first_crossing_wins(self):
        # conditional-phase curves wiggle when leak channels breathe; the
        # reported time is the first crossing, not the last
        t = np.linspace(0.0, 20.0, 400)
        phase = -0.5 * t - 0.4 * np.sin(3.0 * t)
        crossing = fringes.first_pi_crossing(t, phase)
        first = t[np.nonzero(np.abs(phase) >= math.pi)[0][0]]
        assert crossing <= first
        assert abs(abs(np.interp(crossing, t, phase)) - math.pi) < 5e-3


class TestHilbertFallback:
    def test_decaying_fringe_still_yields_frequency(self):
        t = np.linspace(0.0, 4e-6, 320)
        w = 2 * math.pi * 2.4e6
        y = 0.5 + 0.45 * np.exp(-t / 1.2e-6) * np.cos(w * t + 0.3)
        fit = fringes.fit_fringe(t, y)
        assert abs(fit.frequency - w) / w < 0.1
