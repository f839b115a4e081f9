"""Ramsey protocols, gate assembly and sweeps on the example device."""

import math

import numpy as np
import pytest

from mapgate.dynamics import driven_dressed_energies, propagate_unitary
from mapgate.model import (GHZ, MHZ, NS, default_device,
                           dressed_qubit_frequencies, map_condition_report)
from mapgate.protocols import (ROT_SLOT, conditional_phase_pair,
                               extract_transition_lines, flat_top_family,
                               gate_conditional_phase, gate_leakage,
                               gate_pi_crossing, gate_pulse_sequence,
                               gate_total_time, gate_unitary,
                               rabi_spectroscopy, ramsey_map_direct,
                               ramsey_map_refocused, sweep_gate_time)

WD = 5.43 * GHZ


def _slope(times, phases):
    return np.polyfit(times, phases, 1)[0]


class TestRamseyRates:
    def test_direct_fringe_matches_stark_prediction(self, device):
        fam = flat_top_family(device, WD, 2.0 * MHZ)
        predicted = abs(fam.predicted_rates()["direct"][0])
        grid = np.linspace(20 * NS, 10e-6, 56)
        rec = ramsey_map_direct(device, WD, 2.0 * MHZ, grid, init=0)
        assert rec.fit.method == "cosine"
        assert abs(rec.fit.frequency - predicted) / predicted < 0.05

    def test_refocused_conditional_rate_is_zeta(self, device):
        # the mid-sequence pi pulses flip the control, so the echoed
        # conditional phase accumulates at -zeta (toward +pi for zeta < 0)
        zeta = driven_dressed_energies(device, WD, 5.0 * MHZ).zeta
        grid = np.linspace(40 * NS, 8e-6, 40)
        rec0, rec1, diff = conditional_phase_pair(device, WD, 5.0 * MHZ,
                                                  grid, kind="refocused")
        slope = _slope(grid, diff)
        assert abs(slope + zeta) / abs(zeta) < 0.08
        # branches rotate oppositely at half the conditional rate
        s0, s1 = _slope(grid, rec0.phase), _slope(grid, rec1.phase)
        assert abs(s0 + s1) < 0.15 * abs(zeta)
        assert abs(abs(s0) - 0.5 * abs(zeta)) < 0.15 * abs(zeta)

    def test_direct_conditional_rate_matches_refocused(self, device):
        grid = np.linspace(40 * NS, 6e-6, 32)
        _, _, diff_dir = conditional_phase_pair(device, WD, 5.0 * MHZ, grid,
                                                kind="direct")
        _, _, diff_ref = conditional_phase_pair(device, WD, 5.0 * MHZ, grid,
                                                kind="refocused")
        s_dir, s_ref = _slope(grid, diff_dir), _slope(grid, diff_ref)
        assert abs(s_dir + s_ref) / abs(s_ref) < 0.1

    def test_echo_cancels_single_qubit_phase(self, device):
        # the 1q part is the branch-average rate; the echo removes the
        # drive-induced Stark shift that dominates the direct protocol
        grid = np.linspace(40 * NS, 8e-6, 40)
        means = {}
        for kind in ("direct", "refocused"):
            r0, r1, _ = conditional_phase_pair(device, WD, 2.0 * MHZ, grid,
                                               kind=kind)
            means[kind] = abs(0.5 * (_slope(grid, r0.phase)
                                     + _slope(grid, r1.phase)))
        assert means["direct"] > 10.0 * means["refocused"]

    def test_shots_are_deterministic_per_seed(self, device):
        grid = np.linspace(40 * NS, 4e-6, 24)
        recs = [ramsey_map_refocused(device, WD, 5.0 * MHZ, grid, init=0,
                                     shots=300,
                                     rng=np.random.default_rng(11))
                for _ in range(2)]
        assert np.array_equal(recs[0].p1_q2, recs[1].p1_q2)
        with pytest.raises(ValueError):
            ramsey_map_refocused(device, WD, 5.0 * MHZ, grid, shots=100)


class TestGateAssembly:
    def test_gate_unitary_is_unitary(self, device):
        fam = flat_top_family(device, WD, 5.0 * MHZ)
        for echoed in (True, False):
            u = gate_unitary(fam, 400 * NS, echoed=echoed)
            assert np.abs(u.conj().T @ u - np.eye(device.dim)).max() < 1e-9

    def test_sequence_matches_family_assembly(self, device):
        dt = 380 * NS
        fam = flat_top_family(device, WD, 8.0 * MHZ)
        u_fam = gate_unitary(fam, dt, echoed=True)
        seq = gate_pulse_sequence(WD, 8.0 * MHZ, dt, echoed=True)
        res = propagate_unitary(device, seq, tol=1e-10)
        assert res.total_time == pytest.approx(gate_total_time(dt))
        assert np.abs(res.u - u_fam).max() < 1e-7

    def test_conditional_phase_gauge_invariance(self, device, rng):
        fam = flat_top_family(device, WD, 8.0 * MHZ)
        u = gate_unitary(fam, 500 * NS)
        ref = gate_conditional_phase(u, device)
        for _ in range(5):
            # single-qubit z phases on either side must drop out
            phases = []
            for a, b, c in rng.uniform(-math.pi, math.pi, (2, 3)):
                phi = np.zeros(device.dim)
                for (n1, n2), k in zip(device.labels(),
                                       range(device.dim)):
                    phi[k] = a * n1 + b * n2 + c
                phases.append(np.exp(1j * phi))
            u_gauged = (phases[0][:, None] * u) * phases[1][None, :]
            assert gate_conditional_phase(u_gauged, device) == \
                pytest.approx(ref, abs=1e-12)

    def test_pi_crossing_tracks_zeta(self, device):
        fam = flat_top_family(device, WD, 5.0 * MHZ)
        zeta = driven_dressed_energies(device, WD, 5.0 * MHZ).zeta
        grid = np.linspace(40 * NS, 12e-6, 150)
        dt_star, dts, curve = gate_pi_crossing(fam, grid)
        assert dt_star is not None
        assert abs(dt_star - math.pi / abs(zeta)) < 0.05 * dt_star
        assert abs(np.interp(dt_star, dts, np.abs(curve)) - math.pi) < 5e-3

    def test_gate_leakage_blows_up_on_resonance(self, device):
        # at an untuned dt the detuned gate still carries transient flop
        # leak (percent level); on the 12-like line it flops near fully
        rep = map_condition_report(device)
        quiet = gate_leakage(
            gate_unitary(flat_top_family(device, WD, 5.0 * MHZ), 500 * NS),
            device)
        hot = gate_leakage(
            gate_unitary(flat_top_family(device, rep.trans_12_like,
                                         5.0 * MHZ), 500 * NS), device)
        assert quiet < 0.2
        assert hot > 0.5

    def test_total_time_convention(self):
        assert gate_total_time(500 * NS) == pytest.approx(500 * NS + ROT_SLOT)
        assert gate_total_time(500 * NS, echoed=False) == 500 * NS


class TestSweep:
    def test_sweep_agrees_with_propagator_crossing(self, device):
        # fringe-extracted gate time vs the gauge-invariant propagator path
        res = sweep_gate_time(device, [WD], [5.0 * MHZ], horizon=12e-6)[0]
        assert not res.diverged
        fam = flat_top_family(device, WD, 5.0 * MHZ)
        dt_star, _, _ = gate_pi_crossing(
            fam, np.linspace(40 * NS, 12e-6, 150))
        assert res.t_zzpi == pytest.approx(dt_star + ROT_SLOT, rel=0.02)
        assert np.all(np.diff(res.phase_times) > 0)

    def test_resonant_point_flags_leakage(self, device):
        rep = map_condition_report(device)
        res = sweep_gate_time(device, [rep.trans_12_like], [5.0 * MHZ],
                              horizon=2e-6)[0]
        assert res.diverged
        assert math.isnan(res.t_zzpi)
        assert "leakage" in res.reason or "tracking" in res.reason

    def test_weak_drive_reports_no_crossing(self, device):
        res = sweep_gate_time(device, [WD], [0.5 * MHZ], horizon=1e-6)[0]
        assert res.diverged
        assert "no pi crossing" in res.reason


class TestSpectroscopy:
    def test_dressed_lines_recovered(self, device):
        logical = dressed_qubit_frequencies(device)
        freqs = np.concatenate([
            np.linspace(logical[0] - 20 * MHZ, logical[0] + 20 * MHZ, 21),
            np.linspace(logical[1] - 20 * MHZ, logical[1] + 20 * MHZ, 21)])
        # 2.5 MHz over 3 us = 7.5 Rabi cycles: on-resonance depletion sits
        # at a half-cycle maximum instead of a revival dip
        spec = rabi_spectroscopy(device, freqs, [2.5 * MHZ, 7.5 * MHZ],
                                 3e-6)
        assert spec.signal.shape == (2, 42)
        assert np.all((spec.signal >= 0) & (spec.signal <= 1))
        lines = extract_transition_lines(spec, device)
        assert abs(lines[(1, "f01")] - logical[0]) < 1.5 * MHZ
        assert abs(lines[(2, "f01")] - logical[1]) < 1.5 * MHZ

    def test_short_pulse_warns(self, device):
        with pytest.warns(UserWarning, match="Rabi periods"):
            rabi_spectroscopy(device, [5.4 * GHZ], [1.0 * MHZ], 200 * NS)


class TestFamilyGuards:
    def test_needs_four_levels_on_transmon_two(self):
        small = default_device(levels2=3)
        with pytest.raises(ValueError, match="4 levels"):
            flat_top_family(small, WD, 5.0 * MHZ)

    def test_drive_shorter_than_ramps_rejected(self, device):
        fam = flat_top_family(device, WD, 5.0 * MHZ)
        with pytest.raises(ValueError, match="shorter than the ramps"):
            fam.drive(15 * NS)

    def test_initial_states_are_basis_kets(self, device):
        # control is transmon 1, measured is transmon 2
        fam = flat_top_family(device, WD, 5.0 * MHZ)
        psi = fam.initial_state(1)
        assert abs(psi[device.index(1, 0)]) == 1.0
        p1, leak = fam.measured_p1_and_leak(psi)
        assert p1 == 0.0 and leak == 0.0
        excited = np.zeros(device.dim, dtype=complex)
        excited[device.index(0, 1)] = 1.0
        p1_exc, _ = fam.measured_p1_and_leak(excited)
        assert p1_exc == 1.0
