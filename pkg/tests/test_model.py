"""Static-model tests: Hamiltonian construction, rate formulas, dressed spectrum."""

import math

import numpy as np
import pytest

import oracles
from mapgate.errors import DimensionError, ResonanceError
from mapgate.model import (GHZ, KHZ, MHZ, DeviceParams, bare_energy,
                           build_static_hamiltonian, default_device,
                           dressed_qubit_frequencies, drive_operator,
                           drive_quadratures, exchange_element, level_pair,
                           map_condition_report, splitting_xi,
                           static_dressed_states, zeta_perturbative,
                           zeta_static)

# Frozen reference values for the default device (5.166 / 5.668 GHz,
# anharmonicity -220 MHz, J/2pi = 3 MHz, levels 3 x 5), computed from
# independent eigensolves and the second-order sum in oracles.py.
F1_DRESSED_GHZ = 5.16598207235339
F2_DRESSED_GHZ = 5.668017927646613
ZETA0_KHZ = -38.899039311605186
ZETA_EXACT_KHZ = -38.88889524073884
DELTA_1203_MHZ = -62.0
XI_MHZ = 0.4324672910034275
ZETA_PERT_543_5MHZ_KHZ = -52.168678377422104


def test_hamiltonian_matches_kron_oracle(device):
    h = build_static_hamiltonian(device)
    ref = oracles.kron_hamiltonian(device.omega1, device.omega2, device.delta1,
                                   device.delta2, device.j, device.d1, device.d2)
    np.testing.assert_allclose(h.entries, ref, atol=1e-6)  # rad/s scale ~1e10
    assert h.hermiticity_defect() == 0.0


def test_hamiltonian_matches_kron_oracle_random_params(rng):
    for _ in range(10):
        f1, f2 = rng.uniform(4.0, 6.0, size=2)
        a1, a2 = rng.uniform(-350.0, -150.0, size=2)
        j = rng.uniform(0.5, 20.0)
        n1, n2 = rng.integers(2, 6, size=2)
        p = DeviceParams.from_frequencies(f1, f2, a1, a2, j,
                                          levels1=int(n1), levels2=int(n2))
        ref = oracles.kron_hamiltonian(p.omega1, p.omega2, p.delta1, p.delta2,
                                       p.j, p.d1, p.d2)
        np.testing.assert_allclose(build_static_hamiltonian(p).entries, ref,
                                   atol=1e-5)


def test_drive_operator_matches_kron_oracle(device):
    for port in ("q1", "q2", "both"):
        ref = oracles.kron_drive(device.d1, device.d2, port)
        np.testing.assert_allclose(drive_operator(device, port).entries, ref,
                                   atol=1e-14)
    x, y = drive_quadratures(device, "q2")
    a2 = np.kron(np.eye(device.d1), oracles.ladder(device.d2))
    np.testing.assert_allclose(np.asarray(x), 0.5 * (a2 + a2.conj().T), atol=1e-14)
    np.testing.assert_allclose(np.asarray(y), 0.5j * (a2 - a2.conj().T), atol=1e-14)


def test_exchange_elements_scaling(device):
    # sqrt((n1+1) n2) enhancement of the bare J
    assert exchange_element(device, (1, 1), (2, 0)) == pytest.approx(
        math.sqrt(2) * device.j)
    assert exchange_element(device, (1, 1), (0, 2)) == pytest.approx(
        math.sqrt(2) * device.j)
    assert exchange_element(device, (1, 2), (0, 3)) == pytest.approx(
        math.sqrt(3) * device.j)
    assert exchange_element(device, (1, 0), (0, 1)) == pytest.approx(device.j)
    assert exchange_element(device, (0, 0), (1, 1)) == 0.0
    # symmetric in its arguments
    assert exchange_element(device, (0, 3), (1, 2)) == exchange_element(
        device, (1, 2), (0, 3))


def test_bare_energy_and_detuning_convention(device):
    # Delta_ab = E(a) - E(b); the gate pair sits 62 MHz below resonance here
    pair = level_pair(device, (1, 2), (0, 3))
    assert pair.detuning / MHZ == pytest.approx(DELTA_1203_MHZ, abs=1e-9)
    assert bare_energy(device, 1, 2) - bare_energy(device, 0, 3) == pytest.approx(
        pair.detuning)
    # Duffing ladder: E(0, 2) = 2 w2 + d2
    assert bare_energy(device, 0, 2) == pytest.approx(
        2 * device.omega2 + device.delta2)


def test_unit_conversion_from_frequencies():
    p = DeviceParams.from_frequencies(5.0, 6.0, -200.0, -250.0, 4.0,
                                      t1_us=(10.0, 20.0), t2_us=(8.0, 12.0))
    assert p.omega1 == pytest.approx(5.0 * GHZ)
    assert p.delta2 == pytest.approx(-250.0 * MHZ)
    assert p.j == pytest.approx(4.0 * MHZ)
    assert p.t1_1 == pytest.approx(10e-6)
    assert p.t2_2 == pytest.approx(12e-6)


def test_parameter_validation():
    with pytest.raises(ValueError):
        DeviceParams.from_frequencies(5.0, 6.0, -200.0, -250.0, 4.0, levels1=1)
    with pytest.raises(ValueError):
        # T2 > 2 T1 is unphysical
        DeviceParams.from_frequencies(5.0, 6.0, -200.0, -250.0, 4.0,
                                      t1_us=(1.0, 1.0), t2_us=(3.0, 1.0))
    with pytest.raises(DimensionError):
        build_static_hamiltonian(default_device(), max_dim=4)
    with pytest.raises(ValueError):
        drive_operator(default_device(), port="q3")


def test_splitting_xi_against_eigensolve(rng):
    for _ in range(50):
        delta = rng.uniform(-80.0, 80.0) * MHZ
        g = rng.uniform(0.1, 15.0) * MHZ
        ref = oracles.splitting_two_level(delta, g)
        assert splitting_xi(g, delta) == pytest.approx(ref, rel=1e-12)
    # exact degeneracy: half the avoided-crossing splitting
    assert splitting_xi(5.0 * MHZ, 0.0) == pytest.approx(5.0 * MHZ)


def test_splitting_xi_default_device(device):
    pair = level_pair(device, (1, 2), (0, 3))
    assert splitting_xi(pair.coupling, pair.detuning) / MHZ == pytest.approx(
        XI_MHZ, rel=1e-12)


def test_zeta_static_formula_and_perturbative_sum(device):
    assert zeta_static(device) / KHZ == pytest.approx(ZETA0_KHZ, rel=1e-12)
    # the formula is exactly the second-order sum restricted to |20>, |02>
    h = oracles.kron_hamiltonian(device.omega1, device.omega2, device.delta1,
                                 device.delta2, device.j, device.d1, device.d2)
    idx = {lab: device.index(*lab) for lab in [(0, 0), (0, 1), (1, 0), (1, 1)]}
    e2 = {lab: oracles.second_order_shift(h, k) for lab, k in idx.items()}
    zeta_pt2 = e2[(1, 1)] - e2[(0, 1)] - e2[(1, 0)] + e2[(0, 0)]
    assert zeta_static(device) == pytest.approx(zeta_pt2, rel=1e-9)


def test_zeta_perturbative_frozen_value(device):
    z = zeta_perturbative(device, 5.43 * GHZ, 5.0 * MHZ)
    assert z / KHZ == pytest.approx(ZETA_PERT_543_5MHZ_KHZ, rel=1e-12)
    # zero drive recovers the static rate
    assert zeta_perturbative(device, 5.43 * GHZ, 0.0) == pytest.approx(
        zeta_static(device))


def test_zeta_perturbative_pole_guard(device):
    # bare 1->2 transition of Q2 with control excited sits at 5.448 GHz
    lp = level_pair(device, (1, 2), (1, 1))
    with pytest.raises(ResonanceError):
        zeta_perturbative(device, lp.detuning, 2.0 * MHZ)
    # poles of the zeta2 denominator: roots of Jp^2 + (A - w)(w - B)
    a = level_pair(device, (1, 2), (1, 1)).detuning
    b = level_pair(device, (0, 3), (1, 1)).detuning
    jp = level_pair(device, (1, 2), (0, 3)).coupling
    for root in (0.5 * (a + b) - math.hypot(0.5 * (a - b), jp),
                 0.5 * (a + b) + math.hypot(0.5 * (a - b), jp)):
        with pytest.raises(ResonanceError):
            zeta_perturbative(device, root, 2.0 * MHZ)
        # a few linewidths away it evaluates fine
        zeta_perturbative(device, root + 3.0 * MHZ, 2.0 * MHZ)


def test_dressed_frequencies_frozen(device):
    f1, f2 = dressed_qubit_frequencies(device)
    assert f1 / GHZ == pytest.approx(F1_DRESSED_GHZ, rel=1e-12)
    assert f2 / GHZ == pytest.approx(F2_DRESSED_GHZ, rel=1e-12)
    # exchange pushes the lower qubit down and the upper one up
    assert f1 < device.omega1 < device.omega2 < f2


def test_dressed_state_overlaps(device):
    energies, vectors, overlaps = static_dressed_states(device)
    assert set(energies) == set(device.labels())
    for lab, w in overlaps.items():
        assert w > 0.9, lab
    for lab, v in vectors.items():
        assert np.linalg.norm(v) == pytest.approx(1.0)


def test_map_condition_report(device):
    rep = map_condition_report(device)
    assert rep.delta_12_03 / MHZ == pytest.approx(DELTA_1203_MHZ, abs=1e-9)
    assert rep.j_12_03 == pytest.approx(math.sqrt(3) * device.j)
    assert rep.xi / MHZ == pytest.approx(XI_MHZ, rel=1e-12)
    assert rep.zeta_static_exact / KHZ == pytest.approx(ZETA_EXACT_KHZ, rel=1e-9)
    # conditional anharmonicity: driven transition shifts when the control is set
    assert rep.conditional_anharmonicity == pytest.approx(rep.e_b - rep.e_a)
    # dressed transitions out of |11> match an independent eigensolve
    h = oracles.kron_hamiltonian(device.omega1, device.omega2, device.delta1,
                                 device.delta2, device.j, device.d1, device.d2)
    vals, vecs = np.linalg.eigh(h)
    w = np.abs(vecs) ** 2
    k11 = int(np.argmax(w[device.index(1, 1)]))
    k12 = int(np.argmax(w[device.index(1, 2)]))
    k03 = int(np.argmax(w[device.index(0, 3)]))
    assert rep.trans_12_like == pytest.approx(vals[k12] - vals[k11], rel=1e-12)
    assert rep.trans_03_like == pytest.approx(vals[k03] - vals[k11], rel=1e-12)
    # the window between them brackets the repulsion: trans_03 - trans_12
    # equals the full avoided-crossing gap of the two-level pair to ~J^2/Delta
    gap = rep.trans_03_like - rep.trans_12_like
    pair = level_pair(device, (1, 2), (0, 3))
    assert gap == pytest.approx(math.hypot(2 * pair.coupling, pair.detuning),
                                rel=5e-3)


def test_map_report_at_exact_resonance():
    # tune Q1 so E(12) = E(03): omega1 = omega2 + 2 delta2
    p = DeviceParams.from_frequencies(5.228, 5.668, -220.0, -220.0, 3.0,
                                      levels1=3, levels2=5)
    rep = map_condition_report(p)
    assert abs(rep.delta_12_03) / MHZ < 1e-9
    assert rep.xi == pytest.approx(math.sqrt(3) * p.j, rel=1e-9)
    assert rep.label_overlaps["12-like"] == pytest.approx(0.5, abs=0.05)


def test_truncation_convergence_of_exact_zeta():
    z = [map_condition_report(default_device(levels1=n1, levels2=n2)).zeta_static_exact
         for (n1, n2) in [(3, 5), (4, 6), (5, 7)]]
    # already converged at (3, 5) to well under a percent
    assert abs(z[1] - z[0]) / abs(z[2]) < 1e-2
    assert abs(z[2] - z[1]) / abs(z[2]) < 1e-3
