"""Static model of two exchange-coupled transmons (Duffing oscillators).

Internally every frequency is angular (rad/s) and every time is in seconds;
ordinary frequencies in GHz/MHz appear only at the configuration and I/O
boundary.  The product basis |n1 n2> is ordered row-major, index = n1*d2 + n2.

The closed-form rate expressions implemented here describe the
microwave-activated conditional-phase (MAP) mechanism: a drive near the
1->2 transition of the second transmon picks up a conditional Stark shift
because the |12> level hybridizes with |03> through the exchange coupling.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ResonanceError

TWOPI = 2.0 * math.pi

# Unit conversions (ordinary frequency -> angular, and time units -> seconds).
GHZ = TWOPI * 1e9
MHZ = TWOPI * 1e6
KHZ = TWOPI * 1e3
NS = 1e-9
US = 1e-6

#: Largest Hilbert-space dimension accepted by the dense builders.
MAX_HILBERT_DIM = 4096


@dataclass(frozen=True)
class DeviceParams:
    """Device description for the two-transmon model.

    Attributes
    ----------
    omega1, omega2 : float
        Bare 0->1 transition frequencies (rad/s).
    delta1, delta2 : float
        Anharmonicities (rad/s); negative for transmons.
    j : float
        Exchange coupling J between the transmons (rad/s).
    d1, d2 : int
        Number of retained levels per transmon.
    t1_1, t1_2, t2_1, t2_2 : float or None
        Relaxation and coherence times in seconds; None disables the
        corresponding decay channel.
    """

    omega1: float
    omega2: float
    delta1: float
    delta2: float
    j: float
    d1: int = 3
    d2: int = 5
    t1_1: float | None = None
    t1_2: float | None = None
    t2_1: float | None = None
    t2_2: float | None = None

    def __post_init__(self):
        if self.d1 < 2 or self.d2 < 2:
            raise ValueError(f"each transmon needs at least 2 levels, got {self.d1}x{self.d2}")
        for label, t in (("t1_1", self.t1_1), ("t1_2", self.t1_2),
                         ("t2_1", self.t2_1), ("t2_2", self.t2_2)):
            if t is not None and t <= 0:
                raise ValueError(f"{label} must be positive, got {t}")
        # Physical constraint: T2 cannot exceed 2*T1.
        for qubit, t1, t2 in ((1, self.t1_1, self.t2_1), (2, self.t1_2, self.t2_2)):
            if t1 is not None and t2 is not None and t2 > 2.0 * t1 + 1e-15:
                raise ValueError(
                    f"transmon {qubit}: T2={t2} exceeds 2*T1={2 * t1} (unphysical)")

    @classmethod
    def from_frequencies(cls, f1_GHz, f2_GHz, anharm1_MHz, anharm2_MHz,
                         coupling_MHz, levels1=3, levels2=5,
                         t1_us=(None, None), t2_us=(None, None)):
        """Build from ordinary-frequency units (the config-file convention)."""
        def _sec(u):
            return None if u is None else u * US
        return cls(
            omega1=f1_GHz * GHZ,
            omega2=f2_GHz * GHZ,
            delta1=anharm1_MHz * MHZ,
            delta2=anharm2_MHz * MHZ,
            j=coupling_MHz * MHZ,
            d1=int(levels1),
            d2=int(levels2),
            t1_1=_sec(t1_us[0]), t1_2=_sec(t1_us[1]),
            t2_1=_sec(t2_us[0]), t2_2=_sec(t2_us[1]),
        )

    @property
    def dim(self) -> int:
        return self.d1 * self.d2

    def index(self, n1: int, n2: int) -> int:
        """Row-major product-basis index of |n1 n2>."""
        if not (0 <= n1 < self.d1 and 0 <= n2 < self.d2):
            raise IndexError(f"level ({n1},{n2}) outside {self.d1}x{self.d2} truncation")
        return n1 * self.d2 + n2

    def labels(self):
        """All product labels (n1, n2) in basis order."""
        return [(n1, n2) for n1 in range(self.d1) for n2 in range(self.d2)]

    def basis_tag(self) -> str:
        return f"product|n1n2-row-major|d1={self.d1}|d2={self.d2}"


def default_device(levels1=3, levels2=5, with_noise=False) -> DeviceParams:
    """The bundled example device and regression fixture.

    Transmon frequencies 5.166 / 5.668 GHz, anharmonicities -220 MHz and an
    exchange coupling of J/2pi = 3 MHz: a weak-coupling point where the
    perturbative rate formulas are accurate, used throughout the tests.
    The fast-gate operating point lives in ``calibration.calibrated_device``
    (stronger J, retuned f1).  With ``with_noise`` the (T1, T2) = (6, 4) us
    pair used for the open-system studies is attached to both transmons.
    """
    t1 = (6.0, 6.0) if with_noise else (None, None)
    t2 = (4.0, 4.0) if with_noise else (None, None)
    return DeviceParams.from_frequencies(
        5.166, 5.668, -220.0, -220.0, 3.0,
        levels1=levels1, levels2=levels2, t1_us=t1, t2_us=t2)


# ---------------------------------------------------------------------------
# Bare energies and level pairs
# ---------------------------------------------------------------------------

def bare_energy(params: DeviceParams, n1: int, n2: int) -> float:
    """Bare Duffing energy of |n1 n2> (rad/s, hbar = 1)."""
    return (params.omega1 * n1 + 0.5 * params.delta1 * n1 * (n1 - 1)
            + params.omega2 * n2 + 0.5 * params.delta2 * n2 * (n2 - 1))


def exchange_element(params: DeviceParams, a, b) -> float:
    """Exchange matrix element <a|J(a1'a2 + a1a2')|b> between product labels.

    Nonzero only for single-excitation swaps (n1, n2) <-> (n1+1, n2-1), where
    it equals J*sqrt((n1+1)*n2).
    """
    (n1, n2), (m1, m2) = a, b
    if (m1, m2) == (n1 + 1, n2 - 1):
        return params.j * math.sqrt((n1 + 1) * n2)
    if (n1, n2) == (m1 + 1, m2 - 1):
        return params.j * math.sqrt((m1 + 1) * m2)
    return 0.0


@dataclass(frozen=True)
class LevelPair:
    """A pair of product levels with the quantities entering the rate formulas.

    ``detuning`` follows the convention Delta_ab = E(a) - E(b).
    """

    a: tuple
    b: tuple
    energy_a: float
    energy_b: float
    coupling: float
    detuning: float


def level_pair(params: DeviceParams, a, b) -> LevelPair:
    ea = bare_energy(params, *a)
    eb = bare_energy(params, *b)
    return LevelPair(a=a, b=b, energy_a=ea, energy_b=eb,
                     coupling=exchange_element(params, a, b),
                     detuning=ea - eb)


# ---------------------------------------------------------------------------
# Dense operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorMatrix:
    """Dense operator on the truncated product space with basis metadata."""

    entries: np.ndarray
    dims: tuple
    basis_tag: str
    name: str = ""

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None):
        return np.asarray(self.entries, dtype=dtype)

    def hermiticity_defect(self) -> float:
        """max |H - H^dag| relative to max |H|; 0 for exactly Hermitian."""
        scale = np.abs(self.entries).max() or 1.0
        return float(np.abs(self.entries - self.entries.conj().T).max() / scale)


def _check_dim(params: DeviceParams, max_dim: int):
    if params.dim > max_dim:
        raise DimensionError(
            f"Hilbert-space dimension {params.d1}x{params.d2}={params.dim} exceeds "
            f"the configured maximum {max_dim}")


def lowering_operator(params: DeviceParams, which: int) -> np.ndarray:
    """Annihilation operator of transmon 1 or 2 on the full product space."""
    if which not in (1, 2):
        raise ValueError(f"transmon index must be 1 or 2, got {which}")
    d = params.d1 if which == 1 else params.d2
    a = np.diag(np.sqrt(np.arange(1, d)), k=1).astype(complex)
    if which == 1:
        return np.kron(a, np.eye(params.d2, dtype=complex))
    return np.kron(np.eye(params.d1, dtype=complex), a)


def number_operator(params: DeviceParams, which: int) -> np.ndarray:
    d = params.d1 if which == 1 else params.d2
    n = np.diag(np.arange(d)).astype(complex)
    if which == 1:
        return np.kron(n, np.eye(params.d2, dtype=complex))
    return np.kron(np.eye(params.d1, dtype=complex), n)


def build_static_hamiltonian(params: DeviceParams, max_dim: int = MAX_HILBERT_DIM) -> OperatorMatrix:
    """Static Hamiltonian: Duffing ladders plus the exchange coupling.

    Built entry-wise from the bare energies and the exchange selection rule
    rather than by operator algebra, so it cross-checks independently against
    a ladder-operator construction.

    Returns
    -------
    OperatorMatrix
        Hermitian ``dim x dim`` matrix in the row-major product basis (rad/s).
    """
    _check_dim(params, max_dim)
    dim = params.dim
    h = np.zeros((dim, dim), dtype=complex)
    labels = params.labels()
    for i, (n1, n2) in enumerate(labels):
        h[i, i] = bare_energy(params, n1, n2)
        # exchange partner one swap up: (n1+1, n2-1)
        if n1 + 1 < params.d1 and n2 - 1 >= 0:
            k = params.index(n1 + 1, n2 - 1)
            g = params.j * math.sqrt((n1 + 1) * n2)
            h[i, k] = g
            h[k, i] = g
    return OperatorMatrix(entries=h, dims=(params.d1, params.d2),
                          basis_tag=params.basis_tag(), name="H_static")


def drive_operator(params: DeviceParams, port: str = "q2") -> OperatorMatrix:
    """Charge-drive operator (a + a')/2 for the chosen port.

    The drive Hamiltonian convention is H_d(t) = Omega(t) * (cos(phi) X +
    sin(phi) Y) with X = (a + a')/2 and Y = i(a - a')/2, so a resonant drive
    of constant amplitude Omega produces a 0<->1 Rabi rate of exactly Omega.
    ``port="both"`` drives the two transmons symmetrically (bus-like line).
    """
    if port not in ("q1", "q2", "both"):
        raise ValueError(f"unknown drive port {port!r}; expected q1, q2 or both")
    x = np.zeros((params.dim, params.dim), dtype=complex)
    if port in ("q1", "both"):
        a1 = lowering_operator(params, 1)
        x += 0.5 * (a1 + a1.conj().T)
    if port in ("q2", "both"):
        a2 = lowering_operator(params, 2)
        x += 0.5 * (a2 + a2.conj().T)
    return OperatorMatrix(entries=x, dims=(params.d1, params.d2),
                          basis_tag=params.basis_tag(), name=f"X_drive[{port}]")


def drive_quadratures(params: DeviceParams, port: str = "q2"):
    """(X, Y) quadrature operator pair for ``port`` (see drive_operator)."""
    if port not in ("q1", "q2", "both"):
        raise ValueError(f"unknown drive port {port!r}; expected q1, q2 or both")
    x = np.zeros((params.dim, params.dim), dtype=complex)
    y = np.zeros((params.dim, params.dim), dtype=complex)
    for which in (1, 2):
        if port in (f"q{which}", "both"):
            a = lowering_operator(params, which)
            x += 0.5 * (a + a.conj().T)
            y += 0.5j * (a - a.conj().T)
    return x, y


# ---------------------------------------------------------------------------
# Closed-form rate expressions
# ---------------------------------------------------------------------------

def splitting_xi(j_pair: float, delta_pair: float) -> float:
    """Level-repulsion shift of the upper |12>/|03> hybrid.

    xi = (sqrt(4 J_{12,03}^2 + Delta_{12,03}^2) + Delta_{12,03}) / 2

    with Delta_{12,03} = E(12) - E(03).  Equal to the shift of the upper
    dressed level above the bare |03> energy, for either sign of the
    detuning; the pair splits by 2*xi - Delta_{12,03}.
    """
    s = math.hypot(2.0 * j_pair, delta_pair)
    if delta_pair >= 0.0:
        return 0.5 * (s + delta_pair)
    # negative detuning cancels against the root; the conjugate form keeps
    # full relative accuracy when the pair is far from resonance
    return 2.0 * j_pair * j_pair / (s - delta_pair)


def zeta_static(params: DeviceParams) -> float:
    """Always-on conditional-phase rate zeta0 (rad/s).

    zeta0 = J_{11,20} J_{11,02} (1/Delta_{11,20} + 1/Delta_{11,02}),
    the second-order repulsion of |11> from the two-excitation levels it
    exchanges with.
    """
    p_20 = level_pair(params, (1, 1), (2, 0))
    p_02 = level_pair(params, (1, 1), (0, 2))
    return p_20.coupling * p_02.coupling * (1.0 / p_20.detuning + 1.0 / p_02.detuning)


def zeta_drive_coefficient(params: DeviceParams, omega_d: float) -> float:
    """Dimensionless coefficient zeta2 of the drive-activated rate.

    zeta2 = J_{12,03}^2 / (J_{12,03}^2 + Delta_d (omega_d - Delta_{03,11}))

    where Delta_d = Delta_{12,11} - omega_d.  Diverges when the drive hits a
    dressed |11> -> |12>/|03> transition.
    """
    pair = level_pair(params, (1, 2), (0, 3))
    delta_d = level_pair(params, (1, 2), (1, 1)).detuning - omega_d
    delta_03_11 = level_pair(params, (0, 3), (1, 1)).detuning
    den = pair.coupling ** 2 + delta_d * (omega_d - delta_03_11)
    return pair.coupling ** 2 / den


def zeta_perturbative(params: DeviceParams, omega_d: float, omega_amp: float,
                      resonance_floor: float = 100.0 * KHZ) -> float:
    """Perturbative conditional-phase rate zeta(omega_d, Omega) in rad/s.

    zeta = zeta0 + (Omega^2 / (2 Delta_d)) * zeta2.

    Raises
    ------
    ResonanceError
        When the drive sits within ``resonance_floor`` of a pole of the
        expression (Delta_d = 0 or the zeta2 denominator crossing zero).
    """
    delta_12_11 = level_pair(params, (1, 2), (1, 1)).detuning
    delta_03_11 = level_pair(params, (0, 3), (1, 1)).detuning
    delta_d = delta_12_11 - omega_d
    if abs(delta_d) < resonance_floor:
        raise ResonanceError(
            f"drive within {resonance_floor / KHZ:.1f} kHz (angular) of the bare "
            f"1->2 transition: |Delta_d| = {abs(delta_d) / MHZ:.4f} MHz")
    pair = level_pair(params, (1, 2), (0, 3))
    den = pair.coupling ** 2 + delta_d * (omega_d - delta_03_11)
    # Distance to the zeta2 pole in drive frequency is roughly
    # |den| / |d(den)/d(omega_d)| with d(den)/d(omega_d) = Delta_d + Delta_03d.
    slope = abs(delta_d + (delta_03_11 - omega_d)) + resonance_floor
    if abs(den) < resonance_floor * slope:
        raise ResonanceError(
            "drive within the resonance floor of a dressed |12>/|03> transition "
            f"(zeta2 denominator {den:.3e} rad^2/s^2)")
    zeta2 = pair.coupling ** 2 / den
    return zeta_static(params) + (omega_amp ** 2 / (2.0 * delta_d)) * zeta2


# ---------------------------------------------------------------------------
# Dressed (undriven) spectrum
# ---------------------------------------------------------------------------

def static_dressed_states(params: DeviceParams):
    """Diagonalize the static Hamiltonian and label eigenstates.

    Returns
    -------
    energies : dict mapping product label -> dressed energy (rad/s)
    vectors : dict mapping product label -> eigenvector
    overlaps : dict mapping product label -> squared overlap with the label

    Each eigenvector is assigned to the product label it overlaps most; with
    the weak exchange couplings used here the assignment is unambiguous
    except at engineered degeneracies, where a warning is emitted and the
    lower-energy branch takes the label.
    """
    h = build_static_hamiltonian(params).entries
    vals, vecs = np.linalg.eigh(h)
    labels = params.labels()
    energies, vectors, overlaps = {}, {}, {}
    claimed = set()
    # Assign eigenvectors in descending overlap order so strong identifications
    # win ties; eigh orders ascending in energy, so equal overlaps resolve to
    # the lower branch.
    weights = np.abs(vecs) ** 2  # weights[i, k] = |<label_i|eigvec_k>|^2
    order = np.argsort(weights.max(axis=0))[::-1]
    assignment = {}
    for k in order:
        rank = np.argsort(weights[:, k])[::-1]
        for i in rank:
            if i not in claimed:
                claimed.add(i)
                assignment[labels[i]] = k
                break
    label_to_row = {lab: i for i, lab in enumerate(labels)}
    for lab, k in assignment.items():
        i = label_to_row[lab]
        energies[lab] = float(vals[k])
        vectors[lab] = vecs[:, k]
        overlaps[lab] = float(weights[i, k])
    weak = [lab for lab, w in overlaps.items() if w <= 0.5]
    if weak:
        warnings.warn(f"ambiguous dressed-state labels (overlap <= 0.5): {weak}",
                      stacklevel=2)
    return energies, vectors, overlaps


def dressed_qubit_frequencies(params: DeviceParams):
    """Dressed 0->1 frequencies (rad/s) used as the logical qubit frames."""
    energies, _, _ = static_dressed_states(params)
    return (energies[(1, 0)] - energies[(0, 0)],
            energies[(0, 1)] - energies[(0, 0)])


@dataclass(frozen=True)
class MapConditionReport:
    """Bare and dressed quantities characterizing the MAP resonance condition."""

    delta_12_03: float          # bare E(12) - E(03)
    j_12_03: float              # exchange element between |12> and |03>
    xi: float                   # closed-form level-repulsion shift
    e_a: float                  # dressed E(02) - E(01): 1->2 transition, control in 0
    e_b: float                  # dressed E(12-like) - E(11): same transition, control in 1
    conditional_anharmonicity: float   # e_b - e_a
    trans_12_like: float        # dressed |11> -> |12>-like transition (rad/s)
    trans_03_like: float        # dressed |11> -> |03>-like transition (rad/s)
    zeta_static_exact: float    # dressed E11 - E01 - E10 + E00
    label_overlaps: dict = field(repr=False, default_factory=dict)


def map_condition_report(params: DeviceParams) -> MapConditionReport:
    """Characterize the |12>/|03> resonance that activates the gate.

    The two-level repulsion formula (``splitting_xi``) is reported alongside
    the exact diagonalization quantities: the conditional shift E_B - E_A of
    the driven transition and the dressed transition frequencies out of |11>
    that bound the leakage window.
    """
    if params.d1 < 2 or params.d2 < 4:
        raise ValueError(
            f"MAP condition needs levels (>=2, >=4), got ({params.d1}, {params.d2})")
    pair = level_pair(params, (1, 2), (0, 3))
    h = build_static_hamiltonian(params).entries
    vals, vecs = np.linalg.eigh(h)
    weights = np.abs(vecs) ** 2

    def _pick(label, exclude=()):
        i = params.index(*label)
        order = np.argsort(weights[i, :])[::-1]
        for k in order:
            if k not in exclude:
                return k
        raise RuntimeError("eigenvector assignment exhausted")

    k00 = _pick((0, 0))
    k01 = _pick((0, 1))
    k10 = _pick((1, 0))
    k11 = _pick((1, 1))
    k02 = _pick((0, 2))
    # 12-like and 03-like hybrids; at exact degeneracy the argsort tie resolves
    # to the lower-energy branch.
    k12 = _pick((1, 2))
    k03 = _pick((0, 3), exclude=(k12,))
    e = vals
    e_a = float(e[k02] - e[k01])
    e_b = float(e[k12] - e[k11])
    overlaps = {
        "12-like": float(weights[params.index(1, 2), k12]),
        "03-like": float(weights[params.index(0, 3), k03]),
    }
    return MapConditionReport(
        delta_12_03=pair.detuning,
        j_12_03=pair.coupling,
        xi=splitting_xi(pair.coupling, pair.detuning),
        e_a=e_a,
        e_b=e_b,
        conditional_anharmonicity=e_b - e_a,
        trans_12_like=float(e[k12] - e[k11]),
        trans_03_like=float(e[k03] - e[k11]),
        zeta_static_exact=float(e[k11] - e[k01] - e[k10] + e[k00]),
        label_overlaps=overlaps,
    )
