"""Simulated state and process tomography of the MAP gate.

Fixed conventions, shared with the CSV exports:

- Two-qubit Pauli basis {II, IX, ..., ZZ}: I, X, Y, Z lexicographic per
  qubit, transmon 1 in the left slot, flat index 4*i + j.
- Pauli transfer matrix: R[i, j] = Tr(P_i L(P_j)) / 4, so Pauli vectors
  s_i = Tr(P_i rho) evolve as s_out = R s_in.
- Choi state: rho_J = (L x I)(|Phi+><Phi+|) with the output factor first,
  normalized to trace 1; a trace-preserving map has Tr_out(rho_J) = I/4.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .calibration import GateCalibration, target_unitary, virtual_z_phases
from .dynamics import (PulseSequence, computational_indices,
                       frame_phase_unitary, propagate_lindblad)
from .errors import ToleranceError
from .model import DeviceParams, dressed_qubit_frequencies
from .protocols import gate_logical_block, gate_unitary

_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
PAULI_LABELS = [a + b for a in "IXYZ" for b in "IXYZ"]
PAULIS = [np.kron(_1Q[l[0]], _1Q[l[1]]) for l in PAULI_LABELS]


def pauli_vector(rho) -> np.ndarray:
    """16 expectation values Tr(P_i rho), II first."""
    return np.array([np.trace(p @ rho).real for p in PAULIS])


def rho_from_pauli_vector(vec) -> np.ndarray:
    rho = np.zeros((4, 4), dtype=complex)
    for c, p in zip(vec, PAULIS):
        rho += c * p
    return rho / 4.0


# ---------------------------------------------------------------------------
# Preparations
# ---------------------------------------------------------------------------

def _rot(axis, angle):
    c, s = math.cos(0.5 * angle), math.sin(0.5 * angle)
    return c * _1Q["I"] - 1j * s * _1Q[axis]


_PREPS = {
    "I": _1Q["I"],
    "Xpi": _rot("X", math.pi),
    "X+": _rot("X", math.pi / 2),
    "X-": _rot("X", -math.pi / 2),
    "Y+": _rot("Y", math.pi / 2),
    "Y-": _rot("Y", -math.pi / 2),
}


@dataclass
class PreparedState:
    label: tuple                        # (prep on q1, prep on q2)
    ket: np.ndarray                     # 4-vector on the qubit subspace

    @property
    def rho(self) -> np.ndarray:
        return np.outer(self.ket, self.ket.conj())


def prepare_input_states():
    """The 36 product preparations {I, Xpi, X+-, Y+-} x {same} from |00>.

    Informationally overcomplete: the Gram matrix of the vectorized density
    matrices has full rank 16.
    """
    ground = np.array([1.0, 0.0], dtype=complex)
    out = []
    for l1, u1 in _PREPS.items():
        for l2, u2 in _PREPS.items():
            out.append(PreparedState(label=(l1, l2),
                                     ket=np.kron(u1 @ ground, u2 @ ground)))
    return out


# ---------------------------------------------------------------------------
# State tomography
# ---------------------------------------------------------------------------

@dataclass
class StateTomographyResult:
    rho: np.ndarray                     # linear-inversion estimate, 4x4
    leakage: float                      # population outside the qubit box
    expectations: np.ndarray            # the 16 (sampled) Pauli values


def state_tomography(rho_true, shots=None, *, rng=None, leak_threshold=0.05,
                     params: DeviceParams | None = None,
                     project=False) -> StateTomographyResult:
    """Two-qubit state estimate from the 15 non-trivial Pauli expectations.

    Accepts a 4x4 density matrix on the qubit subspace (trace below one is
    interpreted as leakage) or a full-device matrix together with
    ``params``.  The qubit block is renormalized before measurement and the
    leakage mass is reported; above ``leak_threshold`` a warning is issued.
    With ``shots`` each expectation is sampled binomially.  ``project``
    clips negative eigenvalues of the estimate (useful with few shots;
    process-level physicality is handled elsewhere).
    """
    rho_true = np.asarray(rho_true, dtype=complex)
    if rho_true.shape != (4, 4):
        if params is None:
            raise ValueError("full-device density matrix needs params")
        comp = computational_indices(params)
        rho_true = rho_true[np.ix_(comp, comp)]
    tr = float(np.trace(rho_true).real)
    leak = 1.0 - tr
    if leak > leak_threshold:
        warnings.warn(f"leakage mass {leak:.4f} above {leak_threshold}; "
                      "tomography proceeds on the renormalized qubit "
                      "subspace", stacklevel=2)
    if tr <= 0.0:
        raise ValueError("no population left in the qubit subspace")
    rho = rho_true / tr
    expect = pauli_vector(rho)
    if shots is not None:
        if rng is None:
            raise ValueError("finite shots require an rng")
        p = np.clip(0.5 * (1.0 + expect[1:]), 0.0, 1.0)
        expect[1:] = 2.0 * rng.binomial(int(shots), p) / float(shots) - 1.0
    expect[0] = 1.0
    rho_est = rho_from_pauli_vector(expect)
    if project:
        w, v = np.linalg.eigh(rho_est)
        w = np.clip(w, 0.0, None)
        rho_est = (v * w) @ v.conj().T
        rho_est /= np.trace(rho_est).real
    return StateTomographyResult(rho=rho_est, leakage=max(leak, 0.0),
                                 expectations=expect)


# ---------------------------------------------------------------------------
# PTM / Choi machinery
# ---------------------------------------------------------------------------

def ptm_of_unitary(u4) -> np.ndarray:
    """PTM of conjugation by a 4x4 computational-space unitary."""
    u4 = np.asarray(u4, dtype=complex)
    r = np.empty((16, 16))
    for j, pj in enumerate(PAULIS):
        img = u4 @ pj @ u4.conj().T
        for i, pi in enumerate(PAULIS):
            r[i, j] = np.trace(pi @ img).real / 4.0
    return r


def ideal_ptm(*, echoed=True) -> np.ndarray:
    return ptm_of_unitary(target_unitary(echoed=echoed))


def apply_ptm(r, rho) -> np.ndarray:
    return rho_from_pauli_vector(r @ pauli_vector(rho))


def ptm_linear_inversion(inputs, outputs) -> np.ndarray:
    """Least-squares PTM from (true input, estimated output) state pairs.

    Solves min_R sum_k ||p_out_k - R p_in_k||^2; exact when the outputs are
    noiseless images of a linear map and the input frame spans operator
    space.  Raises on a rank-deficient frame, naming the missing Pauli
    directions.
    """
    p_in = np.column_stack([pauli_vector(np.asarray(r)) for r in inputs])
    p_out = np.column_stack([pauli_vector(np.asarray(r)) for r in outputs])
    gram = p_in @ p_in.T
    w, v = np.linalg.eigh(gram)
    bad = w < 1e-10 * w.max()
    if np.any(bad):
        missing = [PAULI_LABELS[int(np.argmax(np.abs(v[:, k])))]
                   for k in np.nonzero(bad)[0]]
        raise ValueError(
            f"input frame is rank deficient; unconstrained directions near "
            f"{sorted(set(missing))}")
    return p_out @ p_in.T @ np.linalg.inv(gram)


def choi_from_ptm(r) -> np.ndarray:
    """Trace-normalized Choi state of the map with PTM r (output slot
    first)."""
    j = np.zeros((16, 16), dtype=complex)
    for i, pi in enumerate(PAULIS):
        for k, pk in enumerate(PAULIS):
            if r[i, k] != 0.0:
                j += r[i, k] * np.kron(pi, pk.T)
    return j / 16.0


def ptm_from_choi(j) -> np.ndarray:
    r = np.empty((16, 16))
    for i, pi in enumerate(PAULIS):
        for k, pk in enumerate(PAULIS):
            r[i, k] = np.trace(j @ np.kron(pi, pk.T)).real
    return r


def _project_tp(j):
    # orthogonal projection onto {J : Tr_out J = I/4}
    part = np.trace(j.reshape(4, 4, 4, 4), axis1=0, axis2=2)
    corr = part - np.eye(4) / 4.0
    return j - 0.25 * np.kron(np.eye(4), corr)


def _project_psd(j):
    w, v = np.linalg.eigh(0.5 * (j + j.conj().T))
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T


def physicality_projection(r_raw, *, tol=1e-9, max_iter=20000):
    """Alternating projections of the raw Choi matrix onto PSD and TP sets.

    Returns (r_phys, choi_phys, eta) where eta is the sum of the negative
    raw-Choi eigenvalues (a physicality deficit diagnostic, <= 0) computed
    before any projection.  Iterates PSD -> TP until the Frobenius
    increment per cycle drops below ``tol``.
    """
    j = choi_from_ptm(np.asarray(r_raw, dtype=float))
    j = 0.5 * (j + j.conj().T)
    eigs = np.linalg.eigvalsh(j)
    eta = float(np.minimum(eigs, 0.0).sum())
    for _ in range(max_iter):
        j_next = _project_tp(_project_psd(j))
        inc = float(np.linalg.norm(j_next - j))
        j = j_next
        if inc < tol:
            break
    else:
        raise ToleranceError(
            f"CPTP projection stalled: Frobenius increment {inc:.2e} after "
            f"{max_iter} cycles")
    return ptm_from_choi(j), j, eta


@dataclass
class FidelityPair:
    average: float                      # (Tr(R_ideal^T R) + 4) / 20
    process: float                      # Tr(R_ideal^T R) / 16


def gate_fidelity(r, r_ideal) -> FidelityPair:
    """Average gate fidelity and process fidelity between two PTMs.

    Both numbers are reported because published gate fidelities do not
    always state the convention; they are related by
    F_avg = (4 F_pro + 1) / 5 for trace-preserving maps.
    """
    tr = float(np.trace(np.asarray(r_ideal).T @ np.asarray(r)))
    return FidelityPair(average=(tr + 4.0) / 20.0, process=tr / 16.0)


# ---------------------------------------------------------------------------
# End-to-end pipeline
# ---------------------------------------------------------------------------

@dataclass
class ProcessResult:
    r_raw: np.ndarray
    r_phys: np.ndarray
    choi: np.ndarray                    # projected (physical) Choi state
    eta: float                          # negative raw-Choi eigenvalue mass
    f_raw: float                        # average gate fidelity, raw PTM
    f_proj: float                       # same after CPTP projection
    process_f_raw: float
    process_f_proj: float
    leakage: float                      # worst prep's readout leakage mass
    leakage_per_prep: np.ndarray = field(repr=False, default=None)
    prep_labels: list = field(repr=False, default_factory=list)
    shots: int | None = None
    total_time: float | None = None


def _has_noise(params: DeviceParams) -> bool:
    return any(t is not None for t in (params.t1_1, params.t1_2,
                                       params.t2_1, params.t2_2))


def _vz_angles(vz, gate):
    if isinstance(vz, str):
        if vz != "frozen":
            raise ValueError(f"unknown vz mode {vz!r}")
        return gate.virtual_z if isinstance(gate, GateCalibration) else (0.0,
                                                                         0.0)
    if vz is None:
        return (0.0, 0.0)
    return tuple(vz)


def qpt_pipeline(params: DeviceParams, gate, *, shots=None, rng=None,
                 vz="frozen", echoed=None, tol=1e-6, leak_threshold=0.05,
                 proj_tol=1e-9) -> ProcessResult:
    """Full simulated process tomography of a two-qubit gate.

    ``gate`` is one of:

    - GateCalibration: propagated exactly (closed system) or through the
      Lindblad engine when the device carries T1/T2 times; the stored
      virtual-Z angles are applied before the gate (``vz="frozen"``).
    - PulseSequence: propagated through the Lindblad engine (collapse
      operators appear only if the device sets noise times).
    - 4x4 ndarray: instantaneous unitary on the qubit subspace, no
      propagation; useful as an all-software reference.

    The 36 preparations are ideal; readout is an ideal Pauli measurement,
    binomially sampled when ``shots`` is set.  Output states are projected
    onto the qubit subspace with the leakage mass recorded per prep.
    """
    preps = prepare_input_states()
    angles = _vz_angles(vz, gate)
    w4 = virtual_z_phases(*angles)

    if isinstance(gate, np.ndarray):
        if gate.shape != (4, 4):
            raise ValueError("unitary gate input must act on the qubit "
                             "subspace (4x4)")
        if echoed is None:
            echoed = True
        outs = [np.outer(g, g.conj())
                for g in (gate @ (w4 * p.ket) for p in preps)]
        total_time = None
    elif isinstance(gate, GateCalibration):
        if echoed is None:
            echoed = gate.echoed
        total_time = gate.t_total
        outs = _propagate_preps(params, gate, preps, w4, tol)
    elif isinstance(gate, PulseSequence):
        if echoed is None:
            echoed = True
        outs, total_time = _propagate_sequence(params, gate, preps, w4, tol)
    else:
        raise TypeError(f"cannot interpret gate of type {type(gate)!r}")

    estimates, leaks = [], []
    for rho in outs:
        st = state_tomography(rho, shots, rng=rng,
                              leak_threshold=leak_threshold)
        estimates.append(st.rho)
        leaks.append(st.leakage)
    r_raw = ptm_linear_inversion([p.rho for p in preps], estimates)
    r_phys, choi, eta = physicality_projection(r_raw, tol=proj_tol)
    ref = ideal_ptm(echoed=echoed)
    raw = gate_fidelity(r_raw, ref)
    proj = gate_fidelity(r_phys, ref)
    leaks = np.asarray(leaks)
    return ProcessResult(r_raw=r_raw, r_phys=r_phys, choi=choi, eta=eta,
                         f_raw=raw.average, f_proj=proj.average,
                         process_f_raw=raw.process,
                         process_f_proj=proj.process,
                         leakage=float(leaks.max()),
                         leakage_per_prep=leaks,
                         prep_labels=[p.label for p in preps], shots=shots,
                         total_time=total_time)


def _embed(params, ket4):
    psi = np.zeros(params.dim, dtype=complex)
    psi[computational_indices(params)] = ket4
    return psi


def _propagate_preps(params, cal: GateCalibration, preps, w4, tol):
    comp = computational_indices(params)
    if _has_noise(params):
        res = propagate_lindblad(params, cal.sequence(), tol=tol)
        logical = dressed_qubit_frequencies(params)
        d = frame_phase_unitary(params, res.frame, logical, res.total_time)
        outs = []
        for p in preps:
            psi = _embed(params, w4 * p.ket)
            rho = np.outer(psi, psi.conj())
            rho_t = (res.superop @ rho.reshape(-1)).reshape(params.dim,
                                                            params.dim)
            rho_l = d @ rho_t @ d.conj().T
            outs.append(rho_l[np.ix_(comp, comp)])
        return outs
    fam = cal.family(params, tol=min(tol, 1e-8))
    u = gate_unitary(fam, cal.dt, echoed=cal.echoed)
    d = frame_phase_unitary(params, fam.frame, fam.logical, cal.t_total)
    u = d @ u
    outs = []
    for p in preps:
        out = (u @ _embed(params, w4 * p.ket))[comp]
        outs.append(np.outer(out, out.conj()))
    return outs


def _propagate_sequence(params, seq: PulseSequence, preps, w4, tol):
    comp = computational_indices(params)
    res = propagate_lindblad(params, seq, tol=tol)
    logical = dressed_qubit_frequencies(params)
    d = frame_phase_unitary(params, res.frame, logical, res.total_time)
    outs = []
    for p in preps:
        psi = _embed(params, w4 * p.ket)
        rho = np.outer(psi, psi.conj())
        rho_t = (res.superop @ rho.reshape(-1)).reshape(params.dim,
                                                        params.dim)
        rho_l = d @ rho_t @ d.conj().T
        outs.append(rho_l[np.ix_(comp, comp)])
    return outs, res.total_time
