"""Independent reference implementations used to cross-check the package.

Everything in here is deliberately written a different way from the library
code: Hamiltonians via explicit Kronecker products of ladder matrices,
propagation via scipy's ODE integrator on the Schrodinger / Lindblad
equations, splittings via brute-force eigensolves.  Slow is fine.
"""

import numpy as np
from scipy.integrate import solve_ivp

TWOPI = 2.0 * np.pi


def ladder(n):
    return np.diag(np.sqrt(np.arange(1.0, n)), 1)


def kron_hamiltonian(w1, w2, d1, d2, j, n1, n2):
    """Duffing pair + exchange, built with kron (library builds entry-wise)."""
    a1, a2 = ladder(n1), ladder(n2)
    i1, i2 = np.eye(n1), np.eye(n2)
    num1, num2 = a1.T @ a1, a2.T @ a2
    return (w1 * np.kron(num1, i2)
            + w2 * np.kron(i1, num2)
            + 0.5 * d1 * np.kron(num1 @ (num1 - i1), i2)
            + 0.5 * d2 * np.kron(i1, num2 @ (num2 - i2))
            + j * (np.kron(a1.T, a2) + np.kron(a1, a2.T))).astype(complex)


def kron_drive(n1, n2, port):
    a1, a2 = ladder(n1), ladder(n2)
    i1, i2 = np.eye(n1), np.eye(n2)
    x1 = 0.5 * np.kron(a1 + a1.T, i2)
    x2 = 0.5 * np.kron(i1, a2 + a2.T)
    return {"q1": x1, "q2": x2, "both": x1 + x2}[port]


def splitting_two_level(delta, coupling):
    """Upper eigenvalue of [[delta, g], [g, 0]]; zero of energy = lower bare level."""
    return float(np.linalg.eigvalsh(np.array([[delta, coupling],
                                              [coupling, 0.0]]))[-1])


def ode_unitary(h_of_t, t_final, dim, rtol=1e-11, atol=1e-13):
    """Propagator from scipy's adaptive integrator, column by column."""
    def rhs(t, y):
        u = y.view(complex).reshape(dim, dim)
        return (-1j * h_of_t(t) @ u).reshape(-1).view(float)

    y0 = np.eye(dim, dtype=complex).reshape(-1).view(float).copy()
    sol = solve_ivp(rhs, (0.0, t_final), y0, rtol=rtol, atol=atol,
                    method="DOP853", dense_output=False)
    assert sol.success
    return sol.y[:, -1].view(complex).reshape(dim, dim)


def ode_lindblad(h, c_ops, rho0, t_final, rtol=1e-9, atol=1e-12):
    """Density-matrix evolution straight from the master equation."""
    dim = rho0.shape[0]

    def rhs(t, y):
        rho = y.view(complex).reshape(dim, dim)
        drho = -1j * (h @ rho - rho @ h)
        for c in c_ops:
            cd = c.conj().T
            drho += c @ rho @ cd - 0.5 * (cd @ c @ rho + rho @ cd @ c)
        return drho.reshape(-1).view(float)

    y0 = rho0.astype(complex).reshape(-1).view(float).copy()
    sol = solve_ivp(rhs, (0.0, t_final), y0, rtol=rtol, atol=atol,
                    method="DOP853")
    assert sol.success
    return sol.y[:, -1].view(complex).reshape(dim, dim)


def rabi_two_level(omega, detuning, t):
    """Excited-state population for a square drive starting from ground."""
    weff = np.hypot(omega, detuning)
    if weff == 0.0:
        return 0.0
    return (omega / weff) ** 2 * np.sin(0.5 * weff * t) ** 2


def second_order_shift(h_full, k):
    """Textbook second-order perturbative energy of bare level k."""
    h0 = np.real(np.diag(h_full))
    e = h0[k]
    for m in range(len(h0)):
        if m == k:
            continue
        v = h_full[k, m]
        if v != 0.0:
            e += abs(v) ** 2 / (h0[k] - h0[m])
    return e
