"""Pure-NumPy propagation kernel (fallback for the compiled extension).

Computes ordered products of matrix exponentials of piecewise-constant
Hermitian Hamiltonians.  Eigendecompositions are batched per chunk to keep
NumPy call overhead off the hot path; the ordered accumulation itself is
inherently sequential.
"""

import numpy as np


def propagate_chain(h0, vx, vy, x, y, dt, u0=None, chunk=512):
    """Ordered product of step propagators.

    U = exp(-i H_m dt_m) ... exp(-i H_1 dt_1) @ u0,
    with H_j = h0 + x[j] vx + y[j] vy (each Hermitian).

    Parameters
    ----------
    h0, vx, vy : (n, n) complex Hermitian arrays
    x, y : (m,) float coefficient samples
    dt : (m,) float step durations (seconds)
    u0 : optional (n, n) initial propagator; identity when omitted

    Returns
    -------
    (n, n) complex ndarray
    """
    h0 = np.asarray(h0, dtype=complex)
    vx = np.asarray(vx, dtype=complex)
    vy = np.asarray(vy, dtype=complex)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dt = np.asarray(dt, dtype=float)
    n = h0.shape[0]
    u = np.eye(n, dtype=complex) if u0 is None else np.array(u0, dtype=complex)
    m = x.shape[0]
    for s in range(0, m, chunk):
        e = min(s + chunk, m)
        hs = h0 + x[s:e, None, None] * vx + y[s:e, None, None] * vy
        w, v = np.linalg.eigh(hs)
        phases = np.exp(-1j * w * dt[s:e, None])
        steps = (v * phases[:, None, :]) @ v.conj().swapaxes(-1, -2)
        for k in range(e - s):
            u = steps[k] @ u
    return u
