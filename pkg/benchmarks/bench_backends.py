"""Throughput comparison of the propagation-kernel backends.

Builds a realistic piecewise-constant chain (drive-frame Hamiltonian plus
ramped quadrature coefficients at the shipped operating point) and times the
compiled Cython kernel against the pure-NumPy fallback on the same inputs.

Run:  python3 benchmarks/bench_backends.py [--repeats N] [--steps ...]
"""

import argparse
import math
import time

import numpy as np

from mapgate import _kernel_py
from mapgate.calibration import SHIPPED_REFOCUSED, calibrated_device
from mapgate.dynamics import RotatingFrame, to_rotating_frame
from mapgate.model import drive_quadratures

try:
    from mapgate import _kernel
except ImportError:
    _kernel = None


def chain_inputs(n_steps, levels=(3, 5)):
    params = calibrated_device().replace(levels1=levels[0], levels2=levels[1])
    cal = SHIPPED_REFOCUSED
    frame = RotatingFrame.drive(cal.omega_d)
    h0 = to_rotating_frame(params, frame)[0].entries
    vx, vy = drive_quadratures(params, cal.port)
    t = np.linspace(0.0, cal.dt, n_steps)
    ramp = np.clip(t / cal.rise_fall, 0.0, 1.0) * np.clip(
        (cal.dt - t) / cal.rise_fall, 0.0, 1.0)
    x = cal.omega_amp * np.minimum(ramp, 1.0)
    y = np.zeros_like(x)
    dt = np.full(n_steps, cal.dt / n_steps)
    return h0, vx, vy, x, y, dt


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--steps", type=int, nargs="+",
                    default=[256, 1024, 4096])
    ap.add_argument("--levels", type=int, nargs=2, default=[3, 5],
                    metavar=("D1", "D2"))
    args = ap.parse_args()

    if _kernel is None:
        print("compiled kernel not built; timing the NumPy fallback only")
    header = f"{'steps':>6s} {'dim':>4s} {'python':>10s}"
    if _kernel is not None:
        header += f" {'compiled':>10s} {'speedup':>8s} {'max|dU|':>9s}"
    print(header)
    for n_steps in args.steps:
        inputs = chain_inputs(n_steps, tuple(args.levels))
        dim = inputs[0].shape[0]
        u_py = _kernel_py.propagate_chain(*inputs)
        t_py = best_of(lambda: _kernel_py.propagate_chain(*inputs),
                       args.repeats)
        row = f"{n_steps:6d} {dim:4d} {t_py * 1e3:9.2f}ms"
        if _kernel is not None:
            u_c = _kernel.propagate_chain(*inputs)
            t_c = best_of(lambda: _kernel.propagate_chain(*inputs),
                          args.repeats)
            defect = float(np.abs(u_c - u_py).max())
            row += f" {t_c * 1e3:9.2f}ms {t_py / t_c:7.2f}x {defect:9.2e}"
            if defect > 1e-10 * math.sqrt(n_steps):
                raise SystemExit(f"backend disagreement at {n_steps} steps: "
                                 f"{defect:.3e}")
        print(row)


if __name__ == "__main__":
    main()
