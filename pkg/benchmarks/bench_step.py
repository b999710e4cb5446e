"""Time the PDE stepping loop on the numba and numpy backends.

    python3 benchmarks/bench_step.py --steps 2000 --dz 1e-2

Both backends start from the same state; the script reports steps per second
and the largest difference between the two final profiles.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from hgtlab.kernels import ModelParams, growth, make_kernel
from hgtlab.pde import Grid1D, SimConfig, _numba_backend, _numpy_backend, init_state
from hgtlab.pde.operators import TRANSFER_CUTOFF, transfer_matrix


def bench(backend, u0, rho0, R, HT, cfg, steps, repeat):
    best = np.inf
    for _ in range(repeat):
        out = np.empty(steps)
        t0 = time.perf_counter()
        u, done, status, _, rho = backend.advance(
            u0, R, HT, cfg.params.tau, cfg.epsilon, cfg.dt, cfg.grid.dz, rho0, steps, 0.0, out, TRANSFER_CUTOFF
        )
        best = min(best, time.perf_counter() - t0)
    return u, rho, done, best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--dz", type=float, default=1e-2)
    ap.add_argument("--tau", type=float, default=0.5)
    ap.add_argument("--g", type=float, default=0.065)
    ap.add_argument("--epsilon", type=float, default=5e-5)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    cfg = SimConfig(
        ModelParams(args.tau, args.g, args.epsilon), make_kernel("tanh"), Grid1D(-2.0, 6.0, args.dz), dt=1e-4
    )
    st = init_state(cfg)
    z = cfg.grid.nodes
    R = growth(cfg.params.g, z)
    HT = transfer_matrix(z, cfg.kernel.H)

    # compile outside the timed region
    _numba_backend.advance(st.u, R, HT, args.tau, cfg.epsilon, cfg.dt, cfg.grid.dz, st.rho, 1, 0.0, np.empty(1))

    print(f"grid n_z={cfg.grid.n_z}, steps={args.steps}")
    results = {}
    for name, backend in (("numba", _numba_backend), ("numpy", _numpy_backend)):
        u, rho, done, t = bench(backend, st.u, st.rho, R, HT, cfg, args.steps, args.repeat)
        results[name] = (u, t)
        print(f"{name:6s} {t:8.3f} s  {done / t:10.0f} steps/s  rho={rho:.12g}")
    du = float(np.max(np.abs(results["numba"][0] - results["numpy"][0])))
    print(f"max |u_numba - u_numpy| = {du:.3e}")
    print(f"speedup {results['numpy'][1] / results['numba'][1]:.1f}x")


if __name__ == "__main__":
    main()
