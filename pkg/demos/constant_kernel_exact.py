"""Constant kernel against its closed-form solution.

With a unit rate and exponential initial data the density stays exponential,
a(t)^2 exp(-a(t) zeta) with a(t) = 2 / (2 + t).  This script integrates the
conservative truncation on 400 geometric cells and prints the L1 error and
the number of particles next to the exact values.

    python demos/constant_kernel_exact.py
"""
import numpy as np

from smoluchowski import grid as G
from smoluchowski import kernels as K
from smoluchowski import oracle as O
from smoluchowski.solver import RunConfig, run


def main() -> None:
    cfg = RunConfig(K.constant(), K.TruncationParams(1e3, 1), 1e-4, 1e3, 400,
                    G.exponential_density(), T=2.0, dt=1e-3, snapshots=[0.5, 1.0, 1.5, 2.0])
    traj = run(cfg)
    print(f"{'t':>5} {'M0':>10} {'M0 exact':>10} {'L1 error':>10} {'M1 drift':>10}")
    M1_0 = traj.moments[0, 3]
    for snap in traj.snapshots:
        t = snap.time
        exact = O.constant_kernel_cell_averages(traj.grid, t)
        err = O.l1_distance(snap.values, exact, traj.grid)
        m1 = float(snap.numbers @ traj.grid.pivots)
        print(f"{t:5.2f} {snap.numbers.sum():10.6f} {2 / (2 + t):10.6f} {err:10.2e} "
              f"{abs(m1 - M1_0) / M1_0:10.1e}")
    x = traj.grid.pivots
    last = traj.snapshots[-1]
    i = int(np.searchsorted(x, 1.0))
    print(f"g(zeta={x[i]:.4f}, t=2): computed {last.values[i]:.6f}, "
          f"exact {O.constant_kernel_exact(x[i], 2.0):.6f}")


if __name__ == "__main__":
    main()
