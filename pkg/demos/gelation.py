"""Gelation under the multiplicative kernel.

The second moment of the untruncated problem blows up at T_g = 1 / M2(0),
which is 0.5 for exponential data.  The non-conservative truncation removes
every pair whose merged volume would exceed n, so mass leaves the system once
the gel forms; the loss ledger makes the onset visible.

    python demos/gelation.py
"""
import numpy as np

from smoluchowski import grid as G
from smoluchowski import kernels as K
from smoluchowski import oracle as O
from smoluchowski.solver import RunConfig, run


def main() -> None:
    cfg = RunConfig(K.multiplicative(), K.TruncationParams(1e3, 0), 1e-3, 1e3, 240,
                    G.exponential_density(), T=1.0, dt=1e-3, snapshots=10)
    traj = run(cfg)
    M0_0, M1_0, M2_0 = traj.moments[0, 2:5]
    print(f"predicted gelation time 1/M2(0) = {O.gelation_time(M2_0):.4f}")
    for th in (1e-4, 1e-3, 1e-2, 1e-1):
        print(f"  loss exceeds {th:g} of the mass at t = {O.gelation_time_estimate(traj, th):.4f}")
    print(f"{'t':>5} {'M1':>9} {'loss':>9} {'M2':>10} {'M2 pre-gel':>10}")
    for t in np.arange(0.0, 1.01, 0.1):
        j = int(np.argmin(np.abs(traj.times - t)))
        M1, M2 = traj.moments[j, 3], traj.moments[j, 4]
        ref = f"{M2_0 / (1 - M2_0 * t):10.4f}" if t < 1 / M2_0 else f"{'-':>10}"
        print(f"{t:5.2f} {M1:9.5f} {traj.loss[j]:9.5f} {M2:10.4f} {ref}")
    print(f"ledger error max |M1 + loss - M1(0)| = {np.max(np.abs(traj.moments[:, 3] + traj.loss - M1_0)):.1e}")


if __name__ == "__main__":
    main()
