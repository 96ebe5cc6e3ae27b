"""A priori bounds with explicit constants on a Brownian-kernel run.

Builds the two convex weights from the initial state, evaluates the growth
constants and compares them with what the trajectory actually does.  The
constants are enormous compared with the observed values; the point is that
every one of them is finite and respected.

    python demos/bounds_report.py
"""
from smoluchowski import diagnostics as D
from smoluchowski import grid as G
from smoluchowski import kernels as K
from smoluchowski.convex import build_vallee_poussin, check_weight_properties
from smoluchowski.solver import RunConfig, run


def main() -> None:
    cfg = RunConfig(K.smoluchowski(), K.TruncationParams(1e3, 1), 1e-4, 1e3, 200,
                    G.exponential_density(), T=1.0, dt=2e-3, snapshots=50)
    traj = run(cfg)
    init = traj.snapshots[0]
    s1 = build_vallee_poussin(init, "sigma1")
    s2 = build_vallee_poussin(init, "sigma2", beta=traj.beta)
    for w in (s1, s2):
        print(f"{w.name}: property suite {check_weight_properties(w).all}")
    report = D.check_apriori_bounds(traj, (s1, s2), lam=2.0)
    print(report.format_table())
    print("all bounds hold:", report.passed)


if __name__ == "__main__":
    main()
