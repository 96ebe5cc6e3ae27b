"""Conservative versus non-conservative truncation as n grows.

For the Brownian kernel both truncations should approach the same weak
solution.  The study runs both modes for n in {10, 100, 1000} on a shared
grid and time step and reports the L1 distance between them at T = 1.
Set SMOLUCHOWSKI_THREADS to run the six integrations in parallel.

    python demos/truncation_study.py
"""
from pathlib import Path

from smoluchowski.config import load_config
from smoluchowski.study import convergence_study


def main() -> None:
    spec = load_config(Path(__file__).parent / "configs" / "smoluchowski_theta1.toml")
    report = convergence_study(spec, spec.study_n)
    print(report.format_table())
    print("distance strictly decreasing:", report.decreasing)


if __name__ == "__main__":
    main()
