"""Compare VT-NMPC with the position-tracking baseline on the full V100 inspection.

Both controllers fly the same plan under the same sinusoidal wind. A full
run takes a few minutes per controller; ``--duration`` caps the simulated
time for a quick look.
Run with ``python3 demos/wind_comparison.py [--wind 4] [--duration 60]``.
"""

from __future__ import annotations

import argparse

from windinspect.dynamics import WindModel
from windinspect.simulator import ScenarioConfig, run_comparison


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--wind", type=float, default=4.0, help="mean wind speed in m/s")
    parser.add_argument("--duration", type=float, default=None, help="cap on simulated time in s")
    args = parser.parse_args()

    config = ScenarioConfig(wind=WindModel(mean_speed=args.wind), duration=args.duration)
    result = run_comparison(config)
    print(f"mean wind {args.wind} m/s, d_ref {config.visual.d_ref} m, margin {config.safety_margin} m")
    print(result.table())
    for name, log in result.logs.items():
        sweep = log.on_sweep
        print(f"{name}: {len(log)} steps, worst |d - d_ref| on sweeps "
              f"{abs(log.d[sweep] - config.visual.d_ref).max():.3f} m")


if __name__ == "__main__":
    main()
