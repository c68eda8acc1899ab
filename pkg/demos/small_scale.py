"""Inspect the lab-scale blade with VT-NMPC.

One blade scaled by 1/10 in thickness and width and 1/15 in length, a
0.5 m reference distance and a 0.1 m safety band.
Run with ``python3 demos/small_scale.py [--wind 4]``.
"""

from __future__ import annotations

import argparse
from dataclasses import replace

from windinspect.config import LAB_SCALE, preset
from windinspect.simulator import evaluate_log, run_scenario


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--wind", type=float, default=None, help="mean wind speed in m/s (preset default if unset)")
    args = parser.parse_args()

    config = preset(LAB_SCALE)
    if args.wind is not None:
        config = replace(config, wind=replace(config.wind, mean_speed=args.wind))
    log = run_scenario(config)
    report = evaluate_log(log, config)
    print(f"blade {config.turbine.blade_length:.3f} m x {config.turbine.blade_width:.2f} m, "
          f"wind {config.wind.mean_speed} m/s, {len(log)} steps, status {log.status}")
    print(f"coverage {report.coverage:.1f} %  SM {report.sm:.1f} %  CM {report.cm_mean:.4f}  "
          f"d mean {report.d_mean:.3f} m  [{report.d_min:.3f}, {report.d_max:.3f}]")


if __name__ == "__main__":
    main()
