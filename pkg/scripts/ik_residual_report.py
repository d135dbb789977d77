"""Forward-kinematics residuals of the two inverse-kinematics forms along the
polar tip profiles."""

import argparse
import json

import numpy as np

from flexbeam.trajectory import POLAR_KINDS, PolarReference, ik_residual_report


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--L1", type=float, default=0.195)
    p.add_argument("--L2", type=float, default=0.15)
    p.add_argument("--samples", type=int, default=4001)
    args = p.parse_args()
    report = {}
    for kind in POLAR_KINDS:
        pref = PolarReference(kind, args.L1, args.L2)
        t = np.linspace(0.0, 2 * pref.period, args.samples)
        report[kind] = ik_residual_report(pref, t)
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
