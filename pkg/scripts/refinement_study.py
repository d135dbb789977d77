"""Grid-refinement study: kernel residuals, transform round trip, law
equivalence and the wave-equation oracle, with observed orders."""

import argparse
import json

import numpy as np

from flexbeam.acceptance import (check_equivalence, check_kernels, check_transform,
                                 check_wave_oracle, run_check)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--fast", action="store_true", help="one grid level coarser")
    p.add_argument("--out", help="write the details as JSON")
    args = p.parse_args()
    report = {}
    for fn in (check_kernels, check_transform, check_equivalence, check_wave_oracle):
        r = run_check(fn, args.fast)
        print(r.line())
        report[fn.__name__] = r.detail
    for name, det in report["check_kernels"].items():
        if "orders" in det:
            print(f"  {name}: " + ", ".join(f"{k} {np.round(v, 2).tolist()}"
                                            for k, v in det["orders"].items()))
    print(f"  transform order {report['check_transform']['fitted_order']:.2f}")
    print(f"  equivalence max_rel {report['check_equivalence']['max_rel']}")
    print(f"  wave oracle orders {np.round(report['check_wave_oracle']['orders'], 2).tolist()}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2, default=str)


if __name__ == "__main__":
    main()
