"""State-feedback decay for several damping values, and observer convergence
under each controller."""

import argparse

import numpy as np

from flexbeam.acceptance import DECAY_TIME_SCALE, TRACKING_TIME_SCALE
from flexbeam.harness import Scenario, export, run_scenario


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--c-acute", default="0.1,0.3,0.5")
    p.add_argument("--out", default="flexbeam_out/stability")
    args = p.parse_args()

    print("c_acute  t_stop  rate    r2")
    for c in (float(v) for v in args.c_acute.split(",")):
        sc = Scenario(controller="backstepping-sf", c_acute=c, initial="smooth", n=args.n,
                      horizon=60.0, time_scale=DECAY_TIME_SCALE, stop_below=1e-8,  # t_stop: time omega0 fell by 1e-8
                      lyapunov_every=50)
        res = run_scenario(sc)
        export(res, f"{args.out}/decay_c{c:g}")
        fit = res.summary["links"][0]["decay"]["omega0"]
        print(f"{c:7.2f}  {res.links[0]['t'][-1]:6.2f}  {fit['rate']:.3f}  {fit['r2']:.6f}")

    print("\ncontroller        omega_e(T)/omega_e(0)")
    ref = None
    for ctrl in ("backstepping-sf", "lqr-ff", "backstepping-of"):
        sc = Scenario(controller=ctrl, reference="sinusoid", initial="smooth",
                      n=min(args.n, 128), horizon=2.0, time_scale=TRACKING_TIME_SCALE,
                      observer=True)
        res = run_scenario(sc)
        export(res, f"{args.out}/observer_{ctrl}")
        oe = res.links[0]["omega_e"]
        ref = oe if ref is None else ref
        print(f"{ctrl:16s}  {oe[-1] / oe[0]:.3e}  (max diff vs first: "
              f"{np.abs(oe - ref).max() / ref[0]:.1e})")


if __name__ == "__main__":
    main()
