"""Backstepping output feedback against LQR plus feedforward on the three
joint references; prints the tip and joint-error statistics."""

import argparse

from flexbeam.acceptance import TRACKING_TIME_SCALE
from flexbeam.harness import Scenario, event_settling_times, event_segment, export, run_scenario


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--horizon", type=float, default=16.0)
    p.add_argument("--time-scale", type=float, default=TRACKING_TIME_SCALE)
    p.add_argument("--out", default="flexbeam_out/baseline")
    args = p.parse_args()
    print(f"{'reference':9s} {'controller':16s} {'tip RMSE':>9s} {'tip ME':>8s} "
          f"{'dtheta RMSE':>11s} {'settle[s]':>9s}")
    for ref in ("sinusoid", "square", "sawtooth"):
        for ctrl in ("backstepping-of", "lqr-ff"):
            sc = Scenario(controller=ctrl, reference=ref, n=args.n, horizon=args.horizon,
                          time_scale=args.time_scale, record_every=10)
            res = run_scenario(sc)
            export(res, f"{args.out}/{ref}/{ctrl}")
            link = res.summary["links"][0]
            s = res.links[0]
            st = event_settling_times(s["t_sec"], s["w_tip"], res.events,
                                      event_segment(res.events, args.horizon))
            settle = f"{st.mean():9.3f}" if st.size else f"{'-':>9s}"
            print(f"{ref:9s} {ctrl:16s} {link['probes']['0']['RMSE']:9.4f} "
                  f"{link['probes']['0']['ME']:8.4f} {link['dtheta']['RMSE']:11.4f} {settle}")


if __name__ == "__main__":
    main()
