"""Command-line entry point: ``flexbeam <command> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .gains import compute_observer_gains, place_state_gain, synthesize_feedback
from .harness import (CONTROLLERS, Scenario, default_out_dir, export, load_scenario,
                      run_scenario)
from .kernels import (DEFAULT_N, DEFAULT_TOL, dump_kernels_csv, kernel_residual,
                      solve_control_kernels, solve_inverse_kernels, solve_observer_kernels)
from .params import bundled_config, load_params, nondimensionalize


def _load(link: str):
    path = Path(link)
    if not (path.suffix == ".json" and path.exists()):
        path = bundled_config(link)
    phys = load_params(path)
    return phys, nondimensionalize(phys)


def _poles(text: str | None):
    if text is None:
        return None
    return tuple(float(v) for v in text.split(","))


def cmd_params_show(args) -> int:
    phys, dp = _load(args.link)
    dims = {f.name: getattr(dp, f.name) for f in dataclasses.fields(dp)}
    dims["sqrt_eps"] = dp.sqrt_eps
    print(json.dumps({"physical": phys.to_dict(), "dimensionless": dims}, indent=2))
    return 0


def cmd_kernels_solve(args) -> int:
    _, dp = _load(args.link)
    K = place_state_gain(dp, _poles(args.poles) or (-2.0, -2.5))
    ck = solve_control_kernels(dp, K, args.n, args.tol)
    ik = solve_inverse_kernels(ck, dp)
    ok = solve_observer_kernels(dp, args.n, args.tol)
    paths = dump_kernels_csv(args.out, k=ck.k, l=ck.l, gamma=ck.gamma, lam=ik.lam,
                             rho=ik.rho, sigma=ik.sigma, psi=ok.psi, phi=ok.phi)
    report = {"control": kernel_residual(ck, dp), "observer": kernel_residual(ok, dp),
              "iterations": {"control": ck.iterations, "observer": ok.iterations}}
    (Path(args.out) / "residuals.json").write_text(json.dumps(report, indent=2) + "\n")
    print(json.dumps(report, indent=2))
    print(f"wrote {len(paths)} kernel files to {args.out}")
    return 0


def cmd_gains_synth(args) -> int:
    _, dp = _load(args.link)
    K = place_state_gain(dp, _poles(args.poles) or (-2.0, -2.5))
    ck = solve_control_kernels(dp, K, args.n, args.tol)
    ik = solve_inverse_kernels(ck, dp)
    g = synthesize_feedback(ck, ik, dp, args.c_acute)
    ok = solve_observer_kernels(dp, args.n, args.tol)
    og = compute_observer_gains(ok, dp, _poles(args.observer_poles) or (-6.0, -7.5))
    doc = {"feedback": g.to_dict(), "observer": og.to_dict()}
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _scenario_from_args(args) -> Scenario:
    sc = load_scenario(args.scenario) if args.scenario else Scenario()
    over = {}
    if args.controller:
        over["controller"] = args.controller
    if args.ik_variant:
        over["ik_variant"] = args.ik_variant
    for item in args.set or []:
        key, _, val = item.partition("=")
        over[key] = json.loads(val)
    return Scenario.from_dict({**sc.to_dict(), **over}) if over else sc


def _print_summary(summary: dict) -> None:
    for link in summary["links"]:
        p0 = link["probes"]["0"]
        print(f"{link['name']}: tip RMSE={p0['RMSE']:.4g} MAE={p0['MAE']:.4g} ME={p0['ME']:.4g}"
              f"  max|U|={link['max_abs_U']:.4g}")


def cmd_run(args) -> int:
    sc = _scenario_from_args(args)
    res = run_scenario(sc)
    out = Path(args.out) if args.out else default_out_dir()
    files = export(res, out)
    _print_summary(res.summary)
    print(f"wrote {len(files)} files to {out}")
    return 0


def cmd_sweep(args) -> int:
    sc = _scenario_from_args(args)
    key, _, vals = args.param.partition("=")
    if key not in {f.name for f in dataclasses.fields(Scenario)}:
        print(f"unknown scenario field {key!r}", file=sys.stderr)
        return 2
    out = Path(args.out) if args.out else default_out_dir()
    rows = []
    for v in vals.split(","):
        val = json.loads(v)
        case = Scenario.from_dict({**sc.to_dict(), key: val})
        res = run_scenario(case)
        export(res, out / f"{key}={v}")
        link = res.summary["links"][0]
        rows.append({key: val, **{f"tip_{k}": link["probes"]["0"][k] for k in ("RMSE", "MAE", "ME")},
                     "max_abs_U": link["max_abs_U"], "decay": link["decay"]})
        print(f"{key}={v}: tip RMSE={rows[-1]['tip_RMSE']:.4g}")
    (out / "sweep.json").write_text(json.dumps(rows, indent=2) + "\n")
    return 0


def cmd_verify(args) -> int:
    from .acceptance import run_all
    results = run_all(fast=args.fast)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flexbeam", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    params = sub.add_parser("params", help="parameter sets")
    psub = params.add_subparsers(dest="action", required=True)
    show = psub.add_parser("show", help="print physical and dimensionless parameters")
    show.add_argument("--link", default="quanser_link1")
    show.set_defaults(func=cmd_params_show)

    kern = sub.add_parser("kernels", help="kernel solver")
    ksub = kern.add_subparsers(dest="action", required=True)
    solve = ksub.add_parser("solve", help="solve and dump all kernels")
    solve.add_argument("--link", default="quanser_link1")
    solve.add_argument("--n", type=int, default=DEFAULT_N)
    solve.add_argument("--tol", type=float, default=DEFAULT_TOL)
    solve.add_argument("--poles", help="comma-separated state poles")
    solve.add_argument("--out", default=str(default_out_dir() / "kernels"))
    solve.set_defaults(func=cmd_kernels_solve)

    gains = sub.add_parser("gains", help="gain synthesis")
    gsub = gains.add_subparsers(dest="action", required=True)
    synth = gsub.add_parser("synth", help="write the gain report as JSON")
    synth.add_argument("--link", default="quanser_link1")
    synth.add_argument("--c-acute", type=float, default=0.5)
    synth.add_argument("--poles", help="comma-separated state poles")
    synth.add_argument("--observer-poles", help="comma-separated observer poles")
    synth.add_argument("--n", type=int, default=DEFAULT_N)
    synth.add_argument("--tol", type=float, default=DEFAULT_TOL)
    synth.add_argument("--out")
    synth.set_defaults(func=cmd_gains_synth)

    for name, func, helptext in (("run", cmd_run, "run one scenario"),
                                 ("sweep", cmd_sweep, "run a scenario over a parameter grid")):
        r = sub.add_parser(name, help=helptext)
        r.add_argument("--scenario", help="scenario JSON file")
        r.add_argument("--out")
        r.add_argument("--controller", choices=CONTROLLERS)
        r.add_argument("--ik-variant", choices=("arctan", "arccos"))
        r.add_argument("--set", action="append", metavar="KEY=JSON",
                       help="override a scenario field, e.g. --set n=128")
        if name == "sweep":
            r.add_argument("--param", required=True, metavar="KEY=V1,V2,...")
        r.set_defaults(func=func)

    ver = sub.add_parser("verify", help="run the acceptance checks")
    ver.add_argument("--fast", action="store_true", help="coarser grids and shorter horizons")
    ver.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    np.set_printoptions(precision=6)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
