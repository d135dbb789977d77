"""Acceptance checks, one function per criterion.

Every check returns a ``CheckResult`` with the measured quantities, so the
same code backs ``flexbeam verify`` and the test suite.  ``fast=True``
shrinks grids and horizons for smoke runs; the tolerances stay the same.
"""

from __future__ import annotations

import json
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .control import (backstepping_transform, beta_t_hub_direct, inverse_transform,
                      random_admissible_states, state_feedback_u, u_equivalence_check)
from .gains import place_state_gain, synthesize_feedback
from .harness import (Scenario, default_out_dir, event_segment,
                      event_settling_times, export, metrics, run_scenario)
from .kernels import (kernel_residual, solve_control_kernels, solve_inverse_kernels,
                      solve_observer_kernels)
from .params import bundled_config, load_params, nondimensionalize
from .plant import (admissible_state, cfl_dt, displacement_from_riemann, step_riemann,
                    step_wave_oracle)
from .quadrature import trapz
from .trajectory import (PolarReference, forward_kinematics, ik_residual_report,
                         inverse_kinematics)

LINKS = ("quanser_link1", "quanser_link2")
TRACKING_TIME_SCALE = 20.0  # simulation units per second for reference-tracking runs
DECAY_TIME_SCALE = 5.0  # for reference-free runs, where it only sets the horizon


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d} {self.title} ({self.seconds:.1f}s)"


def _dp(name: str):
    return nondimensionalize(load_params(bundled_config(name)))


def _order(errors) -> list[float]:
    e = np.asarray(errors, float)
    return [float(np.log2(a / b)) for a, b in zip(e[:-1], e[1:])]


def _smooth_fields(n: int, rng, count: int, modes: int = 4):
    x = np.linspace(0.0, 1.0, n + 1)
    out = []
    for _ in range(count):
        a = rng.normal(size=(3, modes)) / (1.0 + np.arange(modes))
        xi = sum(a[0, q] * np.sin(np.pi * (q + 1) * x) + a[1, q] * np.cos(np.pi * q * x)
                 for q in range(modes))
        eta = sum(a[2, q] * np.cos(np.pi * q * x + 0.3 * q) for q in range(modes))
        out.append((xi, eta, rng.normal(size=2)))
    return out


# --------------------------------------------------------------------------


def check_kernels(fast: bool = False) -> CheckResult:
    """Residual orders of all kernel equations, exact boundary conditions,
    shear-free oracles and the solve time at n = 256."""
    grids = (32, 64, 128) if fast else (64, 128, 256)
    det = {}
    ok = True
    for name in LINKS:
        dp = _dp(name)
        K = place_state_gain(dp)
        res = {}
        for n in grids:
            t0 = time.perf_counter()
            ck = solve_control_kernels(dp, K, n)
            ok_k = solve_observer_kernels(dp, n)
            dt = time.perf_counter() - t0
            res[n] = {**kernel_residual(ck, dp), **{f"obs_{k}": v for k, v in
                                                   kernel_residual(ok_k, dp).items()}}
            res[n]["seconds"] = dt
        pde = ("pde_k", "pde_l", "pde_gamma", "obs_pde_phi", "obs_pde_psi")
        bcs = ("bc_l_diagonal", "bc_k_y0", "bc_gamma_0", "corner_mismatch",
               "obs_bc_phi_diagonal", "obs_bc_psi_edge")
        orders = {k: _order([res[n][k] for n in grids]) for k in pde}
        bc_max = max(res[n][k] for n in grids for k in bcs)
        slowest = max(res[n]["seconds"] for n in grids)
        link_ok = (all(min(o) >= 0.9 for o in orders.values()) and bc_max <= 1e-10
                   and slowest <= 30.0)
        ok &= link_ok
        det[name] = {"orders": orders, "bc_max": bc_max, "max_solve_seconds": slowest,
                     "finest": {k: res[grids[-1]][k] for k in pde}}
    # shear-free oracles
    dp0 = _dp("quanser_link1").with_b(0.0)
    K = place_state_gain(dp0)
    n = grids[-1]
    ck = solve_control_kernels(dp0, K, n)
    ok0 = solve_observer_kernels(dp0, n)
    x = np.linspace(0.0, 1.0, n + 1)
    s = dp0.sqrt_eps
    gam = np.array([-K @ expm(s * dp0.A_mat * xi) for xi in x])
    k_exact = np.zeros_like(ck.k.values)
    for i in range(n + 1):
        k_exact[i, : i + 1] = -s * gam[i::-1] @ dp0.B_vec
    zero_ck = solve_control_kernels(dp0, np.zeros(2), n)
    oracle = {
        "gamma": float(np.abs(ck.gamma - gam).max()),
        "l": float(np.abs(ck.l.values).max()),
        "k": float(np.abs(ck.k.values - k_exact).max()),
        "k_zero_gain": float(np.abs(zero_ck.k.values).max()),
        "psi": float(np.abs(ok0.psi.values).max()),
        "phi": float(np.abs(ok0.phi.values).max()),
    }
    ok &= max(oracle.values()) <= 1e-8
    det["shear_free_oracle_sup_errors"] = oracle
    return CheckResult(1, "kernel correctness", bool(ok), det)


def check_transform(fast: bool = False) -> CheckResult:
    """Forward then inverse transform on random smooth fields."""
    grids = (32, 64, 128) if fast else (64, 128, 256)
    count = 20 if fast else 100
    dp = _dp("quanser_link1")
    K = place_state_gain(dp)
    errs = []
    for n in grids:
        ck = solve_control_kernels(dp, K, n)
        ik = solve_inverse_kernels(ck, dp)
        rng = np.random.default_rng(1)
        worst = 0.0
        for xi, eta, X in _smooth_fields(n, rng, count):
            rs = admissible_state(xi, eta, X, dp)
            beta = backstepping_transform(rs, ck)
            back = inverse_transform(beta, rs.eta, rs.X, ik)
            worst = max(worst, float(np.abs(back - rs.xi).max()))
        errs.append(worst)
    h = 1.0 / np.asarray(grids, float)
    order = float(np.polyfit(np.log(h), np.log(errs), 1)[0])
    C = float(max(e / hh ** 2 for e, hh in zip(errs, h)))
    ok = order >= 1.8
    return CheckResult(2, "transform round trip", ok,
                       {"grids": list(grids), "max_errors": errs, "fitted_order": order,
                        "C_in_Ch2": C, "fields": count})


def check_equivalence(fast: bool = False) -> CheckResult:
    """Explicit law versus the transformed-state law on random admissible states."""
    grids = (32, 64, 128) if fast else (64, 128, 256)
    count = 20 if fast else 100
    dp = _dp("quanser_link1")
    K = place_state_gain(dp)
    out = []
    for n in grids:
        ck = solve_control_kernels(dp, K, n)
        ik = solve_inverse_kernels(ck, dp)
        g = synthesize_feedback(ck, ik, dp, 0.5)
        states = random_admissible_states(n, dp, count, seed=2)
        out.append(u_equivalence_check(states, ck, ik, g, dp, theta_dd=0.3)["max_rel"])
    ok = out[-1] <= 1e-3 and all(b < a for a, b in zip(out[:-1], out[1:]))
    return CheckResult(3, "controller equivalence", ok,
                       {"grids": list(grids), "max_rel": out, "orders": _order(out)})


def check_target_boundary(fast: bool = False) -> CheckResult:
    """|beta_t(1) + c beta(1)| along a state-feedback run, uniformly in time, is O(h)."""
    grids = (32, 64, 128) if fast else (64, 128, 256)
    horizon_units = (8.0 if fast else 31.0) * DECAY_TIME_SCALE
    dp = _dp("quanser_link1")
    K = place_state_gain(dp)
    c = 0.5
    sups, scales = [], []
    for n in grids:
        ck = solve_control_kernels(dp, K, n)
        ik = solve_inverse_kernels(ck, dp)
        g = synthesize_feedback(ck, ik, dp, c)
        # data built in target coordinates so they satisfy the boundary
        # relations to first order; incompatible data carry a kink that
        # spikes the hub residual once per round trip at every resolution
        x = np.linspace(0.0, 1.0, n + 1)
        bump = np.sin(np.pi * x) ** 4
        X0 = np.zeros(2)
        rs = admissible_state(inverse_transform(0.1 * bump, -0.05 * bump, X0, ik),
                              -0.05 * bump, X0, dp)
        dt = cfl_dt(dp, n)
        steps = int(math.ceil(horizon_units / dt))
        stride = max(1, n // 64)
        worst, scale = 0.0, 0.0
        for k in range(steps):
            U = state_feedback_u(rs, g)
            if k % stride == 0:
                beta1 = backstepping_transform(rs, ck)[-1]
                r = abs(beta_t_hub_direct(rs, U, ck, dp) + c * beta1)
                worst = max(worst, r)
                scale = max(scale, abs(beta1))
            rs = step_riemann(rs, U, 0.0, dp, dt)
        sups.append(worst)
        scales.append(scale)
    orders = _order(sups)
    h = 1.0 / np.asarray(grids, float)
    C = [float(s / hh) for s, hh in zip(sups, h)]
    ok = min(orders) >= 0.9
    return CheckResult(4, "target boundary property", ok,
                       {"grids": list(grids), "sup_residual": sups, "orders": orders,
                        "C_in_Ch": C, "beta_hub_scale": scales,
                        "horizon_units": horizon_units})


def check_decay(fast: bool = False) -> CheckResult:
    """State-feedback decay of Omega_0 below 1e-8 of its initial value for c in {0.1, 0.3, 0.5}."""
    n = 64 if fast else 256
    det = {}
    ok = True
    settle = []
    for c in (0.1, 0.3, 0.5):
        t0 = time.perf_counter()
        sc = Scenario(controller="backstepping-sf", c_acute=c, initial="smooth", n=n,
                      horizon=60.0, time_scale=DECAY_TIME_SCALE, stop_below=1e-8)
        res = run_scenario(sc)
        s = res.links[0]
        secs = time.perf_counter() - t0
        ratio = float(s["omega0"][-1] / s["omega0"][0])
        rate, r2 = res.summary["links"][0]["decay"]["omega0"].values()
        settle.append(float(s["t"][-1]))
        det[f"c={c}"] = {"final_ratio": ratio, "settling_time": settle[-1],
                         "tail_slope": -rate, "r2": r2, "seconds": secs}
        ok &= ratio <= 1e-8 and rate > 0 and secs <= 60.0
    ok &= all(b <= a for a, b in zip(settle[:-1], settle[1:]))
    det["n"] = n
    return CheckResult(5, "exponential decay under state feedback", bool(ok), det)


def check_observer(fast: bool = False) -> CheckResult:
    """Observer convergence from constant initial estimates, and separation."""
    n = 64 if fast else 128
    horizon = 1.0 if fast else 2.0
    det = {}
    series = {}
    ok = True
    for ctrl in ("backstepping-sf", "lqr-ff", "backstepping-of"):
        sc = Scenario(controller=ctrl, reference="sinusoid", initial="smooth", n=n,
                      horizon=horizon, time_scale=TRACKING_TIME_SCALE, observer=True,
                      observer_init=1.0)
        s = run_scenario(sc).links[0]
        series[ctrl] = s["omega_e"]
        ratio = float(s["omega_e"][-1] / s["omega_e"][0])
        det[ctrl] = {"final_ratio": ratio}
        ok &= ratio <= 1e-6
    ref = series["backstepping-sf"]
    sep = max(float(np.abs(series[c] - ref).max() / ref[0]) for c in series)
    det["separation_max_diff_over_initial"] = sep
    ok &= sep <= 1e-9
    sc2 = Scenario(links=("quanser_link2",), controller="backstepping-sf", initial="smooth",
                   n=max(n, 128), horizon=horizon, time_scale=TRACKING_TIME_SCALE, observer=True)
    s2 = run_scenario(sc2).links[0]
    det["link2_state_feedback_final_ratio"] = float(s2["omega_e"][-1] / s2["omega_e"][0])
    ok &= det["link2_state_feedback_final_ratio"] <= 1e-6
    return CheckResult(6, "observer convergence and separation", bool(ok), det)


def check_tracking(fast: bool = False) -> CheckResult:
    """Output-feedback tracking: bounded under the three references, decaying
    under the zero reference, ultimate tip error monotone in amplitude."""
    n = 32 if fast else 64
    H = 12.0
    det = {}
    ok = True
    for ref in ("sinusoid", "square", "sawtooth"):
        sc = Scenario(controller="backstepping-of", reference=ref, n=n, horizon=H,
                      time_scale=TRACKING_TIME_SCALE, record_every=10)
        res = run_scenario(sc)
        s = res.links[0]
        half = s["t_sec"] >= H / 2
        early = (s["t_sec"] >= 1.0) & ~half
        bound_late = float(np.abs(s["w_tip"][half]).max())
        bound_early = float(np.abs(s["w_tip"][early]).max())
        finite = bool(np.all(np.isfinite(s["omega0"])))
        # bounded: finite throughout and the late envelope no larger than the early one
        bounded = finite and bound_late <= 1.05 * bound_early
        det[ref] = {"tip_bound_early": bound_early, "tip_bound_late": bound_late,
                    "omega0_max": float(s["omega0"].max()),
                    "max_abs_U": res.summary["links"][0]["max_abs_U"], "bounded": bounded}
        ok &= bounded
    sc = Scenario(controller="backstepping-of", reference="zero", initial="smooth", n=n,
                  horizon=H / 2, time_scale=TRACKING_TIME_SCALE, record_every=10,
                  stop_below=1e-12)
    res = run_scenario(sc)
    s = res.links[0]
    fit = res.summary["links"][0]["decay"].get("omega0", {"rate": float("nan"), "r2": float("nan")})
    rate, r2 = fit["rate"], fit["r2"]
    ratio = float(s["omega0"][-1] / s["omega0"].max())
    det["zero_reference"] = {"decay_rate": rate, "r2": r2, "final_over_peak": ratio}
    ok &= rate > 0 and ratio < 1e-6
    bounds = []
    for amp in (0.1, 0.3, 0.6):
        sc = Scenario(controller="backstepping-of", reference="sinusoid", amplitude=amp, n=n,
                      horizon=H * 2 / 3, time_scale=TRACKING_TIME_SCALE, record_every=10)
        s = run_scenario(sc).links[0]
        late = s["t_sec"] >= sc.horizon / 2
        bounds.append(float(np.abs(s["w_tip"][late]).max()))
    det["ultimate_tip_bound_by_amplitude"] = dict(zip(("0.1", "0.3", "0.6"), bounds))
    ok &= all(b > a for a, b in zip(bounds[:-1], bounds[1:]))
    det["n"], det["time_scale"] = n, TRACKING_TIME_SCALE
    return CheckResult(7, "output-feedback tracking", bool(ok), det)


def check_wave_oracle(fast: bool = False) -> CheckResult:
    """Riemann scheme against the displacement-form oracle under a common input."""
    grids = (64, 128, 256) if fast else (128, 256, 512)
    dp = _dp("quanser_link1")
    T_out = (0.5, 1.0, 2.0, 4.0)
    errs = []
    for n in grids:
        x = np.linspace(0.0, 1.0, n + 1)
        rs = admissible_state(0.1 * np.sin(np.pi * x), 0.1 * (1 - np.cos(np.pi * x)),
                              np.array([0.0, 0.1]), dp)
        ds = displacement_from_riemann(rs, dp)
        dt = cfl_dt(dp, n)
        marks = {int(round(T / dt)): T for T in T_out}
        row = []
        for k in range(1, max(marks) + 1):
            t = (k - 1) * dt
            U, thdd = 200.0 * math.sin(t), 0.05 * math.cos(0.7 * t)
            rs = step_riemann(rs, U, thdd, dp, dt)
            ds = step_wave_oracle(ds, U, thdd, dp, dt)
            if k in marks:
                w = displacement_from_riemann(rs, dp).w
                row.append(float(np.sqrt(trapz((w - ds.w) ** 2, 1.0 / n))))
        errs.append(row)
    errs = np.asarray(errs)
    orders = [_order(errs[:, j]) for j in range(errs.shape[1])]
    h = 1.0 / np.asarray(grids, float)
    C = float((errs.max(axis=1) / h).max())
    ok = min(min(o) for o in orders) >= 0.9
    return CheckResult(8, "scheme equivalence oracle", ok,
                       {"grids": list(grids), "output_times": list(T_out),
                        "l2_errors": errs.tolist(), "orders": orders, "C_in_Ch": C})


def check_baseline(fast: bool = False, out_dir=None) -> CheckResult:
    """Tip-error settling after square-reference jumps: backstepping output
    feedback against LQR plus feedforward."""
    n = 32 if fast else 64
    H = 11.0 if fast else 16.0
    out = Path(out_dir) if out_dir is not None else default_out_dir() / "baseline_square"
    det = {}
    settle = {}
    for ctrl in ("backstepping-of", "lqr-ff"):
        sc = Scenario(controller=ctrl, reference="square", n=n, horizon=H,
                      time_scale=TRACKING_TIME_SCALE, record_every=10)
        res = run_scenario(sc)
        export(res, out / ctrl)
        s = res.links[0]
        seg = event_segment(res.events, H)
        st = event_settling_times(s["t_sec"], s["w_tip"], res.events, seg)
        settle[ctrl] = float(st.mean()) if st.size else math.inf
        det[ctrl] = {"settling_times": st.tolist(), "mean": settle[ctrl],
                     "tip": dict(zip(("RMSE", "MAE", "ME"), metrics(s["w_tip"][s["t_sec"] >= 1]))),
                     "dtheta_ME": float(np.abs(s["dtheta"][s["t_sec"] >= 1]).max())}
    verdict = settle["backstepping-of"] <= settle["lqr-ff"]
    det["verdict"] = ("backstepping settles no later than LQR+FF" if verdict
                      else "LQR+FF settles earlier")
    det["out_dir"] = str(out)
    (out / "verdict.json").write_text(json.dumps(det, indent=2) + "\n")
    return CheckResult(9, "baseline comparison", bool(verdict), det)


def check_kinematics(fast: bool = False) -> CheckResult:
    L1, L2 = 0.195, 0.195
    det = {}
    phi = np.linspace(-1.0, 1.0, 7)
    r = np.full_like(phi, math.sqrt(L1 ** 2 + L2 ** 2))
    # the unit case belongs to the arctan form; arccos gives the true elbow angle pi/2
    th1, th2 = inverse_kinematics(r, phi, L1, L2, "arctan")
    unit = max(float(np.abs(th2).max()), float(np.abs(th1 - phi).max()))
    det["unit_case_max_error"] = unit
    rng = np.random.default_rng(3)
    th1 = rng.uniform(-1.5, 1.5, 200)
    th2 = rng.uniform(0.05, 3.0, 200)
    rf, pf = forward_kinematics(th1, th2, L1, L2)
    a1, a2 = inverse_kinematics(rf, pf, L1, L2, "arccos")
    rb, pb = forward_kinematics(a1, a2, L1, L2)
    fk = max(float(np.abs(rb - rf).max()), float(np.abs(np.angle(np.exp(1j * (pb - pf)))).max()))
    det["fk_oracle_max_error"] = fk
    t = np.linspace(0.0, 10.0, 4001)
    det["ik_residuals"] = {k: ik_residual_report(PolarReference(k, 0.195, 0.15), t)
                           for k in ("polar-sinusoid", "polar-square", "polar-sawtooth")}
    ok = unit == 0.0 and fk <= 1e-12
    return CheckResult(10, "kinematics", bool(ok), det)


def check_plumbing(fast: bool = False) -> CheckResult:
    rmse, mae, me = metrics([3.0, -4.0])
    m_ok = (abs(rmse - math.sqrt(12.5)) < 1e-15 and mae == 3.5 and me == 4.0)
    sc = Scenario(controller="backstepping-of", reference="sinusoid", n=16, horizon=0.5,
                  time_scale=TRACKING_TIME_SCALE, record_every=5)
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        for k in range(2):
            files = export(run_scenario(sc), Path(tmp) / f"run{k}")
            blobs.append({f.name: f.read_bytes() for f in files})
    same = blobs[0] == blobs[1]
    return CheckResult(11, "metrics and deterministic export", bool(m_ok and same),
                       {"metrics": [rmse, mae, me], "byte_identical": same,
                        "files": sorted(blobs[0])})


CHECKS = (check_kernels, check_transform, check_equivalence, check_target_boundary,
          check_decay, check_observer, check_tracking, check_wave_oracle,
          check_baseline, check_kinematics, check_plumbing)


def run_check(fn, fast: bool = False) -> CheckResult:
    t0 = time.perf_counter()
    res = fn(fast=fast)
    res.seconds = time.perf_counter() - t0
    return res


def run_all(fast: bool = False) -> list[CheckResult]:
    return [run_check(fn, fast) for fn in CHECKS]
