"""Scenario orchestration: closed-loop runs, metrics, Lyapunov monitoring,
decay fits and export.

Each link-joint carries its own controller and, when enabled, its own
observer.  Links are not coupled beyond the tip-mass abstraction, so a
multi-link run advances every link on the same CFL time grid.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
from scipy.linalg import solve_continuous_lyapunov

from . import __version__
from .control import (lqr_ff_u, output_feedback_u, saturate, state_feedback_u,
                      torque_from_u, u_from_torque)
from .gains import (DEFAULT_OBSERVER_POLES, DEFAULT_STATE_POLES, FeedbackGains, GainError,
                    LqrGains, compute_observer_gains, lqr_feedforward_gains, place_state_gain,
                    synthesize_feedback)
from .kernels import (DEFAULT_MAX_ITER, DEFAULT_TOL, ControlKernels, InverseKernels,
                      solve_control_kernels, solve_inverse_kernels, solve_observer_kernels)
from .observer import (SensorBank, constant_observer, ideal_measurements, observer_error_norm,
                       step_observer)
from .params import DimensionlessParams, bundled_config, load_params, nondimensionalize
from .plant import (RiemannState, SimulationError, admissible_state, cfl_dt, energy, omega0,
                    physical_outputs, step_riemann, zero_state)
from .quadrature import trapz
from .trajectory import (JOINT_KINDS, POLAR_KINDS, PolarReference, ReferenceProfile,
                         forward_kinematics, polar_joint_profiles, reference_series)

SCHEMA_VERSION = "1.0"
CONTROLLERS = ("backstepping-sf", "backstepping-of", "lqr-ff")
PROBES = (0.0, 0.5)
OUT_ENV = "FLEXBEAM_OUT"

# per-link CSV columns, in order
LINK_COLUMNS = ("t", "t_sec", "theta_d", "theta_d_dot", "theta_d_ddot", "dtheta", "dtheta_dot",
                "v_tip", "v_mid", "v_hub", "w_tip", "w_mid", "U", "tau_m", "energy", "omega0",
                "omega_e", "beta_hub", "lyapunov", "xi_hat_tip", "xi_hat_hub", "eta_hat_tip",
                "eta_hat_hub", "X_hat_0", "X_hat_1")
OBSERVER_COLUMNS = ("xi_hat_tip", "xi_hat_hub", "eta_hat_tip", "eta_hat_hub", "X_hat_0", "X_hat_1")
ROBOT_COLUMNS = ("t", "t_sec", "r_d", "phi_d", "r", "phi", "r_err", "phi_err")


class ScenarioError(ValueError):
    pass


# --------------------------------------------------------------------------
# scenario


@dataclass(frozen=True)
class Scenario:
    """One closed-loop experiment.

    ``links`` are bundled config names or JSON paths.  ``reference`` is a
    joint profile (applied to every link) or a polar tip profile (two links,
    joint references by inverse kinematics).  ``horizon`` and
    ``buffer`` are in seconds; ``time_scale`` is simulation time units per
    second (None: the link's own frequency scale).
    """

    links: tuple = ("quanser_link1",)
    controller: str = "backstepping-sf"
    c_acute: float = 0.5
    state_poles: tuple = DEFAULT_STATE_POLES
    observer_poles: tuple = DEFAULT_OBSERVER_POLES
    lqr_state_weight: tuple | None = None
    lqr_control_weight: float | None = None
    reference: str = "zero"
    amplitude: float | None = None
    frequency: float | None = None
    smoothing_omega: float | None = None
    smoothing_zeta: float = 0.9
    phi_amplitude: float = 35 * math.pi / 180
    ik_variant: str = "arctan"
    n: int = 256
    horizon: float = 31.0
    buffer: float = 1.0
    time_scale: float | None = None
    observer: bool | None = None  # None: run the observer only when the law needs it
    observer_init: float = 1.0
    measurement: str = "ideal"
    sensor_omega: float | None = None  # rad/s; None: 20 x 2 pi f of the reference
    noise_theta: float = 0.0
    noise_strain: float = 0.0
    seed: int = 0
    initial: str = "zero"  # "zero" or "smooth"
    initial_amplitude: float = 0.1
    torque_limit: float | None = None
    eta_x_order: int = 1
    kernel_tol: float = DEFAULT_TOL
    kernel_max_iter: int = DEFAULT_MAX_ITER
    record_every: int = 1
    lyapunov_every: int = 0  # 0: skip the Lyapunov column
    stop_below: float | None = None  # stop once omega0 / omega0(0) drops below this

    def __post_init__(self):
        if isinstance(self.links, str):
            object.__setattr__(self, "links", (self.links,))
        object.__setattr__(self, "links", tuple(self.links))
        for name in ("state_poles", "observer_poles", "lqr_state_weight"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(float(a) for a in v))
        if not self.links:
            raise ScenarioError("at least one link is required")
        if self.controller not in CONTROLLERS:
            raise ScenarioError(f"controller must be one of {CONTROLLERS}")
        if self.reference not in JOINT_KINDS + POLAR_KINDS:
            raise ScenarioError(f"unknown reference {self.reference!r}")
        if self.reference in POLAR_KINDS and len(self.links) != 2:
            raise ScenarioError("polar references need exactly two links")
        if self.horizon <= 0 or self.buffer < 0:
            raise ScenarioError("horizon must be positive and buffer non-negative")
        if self.n < 8:
            raise ScenarioError("n must be at least 8")
        if self.measurement not in ("ideal", "sensor"):
            raise ScenarioError("measurement must be 'ideal' or 'sensor'")
        if self.initial not in ("zero", "smooth"):
            raise ScenarioError("initial must be 'zero' or 'smooth'")
        if self.record_every < 1 or self.lyapunov_every < 0:
            raise ScenarioError("record_every must be >= 1 and lyapunov_every >= 0")
        for link in self.links:
            _resolve_config(link)

    @property
    def uses_observer(self) -> bool:
        return self.controller == "backstepping-of" if self.observer is None else self.observer

    def to_dict(self) -> dict:
        return {f.name: _jsonable(getattr(self, f.name)) for f in dataclasses.fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        names = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - names
        if extra:
            raise ScenarioError(f"unknown scenario keys: {sorted(extra)}")
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(a) for a in v]
    return v


def _resolve_config(name) -> Path:
    p = Path(name)
    if p.suffix == ".json" and p.exists():
        return p
    try:
        q = bundled_config(str(name))
    except Exception as exc:  # noqa: BLE001 - report any lookup failure uniformly
        raise ScenarioError(f"cannot resolve link config {name!r}") from exc
    if not q.exists():
        raise ScenarioError(f"cannot resolve link config {name!r}")
    return q


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return Scenario.from_dict(json.load(fh))


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "flexbeam_out"))


# --------------------------------------------------------------------------
# per-link setup


@dataclass
class LinkSetup:
    name: str
    dp: DimensionlessParams
    L_star: float
    time_scale: float
    ck: ControlKernels | None = None
    ik: InverseKernels | None = None
    gains: FeedbackGains | None = None
    obs_gains: object = None
    lqr: LqrGains | None = None


def build_link(name, sc: Scenario) -> LinkSetup:
    phys = load_params(_resolve_config(name))
    dp = nondimensionalize(phys)
    ts = sc.time_scale if sc.time_scale is not None else phys.omega0_star
    setup = LinkSetup(str(name), dp, phys.L_star, ts)
    if sc.controller.startswith("backstepping"):
        K = place_state_gain(dp, sc.state_poles)
        setup.ck = solve_control_kernels(dp, K, sc.n, sc.kernel_tol, sc.kernel_max_iter)
        setup.ik = solve_inverse_kernels(setup.ck, dp)
        setup.gains = synthesize_feedback(setup.ck, setup.ik, dp, sc.c_acute)
    else:
        w = None if sc.lqr_state_weight is None else np.diag(sc.lqr_state_weight)
        setup.lqr = lqr_feedforward_gains(dp, w, sc.lqr_control_weight)
    if sc.uses_observer:
        ok = solve_observer_kernels(dp, sc.n, sc.kernel_tol, sc.kernel_max_iter)
        setup.obs_gains = compute_observer_gains(ok, dp, sc.observer_poles)
    return setup


def _reference_profile(sc: Scenario, time_scale: float) -> ReferenceProfile:
    defaults = {"sinusoid": (40 * math.pi / 180, 0.2), "square": (35 * math.pi / 180, 0.1),
                "sawtooth": (35 * math.pi / 180, 0.2), "zero": (0.0, 0.2)}
    A0, f0 = defaults[sc.reference]
    return ReferenceProfile(
        kind=sc.reference, amplitude=A0 if sc.amplitude is None else sc.amplitude,
        frequency=f0 if sc.frequency is None else sc.frequency, omega_n=sc.smoothing_omega,
        zeta=sc.smoothing_zeta, time_scale=time_scale)


def reference_events(sc: Scenario) -> np.ndarray:
    """Jump instants (seconds) of discontinuous profiles inside the horizon."""
    H = sc.horizon
    if sc.reference == "square":
        f = _reference_profile(sc, 1.0).frequency
        ev = np.arange(1, int(H * 2 * f) + 1) / (2 * f)
    elif sc.reference == "sawtooth":
        f = _reference_profile(sc, 1.0).frequency
        ev = (np.arange(0, int(H * f) + 1) + 0.5) / f
    elif sc.reference == "polar-square":
        ev = np.union1d(1.25 + 2.5 * np.arange(int(H / 2.5) + 1), 5.0 * np.arange(1, int(H / 5) + 1))
    elif sc.reference == "polar-sawtooth":
        ev = np.union1d(1.25 + 2.5 * np.arange(int(H / 2.5) + 1), 2.5 + 5.0 * np.arange(int(H / 5) + 1))
    else:
        ev = np.zeros(0)
    return ev[ev < H]


def event_segment(events: np.ndarray, horizon: float) -> float:
    """Shortest spacing between jumps (the whole horizon without jumps)."""
    return float(np.diff(events).min()) if events.size > 1 else float(horizon)


def _initial_state(sc: Scenario, dp: DimensionlessParams) -> RiemannState:
    if sc.initial == "zero":
        return zero_state(sc.n)
    a = sc.initial_amplitude
    x = np.linspace(0.0, 1.0, sc.n + 1)
    xi = a * np.sin(np.pi * x)
    eta = a * (1.0 - np.cos(np.pi * x))
    return admissible_state(xi, eta, np.array([0.0, a]), dp)


# --------------------------------------------------------------------------
# result


@dataclass
class SimResult:
    scenario: Scenario
    links: list  # per link: dict column -> array
    robot: dict | None
    summary: dict = field(default_factory=dict)
    events: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def link_series(self, i: int, name: str) -> np.ndarray:
        return self.links[i][name]


def _w_probe(rs: RiemannState, j: int) -> float:
    """w at grid index j from the tip position and the integrated slope."""
    h = 1.0 / rs.n
    return float(rs.X[1] + 0.5 * trapz((rs.xi - rs.eta)[: j + 1], h)) if j > 0 else float(rs.X[1])


def beta_hub(rs: RiemannState, ck: ControlKernels) -> float:
    """beta(1) only, at O(n) cost."""
    n = rs.n
    h = 1.0 / n
    return float(rs.xi[n] + ck.gamma[n] @ rs.X - trapz(ck.k.values[n] * rs.xi, h)
                 - trapz(ck.l.values[n] * rs.eta, h))


def run_scenario(sc: Scenario, setups: list | None = None) -> SimResult:
    """Simulate the scenario; ``setups`` may be passed to reuse solved kernels."""
    if setups is None:
        setups = [build_link(name, sc) for name in sc.links]
    dts = [cfl_dt(s.dp, sc.n) for s in setups]
    if any(abs(d - dts[0]) > 1e-12 * dts[0] for d in dts):
        raise ScenarioError("links must share sqrt(eps) to run on one CFL grid")
    tss = [s.time_scale for s in setups]
    if any(abs(t - tss[0]) > 1e-12 * tss[0] for t in tss):
        raise ScenarioError("links must share one time_scale")
    dt, ts = dts[0], tss[0]
    steps = int(math.ceil(sc.horizon * ts / dt))
    t_grid = dt * np.arange(steps + 1)

    robot_ref = None
    if sc.reference in POLAR_KINDS:
        L1, L2 = setups[0].L_star, setups[1].L_star
        pref = PolarReference(sc.reference, L1, L2, sc.phi_amplitude)
        w_n = sc.smoothing_omega if sc.smoothing_omega is not None else 20 * 2 * math.pi / pref.period
        refs = list(polar_joint_profiles(pref, t_grid, ts, w_n, sc.smoothing_zeta, sc.ik_variant))
        robot_ref = pref(t_grid / ts)
        ref_freq = 1.0 / pref.period
    else:
        prof = _reference_profile(sc, ts)
        refs = [reference_series(prof, t_grid)] * len(setups)
        ref_freq = prof.frequency

    loops = [_LinkLoop(s, sc, refs[i], dt, ref_freq) for i, s in enumerate(setups)]
    n_rec = steps // sc.record_every + 1
    for lp in loops:
        lp.allocate(n_rec)
    k_stop = steps
    for k in range(steps + 1):
        record = k % sc.record_every == 0
        for lp in loops:
            lp.control(k)
            if record:
                lp.record(k // sc.record_every, k, t_grid[k], ts)
        if sc.stop_below is not None and record and all(
                lp.out["omega0"][k // sc.record_every] <= sc.stop_below * lp.out["omega0"][0]
                for lp in loops):
            k_stop = k
            break
        if k == steps:
            break
        for lp in loops:
            lp.advance(k)
    n_used = k_stop // sc.record_every + 1
    series = [{c: lp.out[c][:n_used].copy() for c in LINK_COLUMNS} for lp in loops]

    robot = None
    if robot_ref is not None:
        idx = np.arange(n_used) * sc.record_every
        th1 = series[0]["theta_d"] + series[0]["dtheta"]
        th2 = series[1]["theta_d"] + series[1]["dtheta"]
        v1 = series[0]["v_tip"] * setups[0].L_star
        v2 = series[1]["v_tip"] * setups[1].L_star
        r, phi = forward_kinematics(th1, th2, setups[0].L_star, setups[1].L_star, v1, v2)
        r_d, phi_d = robot_ref[0][idx], robot_ref[1][idx]
        robot = {"t": series[0]["t"], "t_sec": series[0]["t_sec"], "r_d": r_d, "phi_d": phi_d,
                 "r": r, "phi": phi, "r_err": r - r_d,
                 "phi_err": np.angle(np.exp(1j * (phi - phi_d)))}
    res = SimResult(sc, series, robot, events=reference_events(sc))
    res.summary = summarize(res)
    return res


class _LinkLoop:
    """Closed loop of one link-joint: plant, optional observer, controller, recorder."""

    def __init__(self, setup: LinkSetup, sc: Scenario, ref: np.ndarray, dt: float,
                 ref_freq: float):
        self.s = setup
        self.sc = sc
        self.ref = ref
        self.dt = dt
        dp = setup.dp
        self.rs = _initial_state(sc, dp)
        self.os = constant_observer(sc.n, sc.observer_init) if sc.uses_observer else None
        self.sensors = None
        if sc.measurement == "sensor":
            w_sec = sc.sensor_omega if sc.sensor_omega is not None else 20 * 2 * math.pi * ref_freq
            self.sensors = SensorBank(dp, dt, w_sec / setup.time_scale, 0.9, sc.noise_theta,
                                      sc.noise_strain, sc.seed)
        self.m = self._measure(0)
        self.U = 0.0
        self.tau = 0.0
        self.j_mid = sc.n // 2
        self.monitor = None
        if sc.lyapunov_every and setup.ck is not None:
            self.monitor = LyapunovMonitor.build(setup.ck, setup.ik, dp, sc.c_acute)

    def _measure(self, k):
        th, thd, _ = self.ref[k]
        if self.sensors is not None:
            return self.sensors.measure(self.rs, th, thd)
        return ideal_measurements(self.rs, self.s.dp, th, thd)

    def control(self, k):
        sc, s, dp = self.sc, self.s, self.s.dp
        th, thd, thdd = self.ref[k]
        m = self.m
        if sc.controller == "backstepping-sf":
            U = state_feedback_u(self.rs, s.gains, thdd, sc.eta_x_order)
        elif sc.controller == "backstepping-of":
            U = output_feedback_u(self.os.xi_hat, self.os.eta_hat, self.os.X_hat, m.xi0,
                                  s.gains, thdd, sc.eta_x_order)
        else:
            tau = lqr_ff_u(m.dtheta, m.dtheta_dot, m.v_tip, m.v_tip_t, s.lqr, th, thd)
            U = u_from_torque(tau, thd, thdd, dp)
        tau = torque_from_u(U, thd, thdd, dp)
        tau_sat = saturate(tau, sc.torque_limit)
        if tau_sat != tau:
            U = u_from_torque(tau_sat, thd, thdd, dp)
        self.U, self.tau = float(U), float(tau_sat)

    def advance(self, k):
        dp = self.s.dp
        thdd = self.ref[k][2]
        try:
            self.rs = step_riemann(self.rs, self.U, thdd, dp, self.dt)
        except SimulationError as exc:
            raise SimulationError(f"{exc} (link {self.s.name}, step {k}, "
                                  f"last U={self.U:.6g}, omega0={omega0_safe(self.rs):.6g})") from exc
        m_next = self._measure(k + 1)
        if self.os is not None:
            self.os = step_observer(self.os, self.m, thdd, self.s.obs_gains, dp, self.dt, m_next)
        self.m = m_next

    def allocate(self, n_rec):
        self.out = {c: np.zeros(n_rec) for c in LINK_COLUMNS}
        for c in ("lyapunov",) + OBSERVER_COLUMNS:
            self.out[c][:] = np.nan

    def record(self, i, k, t, ts):
        rs, dp, o = self.rs, self.s.dp, self.out
        th, thd, thdd = self.ref[k]
        po = physical_outputs(rs, dp)
        w_mid = _w_probe(rs, self.j_mid)
        x_mid = self.j_mid / rs.n
        o["t"][i] = t
        o["t_sec"][i] = t / ts
        o["theta_d"][i], o["theta_d_dot"][i], o["theta_d_ddot"][i] = th, thd, thdd
        o["dtheta"][i], o["dtheta_dot"][i] = rs.dtheta, rs.dtheta_dot
        o["v_tip"][i], o["w_tip"][i], o["v_hub"][i] = po["v_tip"], po["w_tip"], po["v_hub"]
        o["w_mid"][i] = w_mid
        o["v_mid"][i] = w_mid - (1.0 + dp.R - x_mid) * rs.dtheta
        o["U"][i], o["tau_m"][i] = self.U, self.tau
        o["energy"][i] = energy(rs, dp)
        o["omega0"][i] = omega0(rs)
        o["omega_e"][i] = np.nan
        if self.os is not None:
            ob = self.os
            o["omega_e"][i] = observer_error_norm(ob, rs)["total"]
            vals = (ob.xi_hat[0], ob.xi_hat[-1], ob.eta_hat[0], ob.eta_hat[-1], *ob.X_hat)
            for c, v in zip(OBSERVER_COLUMNS, vals):
                o[c][i] = v
        o["beta_hub"][i] = beta_hub(rs, self.s.ck) if self.s.ck is not None else np.nan
        if self.monitor is not None and k % self.sc.lyapunov_every == 0:
            o["lyapunov"][i] = self.monitor(rs)


def omega0_safe(rs) -> float:
    with np.errstate(all="ignore"):
        return float(omega0(rs))


# --------------------------------------------------------------------------
# metrics and fits


def metrics(series, reference=None) -> tuple[float, float, float]:
    """(RMSE, MAE, ME) of series - reference."""
    e = np.asarray(series, float)
    if reference is not None:
        r = np.asarray(reference, float)
        if r.shape != e.shape:
            raise ValueError(f"length mismatch: {e.shape} vs {r.shape}")
        e = e - r
    if e.size == 0:
        raise ValueError("empty series")
    a = np.abs(e)
    return float(np.sqrt(np.mean(e * e))), float(a.mean()), float(a.max())


def decay_fit(t, series, tail_fraction: float = 0.5) -> tuple[float, float]:
    """Least-squares line through log(series) over the tail; returns (rate, r^2)
    with rate = -slope."""
    t = np.asarray(t, float)
    y = np.asarray(series, float)
    if t.shape != y.shape or t.size < 2:
        raise ValueError("need matching t and series with at least two samples")
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    k0 = int(math.floor((1 - tail_fraction) * t.size))
    tt, yy = t[k0:], y[k0:]
    if tt.size < 2:
        tt, yy = t[-2:], y[-2:]
    if np.any(yy <= 0) or not np.all(np.isfinite(yy)):
        raise ValueError("decay_fit needs positive finite values in the tail")
    ly = np.log(yy)
    slope, icpt = np.polyfit(tt, ly, 1)
    ss_res = float(np.sum((ly - (slope * tt + icpt)) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(-slope), r2


def settling_time(t, series, band: float = 0.05, start: float | None = None,
                  scale: float | None = None) -> float:
    """Time after ``start`` at which |series| enters and stays within
    band * scale (scale defaults to the peak |series| after ``start``)."""
    t = np.asarray(t, float)
    a = np.abs(np.asarray(series, float))
    if start is not None:
        keep = t >= start
        t, a = t[keep], a[keep]
    if t.size == 0:
        raise ValueError("no samples after start")
    scale = a.max() if scale is None else scale
    if scale == 0:
        return 0.0
    out = np.nonzero(a > band * scale)[0]
    if out.size == 0:
        return 0.0
    if out[-1] == t.size - 1:
        return math.inf
    return float(t[out[-1] + 1] - t[0])


def event_settling_times(t_sec, series, events, segment: float, band: float = 0.05) -> np.ndarray:
    """Settling time after each reference jump, over the ``segment`` seconds
    that follow it; segments cut short by the end of the record are skipped."""
    t_sec = np.asarray(t_sec, float)
    series = np.asarray(series, float)
    out = []
    for a in events:
        if a + segment > t_sec[-1] + 1e-9:
            continue
        keep = (t_sec >= a) & (t_sec < a + segment)
        if keep.sum() < 2:
            continue
        out.append(settling_time(t_sec[keep], series[keep], band))
    return np.asarray(out)


def summarize(res: SimResult) -> dict:
    sc = res.scenario
    out = {"schema_version": SCHEMA_VERSION, "scenario_hash": sc.digest(), "links": []}
    for i, s in enumerate(res.links):
        keep = s["t_sec"] >= sc.buffer
        if not keep.any():
            keep = np.ones_like(s["t_sec"], bool)
        entry = {"name": sc.links[i], "probes": {}, "samples": int(s["t"].size),
                 "max_abs_U": float(np.max(np.abs(s["U"]))),
                 "max_abs_tau_m": float(np.max(np.abs(s["tau_m"])))}
        for x, col in zip(PROBES, ("w_tip", "w_mid")):
            rmse, mae, me = metrics(s[col][keep])
            entry["probes"][f"{x:g}"] = {"RMSE": rmse, "MAE": mae, "ME": me}
        rmse, mae, me = metrics(s["dtheta"][keep])
        entry["dtheta"] = {"RMSE": rmse, "MAE": mae, "ME": me}
        entry["decay"] = {}
        for name in ("omega0", "omega_e"):
            y = s[name]
            if np.all(np.isfinite(y)) and np.all(y > 0) and y.size >= 4:
                rate, r2 = decay_fit(s["t"], y, 0.5)
                entry["decay"][name] = {"rate": rate, "r2": r2}
        out["links"].append(entry)
    if res.robot is not None:
        keep = res.robot["t_sec"] >= sc.buffer
        if not keep.any():
            keep = np.ones_like(res.robot["t_sec"], bool)
        out["robot"] = {}
        for col in ("r_err", "phi_err"):
            rmse, mae, me = metrics(res.robot[col][keep])
            out["robot"][col] = {"RMSE": rmse, "MAE": mae, "ME": me}
    return out


# --------------------------------------------------------------------------
# Lyapunov monitor


@dataclass(frozen=True)
class LyapunovMonitor:
    """V1 = (s/2) int e^{-alpha x} eta^2 + (s/2) int h e^x beta^2 + beta(1)^2 / 2 + X'P X."""

    ck: ControlKernels
    P: np.ndarray
    alpha: float
    h_acute: float
    sqrt_eps: float
    report: dict

    @classmethod
    def build(cls, ck: ControlKernels, ik: InverseKernels, dp: DimensionlessParams,
              c_acute: float, Q=None) -> "LyapunovMonitor":
        P = lyapunov_matrix(dp, ck.K, Q)
        rep = monitor_constants(ck, ik, dp, c_acute, P, Q)
        return cls(ck, P, rep["alpha"], rep["h_acute"], dp.sqrt_eps, rep)

    def __call__(self, rs: RiemannState) -> float:
        from .control import backstepping_transform
        beta = backstepping_transform(rs, self.ck)
        return lyapunov_value(beta, rs.eta, rs.X, self.P, self.alpha, self.h_acute, self.sqrt_eps)


def lyapunov_matrix(dp: DimensionlessParams, K, Q=None) -> np.ndarray:
    Acl = dp.A_mat + np.outer(dp.B_vec, np.asarray(K, float))
    if np.any(np.linalg.eigvals(Acl).real >= 0):
        raise GainError("A + B K is not Hurwitz; no Lyapunov matrix")
    Q = np.eye(2) if Q is None else np.asarray(Q, float)
    return solve_continuous_lyapunov(Acl.T, -Q)


def lyapunov_value(beta, eta, X, P, alpha: float, h_acute: float, sqrt_eps: float) -> float:
    beta = np.asarray(beta, float)
    eta = np.asarray(eta, float)
    x = np.linspace(0.0, 1.0, beta.size)
    h = 1.0 / (beta.size - 1)
    X = np.asarray(X, float)
    return float(0.5 * sqrt_eps * trapz(np.exp(-alpha * x) * eta ** 2, h)
                 + 0.5 * sqrt_eps * h_acute * trapz(np.exp(x) * beta ** 2, h)
                 + 0.5 * beta[-1] ** 2 + X @ P @ X)


def monitor_constants(ck: ControlKernels, ik: InverseKernels, dp: DimensionlessParams,
                      c_acute: float, P=None, Q=None, margin: float = 1.01) -> dict:
    """Pick (alpha, h_acute, gamma_acute) satisfying the decay inequalities.

    L1 bounds the nonlocal source of the target system and G the size of
    the X-to-beta coupling, both as sup-norms over the grids.  Feasibility
    for the given c_acute requires c_acute > h_acute e / 2.
    """
    if P is None:
        P = lyapunov_matrix(dp, ck.K, Q)
    Q = np.eye(2) if Q is None else np.asarray(Q, float)
    b, s = dp.b, dp.sqrt_eps
    x = np.linspace(0.0, 1.0, ck.n + 1)
    cosh = np.cosh(b * x)
    sup = lambda a: float(np.max(np.abs(a)))  # noqa: E731
    L1 = (0.5 * b * b * sup(cosh) + sup(ck.k.values) + sup(ck.l.values)
          + sup(ik.rho.values) + sup(ik.sigma.values)) / s
    G = float(np.max(np.linalg.norm(ck.gamma, axis=1)) + np.max(np.linalg.norm(ik.lam, axis=1)))
    gamma_acute = 2.0 * G if G > 0 else 1.0
    alpha = margin * (4 * L1 + math.sqrt(16 * L1 ** 2 + 4 * L1))
    PB = P @ dp.B_vec
    lam_min = float(np.min(np.linalg.eigvalsh(0.5 * (Q + Q.T))))
    h_acute = margin * max(8 * float(PB @ PB) / lam_min + 2,
                           L1 * gamma_acute / ((gamma_acute - G) * alpha))
    return {"L1": L1, "G": G, "gamma_acute": gamma_acute, "alpha": alpha, "h_acute": h_acute,
            "c_acute": c_acute, "c_acute_min": h_acute * math.e / 2,
            "feasible": bool(c_acute > h_acute * math.e / 2)}


# --------------------------------------------------------------------------
# export


def _fmt(v) -> str:
    return repr(float(v)) if not np.isfinite(v) else f"{float(v):.17g}"


def write_csv(path, columns, data: dict) -> Path:
    path = Path(path)
    rows = np.column_stack([np.asarray(data[c], float) for c in columns])
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_csv(path) -> dict:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {c: data[:, i] for i, c in enumerate(header)}


def manifest(res: SimResult, files: list) -> dict:
    sc = res.scenario
    digests = {}
    for f in files:
        digests[Path(f).name] = hashlib.sha256(Path(f).read_bytes()).hexdigest()
    return {"schema_version": SCHEMA_VERSION, "scenario_hash": sc.digest(),
            "scenario": sc.to_dict(), "grid": {"n": sc.n},
            "tolerances": {"kernel_tol": sc.kernel_tol, "kernel_max_iter": sc.kernel_max_iter},
            "versions": {"flexbeam": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__, "python": platform.python_version()},
            "files": digests}


def export(res: SimResult, out_dir=None) -> list[Path]:
    """Write link_<i>.csv, robot.csv (two-link runs), summary.json and manifest.json."""
    out = Path(out_dir) if out_dir is not None else default_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    files = [write_csv(out / f"link_{i}.csv", LINK_COLUMNS, s) for i, s in enumerate(res.links)]
    if res.robot is not None:
        files.append(write_csv(out / "robot.csv", ROBOT_COLUMNS, res.robot))
    summary = out / "summary.json"
    summary.write_text(json.dumps(res.summary, indent=2, sort_keys=True, default=_json_default) + "\n")
    files.append(summary)
    man = out / "manifest.json"
    man.write_text(json.dumps(manifest(res, files), indent=2, sort_keys=True) + "\n")
    files.append(man)
    return files


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(f"not JSON serializable: {type(v)}")
