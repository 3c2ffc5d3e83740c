"""Closed-loop scenario runner, telemetry, error metrics and sweeps."""
from __future__ import annotations

import copy
import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import airframe as af
from .attitude import NOMINAL_GAINS, AttitudeConfig, AttitudeGains
from .autopilot import Autopilot
from .mission import BUILTIN_MISSIONS, Mission, Mode, Phase, initial_phase_state, mission_update
from .position import L1Config, PathSegment, PositionConfig, TecsGains
from .rcac import CHANNELS, RcacBank, RcacHyper

OUTPUT_ROOT_ENV = "FWRCAC_OUTPUT_ROOT"

TELEMETRY_COLUMNS = (
    "t", "r_n", "r_e", "r_d", "h_m", "V_T",
    "psi_m", "theta_m", "phi_m", "theta_s", "phi_s",
    "omega_x_m", "omega_y_m", "omega_z_m", "omega_x_s", "omega_y_s", "omega_z_s",
    "alpha_x_s", "alpha_y_s", "alpha_z_s",
    "aileron_left", "aileron_right", "elevator", "rudder", "throttle",
    "u_theta", "u_phi", "u_omega_x", "u_omega_y", "u_omega_z",
    "gain_theta", "gain_phi",
    "gain_omega_x_p", "gain_omega_x_i", "gain_omega_y_p", "gain_omega_y_i",
    "gain_omega_z_p", "gain_omega_z_i",
    "e_xtrack", "phase", "mode", "flags",
)

# One fixed hyperparameter set, shared by every channel and every scenario.
DEFAULT_RCAC = {
    "theta": {"P0": 1.0, "Ru": 0.001, "Rz": 1.0, "sigma": -0.1},
    "phi": {"P0": 1.0, "Ru": 0.001, "Rz": 1.0, "sigma": -0.1},
    "omega_x": {"P0": 1.0, "Ru": 0.001, "Rz": 1.0, "sigma": -0.1},
    "omega_y": {"P0": 1.0, "Ru": 0.001, "Rz": 1.0, "sigma": -0.1},
    "omega_z": {"P0": 1.0, "Ru": 0.001, "Rz": 1.0, "sigma": -0.1},
}
THETA_MAX_FACTOR = 10.0


class ConfigError(ValueError):
    pass


class MetricsError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    name: str = "nominal"
    mission: object = "sim_profile"  # builtin id or mission dict
    degradation_factor: float = 1.0
    adaptive: bool = False
    rcac: dict = field(default_factory=dict)
    fault: Optional[dict] = None
    airframe: Optional[str] = None
    attitude_gains: Optional[dict] = None
    outer_loop: dict = field(default_factory=dict)
    integrator_bound: tuple = (0.3, 0.3, 0.3)
    wind: tuple = (0.0, 3.0, 0.0)  # steady air velocity, NED [m/s]
    duration: float = 200.0
    dt: float = 0.004
    seed: int = 0
    noise: Optional[dict] = None
    output_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict, base_dir: Optional[Path] = None) -> "ScenarioConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
        cfg = cls(**d)
        if cfg.airframe is not None and base_dir is not None \
                and not Path(cfg.airframe).is_absolute():
            cfg.airframe = str(Path(base_dir) / cfg.airframe)
        cfg.integrator_bound = tuple(cfg.integrator_bound)
        cfg.wind = tuple(cfg.wind)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
        return cls.from_dict(data, base_dir=path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["integrator_bound"] = list(self.integrator_bound)
        d["wind"] = list(self.wind)
        return d

    def validate(self) -> None:
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.duration > 0:
            raise ConfigError("duration must be positive")
        if not (self.degradation_factor >= 0 and math.isfinite(self.degradation_factor)):
            raise ConfigError("degradation_factor must be >= 0")
        if self.airframe is not None and not Path(self.airframe).exists():
            raise ConfigError(f"airframe file {self.airframe} does not exist")
        if isinstance(self.mission, str) and self.mission not in BUILTIN_MISSIONS:
            raise ConfigError(f"unknown mission {self.mission!r}")
        if set(self.rcac) - set(CHANNELS):
            raise ConfigError(f"unknown rcac channels {sorted(set(self.rcac) - set(CHANNELS))}")
        if self.fault is not None:
            f = self.fault
            if f.get("surface") not in af.SURFACES:
                raise ConfigError(f"unknown fault surface {f.get('surface')!r}")
            if not -1.0 <= float(f.get("stuck_value", 0.0)) <= 1.0:
                raise ConfigError("fault stuck_value outside [-1, 1]")
            onset = f.get("t_start", 0.0)
            if onset != "loiter" and not float(onset) >= 0:
                raise ConfigError("fault t_start must be >= 0 or 'loiter'")
        try:
            self.build_mission()
            self.build_gains()
            self.build_hypers()
        except (TypeError, KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def build_mission(self) -> Mission:
        if isinstance(self.mission, str):
            return BUILTIN_MISSIONS[self.mission]()
        return Mission.from_dict(self.mission)

    def build_params(self) -> af.AircraftParams:
        if self.airframe is None:
            return af.default_params()
        return af.AircraftParams.from_json(self.airframe)

    def build_gains(self) -> AttitudeGains:
        if self.attitude_gains is None:
            return NOMINAL_GAINS
        return AttitudeGains.from_dict(self.attitude_gains)

    def build_hypers(self) -> dict:
        """Per-channel RCAC hyperparameters plus enable flags."""
        gains = self.build_gains()
        nominal_scale = {
            "theta": abs(gains.k_theta), "phi": abs(gains.k_phi),
            **{f"omega_{ax}": max(abs(gains.k_omega_P[i]), abs(gains.k_omega_I[i]))
               for i, ax in enumerate("xyz")},
        }
        hypers, enabled = {}, {}
        for ch in CHANNELS:
            block = {**DEFAULT_RCAC[ch], **self.rcac.get(ch, {})}
            enabled[ch] = bool(block.pop("enabled", True))
            if "theta_max" not in block:
                block["theta_max"] = THETA_MAX_FACTOR * nominal_scale[ch] or None
            if block.get("theta0") is not None:
                block["theta0"] = tuple(block["theta0"])
            hypers[ch] = RcacHyper(**block)
        return {"hyper": hypers, "enabled": enabled}


@dataclass
class RunSummary:
    J_Phi: float
    J_Theta: float
    J_traj: float
    N: int
    normalized: dict = field(default_factory=dict)
    baseline: Optional[str] = None

    def normalize(self, base: "RunSummary", name: str) -> "RunSummary":
        def ratio(a, b):
            if b == 0:
                return 1.0 if a == 0 else math.inf
            return a / b
        return replace(self, baseline=name, normalized={
            "J_Phi": ratio(self.J_Phi, base.J_Phi),
            "J_Theta": ratio(self.J_Theta, base.J_Theta),
            "J_traj": ratio(self.J_traj, base.J_traj)})


@dataclass
class RunResult:
    name: str
    telemetry: dict  # column -> np.ndarray (object arrays for text columns)
    summary: Optional[RunSummary]
    failed: bool
    reason: str = ""
    loiter_entry: Optional[float] = None
    completed: bool = False
    final_gains: dict = field(default_factory=dict)
    csv_path: Optional[str] = None


def cross_track_error(r_m, segment: PathSegment) -> float:
    """Horizontal distance to the infinite line, or to the circle of an arc."""
    px, py = float(r_m[0]), float(r_m[1])
    if segment.kind == "line":
        (ax, ay), (bx, by) = segment.p0, segment.p1
        dx, dy = bx - ax, by - ay
        return abs((px - ax) * dy - (py - ay) * dx) / math.hypot(dx, dy)
    cx, cy = segment.center
    return abs(math.hypot(px - cx, py - cy) - segment.radius)


def rms(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(np.mean(x * x)))


def loiter_window(telemetry: dict) -> np.ndarray:
    """Mission-mode records of the loiter phase."""
    phase = np.asarray(telemetry["phase"])
    mode = np.asarray(telemetry["mode"])
    return (phase == Phase.LOITER.name.lower()) & (mode == Mode.MISSION.value)


def metrics(telemetry: dict, window=loiter_window) -> RunSummary:
    """RMS bank, elevation and cross-track errors over the selected records."""
    mask = window(telemetry) if callable(window) else np.asarray(window, dtype=bool)
    n = int(np.count_nonzero(mask))
    if n == 0:
        raise MetricsError("metric window is empty")
    col = lambda k: np.asarray(telemetry[k], dtype=float)[mask]
    return RunSummary(J_Phi=rms(col("phi_s") - col("phi_m")),
                      J_Theta=rms(col("theta_s") - col("theta_m")),
                      J_traj=rms(col("e_xtrack")), N=n)


def _fault_from(cfg: ScenarioConfig, t: float) -> af.FaultConfig:
    f = cfg.fault
    onset = f.get("t_start", 0.0)
    return af.FaultConfig(f["surface"], float(f["stuck_value"]),
                          t if onset == "loiter" else float(onset))


def _position_config(cfg: ScenarioConfig, params, env, mission) -> PositionConfig:
    trim_state, trim_cmd = af.trim_search(params, env, mission.cruise_speed)
    tecs_kw = dict(cfg.outer_loop.get("tecs", {}))
    tecs_kw.setdefault("theta_trim", float(trim_state.euler[1]))
    tecs_kw.setdefault("thrust_trim", float(trim_cmd.throttle))
    l1_kw = dict(cfg.outer_loop.get("l1", {}))
    l1_kw.setdefault("g", env.g)
    return PositionConfig(tecs=TecsGains(**tecs_kw), l1=L1Config(**l1_kw))


def initial_state(params, env, mission: Mission) -> af.AircraftState:
    """Airborne launch slightly below trim speed, heading toward T."""
    (x0, y0), (x1, y1) = mission.launch, mission.target
    heading = math.atan2(y1 - y0, x1 - x0)
    V0 = 0.9 * mission.cruise_speed
    st, _ = af.trim_search(params, env, V0, altitude=5.0, heading=heading)
    st.r[:2] = (x0, y0)
    return st


def simulate(cfg: ScenarioConfig) -> RunResult:
    """Run one closed-loop scenario and return its telemetry and summary."""
    cfg.validate()
    params = cfg.build_params()
    env = af.Environment(wind=tuple(cfg.wind))
    mission = cfg.build_mission()
    gains = cfg.build_gains()
    pos_cfg = _position_config(cfg, params, env, mission)
    att_cfg = AttitudeConfig.for_airframe(params, integrator_bound=tuple(cfg.integrator_bound),
                                          g=env.g)
    bank = None
    if cfg.adaptive:
        hp = cfg.build_hypers()
        bank = RcacBank.create(hp["hyper"], hp["enabled"], integ_bounds=cfg.integrator_bound)
    pilot = Autopilot(params, gains, cfg.degradation_factor, pos_cfg, att_cfg, bank, env.rho0)
    rng = np.random.default_rng(cfg.seed)
    noise = af.NoiseSpec(**cfg.noise) if cfg.noise else None

    state = initial_state(params, env, mission)
    ps = initial_phase_state(mission)
    fault = _fault_from(cfg, 0.0) if cfg.fault and cfg.fault.get("t_start") != "loiter" else None
    rows = []
    failed, reason, completed = False, "", False
    loiter_entry = None
    n_steps = int(round(cfg.duration / cfg.dt))

    for _ in range(n_steps):
        meas = af.measure(state, env, params, noise, rng)
        setpoint, segment, ps_new = mission_update(meas, mission, ps)
        if ps_new.phase == Phase.LOITER and ps.phase != Phase.LOITER:
            loiter_entry = meas.t
            if cfg.fault and cfg.fault.get("t_start") == "loiter":
                fault = _fault_from(cfg, meas.t)
        ps = ps_new
        if ps.phase == Phase.DONE:
            completed = True
            break
        out = pilot.update(meas, setpoint, segment, ps, mission, cfg.dt)
        cmd = af.apply_fault(out.cmd, fault, meas.t)
        flags = list(out.flags)
        if bank is not None:
            flags += bank.flags()
        rows.append(_record(meas, out, cmd, bank, cross_track_error(meas.r_m, segment),
                            ps, flags))
        if state.altitude < 0.0:
            failed, reason = True, f"ground impact at t={meas.t:.2f} s"
            break
        try:
            state = af.step(state, cmd, env, params, cfg.dt)
        except af.FaultStateError as exc:
            failed, reason = True, str(exc)
            break
    else:
        failed, reason = True, f"mission incomplete at t={cfg.duration:.1f} s ({ps.phase.name})"

    telemetry = _columns(rows)
    try:
        summary = metrics(telemetry)
    except MetricsError as exc:
        summary = None
        if not failed:
            failed, reason = True, str(exc)
    final_gains = bank.thetas() if bank is not None else {}
    return RunResult(cfg.name, telemetry, summary, failed, reason, loiter_entry, completed,
                     final_gains)


def _record(meas, out, cmd, bank, e_x, ps, flags) -> tuple:
    sig = out.signals
    if bank is not None:
        th = bank.channels
        gains = (th["theta"].state.theta[0], th["phi"].state.theta[0],
                 *th["omega_x"].state.theta, *th["omega_y"].state.theta,
                 *th["omega_z"].state.theta)
    else:
        gains = (0.0,) * 8
    ad = out.adaptive
    return (meas.t, *meas.r_m.tolist(), meas.h_m, meas.V_T,
            *meas.euler_m.tolist(), out.attitude_sp.theta_s, out.attitude_sp.phi_s,
            *meas.omega_m.tolist(), *sig.omega_s.tolist(), *out.alpha_s.tolist(),
            *cmd.as_tuple(), ad.u_theta, ad.u_phi, *ad.u_omega_pi,
            *(float(g) for g in gains), e_x, ps.phase.name.lower(), ps.mode.value,
            ";".join(flags))


_TEXT_COLUMNS = ("phase", "mode", "flags")


def _columns(rows) -> dict:
    if not rows:
        return {c: np.array([], dtype=object if c in _TEXT_COLUMNS else float)
                for c in TELEMETRY_COLUMNS}
    cols = list(zip(*rows))
    return {c: (np.array(v, dtype=object) if c in _TEXT_COLUMNS else np.array(v, dtype=float))
            for c, v in zip(TELEMETRY_COLUMNS, cols)}


def write_telemetry(telemetry: dict, path) -> None:
    """CSV with a header row and a fixed column order; floats in repr form."""
    n = len(telemetry["t"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TELEMETRY_COLUMNS)
        cols = [telemetry[c] for c in TELEMETRY_COLUMNS]
        for i in range(n):
            w.writerow([c[i] if isinstance(c[i], str) else repr(float(c[i])) for c in cols])


def read_telemetry(path) -> dict:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != TELEMETRY_COLUMNS:
            raise ValueError("unexpected telemetry header")
        rows = list(r)
    return _columns([tuple(v if c in _TEXT_COLUMNS else float(v)
                           for c, v in zip(TELEMETRY_COLUMNS, row)) for row in rows])


def output_root(override: Optional[str] = None) -> Path:
    return Path(override or os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def run_scenario(cfg: ScenarioConfig, out_dir: Optional[Path] = None) -> RunResult:
    """Simulate and write ``<name>.csv`` plus ``<name>.summary.json``."""
    res = simulate(cfg)
    out = Path(out_dir or cfg.output_dir or output_root())
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg.name}.csv"
    write_telemetry(res.telemetry, path)
    res.csv_path = str(path)
    (out / f"{cfg.name}.summary.json").write_text(json.dumps(summary_record(res), indent=2) + "\n")
    return res


def summary_record(res: RunResult) -> dict:
    s = res.summary
    rec = {"name": res.name, "failed": res.failed, "reason": res.reason,
           "completed": res.completed, "loiter_entry": res.loiter_entry,
           "final_gains": {k: list(map(float, v)) for k, v in res.final_gains.items()}}
    if s is not None:
        rec.update({"J_Phi": s.J_Phi, "J_Theta": s.J_Theta, "J_traj": s.J_traj, "N": s.N,
                    "baseline": s.baseline, "normalized": s.normalized})
    return rec


BASELINE_NAME = "nominal_ad1"


def run_name(alpha_d: float, adaptive: bool, fault: bool) -> str:
    tag = "adaptive" if adaptive else "nominal"
    name = f"{tag}_ad{alpha_d:g}".replace(".", "p")
    return name + ("_fault" if fault else "")


@dataclass
class SweepRow:
    name: str
    alpha_d: float
    adaptive: bool
    fault: bool
    result: RunResult


def _simulate_cfg(cfg: ScenarioConfig) -> RunResult:
    return simulate(cfg)


def sweep(base: ScenarioConfig, alphas: Sequence[float], adaptive: Sequence[bool] = (False, True),
          faults: Sequence[bool] = (False,), out_dir: Optional[Path] = None,
          workers: int = 1, fault_spec: Optional[dict] = None, write: bool = True):
    """Cartesian product of degradation, adaptation and fault settings.

    Every summary is normalized by the (alpha_d = 1, adaptive off, healthy)
    run, which must be part of the product.  Returns ``(rows, table)``.
    """
    if not any(a == 1.0 for a in alphas) or False not in adaptive or False not in faults:
        raise ConfigError("sweep must include the alpha_d=1, non-adaptive, healthy baseline")
    fspec = fault_spec or base.fault or {"surface": "aileron_left", "stuck_value": -0.5,
                                         "t_start": "loiter"}
    cfgs, keys = [], []
    for a, ad, f in itertools.product(alphas, adaptive, faults):
        name = run_name(a, ad, f)
        cfgs.append(replace(base, name=name, degradation_factor=float(a), adaptive=bool(ad),
                            fault=copy.deepcopy(fspec) if f else None))
        keys.append((name, float(a), bool(ad), bool(f)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_simulate_cfg, cfgs))
    else:
        results = [simulate(c) for c in cfgs]
    rows = [SweepRow(k[0], k[1], k[2], k[3], r) for k, r in zip(keys, results)]
    base_row = next(r for r in rows if r.alpha_d == 1.0 and not r.adaptive and not r.fault)
    if base_row.result.summary is None:
        raise MetricsError(f"baseline run failed: {base_row.result.reason}")
    for r in rows:
        if r.result.summary is not None:
            r.result.summary = r.result.summary.normalize(base_row.result.summary, base_row.name)
    table = summary_table(rows)
    if write:
        out = Path(out_dir or base.output_dir or output_root())
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.csv").write_text(table)
        for r in rows:
            p = out / f"{r.name}.csv"
            write_telemetry(r.result.telemetry, p)
            r.result.csv_path = str(p)
        from .plots import write_sweep_plots
        write_sweep_plots(rows, out)
    return rows, table


SUMMARY_COLUMNS = ("name", "alpha_d", "adaptive", "fault", "failed", "J_Phi", "J_Theta",
                   "J_traj", "N", "J_Phi_norm", "J_Theta_norm", "J_traj_norm", "baseline",
                   "reason")


def summary_table(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        s = r.result.summary
        if s is None:
            vals = ["", "", "", "", "", "", "", ""]
        else:
            n = s.normalized
            vals = [repr(s.J_Phi), repr(s.J_Theta), repr(s.J_traj), s.N,
                    repr(n.get("J_Phi", math.nan)), repr(n.get("J_Theta", math.nan)),
                    repr(n.get("J_traj", math.nan)), s.baseline or ""]
        w.writerow([r.name, repr(r.alpha_d), int(r.adaptive), int(r.fault),
                    int(r.result.failed), *vals, r.result.reason])
    return buf.getvalue()
