"""Mission sequencing: climb-out toward T, timed loiter, landing approach."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .airframe import Measurements
from .attitude import AttitudeSetpoint
from .position import PathSegment, PositionSetpoint


class Phase(enum.IntEnum):
    CLIMB = 0
    LOITER = 1
    LAND = 2
    DONE = 3


class Mode(enum.Enum):
    MISSION = "mission"
    STABILIZED = "stabilized"


@dataclass(frozen=True)
class PilotScript:
    """Time-indexed (phi_s, theta_s) table, linearly interpolated.

    Times are relative to the entry of the stabilized segment.
    """

    times: tuple
    phi: tuple
    theta: tuple

    def __post_init__(self):
        if not (len(self.times) == len(self.phi) == len(self.theta) >= 1):
            raise ValueError("script columns must have equal nonzero length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("script times must be strictly increasing")

    def at(self, t: float) -> tuple[float, float]:
        return (float(np.interp(t, self.times, self.phi)),
                float(np.interp(t, self.times, self.theta)))


@dataclass(frozen=True)
class Mission:
    launch: tuple
    target: tuple
    loiter_center: tuple
    loiter_radius: float
    loiter_duration: float
    landing_line: tuple  # ((n0, e0), (n1, e1)), touchdown at the second point
    cruise_speed: float
    climb_altitude: float
    loiter_direction: int = 1
    capture_factor: float = 1.5
    glide_slope: float = math.radians(6.0)
    touchdown_altitude: float = 1.0
    takeoff_script: Optional[PilotScript] = None
    landing_script: Optional[PilotScript] = None
    name: str = "custom"

    def __post_init__(self):
        if not self.loiter_radius > 0:
            raise ValueError("loiter radius must be positive")
        if not self.loiter_duration > 0:
            raise ValueError("loiter duration must be positive")
        if not self.climb_altitude > 0:
            raise ValueError("climb altitude must be positive")
        if not self.cruise_speed > 0:
            raise ValueError("cruise speed must be positive")

    def climb_segment(self) -> PathSegment:
        return PathSegment.line(self.launch, self.target)

    def loiter_segment(self) -> PathSegment:
        return PathSegment.arc(self.loiter_center, self.loiter_radius, self.loiter_direction)

    def landing_segment(self) -> PathSegment:
        return PathSegment.line(*self.landing_line)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "name", "launch", "target", "loiter_center", "loiter_radius", "loiter_duration",
            "landing_line", "cruise_speed", "climb_altitude", "loiter_direction",
            "capture_factor", "glide_slope", "touchdown_altitude")}
        for key in ("takeoff_script", "landing_script"):
            s = getattr(self, key)
            d[key] = None if s is None else {"times": list(s.times), "phi": list(s.phi),
                                             "theta": list(s.theta)}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Mission":
        d = dict(d)
        for key in ("takeoff_script", "landing_script"):
            if d.get(key) is not None:
                s = d[key]
                d[key] = PilotScript(tuple(s["times"]), tuple(s["phi"]), tuple(s["theta"]))
        for key in ("launch", "target", "loiter_center"):
            d[key] = tuple(float(x) for x in d[key])
        d["landing_line"] = tuple(tuple(float(x) for x in p) for p in d["landing_line"])
        return cls(**d)


def sim_profile() -> Mission:
    """Simulation mission: 20 m climb, 30 m loiter radius for 60 s."""
    return Mission(
        name="sim_profile",
        launch=(0.0, 0.0), target=(260.0, 0.0),
        loiter_center=(200.0, 36.0), loiter_radius=30.0, loiter_duration=60.0,
        landing_line=((260.0, 140.0), (0.0, 140.0)),
        cruise_speed=13.0, climb_altitude=20.0,
    )


def exp_profile() -> Mission:
    """Flight-test style mission: 20 m radius, pilot-flown takeoff and landing."""
    takeoff = PilotScript(times=(0.0, 4.0, 8.0), phi=(0.0, 0.0, 0.0),
                          theta=(0.20, 0.15, 0.05))
    landing = PilotScript(times=(0.0, 3.0, 12.0), phi=(0.0, 0.0, 0.0),
                          theta=(0.0, -0.08, -0.05))
    return Mission(
        name="exp_profile",
        launch=(0.0, 0.0), target=(240.0, 0.0),
        loiter_center=(200.0, 26.0), loiter_radius=20.0, loiter_duration=90.0,
        landing_line=((260.0, 120.0), (0.0, 120.0)),
        cruise_speed=13.0, climb_altitude=20.0,
        takeoff_script=takeoff, landing_script=landing,
    )


BUILTIN_MISSIONS = {"sim_profile": sim_profile, "exp_profile": exp_profile}


@dataclass(frozen=True)
class PhaseState:
    phase: Phase = Phase.CLIMB
    phase_entry_time: float = 0.0
    mode: Mode = Mode.MISSION
    mode_entry_time: float = 0.0
    # horizontal setpoint offset carried across a segment switch; decays to zero
    r_offset: tuple = (0.0, 0.0)
    offset_time: float = 0.0


def initial_phase_state(mission: Mission, t: float = 0.0) -> PhaseState:
    mode = Mode.STABILIZED if mission.takeoff_script is not None else Mode.MISSION
    return PhaseState(Phase.CLIMB, t, mode, t)


SETPOINT_BLEND_TIME = 2.0


def _segment_for(phase: Phase, mission: Mission) -> PathSegment:
    if phase == Phase.CLIMB:
        return mission.climb_segment()
    if phase == Phase.LOITER:
        return mission.loiter_segment()
    return mission.landing_segment()


def _altitude_setpoint(phase: Phase, p, mission: Mission) -> float:
    if phase in (Phase.CLIMB, Phase.LOITER):
        return mission.climb_altitude
    (x0, y0), (x1, y1) = mission.landing_line
    dx, dy = x1 - x0, y1 - y0
    n = math.hypot(dx, dy)
    remaining = ((x1 - p[0]) * dx + (y1 - p[1]) * dy) / n
    glide = max(0.0, remaining) * math.tan(mission.glide_slope)
    return min(mission.climb_altitude, glide)


def _raw_setpoint(phase: Phase, p, mission: Mission) -> tuple[float, float, float]:
    seg = _segment_for(phase, mission)
    cx, cy = seg.closest_point(p)
    return cx, cy, _altitude_setpoint(phase, p, mission)


def mission_update(meas: Measurements, mission: Mission, ps: PhaseState):
    """Advance the phase machine and emit the active setpoint and path.

    ``r_s`` is the nearest point of the active path at altitude ``h_s``.
    When the active path switches, the jump in ``r_s`` is carried as an
    offset that decays linearly to zero over ``SETPOINT_BLEND_TIME``.
    """
    t = meas.t
    p = (float(meas.r_m[0]), float(meas.r_m[1]))
    new = ps

    if ps.phase == Phase.CLIMB:
        if ps.mode == Mode.STABILIZED and mission.takeoff_script is not None \
                and t - ps.mode_entry_time >= mission.takeoff_script.times[-1]:
            new = replace(new, mode=Mode.MISSION, mode_entry_time=t)
        c = mission.loiter_center
        d = math.hypot(p[0] - c[0], p[1] - c[1])
        closing = (p[0] - c[0]) * meas.v_ground[0] + (p[1] - c[1]) * meas.v_ground[1] < 0
        if new.mode == Mode.MISSION and d <= mission.capture_factor * mission.loiter_radius \
                and closing:
            new = replace(new, phase=Phase.LOITER, phase_entry_time=t)
    elif ps.phase == Phase.LOITER:
        if t - ps.phase_entry_time >= mission.loiter_duration - 1e-9:
            new = replace(new, phase=Phase.LAND, phase_entry_time=t)
    elif ps.phase == Phase.LAND:
        # pilot takes over for the final approach once below half the climb altitude
        if mission.landing_script is not None and ps.mode == Mode.MISSION \
                and _altitude_setpoint(Phase.LAND, p, mission) < mission.climb_altitude * 0.5:
            new = replace(new, mode=Mode.STABILIZED, mode_entry_time=t)
        if meas.h_m <= mission.touchdown_altitude:
            new = replace(new, phase=Phase.DONE, phase_entry_time=t)

    if new.phase != ps.phase and new.phase != Phase.DONE:
        old_sp = _blended(ps, _raw_setpoint(ps.phase, p, mission), t)
        fresh = _raw_setpoint(new.phase, p, mission)
        new = replace(new, r_offset=(old_sp[0] - fresh[0], old_sp[1] - fresh[1]),
                      offset_time=t)

    seg_phase = new.phase if new.phase != Phase.DONE else Phase.LAND
    raw = _raw_setpoint(seg_phase, p, mission)
    sp = _blended(new, raw, t)
    setpoint = PositionSetpoint(r_s=np.array([sp[0], sp[1], -sp[2]]), h_s=sp[2],
                                V_Ts=mission.cruise_speed)
    return setpoint, _segment_for(seg_phase, mission), new


def _blended(ps: PhaseState, raw, t: float):
    w = max(0.0, 1.0 - (t - ps.offset_time) / SETPOINT_BLEND_TIME)
    return raw[0] + w * ps.r_offset[0], raw[1] + w * ps.r_offset[1], raw[2]


class ModeError(RuntimeError):
    pass


def scripted_pilot(meas: Measurements, ps: PhaseState, script: PilotScript) -> AttitudeSetpoint:
    """Pilot attitude commands for a stabilized-mode segment."""
    if ps.mode != Mode.STABILIZED:
        raise ModeError("scripted pilot is only used in stabilized mode")
    phi, theta = script.at(meas.t - ps.mode_entry_time)
    return AttitudeSetpoint(phi_s=phi, theta_s=theta)
