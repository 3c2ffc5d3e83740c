"""Outer loop: energy-based longitudinal control and L1 lateral guidance.

Both controllers are simplified forms of the usual flight-stack versions.
Their gains are fixed; degradation and adaptation act only on the inner
attitude loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .airframe import Measurements


@dataclass(frozen=True)
class PositionSetpoint:
    r_s: np.ndarray
    h_s: float
    V_Ts: float

    def __post_init__(self):
        if not self.V_Ts > 0:
            raise ValueError("airspeed setpoint must be positive")


@dataclass(frozen=True)
class PathSegment:
    """A straight line ``p0 -> p1`` or an arc about ``center``.

    Points are horizontal (north, east).  ``direction`` is +1 for clockwise
    (right-hand turns seen from above) and -1 for counter-clockwise.
    """

    kind: str
    p0: tuple = (0.0, 0.0)
    p1: tuple = (0.0, 0.0)
    center: tuple = (0.0, 0.0)
    radius: float = 0.0
    direction: int = 1
    tolerance: float = 5.0

    def __post_init__(self):
        if self.kind == "line":
            if math.dist(self.p0, self.p1) == 0.0:
                raise ValueError("line segment endpoints coincide")
        elif self.kind == "arc":
            if not self.radius > 0:
                raise ValueError("arc radius must be positive")
            if self.direction not in (1, -1):
                raise ValueError("arc direction must be +1 or -1")
        else:
            raise ValueError(f"unknown segment kind {self.kind!r}")

    @classmethod
    def line(cls, p0, p1, tolerance: float = 5.0) -> "PathSegment":
        return cls("line", p0=tuple(map(float, p0)), p1=tuple(map(float, p1)),
                   tolerance=tolerance)

    @classmethod
    def arc(cls, center, radius: float, direction: int = 1,
            tolerance: float = 5.0) -> "PathSegment":
        return cls("arc", center=tuple(map(float, center)), radius=float(radius),
                   direction=direction, tolerance=tolerance)

    def closest_point(self, p) -> tuple[float, float]:
        """Nearest point of the (infinite) line or full circle."""
        px, py = float(p[0]), float(p[1])
        if self.kind == "line":
            ax, ay = self.p0
            dx, dy = self.p1[0] - ax, self.p1[1] - ay
            s = ((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy)
            return ax + s * dx, ay + s * dy
        cx, cy = self.center
        d = math.hypot(px - cx, py - cy)
        if d == 0.0:
            return cx + self.radius, cy
        return cx + (px - cx) * self.radius / d, cy + (py - cy) * self.radius / d


@dataclass(frozen=True)
class TecsGains:
    k_h: float = 0.4          # altitude error -> climb-rate demand, 1/s
    k_v: float = 0.5          # airspeed error -> acceleration demand, 1/s
    climb_max: float = 3.0
    sink_max: float = 2.5
    accel_max: float = 2.0
    k_thr_p: float = 0.04     # throttle per (m^2/s^3) of total-energy-rate error
    k_thr_i: float = 0.01
    k_pitch_p: float = 0.6    # pitch per (m^2/s^3)/(g V) of balance-rate error
    k_pitch_i: float = 0.15
    integ_bound: float = 5.0
    theta_min: float = -0.35
    theta_max: float = 0.45
    thrust_max: float = 1.0
    v_min: float = 8.0
    theta_trim: float = 0.0
    thrust_trim: float = 0.2
    accel_tau: float = 0.2    # low-pass time constant of the airspeed derivative, s


@dataclass
class TecsState:
    integ_thrust: float = 0.0
    integ_pitch: float = 0.0
    V_prev: Optional[float] = None
    accel: float = 0.0
    underspeed: bool = False


def tecs_update(h_s: float, h_m: float, V_Ts: float, V_T: float, climb_rate: float,
                accel: float, tecs: TecsState, gains: TecsGains, dt: float,
                g: float = 9.81):
    """Energy-rate control of thrust and pitch.

    Total specific-energy rate error drives thrust; the balance between
    potential- and kinetic-energy rates drives pitch.  Returns
    ``(T_s, theta_s, new_state)`` with ``T_s`` normalized to [0, thrust_max].
    """
    G = gains
    if not V_T > G.v_min:
        new = TecsState(tecs.integ_thrust, tecs.integ_pitch, tecs.V_prev, tecs.accel, True)
        return G.thrust_max, max(G.theta_min, min(G.theta_max, G.theta_min / 2.0)), new

    h_rate_sp = min(G.climb_max, max(-G.sink_max, G.k_h * (h_s - h_m)))
    v_dot_sp = min(G.accel_max, max(-G.accel_max, G.k_v * (V_Ts - V_T)))

    ste_err = g * (h_rate_sp - climb_rate) + V_T * (v_dot_sp - accel)
    seb_err = (g * (h_rate_sp - climb_rate) - V_T * (v_dot_sp - accel)) / (g * V_T)

    b = G.integ_bound
    it = min(b, max(-b, tecs.integ_thrust + ste_err * dt))
    ip = min(b, max(-b, tecs.integ_pitch + seb_err * dt))

    T_s = G.thrust_trim + G.k_thr_p * ste_err + G.k_thr_i * it
    theta_s = G.theta_trim + G.k_pitch_p * seb_err + G.k_pitch_i * ip
    T_s = min(G.thrust_max, max(0.0, T_s))
    theta_s = min(G.theta_max, max(G.theta_min, theta_s))
    return T_s, theta_s, TecsState(it, ip, tecs.V_prev, tecs.accel, False)


@dataclass(frozen=True)
class L1Config:
    period: float = 5.0
    damping: float = 0.75
    phi_max: float = math.radians(45.0)
    g: float = 9.81


def l1_distance(speed: float, period: float, damping: float) -> float:
    return damping * period * speed / math.pi


def _reference_point(p, segment: PathSegment, L1: float):
    """Point at distance ``L1`` ahead on the path, or None if undefined."""
    px, py = p
    if segment.kind == "line":
        ax, ay = segment.p0
        dx, dy = segment.p1[0] - ax, segment.p1[1] - ay
        n = math.hypot(dx, dy)
        ux, uy = dx / n, dy / n
        along = (px - ax) * ux + (py - ay) * uy
        qx, qy = ax + along * ux, ay + along * uy
        e = math.hypot(px - qx, py - qy)
        ahead = math.sqrt(L1 * L1 - e * e) if e < L1 else 0.0
        return qx + ahead * ux, qy + ahead * uy

    cx, cy = segment.center
    R = segment.radius
    d = math.hypot(px - cx, py - cy)
    if d < 1e-6:
        return None
    ex, ey = (px - cx) / d, (py - cy) / d
    if abs(d - R) >= L1 or L1 > d + R:
        # too far from the circle to intersect; aim at the nearest point
        return cx + R * ex, cy + R * ey
    # intersection of |x - p| = L1 with |x - c| = R, taking the one ahead
    a = (d * d + R * R - L1 * L1) / (2.0 * d)
    hh = math.sqrt(max(0.0, R * R - a * a))
    mx, my = cx + a * ex, cy + a * ey
    # clockwise travel (north -> east) has tangent (-ey, ex)
    sgn = float(segment.direction)
    return mx - sgn * hh * ey, my + sgn * hh * ex


def lateral_guidance(r_m, vg, segment: PathSegment, L1_period: float, L1_damping: float,
                     g: float = 9.81, phi_max: float = math.radians(45.0),
                     phi_prev: float = 0.0):
    """L1 bank-angle command toward a point ``L1`` ahead on ``segment``.

    Returns ``(phi_s, degenerate)``; when the reference point is undefined
    the previous command is held and ``degenerate`` is True.
    """
    vx, vy = float(vg[0]), float(vg[1])
    speed = math.hypot(vx, vy)
    if speed <= 0.1:
        return phi_prev, True
    L1 = l1_distance(speed, L1_period, L1_damping)
    p = (float(r_m[0]), float(r_m[1]))
    ref = _reference_point(p, segment, L1)
    if ref is None:
        return phi_prev, True
    lx, ly = ref[0] - p[0], ref[1] - p[1]
    dist = math.hypot(lx, ly)
    if dist < 1e-9:
        return phi_prev, True
    eta = math.atan2(vx * ly - vy * lx, vx * lx + vy * ly)
    eta = max(-math.pi / 2, min(math.pi / 2, eta))
    a_cmd = 2.0 * speed * speed / L1 * math.sin(eta)
    phi = math.atan(a_cmd / g)
    return max(-phi_max, min(phi_max, phi)), False


@dataclass(frozen=True)
class PositionConfig:
    tecs: TecsGains = field(default_factory=TecsGains)
    l1: L1Config = field(default_factory=L1Config)


def position_update(meas: Measurements, setpoint: PositionSetpoint, segment: PathSegment,
                    state: TecsState, cfg: PositionConfig, dt: float,
                    phi_prev: float = 0.0):
    """Compose TECS and L1 guidance.

    The airspeed derivative fed to TECS is a low-pass filtered difference
    kept in ``state``.  Returns ``(T_s, theta_s, phi_s, new_state, flags)``.
    """
    if state.V_prev is None:
        accel = 0.0
    else:
        raw = (meas.V_T - state.V_prev) / dt
        a = dt / (cfg.tecs.accel_tau + dt)
        accel = state.accel + a * (raw - state.accel)
    T_s, theta_s, tecs = tecs_update(setpoint.h_s, meas.h_m, setpoint.V_Ts, meas.V_T,
                                     meas.climb_rate, accel, state, cfg.tecs, dt, cfg.l1.g)
    tecs.V_prev = meas.V_T
    tecs.accel = accel
    phi_s, degenerate = lateral_guidance(meas.r_m, meas.v_ground, segment, cfg.l1.period,
                                         cfg.l1.damping, cfg.l1.g, cfg.l1.phi_max, phi_prev)
    flags = []
    if tecs.underspeed:
        flags.append("underspeed")
    if degenerate:
        flags.append("guidance_degenerate")
    return T_s, theta_s, phi_s, tecs, flags
