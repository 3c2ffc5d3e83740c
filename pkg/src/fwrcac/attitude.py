"""Inner-loop attitude controller.

Proportional elevation/bank laws, coordinated-turn azimuth rate, the
Euler-rate to body-rate map, the airspeed-scaled feedforward + PI
angular-acceleration law and pseudo-inverse control allocation.  The
adaptive signals u_Theta, u_Phi and u_omega_PI enter additively; with all
three at zero the update is exactly the fixed-gain autopilot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .airframe import AircraftParams, Measurements, SurfaceCommand


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class AttitudeGains:
    """The eleven fixed attitude-loop gains.

    The three rate-loop matrices are diagonal, so only their diagonals are
    stored (roll, pitch, yaw order).
    """

    k_theta: float
    k_phi: float
    k_omega_ff: tuple[float, float, float]
    k_omega_P: tuple[float, float, float]
    k_omega_I: tuple[float, float, float]

    def __post_init__(self):
        for name in ("k_omega_ff", "k_omega_P", "k_omega_I"):
            vals = tuple(float(x) for x in getattr(self, name))
            if len(vals) != 3:
                raise ValueError(f"{name} needs three diagonal entries")
            object.__setattr__(self, name, vals)
        if not all(math.isfinite(x) for x in self.as_vector()):
            raise ValueError("gains must be finite")

    def as_vector(self) -> np.ndarray:
        return np.array([self.k_theta, self.k_phi, *self.k_omega_ff,
                         *self.k_omega_P, *self.k_omega_I])

    @classmethod
    def from_vector(cls, x) -> "AttitudeGains":
        x = [float(v) for v in x]
        if len(x) != 11:
            raise ValueError("expected 11 gains")
        return cls(x[0], x[1], tuple(x[2:5]), tuple(x[5:8]), tuple(x[8:11]))

    @classmethod
    def from_dict(cls, d: dict) -> "AttitudeGains":
        return cls(d["k_theta"], d["k_phi"], tuple(d["k_omega_ff"]),
                   tuple(d["k_omega_P"]), tuple(d["k_omega_I"]))

    def to_dict(self) -> dict:
        return {"k_theta": self.k_theta, "k_phi": self.k_phi,
                "k_omega_ff": list(self.k_omega_ff), "k_omega_P": list(self.k_omega_P),
                "k_omega_I": list(self.k_omega_I)}

    @property
    def K_ff(self) -> np.ndarray:
        return np.diag(self.k_omega_ff)

    @property
    def K_P(self) -> np.ndarray:
        return np.diag(self.k_omega_P)

    @property
    def K_I(self) -> np.ndarray:
        return np.diag(self.k_omega_I)


# Tuned for the bundled airframe; rate-loop gains are in rad/s^2 per rad/s.
NOMINAL_GAINS = AttitudeGains(
    k_theta=2.0, k_phi=2.5,
    k_omega_ff=(13.0, 6.0, 2.0),
    k_omega_P=(8.0, 8.0, 4.0),
    k_omega_I=(5.0, 5.0, 1.0),
)


def degrade(gains: AttitudeGains, alpha_d: float) -> AttitudeGains:
    """Scale all eleven gains by ``alpha_d``."""
    if alpha_d < 0 or not math.isfinite(alpha_d):
        raise ValueError("degradation factor must be a finite value >= 0")
    return AttitudeGains.from_vector(alpha_d * gains.as_vector())


@dataclass
class RateLoopState:
    integrator: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.integrator = np.asarray(self.integrator, dtype=float).reshape(3)


@dataclass(frozen=True)
class AttitudeSetpoint:
    phi_s: float
    theta_s: float


@dataclass(frozen=True)
class AdaptiveInputs:
    u_theta: float = 0.0
    u_phi: float = 0.0
    u_omega_pi: tuple[float, float, float] = (0.0, 0.0, 0.0)


ZERO_ADAPTIVE = AdaptiveInputs()


@dataclass(frozen=True)
class AttitudeConfig:
    V_T0: float
    V_I0: float
    integrator_bound: tuple[float, float, float] = (0.3, 0.3, 0.3)
    # below v_min the airspeed factors sit at the upper scale limit; by
    # default this is the speed at which they reach it
    v_min: Optional[float] = None
    scale_limits: tuple[float, float] = (0.25, 4.0)
    g: float = 9.81

    def __post_init__(self):
        if self.v_min is None:
            object.__setattr__(self, "v_min", min(self.V_T0, self.V_I0) / self.scale_limits[1])

    @classmethod
    def for_airframe(cls, params: AircraftParams, **kw) -> "AttitudeConfig":
        return cls(V_T0=params.V_T0, V_I0=params.V_I0, **kw)


def elevation_rate_setpoint(theta_s: float, theta_m: float, k_theta: float,
                            u_theta: float = 0.0) -> float:
    return k_theta * (theta_s - theta_m) + u_theta


def bank_rate_setpoint(phi_s: float, phi_m: float, k_phi: float, u_phi: float = 0.0) -> float:
    return k_phi * (phi_s - phi_m) + u_phi


def coordinated_turn_rate(phi_s: float, theta_s: float, V_T: float, g: float = 9.81,
                          v_min: float = 1.0) -> tuple[float, bool]:
    """Azimuth-rate setpoint for a coordinated turn.

    Returns ``(psi_dot_s, saturated)``; below ``v_min`` the airspeed is
    replaced by ``v_min``.
    """
    saturated = V_T < v_min
    V = v_min if saturated else V_T
    return g * math.tan(phi_s) * math.cos(theta_s) / V, saturated


def euler_rate_matrix(theta: float, phi: float) -> np.ndarray:
    """Map (phi_dot, theta_dot, psi_dot) to body rates (p, q, r), 3-2-1 sequence."""
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    return np.array([[1.0, 0.0, -st],
                     [0.0, cp, sp * ct],
                     [0.0, -sp, cp * ct]])


def euler_rates_to_body(theta_m: float, phi_m: float, rates) -> np.ndarray:
    phi_dot, theta_dot, psi_dot = rates
    st, ct = math.sin(theta_m), math.cos(theta_m)
    sp, cp = math.sin(phi_m), math.cos(phi_m)
    return np.array([phi_dot - st * psi_dot,
                     cp * theta_dot + sp * ct * psi_dot,
                     -sp * theta_dot + cp * ct * psi_dot])


def body_to_euler_rates(theta_m: float, phi_m: float, omega) -> np.ndarray:
    """Inverse of :func:`euler_rates_to_body` (requires |theta| < pi/2)."""
    p, q, r = omega
    sp, cp = math.sin(phi_m), math.cos(phi_m)
    ct, tt = math.cos(theta_m), math.tan(theta_m)
    return np.array([p + (q * sp + r * cp) * tt, q * cp - r * sp, (q * sp + r * cp) / ct])


def _clip(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def angular_accel_setpoint(omega_s, omega_m, V_T: float, V_I: float, cfg: AttitudeConfig,
                           gains: AttitudeGains, rate_state: RateLoopState,
                           u_omega_pi=(0.0, 0.0, 0.0), dt: float = 0.004):
    """Feedforward + PI angular-acceleration setpoint.

    Returns ``(alpha_s, new_rate_state, saturated)``.  The integrator sums
    the rate error times ``dt`` and is clamped per axis to
    ``cfg.integrator_bound``; the airspeed factors are clamped to
    ``cfg.scale_limits``.
    """
    lo, hi = cfg.scale_limits
    saturated = V_T < cfg.v_min or V_I < cfg.v_min
    vt = max(V_T, cfg.v_min)
    vi = max(V_I, cfg.v_min)
    s_ff = _clip(cfg.V_T0 / vt, lo, hi)
    s_pi = _clip((cfg.V_I0 / vi) ** 2, lo, hi)

    alpha = np.empty(3)
    integ = np.empty(3)
    for i in range(3):
        e = omega_s[i] - omega_m[i]
        b = cfg.integrator_bound[i]
        integ[i] = _clip(rate_state.integrator[i] + e * dt, -b, b)
        alpha[i] = (s_ff * gains.k_omega_ff[i] * omega_s[i]
                    + s_pi * (gains.k_omega_P[i] * e + gains.k_omega_I[i] * integ[i])
                    + u_omega_pi[i])
    return alpha, RateLoopState(integ), saturated


class ControlAllocator:
    """Pseudo-inverse allocation of a moment demand to the four surfaces.

    The effectiveness matrix maps normalized deflections
    (aileron_left, aileron_right, elevator, rudder) to body moments at the
    trim dynamic pressure.  It is computed once; allocation does not react to
    failed surfaces.
    """

    def __init__(self, params: AircraftParams, rho0: float = 1.225):
        qbar_s = 0.5 * rho0 * params.V_I0 ** 2 * params.wing_area
        lim, eff = params.deflection_limits, params.effectiveness
        b, c = params.span, params.chord
        B = np.zeros((3, 4))
        B[0, 0] = qbar_s * b * params.Clda * lim["aileron_left"] * eff["aileron_left"]
        B[0, 1] = -qbar_s * b * params.Clda * lim["aileron_right"] * eff["aileron_right"]
        B[1, 2] = qbar_s * c * params.Cmde * lim["elevator"] * eff["elevator"]
        B[2, 3] = qbar_s * b * params.Cndr * lim["rudder"] * eff["rudder"]
        if np.linalg.matrix_rank(B) < 3:
            raise ConfigurationError("surface effectiveness matrix is rank deficient")
        self.B = B
        # right inverse of a full-row-rank matrix, i.e. the pseudo-inverse
        self.B_pinv = B.T @ np.linalg.inv(B @ B.T)
        self.inertia = np.array(params.inertia)

    def deflections(self, alpha_s) -> np.ndarray:
        """Unclamped normalized deflections for an angular-acceleration demand."""
        return self.B_pinv @ (self.inertia * np.asarray(alpha_s, dtype=float))

    def allocate(self, alpha_s, T_s: float) -> SurfaceCommand:
        d = np.clip(self.deflections(alpha_s), -1.0, 1.0)
        return SurfaceCommand(float(d[0]), float(d[1]), float(d[2]), float(d[3]),
                              float(min(1.0, max(0.0, T_s))))


def control_allocation(alpha_s, T_s: float, params: AircraftParams) -> SurfaceCommand:
    return ControlAllocator(params).allocate(alpha_s, T_s)


@dataclass
class AttitudeSignals:
    theta_dot_s: float
    phi_dot_s: float
    psi_dot_s: float
    omega_s: np.ndarray
    e_theta: float
    e_phi: float
    e_omega: np.ndarray
    saturated: bool = False


def attitude_update(meas: Measurements, setpoint: AttitudeSetpoint, gains: AttitudeGains,
                    rate_state: RateLoopState, adaptive: AdaptiveInputs,
                    cfg: AttitudeConfig, dt: float):
    """One inner-loop step.

    Returns ``(alpha_s, signals, new_rate_state)``.  ``signals`` carries the
    elevation, bank and body-rate errors used as adaptive performance
    variables.
    """
    theta_m, phi_m = meas.theta, meas.phi
    e_theta = setpoint.theta_s - theta_m
    e_phi = setpoint.phi_s - phi_m
    theta_dot = gains.k_theta * e_theta + adaptive.u_theta
    phi_dot = gains.k_phi * e_phi + adaptive.u_phi
    psi_dot, sat_turn = coordinated_turn_rate(setpoint.phi_s, setpoint.theta_s, meas.V_T,
                                              cfg.g, cfg.v_min)
    omega_s = euler_rates_to_body(theta_m, phi_m, (phi_dot, theta_dot, psi_dot))
    alpha_s, new_state, sat_rate = angular_accel_setpoint(
        omega_s, meas.omega_m, meas.V_T, meas.V_I, cfg, gains, rate_state,
        adaptive.u_omega_pi, dt)
    signals = AttitudeSignals(theta_dot, phi_dot, psi_dot, omega_s, e_theta, e_phi,
                              omega_s - meas.omega_m, sat_turn or sat_rate)
    return alpha_s, signals, new_state
