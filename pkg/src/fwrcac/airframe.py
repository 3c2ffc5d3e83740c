"""Fixed-wing rigid-body plant.

Six degree-of-freedom dynamics in a flat-Earth NED frame with a
linear-coefficient aerodynamic model, individually actuated ailerons,
stuck-surface fault injection and sensor extraction.

State layout used by the integrator (all floats)::

    [r_n, r_e, r_d, v_n, v_e, v_d, psi, theta, phi, p, q, r]

Body axes are x forward, y along the right wing, z down.  ``omega`` is
ordered (roll rate p, pitch rate q, yaw rate r).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

SURFACES = ("aileron_left", "aileron_right", "elevator", "rudder")
STATE_NAMES = ("r_n", "r_e", "r_d", "v_n", "v_e", "v_d",
               "psi", "theta", "phi", "p", "q", "r")
GIMBAL_MARGIN = 0.01


class FaultStateError(RuntimeError):
    """Raised when the plant produces a non-finite quantity."""

    def __init__(self, quantity: str, value: float, t: float = float("nan")):
        super().__init__(f"non-finite {quantity} ({value!r}) at t={t:.4f} s")
        self.quantity = quantity
        self.value = value
        self.t = t


class GimbalLockError(FaultStateError):
    def __init__(self, theta: float, t: float = float("nan")):
        RuntimeError.__init__(
            self, f"elevation {theta:.4f} rad inside gimbal guard at t={t:.4f} s")
        self.quantity = "theta"
        self.value = theta
        self.t = t


class TrimError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


@dataclass
class AircraftState:
    r: np.ndarray
    v: np.ndarray
    euler: np.ndarray  # (psi, theta, phi)
    omega: np.ndarray  # (p, q, r)
    t: float = 0.0

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float).reshape(3)
        self.v = np.asarray(self.v, dtype=float).reshape(3)
        self.euler = np.asarray(self.euler, dtype=float).reshape(3)
        self.omega = np.asarray(self.omega, dtype=float).reshape(3)

    @property
    def altitude(self) -> float:
        return -float(self.r[2])

    def as_vector(self) -> list[float]:
        return [*self.r.tolist(), *self.v.tolist(), *self.euler.tolist(), *self.omega.tolist()]

    @classmethod
    def from_vector(cls, x, t: float) -> "AircraftState":
        return cls(r=x[0:3], v=x[3:6], euler=x[6:9], omega=x[9:12], t=t)


@dataclass
class AircraftParams:
    """Airframe description; loadable from and savable to JSON."""

    mass: float
    inertia: tuple[float, float, float]
    wing_area: float
    span: float
    chord: float
    CL0: float
    CLalpha: float
    CD0: float
    k_induced: float
    CYbeta: float
    Cm0: float
    Cmalpha: float
    Cmq: float
    Cmde: float
    Clbeta: float
    Clp: float
    Clda: float
    Cnbeta: float
    Cnr: float
    Cndr: float
    Clr: float
    Cnp: float
    alpha_max: float
    effectiveness: dict = field(default_factory=lambda: {s: 1.0 for s in SURFACES})
    deflection_limits: dict = field(default_factory=lambda: {s: 0.35 for s in SURFACES})
    max_thrust: float = 10.0
    V_T0: float = 13.0
    V_I0: float = 13.0

    def __post_init__(self):
        self.inertia = tuple(float(j) for j in self.inertia)
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if len(self.inertia) != 3 or min(self.inertia) <= 0:
            raise ValueError("inertia diagonal must be three positive values")
        if self.V_T0 <= 0 or self.V_I0 <= 0:
            raise ValueError("trim airspeeds must be positive")
        missing = set(SURFACES) - set(self.deflection_limits)
        if missing:
            raise ValueError(f"missing deflection limits for {sorted(missing)}")
        if min(self.deflection_limits[s] for s in SURFACES) <= 0:
            raise ValueError("deflection limits must be positive")
        self.effectiveness = {s: float(self.effectiveness.get(s, 1.0)) for s in SURFACES}

    @classmethod
    def from_dict(cls, data: dict) -> "AircraftParams":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names - {"name", "schema_version"}
        if unknown:
            raise ValueError(f"unknown airframe fields: {sorted(unknown)}")
        return cls(**{k: v for k, v in data.items() if k in names})

    @classmethod
    def from_json(cls, path) -> "AircraftParams":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self, path) -> None:
        data = asdict(self)
        data["inertia"] = list(self.inertia)
        Path(path).write_text(json.dumps(data, indent=2) + "\n")


def default_params() -> AircraftParams:
    """The bundled representative small-UAV airframe."""
    text = resources.files("fwrcac.data").joinpath("default_airframe.json").read_text()
    return AircraftParams.from_dict(json.loads(text))


@dataclass(frozen=True)
class SurfaceCommand:
    aileron_left: float = 0.0
    aileron_right: float = 0.0
    elevator: float = 0.0
    rudder: float = 0.0
    throttle: float = 0.0

    def clamped(self) -> "SurfaceCommand":
        c = lambda x: min(1.0, max(-1.0, x))
        return SurfaceCommand(c(self.aileron_left), c(self.aileron_right),
                              c(self.elevator), c(self.rudder),
                              min(1.0, max(0.0, self.throttle)))

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.aileron_left, self.aileron_right, self.elevator,
                self.rudder, self.throttle)


@dataclass(frozen=True)
class FaultConfig:
    surface: str
    stuck_value: float
    t_start: float = 0.0

    def __post_init__(self):
        if self.surface not in SURFACES:
            raise ValueError(f"unknown surface {self.surface!r}")
        if not -1.0 <= self.stuck_value <= 1.0:
            raise ValueError("stuck_value must lie in [-1, 1]")
        if self.t_start < 0:
            raise ValueError("t_start must be non-negative")


@dataclass(frozen=True)
class Environment:
    wind: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rho: float = 1.225
    rho0: float = 1.225
    g: float = 9.81

    def __post_init__(self):
        if self.rho <= 0 or self.rho0 <= 0 or self.g <= 0:
            raise ValueError("rho, rho0 and g must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    """Standard deviations of additive zero-mean Gaussian sensor noise."""

    position: float = 0.0
    euler: float = 0.0
    omega: float = 0.0
    airspeed: float = 0.0


@dataclass
class Measurements:
    r_m: np.ndarray
    h_m: float
    euler_m: np.ndarray  # (psi, theta, phi)
    omega_m: np.ndarray
    V_T: float
    V_I: float
    V_G: float
    v_ground: np.ndarray  # horizontal ground velocity (north, east)
    climb_rate: float
    t: float

    @property
    def psi(self) -> float:
        return float(self.euler_m[0])

    @property
    def theta(self) -> float:
        return float(self.euler_m[1])

    @property
    def phi(self) -> float:
        return float(self.euler_m[2])


def _aero(u, v, w, p, q, r, dl, dr, de, drud, rho, P: AircraftParams):
    """Body-axis aerodynamic force and moment; deflections in radians."""
    V = math.sqrt(u * u + v * v + w * w)
    if V < 1e-9:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    alpha = math.atan2(w, u)
    beta = math.asin(max(-1.0, min(1.0, v / V)))
    qbar_s = 0.5 * rho * V * V * P.wing_area
    b, c = P.span, P.chord
    ph = p * b / (2.0 * V)
    qh = q * c / (2.0 * V)
    rh = r * b / (2.0 * V)

    a_lift = max(-P.alpha_max, min(P.alpha_max, alpha))
    CL = P.CL0 + P.CLalpha * a_lift
    CD = P.CD0 + P.k_induced * CL * CL
    CY = P.CYbeta * beta
    lift, drag = qbar_s * CL, qbar_s * CD
    ca, sa = math.cos(alpha), math.sin(alpha)
    fx = -drag * ca + lift * sa
    fz = -drag * sa - lift * ca
    fy = qbar_s * CY

    Cl = P.Clbeta * beta + P.Clp * ph + P.Clr * rh + P.Clda * (dl - dr)
    Cm = P.Cm0 + P.Cmalpha * alpha + P.Cmq * qh + P.Cmde * de
    Cn = P.Cnbeta * beta + P.Cnr * rh + P.Cnp * ph + P.Cndr * drud
    return fx, fy, fz, qbar_s * b * Cl, qbar_s * c * Cm, qbar_s * b * Cn


def surface_deflections(cmd: SurfaceCommand, params: AircraftParams) -> tuple[float, float, float, float]:
    """Normalized command to effective deflection angle in radians."""
    lim, eff = params.deflection_limits, params.effectiveness
    return (cmd.aileron_left * lim["aileron_left"] * eff["aileron_left"],
            cmd.aileron_right * lim["aileron_right"] * eff["aileron_right"],
            cmd.elevator * lim["elevator"] * eff["elevator"],
            cmd.rudder * lim["rudder"] * eff["rudder"])


def _rotation(psi, theta, phi):
    """Body-to-Earth direction cosine matrix as nested tuples."""
    cps, sps = math.cos(psi), math.sin(psi)
    cth, sth = math.cos(theta), math.sin(theta)
    cph, sph = math.cos(phi), math.sin(phi)
    return ((cth * cps, sph * sth * cps - cph * sps, cph * sth * cps + sph * sps),
            (cth * sps, sph * sth * sps + cph * cps, cph * sth * sps - sph * cps),
            (-sth, sph * cth, cph * cth))


def _air_velocity_body(x, wind, R):
    an, ae, ad = x[3] - wind[0], x[4] - wind[1], x[5] - wind[2]
    return (R[0][0] * an + R[1][0] * ae + R[2][0] * ad,
            R[0][1] * an + R[1][1] * ae + R[2][1] * ad,
            R[0][2] * an + R[1][2] * ae + R[2][2] * ad)


def aero_forces_moments(state: AircraftState, cmd: SurfaceCommand, env: Environment,
                        params: AircraftParams) -> tuple[np.ndarray, np.ndarray]:
    """Aerodynamic force and moment in body axes (N, N*m)."""
    x = state.as_vector()
    R = _rotation(x[6], x[7], x[8])
    u, v, w = _air_velocity_body(x, env.wind, R)
    dl, dr, de, drud = surface_deflections(cmd.clamped(), params)
    out = _aero(u, v, w, x[9], x[10], x[11], dl, dr, de, drud, env.rho, params)
    return np.array(out[:3]), np.array(out[3:])


def _derivative(x, defl, throttle, env: Environment, P: AircraftParams):
    psi, theta, phi, p, q, r = x[6], x[7], x[8], x[9], x[10], x[11]
    R = _rotation(psi, theta, phi)
    u, v, w = _air_velocity_body(x, env.wind, R)
    fx, fy, fz, L, M, N = _aero(u, v, w, p, q, r, *defl, env.rho, P)
    fx += throttle * P.max_thrust

    m = P.mass
    an = (R[0][0] * fx + R[0][1] * fy + R[0][2] * fz) / m
    ae = (R[1][0] * fx + R[1][1] * fy + R[1][2] * fz) / m
    ad = (R[2][0] * fx + R[2][1] * fy + R[2][2] * fz) / m + env.g

    cph, sph = math.cos(phi), math.sin(phi)
    cth = math.cos(theta)
    tth = math.tan(theta)
    phi_dot = p + (q * sph + r * cph) * tth
    theta_dot = q * cph - r * sph
    psi_dot = (q * sph + r * cph) / cth

    Jx, Jy, Jz = P.inertia
    p_dot = (L - (Jz - Jy) * q * r) / Jx
    q_dot = (M - (Jx - Jz) * p * r) / Jy
    r_dot = (N - (Jy - Jx) * p * q) / Jz
    return (x[3], x[4], x[5], an, ae, ad, psi_dot, theta_dot, phi_dot, p_dot, q_dot, r_dot)


def _check_finite(values, t):
    for name, val in zip(STATE_NAMES, values):
        if not math.isfinite(val):
            raise FaultStateError("d" + name + "/dt", val, t)


def state_derivative(state: AircraftState, cmd: SurfaceCommand, env: Environment,
                     params: AircraftParams) -> np.ndarray:
    """Time derivative of the 12-element state vector."""
    c = cmd.clamped()
    return np.array(_derivative(state.as_vector(), surface_deflections(c, params),
                                c.throttle, env, params))


def step(state: AircraftState, cmd: SurfaceCommand, env: Environment,
         params: AircraftParams, dt: float) -> AircraftState:
    """Advance the plant by ``dt`` with one fixed RK4 step (command held)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    c = cmd.clamped()
    defl = surface_deflections(c, params)
    thr = c.throttle
    x = state.as_vector()
    t = state.t

    k1 = _derivative(x, defl, thr, env, params)
    _check_finite(k1, t)
    x2 = [xi + 0.5 * dt * ki for xi, ki in zip(x, k1)]
    k2 = _derivative(x2, defl, thr, env, params)
    _check_finite(k2, t)
    x3 = [xi + 0.5 * dt * ki for xi, ki in zip(x, k2)]
    k3 = _derivative(x3, defl, thr, env, params)
    _check_finite(k3, t)
    x4 = [xi + dt * ki for xi, ki in zip(x, k3)]
    k4 = _derivative(x4, defl, thr, env, params)
    _check_finite(k4, t)

    xn = [xi + dt / 6.0 * (a + 2.0 * b + 2.0 * c_ + d)
          for xi, a, b, c_, d in zip(x, k1, k2, k3, k4)]
    t_next = t + dt
    for name, val in zip(STATE_NAMES, xn):
        if not math.isfinite(val):
            raise FaultStateError(name, val, t_next)
    if abs(xn[7]) >= math.pi / 2 - GIMBAL_MARGIN:
        raise GimbalLockError(xn[7], t_next)
    xn[6] = wrap_angle(xn[6])
    xn[8] = wrap_angle(xn[8])
    return AircraftState.from_vector(xn, t_next)


def apply_fault(cmd: SurfaceCommand, fault: Optional[FaultConfig], t: float) -> SurfaceCommand:
    """Replace the faulted surface command with its stuck value once active."""
    if fault is None or t < fault.t_start:
        return cmd
    return replace(cmd, **{fault.surface: fault.stuck_value})


def measure(state: AircraftState, env: Environment, params: AircraftParams,
            noise: Optional[NoiseSpec] = None,
            rng: Optional[np.random.Generator] = None) -> Measurements:
    r = state.r.copy()
    euler = state.euler.copy()
    omega = state.omega.copy()
    air = state.v - np.asarray(env.wind, dtype=float)
    V_T = float(np.linalg.norm(air))
    if noise is not None and rng is not None:
        r = r + rng.normal(0.0, noise.position, 3) if noise.position else r
        euler = euler + rng.normal(0.0, noise.euler, 3) if noise.euler else euler
        omega = omega + rng.normal(0.0, noise.omega, 3) if noise.omega else omega
        if noise.airspeed:
            V_T = abs(V_T + float(rng.normal(0.0, noise.airspeed)))
    v_ground = state.v[:2].copy()
    return Measurements(
        r_m=r, h_m=-float(r[2]), euler_m=euler, omega_m=omega,
        V_T=V_T, V_I=V_T * math.sqrt(env.rho / env.rho0),
        V_G=float(math.hypot(v_ground[0], v_ground[1])), v_ground=v_ground,
        climb_rate=-float(state.v[2]), t=state.t)


def angle_of_attack(state: AircraftState, env: Environment) -> tuple[float, float]:
    """(alpha, beta) of the air-relative velocity, rad."""
    x = state.as_vector()
    R = _rotation(x[6], x[7], x[8])
    u, v, w = _air_velocity_body(x, env.wind, R)
    V = math.sqrt(u * u + v * v + w * w)
    if V < 1e-9:
        return 0.0, 0.0
    return math.atan2(w, u), math.asin(max(-1.0, min(1.0, v / V)))


def trim_search(params: AircraftParams, env: Environment, V_target: float,
                altitude: float = 20.0, heading: float = 0.0,
                tol: float = 1e-6) -> tuple[AircraftState, SurfaceCommand]:
    """Straight-and-level trim at true airspeed ``V_target``.

    Solves for angle of attack, elevator and throttle so that the linear and
    angular accelerations vanish; lateral controls are zero by symmetry.
    Wind is ignored (trim is defined relative to the air mass).
    """
    if V_target <= 0:
        raise ValueError("V_target must be positive")
    calm = replace(env, wind=(0.0, 0.0, 0.0))
    lim_e = params.deflection_limits["elevator"] * params.effectiveness["elevator"]

    def build(z):
        alpha, elev, thr = (float(zi) for zi in z)
        st = AircraftState(r=[0.0, 0.0, -altitude],
                           v=[V_target * math.cos(heading), V_target * math.sin(heading), 0.0],
                           euler=[heading, alpha, 0.0], omega=[0.0, 0.0, 0.0])
        return st, SurfaceCommand(elevator=elev, throttle=thr)

    def residual(z):
        st, cmd = build(z)
        d = _derivative(st.as_vector(), (0.0, 0.0, z[1] * lim_e, 0.0), z[2], calm, params)
        return [d[3], d[5], d[10]]

    sol = least_squares(residual, x0=[0.05, 0.0, 0.3],
                        bounds=([-params.alpha_max, -1.0, 0.0], [params.alpha_max, 1.0, 1.0]),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
    st, cmd = build(sol.x)
    acc = state_derivative(st, cmd, calm, params)
    res = float(np.max(np.abs(acc[3:6]).tolist() + np.abs(acc[9:12]).tolist()))
    if not res < tol:
        raise TrimError(f"no trim found at V={V_target} m/s", res)
    return st, cmd
