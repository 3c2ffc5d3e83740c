"""Full cascaded autopilot: outer loop, attitude loop, optional RCAC bank, allocation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .airframe import AircraftParams, Measurements, SurfaceCommand
from .attitude import (AdaptiveInputs, AttitudeConfig, AttitudeGains, AttitudeSetpoint,
                       AttitudeSignals, ControlAllocator, RateLoopState, ZERO_ADAPTIVE,
                       angular_accel_setpoint, coordinated_turn_rate, degrade,
                       euler_rates_to_body)
from .mission import Mission, Mode, PhaseState, scripted_pilot
from .position import PathSegment, PositionConfig, PositionSetpoint, TecsState, position_update
from .rcac import RcacBank, rcac_bank


def adaptive_attitude_update(meas: Measurements, setpoint: AttitudeSetpoint,
                             gains: AttitudeGains, rate_state: RateLoopState,
                             bank: Optional[RcacBank], cfg: AttitudeConfig, dt: float,
                             learn: bool = True):
    """Attitude step with RCAC augmentation.

    The elevation and bank channels are updated first from the angle errors;
    their outputs shape the body-rate setpoint, whose error then drives the
    three rate channels.  With ``bank=None`` this is the fixed-gain law.
    Returns ``(alpha_s, signals, rate_state, adaptive_inputs)``.
    """
    e_theta = setpoint.theta_s - meas.theta
    e_phi = setpoint.phi_s - meas.phi
    if bank is None:
        u_ang = ZERO_ADAPTIVE
    else:
        bank, u_ang = rcac_bank(bank, {"theta": e_theta, "phi": e_phi}, dt,
                                order=("theta", "phi"), learn=learn)
    theta_dot = gains.k_theta * e_theta + u_ang.u_theta
    phi_dot = gains.k_phi * e_phi + u_ang.u_phi
    psi_dot, sat = coordinated_turn_rate(setpoint.phi_s, setpoint.theta_s, meas.V_T,
                                         cfg.g, cfg.v_min)
    omega_s = euler_rates_to_body(meas.theta, meas.phi, (phi_dot, theta_dot, psi_dot))
    e_omega = omega_s - meas.omega_m
    if bank is None:
        adaptive = ZERO_ADAPTIVE
    else:
        bank, u_rate = rcac_bank(bank, {"omega_x": e_omega[0], "omega_y": e_omega[1],
                                        "omega_z": e_omega[2]}, dt,
                                 order=("omega_x", "omega_y", "omega_z"), learn=learn)
        adaptive = AdaptiveInputs(u_ang.u_theta, u_ang.u_phi, u_rate.u_omega_pi)
    alpha_s, rate_state, sat_rate = angular_accel_setpoint(
        omega_s, meas.omega_m, meas.V_T, meas.V_I, cfg, gains, rate_state,
        adaptive.u_omega_pi, dt)
    signals = AttitudeSignals(theta_dot, phi_dot, psi_dot, omega_s, e_theta, e_phi, e_omega,
                              sat or sat_rate)
    return alpha_s, signals, rate_state, adaptive


@dataclass
class AutopilotOutput:
    cmd: SurfaceCommand
    T_s: float
    attitude_sp: AttitudeSetpoint
    alpha_s: np.ndarray
    signals: AttitudeSignals
    adaptive: AdaptiveInputs
    flags: list = field(default_factory=list)


class Autopilot:
    """Stateful wrapper holding the per-aircraft controller states."""

    def __init__(self, params: AircraftParams, gains: AttitudeGains, alpha_d: float = 1.0,
                 position_cfg: Optional[PositionConfig] = None,
                 attitude_cfg: Optional[AttitudeConfig] = None,
                 bank: Optional[RcacBank] = None, rho0: float = 1.225):
        self.params = params
        self.nominal_gains = gains
        self.gains = degrade(gains, alpha_d)
        self.alpha_d = alpha_d
        self.position_cfg = position_cfg or PositionConfig()
        self.attitude_cfg = attitude_cfg or AttitudeConfig.for_airframe(params)
        self.allocator = ControlAllocator(params, rho0)
        self.bank = bank
        self.tecs = TecsState()
        self.rate_state = RateLoopState()
        self.phi_s_prev = 0.0

    def update(self, meas: Measurements, setpoint: PositionSetpoint, segment: PathSegment,
               ps: PhaseState, mission: Mission, dt: float) -> AutopilotOutput:
        T_s, theta_s, phi_s, self.tecs, flags = position_update(
            meas, setpoint, segment, self.tecs, self.position_cfg, dt, self.phi_s_prev)
        self.phi_s_prev = phi_s
        stabilized = ps.mode == Mode.STABILIZED
        if stabilized:
            script = mission.takeoff_script if ps.phase == 0 else mission.landing_script
            att_sp = scripted_pilot(meas, ps, script)
        else:
            att_sp = AttitudeSetpoint(phi_s=phi_s, theta_s=theta_s)
        alpha_s, signals, self.rate_state, adaptive = adaptive_attitude_update(
            meas, att_sp, self.gains, self.rate_state, self.bank, self.attitude_cfg, dt,
            learn=not stabilized)
        if signals.saturated:
            flags.append("airspeed_saturation")
        cmd = self.allocator.allocate(alpha_s, T_s)
        return AutopilotOutput(cmd, T_s, att_sp, alpha_s, signals, adaptive, flags)
