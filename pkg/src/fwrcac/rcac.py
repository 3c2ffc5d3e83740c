"""Retrospective cost adaptive control for scalar channels.

Each channel learns a gain vector ``theta`` so that ``u = phi @ theta``.
The retrospective performance replaces the previously applied input with
the one a candidate gain would have produced, filtered through
``G_f(q) = sigma / q``::

    zhat(theta) = z_k + sigma * (phi_{k-1} @ theta - u_{k-1})

and ``theta_k`` is the exact minimizer of the cumulative cost

    sum_i Rz * zhat_i(theta)**2 + Ru * (phi_{i-1} @ theta)**2
        + (theta - theta0) @ (theta - theta0) / P0

tracked by recursive least squares without forgetting.  The sign of
``sigma`` is the assumed sign of the one-step effect of ``u`` on ``z``: for
``z = setpoint - measured`` and an input that drives the measurement up,
``sigma < 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .attitude import AdaptiveInputs


@dataclass(frozen=True)
class RcacHyper:
    P0: float = 1.0
    Ru: float = 0.001
    Rz: float = 1.0
    sigma: float = -0.1
    theta0: Optional[tuple] = None
    theta_max: Optional[float] = None

    def __post_init__(self):
        if not self.P0 > 0:
            raise ValueError("P0 must be positive")
        if not self.Rz > 0:
            raise ValueError("Rz must be positive")
        if self.Ru < 0:
            raise ValueError("Ru must be non-negative")
        if self.sigma == 0:
            raise ValueError("sigma must be nonzero")
        if self.theta_max is not None and not self.theta_max > 0:
            raise ValueError("theta_max must be positive")

    def initial_theta(self, n: int) -> np.ndarray:
        if self.theta0 is None:
            return np.zeros(n)
        t0 = np.asarray(self.theta0, dtype=float).reshape(-1)
        if t0.size != n:
            raise ValueError(f"theta0 has {t0.size} entries, regressor has {n}")
        return t0.copy()


@dataclass
class RcacState:
    theta: np.ndarray
    P: np.ndarray
    phi_prev: Optional[np.ndarray] = None
    u_prev: float = 0.0
    integ: float = 0.0
    k: int = 0
    frozen: bool = False
    flag: str = ""

    @classmethod
    def initial(cls, n: int, hyper: RcacHyper) -> "RcacState":
        return cls(theta=hyper.initial_theta(n), P=hyper.P0 * np.eye(n))


def build_regressor_p(z: float) -> np.ndarray:
    return np.array([z], dtype=float)


def build_regressor_pi(z: float, integ: float, dt: float, bound: float = math.inf):
    """Proportional-integral regressor; returns ``(phi, integ')``."""
    integ_new = min(bound, max(-bound, integ + z * dt))
    return np.array([z, integ_new], dtype=float), integ_new


def _cholesky_ok(P: list) -> bool:
    """True if the symmetric matrix ``P`` (nested lists) is positive definite."""
    n = len(P)
    L = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1):
            acc = P[i][j] - sum(L[i][k] * L[j][k] for k in range(j))
            if i == j:
                if not acc > 0.0:
                    return False
                L[i][i] = math.sqrt(acc)
            else:
                L[i][j] = acc / L[j][j]
    return True


def _freeze(state: RcacState, phi, reason: str):
    u = float(np.dot(phi, state.theta)) if all(map(math.isfinite, phi)) else 0.0
    return replace(state, frozen=True, flag=reason), u


def rcac_update(state: RcacState, z: float, phi, hyper: RcacHyper, learn: bool = True):
    """One RCAC step; returns ``(new_state, u)``.

    The stacked two-row least-squares update (retrospective performance
    row weighted by ``Rz``, control-effort row weighted by ``Ru``) is applied
    to the covariance as two successive rank-one downdates, which equals the
    joint update by the matrix inversion lemma.

    The first call (no buffered regressor) performs no update.  A frozen
    channel keeps its gains and still produces ``u = phi @ theta``.  With
    ``learn=False`` the gains are held but the regressor and input are still
    buffered.
    """
    phi = [float(x) for x in np.ravel(phi)]
    n = len(phi)
    theta = state.theta.tolist()
    if state.frozen or not learn:
        if not all(map(math.isfinite, phi)):
            return state, 0.0
        u = sum(a * b for a, b in zip(phi, theta))
        if state.frozen:
            return state, u
        return replace(state, phi_prev=np.array(phi), u_prev=u), u
    if not (math.isfinite(z) and all(map(math.isfinite, phi))):
        return _freeze(state, phi, "non-finite performance or regressor")

    P_arr = state.P
    if state.phi_prev is not None:
        fp = state.phi_prev.tolist()
        sig = hyper.sigma
        rows = [([sig * x for x in fp], sig * state.u_prev - z, hyper.Rz)]
        if hyper.Ru > 0:
            rows.append((fp, 0.0, hyper.Ru))
        P = state.P.tolist()
        for f, _, lam in rows:
            Pf = [sum(P[i][k] * f[k] for k in range(n)) for i in range(n)]
            d = 1.0 / lam + sum(f[i] * Pf[i] for i in range(n))
            P = [[P[i][j] - Pf[i] * Pf[j] / d for j in range(n)] for i in range(n)]
        P = [[0.5 * (P[i][j] + P[j][i]) for j in range(n)] for i in range(n)]
        if not _cholesky_ok(P):
            return _freeze(state, phi, "covariance lost positive definiteness")
        grad = [0.0] * n
        for f, y, lam in rows:
            r = lam * (y - sum(a * b for a, b in zip(f, theta)))
            for i in range(n):
                grad[i] += f[i] * r
        theta = [theta[i] + sum(P[i][k] * grad[k] for k in range(n)) for i in range(n)]
        if hyper.theta_max is not None:
            b = hyper.theta_max
            theta = [min(b, max(-b, t)) for t in theta]
        if not all(map(math.isfinite, theta)):
            return _freeze(state, phi, "non-finite gain")
        P_arr = np.array(P)

    u = sum(a * b for a, b in zip(phi, theta))
    return RcacState(theta=np.array(theta), P=P_arr, phi_prev=np.array(phi), u_prev=u,
                     integ=state.integ, k=state.k + 1), u


def retrospective_cost(theta, history, hyper: RcacHyper) -> float:
    """Cumulative retrospective cost of a fixed gain vector over ``history``.

    ``history`` holds ``(phi_prev, u_prev, z)`` triples.
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    d = theta - hyper.initial_theta(n)
    J = float(d @ d) / hyper.P0
    for phi_prev, u_prev, z in history:
        fp = np.asarray(phi_prev, dtype=float)
        zhat = z + hyper.sigma * (fp @ theta - u_prev)
        J += hyper.Rz * zhat ** 2 + hyper.Ru * float(fp @ theta) ** 2
    return J


def batch_oracle(history, hyper: RcacHyper, n: Optional[int] = None) -> np.ndarray:
    """Minimizer of :func:`retrospective_cost` from the dense normal equations."""
    if n is None:
        if not history:
            raise ValueError("need a nonempty history or an explicit dimension")
        n = np.asarray(history[0][0]).size
    theta0 = hyper.initial_theta(n)
    A = np.eye(n) / hyper.P0
    b = theta0 / hyper.P0
    s = hyper.sigma
    for phi_prev, u_prev, z in history:
        fp = np.asarray(phi_prev, dtype=float).reshape(-1)
        A += (hyper.Rz * s * s + hyper.Ru) * np.outer(fp, fp)
        b += hyper.Rz * s * (s * u_prev - z) * fp
    return np.linalg.solve(A, b)


CHANNELS = ("theta", "phi", "omega_x", "omega_y", "omega_z")


@dataclass
class RcacChannel:
    hyper: RcacHyper
    state: RcacState
    kind: str  # "p" or "pi"
    enabled: bool = True
    integ_bound: float = math.inf


@dataclass
class RcacBank:
    """Five independent scalar channels feeding the attitude loop."""

    channels: dict = field(default_factory=dict)

    @classmethod
    def create(cls, hypers: dict, enabled: Optional[dict] = None,
               integ_bounds=(math.inf, math.inf, math.inf)) -> "RcacBank":
        enabled = enabled or {}
        chans = {}
        for name in CHANNELS:
            kind = "p" if name in ("theta", "phi") else "pi"
            n = 1 if kind == "p" else 2
            hyp = hypers[name]
            bound = math.inf if kind == "p" else integ_bounds[CHANNELS.index(name) - 2]
            chans[name] = RcacChannel(hyp, RcacState.initial(n, hyp), kind,
                                      enabled.get(name, True), bound)
        return cls(chans)

    def thetas(self) -> dict:
        return {name: ch.state.theta.copy() for name, ch in self.channels.items()}

    def flags(self) -> list[str]:
        return [f"{n}: {c.state.flag}" for n, c in self.channels.items() if c.state.frozen]


def rcac_bank(bank: RcacBank, performance: dict, dt: float, order=CHANNELS,
              learn: bool = True):
    """Update the channels named in ``order`` from their own performance variables.

    ``performance`` maps channel name to the error term (setpoint minus
    measurement).  Returns ``(bank, AdaptiveInputs)``; disabled or skipped
    channels output zero and keep their gains.
    """
    u = dict.fromkeys(CHANNELS, 0.0)
    for name in order:
        ch = bank.channels[name]
        if not ch.enabled:
            u[name] = 0.0
            continue
        z = float(performance[name])
        if ch.kind == "p":
            phi = build_regressor_p(z)
            integ = ch.state.integ
        else:
            phi, integ = build_regressor_pi(z, ch.state.integ, dt, ch.integ_bound)
        new_state, u[name] = rcac_update(ch.state, z, phi, ch.hyper, learn)
        new_state.integ = integ
        ch.state = new_state
    return bank, AdaptiveInputs(u["theta"], u["phi"],
                                (u["omega_x"], u["omega_y"], u["omega_z"]))
