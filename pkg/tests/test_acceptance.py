"""Acceptance suite: one test per criterion, each reported in the run summary.

Run alone with ``python -m pytest tests/test_acceptance.py -v``.
"""
import contextlib
import inspect
import math
import time

import numpy as np
import pytest

from fwrcac.attitude import (NOMINAL_GAINS, AttitudeConfig, AttitudeGains, RateLoopState,
                             angular_accel_setpoint, bank_rate_setpoint, coordinated_turn_rate, degrade,
                             elevation_rate_setpoint, euler_rate_matrix, euler_rates_to_body)
from fwrcac.position import PathSegment
from fwrcac.rcac import RcacHyper, RcacState, batch_oracle, rcac_update
from fwrcac.scenario import MetricsError, cross_track_error, metrics

from . import _runs, conftest, test_properties

BASE_HYPER = {"P0": 1.0, "Ru": 0.001, "Rz": 1.0, "sigma": -0.1}


@contextlib.contextmanager
def criterion(k: int):
    """Record the outcome of criterion ``k``; the body sets ``rec['detail']``."""
    rec = {"detail": ""}
    ok = False
    try:
        yield rec
        ok = True
    finally:
        conftest.CRITERIA[k] = (ok, rec["detail"])
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'} {rec['detail']}")


def _norm(name: str, key: str = "J_traj") -> float:
    res, _ = _runs.run(name)
    base, _ = _runs.run("nominal")
    return res.summary.normalize(base.summary, "nominal").normalized[key]


# ---- 1 ----------------------------------------------------------------------

def test_criterion_01_oracle_equivalence():
    with criterion(1) as rec:
        hyper = RcacHyper(**BASE_HYPER)
        rng = np.random.default_rng(2024)
        t0 = time.perf_counter()
        worst = 0.0
        for n in (1, 2):
            for _ in range(20):
                zs, phis = rng.normal(size=200), rng.normal(size=(200, n))
                s = RcacState.initial(n, hyper)
                thetas, us = [], []
                for z, phi in zip(zs.tolist(), phis):
                    s, u = rcac_update(s, z, phi, hyper)
                    thetas.append(s.theta)
                    us.append(u)
                worst = max(worst, _oracle_gap(hyper, zs, phis, np.array(us), np.array(thetas)))
        elapsed = time.perf_counter() - t0
        rec["detail"] = f"max |dtheta| = {worst:.2e}, {elapsed:.2f} s"
        assert worst < 1e-8
        assert elapsed < 1.0


def _oracle_gap(hyper, zs, phis, us, thetas) -> float:
    """Largest deviation from the normal-equation solution at every step.

    Step k (k >= 1) has seen rows (phi_{i-1}, u_{i-1}, z_i) for i = 1..k.
    """
    n = phis.shape[1]
    fp, up, z = phis[:-1], us[:-1], zs[1:]
    w = hyper.Rz * hyper.sigma ** 2 + hyper.Ru
    A = np.eye(n) / hyper.P0 + np.cumsum(w * fp[:, :, None] * fp[:, None, :], axis=0)
    b = np.cumsum((hyper.Rz * hyper.sigma * (hyper.sigma * up - z))[:, None] * fp, axis=0)
    expected = np.linalg.solve(A, b[:, :, None])[:, :, 0]
    gap = np.max(np.abs(thetas[1:] - expected))
    first = np.max(np.abs(thetas[0]))  # no update on the first step
    hist = list(zip(fp, up, z))
    last = np.max(np.abs(thetas[-1] - batch_oracle(hist, hyper)))
    return float(max(gap, first, last))


# ---- 2 ----------------------------------------------------------------------

def control_law_examples():
    """The listed hand-checkable examples of every control-law operation."""
    for law in (elevation_rate_setpoint, bank_rate_setpoint):
        assert law(0.4, 0.4, 7.0, 0.0) == 0.0
        assert law(0.2, 0.1, 3.0, 0.0) == pytest.approx(0.3, abs=1e-15)
        assert law(0.2, 0.1, 3.0, -0.05) == pytest.approx(0.25, abs=1e-15)

    assert coordinated_turn_rate(0.0, 0.2, 13.0)[0] == 0.0
    assert coordinated_turn_rate(math.pi / 4, 0.0, 9.81, g=9.81)[0] == pytest.approx(1.0, abs=1e-15)
    assert abs(coordinated_turn_rate(0.3, math.pi / 2 - 1e-9, 13.0)[0]) < 1e-9

    x = (0.3, -0.2, 0.7)
    assert np.array_equal(euler_rates_to_body(0.0, 0.0, x), np.array(x))
    assert euler_rates_to_body(0.0, math.pi / 2, (0.0, 1.0, 0.0)) == \
        pytest.approx([0.0, 0.0, -1.0], abs=1e-15)
    rng = np.random.default_rng(3)
    for _ in range(20):
        th, ph = rng.uniform(-1.3, 1.3), rng.uniform(-math.pi, math.pi)
        v = rng.normal(size=3)
        assert np.linalg.solve(euler_rate_matrix(th, ph), euler_rates_to_body(th, ph, v)) == \
            pytest.approx(v, abs=1e-12)

    cfg = AttitudeConfig(V_T0=13.0, V_I0=13.0)
    a, _, _ = angular_accel_setpoint(np.zeros(3), np.zeros(3), 13.0, 13.0, cfg, NOMINAL_GAINS,
                                     RateLoopState(), dt=0.004)
    assert np.all(a == 0.0)
    g = AttitudeGains(1.0, 1.0, (0.2,) * 3, (0.1,) * 3, (0.0,) * 3)
    a, _, _ = angular_accel_setpoint(np.ones(3), np.full(3, 0.5), 13.0, 13.0, cfg, g,
                                     RateLoopState(), dt=0.004)
    assert a == pytest.approx([0.25] * 3, abs=1e-15)
    g = AttitudeGains(1.0, 1.0, (0.0,) * 3, (0.1,) * 3, (0.0,) * 3)
    a1, _, _ = angular_accel_setpoint(np.ones(3), np.full(3, 0.5), 13.0, 13.0, cfg, g,
                                      RateLoopState(), dt=0.004)
    a2, _, _ = angular_accel_setpoint(np.ones(3), np.full(3, 0.5), 13.0, 6.5, cfg, g,
                                      RateLoopState(), dt=0.004)
    assert np.array_equal(a2, 4.0 * a1)

    assert degrade(NOMINAL_GAINS, 1.0) == NOMINAL_GAINS
    assert np.all(degrade(NOMINAL_GAINS, 0.0).as_vector() == 0.0)
    g = AttitudeGains(3.0, 2.0, (1, 2, 3), (4, 5, 6), (7, 8, 9))
    assert degrade(g, 0.5).k_theta == 1.5
    assert np.array_equal(degrade(g, 0.5).as_vector(), 0.5 * g.as_vector())

    tel = lambda e: {"phi_s": np.asarray(e, float), "phi_m": np.zeros(len(e)),
                     "theta_s": np.asarray(e, float), "theta_m": np.zeros(len(e)),
                     "e_xtrack": np.asarray(e, float),
                     "phase": np.array(["loiter"] * len(e), dtype=object),
                     "mode": np.array(["mission"] * len(e), dtype=object)}
    assert metrics(tel([-0.7] * 6)).J_Phi == pytest.approx(0.7, abs=1e-15)
    assert metrics(tel([3.0, 4.0])).J_traj == math.sqrt(12.5)
    assert metrics(tel([0.0] * 5)).J_Theta == 0.0
    with pytest.raises(MetricsError):
        metrics(tel([]))

    assert cross_track_error((3.0, 3.0), PathSegment.line((0.0, 0.0), (10.0, 10.0))) == 0.0
    arc = PathSegment.arc((0.0, 0.0), 30.0)
    assert cross_track_error((35.0, 0.0), arc) == 5.0
    assert cross_track_error((0.0, 0.0), arc) == 30.0


def test_criterion_02_control_law_examples():
    with criterion(2) as rec:
        t0 = time.perf_counter()
        control_law_examples()
        elapsed = time.perf_counter() - t0
        rec["detail"] = f"all examples hold, {elapsed:.3f} s"
        assert elapsed < 1.0


# ---- 3 ----------------------------------------------------------------------

def test_criterion_03_nominal_baseline():
    with criterion(3) as rec:
        res, wall = _runs.run("nominal")
        J = res.summary.J_traj if res.summary else math.nan
        rec["detail"] = (f"completed={res.completed} J_traj={J:.3f} m "
                         f"(bound 3.0), {wall:.1f} s")
        assert res.completed and not res.failed
        assert set(res.telemetry["phase"]) == {"climb", "loiter", "land"}
        assert J <= 3.0
        assert wall < 10.0


# ---- 4 ----------------------------------------------------------------------

def test_criterion_04_adaptive_no_worse_at_nominal():
    with criterion(4) as rec:
        res, _ = _runs.run("adaptive")
        assert res.completed and not res.failed
        n = {k: _norm("adaptive", k) for k in ("J_traj", "J_Phi", "J_Theta")}
        rec["detail"] = ", ".join(f"{k}={v:.3f}" for k, v in n.items()) + " (bound 1.10)"
        assert all(v <= 1.10 for v in n.values())


# ---- 5 ----------------------------------------------------------------------

def test_criterion_05_recovery_at_half_gain():
    with criterion(5) as rec:
        ad, nom = _norm("adaptive_half"), _norm("nominal_half")
        rec["detail"] = f"adaptive {ad:.3f} vs degraded {nom:.3f} (need <= {0.8 * nom:.3f}, <= 1.5)"
        assert _runs.run("adaptive_half")[0].completed
        assert ad <= 0.8 * nom
        assert ad <= 1.5


# ---- 6 ----------------------------------------------------------------------

def test_criterion_06_cold_start():
    with criterion(6) as rec:
        ad, _ = _runs.run("adaptive_zero")
        nom, _ = _runs.run("nominal_zero")
        phi_max = math.degrees(float(np.max(np.abs(ad.telemetry["phi_m"]))))
        if nom.failed:
            nom_txt = f"degraded run failed ({nom.reason})"
        else:
            nom_txt = f"degraded run normalized J_traj {_norm('nominal_zero'):.2f}"
        rec["detail"] = (f"adaptive completed={ad.completed} max|phi|={phi_max:.1f} deg; "
                         + nom_txt)
        assert ad.completed and not ad.failed
        assert phi_max < 60.0
        s = ad.summary
        assert all(math.isfinite(v) for v in (s.J_Phi, s.J_Theta, s.J_traj))
        assert nom.failed or _norm("nominal_zero") >= 3.0


# ---- 7 ----------------------------------------------------------------------

def end_of_loiter_gains(name: str) -> tuple[float, float]:
    tel = _runs.run(name)[0].telemetry
    i = np.flatnonzero(tel["phase"] == "loiter")[-1]
    return abs(float(tel["gain_theta"][i])), abs(float(tel["gain_phi"][i]))


def test_criterion_07_gain_compensation_direction():
    with criterion(7) as rec:
        g = {a: end_of_loiter_gains(n) for a, n in
             ((0.0, "adaptive_zero"), (0.5, "adaptive_half"), (1.0, "adaptive"))}
        rec["detail"] = "|theta_Theta| " + " >= ".join(f"{g[a][0]:.2f}" for a in (0.0, 0.5, 1.0)) \
            + "; |theta_Phi| " + " >= ".join(f"{g[a][1]:.2f}" for a in (0.0, 0.5, 1.0))
        for ch in (0, 1):
            assert g[0.0][ch] >= g[0.5][ch] >= g[1.0][ch]


# ---- 8 ----------------------------------------------------------------------

def test_criterion_08_stuck_aileron():
    with criterion(8) as rec:
        ad, nom = _norm("adaptive_fault"), _norm("nominal_fault")
        rec["detail"] = f"normalized J_traj adaptive {ad:.3f} < nominal {nom:.3f}"
        assert _runs.run("adaptive_fault")[0].summary is not None
        assert ad < nom


# ---- 9 ----------------------------------------------------------------------

ADAPTIVE_TESTS = (test_criterion_04_adaptive_no_worse_at_nominal,
                  test_criterion_05_recovery_at_half_gain,
                  test_criterion_06_cold_start,
                  test_criterion_07_gain_compensation_direction)


def test_criterion_09_single_hyperparameter_set():
    with criterion(9) as rec:
        names = ("adaptive", "adaptive_half", "adaptive_zero", "adaptive_fault")
        for name in names:
            cfg = _runs.config(name)
            assert cfg.rcac == {}  # no per-scenario overrides
            hyp = cfg.build_hypers()["hyper"]
            for ch in ("theta", "phi"):
                h = hyp[ch]
                assert {"P0": h.P0, "Ru": h.Ru, "Rz": h.Rz, "sigma": h.sigma} == BASE_HYPER
        failed = []
        for test in ADAPTIVE_TESTS:
            k = int(test.__name__.split("_")[2])
            if k not in conftest.CRITERIA:
                with contextlib.suppress(AssertionError):
                    test()
            if not conftest.CRITERIA.get(k, (False,))[0]:
                failed.append(k)
        rec["detail"] = ("one hyperparameter set on every adaptive run; criteria 4-7 "
                         + ("pass" if not failed else f"failing: {failed}"))
        assert not failed


# ---- 10 ---------------------------------------------------------------------

INVARIANTS = [f for name, f in inspect.getmembers(test_properties, inspect.isfunction)
              if name.startswith("test_") and hasattr(f, "hypothesis")
              and "tmp_path_factory" not in inspect.signature(f.hypothesis.inner_test).parameters]


def test_criterion_10_invariant_suites():
    with criterion(10) as rec:
        t0 = time.perf_counter()
        for f in INVARIANTS:
            f()
        elapsed = time.perf_counter() - t0
        rec["detail"] = f"{len(INVARIANTS)} property suites x >= 100 cases, {elapsed:.1f} s"
        assert elapsed < 30.0


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
