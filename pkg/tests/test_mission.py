import math

import numpy as np
import pytest

from fwrcac.mission import (SETPOINT_BLEND_TIME, Mission, Mode, ModeError, Phase, PhaseState,
                            PilotScript, exp_profile, initial_phase_state, mission_update,
                            scripted_pilot, sim_profile)

from .conftest import make_meas

DT = 0.004


def meas(p, v=(13.0, 0.0), t=0.0, h=20.0):
    return make_meas(r=p, h=h, v_ground=v, t=t)


# inside 1.5 R of the sim_profile loiter center and closing on it
CAPTURE_POINT, CAPTURE_VEL = (180.0, 0.0), (13.0, 0.0)


def test_builtin_profiles():
    m = sim_profile()
    assert (m.loiter_radius, m.loiter_duration, m.climb_altitude) == (30.0, 60.0, 20.0)
    assert exp_profile().loiter_radius == 20.0


def test_mission_validation():
    base = sim_profile().to_dict()
    for key in ("loiter_radius", "loiter_duration", "climb_altitude", "cruise_speed"):
        with pytest.raises(ValueError):
            Mission.from_dict({**base, key: 0.0})


def test_mission_dict_round_trip():
    for m in (sim_profile(), exp_profile()):
        assert Mission.from_dict(m.to_dict()) == m


def test_climb_segment_before_capture():
    m = sim_profile()
    sp, seg, ps = mission_update(meas((50.0, 3.0)), m, initial_phase_state(m))
    assert ps.phase == Phase.CLIMB
    assert seg.kind == "line" and (seg.p0, seg.p1) == (m.launch, m.target)
    assert sp.h_s == 20.0
    assert sp.r_s == pytest.approx([50.0, 0.0, -20.0])


def test_no_capture_when_moving_away():
    m = sim_profile()
    ps = initial_phase_state(m)
    _, _, ps = mission_update(meas(CAPTURE_POINT, v=(-13.0, 0.0)), m, ps)
    assert ps.phase == Phase.CLIMB


def test_loiter_entry_segment_and_altitude():
    m = sim_profile()
    sp, seg, ps = mission_update(meas(CAPTURE_POINT, CAPTURE_VEL, t=12.0), m,
                                 initial_phase_state(m))
    assert ps.phase == Phase.LOITER and ps.phase_entry_time == 12.0
    assert seg.kind == "arc" and seg.center == (200.0, 36.0) and seg.radius == 30.0
    assert sp.h_s == 20.0


def test_capture_setpoint_continuous():
    m = sim_profile()
    sp, _, _ = mission_update(meas(CAPTURE_POINT, CAPTURE_VEL, t=12.0), m,
                              initial_phase_state(m))
    # the climb phase would have commanded the nearest point on the climb line
    assert np.linalg.norm(sp.r_s - np.array([180.0, 0.0, -20.0])) < 1e-9


def test_blend_decays_to_path():
    m = sim_profile()
    _, _, ps = mission_update(meas(CAPTURE_POINT, CAPTURE_VEL, t=12.0), m,
                              initial_phase_state(m))
    sp, seg, ps = mission_update(meas(CAPTURE_POINT, t=12.0 + SETPOINT_BLEND_TIME), m, ps)
    assert sp.r_s[:2] == pytest.approx(seg.closest_point(CAPTURE_POINT), abs=1e-12)


def _loitering(t0=12.0):
    m = sim_profile()
    _, _, ps = mission_update(meas(CAPTURE_POINT, CAPTURE_VEL, t=t0), m, initial_phase_state(m))
    return m, ps


def test_loiter_timing():
    m, ps = _loitering()
    p = (200.0, 66.0)
    _, _, a = mission_update(meas(p, t=12.0 + 60.0 - DT), m, ps)
    assert a.phase == Phase.LOITER
    sp, seg, b = mission_update(meas(p, t=12.0 + 60.0), m, ps)
    assert b.phase == Phase.LAND and seg.kind == "line"
    # landing starts without an altitude step
    assert sp.h_s == 20.0


def test_landing_descends_and_finishes():
    m, ps = _loitering()
    _, _, ps = mission_update(meas((200.0, 66.0), t=72.0), m, ps)
    hs = []
    for n in (150.0, 100.0, 50.0, 10.0):
        sp, _, ps = mission_update(meas((n, 140.0), v=(-13.0, 0.0), t=80.0), m, ps)
        hs.append(sp.h_s)
    assert all(b < a for a, b in zip(hs, hs[1:]))
    assert hs[-1] == pytest.approx(10.0 * math.tan(math.radians(6.0)))
    _, _, ps = mission_update(meas((5.0, 140.0), t=90.0, h=0.9), m, ps)
    assert ps.phase == Phase.DONE


def test_phase_never_regresses():
    m, ps = _loitering()
    _, _, ps = mission_update(meas((200.0, 66.0), t=72.0), m, ps)
    # back near the loiter circle while landing: no revisit
    _, _, ps2 = mission_update(meas(CAPTURE_POINT, CAPTURE_VEL, t=73.0), m, ps)
    assert ps2.phase == Phase.LAND


def test_sim_profile_stays_in_mission_mode():
    m = sim_profile()
    assert initial_phase_state(m).mode == Mode.MISSION


SCRIPT = PilotScript(times=(0.0, 2.0, 4.0), phi=(0.0, 0.2, 0.0), theta=(0.1, 0.1, -0.05))


def test_script_endpoints_and_holds():
    assert SCRIPT.at(0.0) == (0.0, 0.1)
    assert SCRIPT.at(2.0) == (0.2, 0.1)
    assert SCRIPT.at(4.0) == (0.0, -0.05)
    assert SCRIPT.at(-3.0) == (0.0, 0.1)
    assert SCRIPT.at(99.0) == (0.0, -0.05)
    assert SCRIPT.at(1.0) == pytest.approx((0.1, 0.1))


def test_script_validation():
    with pytest.raises(ValueError):
        PilotScript((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
    with pytest.raises(ValueError):
        PilotScript((0.0, 1.0), (0.0,), (0.0, 0.0))


def test_scripted_pilot_relative_time():
    ps = PhaseState(mode=Mode.STABILIZED, mode_entry_time=10.0)
    sp = scripted_pilot(meas((0.0, 0.0), t=12.0), ps, SCRIPT)
    assert (sp.phi_s, sp.theta_s) == (0.2, 0.1)


def test_scripted_pilot_guarded_in_mission_mode():
    with pytest.raises(ModeError):
        scripted_pilot(meas((0.0, 0.0)), PhaseState(mode=Mode.MISSION), SCRIPT)


def test_exp_profile_mode_sequence():
    m = exp_profile()
    ps = initial_phase_state(m)
    assert ps.mode == Mode.STABILIZED
    end = m.takeoff_script.times[-1]
    _, _, ps = mission_update(meas((40.0, 0.0), t=end - DT), m, ps)
    assert ps.mode == Mode.STABILIZED
    _, _, ps = mission_update(meas((60.0, 0.0), t=end), m, ps)
    assert ps.mode == Mode.MISSION and ps.phase == Phase.CLIMB
    # loiter capture only in mission mode
    _, _, ps = mission_update(meas((185.0, 10.0), t=20.0), m, ps)
    assert ps.phase == Phase.LOITER and ps.mode == Mode.MISSION
    _, _, ps = mission_update(meas((200.0, 46.0), t=20.0 + m.loiter_duration), m, ps)
    assert ps.phase == Phase.LAND and ps.mode == Mode.MISSION
    # pilot takes the final approach once the glide altitude is under half
    _, _, ps = mission_update(meas((60.0, 120.0), v=(-13.0, 0.0), t=130.0, h=8.0), m, ps)
    assert ps.mode == Mode.STABILIZED and ps.phase == Phase.LAND
