import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fwrcac.airframe import Measurements

settings.register_profile("repo", max_examples=100, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

# acceptance criterion id -> (passed, detail); filled by test_acceptance
CRITERIA: dict = {}


def make_meas(r=(0.0, 0.0), h=20.0, euler=(0.0, 0.0, 0.0), omega=(0.0, 0.0, 0.0),
              V=13.0, v_ground=(13.0, 0.0), climb_rate=0.0, t=0.0, V_I=None):
    return Measurements(r_m=np.array([r[0], r[1], -h]), h_m=h, euler_m=np.array(euler),
                        omega_m=np.array(omega), V_T=V, V_I=V if V_I is None else V_I,
                        V_G=float(np.hypot(*v_ground)), v_ground=np.array(v_ground),
                        climb_rate=climb_rate, t=t)


@pytest.fixture
def meas_factory():
    return make_meas


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        ok, detail = CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
