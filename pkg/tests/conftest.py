import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hapsnoma.link import LinkParams
from hapsnoma.scenario import PowerProfile, Scenario, load_scenario, make_users

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def default_scenario():
    return load_scenario("default")


def small_link(**kw):
    base = dict(carrier_freq_hz=27.5e9, altitude_km=21.0, aperture_efficiency=0.9,
                antenna_diameter_m=1.5, bandwidth_hz=200e6, noise_figure_db=5.0,
                rician_k=3.0, rician_omega=8.0)
    base.update(kw)
    return LinkParams(**base)


def make_scenario(coords, R=60.0, pt=10_000.0, qos=20e6, seed=11, **kw):
    return Scenario(R, small_link(), make_users(np.asarray(coords, dtype=float)),
                    PowerProfile.constant(pt), qos, seed, **kw)


@pytest.fixture
def scenario_factory():
    return make_scenario
