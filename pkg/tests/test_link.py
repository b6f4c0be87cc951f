import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hapsnoma.geometry import Circle, SpotBeam
from hapsnoma.link import (ChannelRealization, LinkParams, a_coefficient, elevation_and_distance,
                           make_beam, noise_power_dbm, path_loss_db, peak_gain,
                           rician_components, sample_rician_power, user_gain)

LAMBDA = 299_792_458.0 / 27.5e9


def fspl_db(d_m, lam):
    return 20 * math.log10(4 * math.pi * d_m / lam)


def test_peak_gain_examples():
    assert peak_gain(70 * math.pi, 1.0) == pytest.approx(1.0)
    assert peak_gain(7.0, 0.9) == pytest.approx(888.26, abs=0.01)
    assert 10 * math.log10(peak_gain(7.0, 0.9)) == pytest.approx(29.49, abs=0.01)
    assert peak_gain(29.16, 0.9) == pytest.approx(51.19, abs=0.01)


@given(st.floats(0.5, 150))
def test_halving_beamwidth_quadruples_gain(theta):
    assert peak_gain(theta / 2, 0.9) / peak_gain(theta, 0.9) == pytest.approx(4.0, rel=1e-12)


def test_gain_rolloff_points():
    beam = make_beam(Circle((0, 0), 10.0), 21.0, 0.9)
    H = 21.0
    g0 = beam.peak_gain
    assert user_gain((0, 0), beam, H, 0.9) == pytest.approx(g0)
    # offsets whose angle is half / full beamwidth
    half = H * math.tan(math.radians(beam.hpbw_deg / 2))
    full = H * math.tan(math.radians(beam.hpbw_deg))
    assert 10 * math.log10(user_gain((half, 0), beam, H, 0.9) / g0) == pytest.approx(-3.0, abs=1e-9)
    assert 10 * math.log10(user_gain((full, 0), beam, H, 0.9) / g0) == pytest.approx(-12.0, abs=1e-9)


@given(st.floats(1, 60), st.lists(st.integers(0, 1000), min_size=2, max_size=20, unique=True))
def test_gain_strictly_decreasing_in_offset(r, steps):
    beam = make_beam(Circle((0, 0), r), 21.0, 0.9)
    offs = np.sort(np.asarray(steps, dtype=float)) * 0.1
    g = user_gain(np.column_stack([offs, np.zeros_like(offs)]), beam, 21.0, 0.9)
    assert np.all(np.diff(g) < 0)


def test_elevation_examples():
    e = elevation_and_distance((0, 0), 21)
    assert e.psi == pytest.approx(math.pi / 2) and e.distance_km == pytest.approx(21)
    e = elevation_and_distance((21, 0), 21)
    assert e.psi == pytest.approx(math.pi / 4) and e.distance_km == pytest.approx(21 * math.sqrt(2))
    edge = 21 / math.tan(math.radians(12))
    e = elevation_and_distance((edge, 0), 21, math.radians(12))
    assert math.degrees(e.psi) == pytest.approx(12.0) and not e.below_min
    assert elevation_and_distance((edge + 1, 0), 21, math.radians(12)).below_min


def test_path_loss_examples():
    nadir = path_loss_db(21, math.pi / 2, LAMBDA)
    assert nadir == pytest.approx(fspl_db(21e3, LAMBDA), abs=1e-9)
    assert nadir == pytest.approx(147.68, abs=0.01)
    assert path_loss_db(21, math.pi / 6, LAMBDA) == pytest.approx(153.70, abs=0.01)
    assert path_loss_db(21, math.pi / 2, LAMBDA, 3.0) == pytest.approx(nadir + 3.0, abs=1e-12)
    with pytest.raises(ValueError):
        path_loss_db(21, 0.0, LAMBDA)


@given(st.floats(0.01, math.pi / 2 - 1e-3), st.floats(1e-4, 0.5))
def test_path_loss_decreasing_in_elevation(psi, dpsi):
    hi = min(psi + dpsi, math.pi / 2)
    assert path_loss_db(21, hi, LAMBDA) < path_loss_db(21, psi, LAMBDA)


def test_path_loss_equals_fspl_at_slant_range():
    for ground in (0.0, 10.0, 50.0, 98.0):
        e = elevation_and_distance((ground, 0), 21)
        assert path_loss_db(21, e.psi, LAMBDA) == pytest.approx(fspl_db(e.distance_km * 1e3, LAMBDA))


def test_noise_examples():
    assert noise_power_dbm(1, 0) == -174
    assert noise_power_dbm(200e6, 5) == pytest.approx(-85.99, abs=0.01)
    assert noise_power_dbm(20e6, 5) == pytest.approx(-95.99, abs=0.01)


def test_a_coefficient_examples():
    ch = ChannelRealization(1.0, 1.0, 1.0)
    assert a_coefficient(ch, 1.0) == 1.0
    assert a_coefficient(ch, 2.0) == 0.5
    # 147.68 dB loss, 29.49 dB gain, 120 dB transmit SNR -> about -1.81 dB receive SNR
    ch = ChannelRealization(1.0, 888.26, 10 ** 14.768)
    assert a_coefficient(ch, 1e12) == pytest.approx(10 ** 14.768 / 888.26e12, rel=1e-12)
    assert a_coefficient(ch, 1e12) == pytest.approx(0.6598, abs=1e-4)


@given(st.floats(1e-3, 10), st.floats(1e-3, 1e4), st.floats(1, 1e20))
def test_composite_consistency(g, G, L):
    ch = ChannelRealization(g, G, L)
    assert ch.h_mag_sq * L == pytest.approx(g * g * G, rel=1e-12)


def test_rician_components_and_limits():
    nu, sf = rician_components(3.0, 8.0)
    assert nu ** 2 == pytest.approx(6.0) and 2 * sf ** 2 == pytest.approx(2.0)
    assert sample_rician_power(math.inf, 2.0, np.random.default_rng(0)) == 2.0


@pytest.mark.parametrize("Ks, Omega", [(0.0, 1.0), (3.0, 1.0), (3.0, 8.0), (10.0, 0.5)])
def test_rician_normalisation(Ks, Omega):
    n = 1_000_000
    g2 = sample_rician_power(Ks, Omega, np.random.default_rng(5), n)
    sd = math.sqrt((1 + 2 * Ks) / (1 + Ks) ** 2) * Omega
    assert abs(g2.mean() - Omega) <= 3 * sd / math.sqrt(n)


def test_rayleigh_is_exponential():
    g2 = sample_rician_power(0.0, 2.0, np.random.default_rng(1), 200_000)
    # median of an exponential with mean 2 is 2 ln 2
    assert np.median(g2) == pytest.approx(2 * math.log(2), rel=0.02)


def test_link_params_validation():
    with pytest.raises(ValueError, match="aperture_efficiency"):
        LinkParams(27.5e9, 21, 1.5, 1.5, 200e6, 5, 3, 8)
    ln = LinkParams(27.5e9, 21, 0.9, 1.5, 200e6, 5, 3, 8)
    assert ln.wavelength_m == pytest.approx(0.010902, abs=1e-6)
    assert ln.max_ground_range_km == pytest.approx(98.797, abs=1e-3)
