import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats
from scipy.integrate import quad
from scipy.special import i0e

from hapsnoma.outage import (binomial_band, marcum_q1, monte_carlo_outage, noma_outage_closed,
                             oma_outage_closed, oma_psi, outage_spec, psi_max, psi_thresholds,
                             rician_power_cdf)


def q1_quad(a, b):
    # integral form with a scaled Bessel function
    f = lambda x: x * math.exp(-(x - a) ** 2 / 2) * i0e(a * x)
    return quad(f, b, np.inf, limit=200)[0]


def q1_ncx2(a, b):
    return float(stats.ncx2.sf(b * b, 2, a * a))


@pytest.mark.parametrize("a, b", [(1, 1), (0.5, 2), (3, 1), (np.sqrt(6), np.sqrt(8)), (5, 7)])
def test_marcum_against_quadrature(a, b):
    assert marcum_q1(a, b) == pytest.approx(q1_quad(a, b), abs=1e-9)


def test_marcum_reference_values():
    assert marcum_q1(1, 1) == pytest.approx(0.7328798, abs=1e-7)
    assert marcum_q1(0, 2) == pytest.approx(math.exp(-2))
    assert marcum_q1(4, 0) == 1.0
    with pytest.raises(ValueError):
        marcum_q1(-1, 1)


# scipy's ncx2 overflows for very small b, so the oracle range starts at 0.01
@given(st.floats(0, 30), st.floats(0.01, 40))
def test_marcum_against_ncx2(a, b):
    assert marcum_q1(a, b) == pytest.approx(q1_ncx2(a, b), abs=1e-9)


def test_psi_examples():
    psi = psi_thresholds([0.8, 0.2], 1.0, 10.0)
    assert psi == pytest.approx([1 / 6, 0.5])
    assert psi_max([0.8, 0.2], 1.0, 10.0, 1) == pytest.approx(0.5)
    assert psi_thresholds([0.4, 0.6], 1.0, 10.0)[0] == math.inf


def test_rayleigh_median():
    assert noma_outage_closed(1, 1, 0, 1, math.log(2)) == pytest.approx(0.5, abs=1e-12)


def test_rician_value():
    expect = 1 - q1_ncx2(math.sqrt(6), math.sqrt(8))
    assert noma_outage_closed(1, 1, 3, 1, 1.0) == pytest.approx(expect, abs=1e-9)
    assert expect == pytest.approx(0.5731, abs=1e-4)


def test_oma_threshold_example():
    # two users, unit normalised target -> phi_OMA = 1
    assert oma_psi(1.0, 2.0, 2, 4.0) == pytest.approx(0.5)
    assert oma_outage_closed(1, 1, 0, 1, 0.5) == pytest.approx(1 - math.exp(-0.5))


def test_certain_outage_and_zero_threshold():
    assert noma_outage_closed(1, 1, 3, 1, math.inf) == 1.0
    assert noma_outage_closed(1, 1, 3, 1, 0.0) == 0.0


@given(st.floats(0, 20), st.floats(0.1, 10), st.lists(st.floats(0, 50), min_size=2, max_size=8))
def test_cdf_is_valid(Ks, Omega, ys):
    vals = [rician_power_cdf(y, Ks, Omega) for y in sorted(ys)]
    assert all(0 <= v <= 1 for v in vals)
    assert np.all(np.diff(vals) >= -1e-12)


@given(st.floats(0.01, 20))
def test_rayleigh_reduction(y):
    assert rician_power_cdf(y, 0.0, 1.0) == pytest.approx(1 - math.exp(-y), abs=1e-12)


@given(st.lists(st.floats(1e-3, 1.0), min_size=2, max_size=6), st.floats(0.01, 2), st.floats(1, 1e3))
def test_psi_max_non_decreasing(alphas, phi, rho):
    alphas = sorted(alphas, reverse=True)
    spec = outage_spec(alphas, phi, 1.0, rho)
    assert all(b >= a for a, b in zip(spec.psi_max, spec.psi_max[1:]))
    for l in range(len(alphas)):
        assert psi_max(alphas, spec.phis, rho, l) == spec.psi_max[l]


@given(st.floats(0, 10), st.floats(0.01, 5))
def test_outage_decreasing_in_snr(Ks, psi):
    # Psi scales as 1/rho, so raising the SNR scales the threshold down
    ops = [noma_outage_closed(1.0, 1.0, Ks, 1.0, psi / rho) for rho in (1, 2, 4, 8)]
    assert np.all(np.diff(ops) <= 1e-12)


@pytest.mark.parametrize("Ks, thr", [(0.0, 0.3), (3.0, 0.5), (3.0, 0.2)])
def test_monte_carlo_agrees(Ks, thr):
    n = 200_000
    est = monte_carlo_outage(1.0, 1.0, Ks, 1.0, [thr], n, seed=7, partitions=4)[0]
    p = noma_outage_closed(1.0, 1.0, Ks, 1.0, thr)
    assert abs(est - p) <= binomial_band(p, n) + 1e-12


def test_monte_carlo_partition_scheme_deterministic():
    a = monte_carlo_outage(1.0, 1.0, 3.0, 1.0, [0.3, 0.5], 50_000, seed=3, partitions=4)
    b = monte_carlo_outage(1.0, 1.0, 3.0, 1.0, [0.3, 0.5], 50_000, seed=3, partitions=4, workers=4)
    assert np.array_equal(a, b)
    edges = monte_carlo_outage(1.0, 1.0, 3.0, 1.0, [0.0, math.inf], 10, seed=3)
    assert list(edges) == [0.0, 1.0]
