"""Link budget: aperture gain, close-in path loss, Rician fading and noise.

Everything inside is SI and linear (m, Hz, W, power ratios); dB / dBm appear
only in the helpers whose names say so. Ground distances and altitude are km
because that is how scenarios are written; they are converted where the
physics needs metres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .geometry import Circle, SpotBeam, hpbw_from_radius

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_FLOOR_DBM_HZ = -174.0
# Peak-gain constant of the aperture approximation, beamwidth in degrees.
APERTURE_CONST_DEG = 70.0 * math.pi


def db_to_lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w) + 30.0


@dataclass(frozen=True)
class LinkParams:
    carrier_freq_hz: float
    altitude_km: float
    aperture_efficiency: float
    antenna_diameter_m: float
    bandwidth_hz: float
    noise_figure_db: float
    rician_k: float
    rician_omega: float
    shadow_sigma_db: float = 0.0
    psi_min_rad: float = math.radians(12.0)

    def __post_init__(self):
        checks = {
            "carrier_freq_hz": self.carrier_freq_hz > 0,
            "altitude_km": self.altitude_km > 0,
            "aperture_efficiency": 0 < self.aperture_efficiency <= 1,
            "antenna_diameter_m": self.antenna_diameter_m > 0,
            "bandwidth_hz": self.bandwidth_hz > 0,
            "rician_k": self.rician_k >= 0,
            "rician_omega": self.rician_omega > 0,
            "shadow_sigma_db": self.shadow_sigma_db >= 0,
            "psi_min_rad": 0 < self.psi_min_rad <= math.pi / 2,
        }
        bad = [name for name, ok in checks.items() if not ok]
        if bad:
            raise ValueError(f"invalid link parameter(s): {', '.join(bad)}")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def max_ground_range_km(self) -> float:
        """Ground range at which the elevation drops to psi_min."""
        return self.altitude_km / math.tan(self.psi_min_rad)

    @property
    def noise_power_w(self) -> float:
        return dbm_to_watts(noise_power_dbm(self.bandwidth_hz, self.noise_figure_db))


@dataclass
class ChannelRealization:
    """Per-user channel pieces; fields may be scalars or equal-length arrays."""

    g_mag: np.ndarray
    gain_G: np.ndarray
    pathloss_L: np.ndarray
    h_mag_sq: np.ndarray = field(init=False)

    def __post_init__(self):
        self.g_mag = np.asarray(self.g_mag, dtype=float)
        self.gain_G = np.asarray(self.gain_G, dtype=float)
        self.pathloss_L = np.asarray(self.pathloss_L, dtype=float)
        if np.any(self.g_mag <= 0) or np.any(self.gain_G <= 0) or np.any(self.pathloss_L <= 0):
            raise ValueError("channel components must be strictly positive")
        self.h_mag_sq = self.g_mag ** 2 * self.gain_G / self.pathloss_L


class Elevation(NamedTuple):
    psi: np.ndarray
    distance_km: np.ndarray
    below_min: np.ndarray


def peak_gain(hpbw_deg: float, eta: float) -> float:
    if not hpbw_deg > 0:
        raise ValueError(f"beamwidth must be > 0, got {hpbw_deg}")
    return eta * (APERTURE_CONST_DEG / hpbw_deg) ** 2


def make_beam(circle: Circle, H: float, eta: float) -> SpotBeam:
    hpbw = hpbw_from_radius(circle.radius, H)
    return SpotBeam(circle, hpbw, peak_gain(hpbw, eta))


def user_gain(user_pos, beam: SpotBeam, H: float, eta: float):
    """Directivity gain (linear) towards user(s) at `user_pos` (km)."""
    if not H > 0:
        raise ValueError(f"altitude must be > 0, got {H}")
    pos = np.asarray(user_pos, dtype=float)
    offset = np.hypot(pos[..., 0] - beam.center[0], pos[..., 1] - beam.center[1])
    theta_u = np.degrees(np.arctan(offset / H))
    g0 = beam.peak_gain
    gain_db = 10.0 * math.log10(g0) - 12.0 * (g0 / eta) * (theta_u / APERTURE_CONST_DEG) ** 2
    return db_to_lin(gain_db)


def elevation_and_distance(user_pos, H: float, psi_min: float | None = None) -> Elevation:
    if not H > 0:
        raise ValueError(f"altitude must be > 0, got {H}")
    pos = np.asarray(user_pos, dtype=float)
    ground = np.hypot(pos[..., 0], pos[..., 1])
    psi = np.arctan2(H, ground)
    dist = np.hypot(H, ground)
    if psi_min is None:
        below = np.zeros_like(psi, dtype=bool)
    else:
        # Half an ulp of slack so users placed exactly at H / tan(psi_min) pass.
        below = psi < psi_min * (1 - 1e-12)
    return Elevation(psi, dist, below)


def path_loss_db(H: float, psi, wavelength: float, shadow_sample=0.0):
    """Close-in path loss in dB; `shadow_sample` (dB) is added verbatim."""
    psi = np.asarray(psi, dtype=float)
    if np.any(psi <= 0) or np.any(psi > math.pi / 2 + 1e-15):
        raise ValueError("elevation must lie in (0, pi/2]")
    if not wavelength > 0:
        raise ValueError("wavelength must be > 0")
    h_m = H * 1e3
    fspl = 10.0 * np.log10(16.0 * math.pi ** 2 * h_m ** 2 / (wavelength ** 2 * np.sin(psi) ** 2))
    return fspl + shadow_sample


def rician_components(Ks: float, Omega: float) -> tuple[float, float]:
    """(nu, sigma_f) for power-normalised Rician fading with E|g|^2 = Omega."""
    nu = math.sqrt(Ks * Omega / (1.0 + Ks))
    sigma_f = math.sqrt(Omega / (2.0 * (1.0 + Ks)))
    return nu, sigma_f


def sample_rician_power(Ks: float, Omega: float, rng: np.random.Generator, size=None):
    """Draw |g|^2 for Rician fading with K-factor Ks and mean power Omega."""
    if Ks < 0 or Omega <= 0:
        raise ValueError(f"need Ks >= 0 and Omega > 0 (Ks={Ks}, Omega={Omega})")
    if math.isinf(Ks):
        return np.full(size, Omega) if size is not None else Omega
    nu, sigma_f = rician_components(Ks, Omega)
    re = nu + sigma_f * rng.standard_normal(size)
    im = sigma_f * rng.standard_normal(size)
    return re * re + im * im


def noise_power_dbm(B: float, NF: float) -> float:
    if not B > 0:
        raise ValueError(f"bandwidth must be > 0, got {B}")
    return THERMAL_FLOOR_DBM_HZ + 10.0 * math.log10(B) + NF


def a_coefficient(channel: ChannelRealization, transmit_snr_rho):
    """Inverse effective receive SNR, L / (rho |g|^2 G)."""
    rho = np.asarray(transmit_snr_rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("transmit SNR must be > 0")
    return 1.0 / (rho * channel.h_mag_sq)
