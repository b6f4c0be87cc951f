"""Downlink NOMA within one beam: SINR, SIC rates, closed-form power split.

Users in a group are held weakest-first (decreasing A, where
A = L / (rho |g|^2 G) is the inverse effective SNR). User positions inside a
group are 0-based. User l decodes and cancels the messages of users 0..l-1
and sees users l+1.. as interference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass
class OrderedGroup:
    index: int
    user_ids: list[int]
    A: np.ndarray
    bandwidth: float
    rho: float
    qos: float

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        if len(self.user_ids) != len(self.A):
            raise ValueError("user_ids and A must have equal length")
        if np.any(np.diff(self.A) > 0):
            raise ValueError("A must be non-increasing (weakest user first)")
        if not (self.rho > 0 and self.bandwidth > 0 and self.qos >= 0):
            raise ValueError("need rho > 0, bandwidth > 0, qos >= 0")

    @classmethod
    def from_users(cls, index, user_ids, A, bandwidth, rho, qos) -> "OrderedGroup":
        """Sort users by decreasing A, ties by user id."""
        A = np.asarray(A, dtype=float)
        order = sorted(range(len(A)), key=lambda i: (-A[i], user_ids[i]))
        return cls(index, [user_ids[i] for i in order], A[order], bandwidth, rho, qos)

    @property
    def size(self) -> int:
        return len(self.A)

    @property
    def qos_norm(self) -> float:
        """QoS threshold in bits/s/Hz."""
        return self.qos / self.bandwidth

    @property
    def phi(self) -> float:
        """SINR needed to reach the QoS rate."""
        return 2.0 ** self.qos_norm - 1.0


@dataclass
class PowerAllocation:
    alphas: np.ndarray
    min_alphas: np.ndarray
    feasible: bool
    critical_user: int | None
    sum_rate: float

    @property
    def served(self) -> np.ndarray:
        return self.alphas > 0


def _interference(alphas: np.ndarray, j: int) -> float:
    return float(np.sum(alphas[j + 1:]))


def sinr(group: OrderedGroup, alphas, l: int) -> float:
    alphas = np.asarray(alphas, dtype=float)
    if not 0 <= l < group.size:
        raise IndexError(f"user position {l} outside group of {group.size}")
    return float(alphas[l] / (_interference(alphas, l) + group.A[l]))


def user_rates(group: OrderedGroup, alphas) -> np.ndarray:
    alphas = np.asarray(alphas, dtype=float)
    tail = np.concatenate([np.cumsum(alphas[::-1])[::-1][1:], [0.0]])
    return group.bandwidth * np.log2(1.0 + alphas / (tail + group.A))


def cross_rate(group: OrderedGroup, alphas, j: int, l: int) -> float:
    """Rate at which user l can decode user j's message (j <= l)."""
    if j > l:
        raise ValueError(f"SIC order violated: message {j} decoded at weaker user {l}")
    alphas = np.asarray(alphas, dtype=float)
    gamma = alphas[j] / (_interference(alphas, j) + group.A[l])
    return float(group.bandwidth * math.log2(1.0 + gamma))


def min_power_coefficients(group: OrderedGroup) -> np.ndarray:
    """QoS-tight coefficients from the strongest user down.

    alpha_l = phi * (sum_{k>l} alpha_k + A_l), so each user sits exactly at
    the QoS SINR given the minimum powers of the users above it.
    """
    phi = group.phi
    out = np.empty(group.size)
    above = 0.0
    for l in range(group.size - 1, -1, -1):
        out[l] = phi * (above + group.A[l])
        above += out[l]
    return out


def feasibility_condition(group: OrderedGroup) -> float:
    """Left side of the feasibility test; all users meet QoS iff <= 1."""
    w = 2.0 ** (np.arange(group.size) * group.qos_norm)
    return float(group.phi * np.sum(w * group.A))


def allocate_power(group: OrderedGroup) -> PowerAllocation:
    """Closed-form sum-rate maximising split under per-user QoS.

    Feasible: users 0..K-2 get the least power meeting QoS *including* the
    interference of the strongest user's final share, and the strongest user
    takes the rest. Otherwise the largest satisfiable strong suffix is served
    at its minima, the next user down (the critical user) takes the
    remainder, and weaker users get nothing.
    """
    K = group.size
    if K == 0:
        raise ValueError("cannot allocate power in an empty group")
    B, qn, phi, A = group.bandwidth, group.qos_norm, group.phi, group.A
    mins = min_power_coefficients(group)
    suffix = np.cumsum(mins[::-1])[::-1]

    if suffix[0] <= 1.0:
        alphas = np.empty(K)
        w = 2.0 ** (np.arange(K - 1) * qn)
        alphas[K - 1] = 2.0 ** (-(K - 1) * qn) * (1.0 - phi * np.sum(w * A[: K - 1]))
        above = alphas[K - 1]
        for l in range(K - 2, -1, -1):
            alphas[l] = phi * (above + A[l])
            above += alphas[l]
        rates = user_rates(group, alphas)
        return PowerAllocation(alphas, mins, True, None, float(np.sum(rates)))

    # suffix is decreasing in position; first position whose tail fits.
    first_fit = int(np.argmax(suffix <= 1.0)) if np.any(suffix <= 1.0) else K
    u = first_fit - 1
    tail = suffix[u + 1] if u + 1 < K else 0.0
    delta = 1.0 - tail
    assert delta >= -1e-12, "critical user search produced negative power"
    alphas = np.zeros(K)
    alphas[u + 1:] = mins[u + 1:]
    alphas[u] = max(delta, 0.0)
    rates = user_rates(group, alphas)
    return PowerAllocation(alphas, mins, False, u, float(np.sum(rates)))


def closed_form_sum_rate(group: OrderedGroup, alloc: PowerAllocation) -> float:
    """Sum rate from the allocation's closed-form expression (not per-user SINRs)."""
    B, A, K = group.bandwidth, group.A, group.size
    if alloc.feasible:
        return (K - 1) * group.qos + B * math.log2(1.0 + alloc.alphas[-1] / A[-1])
    u = alloc.critical_user
    d = alloc.alphas[u]
    return (K - 1 - u) * group.qos + B * math.log2(1.0 + d / (1.0 - d + A[u]))


def uniform_allocation(group: OrderedGroup) -> np.ndarray:
    return np.full(group.size, 1.0 / group.size)


def oma_rates(group: OrderedGroup) -> np.ndarray:
    """Equal power and equal bandwidth split (OFDMA baseline).

    Each user gets P_t/K_m over B/K_m; the noise is taken over B/K_m as well,
    so rho_OMA = K_m * rho.
    """
    K = group.size
    rho_oma = group.rho * K
    h_sq = 1.0 / (group.rho * group.A)
    return (group.bandwidth / K) * np.log2(1.0 + rho_oma * h_sq / K)


def oma_noise_power_dbm(B: float, NF: float, K_m: int) -> float:
    from .link import noise_power_dbm

    return noise_power_dbm(B / K_m, NF)


def sum_rate(groups: Sequence[OrderedGroup], allocations: Sequence[PowerAllocation]) -> float:
    if len(groups) != len(allocations):
        raise ValueError("groups and allocations differ in length")
    return float(sum(np.sum(user_rates(g, a.alphas)) for g, a in zip(groups, allocations)))


def tdm_average(total_rate: float, n_groups: int) -> float:
    return total_rate / n_groups


def jain_index(rates) -> float:
    r = np.asarray(rates, dtype=float)
    denom = len(r) * np.sum(r * r)
    return float(np.sum(r) ** 2 / denom) if denom > 0 else float("nan")


@dataclass
class EfficiencyMetrics:
    ee_per_user: np.ndarray      # bits/J, nan where undefined
    ee_mean: float
    se: float                    # bits/s/Hz
    ase_per_beam: np.ndarray     # bits/s/Hz/km^2
    ase_system: float            # bits/s/Hz/km^2
    fairness: float

    def as_dict(self) -> dict:
        return {
            "ee_mean": self.ee_mean,
            "se": self.se,
            "ase_system": self.ase_system,
            "fairness": self.fairness,
            "ase_per_beam": [float(x) for x in self.ase_per_beam],
        }


def efficiency_metrics(rates, alphas, group_rates, beam_radii_km, *, n_users: int,
                       transmit_power_w: float, circuit_power_w: float,
                       bandwidth_hz: float, altitude_km: float,
                       psi_min_rad: float) -> EfficiencyMetrics:
    """Energy, spectral and area efficiency plus Jain fairness.

    `rates` and `alphas` are per-user, flat across all groups. The mean EE is
    the sum of per-user EE divided by K*M.
    """
    rates = np.asarray(rates, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    group_rates = np.asarray(group_rates, dtype=float)
    radii = np.asarray(beam_radii_km, dtype=float)
    M = len(group_rates)
    denom = alphas * transmit_power_w + circuit_power_w
    with np.errstate(divide="ignore", invalid="ignore"):
        ee = np.where(denom > 0, rates / np.where(denom > 0, denom, 1.0), np.nan)
    total = float(np.sum(group_rates))
    return EfficiencyMetrics(
        ee_per_user=ee,
        ee_mean=float(np.nansum(ee) / (n_users * M)),
        se=total / bandwidth_hz,
        ase_per_beam=group_rates / (bandwidth_hz * math.pi * radii ** 2),
        ase_system=total * math.tan(psi_min_rad) ** 2 / (bandwidth_hz * math.pi * altitude_km ** 2),
        fairness=jain_index(rates),
    )
