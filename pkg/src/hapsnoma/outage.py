"""Outage probability: Marcum-Q closed forms and a Monte Carlo estimator.

Outage for user l means |h_l|^2 falls below the largest SIC threshold it has
to clear, Psi_max. With Rician |g|^2 this is a Marcum-Q expression.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .link import sample_rician_power

CERTAIN_OUTAGE = math.inf

# Poisson bulk half-width, in standard deviations plus a constant; the mass
# outside is far below 1e-17.
_TAIL_SD = 12.0
_TAIL_PAD = 40.0
_MAX_SPAN = 4_000_000


def _poisson_pmf(lam: float, n: np.ndarray) -> np.ndarray:
    if lam == 0.0:
        return (n == 0).astype(float)
    logf = np.array([math.lgamma(k + 1.0) for k in n])
    return np.exp(n * math.log(lam) - lam - logf)


def marcum_q1(a: float, b: float) -> float:
    """First-order Marcum Q function Q_1(a, b).

    Uses the Poisson-mixture form of the Bessel series: with N_x ~ Pois(b^2/2)
    and N_l ~ Pois(a^2/2) independent, Q_1(a, b) = P(N_x <= N_l). Both bulk
    ranges are summed exactly; the omitted tails are below 1e-17. Whichever of
    Q_1 and 1 - Q_1 is smaller is summed directly so deep tails keep their
    relative accuracy.
    """
    if a < 0 or b < 0 or math.isnan(a) or math.isnan(b):
        raise ValueError(f"Marcum Q needs a, b >= 0 (a={a}, b={b})")
    if b == 0.0:
        return 1.0
    if math.isinf(b):
        return 0.0
    lam, x = 0.5 * a * a, 0.5 * b * b
    if lam == 0.0:
        return math.exp(-x)
    hi_w = _TAIL_SD * math.sqrt(max(lam, x)) + _TAIL_PAD
    n0 = max(0, int(math.floor(min(lam, x) - hi_w)))
    n1 = int(math.ceil(max(lam, x) + hi_w))
    if n1 - n0 > _MAX_SPAN:
        # Bulks are disjoint by thousands of standard deviations.
        return 1.0 if lam > x else 0.0
    n = np.arange(n0, n1 + 1, dtype=float)
    p_lam = _poisson_pmf(lam, n)
    p_x = _poisson_pmf(x, n)
    if x >= lam:
        cdf_x = np.cumsum(p_x)
        q = float(np.dot(p_lam, cdf_x))
        return min(max(q, 0.0), 1.0)
    sf_x = np.concatenate([np.cumsum(p_x[::-1])[::-1][1:], [0.0]])
    comp = float(np.dot(p_lam, sf_x))
    return min(max(1.0 - comp, 0.0), 1.0)


def rician_power_cdf(y: float, Ks: float, Omega: float) -> float:
    """P(|g|^2 <= y) for Rician fading with K-factor Ks and E|g|^2 = Omega."""
    if y <= 0:
        return 0.0
    if math.isinf(y):
        return 1.0
    xi = (Ks + 1.0) / Omega
    return 1.0 - marcum_q1(math.sqrt(2.0 * Ks), math.sqrt(2.0 * xi * y))


@dataclass
class OutageSpec:
    target_rates: np.ndarray
    phis: np.ndarray
    psi: np.ndarray        # per-user SIC thresholds on |h|^2
    psi_max: np.ndarray    # running maximum over weaker users


def rate_threshold(target_rate, bandwidth: float):
    return 2.0 ** (np.asarray(target_rate, dtype=float) / bandwidth) - 1.0


def psi_thresholds(alphas, phis, rho: float) -> np.ndarray:
    """Per-message thresholds on |h|^2; inf marks certain outage."""
    alphas = np.asarray(alphas, dtype=float)
    phis = np.broadcast_to(np.asarray(phis, dtype=float), alphas.shape)
    K = len(alphas)
    psi = np.empty(K)
    for j in range(K):
        if phis[j] == 0.0:
            psi[j] = 0.0
            continue
        denom = alphas[j] - phis[j] * float(np.sum(alphas[j + 1:]))
        psi[j] = phis[j] / (rho * denom) if denom > 0 else CERTAIN_OUTAGE
    return psi


def psi_max(alphas, phis, rho: float, l: int) -> float:
    """Largest threshold user l must clear (positions 0..l)."""
    if not 0 <= l < len(alphas):
        raise IndexError(f"user position {l} outside group of {len(alphas)}")
    return float(np.max(psi_thresholds(alphas, phis, rho)[: l + 1]))


def outage_spec(alphas, target_rates, bandwidth: float, rho: float) -> OutageSpec:
    alphas = np.asarray(alphas, dtype=float)
    rates = np.broadcast_to(np.asarray(target_rates, dtype=float), alphas.shape).copy()
    phis = rate_threshold(rates, bandwidth)
    psi = psi_thresholds(alphas, phis, rho)
    return OutageSpec(rates, phis, psi, np.maximum.accumulate(psi))


def noma_outage_closed(L: float, G: float, Ks: float, Omega: float, psi_max: float) -> float:
    if math.isinf(psi_max):
        return 1.0
    if psi_max <= 0:
        return 0.0
    b = math.sqrt(2.0 * L * psi_max * (1.0 + Ks) / (G * Omega))
    return 1.0 - marcum_q1(math.sqrt(2.0 * Ks), b)


def oma_psi(target_rate: float, bandwidth: float, K_m: int, rho_oma: float) -> float:
    """Threshold on |h|^2 for OMA: user gets P_t/K_m over B/K_m."""
    phi_oma = 2.0 ** (target_rate * K_m / bandwidth) - 1.0
    return phi_oma * K_m / rho_oma


def oma_outage_closed(L: float, G: float, Ks: float, Omega: float, psi_oma: float) -> float:
    return noma_outage_closed(L, G, Ks, Omega, psi_oma)


def _chunk_sizes(n: int, parts: int) -> list[int]:
    base, extra = divmod(n, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def _count_below(seq: np.random.SeedSequence, size: int, Ks, Omega, scale, shadow_sigma_db) -> int:
    rng = np.random.default_rng(seq)
    g2 = sample_rician_power(Ks, Omega, rng, size)
    if shadow_sigma_db > 0:
        g2 = g2 * 10.0 ** (-rng.normal(0.0, shadow_sigma_db, size) / 10.0)
    return int(np.count_nonzero(g2 < scale))


def monte_carlo_outage(L, G, Ks: float, Omega: float, thresholds, n_samples: int,
                       seed: int, partitions: int = 1, workers: int = 1,
                       shadow_sigma_db: float = 0.0) -> np.ndarray:
    """Empirical P(|h|^2 < threshold) per user.

    User k draws from SeedSequence(seed).spawn(K)[k], split into `partitions`
    child streams. The estimate depends on (seed, n_samples, partitions) only,
    not on `workers`.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if partitions < 1:
        raise ValueError("partitions must be >= 1")
    thr = np.atleast_1d(np.asarray(thresholds, dtype=float))
    L = np.broadcast_to(np.asarray(L, dtype=float), thr.shape)
    G = np.broadcast_to(np.asarray(G, dtype=float), thr.shape)
    user_seqs = np.random.SeedSequence(seed).spawn(len(thr))
    sizes = _chunk_sizes(n_samples, partitions)
    out = np.empty(len(thr))
    for k, seq in enumerate(user_seqs):
        if thr[k] <= 0:
            out[k] = 0.0
            continue
        if math.isinf(thr[k]):
            out[k] = 1.0
            continue
        # |h|^2 < thr  <=>  |g|^2 < thr * L / G
        scale = thr[k] * L[k] / G[k]
        jobs = list(zip(seq.spawn(partitions), sizes))
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                counts = list(pool.map(lambda js: _count_below(js[0], js[1], Ks, Omega, scale,
                                                                shadow_sigma_db), jobs))
        else:
            counts = [_count_below(s, n, Ks, Omega, scale, shadow_sigma_db) for s, n in jobs]
        out[k] = sum(counts) / n_samples
    return out


def binomial_band(p: float, n: int, sigmas: float = 3.0) -> float:
    return sigmas * math.sqrt(p * (1.0 - p) / n)
