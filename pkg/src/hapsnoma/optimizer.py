"""Beam-radius search: grouping, association, beam refinement, power split.

For a candidate common radius r the pipeline is: greedy disk cover, nearest
center association, per-group minimum enclosing circle, gains and path loss,
closed-form NOMA allocation per group. The search walks r (fixed-step sweep
or bisection) and keeps the best objective seen so far, starting from the
single wide-beam baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from . import noma
from .geometry import (Association, Circle, SpotBeam, associate, gdc_cover, heuristic_mec,
                       welzl_mec)
from .link import (ChannelRealization, elevation_and_distance, make_beam, path_loss_db,
                   sample_rician_power, user_gain)
from .scenario import PowerProfile, Scenario

# Stream tags mixed into the scenario seed.
_FADING_STREAM = 0xFAD
_SHADOW_STREAM = 0x5AD


@dataclass
class OptimizerConfig:
    r_min: float | None = None            # km, defaults to the scenario's r_min
    r_max: float | None = None            # km, defaults to the coverage radius
    strategy: Literal["sweep", "bisection"] = "sweep"
    delta_r: float = 1.0                  # km, sweep step
    tolerance_delta: float | None = None  # bits/s, defaults to the scenario's
    max_iterations: int = 1000
    mec_method: Literal["welzl", "heuristic", "none"] = "welzl"
    qos: float | None = None              # bits/s, defaults to the scenario's
    seed: int | None = None               # defaults to the scenario seed
    objective: Literal["tdm", "sum"] = "tdm"
    channel_mode: Literal["frozen", "mean", "ergodic"] = "frozen"
    ergodic_draws: int = 16
    shadowing: bool = False
    early_stop: bool = False
    radius_tol: float = 1e-3              # km, bisection interval floor

    def resolved(self, scenario: Scenario) -> "OptimizerConfig":
        cfg = replace(
            self,
            r_min=scenario.r_min_km if self.r_min is None else self.r_min,
            r_max=scenario.coverage_radius_km if self.r_max is None else self.r_max,
            tolerance_delta=(scenario.tolerance_delta if self.tolerance_delta is None
                             else self.tolerance_delta),
            qos=scenario.qos_bps if self.qos is None else self.qos,
            seed=scenario.seed if self.seed is None else self.seed,
        )
        if cfg.r_min > cfg.r_max:
            raise ValueError(f"r_min {cfg.r_min} exceeds r_max {cfg.r_max}")
        if cfg.strategy == "sweep" and not cfg.delta_r > 0:
            raise ValueError("sweep step delta_r must be > 0")
        if not cfg.tolerance_delta > 0:
            raise ValueError("tolerance_delta must be > 0")
        if cfg.strategy not in ("sweep", "bisection"):
            raise ValueError(f"unknown strategy {cfg.strategy!r}")
        if cfg.mec_method not in ("welzl", "heuristic", "none"):
            raise ValueError(f"unknown MEC method {cfg.mec_method!r}")
        return cfg


@dataclass
class Solution:
    radius_km: float
    M: int
    beams: list[SpotBeam]
    association: Association
    groups: list[noma.OrderedGroup]
    allocations: list[noma.PowerAllocation]
    channels: list[ChannelRealization]
    per_user_rates: dict[int, float]
    sum_rate: float
    tdm_average_rate: float
    objective: float
    transmit_power_w: float
    metrics: noma.EfficiencyMetrics
    protruding_beams: list[int] = field(default_factory=list)
    iteration_trace: list[dict] = field(default_factory=list)
    label: str = ""

    def per_user_alphas(self) -> dict[int, float]:
        out = {}
        for g, a in zip(self.groups, self.allocations):
            out.update({uid: float(x) for uid, x in zip(g.user_ids, a.alphas)})
        return out


def snapshot_power(profile: PowerProfile, t) -> float:
    """Transmit power (W) for time t, read at 15-minute granularity."""
    return profile.at(t)


def draw_fading(scenario: Scenario, seed: int, n_draws: int = 1) -> np.ndarray:
    """Frozen |g|^2 per user, shape (n_draws, K); row k-1 belongs to user id k."""
    rng = np.random.default_rng([seed, _FADING_STREAM])
    ln = scenario.link
    return sample_rician_power(ln.rician_k, ln.rician_omega, rng, (n_draws, scenario.n_users))


def draw_shadowing(scenario: Scenario, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, _SHADOW_STREAM])
    return rng.normal(0.0, scenario.link.shadow_sigma_db, scenario.n_users)


def fading_for(scenario: Scenario, cfg: OptimizerConfig) -> np.ndarray:
    if cfg.channel_mode == "mean":
        return np.full((1, scenario.n_users), scenario.link.rician_omega)
    n = cfg.ergodic_draws if cfg.channel_mode == "ergodic" else 1
    return draw_fading(scenario, cfg.seed, n)


def refine_beam(points: np.ndarray, grouping: Circle, method: str, r_min: float,
                seed: int = 0) -> Circle:
    """Shrink a group's footprint to its enclosing circle, floored at r_min.

    A refined circle wider than the grouping disk (possible with the
    centroid heuristic) is discarded in favour of the grouping disk.
    """
    if method == "none":
        c = grouping
    elif method == "welzl":
        c = welzl_mec(points, seed=seed)
    elif method == "heuristic":
        c = heuristic_mec(points)
    else:
        raise ValueError(f"unknown MEC method {method!r}")
    if c.radius > grouping.radius:
        c = grouping
    return Circle(c.center, max(c.radius, r_min))


def grouping_circles(scenario: Scenario, r: float) -> list[Circle]:
    """Grouping disks of radius r; r at or beyond the coverage radius means one
    beam over the whole area, centred at nadir."""
    R = scenario.coverage_radius_km
    if r >= R:
        return [Circle((0.0, 0.0), R)]
    _, centers = gdc_cover(scenario.users, r)
    return [Circle((float(x), float(y)), r) for x, y in centers]


def _user_xy(scenario: Scenario) -> np.ndarray:
    return np.array([u.position for u in scenario.users], dtype=float)


def _pathloss_lin(scenario: Scenario, shadow_db: np.ndarray | None) -> np.ndarray:
    ln = scenario.link
    elev = elevation_and_distance(_user_xy(scenario), ln.altitude_km)
    pl = path_loss_db(ln.altitude_km, elev.psi, ln.wavelength_m,
                      0.0 if shadow_db is None else shadow_db)
    return 10.0 ** (pl / 10.0)


def assemble(scenario: Scenario, beams: list[SpotBeam], assoc: Association, *,
             transmit_power_w: float, qos: float, fading: np.ndarray,
             shadow_db: np.ndarray | None = None, allocation: str = "noma",
             objective: str = "tdm", radius_km: float = float("nan"),
             label: str = "") -> Solution:
    """Channels, per-group ordering and power split for fixed beams."""
    ln = scenario.link
    rho = transmit_power_w / ln.noise_power_w
    xy = _user_xy(scenario)
    L_all = _pathloss_lin(scenario, shadow_db)
    groups, allocs, chans = [], [], []
    rates: dict[int, float] = {}
    alphas_flat, rates_flat, group_rates = [], [], []
    for m, beam in enumerate(beams):
        ids = assoc.members(m)
        idx = np.array(ids) - 1
        G = user_gain(xy[idx], beam, ln.altitude_km, ln.aperture_efficiency)
        chan = ChannelRealization(np.sqrt(fading[idx]), G, L_all[idx])
        A = 1.0 / (rho * chan.h_mag_sq)
        group = noma.OrderedGroup.from_users(m, ids, A, ln.bandwidth_hz, rho, qos)
        order = np.array(group.user_ids) - 1
        chan = ChannelRealization(np.sqrt(fading[order]), user_gain(
            xy[order], beam, ln.altitude_km, ln.aperture_efficiency), L_all[order])
        if allocation == "noma":
            alloc = noma.allocate_power(group)
        elif allocation == "uniform":
            a = noma.uniform_allocation(group)
            alloc = noma.PowerAllocation(a, noma.min_power_coefficients(group),
                                         bool(noma.feasibility_condition(group) <= 1.0), None,
                                         float(np.sum(noma.user_rates(group, a))))
        else:
            raise ValueError(f"unknown allocation {allocation!r}")
        r_users = noma.user_rates(group, alloc.alphas)
        rates.update({uid: float(x) for uid, x in zip(group.user_ids, r_users)})
        groups.append(group)
        allocs.append(alloc)
        chans.append(chan)
        alphas_flat.extend(alloc.alphas)
        rates_flat.extend(r_users)
        group_rates.append(float(np.sum(r_users)))
    total = float(np.sum(group_rates))
    M = len(beams)
    metrics = noma.efficiency_metrics(
        rates_flat, alphas_flat, group_rates, [b.radius for b in beams],
        n_users=scenario.n_users, transmit_power_w=transmit_power_w,
        circuit_power_w=scenario.circuit_power_w, bandwidth_hz=ln.bandwidth_hz,
        altitude_km=ln.altitude_km, psi_min_rad=ln.psi_min_rad)
    R = scenario.coverage_radius_km
    protruding = [m for m, b in enumerate(beams)
                  if math.hypot(*b.center) + b.radius > R * (1 + 1e-12)]
    tdm = total / M
    return Solution(
        radius_km=radius_km, M=M, beams=list(beams), association=assoc, groups=groups,
        allocations=allocs, channels=chans, per_user_rates=rates, sum_rate=total,
        tdm_average_rate=tdm, objective=tdm if objective == "tdm" else total,
        transmit_power_w=transmit_power_w, metrics=metrics, protruding_beams=protruding,
        label=label)


def build_beams(scenario: Scenario, r: float, mec_method: str, r_min: float,
                seed: int = 0) -> tuple[list[SpotBeam], Association]:
    ln = scenario.link
    circles = grouping_circles(scenario, r)
    assoc = associate(scenario.users, circles)
    xy = _user_xy(scenario)
    refined = []
    for m, c in enumerate(circles):
        idx = np.array(assoc.members(m)) - 1
        refined.append(refine_beam(xy[idx], c, mec_method, r_min, seed))
    beams = [make_beam(c, ln.altitude_km, ln.aperture_efficiency) for c in refined]
    return beams, assoc


def evaluate_radius(scenario: Scenario, r: float, config: OptimizerConfig | None = None,
                    transmit_power_w: float | None = None,
                    fading: np.ndarray | None = None) -> tuple[Solution, float]:
    """Full pipeline at common grouping radius r; returns (candidate, objective)."""
    cfg = (config or OptimizerConfig()).resolved(scenario)
    if not r > 0:
        raise ValueError(f"radius must be > 0, got {r}")
    pt = scenario.transmit_power() if transmit_power_w is None else transmit_power_w
    fad = fading_for(scenario, cfg) if fading is None else np.atleast_2d(fading)
    shadow = draw_shadowing(scenario, cfg.seed) if cfg.shadowing else None
    beams, assoc = build_beams(scenario, r, cfg.mec_method, cfg.r_min, cfg.seed)
    sols = [assemble(scenario, beams, assoc, transmit_power_w=pt, qos=cfg.qos, fading=f,
                     shadow_db=shadow, objective=cfg.objective, radius_km=r,
                     label=f"r={r:g}") for f in fad]
    sol = sols[0]
    sol.objective = float(np.mean([s.objective for s in sols]))
    return sol, sol.objective


def baseline_solution(scenario: Scenario, config: OptimizerConfig | None = None,
                      transmit_power_w: float | None = None,
                      fading: np.ndarray | None = None) -> Solution:
    """No grouping, no beam shaping: one nadir beam of the coverage radius and
    an equal power split."""
    cfg = (config or OptimizerConfig()).resolved(scenario)
    pt = scenario.transmit_power() if transmit_power_w is None else transmit_power_w
    fad = fading_for(scenario, cfg) if fading is None else np.atleast_2d(fading)
    shadow = draw_shadowing(scenario, cfg.seed) if cfg.shadowing else None
    ln = scenario.link
    circle = Circle((0.0, 0.0), scenario.coverage_radius_km)
    beams = [make_beam(circle, ln.altitude_km, ln.aperture_efficiency)]
    assoc = associate(scenario.users, beams)
    sols = [assemble(scenario, beams, assoc, transmit_power_w=pt, qos=cfg.qos, fading=f,
                     shadow_db=shadow, allocation="uniform", objective=cfg.objective,
                     radius_km=scenario.coverage_radius_km, label="baseline") for f in fad]
    sol = sols[0]
    sol.objective = float(np.mean([s.objective for s in sols]))
    return sol


def sweep_radii(r_min: float, r_max: float, step: float) -> list[float]:
    n = int(math.floor((r_max - r_min) / step + 1e-9))
    radii = [r_min + i * step for i in range(n + 1)]
    if r_max - radii[-1] > 1e-9:
        radii.append(r_max)
    return radii


def optimize(scenario: Scenario, config: OptimizerConfig | None = None,
             transmit_power_w: float | None = None) -> Solution:
    """Search the common beam radius and return the best solution found.

    The kept objective never decreases: a candidate replaces the incumbent
    only if it is strictly better, so ties go to the earlier (smaller) radius
    in a sweep. The returned solution is never worse than the baseline.
    """
    if scenario.n_users == 0:
        raise ValueError("scenario has no users to serve")
    cfg = (config or OptimizerConfig()).resolved(scenario)
    pt = scenario.transmit_power() if transmit_power_w is None else transmit_power_w
    fad = fading_for(scenario, cfg)
    best = baseline_solution(scenario, cfg, pt, fad)
    trace = [{"iteration": 0, "radius_km": best.radius_km, "M": best.M,
              "candidate": best.objective, "kept": best.objective, "accepted": True}]

    def step(i: int, r: float) -> tuple[Solution, float]:
        nonlocal best
        cand, obj = evaluate_radius(scenario, r, cfg, pt, fad)
        eps = obj - best.objective
        accepted = eps > 0
        if accepted:
            best = cand
        trace.append({"iteration": i, "radius_km": r, "M": cand.M, "candidate": obj,
                      "kept": best.objective, "accepted": accepted})
        return cand, eps

    if cfg.strategy == "sweep":
        for i, r in enumerate(sweep_radii(cfg.r_min, cfg.r_max, cfg.delta_r), start=1):
            if i > cfg.max_iterations:
                break
            _, eps = step(i, r)
            if cfg.early_stop and max(0.0, eps) < cfg.tolerance_delta:
                break
    else:
        lo, hi = cfg.r_min, cfg.r_max
        for i in range(1, cfg.max_iterations + 1):
            r = 0.5 * (lo + hi)
            _, eps = step(i, r)
            if eps > 0:
                hi = r
            else:
                lo = r
            if (eps > 0 and eps < cfg.tolerance_delta) or hi - lo < cfg.radius_tol:
                break

    best.iteration_trace = trace
    return best


def recompute_sum_rate(scenario: Scenario, sol: Solution, fading: np.ndarray,
                       shadow_db: np.ndarray | None = None) -> float:
    """Sum rate rebuilt from the beams, association and stored power split."""
    ln = scenario.link
    rho = sol.transmit_power_w / ln.noise_power_w
    xy = _user_xy(scenario)
    L_all = _pathloss_lin(scenario, shadow_db)
    total = 0.0
    for m, (beam, group, alloc) in enumerate(zip(sol.beams, sol.groups, sol.allocations)):
        if sorted(group.user_ids) != sol.association.members(m):
            raise ValueError(f"group {m} disagrees with the association")
        idx = np.array(group.user_ids) - 1
        G = user_gain(xy[idx], beam, ln.altitude_km, ln.aperture_efficiency)
        A = L_all[idx] / (rho * fading[idx] * G)
        regrouped = noma.OrderedGroup(m, group.user_ids, A, ln.bandwidth_hz, rho, group.qos)
        total += float(np.sum(noma.user_rates(regrouped, alloc.alphas)))
    return total


def oma_solution_rates(sol: Solution) -> dict[int, float]:
    out = {}
    for g in sol.groups:
        out.update({uid: float(r) for uid, r in zip(g.user_ids, noma.oma_rates(g))})
    return out
