"""Scenarios: user placement, configuration files and transmit-power profiles.

A scenario file is JSON with top-level keys ``coverage``, ``link``,
``users`` or ``ppp``, ``power_profile``, ``qos`` and ``seed``; ``optimizer``,
``circuit_power_w`` and ``metadata`` are optional. Unknown keys are kept
out of the model and reported with a warning.
"""

from __future__ import annotations

import bisect
import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .geometry import GroundUser, make_users
from .link import LinkParams

SLOT_MINUTES = 15
DAY_MINUTES = 24 * 60
DEFAULT_SCENARIO = "default"


class ScenarioError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def parse_time(t) -> float:
    """Minutes since midnight from a number, 'HH:MM[:SS]' or ISO-8601 datetime."""
    if isinstance(t, (int, float)) and not isinstance(t, bool):
        return float(t)
    s = str(t).strip()
    if "T" in s:
        s = s.split("T", 1)[1]
    for sep in ("+", "Z"):
        s = s.split(sep, 1)[0]
    parts = s.split(":")
    if len(parts) == 1:
        return float(parts[0])
    h, m = int(parts[0]), int(parts[1])
    sec = float(parts[2]) if len(parts) > 2 else 0.0
    return h * 60.0 + m + sec / 60.0


def format_time(minutes: float) -> str:
    total = int(round(minutes))
    return f"{total // 60:02d}:{total % 60:02d}"


@dataclass(frozen=True)
class PowerProfile:
    """Piecewise-constant transmit power, in watts, keyed by minutes since midnight.

    Each entry holds until the next one; the last entry holds for one slot.
    Queries are floored to the slot grid first.
    """

    minutes: tuple[float, ...]
    watts: tuple[float, ...]
    label: str = ""

    def __post_init__(self):
        if not self.minutes:
            raise ScenarioError("power_profile", "profile is empty")
        if len(self.minutes) != len(self.watts):
            raise ScenarioError("power_profile", "time and power columns differ in length")
        if any(b <= a for a, b in zip(self.minutes, self.minutes[1:])):
            raise ScenarioError("power_profile", "times must be strictly increasing")
        if any(w < 0 or math.isnan(w) for w in self.watts):
            raise ScenarioError("power_profile", "power values must be >= 0")

    @classmethod
    def constant(cls, watts: float, label: str = "constant") -> "PowerProfile":
        return cls((0.0,), (float(watts),), label)._spanning_day()

    def _spanning_day(self) -> "PowerProfile":
        # A single entry at 00:00 is read as valid all day.
        if len(self.minutes) == 1 and self.minutes[0] == 0.0:
            grid = tuple(float(m) for m in range(0, DAY_MINUTES, SLOT_MINUTES))
            return PowerProfile(grid, (self.watts[0],) * len(grid), self.label)
        return self

    @property
    def span(self) -> tuple[float, float]:
        return self.minutes[0], self.minutes[-1] + SLOT_MINUTES

    def at(self, t) -> float:
        m = parse_time(t)
        lo, hi = self.span
        if not lo <= m < hi:
            raise ValueError(f"time {t!r} outside profile span "
                             f"[{format_time(lo)}, {format_time(hi)})")
        slot = math.floor(m / SLOT_MINUTES) * SLOT_MINUTES
        i = bisect.bisect_right(self.minutes, max(slot, lo)) - 1
        return self.watts[i]

    def peak(self) -> float:
        return max(self.watts)

    def to_rows(self) -> list[list]:
        return [[format_time(m), w] for m, w in zip(self.minutes, self.watts)]


def load_power_profile(path) -> PowerProfile:
    """Read a two-column CSV (time, watts); a header row is optional."""
    minutes, watts = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                w = float(row[1])
            except ValueError:
                continue  # header
            minutes.append(parse_time(row[0]))
            watts.append(w)
    return PowerProfile(tuple(minutes), tuple(watts), Path(path).name)


def write_power_profile(profile: PowerProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "watts"])
        for t, p in profile.to_rows():
            w.writerow([t, repr(float(p))])


def synthetic_day_profile(peak_w: float = 400.0, night_w: float = 60.0,
                          sunrise: str = "06:00", sunset: str = "20:00") -> PowerProfile:
    """SYNTHETIC demo profile: half-sine daylight on top of a constant night floor."""
    rise, sset = parse_time(sunrise), parse_time(sunset)
    minutes, watts = [], []
    for m in range(0, DAY_MINUTES, SLOT_MINUTES):
        p = night_w
        if rise <= m < sset:
            p = night_w + (peak_w - night_w) * math.sin(math.pi * (m - rise) / (sset - rise))
        minutes.append(float(m))
        watts.append(round(p, 6))
    return PowerProfile(tuple(minutes), tuple(watts), "synthetic half-sine")


def generate_users_ppp(K: int | None, R: float, seed: int,
                       intensity: float | None = None) -> list[GroundUser]:
    """Uniform users on the disk of radius R (km).

    With `K` the count is fixed (binomial process); with `intensity`
    (users per km^2) the count is Poisson(intensity * pi R^2).
    """
    if not R > 0:
        raise ValueError(f"coverage radius must be > 0, got {R}")
    rng = np.random.default_rng(seed)
    if intensity is not None:
        K = int(rng.poisson(intensity * math.pi * R * R))
    if K is None or K < 0:
        raise ValueError("need a non-negative user count or an intensity")
    if K == 0:
        warnings.warn("empty scenario: zero users generated", stacklevel=2)
        return []
    rad = R * np.sqrt(rng.random(K))
    ang = 2.0 * math.pi * rng.random(K)
    return make_users(np.column_stack([rad * np.cos(ang), rad * np.sin(ang)]))


@dataclass
class Scenario:
    coverage_radius_km: float
    link: LinkParams
    users: list[GroundUser]
    power_profile: PowerProfile
    qos_bps: float
    seed: int
    circuit_power_w: float = 1.5
    reference_time: str = "12:00"
    r_min_km: float = 5.464
    tolerance_delta: float = 1e-4
    user_source: dict = field(default_factory=dict, compare=False)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        validate_scenario(self)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def altitude_km(self) -> float:
        return self.link.altitude_km

    def transmit_power(self, t=None) -> float:
        return self.power_profile.at(self.reference_time if t is None else t)

    def transmit_snr(self, t=None) -> float:
        return self.transmit_power(t) / self.link.noise_power_w

    def with_users(self, users) -> "Scenario":
        return replace(self, users=list(users), user_source={"explicit": True})


def validate_scenario(s: Scenario) -> None:
    if not s.coverage_radius_km > 0:
        raise ScenarioError("coverage.radius_km", "must be > 0")
    if s.coverage_radius_km > s.link.max_ground_range_km * (1 + 1e-12):
        raise ScenarioError("coverage.radius_km",
                            f"{s.coverage_radius_km} km exceeds the minimum-elevation range "
                            f"{s.link.max_ground_range_km:.3f} km")
    ids = [u.id for u in s.users]
    if ids != list(range(1, len(ids) + 1)):
        raise ScenarioError("users", "ids must be contiguous from 1")
    for u in s.users:
        if math.hypot(*u.position) > s.coverage_radius_km * (1 + 1e-12):
            raise ScenarioError("users", f"user {u.id} lies outside the coverage disk")
    if s.qos_bps < 0:
        raise ScenarioError("qos.rate_bps", "must be >= 0")
    if not s.r_min_km > 0:
        raise ScenarioError("optimizer.r_min_km", "must be > 0")


# -- (de)serialisation -------------------------------------------------------

_TOP_KEYS = {"coverage", "link", "users", "ppp", "power_profile", "qos", "seed",
             "optimizer", "circuit_power_w", "metadata"}
_LINK_KEYS = {"carrier_freq_hz", "aperture_efficiency", "antenna_diameter_m", "bandwidth_hz",
              "noise_figure_db", "rician_k", "sigma_f2", "rician_omega", "shadow_sigma_db"}


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ScenarioError(f"{where}.{key}" if where else key, "missing required field")
    return d[key]


def _num(d: dict, key: str, where: str, default=None) -> float:
    name = f"{where}.{key}"
    v = d.get(key, default) if default is not None else _require(d, key, where)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(name, f"expected a number, got {v!r}")
    return float(v)


def _warn_unknown(d: dict, allowed: set, where: str) -> None:
    for k in sorted(set(d) - allowed):
        warnings.warn(f"unknown field '{where + '.' if where else ''}{k}' ignored", stacklevel=3)


def scenario_from_dict(doc: dict, base_dir: Path | None = None) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("<root>", "scenario must be a JSON object")
    _warn_unknown(doc, _TOP_KEYS, "")
    cov = _require(doc, "coverage", "")
    _warn_unknown(cov, {"radius_km", "altitude_km", "psi_min_deg"}, "coverage")
    R = _num(cov, "radius_km", "coverage")
    H = _num(cov, "altitude_km", "coverage")
    psi_min = math.radians(_num(cov, "psi_min_deg", "coverage", 12.0))

    ln = _require(doc, "link", "")
    _warn_unknown(ln, _LINK_KEYS, "link")
    Ks = _num(ln, "rician_k", "link")
    if "rician_omega" in ln:
        omega = _num(ln, "rician_omega", "link")
    else:
        # E|g|^2 = nu^2 + 2 sigma_f^2 with nu^2 = Ks * 2 sigma_f^2
        omega = 2.0 * _num(ln, "sigma_f2", "link", 1.0) * (1.0 + Ks)
    try:
        link = LinkParams(
            carrier_freq_hz=_num(ln, "carrier_freq_hz", "link"),
            altitude_km=H,
            aperture_efficiency=_num(ln, "aperture_efficiency", "link"),
            antenna_diameter_m=_num(ln, "antenna_diameter_m", "link"),
            bandwidth_hz=_num(ln, "bandwidth_hz", "link"),
            noise_figure_db=_num(ln, "noise_figure_db", "link"),
            rician_k=Ks,
            rician_omega=omega,
            shadow_sigma_db=_num(ln, "shadow_sigma_db", "link", 0.0),
            psi_min_rad=psi_min,
        )
    except ValueError as exc:
        raise ScenarioError("link", str(exc)) from None

    seed = _require(doc, "seed", "")
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioError("seed", f"expected an integer, got {seed!r}")

    if "users" in doc and "ppp" in doc:
        raise ScenarioError("users", "give either 'users' or 'ppp', not both")
    if "users" in doc:
        coords = doc["users"]
        if not isinstance(coords, list) or not all(isinstance(p, list) and len(p) == 2 for p in coords):
            raise ScenarioError("users", "expected a list of [x_km, y_km] pairs")
        users = make_users(coords) if coords else []
        source = {"explicit": True}
    elif "ppp" in doc:
        ppp = doc["ppp"]
        _warn_unknown(ppp, {"count", "intensity_per_km2", "seed"}, "ppp")
        pseed = ppp.get("seed", seed)
        if "count" in ppp:
            users = generate_users_ppp(int(_num(ppp, "count", "ppp")), R, pseed)
        else:
            users = generate_users_ppp(None, R, pseed,
                                       intensity=_num(ppp, "intensity_per_km2", "ppp"))
        source = {"ppp": dict(ppp)}
    else:
        raise ScenarioError("users", "missing required field ('users' or 'ppp')")

    profile = _profile_from_doc(_require(doc, "power_profile", ""), base_dir)
    qos = _require(doc, "qos", "")
    _warn_unknown(qos, {"rate_bps"}, "qos")
    opt = doc.get("optimizer", {})
    _warn_unknown(opt, {"r_min_km", "tolerance_delta", "reference_time"}, "optimizer")

    return Scenario(
        coverage_radius_km=R,
        link=link,
        users=users,
        power_profile=profile,
        qos_bps=_num(qos, "rate_bps", "qos"),
        seed=seed,
        circuit_power_w=_num(doc, "circuit_power_w", "", 1.5),
        reference_time=str(opt.get("reference_time", "12:00")),
        r_min_km=_num(opt, "r_min_km", "optimizer", 5.464),
        tolerance_delta=_num(opt, "tolerance_delta", "optimizer", 1e-4),
        user_source=source,
        metadata=dict(doc.get("metadata", {})),
    )


def _profile_from_doc(p: dict, base_dir: Path | None) -> PowerProfile:
    if not isinstance(p, dict):
        raise ScenarioError("power_profile", "expected an object")
    _warn_unknown(p, {"constant_w", "table", "file", "synthetic", "label"}, "power_profile")
    label = str(p.get("label", ""))
    if "constant_w" in p:
        return PowerProfile.constant(_num(p, "constant_w", "power_profile"), label or "constant")
    if "table" in p:
        rows = p["table"]
        try:
            mins = tuple(parse_time(r[0]) for r in rows)
            watts = tuple(float(r[1]) for r in rows)
        except (TypeError, ValueError, IndexError):
            raise ScenarioError("power_profile.table", "expected [[time, watts], ...]") from None
        return PowerProfile(mins, watts, label or "table")
    if "file" in p:
        path = Path(p["file"])
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        if not path.exists():
            raise ScenarioError("power_profile.file", f"no such file: {path}")
        return load_power_profile(path)
    if "synthetic" in p:
        return synthetic_day_profile(**p["synthetic"])
    raise ScenarioError("power_profile", "need one of constant_w, table, file, synthetic")


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    ln = s.link
    doc: dict[str, Any] = {
        "coverage": {
            "radius_km": s.coverage_radius_km,
            "altitude_km": ln.altitude_km,
            # rounded so that a reload reproduces the same radians
            "psi_min_deg": round(math.degrees(ln.psi_min_rad), 12),
        },
        "link": {
            "carrier_freq_hz": ln.carrier_freq_hz,
            "aperture_efficiency": ln.aperture_efficiency,
            "antenna_diameter_m": ln.antenna_diameter_m,
            "bandwidth_hz": ln.bandwidth_hz,
            "noise_figure_db": ln.noise_figure_db,
            "rician_k": ln.rician_k,
            "rician_omega": ln.rician_omega,
            "shadow_sigma_db": ln.shadow_sigma_db,
        },
        "users": [[u.position[0], u.position[1]] for u in s.users],
        "power_profile": {"table": s.power_profile.to_rows(), "label": s.power_profile.label},
        "qos": {"rate_bps": s.qos_bps},
        "seed": s.seed,
        "optimizer": {
            "r_min_km": s.r_min_km,
            "tolerance_delta": s.tolerance_delta,
            "reference_time": s.reference_time,
        },
        "circuit_power_w": s.circuit_power_w,
        "metadata": s.metadata,
    }
    return doc


def default_scenario_path():
    return resources.files("hapsnoma") / "data" / "default_scenario.json"


def load_scenario(path) -> Scenario:
    """Load a scenario file; the name 'default' selects the shipped default set."""
    if str(path) == DEFAULT_SCENARIO:
        ref = default_scenario_path()
        return scenario_from_dict(json.loads(ref.read_text()), None)
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("<root>", f"invalid JSON: {exc}") from None
    return scenario_from_dict(doc, p.parent)


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(dumps(scenario_to_dict(s)))


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
