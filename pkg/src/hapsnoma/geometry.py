"""Planar geometry for beam planning.

Disk-cover user grouping, nearest-center association, minimum enclosing
circles (Welzl and centroid heuristic) and the beam radius / half-power
beamwidth conversion. Coordinates are in km on the ground plane, with the
platform nadir at the origin.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Relative slack used by in-circle tests.
_EPS = 1e-12


@dataclass(frozen=True)
class GroundUser:
    id: int
    position: tuple[float, float]

    @property
    def xy(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError(f"circle radius must be >= 0, got {self.radius}")

    def contains(self, point, tol: float = 1e-9) -> bool:
        return math.dist(self.center, tuple(point)) <= self.radius + tol


@dataclass(frozen=True)
class SpotBeam:
    circle: Circle
    hpbw_deg: float
    peak_gain: float

    @property
    def center(self) -> tuple[float, float]:
        return self.circle.center

    @property
    def radius(self) -> float:
        return self.circle.radius


@dataclass
class Association:
    """User -> group map. Group indices are 0-based positions in the beam list."""

    assignment: dict[int, int]
    n_groups: int
    _members: list[list[int]] = field(init=False, repr=False)

    def __post_init__(self):
        members: list[list[int]] = [[] for _ in range(self.n_groups)]
        for uid in sorted(self.assignment):
            members[self.assignment[uid]].append(uid)
        self._members = members

    def members(self, m: int) -> list[int]:
        return list(self._members[m])

    def groups(self) -> list[list[int]]:
        return [list(g) for g in self._members]

    def matrix(self, user_ids: Sequence[int] | None = None) -> np.ndarray:
        """Boolean K x M indicator matrix, rows in `user_ids` order."""
        ids = sorted(self.assignment) if user_ids is None else list(user_ids)
        x = np.zeros((len(ids), self.n_groups), dtype=bool)
        for row, uid in enumerate(ids):
            x[row, self.assignment[uid]] = True
        return x


class InfeasibleAssociationError(ValueError):
    def __init__(self, user_id: int, distance: float):
        super().__init__(f"user {user_id} lies outside every beam footprint "
                         f"(nearest center at {distance:.6g} km)")
        self.user_id = user_id
        self.distance = distance


def as_points(points) -> np.ndarray:
    """Coerce GroundUsers, tuples or an (N, 2) array to a float (N, 2) array."""
    if isinstance(points, np.ndarray):
        arr = points.astype(float, copy=False)
    else:
        seq = list(points)
        arr = np.array([p.position if isinstance(p, GroundUser) else p for p in seq],
                       dtype=float)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (N, 2) coordinates, got shape {arr.shape}")
    return arr


def make_users(coords) -> list[GroundUser]:
    """Wrap raw coordinates as users with contiguous ids 1..K."""
    return [GroundUser(k + 1, (float(x), float(y)))
            for k, (x, y) in enumerate(as_points(coords))]


def _pairwise(pts: np.ndarray) -> np.ndarray:
    diff = pts[:, None, :] - pts[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def gdc_center_indices(points, r: float) -> list[int]:
    """Greedy disk cover; returns indices of the points chosen as centers.

    Rows are scanned in index order. For every still-uncovered point k, the
    candidate centers are its uncovered neighbors (itself included); the one
    covering the most uncovered points wins (lowest index on ties), and every
    uncovered point within `r` of it is removed.
    """
    pts = as_points(points)
    if len(pts) == 0:
        raise ValueError("gdc_cover needs at least one user")
    if not r > 0:
        raise ValueError(f"cover radius must be > 0, got {r}")
    adj = _pairwise(pts) <= r
    alive = np.ones(len(pts), dtype=bool)
    centers = []
    for k in range(len(pts)):
        if not alive[k]:
            continue
        nbrs = np.flatnonzero(adj[k] & alive)
        counts = (adj[:, nbrs] & alive[:, None]).sum(axis=0)
        best = int(nbrs[int(np.argmax(counts))])
        centers.append(best)
        alive[adj[best]] = False
    return centers


def gdc_cover(users, r: float) -> tuple[int, np.ndarray]:
    """Group users with disks of radius `r`; returns (M, centers as (M, 2))."""
    pts = as_points(users)
    idx = gdc_center_indices(pts, r)
    return len(idx), pts[idx].copy()


def associate(users: Sequence[GroundUser], beams: Sequence[SpotBeam | Circle]) -> Association:
    """Attach each user to its nearest beam center (lowest index on ties)."""
    if not beams:
        raise ValueError("associate needs at least one beam")
    circles = [b.circle if isinstance(b, SpotBeam) else b for b in beams]
    centers = np.array([c.center for c in circles], dtype=float)
    radii = np.array([c.radius for c in circles], dtype=float)
    assignment = {}
    for u in users:
        dist = np.hypot(*(centers - u.xy).T)
        m = int(np.argmin(dist))
        if dist[m] > radii[m] * (1 + _EPS) + _EPS:
            raise InfeasibleAssociationError(u.id, float(dist[m]))
        assignment[u.id] = m
    return Association(assignment, len(circles))


# -- minimum enclosing circle ------------------------------------------------

def _circle_two(a, b) -> Circle:
    cx, cy = (a[0] + b[0]) / 2, (a[1] + b[1]) / 2
    r = max(math.hypot(cx - a[0], cy - a[1]), math.hypot(cx - b[0], cy - b[1]))
    return Circle((cx, cy), r)


def _circumcircle(a, b, c) -> Circle | None:
    # Shift to the bounding-box center to limit cancellation.
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return None
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    x = ox + (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    y = oy + (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    r = max(math.hypot(x - p[0], y - p[1]) for p in (a, b, c))
    return Circle((x, y), r)


def _inside(c: Circle | None, p) -> bool:
    if c is None:
        return False
    return math.hypot(p[0] - c.center[0], p[1] - c.center[1]) <= c.radius * (1 + _EPS) + _EPS


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _mec_two_fixed(pts, p, q) -> Circle:
    circ = _circle_two(p, q)
    left = right = None
    for s in pts:
        if _inside(circ, s):
            continue
        cr = _cross(p, q, s)
        c = _circumcircle(p, q, s)
        if c is None:
            # s is collinear with p, q and outside their diameter circle.
            continue
        side = _cross(p, q, c.center)
        if cr > 0 and (left is None or side > _cross(p, q, left.center)):
            left = c
        elif cr < 0 and (right is None or side < _cross(p, q, right.center)):
            right = c
    if left is None and right is None:
        return circ
    if left is None:
        return right
    if right is None:
        return left
    return left if left.radius <= right.radius else right


def _mec_one_fixed(pts, p) -> Circle:
    c = Circle((p[0], p[1]), 0.0)
    for i, q in enumerate(pts):
        if not _inside(c, q):
            c = _circle_two(p, q) if c.radius == 0.0 else _mec_two_fixed(pts[: i + 1], p, q)
    return c


def welzl_mec(points, seed: int = 0) -> Circle:
    """Smallest enclosing circle (Welzl, iterative move-to-front form).

    The input is shuffled with a seeded generator; the circle itself does
    not depend on the order.
    """
    pts = [tuple(map(float, p)) for p in as_points(points)]
    if not pts:
        raise ValueError("welzl_mec needs at least one point")
    random.Random(seed).shuffle(pts)
    c: Circle | None = None
    for i, p in enumerate(pts):
        if c is None or not _inside(c, p):
            c = _mec_one_fixed(pts[: i + 1], p)
    return c


def heuristic_mec(points) -> Circle:
    """Centroid-centered circle reaching the farthest point."""
    pts = as_points(points)
    if len(pts) == 0:
        raise ValueError("heuristic_mec needs at least one point")
    center = pts.mean(axis=0)
    radius = float(np.max(np.hypot(*(pts - center).T)))
    return Circle((float(center[0]), float(center[1])), radius)


def brute_force_mec(points) -> Circle:
    """Exhaustive MEC over all 2-point and 3-point candidate circles.

    Verification oracle only; cost is O(n^4).
    """
    pts = [tuple(map(float, p)) for p in as_points(points)]
    if not pts:
        raise ValueError("brute_force_mec needs at least one point")
    if len(pts) > 15:
        raise ValueError("brute_force_mec is limited to 15 points")
    uniq = sorted(set(pts))
    if len(uniq) == 1:
        return Circle(uniq[0], 0.0)
    candidates = [_circle_two(a, b) for a, b in itertools.combinations(uniq, 2)]
    for a, b, c in itertools.combinations(uniq, 3):
        circ = _circumcircle(a, b, c)
        if circ is not None:
            candidates.append(circ)
    best = None
    for c in candidates:
        if all(math.hypot(p[0] - c.center[0], p[1] - c.center[1]) <= c.radius + 1e-9 for p in uniq):
            if best is None or c.radius < best.radius:
                best = c
    return best


# -- beam radius / beamwidth -------------------------------------------------

def hpbw_from_radius(r: float, H: float) -> float:
    """Half-power beamwidth in degrees for a footprint of radius r at altitude H."""
    if not (r > 0 and H > 0):
        raise ValueError(f"radius and altitude must be > 0 (r={r}, H={H})")
    return math.degrees(2.0 * math.atan(r / H))


def radius_from_hpbw(hpbw_deg: float, H: float) -> float:
    if not (hpbw_deg > 0 and H > 0):
        raise ValueError(f"beamwidth and altitude must be > 0 (hpbw={hpbw_deg}, H={H})")
    return H * math.tan(math.radians(hpbw_deg) / 2.0)


def enclosing_radius(center, points) -> float:
    pts = as_points(points)
    return float(np.max(np.hypot(*(pts - np.asarray(center, float)).T)))


def all_covered(points, centers: Iterable, r: float) -> bool:
    pts = as_points(points)
    ctr = as_points(list(centers))
    d = np.hypot(pts[:, None, 0] - ctr[None, :, 0], pts[:, None, 1] - ctr[None, :, 1])
    return bool(np.all(d.min(axis=1) <= r))
