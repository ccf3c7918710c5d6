"""Self-wiping twin-screw cross-section geometry.

The closed screw contour is built from circular arcs only: a tip arc on
the outer radius, a root arc on the inner radius and flank arcs of
radius C_l joining them.  A pair of such contours, mounted a centerline
distance C_l apart and co-rotating, wipes itself with a constant
screw-screw gap delta_s and clears the barrel bore by delta_b.

All lengths are SI meters, all angles radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


class GeometryError(ValueError):
    """Raised for inconsistent or non-intermeshing screw parameters."""


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScrewParams:
    """Screw pair parameters.

    r_s        outer screw radius
    c_l        centerline (axis to axis) distance
    delta_s    screw-screw clearance
    delta_b    screw-barrel clearance
    n_f        number of flights
    pitch      axial pitch length, only needed for extrusion
    direction  conveying sense, "forward" or "backward"
    """

    r_s: float
    c_l: float
    delta_s: float = 0.0
    delta_b: float = 0.0
    n_f: int = 2
    pitch: float | None = None
    direction: str = "forward"

    def __post_init__(self):
        if self.r_s <= 0.0 or self.c_l <= 0.0:
            raise GeometryError("r_s and c_l must be positive")
        if self.r_s <= self.c_l / 2.0:
            raise GeometryError("screws do not intermesh: r_s <= c_l/2")
        if self.c_l <= self.r_s:
            raise GeometryError("screw axes closer than one screw radius: c_l <= r_s")
        if self.delta_s < 0.0 or self.delta_b < 0.0:
            raise GeometryError("clearances must be non-negative")
        if self.n_f < 1:
            raise GeometryError("n_f must be at least 1")
        if self.pitch is not None and self.pitch <= 0.0:
            raise GeometryError("pitch must be positive")
        if self.direction not in ("forward", "backward"):
            raise GeometryError("direction must be 'forward' or 'backward'")
        # the wiped contour only exists while the tip arc has positive extent
        psi = math.acos(self.c_l / (2.0 * self._r_wipe))
        if math.pi / self.n_f - 2.0 * psi <= 0.0:
            raise GeometryError("tip arc extent non-positive for these parameters")

    @property
    def _r_wipe(self) -> float:
        # radius of the zero-clearance construction; eroding that contour by
        # delta_s/2 puts the physical tip exactly on r_s
        return self.r_s + self.delta_s / 2.0

    @property
    def r_b(self) -> float:
        """Barrel bore radius."""
        return self.r_s + self.delta_b

    @property
    def r_root(self) -> float:
        """Physical root radius of the clearance-adapted contour."""
        return self.c_l - self.r_s - self.delta_s


@dataclass
class ScrewProfile:
    """Closed convex screw contour sampled at equal center angles.

    points are absolute coordinates, ordered counterclockwise; vertex k
    of a freshly built profile lies on the ray at angle k*2*pi/n from
    the center, orientation tracks accumulated rigid rotation.
    """

    center: np.ndarray
    points: np.ndarray
    orientation: float = 0.0
    params: ScrewParams | None = field(default=None, repr=False)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(2)
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def radii(self) -> np.ndarray:
        return np.hypot(*(self.points - self.center).T)


@dataclass(frozen=True)
class BarrelGeometry:
    """Two overlapping bores of radius r_b with centers on the x axis.

    The cusps are the two intersection points of the bore circles,
    located at (0, +-y_cp); theta_cp is the cusp angle seen from either
    bore center.
    """

    c_l: float
    r_b: float
    theta_cp: float
    y_cp: float

    @property
    def left_center(self) -> np.ndarray:
        return np.array([-self.c_l / 2.0, 0.0])

    @property
    def right_center(self) -> np.ndarray:
        return np.array([self.c_l / 2.0, 0.0])


# ---------------------------------------------------------------------------
# profile construction
# ---------------------------------------------------------------------------

def _wiped_radius(phi, params: ScrewParams) -> np.ndarray:
    """Radius of the clearance-adapted contour at material angles phi.

    The zero-clearance contour is the intersection of the tip disk, the
    2*n_f flank disks (radius c_l, centers on the tip circle) and root
    caps; shrinking every disk by delta_s/2 erodes the contour without
    changing any arc center.
    """
    p = params
    rv = p._r_wipe
    half = p.delta_s / 2.0
    psi = math.acos(p.c_l / (2.0 * rv))
    alpha = math.pi / p.n_f - 2.0 * psi

    phi = np.asarray(phi, dtype=float)
    period = 2.0 * math.pi / p.n_f
    # fold into one flight, symmetric about the tip center line
    phi_f = np.abs((phi + period / 2.0) % period - period / 2.0)

    rho_tip = rv - half
    rho_root = p.c_l - rv - half
    r_flank = p.c_l - half

    # flank arc centers, material angles, all flights and both shoulders
    tips = np.arange(p.n_f) * period
    cen = np.concatenate([tips + alpha / 2.0 + 2.0 * psi - math.pi,
                          tips - alpha / 2.0 - 2.0 * psi + math.pi])
    dot = rv * np.cos(phi[..., None] - cen)          # e(phi) . center
    rho_fl = dot + np.sqrt(dot * dot + r_flank * r_flank - rv * rv)
    rho = np.minimum(rho_tip, rho_fl.min(axis=-1))
    in_root = phi_f >= alpha / 2.0 + 2.0 * psi
    rho = np.where(in_root, np.minimum(rho, rho_root), rho)
    return rho


def build_profile(params: ScrewParams, n_s: int,
                  center=(0.0, 0.0)) -> ScrewProfile:
    """Sample the self-wiping contour at n_s equal center angles.

    Vertex k sits on the ray at angle k*2*pi/n_s.  n_s must be a
    multiple of n_f so the sampled polygon keeps the flight symmetry.
    """
    if n_s < 8 * params.n_f:
        raise GeometryError("n_s too small to resolve the contour")
    if n_s % params.n_f != 0:
        raise GeometryError("n_s must be divisible by n_f")
    ang = np.arange(n_s) * (2.0 * math.pi / n_s)
    rho = _wiped_radius(ang, params)
    pts = np.asarray(center, dtype=float) + rho[:, None] * np.column_stack(
        [np.cos(ang), np.sin(ang)])
    return ScrewProfile(center=np.asarray(center, dtype=float), points=pts,
                        orientation=0.0, params=params)


def rotate_profile(profile: ScrewProfile, dtheta: float) -> ScrewProfile:
    """Rigidly rotate the contour about its own center."""
    c, s = math.cos(dtheta), math.sin(dtheta)
    rel = profile.points - profile.center
    rot = np.column_stack([c * rel[:, 0] - s * rel[:, 1],
                           s * rel[:, 0] + c * rel[:, 1]])
    return replace(profile, points=profile.center + rot,
                   orientation=profile.orientation + dtheta)


def cusp_points(params: ScrewParams) -> BarrelGeometry:
    """Intersect the two barrel bores."""
    r_b = params.r_b
    if params.c_l >= 2.0 * r_b:
        raise GeometryError("barrel bores do not intersect: c_l >= 2*r_b")
    theta_cp = math.acos(params.c_l / (2.0 * r_b))
    y_cp = math.sqrt(r_b * r_b - (params.c_l / 2.0) ** 2)
    return BarrelGeometry(c_l=params.c_l, r_b=r_b, theta_cp=theta_cp, y_cp=y_cp)


def slice_rotation(z: float, pitch: float, direction: str = "forward",
                   screw_sense: int = 1) -> float:
    """Cross-section rotation angle at axial position z.

    A forward-conveying element twists opposite to the screw rotation
    sense, a backward-conveying one with it; one pitch length is one
    full turn.
    """
    if pitch <= 0.0:
        raise GeometryError("pitch must be positive")
    if direction not in ("forward", "backward"):
        raise GeometryError("direction must be 'forward' or 'backward'")
    sign = -1.0 if direction == "forward" else 1.0
    return sign * screw_sense * 2.0 * math.pi * z / pitch


# ---------------------------------------------------------------------------
# clearance measurement
# ---------------------------------------------------------------------------

def _barrel_wall(barrel: BarrelGeometry, n: int = 1024) -> list[np.ndarray]:
    """Polylines of the two bore wall arcs bounding the figure-eight."""
    walls = []
    # left bore keeps the part not inside the right bore and vice versa
    for cx, a0, a1 in ((-barrel.c_l / 2.0, barrel.theta_cp,
                        2.0 * math.pi - barrel.theta_cp),
                       (barrel.c_l / 2.0, barrel.theta_cp - math.pi,
                        math.pi - barrel.theta_cp)):
        ang = np.linspace(a0, a1, n)
        walls.append(np.column_stack([cx + barrel.r_b * np.cos(ang),
                                      barrel.r_b * np.sin(ang)]))
    return walls


def _point_segment_distance(points: np.ndarray, seg_a: np.ndarray,
                            seg_b: np.ndarray) -> float:
    """Min distance from any point to any segment, fully vectorized."""
    d = seg_b - seg_a                                   # (m, 2)
    len2 = np.einsum("ij,ij->i", d, d)
    len2 = np.where(len2 > 0.0, len2, 1.0)
    rel = points[:, None, :] - seg_a[None, :, :]        # (n, m, 2)
    t = np.einsum("nmj,mj->nm", rel, d) / len2
    t = np.clip(t, 0.0, 1.0)
    foot = rel - t[:, :, None] * d[None, :, :]
    return float(np.sqrt(np.einsum("nmj,nmj->nm", foot, foot).min()))


def _closed_segments(poly: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return poly, np.roll(poly, -1, axis=0)


def _inside_convex(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Strict inclusion of points in a convex CCW polygon."""
    a, b = _closed_segments(poly)
    e = b - a
    rel = points[:, None, :] - a[None, :, :]
    cross = e[None, :, 0] * rel[:, :, 1] - e[None, :, 1] * rel[:, :, 0]
    return np.all(cross > 0.0, axis=1)


def _points_inside_profile(points: np.ndarray, prof: ScrewProfile) -> np.ndarray:
    if prof.params is not None:
        # analytic radius test, O(n) instead of O(n*m)
        rel = points - prof.center
        r = np.hypot(rel[:, 0], rel[:, 1])
        phi = np.arctan2(rel[:, 1], rel[:, 0]) - prof.orientation
        return r < _wiped_radius(phi, prof.params)
    return _inside_convex(points, prof.points)


def overlaps(a, b) -> bool:
    """True if the two contours interpenetrate."""
    if isinstance(a, BarrelGeometry) or isinstance(b, BarrelGeometry):
        barrel = a if isinstance(a, BarrelGeometry) else b
        prof = b if isinstance(a, BarrelGeometry) else a
        for cx in (-barrel.c_l / 2.0, barrel.c_l / 2.0):
            rad = np.hypot(prof.points[:, 0] - cx, prof.points[:, 1])
            inside_own = np.hypot(prof.center[0] - cx, prof.center[1]) < barrel.r_b
            if inside_own and np.any(rad > barrel.r_b):
                return True
        return False
    return bool(np.any(_points_inside_profile(a.points, b))
                or np.any(_points_inside_profile(b.points, a)))


def _disk_lower_bound(center, r_max):
    """Distance from points to anything inside disk(center, r_max)."""
    c = np.asarray(center, dtype=float)

    def lb(points):
        return np.hypot(*(points - c).T) - r_max

    return lb


def _ring_lower_bound(center, radius):
    """Distance from points to an arc of circle(center, radius)."""
    c = np.asarray(center, dtype=float)

    def lb(points):
        return np.abs(np.hypot(*(points - c).T) - radius)

    return lb


def _pair_min_distance(pa, closed_a, lb_a, pb, closed_b, lb_b) -> float:
    """Exact min distance between two polylines with candidate pruning.

    A coarse point-point pass yields an upper bound d0; any vertex whose
    distance to the other polyline provably exceeds d0 (per the lb_*
    bound functions) and any segment whose bounding ball lies beyond d0
    cannot host the minimizer and is dropped before the exact
    point-segment pass.
    """
    stride_a = max(1, pa.shape[0] // 512)
    stride_b = max(1, pb.shape[0] // 512)
    sub_a, sub_b = pa[::stride_a], pb[::stride_b]
    diff = sub_a[:, None, :] - sub_b[None, :, :]
    d0 = float(np.sqrt(np.einsum("nmj,nmj->nm", diff, diff).min()))

    def prune_segments(poly, closed, other_kept_pts):
        s0, s1 = (_closed_segments(poly) if closed else (poly[:-1], poly[1:]))
        if other_kept_pts.shape[0] == 0:
            return s0[:0], s1[:0]
        mid = 0.5 * (s0 + s1)
        half = 0.5 * np.hypot(*(s1 - s0).T)
        c = other_kept_pts.mean(axis=0)
        r_max = np.hypot(*(other_kept_pts - c).T).max()
        lb = np.hypot(*(mid - c).T) - half - r_max
        keep = lb <= d0
        return s0[keep], s1[keep]

    ka = pa[lb_b(pa) <= d0]
    kb = pb[lb_a(pb) <= d0]
    best = d0
    if ka.shape[0]:
        sb0, sb1 = prune_segments(pb, closed_b, ka)
        if sb0.shape[0]:
            best = min(best, _point_segment_distance(ka, sb0, sb1))
    if kb.shape[0]:
        sa0, sa1 = prune_segments(pa, closed_a, kb)
        if sa0.shape[0]:
            best = min(best, _point_segment_distance(kb, sa0, sa1))
    return best


def min_clearance(a, b) -> float:
    """Minimum distance between two contours, 0.0 when they overlap.

    Accepts ScrewProfile and BarrelGeometry in either slot.  Accuracy is
    limited by the chord error of the discretized arcs.
    """
    if overlaps(a, b):
        return 0.0
    best = math.inf
    for pa, ca, la in _contour_polylines(a):
        for pb, cb, lb in _contour_polylines(b):
            best = min(best, _pair_min_distance(pa, ca, la, pb, cb, lb))
    return best


def _contour_polylines(obj) -> list[tuple]:
    """(points, closed, lower-bound fn) triples describing a contour."""
    if isinstance(obj, ScrewProfile):
        r_max = obj.radii().max()
        return [(obj.points, True, _disk_lower_bound(obj.center, r_max))]
    if isinstance(obj, BarrelGeometry):
        walls = _barrel_wall(obj)
        return [(walls[0], False, _ring_lower_bound(obj.left_center, obj.r_b)),
                (walls[1], False, _ring_lower_bound(obj.right_center, obj.r_b))]
    raise TypeError(f"unsupported contour type {type(obj)!r}")


def twin_profiles(params: ScrewParams, n_s: int,
                  phase: float | None = None) -> tuple[ScrewProfile, ScrewProfile]:
    """Left and right screw contours in meshing position.

    The right screw is mounted rotated by the meshing phase so its
    roots face the tips of the left screw; for a double-flighted screw
    that phase is pi/2.
    """
    if phase is None:
        phase = meshing_phase(params.n_f)
    barrel = cusp_points(params)
    left = build_profile(params, n_s, center=barrel.left_center)
    right = build_profile(params, n_s, center=barrel.right_center)
    right = rotate_profile(right, phase)
    return left, right


def meshing_phase(n_f: int) -> float:
    """Relative mounting angle of the two screws."""
    period = 2.0 * math.pi / n_f
    return (math.pi * (n_f - 1) / n_f) % period
