"""Snapping reference mesh update for twin-screw cross sections.

A structured background mesh is built once between each screw surface
and the barrel (or the interface middle line inside the intermeshing
zone).  For any screw orientation the nodes are relocated purely
algebraically: every node interpolates between its screw surface point
and its outer point at a fixed radial fraction d_rel.  No linear solve,
no re-meshing, and the topology never changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    BarrelGeometry,
    GeometryError,
    ScrewParams,
    _wiped_radius,
    build_profile,
    cusp_points,
    meshing_phase,
    slice_rotation,
)


class MeshError(RuntimeError):
    """Raised when mesh construction or relocation produces an invalid mesh."""


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------

@dataclass
class SrmumAssembly:
    """Fixed-topology background mesh for one or two screws.

    Nodes are addressed structurally by (block, circumferential key,
    radial layer) through block_nodes; the twin interface ring is shared
    between the blocks.  Only screw_id_offset may change after build.
    """

    n_s: int
    n_r: int
    twin: bool
    params: ScrewParams | None
    grading: float
    phase: float
    centers: np.ndarray
    base_rel: np.ndarray
    r_b: float
    barrel: BarrelGeometry | None
    id_cp: int
    d_rel: np.ndarray
    block_nodes: np.ndarray
    n_nodes: int
    quads: np.ndarray
    tris: np.ndarray = field(default=None, repr=False)
    node_ids: np.ndarray = field(default=None, repr=False)
    node_d_rel: np.ndarray = field(default=None, repr=False)
    side: np.ndarray = field(default=None, repr=False)
    region: np.ndarray = field(default=None, repr=False)
    barrel_ring: np.ndarray = field(default=None, repr=False)
    screw_nodes: tuple = ()
    wall_nodes: np.ndarray = field(default=None, repr=False)
    interface_nodes: np.ndarray = field(default=None, repr=False)
    screw_id_offset: int = 0

    @property
    def n_blocks(self) -> int:
        return 2 if self.twin else 1

    @property
    def dtheta(self) -> float:
        return 2.0 * math.pi / self.n_s


@dataclass
class MiddleLine:
    """Interface polyline between the two screw mesh halves.

    points run from the lower cusp through the center to the upper cusp;
    keys holds the matching left-block circumferential keys.
    """

    orientation: float
    keys: np.ndarray
    points: np.ndarray
    y_rel_max: tuple
    delta_y_rel: tuple

    def point(self, key: int) -> np.ndarray:
        idx = np.flatnonzero(self.keys == key)
        if idx.size != 1:
            raise KeyError(f"key {key} not on the middle line")
        return self.points[idx[0]]


@dataclass
class Mesh:
    """Plain element mesh: coordinates plus one homogeneous cell block."""

    coords: np.ndarray
    cells: np.ndarray
    cell_type: str


@dataclass
class MeshQualityReport:
    min_jacobian: float
    max_jacobian: float
    n_nonpositive: int
    min_angle_deg: float
    max_aspect: float
    rows: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# build
# ---------------------------------------------------------------------------

def _layer_fractions(n_r: int, grading: float) -> np.ndarray:
    if grading <= 0.0:
        raise MeshError("grading ratio must be positive")
    j = np.arange(n_r + 1, dtype=float)
    if abs(grading - 1.0) < 1e-12:
        return j / n_r
    # layer widths grow by the ratio; first layer thinnest at the screw
    return (grading**j - 1.0) / (grading**n_r - 1.0)


def _cusp_id(theta_cp: float, n_s: int) -> int:
    raw = theta_cp / (2.0 * math.pi) * n_s
    id_cp = int(round(raw))
    if abs(raw - id_cp) >= 0.5:
        raise MeshError(f"cusp angle does not align with any ID ray for n_s={n_s}")
    return id_cp


def build_assembly(params: ScrewParams, n_s: int, n_r: int,
                   grading: float = 1.0, twin: bool = True,
                   phase: float | None = None) -> SrmumAssembly:
    """Build the background mesh topology for a screw pair or one screw.

    n_s must be divisible by 4 so the cusp rays and the mounting phase
    align with the ID grid; n_r >= 2.
    """
    if n_s % 4 != 0 or n_s % params.n_f != 0:
        raise MeshError("n_s must be divisible by 4 and by n_f")
    if n_r < 2:
        raise MeshError("n_r must be at least 2")
    profile = build_profile(params, n_s)
    base_rel = profile.points.copy()
    d_rel = _layer_fractions(n_r, grading)

    if twin:
        if phase is None:
            phase = meshing_phase(params.n_f)
        barrel = cusp_points(params)
        id_cp = _cusp_id(barrel.theta_cp, n_s)
        if not 0 < id_cp < n_s // 4:
            raise MeshError("cusp ID out of range; geometry too weakly intermeshed")
        if id_cp < 4:
            raise MeshError("n_s too coarse to resolve the intermeshing zone")
        centers = np.array([barrel.left_center, barrel.right_center])
    else:
        phase = 0.0
        barrel = None
        id_cp = 0
        centers = np.zeros((1, 2))

    asm = SrmumAssembly(
        n_s=n_s, n_r=n_r, twin=twin, params=params, grading=grading,
        phase=phase, centers=centers, base_rel=base_rel,
        r_b=params.r_b, barrel=barrel, id_cp=id_cp, d_rel=d_rel,
        block_nodes=None, n_nodes=0, quads=None)
    _build_topology(asm)
    _finalize(asm)
    return asm


def build_annulus(r_i: float, r_o: float, n_s: int, n_r: int,
                  grading: float = 1.0) -> SrmumAssembly:
    """Structured annulus mesh between two concentric circles.

    Shares the full snapping/solver machinery; the inner "screw" is a
    perfect circle, so the node set is rotation invariant.
    """
    if not 0.0 < r_i < r_o:
        raise MeshError("need 0 < r_i < r_o")
    if n_s % 4 != 0 or n_s < 8:
        raise MeshError("n_s must be a multiple of 4, at least 8")
    if n_r < 2:
        raise MeshError("n_r must be at least 2")
    ang = np.arange(n_s) * (2.0 * math.pi / n_s)
    base_rel = r_i * np.column_stack([np.cos(ang), np.sin(ang)])
    asm = SrmumAssembly(
        n_s=n_s, n_r=n_r, twin=False, params=None, grading=grading,
        phase=0.0, centers=np.zeros((1, 2)), base_rel=base_rel,
        r_b=r_o, barrel=None, id_cp=0, d_rel=_layer_fractions(n_r, grading),
        block_nodes=None, n_nodes=0, quads=None)
    _build_topology(asm)
    _finalize(asm)
    return asm


def _build_topology(asm: SrmumAssembly):
    """Number nodes, merge the twin interface ring, build quads."""
    n_s, n_r = asm.n_s, asm.n_r
    blocks = asm.n_blocks
    block_nodes = np.full((blocks, n_s, n_r + 1), -1, dtype=np.int64)
    block_nodes[0] = np.arange(n_s * (n_r + 1)).reshape(n_s, n_r + 1)
    nxt = n_s * (n_r + 1)

    if asm.twin:
        id_cp = asm.id_cp
        shared_right = np.zeros(n_s, dtype=bool)
        for ip in range(n_s // 2 - id_cp, n_s // 2 + id_cp + 1):
            k = (n_s // 2 - ip) % n_s
            block_nodes[1, ip, n_r] = block_nodes[0, k, n_r]
            shared_right[ip] = True
        for ip in range(n_s):
            for j in range(n_r + 1):
                if block_nodes[1, ip, j] < 0:
                    block_nodes[1, ip, j] = nxt
                    nxt += 1
    asm.block_nodes = block_nodes
    asm.n_nodes = nxt

    quads = []
    for b in range(blocks):
        for i in range(n_s):
            i2 = (i + 1) % n_s
            for j in range(n_r):
                # radial edge first so the cycle runs counterclockwise
                quads.append((block_nodes[b, i, j], block_nodes[b, i, j + 1],
                              block_nodes[b, i2, j + 1], block_nodes[b, i2, j]))
    asm.quads = np.asarray(quads, dtype=np.int64)

    # per-key region tags: 0 barrel-backed, 1 intermeshing upper, 2 lower
    region = np.zeros((blocks, n_s), dtype=np.int8)
    if asm.twin:
        id_cp = asm.id_cp
        region[0, 0:id_cp + 1] = 1
        region[0, n_s - id_cp:] = 2
        region[1, n_s // 2 - id_cp:n_s // 2 + 1] = 1
        region[1, n_s // 2 + 1:n_s // 2 + id_cp + 1] = 2
    asm.region = region

    # fixed outer circle points per block, one per key ray
    ang = np.arange(n_s) * asm.dtheta
    ring = np.stack([np.cos(ang), np.sin(ang)], axis=1) * asm.r_b
    asm.barrel_ring = asm.centers[:, None, :] + ring[None, :, :]

    # node attribute arrays
    node_d_rel = np.empty(asm.n_nodes)
    node_ids = np.empty(asm.n_nodes, dtype=np.int64)
    side = np.empty(asm.n_nodes, dtype=np.int8)
    for b in range(blocks):
        node_d_rel[block_nodes[b]] = asm.d_rel[None, :]
        node_ids[block_nodes[b]] = np.arange(n_s)[:, None]
        side[block_nodes[b]] = b
    if asm.twin:
        iface = block_nodes[0, np.r_[0:asm.id_cp + 1,
                                     n_s - asm.id_cp:n_s], n_r]
        side[iface] = 2
        asm.interface_nodes = np.sort(iface)
    else:
        asm.interface_nodes = np.empty(0, dtype=np.int64)
    asm.node_d_rel = node_d_rel
    asm.node_ids = node_ids
    asm.side = side

    asm.screw_nodes = tuple(block_nodes[b, :, 0].copy() for b in range(blocks))
    wall = []
    for b in range(blocks):
        keys = np.flatnonzero(region[b] == 0)
        wall.append(block_nodes[b, keys, n_r])
    if asm.twin:
        # the two cusp nodes sit on the barrel as well
        wall.append(block_nodes[0, [asm.id_cp, n_s - asm.id_cp], n_r])
    asm.wall_nodes = np.unique(np.concatenate(wall))


def _finalize(asm: SrmumAssembly):
    """Reference snap: validity check, diagonal choice, interface IDs."""
    coords = snap(asm, 0.0)
    asm.tris = _split_quads(coords, asm.quads)
    if asm.twin:
        # interface node IDs follow the nearer barrel center, ties left
        iface = asm.interface_nodes
        pts = coords[iface]
        right_closer = (np.hypot(*(pts - asm.centers[1]).T)
                        < np.hypot(*(pts - asm.centers[0]).T))
        left_key = asm.node_ids[iface]
        asm.node_ids[iface] = np.where(
            right_closer, (asm.n_s // 2 - left_key) % asm.n_s, left_key)


def _split_quads(coords: np.ndarray, quads: np.ndarray) -> np.ndarray:
    """Two CCW triangles per quad, along the diagonal with larger min angle."""
    p = coords[quads]                                  # (M, 4, 2)

    def min_angle(tri):
        a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
        ang = []
        for v, w1, w2 in ((a, b, c), (b, c, a), (c, a, b)):
            e1, e2 = w1 - v, w2 - v
            cross = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
            dot = np.einsum("ij,ij->i", e1, e2)
            ang.append(np.arctan2(cross, dot))
        return np.minimum.reduce(ang)

    t02a, t02b = p[:, [0, 1, 2]], p[:, [0, 2, 3]]
    t13a, t13b = p[:, [0, 1, 3]], p[:, [1, 2, 3]]
    q02 = np.minimum(min_angle(t02a), min_angle(t02b))
    q13 = np.minimum(min_angle(t13a), min_angle(t13b))
    use02 = q02 >= q13
    tris = np.empty((quads.shape[0], 2, 3), dtype=np.int64)
    tris[use02, 0] = quads[use02][:, [0, 1, 2]]
    tris[use02, 1] = quads[use02][:, [0, 2, 3]]
    tris[~use02, 0] = quads[~use02][:, [0, 1, 3]]
    tris[~use02, 1] = quads[~use02][:, [1, 2, 3]]
    return tris.reshape(-1, 3)


# ---------------------------------------------------------------------------
# snapping
# ---------------------------------------------------------------------------

def screw_id_shift(accumulated_rotation: float, n_s: int) -> int:
    """Integer surface-index shift for a given accumulated rotation.

    Rounds to the nearest whole ray (ties toward the lower index), so
    surface nodes oscillate at most half a ray spacing off their rays.
    """
    steps = accumulated_rotation / (2.0 * math.pi / n_s)
    return -int(math.floor(0.5 - steps)) % n_s


def _surface_rings(asm: SrmumAssembly, orientation: float) -> list:
    """Snapped screw-surface positions per block, keyed by ray index."""
    rings = []
    ks = np.arange(asm.n_s)
    for b in range(asm.n_blocks):
        total = orientation + (asm.phase if b == 1 else 0.0)
        s = screw_id_shift(total, asm.n_s)
        pts = asm.base_rel[(ks - s) % asm.n_s]
        c, sn = math.cos(total), math.sin(total)
        rot = np.column_stack([c * pts[:, 0] - sn * pts[:, 1],
                               sn * pts[:, 0] + c * pts[:, 1]])
        rings.append(asm.centers[b] + rot)
    return rings


def _upper_average(asm: SrmumAssembly, surf_l, surf_r) -> np.ndarray:
    """Mean of paired surface points for the upper intermeshing keys."""
    ks = np.arange(asm.id_cp + 1)
    pair = (asm.n_s // 2 - ks) % asm.n_s
    return 0.5 * (surf_l[ks] + surf_r[pair])


def _screw_in_left_barrel(surf_l, surf_r) -> bool:
    # deeper penetration across x=0 decides which fictitious wall the
    # middle line follows
    return surf_l[:, 0].max() + surf_r[:, 0].min() > 0.0


def _alg_y_rel_max(avg_y_near_cusp: float, cp_rel: float, r_b: float,
                   theta_cp: float, y_cp: float) -> float:
    if avg_y_near_cusp < y_cp:
        return 0.0
    barrel_y = r_b * math.sin(cp_rel * theta_cp)
    y_max = 0.0
    blended = avg_y_near_cusp
    while blended >= y_cp:
        y_max += 0.05
        if y_max > 1.0:
            raise MeshError("no admissible y_rel_max below 1; inconsistent geometry")
        blended = y_max * barrel_y + (1.0 - y_max) * avg_y_near_cusp
    return y_max


def _alg_delta_y_rel(avg_y, id_cp: int, r_b: float, theta_cp: float,
                     y_cp: float, y_max: float) -> float:
    if y_max == 0.0:
        return 0.0
    dy = y_max
    idx = id_cp - 3
    while True:
        if idx < 1:
            raise MeshError("relative-height decay search ran past the center")
        dy = dy / (id_cp - 1 - idx)
        cp_rel = idx / id_cp
        y1 = dy * r_b * math.sin(cp_rel * theta_cp) + (1.0 - dy) * avg_y[idx]
        y2 = avg_y[idx - 1]
        if y1 > y2 and y2 < y_cp:
            return dy
        idx -= 1


def y_rel_max(asm: SrmumAssembly, orientation: float) -> float:
    """Largest admissible relative height near the upper cusp."""
    _require_twin(asm)
    surf_l, surf_r = _surface_rings(asm, orientation)
    avg = _upper_average(asm, surf_l, surf_r)
    cp_rel = (asm.id_cp - 1) / asm.id_cp
    return _alg_y_rel_max(avg[asm.id_cp - 1, 1], cp_rel, asm.r_b,
                          asm.barrel.theta_cp, asm.barrel.y_cp)


def delta_y_rel(asm: SrmumAssembly, orientation: float,
                y_max: float | None = None) -> float:
    """Per-key decay of the relative height toward the center."""
    _require_twin(asm)
    if y_max is None:
        y_max = y_rel_max(asm, orientation)
    surf_l, surf_r = _surface_rings(asm, orientation)
    avg = _upper_average(asm, surf_l, surf_r)
    return _alg_delta_y_rel(avg[:, 1], asm.id_cp, asm.r_b,
                            asm.barrel.theta_cp, asm.barrel.y_cp, y_max)


def _half_midline(avg: np.ndarray, left_barrel: bool, id_cp: int, r_b: float,
                  theta_cp: float, y_cp: float, c_l: float,
                  y_max: float, dy: float) -> np.ndarray:
    """Middle-line points for one half, keys 0..ID_CP in its own frame."""
    pts = np.empty((id_cp + 1, 2))
    for idx in range(id_cp + 1):
        cp_rel = idx / id_cp
        barrel_y = r_b * math.sin(cp_rel * theta_cp)
        avg_y = avg[idx, 1]
        if barrel_y < avg_y:
            if y_max < (id_cp - idx - 1) * dy:
                y_rel = (1.0 - cp_rel) ** 2 * cp_rel
            else:
                y_rel = y_max - (id_cp - idx - 1) * dy
        else:
            y_rel = cp_rel
        y = y_rel * barrel_y + (1.0 - y_rel) * avg_y

        # the fictitious bore wall of the penetrated barrel caps the
        # middle line on the penetrating side; a cp_rel-weighted clamp
        # pulls it back wherever the plain surface average overshoots
        x_tmp = avg[idx, 0]
        root = math.sqrt(max(r_b * r_b - y * y, 0.0))
        if left_barrel:
            x_circle = root - c_l / 2.0
            if x_circle < x_tmp:
                x_tmp = cp_rel * x_circle + (1.0 - cp_rel) * x_tmp
        else:
            x_circle = c_l / 2.0 - root
            if x_circle > x_tmp:
                x_tmp = cp_rel * x_circle + (1.0 - cp_rel) * x_tmp
        pts[idx] = (x_tmp, y)
    pts[id_cp] = (0.0, y_cp)
    return pts


def middle_line(asm: SrmumAssembly, orientation: float) -> MiddleLine:
    """Interface polyline between the mesh halves at one orientation.

    The upper half runs the height/decay/coordinate recursions directly;
    the lower half runs the identical recursions on the point-reflected
    configuration and reflects the result back.
    """
    _require_twin(asm)
    n_s, id_cp = asm.n_s, asm.id_cp
    bar = asm.barrel
    surf_l, surf_r = _surface_rings(asm, orientation)

    # point reflection through the origin swaps the screws; keys shift
    # by half a revolution
    roll = np.arange(n_s)
    refl_l = -surf_r[(roll + n_s // 2) % n_s]
    refl_r = -surf_l[(roll + n_s // 2) % n_s]

    halves = []
    y_maxes = []
    dys = []
    for sl, sr in ((surf_l, surf_r), (refl_l, refl_r)):
        avg = _upper_average(asm, sl, sr)
        cp_rel = (id_cp - 1) / id_cp
        y_max = _alg_y_rel_max(avg[id_cp - 1, 1], cp_rel, asm.r_b,
                               bar.theta_cp, bar.y_cp)
        dy = _alg_delta_y_rel(avg[:, 1], id_cp, asm.r_b, bar.theta_cp,
                              bar.y_cp, y_max)
        pts = _half_midline(avg, _screw_in_left_barrel(sl, sr), id_cp,
                            asm.r_b, bar.theta_cp, bar.y_cp, bar.c_l,
                            y_max, dy)
        halves.append(pts)
        y_maxes.append(y_max)
        dys.append(dy)

    upper, lower_reflected = halves
    # lower half back to physical coordinates, ordered lower cusp -> center
    lower = -lower_reflected[:0:-1]
    points = np.vstack([lower, upper])
    keys = np.concatenate([(n_s - np.arange(id_cp, 0, -1)) % n_s,
                           np.arange(id_cp + 1)])
    ml = MiddleLine(orientation=orientation, keys=keys, points=points,
                    y_rel_max=(y_maxes[0], y_maxes[1]),
                    delta_y_rel=(dys[0], dys[1]))
    _check_midline_clear(asm, orientation, ml)
    return ml


def _check_midline_clear(asm: SrmumAssembly, orientation: float,
                         ml: MiddleLine):
    """Fail loudly if the interface polyline touches either screw."""
    probes = np.vstack([ml.points,
                        0.5 * (ml.points[:-1] + ml.points[1:])])
    for b in range(2):
        total = orientation + (asm.phase if b == 1 else 0.0)
        rel = probes - asm.centers[b]
        r = np.hypot(rel[:, 0], rel[:, 1])
        phi = np.arctan2(rel[:, 1], rel[:, 0]) - total
        if np.any(r <= _wiped_radius(phi, asm.params)):
            raise MeshError(
                f"middle line intersects screw {b} at orientation {orientation!r}")


def _require_twin(asm: SrmumAssembly):
    if not asm.twin:
        raise MeshError("operation requires a twin-screw assembly")


def _sine(a, b):
    """Sine of the counterclockwise angle from a to b (normalized cross)."""
    cr = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    na = np.hypot(a[..., 0], a[..., 1])
    nb = np.hypot(b[..., 0], b[..., 1])
    return cr / np.maximum(na * nb, 1e-300)


def _channel_clear(asm: SrmumAssembly, pts: np.ndarray,
                   orientation: float) -> np.ndarray:
    """Signed distance budget of points inside the free channel.

    The minimum of the two screw-surface clearances and the distance to
    the nearer bore wall; negative means the point left the fluid.
    """
    clear = None
    bores = []
    for b in range(2):
        total = orientation + (asm.phase if b == 1 else 0.0)
        rel = pts - asm.centers[b]
        rr = np.hypot(rel[..., 0], rel[..., 1])
        phi = np.arctan2(rel[..., 1], rel[..., 0]) - total
        c = rr - _wiped_radius(phi, asm.params)
        clear = c if clear is None else np.minimum(clear, c)
        bores.append(asm.r_b - rr)
    return np.minimum(clear, np.maximum(bores[0], bores[1]))


def _chord_windows(asm: SrmumAssembly, fl: np.ndarray, fr: np.ndarray,
                   orientation: float):
    """Usable span of each foot-to-foot chord, walking in from both feet.

    Points past the first wall crossing are unreachable by a straight
    element column, so the window is the overlap of the run adjacent to
    the left foot and the run adjacent to the right foot.  Returns the
    span bounds, the largest clearance seen inside the window, and a
    feasibility flag, all per chord.
    """
    m = 49
    lam = np.linspace(0.0, 1.0, m)
    pts = fl[:, None, :] + lam[None, :, None] * (fr - fl)[:, None, :]
    clear = _channel_clear(asm, pts, orientation)
    ok = clear > 1e-12 * asm.r_b
    bad = ~ok
    rows = np.arange(fl.shape[0])
    any_ok = ok.any(axis=1)
    first = np.argmax(ok, axis=1)
    csum = np.cumsum(bad, axis=1)
    run_l = ok & (csum == csum[rows, first][:, None])
    tail = np.cumsum(bad[:, ::-1], axis=1)[:, ::-1]
    last = m - 1 - np.argmax(ok[:, ::-1], axis=1)
    run_r = ok & (tail == tail[rows, last][:, None])
    win = run_l & run_r
    feasible = any_ok & win.any(axis=1)
    lo = lam[np.argmax(win, axis=1)]
    hi = lam[m - 1 - np.argmax(win[:, ::-1], axis=1)]
    width = np.max(np.where(win, clear, -np.inf), axis=1)
    return lo, hi, width, feasible


def _interface_points(asm: SrmumAssembly, orientation: float,
                      rings: list) -> np.ndarray:
    """Interface node positions shared by the two mesh blocks.

    Every interface node is meshed against one column foot on each
    screw surface, so a placement is usable exactly when the node sees
    both of its feet and the neighboring interface nodes at strictly
    convex corners, and when the straight columns down to the feet stay
    inside the channel.  All of those conditions are normalized cross
    products against fixed surface edges or shared polyline edges, and
    the polyline edges couple neighbors only.  Candidates therefore
    live on the foot-to-foot chord, plus small transverse offsets where
    the chord direction itself leaves a surface corner (the chords skew
    when one flank overtakes the other mid-plunge), and a maximin
    dynamic program over the chain picks the placement whose worst
    corner sine is largest.  A few alternating local sweeps polish the
    discrete choice.  The end nodes are pinned to the barrel cusps.
    """
    id_cp = asm.id_cp
    n_s = asm.n_s
    bar = asm.barrel
    keys = np.concatenate([(n_s - np.arange(id_cp, 0, -1)) % n_s,
                           np.arange(id_cp + 1)])
    pair = (n_s // 2 - keys) % n_s
    fl = rings[0][keys]
    fr = rings[1][pair]
    n = fl.shape[0]
    cusps = np.array([[0.0, -bar.y_cp], [0.0, bar.y_cp]])

    v = fr - fl
    nrm = np.stack([-v[:, 1], v[:, 0]], axis=1)
    sl = np.diff(fl, axis=0)
    sr = np.diff(fr, axis=0)

    lo, hi, width, feasible = _chord_windows(asm, fl[1:-1], fr[1:-1],
                                             orientation)
    if not feasible.all():
        raise MeshError(
            f"no open interface chord at orientation {orientation!r}")
    span = hi - lo
    # wall standoff for interior nodes; the pinch at the cusps leaves
    # no room there, so the demand tapers off toward the chain ends
    ramp = np.clip(np.minimum(np.arange(1, n - 1),
                              np.arange(n - 2, 0, -1)) / 6.0, 0.15, 1.0)
    floor = 0.08 * width * ramp

    # transverse offsets where the chord direction itself closes a
    # surface corner; elsewhere the chord alone is enough
    stat = np.minimum(
        np.minimum(_sine(v[1:-1], sl[:-1]), _sine(v[1:-1], sl[1:])),
        np.minimum(_sine(v[1:-1], sr[:-1]), _sine(v[1:-1], sr[1:])))
    cap = 0.2
    # end-clustered levels: the best placements often hug one foot
    betas = 0.5 - 0.5 * np.cos(np.pi * np.linspace(0.0, 1.0, 13))
    gam_chord = np.array([0.0])
    gam_near = np.array([-0.05, 0.0, 0.05])
    gam_wide = np.array([-0.15, -0.08, -0.03, 0.0, 0.03, 0.08, 0.15])

    cands = [cusps[0:1]]
    raw = []
    segs = []
    seg_t = np.linspace(0.0, 1.0, 11)[1:-1]
    for k in range(1, n - 1):
        j = k - 1
        if stat[j] > 0.3:
            gam = gam_chord
            b_lo = lo[j] + 0.04 * span[j]
            b_hi = hi[j] - 0.04 * span[j]
        else:
            # off-chord candidates may be valid where the chord is not,
            # so open the span back up and let the gates decide
            gam = gam_near if stat[j] > 0.15 else gam_wide
            b_lo = max(lo[j] - 0.15 * span[j], 0.01)
            b_hi = min(hi[j] + 0.15 * span[j], 0.99)
        bb = (b_lo + betas * (b_hi - b_lo))[:, None]
        gg = gam[None, :]
        p = (fl[k][None, None, :] + bb[..., None] * v[k][None, None, :]
             + gg[..., None] * nrm[k][None, None, :]).reshape(-1, 2)
        up_l = p - fl[k]
        up_r = p - fr[k]
        m1 = _sine(up_l, sl[k])
        m2 = _sine(up_l, sl[k - 1])
        m3 = _sine(sr[k], up_r)
        m4 = _sine(sr[k - 1], up_r)
        u = np.minimum(np.minimum(m1, m2), np.minimum(m3, m4))
        bnorm = (bb + 0.0 * gg).reshape(-1)
        gnorm = (0.0 * bb + gg).reshape(-1)
        pen = 1e-3 * ((bnorm - 0.5) ** 2 + (gnorm / 0.2) ** 2)
        seg = np.concatenate([
            fl[k] + seg_t[None, :, None] * (p - fl[k])[:, None, :],
            p[:, None, :] + seg_t[None, :, None] * (fr[k] - p)[:, None, :],
        ], axis=1)
        cands.append(p)
        raw.append(np.minimum(u, cap) - pen)
        segs.append(seg)
    cands.append(cusps[1:2])

    # one clearance pass gates every candidate column at once
    ns = seg_t.size * 2
    seg_clear = _channel_clear(
        asm, np.concatenate([s.reshape(-1, 2) for s in segs]), orientation)
    node_clear = _channel_clear(
        asm, np.concatenate(cands[1:-1]), orientation)
    unaries = [np.array([cap])]
    s_off = 0
    n_off = 0
    for j, u in enumerate(raw):
        c = u.shape[0]
        inside = (seg_clear[s_off:s_off + c * ns].reshape(c, ns)
                  > -1e-9 * asm.r_b).all(axis=1)
        good = inside & (node_clear[n_off:n_off + c] > floor[j])
        unaries.append(np.where(good, u, -np.inf))
        s_off += c * ns
        n_off += c
    unaries.append(np.array([cap]))

    up_l = [c - f for c, f in zip(cands, fl)]
    up_r = [c - f for c, f in zip(cands, fr)]

    value = unaries[0]
    ptr = []
    for k in range(n - 1):
        e = cands[k + 1][None, :, :] - cands[k][:, None, :]
        elen = np.hypot(e[..., 0], e[..., 1])
        m = np.minimum(
            np.minimum(_sine(up_l[k][:, None, :], e),
                       _sine(up_l[k + 1][None, :, :], e)),
            np.minimum(_sine(e, up_r[k][:, None, :]),
                       _sine(e, up_r[k + 1][None, :, :])))
        m = np.where(elen > 1e-7 * asm.r_b, m, -1.0)
        val = np.minimum(np.minimum(value[:, None], m),
                         unaries[k + 1][None, :])
        ptr.append(np.argmax(val, axis=0))
        value = val[ptr[-1], np.arange(val.shape[1])]

    # a thin best chain is still the best starting point; the polish
    # sweeps recover the remaining margin, and a chain that is already
    # near the cap has nothing left to gain from them
    pick = np.empty(n, dtype=np.int64)
    pick[-1] = 0
    for k in range(n - 2, -1, -1):
        pick[k] = ptr[k][pick[k + 1]]
    out = np.array([cands[k][pick[k]] for k in range(n)])

    if value[0] < 0.15:
        _polish_interface(asm, out, fl, fr, v, nrm, sl, sr, floor,
                          orientation, cap)
        if _chain_margins(out, fl, fr, sl, sr).min() < 0.05:
            # fine meshes space their columns closer than the coarse
            # candidate grid resolves, so rebuild the weak stretches on
            # a dense grid before the final polish
            _dense_rescue(asm, out, orientation, fl, fr, v, nrm, sl, sr,
                          lo, hi, span, floor)
            _polish_interface(asm, out, fl, fr, v, nrm, sl, sr, floor,
                              orientation, cap)
    return out, float(_chain_margins(out, fl, fr, sl, sr).min())


def _chain_margins(out, fl, fr, sl, sr) -> np.ndarray:
    """Worst corner sine per interior node, neighbor edges included."""
    up_l = out - fl
    up_r = out - fr
    node = np.minimum(
        np.minimum(_sine(up_l[1:-1], sl[1:]), _sine(up_l[1:-1], sl[:-1])),
        np.minimum(_sine(sr[1:], up_r[1:-1]), _sine(sr[:-1], up_r[1:-1])))
    e = np.diff(out, axis=0)
    edge = np.minimum(
        np.minimum(_sine(up_l[:-1], e), _sine(up_l[1:], e)),
        np.minimum(_sine(e, up_r[:-1]), _sine(e, up_r[1:])))
    return np.minimum(node, np.minimum(edge[:-1], edge[1:]))


def _dense_rescue(asm, out, orientation, fl, fr, v, nrm, sl, sr,
                  lo, hi, span, floor):
    """Re-solve weak chain stretches on a dense candidate grid in place.

    Each stretch is pinned at the surviving nodes just outside it, so
    the dynamic program only has to thread the tangle between them.
    """
    n = out.shape[0]
    margins = _chain_margins(out, fl, fr, sl, sr)
    weak = np.where(margins < 0.1)[0] + 1
    if weak.size == 0:
        return
    spans = []
    a = b = int(weak[0])
    for w in weak[1:]:
        if w - b <= 12:
            b = int(w)
        else:
            spans.append((a, b))
            a = b = int(w)
    spans.append((a, b))

    betas = 0.5 - 0.5 * np.cos(np.pi * np.linspace(0.0, 1.0, 33))
    gams = np.linspace(-0.2, 0.2, 21)
    seg_t = np.linspace(0.0, 1.0, 11)[1:-1]
    ns = seg_t.size * 2
    for a, b in spans:
        a = max(a - 6, 1)
        b = min(b + 6, n - 2)
        ks = range(a, b + 1)
        states = []
        uns = []
        pts = []
        for k in ks:
            j = k - 1
            b_lo = max(lo[j] - 0.15 * span[j], 0.01)
            b_hi = min(hi[j] + 0.15 * span[j], 0.99)
            bb = (b_lo + betas * (b_hi - b_lo))[:, None, None]
            gg = gams[None, :, None]
            p = (fl[k] + bb * v[k] + gg * nrm[k]).reshape(-1, 2)
            up_l = p - fl[k]
            up_r = p - fr[k]
            u = np.minimum(
                np.minimum(_sine(up_l, sl[k]), _sine(up_l, sl[k - 1])),
                np.minimum(_sine(sr[k], up_r), _sine(sr[k - 1], up_r)))
            seg = np.concatenate([
                fl[k] + seg_t[None, :, None] * (p - fl[k])[:, None, :],
                p[:, None, :] + seg_t[None, :, None]
                * (fr[k] - p)[:, None, :],
            ], axis=1)
            states.append(p)
            uns.append(u)
            pts.append(np.concatenate([p[:, None, :], seg], axis=1))
        clear = _channel_clear(
            asm, np.concatenate([q.reshape(-1, 2) for q in pts]),
            orientation).reshape(len(states), -1, ns + 1)
        for i, k in enumerate(ks):
            good = ((clear[i, :, 1:] > -1e-9 * asm.r_b).all(axis=1)
                    & (clear[i, :, 0] > floor[k - 1]))
            uns[i] = np.where(good, uns[i], -np.inf)

        chain = [out[a - 1:a]] + states + [out[b + 1:b + 2]]
        us = [np.array([np.inf])] + uns + [np.array([np.inf])]
        value = us[0]
        ptr = []
        for i in range(len(chain) - 1):
            k = a - 1 + i
            e = chain[i + 1][None, :, :] - chain[i][:, None, :]
            elen = np.hypot(e[..., 0], e[..., 1])
            m = np.minimum(
                np.minimum(_sine((chain[i] - fl[k])[:, None, :], e),
                           _sine((chain[i + 1] - fl[k + 1])[None, :, :], e)),
                np.minimum(_sine(e, (chain[i] - fr[k])[:, None, :]),
                           _sine(e, (chain[i + 1] - fr[k + 1])[None, :, :])))
            m = np.where(elen > 1e-7 * asm.r_b, m, -1.0)
            val = np.minimum(np.minimum(value[:, None], m),
                             us[i + 1][None, :])
            ptr.append(np.argmax(val, axis=0))
            value = val[ptr[-1], np.arange(val.shape[1])]

        old = _chain_margins(out[a - 1:b + 2], fl[a - 1:b + 2],
                             fr[a - 1:b + 2], sl[a - 1:b + 1],
                             sr[a - 1:b + 1]).min()
        if value[0] <= old:
            continue
        pick = 0
        for i in range(len(ptr) - 1, -1, -1):
            pick = ptr[i][pick]
            if 1 <= i <= len(states):
                out[a - 1 + i] = chain[i][pick]


def _polish_interface(asm, out, fl, fr, v, nrm, sl, sr, floor,
                      orientation, cap):
    """Alternating local sweeps lifting the worst corner sines in place.

    Nodes move one parity class at a time so every accepted move is
    scored against its true neighbors and the worst margin in the chain
    never decreases.
    """
    n = out.shape[0]
    seg_t = np.linspace(0.0, 1.0, 9)[1:-1]

    def local(idx, p):
        # idx: (K,) interior node indices; p: (K, C, 2) candidates
        up_l = p - fl[idx, None, :]
        up_r = p - fr[idx, None, :]
        m = np.minimum(
            np.minimum(_sine(up_l, sl[idx, None, :]),
                       _sine(up_l, sl[idx - 1][:, None, :])),
            np.minimum(_sine(sr[idx, None, :], up_r),
                       _sine(sr[idx - 1][:, None, :], up_r)))
        for other, fwd in ((idx - 1, False), (idx + 1, True)):
            nb = out[other][:, None, :]
            e = nb - p if fwd else p - nb
            m = np.minimum(m, _sine(up_l, e))
            m = np.minimum(m, _sine(nb - fl[other][:, None, :], e))
            m = np.minimum(m, _sine(e, up_r))
            m = np.minimum(m, _sine(e, nb - fr[other][:, None, :]))
            m = np.where(np.hypot(e[..., 0], e[..., 1]) > 1e-7 * asm.r_b,
                         m, -1.0)
        seg = np.concatenate([
            fl[idx, None, None, :] + seg_t[None, None, :, None]
            * (p - fl[idx, None, :])[:, :, None, :],
            p[:, :, None, :] + seg_t[None, None, :, None]
            * (fr[idx, None, :] - p)[:, :, None, :],
            p[:, :, None, :],
        ], axis=2)
        clear = _channel_clear(asm, seg, orientation)
        inside = (clear[..., :-1] > -1e-9 * asm.r_b).all(axis=2)
        node_ok = clear[..., -1] > floor[idx - 1][:, None]
        return np.where(inside & node_ok, np.minimum(m, cap), -np.inf)

    step = 0.06
    for _ in range(7):
        for par in (1, 0):
            idx = np.arange(1, n - 1)[par::2]
            if idx.size == 0:
                continue
            base = out[idx]
            dg = 0.5 * (v[idx] + nrm[idx])
            dh = 0.5 * (v[idx] - nrm[idx])
            moves = np.stack([
                np.zeros_like(base),
                step * v[idx], -step * v[idx],
                step * nrm[idx], -step * nrm[idx],
                step * dg, -step * dg,
                step * dh, -step * dh,
            ], axis=1)
            cand = base[:, None, :] + moves
            score = local(idx, cand)
            best = np.argmax(score, axis=1)
            out[idx] = cand[np.arange(idx.size), best]
        step *= 0.6


def snap(asm: SrmumAssembly, orientation: float,
         check: bool = True) -> np.ndarray:
    """Node coordinates for one screw orientation.

    Pure function of (assembly, orientation): every node interpolates
    between its snapped screw-surface point and its outer point at its
    fixed radial fraction.
    """
    rings = _surface_rings(asm, orientation)
    iface = None
    if asm.twin:
        iface, iface_margin = _interface_points(asm, orientation, rings)
        keys = np.concatenate([(asm.n_s - np.arange(asm.id_cp, 0, -1))
                               % asm.n_s,
                               np.arange(asm.id_cp + 1)])

    coords = np.empty((asm.n_nodes, 2))
    for b in range(asm.n_blocks):
        outer = asm.barrel_ring[b].copy()
        if iface is not None:
            if b == 0:
                outer[keys] = iface
            else:
                pair = (asm.n_s // 2 - keys) % asm.n_s
                outer[pair] = iface
        surf = rings[b]
        block = (surf[:, None, :]
                 + asm.d_rel[None, :, None] * (outer - surf)[:, None, :])
        block[:, 0, :] = surf
        block[:, -1, :] = outer
        coords[asm.block_nodes[b]] = block

    if iface is not None and iface_margin < 0.03:
        # straight columns ran out of room against a channel pinch;
        # bowing the nearby interior layers recovers the lost angle
        _relieve_pinches(asm, coords, orientation)

    if check:
        dets = _quad_corner_dets(coords, asm.quads)
        bad = np.flatnonzero(~np.all(dets > 0.0, axis=1))
        if bad.size:
            raise MeshError(
                f"non-positive Jacobian in element {int(bad[0])} "
                f"at orientation {orientation!r}")
    return coords


def _corner_sines(coords: np.ndarray, quads: np.ndarray) -> np.ndarray:
    p = coords[quads]
    out = np.empty((quads.shape[0], 4))
    for c, ((a1, b1), (a2, b2)) in enumerate(_QUAD_CORNER_EDGES):
        e1 = p[:, a1] - p[:, b1]
        e2 = p[:, a2] - p[:, b2]
        out[:, c] = _sine(e1, e2)
    return out


def _relieve_pinches(asm: SrmumAssembly, coords: np.ndarray,
                     orientation: float) -> None:
    """Open pinched corners along the interface band by curving columns.

    The interface columns of both blocks form a band across the
    intermeshing channel.  Wherever that band holds a quad whose corner
    sine is tiny or negative, the columns near it are bowed: the feet
    and the two cusps stay fixed so the boundary remains conforming,
    every other band node may move.  Alternating four-color sweeps score
    each candidate against frozen neighbors and accept only strict
    improvements of the mover's worst incident corner, so a zone's
    worst corner never decreases.
    """
    id_cp, n_s = asm.id_cp, asm.n_s
    n_l = asm.d_rel.size
    keys = np.concatenate([(n_s - np.arange(id_cp, 0, -1)) % n_s,
                           np.arange(id_cp + 1)])
    pair = (n_s // 2 - keys) % n_s
    n_chain = 2 * id_cp + 1

    # chain position of every band node; -1 elsewhere
    chain_of = np.full(asm.n_nodes, -1, dtype=np.int64)
    chain_of[asm.block_nodes[1][pair].T] = np.arange(n_chain)
    chain_of[asm.block_nodes[0][keys].T] = np.arange(n_chain)

    band_q = np.flatnonzero((chain_of[asm.quads] >= 0).any(axis=1))
    sines = _corner_sines(coords, asm.quads[band_q]).min(axis=1)
    weak = band_q[sines < 0.03]
    if weak.size == 0:
        return
    pos = np.unique(chain_of[asm.quads[weak]])
    pos = pos[pos >= 0]

    # merge weak positions into zones, pad each by a few columns
    breaks = np.flatnonzero(np.diff(pos) > 4)
    zones = np.split(pos, breaks + 1)
    cusp_nodes = (asm.block_nodes[0][keys[0], n_l - 1],
                  asm.block_nodes[0][keys[-1], n_l - 1])
    dirs = np.array([[1.0, 0], [-1, 0], [0, 1], [0, -1],
                     [0.7071, 0.7071], [-0.7071, 0.7071],
                     [0.7071, -0.7071], [-0.7071, -0.7071], [0, 0]])
    for zone in zones:
        rng = np.arange(max(zone[0] - 6, 0), min(zone[-1] + 7, n_chain))
        zone_nodes = np.concatenate([
            asm.block_nodes[0][keys[rng]].ravel(),
            asm.block_nodes[1][pair[rng]].ravel()])
        inzone = np.zeros(asm.n_nodes, dtype=bool)
        inzone[zone_nodes] = True
        quads = asm.quads[inzone[asm.quads].any(axis=1)]

        # free set: interior layers plus interface nodes, minus cusps
        free = np.concatenate([
            asm.block_nodes[0][keys[rng], 1:].ravel(),
            asm.block_nodes[1][pair[rng], 1:].ravel()])
        parity = np.concatenate([
            (rng[:, None] + np.arange(1, n_l)[None, :]).ravel() % 2
            + 2 * ((rng[:, None] + 0 * np.arange(1, n_l)[None, :]).ravel()
                   % 2)] * 2)
        below = np.concatenate([
            asm.block_nodes[0][keys[rng], :-1].ravel(),
            asm.block_nodes[1][pair[rng], :-1].ravel()])
        keep = (free != cusp_nodes[0]) & (free != cusp_nodes[1])
        free, parity, below = free[keep], parity[keep], below[keep]
        uniq, first = np.unique(free, return_index=True)
        free, parity, below = free[first], parity[first], below[first]

        incid = [np.flatnonzero((quads == nd).any(axis=1)) for nd in free]
        step = 0.5
        for _ in range(7):
            for col in range(4):
                idx = np.flatnonzero(parity == col)
                if idx.size == 0:
                    continue
                nds = free[idx]
                h = np.linalg.norm(coords[nds] - coords[below[idx]],
                                   axis=1)
                cand = (coords[nds][:, None, :]
                        + step * h[:, None, None] * dirs[None, :, :])
                clr = _channel_clear(asm, cand, orientation)
                for pos_i, (ii, nd) in enumerate(zip(idx, nds)):
                    qs = quads[incid[ii]]
                    base = coords[nd].copy()
                    best = (-np.inf, base)
                    for c in range(dirs.shape[0]):
                        if clr[pos_i, c] <= 0:
                            continue
                        coords[nd] = cand[pos_i, c]
                        s = _corner_sines(coords, qs).min()
                        if s > best[0]:
                            best = (s, cand[pos_i, c].copy())
                    coords[nd] = best[1]
            step *= 0.55


# ---------------------------------------------------------------------------
# quality
# ---------------------------------------------------------------------------

# (a, b) pairs meaning edge p_a - p_b; each corner lists its (d/dxi, d/deta)
_QUAD_CORNER_EDGES = (
    ((1, 0), (3, 0)),
    ((1, 0), (2, 1)),
    ((2, 3), (2, 1)),
    ((2, 3), (3, 0)),
)

# corner rows of (d/dxi, d/deta, d/dzeta) edge pairs for a standard hex
_HEX_CORNER_EDGES = (
    ((1, 0), (3, 0), (4, 0)),
    ((1, 0), (2, 1), (5, 1)),
    ((2, 3), (2, 1), (6, 2)),
    ((2, 3), (3, 0), (7, 3)),
    ((5, 4), (7, 4), (4, 0)),
    ((5, 4), (6, 5), (5, 1)),
    ((6, 7), (6, 5), (6, 2)),
    ((6, 7), (7, 4), (7, 3)),
)


def _quad_corner_dets(coords: np.ndarray, quads: np.ndarray) -> np.ndarray:
    p = coords[quads]                                  # (M, 4, 2)
    dets = np.empty((quads.shape[0], 4))
    for c, ((a1, b1), (a2, b2)) in enumerate(_QUAD_CORNER_EDGES):
        e1 = p[:, a1] - p[:, b1]
        e2 = p[:, a2] - p[:, b2]
        dets[:, c] = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    return dets


def _hex_corner_dets(coords: np.ndarray, hexes: np.ndarray) -> np.ndarray:
    p = coords[hexes]                                  # (M, 8, 3)
    dets = np.empty((hexes.shape[0], 8))
    for c, ((a1, b1), (a2, b2), (a3, b3)) in enumerate(_HEX_CORNER_EDGES):
        e1 = p[:, a1] - p[:, b1]
        e2 = p[:, a2] - p[:, b2]
        e3 = p[:, a3] - p[:, b3]
        dets[:, c] = np.einsum("ij,ij->i", e1, np.cross(e2, e3))
    return dets


def _corner_angles(p: np.ndarray, loops: tuple) -> np.ndarray:
    """Interior angles (radians) at each listed (prev, at, nxt) corner."""
    out = []
    for prev, at, nxt in loops:
        e1 = p[:, prev] - p[:, at]
        e2 = p[:, nxt] - p[:, at]
        if p.shape[2] == 2:
            cross = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        else:
            cross = np.linalg.norm(np.cross(e1, e2), axis=1)
        dot = np.einsum("ij,ij->i", e1, e2)
        out.append(np.arctan2(cross, dot))
    return np.stack(out, axis=1)


_QUAD_ANGLE_LOOPS = ((3, 0, 1), (0, 1, 2), (1, 2, 3), (2, 3, 0))
_HEX_FACES = ((0, 1, 2, 3), (4, 5, 6, 7), (0, 1, 5, 4),
              (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7))


def _edge_lengths(p: np.ndarray, pairs) -> np.ndarray:
    out = [np.linalg.norm(p[:, a] - p[:, b], axis=1) for a, b in pairs]
    return np.stack(out, axis=1)


def validate(mesh: Mesh) -> MeshQualityReport:
    """Corner Jacobians, interior angles and edge aspect of every cell."""
    coords, cells = mesh.coords, mesh.cells
    if mesh.cell_type == "quad":
        dets = _quad_corner_dets(coords, cells)
        angles = _corner_angles(coords[cells], _QUAD_ANGLE_LOOPS)
        edges = _edge_lengths(coords[cells], ((0, 1), (1, 2), (2, 3), (3, 0)))
    elif mesh.cell_type == "hex":
        dets = _hex_corner_dets(coords, cells)
        p = coords[cells]
        angs = []
        for f in _HEX_FACES:
            loops = tuple((f[(i - 1) % 4], f[i], f[(i + 1) % 4])
                          for i in range(4))
            angs.append(_corner_angles(p, loops))
        angles = np.concatenate(angs, axis=1)
        edges = _edge_lengths(p, ((0, 1), (1, 2), (2, 3), (3, 0),
                                  (4, 5), (5, 6), (6, 7), (7, 4),
                                  (0, 4), (1, 5), (2, 6), (3, 7)))
    elif mesh.cell_type == "triangle":
        p = coords[cells]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        dets = det[:, None]
        angles = _corner_angles(p, ((2, 0, 1), (0, 1, 2), (1, 2, 0)))
        edges = _edge_lengths(p, ((0, 1), (1, 2), (2, 0)))
    elif mesh.cell_type == "tet":
        p = coords[cells]
        det = np.einsum("ij,ij->i", p[:, 1] - p[:, 0],
                        np.cross(p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]))
        dets = det[:, None]
        angles = np.full((cells.shape[0], 1), math.pi / 3)
        edges = _edge_lengths(p, ((0, 1), (1, 2), (2, 0),
                                  (0, 3), (1, 3), (2, 3)))
    else:
        raise MeshError(f"unknown cell type {mesh.cell_type!r}")

    return MeshQualityReport(
        min_jacobian=float(dets.min()),
        max_jacobian=float(dets.max()),
        n_nonpositive=int(np.count_nonzero(dets.min(axis=1) <= 0.0)),
        min_angle_deg=float(np.degrees(angles.min())),
        max_aspect=float((edges.max(axis=1) / edges.min(axis=1)).max()),
    )


# ---------------------------------------------------------------------------
# extrusion
# ---------------------------------------------------------------------------

def extrude(asm: SrmumAssembly, n_a: int, length: float,
            p_l: float | None = None, direction: str | None = None,
            orientation: float = 0.0, split: str = "hex") -> Mesh:
    """Stack snapped cross sections into a 3D screw-element mesh.

    Slice k sits at z_k = k*length/n_a, rotated per the conveying helix;
    consecutive slices are joined by hexahedra (optionally split to
    tetrahedra).
    """
    if n_a < 1:
        raise MeshError("n_a must be at least 1")
    if split not in ("hex", "tet"):
        raise MeshError("split must be 'hex' or 'tet'")
    if p_l is None:
        p_l = asm.params.pitch if asm.params else None
    if p_l is None:
        raise MeshError("pitch length required for extrusion")
    if direction is None:
        direction = asm.params.direction if asm.params else "forward"

    n2 = asm.n_nodes
    z = np.linspace(0.0, length, n_a + 1)
    coords3 = np.empty(((n_a + 1) * n2, 3))
    for k, zk in enumerate(z):
        twist = slice_rotation(zk, p_l, direction)
        try:
            sl = snap(asm, orientation + twist)
        except MeshError as exc:
            raise MeshError(f"slice {k}: {exc}") from exc
        coords3[k * n2:(k + 1) * n2, :2] = sl
        coords3[k * n2:(k + 1) * n2, 2] = zk

    nq = asm.quads.shape[0]
    hexes = np.empty((n_a * nq, 8), dtype=np.int64)
    for k in range(n_a):
        hexes[k * nq:(k + 1) * nq, :4] = asm.quads + k * n2
        hexes[k * nq:(k + 1) * nq, 4:] = asm.quads + (k + 1) * n2

    dets = _hex_corner_dets(coords3, hexes)
    bad = np.flatnonzero(~np.all(dets > 0.0, axis=1))
    if bad.size:
        k = int(bad[0]) // nq
        raise MeshError(
            f"twisted element between slices {k} and {k + 1}; "
            f"reduce per-slice rotation")
    if split == "hex":
        return Mesh(coords=coords3, cells=hexes, cell_type="hex")
    return Mesh(coords=coords3, cells=_hexes_to_tets(coords3, hexes),
                cell_type="tet")


def _hexes_to_tets(coords: np.ndarray, hexes: np.ndarray) -> np.ndarray:
    """Conforming 6-tet split of each hex via two prisms.

    Every quad face is split along the diagonal anchored at the face's
    smallest global node index; the rule is face-local, so neighboring
    cells always agree on shared faces.
    """
    # split the top/bottom quads along the diagonal through the smaller
    # global index of the two diagonal pairs; face-local rule, so the
    # stacked neighbor picks the same one
    use02 = np.minimum(hexes[:, 0], hexes[:, 2]) < np.minimum(hexes[:, 1],
                                                              hexes[:, 3])
    prisms = np.empty((2 * hexes.shape[0], 6), dtype=np.int64)
    h02, h13 = hexes[use02], hexes[~use02]
    n02 = h02.shape[0]
    prisms[:n02] = h02[:, [0, 1, 2, 4, 5, 6]]
    prisms[n02:2 * n02] = h02[:, [0, 2, 3, 4, 6, 7]]
    m13 = h13.shape[0]
    prisms[2 * n02:2 * n02 + m13] = h13[:, [0, 1, 3, 4, 5, 7]]
    prisms[2 * n02 + m13:] = h13[:, [1, 2, 3, 5, 6, 7]]

    tets = np.empty((3 * prisms.shape[0], 4), dtype=np.int64)
    quad_faces = ((0, 1, 4, 3), (1, 2, 5, 4), (2, 0, 3, 5))
    for n, pr in enumerate(prisms):
        m = int(np.argmin(pr))
        mu, m_on_top = (m - 3, True) if m >= 3 else (m, False)
        far = quad_faces[(mu + 1) % 3]
        a, b, bt, at = far
        # diagonal of the far quad by the min-index rule
        if min(pr[a], pr[bt]) < min(pr[b], pr[at]):
            tri1, tri2 = (a, b, bt), (a, bt, at)
        else:
            tri1, tri2 = (a, b, at), (b, bt, at)
        far_tri = (0, 1, 2) if m_on_top else (3, 4, 5)
        for t, tri in enumerate((far_tri, tri1, tri2)):
            tet = (pr[m], pr[tri[0]], pr[tri[1]], pr[tri[2]])
            p = coords[list(tet)]
            vol = np.dot(p[1] - p[0], np.cross(p[2] - p[0], p[3] - p[0]))
            if vol < 0.0:
                tet = (tet[0], tet[1], tet[3], tet[2])
            tets[3 * n + t] = tet
    return tets
