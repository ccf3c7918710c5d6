"""Snapshot export, line sampling, flux integration and reporting.

Snapshots are written as legacy ASCII VTK unstructured grids so that
golden-file tests can compare bytes and any standard reader can load
the output.  Line sampling interpolates the P1 solution within the
containing triangle, locating points by a neighbor walk with a brute
force fallback.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from screwsim.srmum import _split_quads

_CELL_NODES = {5: 3, 9: 4, 12: 8}


class SnapshotError(ValueError):
    """Raised for inconsistent snapshot data or malformed VTK input."""


@dataclass
class FieldSnapshot:
    """Mesh plus named nodal fields at one time and screw orientation.

    fields may be given as a dict or as (name, array) pairs; duplicate
    names are rejected.  Scalar fields have shape (n,), vector fields
    (n, 2) or (n, 3).  cell_type is the VTK code: 5 triangles, 9 quads,
    12 hexahedra.
    """

    coords: np.ndarray
    cells: np.ndarray
    cell_type: int
    fields: object = field(default_factory=dict)
    time: float = 0.0
    orientation: float = 0.0

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        self.cells = np.asarray(self.cells, dtype=np.int64)
        if not isinstance(self.fields, dict):
            pairs = list(self.fields)
            names = [name for name, _ in pairs]
            if len(set(names)) != len(names):
                dup = next(n for n in names if names.count(n) > 1)
                raise SnapshotError(f"duplicate field name {dup!r}")
            self.fields = dict(pairs)
        self.fields = {k: np.asarray(v, dtype=float)
                       for k, v in self.fields.items()}
        n = self.coords.shape[0]
        if self.coords.ndim != 2 or self.coords.shape[1] not in (2, 3):
            raise SnapshotError("coords must be (n, 2) or (n, 3)")
        if self.cell_type not in _CELL_NODES:
            raise SnapshotError(f"unsupported cell type {self.cell_type}")
        if self.cells.ndim != 2 or \
                self.cells.shape[1] != _CELL_NODES[self.cell_type]:
            raise SnapshotError("cell array does not match the cell type")
        for name, arr in self.fields.items():
            if arr.shape[0] != n or arr.ndim > 2 or \
                    (arr.ndim == 2 and arr.shape[1] not in (2, 3)):
                raise SnapshotError(
                    f"field {name!r} does not match the node count")

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def export_vtk(snapshot: FieldSnapshot, path) -> None:
    """Write the snapshot as a legacy ASCII VTK unstructured grid.

    Numbers carry 17 significant digits so the round trip is exact;
    the title line records time and orientation for re-import.
    """
    snap = snapshot
    buf = io.StringIO()
    buf.write("# vtk DataFile Version 3.0\n")
    buf.write(f"screwsim t={_fmt(snap.time)} "
              f"orientation={_fmt(snap.orientation)}\n")
    buf.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
    n = snap.n_nodes
    buf.write(f"POINTS {n} double\n")
    xyz = np.zeros((n, 3))
    xyz[:, :snap.coords.shape[1]] = snap.coords
    for row in xyz:
        buf.write(f"{_fmt(row[0])} {_fmt(row[1])} {_fmt(row[2])}\n")
    m, k = snap.cells.shape
    buf.write(f"CELLS {m} {m * (k + 1)}\n")
    for row in snap.cells:
        buf.write(f"{k} " + " ".join(str(int(i)) for i in row) + "\n")
    buf.write(f"CELL_TYPES {m}\n")
    for _ in range(m):
        buf.write(f"{snap.cell_type}\n")
    if snap.fields:
        buf.write(f"POINT_DATA {n}\n")
        for name, arr in snap.fields.items():
            if arr.ndim == 1:
                buf.write(f"SCALARS {name} double 1\n")
                buf.write("LOOKUP_TABLE default\n")
                for v in arr:
                    buf.write(f"{_fmt(v)}\n")
            else:
                buf.write(f"VECTORS {name} double\n")
                vec = np.zeros((n, 3))
                vec[:, :arr.shape[1]] = arr
                for row in vec:
                    buf.write(f"{_fmt(row[0])} {_fmt(row[1])} "
                              f"{_fmt(row[2])}\n")
    with open(path, "w", newline="\n") as fh:
        fh.write(buf.getvalue())


def read_vtk(path) -> FieldSnapshot:
    """Read a legacy ASCII VTK unstructured grid written by export_vtk."""
    with open(path) as fh:
        text = fh.read()
    lines = text.splitlines()
    if len(lines) < 5 or not lines[0].startswith("# vtk DataFile"):
        raise SnapshotError(f"{path}: not a legacy VTK file")
    time = orient = 0.0
    for tokenpair in lines[1].split():
        if tokenpair.startswith("t="):
            time = float(tokenpair[2:])
        elif tokenpair.startswith("orientation="):
            orient = float(tokenpair[12:])
    tokens = " ".join(lines[2:]).split()
    pos = 0

    def take(count):
        nonlocal pos
        out = tokens[pos:pos + count]
        if len(out) != count:
            raise SnapshotError(f"{path}: truncated VTK data")
        pos += count
        return out

    def expect(word):
        got = take(1)[0]
        if got.upper() != word:
            raise SnapshotError(f"{path}: expected {word}, got {got!r}")

    expect("ASCII")
    expect("DATASET")
    expect("UNSTRUCTURED_GRID")
    expect("POINTS")
    n = int(take(1)[0])
    take(1)  # dtype
    coords = np.array(take(3 * n), dtype=float).reshape(n, 3)
    expect("CELLS")
    m = int(take(1)[0])
    total = int(take(1)[0])
    raw = np.array(take(total), dtype=np.int64)
    k = int(raw[0])
    cells = raw.reshape(m, k + 1)[:, 1:]
    expect("CELL_TYPES")
    if int(take(1)[0]) != m:
        raise SnapshotError(f"{path}: CELL_TYPES count mismatch")
    ctypes = np.array(take(m), dtype=np.int64)
    if np.unique(ctypes).size != 1:
        raise SnapshotError(f"{path}: mixed cell types unsupported")
    cell_type = int(ctypes[0])
    fields = {}
    if pos < len(tokens):
        expect("POINT_DATA")
        if int(take(1)[0]) != n:
            raise SnapshotError(f"{path}: POINT_DATA count mismatch")
        while pos < len(tokens):
            kind = take(1)[0].upper()
            if kind == "SCALARS":
                name = take(1)[0]
                take(2)  # dtype, component count
                expect("LOOKUP_TABLE")
                take(1)  # table name
                fields[name] = np.array(take(n), dtype=float)
            elif kind == "VECTORS":
                name = take(1)[0]
                take(1)  # dtype
                fields[name] = np.array(take(3 * n),
                                        dtype=float).reshape(n, 3)
            else:
                raise SnapshotError(
                    f"{path}: unsupported POINT_DATA block {kind!r}")
    dim = 2 if np.all(coords[:, 2] == 0.0) else 3
    if dim == 2:
        fields = {k: (v[:, :2] if v.ndim == 2 else v)
                  for k, v in fields.items()}
    return FieldSnapshot(coords=coords[:, :dim], cells=cells,
                         cell_type=cell_type, fields=fields,
                         time=time, orientation=orient)


# ---------------------------------------------------------------------------
# line sampling
# ---------------------------------------------------------------------------

def _snapshot_tris(snapshot: FieldSnapshot) -> np.ndarray:
    if snapshot.cell_type == 5:
        return snapshot.cells
    if snapshot.cell_type == 9:
        return _split_quads(snapshot.coords, snapshot.cells)
    raise SnapshotError("line sampling needs a 2D triangle or quad mesh")


def _tri_adjacency(tris: np.ndarray) -> np.ndarray:
    """Neighbor across each local edge (a,b),(b,c),(c,a); -1 at walls."""
    m = tris.shape[0]
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]],
                            tris[:, [2, 0]]])
    owner = np.tile(np.arange(m), 3)
    key = np.sort(edges, axis=1)
    order = np.lexsort((key[:, 1], key[:, 0]))
    key, owner_s = key[order], owner[order]
    slot_s = (order // m)
    adj = np.full((m, 3), -1, dtype=np.int64)
    # interior edges appear exactly twice and sort adjacent
    i = np.flatnonzero(np.all(key[1:] == key[:-1], axis=1))
    adj[owner_s[i], slot_s[i]] = owner_s[i + 1]
    adj[owner_s[i + 1], slot_s[i + 1]] = owner_s[i]
    return adj


def _barycentric(coords, tris, elem, pt):
    a, b, c = coords[tris[elem]]
    den = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    l1 = ((pt[0] - a[0]) * (c[1] - a[1])
          - (pt[1] - a[1]) * (c[0] - a[0])) / den
    l2 = ((b[0] - a[0]) * (pt[1] - a[1])
          - (b[1] - a[1]) * (pt[0] - a[0])) / den
    return np.array([1.0 - l1 - l2, l1, l2])


def _locate(coords, tris, adj, pt, start, tol):
    """Walk from element start toward pt; return (elem, bary) or None."""
    elem = start
    for _ in range(tris.shape[0]):
        lam = _barycentric(coords, tris, elem, pt)
        if np.all(lam >= -tol):
            return elem, lam
        # cross the edge opposite the most negative coordinate:
        # vertex 0 faces local edge 1 (b,c), vertex 1 edge 2, vertex 2 edge 0
        nxt = adj[elem, (int(np.argmin(lam)) + 1) % 3]
        if nxt < 0:
            return None
        elem = nxt
    return None


def _locate_brute(coords, tris, pt, tol):
    a = coords[tris[:, 0]]
    b = coords[tris[:, 1]]
    c = coords[tris[:, 2]]
    den = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) \
        - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    l1 = ((pt[0] - a[:, 0]) * (c[:, 1] - a[:, 1])
          - (pt[1] - a[:, 1]) * (c[:, 0] - a[:, 0])) / den
    l2 = ((b[:, 0] - a[:, 0]) * (pt[1] - a[:, 1])
          - (b[:, 1] - a[:, 1]) * (pt[0] - a[:, 0])) / den
    l0 = 1.0 - l1 - l2
    inside = (l0 >= -tol) & (l1 >= -tol) & (l2 >= -tol)
    hits = np.flatnonzero(inside)
    if hits.size == 0:
        return None
    elem = int(hits[0])  # boundary ties resolve to the lower element
    return elem, np.array([l0[elem], l1[elem], l2[elem]])


def sample_line(snapshot: FieldSnapshot, start, end, n_samples: int):
    """Sample all fields at n_samples equispaced points on a segment.

    Returns a dict with 's' (arc length from start), 'points', and one
    entry per field.  Samples outside the fluid are NaN.  Raises if the
    segment misses the mesh entirely.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    coords = snapshot.coords
    if coords.shape[1] != 2:
        raise SnapshotError("line sampling is 2D only")
    tris = _snapshot_tris(snapshot)
    adj = _tri_adjacency(tris)
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    ts = np.linspace(0.0, 1.0, n_samples)
    pts = start[None, :] + ts[:, None] * (end - start)[None, :]
    tol = 1e-10  # barycentric coordinates are scale free

    out = {"s": ts * np.linalg.norm(end - start), "points": pts}
    vals = {name: np.full((n_samples,) + arr.shape[1:], np.nan)
            for name, arr in snapshot.fields.items()}
    last = 0
    found_any = False
    for i, pt in enumerate(pts):
        hit = _locate(coords, tris, adj, pt, last, tol)
        if hit is None or np.min(hit[1]) < tol:
            # on an element boundary (or walk blocked): the brute scan
            # settles ties deterministically on the lower element index
            hit = _locate_brute(coords, tris, pt, tol)
        if hit is None:
            continue
        elem, lam = hit
        last = elem
        found_any = True
        nodes = tris[elem]
        for name, arr in snapshot.fields.items():
            vals[name][i] = np.einsum("a,a...->...", lam, arr[nodes])
    if not found_any:
        raise ValueError("sampling segment lies entirely outside the mesh")
    out.update(vals)
    return out


# ---------------------------------------------------------------------------
# flux integration and convergence reporting
# ---------------------------------------------------------------------------

def section_flux(snapshot: FieldSnapshot, nodes, density: float,
                 velocity: str = "velocity", closed: bool = False) -> float:
    """Mass flow rate of rho * u . n across a node chain.

    The chain is a polyline of node indices; n is the left-hand normal
    of the traversal direction (outward for a counterclockwise closed
    chain).  With closed=True the chain must end where it starts.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    if nodes.ndim != 1 or nodes.size < 2:
        raise ValueError("section must list at least two nodes")
    if closed and nodes[0] != nodes[-1]:
        raise ValueError("closed section must end at its starting node")
    u = snapshot.fields[velocity]
    if u.ndim != 2:
        raise ValueError(f"field {velocity!r} is not a vector field")
    x = snapshot.coords[nodes]
    ua, ub = u[nodes[:-1]], u[nodes[1:]]
    d = x[1:] - x[:-1]
    nrm = np.stack([d[:, 1], -d[:, 0]], axis=1)  # length-weighted normal
    # u linear on each segment: trapezoid is exact
    return float(density * 0.5 * np.sum((ua + ub) * nrm))


def convergence_report(runs) -> list:
    """Pairwise differences of sampled profiles against the finest run.

    runs is a sequence of (label, values) with identical shapes; the
    last entry is the reference.  Rows where any run is NaN are dropped
    so partially-covered samples compare fairly.  Returns one dict per
    run with relative L2 / max differences and a monotonicity flag.
    """
    runs = list(runs)
    if len(runs) < 2:
        raise ValueError("need at least two runs to compare")
    labels = [label for label, _ in runs]
    arrays = [np.asarray(v, dtype=float) for _, v in runs]
    shape = arrays[-1].shape
    for label, arr in zip(labels, arrays):
        if arr.shape != shape:
            raise ValueError(
                f"run {label!r} sampling does not match the finest run")
    flat = [a.reshape(a.shape[0], -1) for a in arrays]
    ok = ~np.any([np.isnan(f).any(axis=1) for f in flat], axis=0)
    if not np.any(ok):
        raise ValueError("no common valid samples between runs")
    ref = flat[-1][ok]
    ref_norm = float(np.linalg.norm(ref))
    ref_max = float(np.max(np.abs(ref)))
    rows = []
    prev = None
    for label, f in zip(labels, flat):
        diff = f[ok] - ref
        rel_l2 = float(np.linalg.norm(diff)) / max(ref_norm, 1e-300)
        rel_max = float(np.max(np.abs(diff))) / max(ref_max, 1e-300)
        monotone = prev is None or rel_l2 <= prev + 1e-15
        rows.append({"label": label, "rel_l2": rel_l2, "rel_max": rel_max,
                     "monotone": bool(monotone)})
        prev = rel_l2
    return rows


def write_csv(path, header, rows) -> None:
    """Write a deterministic CSV: comma separated, LF endings, %.17g."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, (float, np.floating)):
                    cells.append(_fmt(float(v)))
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")
