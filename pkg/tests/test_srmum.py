"""Tests for the snapping mesh update and extrusion machinery."""

import math

import numpy as np
import numpy.testing as npt
import pytest

import screwsim.srmum as sm
from screwsim.geometry import ScrewParams, min_clearance, twin_profiles
from screwsim.srmum import (
    Mesh,
    MeshError,
    build_annulus,
    build_assembly,
    extrude,
    middle_line,
    screw_id_shift,
    snap,
    validate,
)
from _midline_oracle import middle_line_points

TABLE1 = ScrewParams(r_s=15.275e-3, c_l=26.2e-3, delta_s=0.2e-3,
                     delta_b=0.15e-3, n_f=2)
TABLE4 = ScrewParams(r_s=14.75e-3, c_l=26.5e-3, delta_s=0.25e-3,
                     delta_b=0.25e-3, n_f=2, pitch=28e-3)
TABLE8 = ScrewParams(r_s=16.0e-3, c_l=25.5e-3, delta_s=0.25e-3,
                     delta_b=0.25e-3, n_f=2, pitch=28e-3)
TABLE10 = ScrewParams(r_s=156e-3, c_l=262e-3, delta_s=4e-3,
                      delta_b=4e-3, n_f=2, pitch=280e-3)


@pytest.fixture(scope="module")
def mesh1():
    return build_assembly(TABLE1, n_s=280, n_r=6)


@pytest.fixture(scope="module")
def single1():
    return build_assembly(TABLE1, n_s=280, n_r=6, twin=False)


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def test_twin_counts(mesh1):
    assert mesh1.quads.shape[0] == 3360
    assert mesh1.n_nodes == 3869
    assert mesh1.id_cp == 25
    assert mesh1.tris.shape == (6720, 3)


def test_mesh2_counts():
    asm = build_assembly(TABLE1, n_s=500, n_r=10)
    assert asm.quads.shape[0] == 10000
    assert asm.id_cp == 44


def test_single_screw_counts(single1):
    assert single1.quads.shape[0] == 1680
    assert single1.n_nodes == 1960
    assert not single1.twin


def test_annulus_counts():
    asm = build_annulus(0.01, 0.02, n_s=16, n_r=3)
    assert asm.quads.shape[0] == 48
    assert asm.n_nodes == 64
    coords = snap(asm, 0.0)
    r = np.linalg.norm(coords, axis=1)
    assert abs(r.min() - 0.01) < 1e-15
    assert abs(r.max() - 0.02) < 1e-15


def test_annulus_rejects_bad_args():
    with pytest.raises(MeshError):
        build_annulus(0.01, 0.02, n_s=10, n_r=3)   # not a multiple of 4
    with pytest.raises(MeshError):
        build_annulus(0.01, 0.02, n_s=16, n_r=1)
    with pytest.raises(MeshError):
        build_annulus(0.02, 0.01, n_s=16, n_r=3)   # inverted radii
    with pytest.raises(MeshError):
        build_annulus(0.01, 0.02, n_s=16, n_r=3, grading=-1.0)


def test_build_rejects_misaligned_ns():
    with pytest.raises(MeshError):
        build_assembly(TABLE1, n_s=282, n_r=6)


def test_grading_thinnest_layer_at_screw():
    asm = build_assembly(TABLE1, n_s=280, n_r=6, grading=1.4)
    widths = np.diff(asm.d_rel)
    assert np.all(widths[1:] > widths[:-1])
    npt.assert_allclose(asm.d_rel[-1], 1.0, atol=1e-15)
    assert asm.d_rel[0] == 0.0


# ---------------------------------------------------------------------------
# snapping
# ---------------------------------------------------------------------------

def test_screw_id_shift_examples():
    assert screw_id_shift(0.0, 280) == 0
    dth = 2.0 * math.pi / 280
    assert screw_id_shift(dth, 280) == 1
    assert screw_id_shift(100 * dth, 280) == 100
    assert screw_id_shift(281 * dth, 280) == 1      # wraps a revolution
    # ties round toward the lower index
    assert screw_id_shift(0.5 * dth, 280) == 0
    assert screw_id_shift(-0.5 * dth, 280) == 279


def test_snap_deterministic(mesh1):
    a = snap(mesh1, 0.7)
    b = snap(mesh1, 0.7)
    assert np.array_equal(a, b)


def test_snap_feet_on_surface(mesh1):
    """Layer-0 nodes must sit exactly on the snapped screw polyline."""
    coords = snap(mesh1, 0.3)
    rings = sm._surface_rings(mesh1, 0.3)
    for b in range(2):
        feet = coords[mesh1.block_nodes[b][:, 0]]
        assert np.array_equal(feet, rings[b])


def test_snap_barrel_nodes_on_bore(mesh1):
    coords = snap(mesh1, 1.234)
    tol = 1e-12 * mesh1.r_b
    for b in range(2):
        outer = mesh1.block_nodes[b][mesh1.region[b] == 0, -1]
        r = np.linalg.norm(coords[outer] - mesh1.centers[b], axis=1)
        npt.assert_allclose(r, mesh1.r_b, atol=tol)


def test_snap_periodic_in_flight_period(mesh1):
    period = 2.0 * math.pi / mesh1.params.n_f
    a = snap(mesh1, 0.41)
    b = snap(mesh1, 0.41 + period)
    npt.assert_allclose(a, b, atol=1e-12 * mesh1.r_b)


def test_snap_rejects_annulus_rotation_checks():
    asm = build_annulus(0.01, 0.02, n_s=16, n_r=3)
    with pytest.raises(MeshError):
        middle_line(asm, 0.0)


def test_interface_nodes_between_screws(mesh1):
    """Interface nodes stay strictly outside both screw contours."""
    coords = snap(mesh1, 0.9)
    pts = coords[mesh1.interface_nodes]
    for b in range(2):
        total = 0.9 + (mesh1.phase if b == 1 else 0.0)
        rel = pts - mesh1.centers[b]
        phi = np.arctan2(rel[:, 1], rel[:, 0]) - total
        r = np.linalg.norm(rel, axis=1)
        assert np.all(r > sm._wiped_radius(phi, mesh1.params))


# ---------------------------------------------------------------------------
# middle line
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("deg", [0.0, 13.7, 45.0, 90.0, 180.1, 271.3])
def test_middle_line_matches_scalar_oracle(mesh1, deg):
    th = math.radians(deg)
    ml = middle_line(mesh1, th)
    keys, pts = middle_line_points(
        TABLE1.r_s, TABLE1.c_l, TABLE1.delta_s, TABLE1.delta_b,
        TABLE1.n_f, mesh1.n_s, th, mesh1.phase)
    npt.assert_array_equal(ml.keys, keys)
    npt.assert_allclose(ml.points, pts, atol=1e-13)


def test_middle_line_endpoints_at_cusps(mesh1):
    ml = middle_line(mesh1, 0.6)
    y_cp = mesh1.barrel.y_cp
    npt.assert_allclose(ml.points[0], (0.0, -y_cp), atol=1e-15)
    npt.assert_allclose(ml.points[-1], (0.0, y_cp), atol=1e-15)


def test_middle_line_inside_intermeshing_region(mesh1):
    ml = middle_line(mesh1, 2.2)
    r_b, c_l = mesh1.r_b, mesh1.params.c_l
    tol = 1e-12 * r_b
    left = np.linalg.norm(ml.points - mesh1.centers[0], axis=1)
    right = np.linalg.norm(ml.points - mesh1.centers[1], axis=1)
    assert np.all(left <= r_b + tol)
    assert np.all(right <= r_b + tol)


def test_middle_line_reflection_symmetry(mesh1):
    """Point reflection maps the line at theta to theta + phase + pi."""
    tol = 1e-12 * mesh1.r_b
    for deg in (0.0, 33.0, 123.4, 278.0):
        th = math.radians(deg)
        a = middle_line(mesh1, th)
        b = middle_line(mesh1, th + mesh1.phase + math.pi)
        npt.assert_allclose(-a.points[::-1], b.points, atol=tol)


def test_middle_line_key_lookup(mesh1):
    ml = middle_line(mesh1, 0.0)
    npt.assert_array_equal(ml.point(0), ml.points[mesh1.id_cp])
    with pytest.raises(KeyError):
        ml.point(mesh1.id_cp + 1)


# ---------------------------------------------------------------------------
# validity sweeps (coarse; the acceptance gate runs the fine one)
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("params", [TABLE1, TABLE4, TABLE8, TABLE10],
                         ids=["shallow", "conveying", "deep", "scaled-up"])
def test_validity_sweep_coarse(params):
    asm = build_assembly(params, n_s=180, n_r=5)
    for k in range(48):
        coords = snap(asm, math.radians(k * 7.5))     # check=True raises
        assert np.isfinite(coords).all()


def test_snap_reports_inverted_element():
    """A corrupted reference profile must fail loudly, not silently."""
    asm = build_assembly(TABLE1, n_s=280, n_r=6)
    bad = asm.base_rel.copy()
    bad[7] = bad[0]  # collapse two surface rays
    asm.base_rel = bad
    with pytest.raises(MeshError, match="[Jj]acobian|element"):
        for k in range(24):
            snap(asm, k * 0.3)


# ---------------------------------------------------------------------------
# wiping clearances
# ---------------------------------------------------------------------------

def test_clearance_constancy_spot():
    from screwsim.geometry import ScrewProfile, rotate_profile
    prof_l, prof_r = twin_profiles(TABLE1, 720)
    for deg in (0.0, 30.0, 77.5, 133.0):
        th = math.radians(deg)
        gap = min_clearance(rotate_profile(prof_l, th),
                            rotate_profile(prof_r, th))
        assert abs(gap - TABLE1.delta_s) < 0.05 * TABLE1.delta_s


# ---------------------------------------------------------------------------
# extrusion
# ---------------------------------------------------------------------------

def test_extrude_counts_and_validity():
    asm = build_assembly(TABLE4, n_s=180, n_r=5)
    mesh = extrude(asm, n_a=6, length=TABLE4.pitch / 15.0)
    assert mesh.cell_type == "hex"
    assert mesh.cells.shape == (6 * 900, 8)
    assert mesh.coords.shape == (7 * asm.n_nodes, 3)
    rep = validate(mesh)
    assert rep.n_nonpositive == 0
    assert rep.min_jacobian > 0.0


def test_extrude_backward_mirrors_twist():
    asm = build_assembly(TABLE4, n_s=180, n_r=5)
    length = TABLE4.pitch / 30.0
    fwd = extrude(asm, n_a=2, length=length, direction="forward")
    bwd = extrude(asm, n_a=2, length=length, direction="backward")
    n2 = asm.n_nodes
    # top slices are rotations of each other in opposite senses
    top_f = fwd.coords[2 * n2:, :2]
    top_b = bwd.coords[2 * n2:, :2]
    assert not np.allclose(top_f, top_b)
    npt.assert_allclose(fwd.coords[:n2], bwd.coords[:n2])
    assert validate(bwd).n_nonpositive == 0


def test_extrude_straight_prism_limit():
    asm = build_annulus(0.01, 0.02, n_s=16, n_r=3)
    mesh = extrude(asm, n_a=3, length=0.05, p_l=1e9)
    n2 = asm.n_nodes
    for k in range(1, 4):
        npt.assert_allclose(mesh.coords[k * n2:(k + 1) * n2, :2],
                            mesh.coords[:n2, :2], atol=1e-9)
    assert validate(mesh).n_nonpositive == 0


def test_extrude_rejects_bad_args():
    asm = build_annulus(0.01, 0.02, n_s=16, n_r=3)
    with pytest.raises(MeshError):
        extrude(asm, n_a=0, length=0.05, p_l=1.0)
    with pytest.raises(MeshError):
        extrude(asm, n_a=2, length=0.05)           # no pitch anywhere
    with pytest.raises(MeshError):
        extrude(asm, n_a=2, length=0.05, p_l=1.0, split="prism")


def test_extrude_overtwisted_slice_fails():
    asm = build_assembly(TABLE4, n_s=180, n_r=5)
    with pytest.raises(MeshError, match="twisted"):
        # one slice across a full pitch turns 360 degrees
        extrude(asm, n_a=1, length=TABLE4.pitch)


def test_tet_split_conforming():
    asm = build_annulus(0.01, 0.02, n_s=16, n_r=3)
    mesh = extrude(asm, n_a=4, length=0.02, p_l=0.5, split="tet")
    assert mesh.cell_type == "tet"
    nq = asm.quads.shape[0]
    assert mesh.cells.shape == (6 * 4 * nq, 4)
    rep = validate(mesh)
    assert rep.min_jacobian > 0.0
    # every face is shared by exactly two tets or lies on the boundary;
    # the boundary face count is twice the quad face count of the hull
    faces = np.sort(np.concatenate([
        mesh.cells[:, [0, 1, 2]], mesh.cells[:, [0, 1, 3]],
        mesh.cells[:, [0, 2, 3]], mesh.cells[:, [1, 2, 3]]]), axis=1)
    _, counts = np.unique(faces, axis=0, return_counts=True)
    assert set(counts.tolist()) <= {1, 2}
    n_bound_quads = 2 * nq + 4 * 2 * asm.n_s  # caps + lateral walls
    assert int((counts == 1).sum()) == 2 * n_bound_quads


# ---------------------------------------------------------------------------
# quality reporting
# ---------------------------------------------------------------------------

def test_validate_quad_report(mesh1):
    coords = snap(mesh1, 0.0)
    rep = validate(Mesh(coords=coords, cells=mesh1.quads, cell_type="quad"))
    assert rep.n_nonpositive == 0
    assert rep.min_jacobian > 0.0
    assert 0.0 < rep.min_angle_deg < 90.0
    assert rep.max_aspect >= 1.0


def test_validate_flags_inverted_quad():
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0],
                       [2.0, 0.0], [2.0, 1.0]])
    cells = np.array([[0, 1, 2, 3], [1, 4, 5, 2]])
    good = validate(Mesh(coords=coords, cells=cells, cell_type="quad"))
    assert good.n_nonpositive == 0
    flipped = cells.copy()
    flipped[1] = flipped[1, ::-1]
    bad = validate(Mesh(coords=coords, cells=flipped, cell_type="quad"))
    assert bad.n_nonpositive == 1


def test_validate_unknown_cell_type():
    with pytest.raises(MeshError):
        validate(Mesh(coords=np.zeros((3, 2)), cells=np.zeros((1, 3), int),
                      cell_type="pentagon"))
