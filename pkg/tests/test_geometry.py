"""Screw contour, barrel and clearance geometry tests."""

import math

import numpy as np
import numpy.testing as npt
import pytest

from screwsim.geometry import (
    BarrelGeometry,
    GeometryError,
    ScrewParams,
    build_profile,
    cusp_points,
    meshing_phase,
    min_clearance,
    overlaps,
    rotate_profile,
    slice_rotation,
    twin_profiles,
)

# lab-scale twin screw used throughout the suite
P = ScrewParams(r_s=15.275e-3, c_l=26.2e-3, delta_s=0.2e-3, delta_b=0.15e-3)


def test_params_validation():
    with pytest.raises(GeometryError):
        ScrewParams(r_s=10e-3, c_l=30e-3)          # no intermeshing
    with pytest.raises(GeometryError):
        ScrewParams(r_s=16e-3, c_l=15e-3)          # axes inside one radius
    with pytest.raises(GeometryError):
        ScrewParams(r_s=15e-3, c_l=26e-3, delta_s=-1e-4)
    with pytest.raises(GeometryError):
        ScrewParams(r_s=15e-3, c_l=26e-3, n_f=0)
    with pytest.raises(GeometryError):
        ScrewParams(r_s=15e-3, c_l=26e-3, direction="sideways")
    # tip arc extent shrinks to zero when r_s barely exceeds c_l/2
    with pytest.raises(GeometryError):
        ScrewParams(r_s=13.1e-3, c_l=26.2e-3, n_f=2)


def test_cusp_points_against_circle_intersection():
    barrel = cusp_points(P)
    # independent oracle: solve |x - cL|^2 = r_b^2 = |x - cR|^2 directly
    r_b = P.r_s + P.delta_b
    y = math.sqrt(r_b**2 - (P.c_l / 2.0) ** 2)
    assert barrel.r_b == pytest.approx(r_b)
    assert barrel.y_cp == pytest.approx(y, rel=1e-14)
    assert barrel.theta_cp == pytest.approx(math.acos(P.c_l / (2 * r_b)), rel=1e-14)
    # the cusp seen from the left center sits at angle theta_cp
    cusp = np.array([0.0, barrel.y_cp])
    v = cusp - barrel.left_center
    assert math.atan2(v[1], v[0]) == pytest.approx(barrel.theta_cp, rel=1e-12)
    npt.assert_allclose(np.linalg.norm(v), r_b, rtol=1e-14)
    # reference values for this screw, frozen
    assert barrel.theta_cp == pytest.approx(0.556194, abs=1e-6)
    assert barrel.y_cp == pytest.approx(8.14375e-3, abs=1e-8)


def test_profile_radius_bounds_and_extremes():
    prof = build_profile(P, 2000)
    r = prof.radii()
    assert r.max() == pytest.approx(P.r_s, rel=1e-12)
    assert r.min() == pytest.approx(P.c_l - P.r_s - P.delta_s, rel=1e-12)
    assert np.all(r <= P.r_s + 1e-15)
    assert np.all(r >= P.c_l - P.r_s - P.delta_s - 1e-15)


def test_profile_vertices_on_uniform_rays():
    n_s = 280
    prof = build_profile(P, n_s)
    rel = prof.points - prof.center
    ang = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2 * math.pi)
    npt.assert_allclose(ang, np.arange(n_s) * 2 * math.pi / n_s, atol=1e-12)


def test_profile_flight_symmetry():
    # radius function repeats every 2*pi/n_f and is even about the tip
    n_s = 720
    prof = build_profile(P, n_s)
    r = prof.radii()
    npt.assert_allclose(r, np.roll(r, n_s // P.n_f), rtol=1e-12)
    npt.assert_allclose(r[1:], r[::-1][:-1], rtol=1e-12)


def test_profile_convex():
    prof = build_profile(P, 500)
    pts = prof.points
    e = np.roll(pts, -1, axis=0) - pts
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    assert np.all(cross > 0.0), "contour polygon must be strictly convex CCW"


def test_erosion_shifts_radius_uniformly():
    # the clearance-adapted contour is the zero-clearance contour of the
    # virtual screw (r_s + delta_s/2, c_l) shrunk radially by delta_s/2
    # on tip and root and by the same normal offset on the flanks
    tight = ScrewParams(r_s=P.r_s + P.delta_s / 2.0, c_l=P.c_l, delta_s=0.0)
    r_tight = build_profile(tight, 2000).radii()
    r = build_profile(P, 2000).radii()
    assert r_tight.max() - r.max() == pytest.approx(P.delta_s / 2.0, rel=1e-9)
    assert r_tight.min() - r.min() == pytest.approx(P.delta_s / 2.0, rel=1e-9)
    # the radial shift equals delta_s/2 on tip and root and grows with
    # surface obliquity on the flanks, by at most 1/cos of the max angle
    # between ray and flank normal (about 1.18 here)
    d = r_tight - r
    assert np.all(d >= P.delta_s / 2.0 - 1e-15)
    assert np.all(d <= 1.2 * P.delta_s / 2.0)


def test_zero_clearance_profile_wipes_exactly():
    # with delta_s = 0 the two contours touch; the measured gap is pure
    # polygonization error, dominated by the first-order cut of the tip
    # corners, about r_s*(pi/n_s)*sin(psi/2) here
    tight = ScrewParams(r_s=15.375e-3, c_l=26.2e-3, delta_s=0.0, delta_b=0.05e-3)
    left, right = twin_profiles(tight, 2880)
    for th in (0.0, 0.3, 0.9, 1.4):
        gap = min_clearance(rotate_profile(left, th), rotate_profile(right, th))
        assert 0.0 <= gap < 5e-6, f"zero-clearance screws should touch, gap={gap}"


def test_wiping_gap_constant_over_rotation():
    # the gap hovers a hair above delta_s while a tip corner hands the
    # contact over to the opposing flank, never more than a few percent
    left, right = twin_profiles(P, 4096)
    period = 2 * math.pi / P.n_f
    gaps = []
    for th in np.linspace(0.0, period, 25):
        gaps.append(min_clearance(rotate_profile(left, th),
                                  rotate_profile(right, th)))
    gaps = np.array(gaps)
    assert np.all(np.abs(gaps / P.delta_s - 1.0) <= 0.05)
    assert gaps.min() >= P.delta_s * (1 - 1e-6)


def test_barrel_gap_constant_over_rotation():
    barrel = cusp_points(P)
    left, _ = twin_profiles(P, 1440)
    for th in np.linspace(0.0, math.pi, 13):
        gap = min_clearance(rotate_profile(left, th), barrel)
        assert abs(gap / P.delta_b - 1.0) <= 0.05


def test_overlap_detection():
    left, right = twin_profiles(P, 500)
    assert not overlaps(left, right)
    # rotating only one screw of a meshing pair must interpenetrate
    bad = rotate_profile(right, 0.5)
    assert overlaps(left, bad)
    assert min_clearance(left, bad) == 0.0
    barrel = cusp_points(P)
    assert not overlaps(left, barrel)
    grown = ScrewParams(r_s=15.9e-3, c_l=26.2e-3)
    too_big = build_profile(grown, 500, center=barrel.left_center)
    assert overlaps(too_big, barrel)


def test_rotate_profile_identities():
    prof = build_profile(P, 280, center=(-P.c_l / 2, 0.0))
    back = rotate_profile(rotate_profile(prof, 0.7), -0.7)
    npt.assert_allclose(back.points, prof.points, atol=1e-15)
    assert back.orientation == pytest.approx(0.0)
    # rotating by one flight period maps the polygon onto itself with an
    # index shift of n_s/n_f
    m = prof.n_points // P.n_f
    rot = rotate_profile(prof, 2 * math.pi / P.n_f)
    npt.assert_allclose(rot.points, np.roll(prof.points, -m, axis=0), atol=1e-12)
    # rotation preserves radii
    npt.assert_allclose(rot.radii(), prof.radii(), rtol=1e-12)


def test_meshing_phase():
    assert meshing_phase(2) == pytest.approx(math.pi / 2)
    assert meshing_phase(3) == pytest.approx(0.0)
    assert meshing_phase(1) == pytest.approx(0.0)


def test_twin_profiles_centers():
    left, right = twin_profiles(P, 280)
    npt.assert_allclose(left.center, [-P.c_l / 2, 0.0])
    npt.assert_allclose(right.center, [P.c_l / 2, 0.0])
    assert right.orientation == pytest.approx(math.pi / 2)


def test_slice_rotation():
    pitch = 28e-3
    # one full pitch is one full turn, forward twists against the sense
    assert slice_rotation(0.0, pitch) == 0.0
    assert slice_rotation(pitch, pitch) == pytest.approx(-2 * math.pi)
    assert slice_rotation(pitch / 2, pitch) == pytest.approx(-math.pi)
    assert slice_rotation(pitch, pitch, "backward") == pytest.approx(2 * math.pi)
    assert slice_rotation(pitch, pitch, "forward", -1) == pytest.approx(2 * math.pi)
    with pytest.raises(GeometryError):
        slice_rotation(0.01, -1.0)
    with pytest.raises(GeometryError):
        slice_rotation(0.01, 28e-3, "diagonal")


def test_build_profile_sampling_guards():
    with pytest.raises(GeometryError):
        build_profile(P, 10)
    with pytest.raises(GeometryError):
        build_profile(P, 281)  # not divisible by n_f
