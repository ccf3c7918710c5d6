"""Dev probe for the SRMUM mesh: sweeps, margins, timing. Not shipped."""

import math
import time

import numpy as np

from screwsim.geometry import ScrewParams
from screwsim import srmum
from screwsim.srmum import (
    build_assembly,
    middle_line,
    snap,
    validate,
    screw_id_shift,
)

P = ScrewParams(r_s=15.275e-3, c_l=26.2e-3, delta_s=0.2e-3, delta_b=0.15e-3, n_f=2)


def structural_checks():
    asm = build_assembly(P, 280, 6)
    assert asm.id_cp == 25, asm.id_cp
    assert asm.n_nodes == 3869, asm.n_nodes
    assert asm.quads.shape == (3360, 4), asm.quads.shape
    assert asm.tris.shape == (6720, 3), asm.tris.shape
    # shift examples
    assert screw_id_shift(0.0, 280) == 0
    assert screw_id_shift(2 * math.pi, 280) == 0
    assert screw_id_shift(1.5 * (2 * math.pi / 280), 280) == 1
    coords = snap(asm, math.pi / 2)
    # node ids stable under rotation
    print("structural checks ok; coords90 node 70:", coords[70])


def sweep(n_s, n_r, step_deg=0.5, span_deg=360.0, label=""):
    asm = build_assembly(P, n_s, n_r)
    n = int(round(span_deg / step_deg))
    worst_det = np.inf
    worst_det_at = None
    worst_ang = np.inf
    worst_ang_at = None
    t0 = time.perf_counter()
    for k in range(n):
        th = math.radians(k * step_deg)
        coords = snap(asm, th, check=False)
        dets = srmum._quad_corner_dets(coords, asm.quads)
        dmin = float(dets.min())
        if dmin < worst_det:
            worst_det, worst_det_at = dmin, k * step_deg
        angs = srmum._corner_angles(coords[asm.quads], srmum._QUAD_ANGLE_LOOPS)
        amin = math.degrees(float(angs.min()))
        if amin < worst_ang:
            worst_ang, worst_ang_at = amin, k * step_deg
    dt = time.perf_counter() - t0
    print(
        f"[{label}] sweep {span_deg:g}deg/{step_deg:g}deg: "
        f"min det {worst_det:.3e} @ {worst_det_at:g}deg, "
        f"min angle {worst_ang:.3f}deg @ {worst_ang_at:g}deg, "
        f"{dt:.1f}s ({dt / n * 1e3:.1f} ms/orient)"
    )
    return worst_det, worst_ang, dt


def midline_invariants(n_s, n_r, step_deg=7.5):
    asm = build_assembly(P, n_s, n_r)
    y_cp = asm.barrel.y_cp
    for k in range(int(360 / step_deg)):
        th = math.radians(k * step_deg)
        ml = middle_line(asm, th)
        y = ml.points[:, 1]
        assert abs(y[0] + y_cp) < 1e-12 and abs(y[-1] - y_cp) < 1e-12
        assert np.all(np.diff(y) > 0), f"midline y not monotone at {math.degrees(th)}"
        assert np.all(np.abs(y[1:-1]) < y_cp), f"midline |y| >= y_cp at {math.degrees(th)}"
    print(f"midline invariants ok (n_s={n_s}, step {step_deg}deg)")


if __name__ == "__main__":
    structural_checks()
    midline_invariants(280, 6)
    sweep(280, 6, label="mesh1 280x6")
    sweep(500, 10, label="mesh2 500x10")
