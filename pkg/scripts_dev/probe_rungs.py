"""Probe the rung-fan interface construction before committing to it.

For each orientation: feet on both screw surfaces at the interface keys,
rungs v_k = fR_k - fL_k, and the beta-independent static margins
(normalized cross of v_k against the four adjacent surface edges).
Also checks that each rung has a usable crossing-free beta window.
"""
import math
import sys
import time

import numpy as np

sys.path.insert(0, "src")

from screwsim import srmum as S
from screwsim.geometry import ScrewParams, _wiped_radius

P = ScrewParams(r_s=15.275e-3, c_l=26.2e-3, delta_s=0.2e-3,
                delta_b=0.15e-3, n_f=2)


def feet(asm, orientation):
    rings = S._surface_rings(asm, orientation)
    n_s, id_cp = asm.n_s, asm.id_cp
    keys = np.concatenate([(n_s - np.arange(id_cp, 0, -1)) % n_s,
                           np.arange(id_cp + 1)])
    pair = (n_s // 2 - keys) % n_s
    return rings[0][keys], rings[1][pair]


def static_margins(fl, fr):
    """Min normalized cross of rung vs adjacent surface edges, per key."""
    v = fr - fl
    sl = np.diff(fl, axis=0)               # sF_k = fl[k+1] - fl[k]
    sr = np.diff(fr, axis=0)
    def sine(a, b):
        cr = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        return cr / (np.hypot(*a.T) * np.hypot(*b.T))
    # left block: cross(v_k, sF_k) and cross(v_k, sF_{k-1}) > 0
    m = np.full(v.shape[0], np.inf)
    m[:-1] = np.minimum(m[:-1], sine(v[:-1], sl))
    m[1:] = np.minimum(m[1:], sine(v[1:], sl))
    # right block: cross(sR edges, v_k) > 0; right-forward is k decreasing
    m[:-1] = np.minimum(m[:-1], sine(-sr, v[:-1]))
    m[1:] = np.minimum(m[1:], sine(-sr, v[1:]))
    return m


def windows(asm, fl, fr, orientation, n=49):
    """Crossing-free beta span per interior rung: (lo, hi), empty -> nan."""
    a, v = fl[1:-1], fr[1:-1] - fl[1:-1]
    lam = np.linspace(0.0, 1.0, n)
    pts = a[:, None, :] + lam[None, :, None] * v[:, None, :]
    ok = np.ones(pts.shape[:2], dtype=bool)
    for b, (ctr, total) in enumerate(
            zip(asm.centers, (orientation, orientation + asm.phase))):
        rel = pts - ctr
        rr = np.hypot(rel[..., 0], rel[..., 1])
        phi = np.arctan2(rel[..., 1], rel[..., 0]) - total
        ok &= rr - _wiped_radius(phi, asm.params) > -1e-12
    d0 = np.hypot(*(pts - asm.centers[0]).T).T
    d1 = np.hypot(*(pts - asm.centers[1]).T).T
    ok &= np.minimum(d0, d1) < asm.r_b - 1e-12
    # prefix run from the left (skip s=0 which sits on the left surface)
    lo = np.full(a.shape[0], np.nan)
    hi = np.full(a.shape[0], np.nan)
    for k in range(a.shape[0]):
        row = ok[k]
        # first run from left starting at 1
        i = 1
        while i < n and not row[i]:
            i += 1
        j = i
        while j < n and row[j]:
            j += 1
        # run [i, j): from the right
        i2 = n - 2
        while i2 >= 0 and not row[i2]:
            i2 -= 1
        j2 = i2
        while j2 >= 0 and row[j2]:
            j2 -= 1
        # run (j2, i2]
        s0, s1 = max(i, j2 + 1), min(j - 1, i2)
        if s0 <= s1 and i < n:
            lo[k] = lam[s0]
            hi[k] = lam[s1]
    return lo, hi


def main():
    for n_s, n_r, tag in ((280, 6, "mesh1"), (500, 10, "mesh2")):
        asm = build(n_s, n_r)
        worst = np.inf
        worst_o = None
        bad_win = 0
        narrow = np.inf
        t0 = time.perf_counter()
        for deg in np.arange(0.0, 180.5, 0.5):
            o = math.radians(deg)
            fl, fr = feet(asm, o)
            m = static_margins(fl, fr).min()
            if m < worst:
                worst, worst_o = m, deg
            lo, hi = windows(asm, fl, fr, o)
            if np.isnan(lo).any():
                bad_win += 1
            else:
                narrow = min(narrow, (hi - lo).min())
        dt = time.perf_counter() - t0
        print(f"{tag}: worst static sine {worst:.5f} "
              f"(angle {math.degrees(math.asin(abs(worst))):.3f} deg) "
              f"at {worst_o} deg; empty windows {bad_win}; "
              f"narrowest window {narrow:.4f}; {dt:.1f}s")


def build(n_s, n_r):
    real = S.snap
    S.snap = lambda a, o, check=True: real(a, o, check=False)
    try:
        asm = S.build_assembly(P, n_s=n_s, n_r=n_r)
    finally:
        S.snap = real
    return asm


if __name__ == "__main__":
    main()
