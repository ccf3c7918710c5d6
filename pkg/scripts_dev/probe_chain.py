"""Trace the maximin chain at one orientation: where does it collapse."""
import math
import sys

import numpy as np

sys.path.insert(0, "src")

from screwsim import srmum as S
from screwsim.geometry import ScrewParams

P = ScrewParams(r_s=15.275e-3, c_l=26.2e-3, delta_s=0.2e-3,
                delta_b=0.15e-3, n_f=2)


def build(n_s, n_r):
    real = S.snap
    S.snap = lambda a, o, check=True: real(a, o, check=False)
    try:
        asm = S.build_assembly(P, n_s=n_s, n_r=n_r)
    finally:
        S.snap = real
    return asm


def trace(asm, deg):
    o = math.radians(deg)
    rings = S._surface_rings(asm, o)
    id_cp, n_s, bar = asm.id_cp, asm.n_s, asm.barrel
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
    lo, hi, width, feas = S._chord_windows(asm, fl[1:-1], fr[1:-1], o)
    span = hi - lo
    lo2, hi2 = lo + 0.1 * span, hi - 0.1 * span
    floor = 0.08 * width
    stat = np.minimum(
        np.minimum(S._sine(v[1:-1], sl[:-1]), S._sine(v[1:-1], sl[1:])),
        np.minimum(S._sine(v[1:-1], sr[:-1]), S._sine(v[1:-1], sr[1:])))
    cap = 0.2
    betas = np.linspace(0.0, 1.0, 13)
    gam_wide = np.array([-0.2, -0.1, 0.0, 0.1, 0.2])
    seg_t = np.linspace(0.0, 1.0, 13)[1:-1]
    cands = [cusps[0:1]]
    unaries = [np.array([cap])]
    for k in range(1, n - 1):
        j = k - 1
        gam = np.array([0.0]) if stat[j] > 0.15 else gam_wide
        bb = (lo2[j] + betas * (hi2[j] - lo2[j]))[:, None]
        gg = gam[None, :]
        p = (fl[k][None, None, :] + bb[..., None] * v[k][None, None, :]
             + gg[..., None] * nrm[k][None, None, :]).reshape(-1, 2)
        up_l = p - fl[k]
        up_r = p - fr[k]
        u = np.minimum(
            np.minimum(S._sine(up_l, sl[k]), S._sine(up_l, sl[k - 1])),
            np.minimum(S._sine(sr[k], up_r), S._sine(sr[k - 1], up_r)))
        seg = np.concatenate([
            fl[k] + seg_t[None, :, None] * (p - fl[k])[:, None, :],
            p[:, None, :] + seg_t[None, :, None] * (fr[k] - p)[:, None, :],
        ], axis=1)
        inside = (S._channel_clear(asm, seg, o) > -1e-9 * asm.r_b).all(axis=1)
        good = inside & (S._channel_clear(asm, p, o) > floor[j])
        u = np.where(good, np.minimum(u, cap), -np.inf)
        cands.append(p)
        unaries.append(u)
    cands.append(cusps[1:2])
    unaries.append(np.array([cap]))
    up_l = [c - f for c, f in zip(cands, fl)]
    up_r = [c - f for c, f in zip(cands, fr)]
    value = unaries[0]
    kap = np.arange(-id_cp, id_cp + 1)
    vmax_hist = []
    for k in range(n - 1):
        e = cands[k + 1][None, :, :] - cands[k][:, None, :]
        elen = np.hypot(e[..., 0], e[..., 1])
        m = np.minimum(
            np.minimum(S._sine(up_l[k][:, None, :], e),
                       S._sine(up_l[k + 1][None, :, :], e)),
            np.minimum(S._sine(e, up_r[k][:, None, :]),
                       S._sine(e, up_r[k + 1][None, :, :])))
        m = np.where(elen > 1e-7 * asm.r_b, m, -1.0)
        val = np.minimum(np.minimum(value[:, None], m),
                         unaries[k + 1][None, :])
        value = val.max(axis=0)
        vmax_hist.append(value.max())
    print(f"{deg} deg: final value {value[0]:+.4f}")
    drops = [(kap[k + 1], vmax_hist[k]) for k in range(n - 1)]
    prev = cap
    for kp, vm in drops:
        if vm < prev - 0.01:
            print(f"  value drops to {vm:+.4f} entering kappa {kp:+d}")
        prev = min(prev, vm)
    # local geometry near the worst drop
    worst_k = int(np.argmin([v for _, v in drops]))
    for kk in range(max(0, worst_k - 2), min(n, worst_k + 3)):
        w = width[kk - 1] * 1e3 if 1 <= kk <= n - 2 else float("nan")
        st = stat[kk - 1] if 1 <= kk <= n - 2 else float("nan")
        print(f"    kappa {kap[kk]:+d}: fl ({fl[kk, 0] * 1e3:+.4f},"
              f"{fl[kk, 1] * 1e3:+.4f}) fr ({fr[kk, 0] * 1e3:+.4f},"
              f"{fr[kk, 1] * 1e3:+.4f}) |v| {np.hypot(*v[kk]) * 1e3:.4f}"
              f" width {w:.4f} stat {st:+.3f}")


if __name__ == "__main__":
    asm = build(280, 6)
    for deg in (16.0, 0.5, 9.0, 90.5):
        trace(asm, deg)
