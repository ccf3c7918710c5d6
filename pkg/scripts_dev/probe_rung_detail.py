"""Where and why do static rung margins go negative."""
import math
import sys

import numpy as np

sys.path.insert(0, "src")

from screwsim import srmum as S
from screwsim.geometry import ScrewParams
from probe_rungs import P, feet, static_margins, build


def detail(asm, deg):
    o = math.radians(deg)
    fl, fr = feet(asm, o)
    v = fr - fl
    sl = np.diff(fl, axis=0)
    sr = np.diff(fr, axis=0)

    def sine(a, b):
        cr = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        return cr / (np.hypot(*a.T) * np.hypot(*b.T))

    m_lf = sine(v[:-1], sl)          # v_k vs sF_k
    m_lb = sine(v[1:], sl)           # v_{k+1} vs sF_k
    m_rf = sine(-sr, v[:-1])
    m_rb = sine(-sr, v[1:])
    id_cp = asm.id_cp
    kappa = np.arange(-id_cp, id_cp + 1)
    print(f"orientation {deg} deg")
    for name, m in (("lf", m_lf), ("lb", m_lb), ("rf", m_rf), ("rb", m_rb)):
        bad = np.flatnonzero(m < 0.05)
        for b in bad:
            print(f"  {name} edge {kappa[b]}->{kappa[b + 1]}: sine {m[b]:+.4f}")
    worst = np.argmin(np.minimum(np.minimum(m_lf, m_lb)[:-1],
                                 np.minimum(m_rf, m_rb)[1:]))
    k = worst
    print(f"  around kappa {kappa[k]}..{kappa[k + 2]}:")
    for kk in range(max(0, k - 2), min(len(kappa), k + 4)):
        print(f"    kappa {kappa[kk]:+d}: fl ({fl[kk, 0] * 1e3:+.4f}, "
              f"{fl[kk, 1] * 1e3:+.4f})  fr ({fr[kk, 0] * 1e3:+.4f}, "
              f"{fr[kk, 1] * 1e3:+.4f})  |v| {np.hypot(*v[kk]) * 1e3:.4f}")


def main():
    asm = build(280, 6)
    sweep = []
    for deg in np.arange(0.0, 180.5, 0.5):
        fl, fr = feet(asm, math.radians(deg))
        sweep.append((static_margins(fl, fr).min(), deg))
    sweep.sort()
    print("ten worst orientations:")
    for m, deg in sweep[:10]:
        print(f"  {deg:7.1f} deg: min static sine {m:+.5f}")
    detail(asm, sweep[0][1])
    # also a healthy one for contrast
    detail(asm, 0.0)


if __name__ == "__main__":
    main()
