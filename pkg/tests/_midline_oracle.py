"""Scalar reference implementation of the interface-line recursions.

Everything here is written with plain floats and explicit loops, sharing
no code with the package beyond raw parameter values, so vectorization
or indexing mistakes in the production path cannot cancel out.
"""

import math


def wiped_radius(phi: float, r_s: float, c_l: float, delta_s: float,
                 n_f: int) -> float:
    """Radius of the clearance-adapted self-wiping contour at angle phi."""
    rv = r_s + delta_s / 2.0
    half = delta_s / 2.0
    psi = math.acos(c_l / (2.0 * rv))
    alpha = math.pi / n_f - 2.0 * psi
    period = 2.0 * math.pi / n_f
    phi_f = abs((phi + period / 2.0) % period - period / 2.0)
    rho = rv - half
    r_flank = c_l - half
    for k in range(n_f):
        for sgn in (1.0, -1.0):
            cen = k * period + sgn * (alpha / 2.0 + 2.0 * psi - math.pi)
            dot = rv * math.cos(phi - cen)
            rho = min(rho, dot + math.sqrt(dot * dot
                                           + r_flank * r_flank - rv * rv))
    if phi_f >= alpha / 2.0 + 2.0 * psi:
        rho = min(rho, c_l - rv - half)
    return rho


def cusp_geometry(r_s, c_l, delta_b):
    r_b = r_s + delta_b
    theta_cp = math.acos(c_l / (2.0 * r_b))
    y_cp = math.sqrt(r_b * r_b - (c_l / 2.0) ** 2)
    return r_b, theta_cp, y_cp


def id_shift(rotation: float, n_s: int) -> int:
    steps = rotation / (2.0 * math.pi / n_s)
    return -int(math.floor(0.5 - steps)) % n_s


def surface_point(key: int, center_x: float, total_rotation: float,
                  r_s, c_l, delta_s, n_f, n_s):
    """Snapped surface node on ray `key` of one screw."""
    dth = 2.0 * math.pi / n_s
    s = id_shift(total_rotation, n_s)
    phi = ((key - s) % n_s) * dth
    rho = wiped_radius(phi, r_s, c_l, delta_s, n_f)
    ang = phi + total_rotation
    return (center_x + rho * math.cos(ang), rho * math.sin(ang))


def middle_line_points(r_s, c_l, delta_s, delta_b, n_f, n_s,
                       orientation, phase):
    """Interface polyline, lower cusp through center to upper cusp.

    Returns (keys, points) with keys in the left screw's numbering.
    """
    r_b, theta_cp, y_cp = cusp_geometry(r_s, c_l, delta_b)
    raw = theta_cp / (2.0 * math.pi) * n_s
    id_cp = int(round(raw))

    def ring(center_x, total):
        return [surface_point(k, center_x, total, r_s, c_l, delta_s,
                              n_f, n_s) for k in range(n_s)]

    surf_l = ring(-c_l / 2.0, orientation)
    surf_r = ring(+c_l / 2.0, orientation + phase)

    def reflect(points):
        return [(-x, -y) for x, y in points]

    def roll_half(points):
        return [points[(k + n_s // 2) % n_s] for k in range(n_s)]

    def upper_avg(sl, sr):
        out = []
        for k in range(id_cp + 1):
            pair = (n_s // 2 - k) % n_s
            out.append(((sl[k][0] + sr[pair][0]) / 2.0,
                        (sl[k][1] + sr[pair][1]) / 2.0))
        return out

    def y_rel_max(avg):
        a = avg[id_cp - 1][1]
        if a < y_cp:
            return 0.0
        barrel_y = r_b * math.sin((id_cp - 1) / id_cp * theta_cp)
        y_max = 0.0
        blended = a
        while blended >= y_cp:
            y_max += 0.05
            blended = y_max * barrel_y + (1.0 - y_max) * a
        return y_max

    def decay(avg, y_max):
        if y_max == 0.0:
            return 0.0
        dy = y_max
        idx = id_cp - 3
        while True:
            dy = dy / (id_cp - 1 - idx)
            cp_rel = idx / id_cp
            y1 = dy * r_b * math.sin(cp_rel * theta_cp) \
                + (1.0 - dy) * avg[idx][1]
            if y1 > avg[idx - 1][1] and avg[idx - 1][1] < y_cp:
                return dy
            idx -= 1

    def half(sl, sr):
        avg = upper_avg(sl, sr)
        y_max = y_rel_max(avg)
        dy = decay(avg, y_max)
        left_barrel = max(x for x, _ in sl) + min(x for x, _ in sr) > 0.0
        pts = []
        for idx in range(id_cp + 1):
            cp_rel = idx / id_cp
            barrel_y = r_b * math.sin(cp_rel * theta_cp)
            avg_y = avg[idx][1]
            if barrel_y < avg_y:
                if y_max < (id_cp - idx - 1) * dy:
                    y_rel = (1.0 - cp_rel) ** 2 * cp_rel
                else:
                    y_rel = y_max - (id_cp - idx - 1) * dy
            else:
                y_rel = cp_rel
            y = y_rel * barrel_y + (1.0 - y_rel) * avg_y
            x = avg[idx][0]
            root = math.sqrt(max(r_b * r_b - y * y, 0.0))
            if left_barrel:
                xc = root - c_l / 2.0
                if xc < x:
                    x = cp_rel * xc + (1.0 - cp_rel) * x
            else:
                xc = c_l / 2.0 - root
                if xc > x:
                    x = cp_rel * xc + (1.0 - cp_rel) * x
            pts.append((x, y))
        pts[id_cp] = (0.0, y_cp)
        return pts

    upper = half(surf_l, surf_r)
    refl_l = roll_half(reflect(surf_r))
    refl_r = roll_half(reflect(surf_l))
    lower_refl = half(refl_l, refl_r)
    lower = [(-x, -y) for x, y in lower_refl[:0:-1]]

    keys = [(n_s - j) % n_s for j in range(id_cp, 0, -1)] \
        + list(range(id_cp + 1))
    return keys, lower + upper
