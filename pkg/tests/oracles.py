"""Independent reference computations used by the tests.

Nothing here calls into beamalloc's numerical code: geometry is done with
cross products, the link budget in dB arithmetic, and the per-beamwidth
allocation pipeline is re-derived with plain loops.
"""

import math


def gain(theta, eps):
    # 2*pi/theta scaled down by the sidelobe leakage, plus eps
    return (2 * math.pi / theta) * (1 - eps) + eps


def pathloss_db(f_ghz, dist_km, alpha):
    return 98.4 + 20 * math.log10(f_ghz) + 10 * alpha * math.log10(dist_km)


def noise_dbm(n0, w):
    return n0 + 10 * math.log10(w)


def imperfect_sinr(d_m, theta, *, p_dbm=30.0, n_sub=8, bw=1e9, f=60.0, alpha=2.0, eps=0.01, n0=-174.0, m=6):
    """dB-domain straight-line evaluation of the fading-free SINR."""
    p_sub_dbm = p_dbm - 10 * math.log10(n_sub)
    pl = pathloss_db(f, max(d_m, 1.0) / 1000.0, alpha)
    g_db = 10 * math.log10(gain(theta, eps))
    signal_dbm = p_sub_dbm + 2 * g_db - pl
    interf_dbm_each = p_sub_dbm - pl + 20 * math.log10(eps)
    noise_mw = 10 ** (noise_dbm(n0, bw / n_sub) / 10)
    interf_mw = (m - 1) * 10 ** (interf_dbm_each / 10)
    return 10 ** (signal_dbm / 10) / (interf_mw + noise_mw)


def point_ray_distance(x, y, ang):
    ux, uy = math.cos(ang), math.sin(ang)
    along = x * ux + y * uy
    if along <= 0:
        return math.hypot(x, y)
    return abs(x * uy - y * ux)


def azimuth(x, y):
    a = math.atan2(y, x)
    if a < 0:
        a += 2 * math.pi
    return 0.0 if a >= 2 * math.pi else a


def beam_members(points, theta, total_beams):
    """Global beam index per point, by scanning the intervals."""
    out = []
    for x, y in points:
        a = azimuth(x, y)
        for g in range(total_beams):
            if g * theta <= a < (g + 1) * theta:
                out.append(g)
                break
        else:
            out.append(total_beams - 1)
    return out


def theta_pipeline(points, theta, m_count, sector, beam_slot, delta, protect, *, rc=2e9, re=1e9, **budget):
    """Serve one sector with a given beam; returns (gamma, grants).

    ``beam_slot`` is 1-based within ``sector`` (1-based).
    """
    v = round(2 * math.pi / (theta * m_count))
    total = v * m_count
    members = beam_members(points, theta, total)
    gv = (sector - 1) * v + beam_slot - 1
    start, end = gv * theta, (gv + 1) * theta
    nbrs = {(gv - 1) % total, (gv + 1) % total} - {gv}
    n_sub = budget.get("n_sub", 8)
    w = budget.get("bw", 1e9) / n_sub

    considered = []
    for k, (x, y) in enumerate(points):
        a = min(point_ray_distance(x, y, start), point_ray_distance(x, y, end))
        if members[k] == gv:
            cls = "edge" if protect and a <= delta else "center"
        elif members[k] in nbrs and protect and delta > 0 and a <= delta:
            cls = "edge"
        else:
            continue
        considered.append((math.hypot(x, y), k, cls))
    considered.sort()

    free = n_sub
    grants = {}
    rates = []
    for d, k, cls in considered:
        cap = w * math.log2(1 + imperfect_sinr(d, theta, m=m_count, **budget))
        need = math.ceil((re if cls == "edge" else rc) / cap)
        if need <= free:
            grants[k] = need
            free -= need
            rates.append(need * cap)
    if not rates:
        return None, grants
    return math.fsum(math.log(r) for r in rates), grants


def sector_counts(points, theta, m_count, sector):
    v = round(2 * math.pi / (theta * m_count))
    members = beam_members(points, theta, v * m_count)
    return [sum(1 for g in members if g == (sector - 1) * v + s) for s in range(v)]
