"""Writes data/ieee24.json from the IEEE RTS-24 tables and stores a solved
state computed by a standalone complex-form Newton solver."""

import json
import sys
from pathlib import Path

import numpy as np

BASE_MVA = 100.0
SLACK = 13

# id, Pd, Qd, Gs, Bs
BUSES = [
    (1, 108, 22, 0, 0), (2, 97, 20, 0, 0), (3, 180, 37, 0, 0), (4, 74, 15, 0, 0),
    (5, 71, 14, 0, 0), (6, 136, 28, 0, -100), (7, 125, 25, 0, 0), (8, 171, 35, 0, 0),
    (9, 175, 36, 0, 0), (10, 195, 40, 0, 0), (11, 0, 0, 0, 0), (12, 0, 0, 0, 0),
    (13, 265, 54, 0, 0), (14, 194, 39, 0, 0), (15, 317, 64, 0, 0), (16, 100, 20, 0, 0),
    (17, 0, 0, 0, 0), (18, 333, 68, 0, 0), (19, 181, 37, 0, 0), (20, 128, 26, 0, 0),
    (21, 0, 0, 0, 0), (22, 0, 0, 0, 0), (23, 0, 0, 0, 0), (24, 0, 0, 0, 0),
]

# from, to, r, x, b, rateA, tap
BRANCHES = [
    (1, 2, 0.0026, 0.0139, 0.4611, 175, 0), (1, 3, 0.0546, 0.2112, 0.0572, 175, 0),
    (1, 5, 0.0218, 0.0845, 0.0229, 175, 0), (2, 4, 0.0328, 0.1267, 0.0343, 175, 0),
    (2, 6, 0.0497, 0.192, 0.052, 175, 0), (3, 9, 0.0308, 0.119, 0.0322, 175, 0),
    (3, 24, 0.0023, 0.0839, 0, 400, 1.03), (4, 9, 0.0268, 0.1037, 0.0281, 175, 0),
    (5, 10, 0.0228, 0.0883, 0.0239, 175, 0), (6, 10, 0.0139, 0.0605, 2.459, 175, 0),
    (7, 8, 0.0159, 0.0614, 0.0166, 175, 0), (8, 9, 0.0427, 0.1651, 0.0447, 175, 0),
    (8, 10, 0.0427, 0.1651, 0.0447, 175, 0), (9, 11, 0.0023, 0.0839, 0, 400, 1.03),
    (9, 12, 0.0023, 0.0839, 0, 400, 1.03), (10, 11, 0.0023, 0.0839, 0, 400, 1.02),
    (10, 12, 0.0023, 0.0839, 0, 400, 1.02), (11, 13, 0.0061, 0.0476, 0.0999, 500, 0),
    (11, 14, 0.0054, 0.0418, 0.0879, 500, 0), (12, 13, 0.0061, 0.0476, 0.0999, 500, 0),
    (12, 23, 0.0124, 0.0966, 0.203, 500, 0), (13, 23, 0.0111, 0.0865, 0.1818, 500, 0),
    (14, 16, 0.005, 0.0389, 0.0818, 500, 0), (15, 16, 0.0022, 0.0173, 0.0364, 500, 0),
    (15, 21, 0.0063, 0.049, 0.103, 500, 0), (15, 21, 0.0063, 0.049, 0.103, 500, 0),
    (15, 24, 0.0067, 0.0519, 0.1091, 500, 0), (16, 17, 0.0033, 0.0259, 0.0545, 500, 0),
    (16, 19, 0.003, 0.0231, 0.0485, 500, 0), (17, 18, 0.0018, 0.0144, 0.0303, 500, 0),
    (17, 22, 0.0135, 0.1053, 0.2212, 500, 0), (18, 21, 0.0033, 0.0259, 0.0545, 500, 0),
    (18, 21, 0.0033, 0.0259, 0.0545, 500, 0), (19, 20, 0.0051, 0.0396, 0.0833, 500, 0),
    (19, 20, 0.0051, 0.0396, 0.0833, 500, 0), (20, 23, 0.0028, 0.0216, 0.0455, 500, 0),
    (20, 23, 0.0028, 0.0216, 0.0455, 500, 0), (21, 22, 0.0087, 0.0678, 0.1424, 500, 0),
]

# bus, Pg, Qmax, Qmin, Vg, Pmax, Pmin, c2, c1, c0
GENS = [
    (1, 10, 10, 0, 1.035, 20, 16, 0, 130, 400.6849),
    (1, 10, 10, 0, 1.035, 20, 16, 0, 130, 400.6849),
    (1, 76, 30, -25, 1.035, 76, 15.2, 0.014142, 16.0811, 212.3076),
    (1, 76, 30, -25, 1.035, 76, 15.2, 0.014142, 16.0811, 212.3076),
    (2, 10, 10, 0, 1.035, 20, 16, 0, 130, 400.6849),
    (2, 10, 10, 0, 1.035, 20, 16, 0, 130, 400.6849),
    (2, 76, 30, -25, 1.035, 76, 15.2, 0.014142, 16.0811, 212.3076),
    (2, 76, 30, -25, 1.035, 76, 15.2, 0.014142, 16.0811, 212.3076),
    (7, 80, 60, 0, 1.025, 100, 25, 0.052672, 43.6615, 781.521),
    (7, 80, 60, 0, 1.025, 100, 25, 0.052672, 43.6615, 781.521),
    (7, 80, 60, 0, 1.025, 100, 25, 0.052672, 43.6615, 781.521),
    (13, 95.1, 80, 0, 1.02, 197, 69, 0.00717, 48.5804, 832.7575),
    (13, 95.1, 80, 0, 1.02, 197, 69, 0.00717, 48.5804, 832.7575),
    (13, 95.1, 80, 0, 1.02, 197, 69, 0.00717, 48.5804, 832.7575),
    (14, 0, 200, -50, 0.98, 0, 0, 0, 0, 0),
    (15, 12, 6, 0, 1.014, 12, 2.4, 0.328412, 56.564, 86.3852),
    (15, 12, 6, 0, 1.014, 12, 2.4, 0.328412, 56.564, 86.3852),
    (15, 12, 6, 0, 1.014, 12, 2.4, 0.328412, 56.564, 86.3852),
    (15, 12, 6, 0, 1.014, 12, 2.4, 0.328412, 56.564, 86.3852),
    (15, 12, 6, 0, 1.014, 12, 2.4, 0.328412, 56.564, 86.3852),
    (15, 155, 80, -50, 1.014, 155, 54.3, 0.008342, 12.3883, 382.2391),
    (16, 155, 80, -50, 1.017, 155, 54.3, 0.008342, 12.3883, 382.2391),
    (18, 400, 200, -50, 1.05, 400, 100, 0.000213, 4.4231, 395.3749),
    (21, 400, 200, -50, 1.05, 400, 100, 0.000213, 4.4231, 395.3749),
    (22, 50, 16, -10, 1.05, 50, 10, 0, 0.001, 0.001),
    (22, 50, 16, -10, 1.05, 50, 10, 0, 0.001, 0.001),
    (22, 50, 16, -10, 1.05, 50, 10, 0, 0.001, 0.001),
    (22, 50, 16, -10, 1.05, 50, 10, 0, 0.001, 0.001),
    (22, 50, 16, -10, 1.05, 50, 10, 0, 0.001, 0.001),
    (22, 50, 16, -10, 1.05, 50, 10, 0, 0.001, 0.001),
    (23, 155, 80, -50, 1.05, 155, 54.3, 0.008342, 12.3883, 382.2391),
    (23, 155, 80, -50, 1.05, 155, 54.3, 0.008342, 12.3883, 382.2391),
    (23, 350, 150, -25, 1.05, 350, 140, 0.004895, 11.8495, 665.1094),
]


def ybus():
    n = len(BUSES)
    y = np.zeros((n, n), dtype=complex)
    for f, t, r, x, b, _, tap in BRANCHES:
        i, j = f - 1, t - 1
        a = tap if tap else 1.0
        ys = 1.0 / complex(r, x)
        y[i, i] += (ys + 0.5j * b) / a**2
        y[j, j] += ys + 0.5j * b
        y[i, j] -= ys / a
        y[j, i] -= ys / a
    for k, (_, _, _, gs, bs) in enumerate(BUSES):
        y[k, k] += complex(gs, bs) / BASE_MVA
    return y


def newton(y, s_spec, vset, pv, pq, slack, tol=1e-12):
    n = y.shape[0]
    v = np.ones(n, dtype=complex)
    for k in list(pv) + [slack]:
        v[k] = vset[k]
    pvpq = list(pv) + list(pq)
    for it in range(30):
        mis = v * np.conj(y @ v) - s_spec
        f = np.r_[mis.real[pvpq], mis.imag[pq]]
        if np.max(np.abs(f)) < tol:
            return v, it
        ibus = y @ v
        dv = np.diag(v / np.abs(v))
        ds_dvm = np.diag(v) @ np.conj(y @ dv) + np.conj(np.diag(ibus)) @ dv
        ds_dva = 1j * np.diag(v) @ np.conj(np.diag(ibus) - y @ np.diag(v))
        j = np.block([
            [ds_dva.real[np.ix_(pvpq, pvpq)], ds_dvm.real[np.ix_(pvpq, pq)]],
            [ds_dva.imag[np.ix_(pq, pvpq)], ds_dvm.imag[np.ix_(pq, pq)]],
        ])
        dx = np.linalg.solve(j, -f)
        va = np.angle(v)
        vm = np.abs(v)
        va[pvpq] += dx[: len(pvpq)]
        vm[pq] += dx[len(pvpq):]
        v = vm * np.exp(1j * va)
    raise RuntimeError("no convergence")


def main(out):
    n = len(BUSES)
    gen_buses = {g[0] for g in GENS}
    vset = np.ones(n)
    for g in GENS:
        vset[g[0] - 1] = g[4]
    pg = np.zeros(n)
    for g in GENS:
        pg[g[0] - 1] += g[1]
    pd = np.array([b[1] for b in BUSES], float)
    qd = np.array([b[2] for b in BUSES], float)
    s_spec = (pg - pd - 1j * qd) / BASE_MVA
    slack = SLACK - 1
    pv = [k for k in range(n) if k + 1 in gen_buses and k != slack]
    pq = [k for k in range(n) if k + 1 not in gen_buses]
    y = ybus()
    v, _ = newton(y, s_spec, vset, pv, pq, slack)
    s = v * np.conj(y @ v)

    doc = {
        "format_version": "1",
        "name": "ieee24-rts",
        "baseMVA": BASE_MVA,
        "slack": SLACK,
        "alpha_pq": 0.2,
        "buses": [
            {"id": b[0], "pd_mw": b[1], "qd_mvar": b[2], "gs_mw": b[3], "bs_mvar": b[4],
             "avr": b[0] in gen_buses, "vref": float(vset[b[0] - 1])}
            for b in BUSES
        ],
        "branches": [
            {"from": f, "to": t, "r": r, "x": x, "b": b, "rate_mva": rate, "tap": tap if tap else 1.0}
            for f, t, r, x, b, rate, tap in BRANCHES
        ],
        "generators": [
            {"bus": g[0], "pg_mw": g[1], "pmin_mw": g[6], "pmax_mw": g[5], "qmin_mvar": g[3],
             "qmax_mvar": g[2], "cost": [g[7], g[8], g[9]]}
            for g in GENS
        ],
        "solved_state": {
            "v_pu": [round(float(x), 12) for x in np.abs(v)],
            "theta_rad": [round(float(x), 12) for x in np.angle(v)],
            "p_pu": [round(float(x), 12) for x in s.real],
            "q_pu": [round(float(x), 12) for x in s.imag],
        },
    }
    Path(out).write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/ieee24.json")
