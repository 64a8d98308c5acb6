"""Regenerate the shipped feeder bundles under src/evdrcc/data/.

Both feeders are the "modified" variants used for the EV studies: spot loads
are scaled by 8 (33-bus: 3.715 MW -> 29.72 MW, 123-bus: 3.49 MW -> 27.92 MW)
and branch impedances are divided by the same factor so that voltage drops
stay in the range of the original feeders.

Run:  python scripts/make_bundles.py
"""

import csv
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "evdrcc" / "data"
LOAD_SCALE = 8.0
V2_MIN, V2_MAX = 0.95 ** 2, 1.05 ** 2

# Baran & Wu 33-bus feeder: (from, to, r_ohm, x_ohm)
BW33_LINES = [
    (1, 2, 0.0922, 0.0470), (2, 3, 0.4930, 0.2511), (3, 4, 0.3660, 0.1864),
    (4, 5, 0.3811, 0.1941), (5, 6, 0.8190, 0.7070), (6, 7, 0.1872, 0.6188),
    (7, 8, 0.7114, 0.2351), (8, 9, 1.0300, 0.7400), (9, 10, 1.0440, 0.7400),
    (10, 11, 0.1966, 0.0650), (11, 12, 0.3744, 0.1238), (12, 13, 1.4680, 1.1550),
    (13, 14, 0.5416, 0.7129), (14, 15, 0.5910, 0.5260), (15, 16, 0.7463, 0.5450),
    (16, 17, 1.2890, 1.7210), (17, 18, 0.7320, 0.5740), (2, 19, 0.1640, 0.1565),
    (19, 20, 1.5042, 1.3554), (20, 21, 0.4095, 0.4784), (21, 22, 0.7089, 0.9373),
    (3, 23, 0.4512, 0.3083), (23, 24, 0.8980, 0.7091), (24, 25, 0.8960, 0.7011),
    (6, 26, 0.2030, 0.1034), (26, 27, 0.2842, 0.1447), (27, 28, 1.0590, 0.9337),
    (28, 29, 0.8042, 0.7006), (29, 30, 0.5075, 0.2585), (30, 31, 0.9744, 0.9630),
    (31, 32, 0.3105, 0.3619), (32, 33, 0.3410, 0.5302),
]
# bus: (kW, kVAr)
BW33_LOADS = {
    2: (100, 60), 3: (90, 40), 4: (120, 80), 5: (60, 30), 6: (60, 20),
    7: (200, 100), 8: (200, 100), 9: (60, 20), 10: (60, 20), 11: (45, 30),
    12: (60, 35), 13: (60, 35), 14: (120, 80), 15: (60, 10), 16: (60, 20),
    17: (60, 20), 18: (90, 40), 19: (90, 40), 20: (90, 40), 21: (90, 40),
    22: (90, 40), 23: (90, 50), 24: (420, 200), 25: (420, 200), 26: (60, 25),
    27: (60, 25), 28: (60, 20), 29: (120, 70), 30: (200, 600), 31: (150, 70),
    32: (210, 100), 33: (60, 40),
}

# IEEE 123-node feeder line list: (node_a, node_b, length_ft, config).  Closed
# switches and regulators are included as short links; the zero-impedance
# 150-149 regulator and 61-610 transformer are merged into their upstream bus.
IEEE123_LINES = [
    (1, 2, 175, 10), (1, 3, 250, 11), (1, 7, 300, 1), (3, 4, 200, 11),
    (3, 5, 325, 11), (5, 6, 250, 11), (7, 8, 200, 1), (8, 12, 225, 10),
    (8, 9, 225, 9), (8, 13, 300, 1), (9, 14, 425, 9), (13, 34, 150, 11),
    (13, 18, 825, 2), (14, 11, 250, 9), (14, 10, 250, 9), (15, 16, 375, 11),
    (15, 17, 350, 11), (18, 19, 250, 9), (18, 21, 300, 2), (19, 20, 325, 9),
    (21, 22, 525, 10), (21, 23, 250, 2), (23, 24, 550, 11), (23, 25, 275, 2),
    (25, 26, 350, 7), (25, 28, 200, 2), (26, 27, 275, 7), (26, 31, 225, 11),
    (27, 33, 500, 9), (28, 29, 300, 2), (29, 30, 350, 2), (30, 250, 200, 2),
    (31, 32, 300, 11), (34, 15, 100, 11), (35, 36, 650, 8), (35, 40, 250, 1),
    (36, 37, 300, 9), (36, 38, 250, 10), (38, 39, 325, 10), (40, 41, 325, 11),
    (40, 42, 250, 1), (42, 43, 500, 10), (42, 44, 200, 1), (44, 45, 200, 9),
    (44, 47, 250, 1), (45, 46, 300, 9), (47, 48, 150, 4), (47, 49, 250, 4),
    (49, 50, 250, 4), (50, 51, 250, 4), (51, 151, 500, 4), (52, 53, 200, 1),
    (53, 54, 125, 1), (54, 55, 275, 1), (54, 57, 350, 3), (55, 56, 275, 1),
    (57, 58, 250, 10), (57, 60, 750, 3), (58, 59, 250, 10), (60, 61, 550, 5),
    (60, 62, 250, 12), (62, 63, 175, 12), (63, 64, 350, 12), (64, 65, 425, 12),
    (65, 66, 325, 12), (67, 68, 200, 9), (67, 72, 275, 3), (67, 97, 250, 3),
    (68, 69, 275, 9), (69, 70, 325, 9), (70, 71, 275, 9), (72, 73, 275, 11),
    (72, 76, 200, 3), (73, 74, 350, 11), (74, 75, 400, 11), (76, 77, 400, 6),
    (76, 86, 700, 3), (77, 78, 100, 6), (78, 79, 225, 6), (78, 80, 475, 6),
    (80, 81, 475, 6), (81, 82, 250, 6), (81, 84, 675, 11), (82, 83, 250, 6),
    (84, 85, 475, 11), (86, 87, 450, 6), (87, 88, 175, 9), (87, 89, 275, 6),
    (89, 90, 225, 10), (89, 91, 225, 6), (91, 92, 300, 11), (91, 93, 225, 6),
    (93, 94, 275, 9), (93, 95, 300, 6), (95, 96, 200, 10), (97, 98, 275, 3),
    (98, 99, 550, 3), (99, 100, 300, 3), (100, 450, 800, 3), (101, 102, 225, 11),
    (101, 105, 275, 3), (102, 103, 325, 11), (103, 104, 700, 11), (105, 106, 225, 10),
    (105, 108, 325, 3), (106, 107, 575, 10), (108, 109, 450, 9), (108, 300, 1000, 3),
    (109, 110, 300, 9), (110, 111, 575, 9), (110, 112, 125, 9), (112, 113, 525, 9),
    (113, 114, 325, 9), (135, 35, 375, 4), (150, 1, 400, 1), (152, 52, 400, 1),
    (160, 67, 350, 6), (197, 101, 250, 3),
    # closed switches
    (13, 152, 10, 0), (18, 135, 10, 0), (60, 160, 10, 0), (97, 197, 10, 0),
]
# approximate positive-sequence impedance per configuration, ohm/mile
IEEE123_Z = {
    0: (0.001, 0.001),
    1: (0.3016, 0.5763), 2: (0.3016, 0.5763), 3: (0.3016, 0.5763),
    4: (0.3016, 0.5763), 5: (0.3016, 0.5763), 6: (0.3016, 0.5763),
    7: (0.4576, 1.0780), 8: (0.4576, 1.0780),
    9: (1.3292, 1.3475), 10: (1.3292, 1.3475), 11: (1.3292, 1.3475),
    12: (1.0011, 0.4746),
}
# spot loads, total over phases (kW, kVAr)
IEEE123_LOADS = {
    1: (40, 20), 2: (20, 10), 4: (40, 20), 5: (20, 10), 6: (40, 20), 7: (20, 10),
    9: (40, 20), 10: (20, 10), 11: (40, 20), 12: (20, 10), 16: (40, 20), 17: (20, 10),
    19: (40, 20), 20: (40, 20), 22: (40, 20), 24: (40, 20), 28: (40, 20), 29: (40, 20),
    30: (40, 20), 31: (20, 10), 32: (20, 10), 33: (40, 20), 34: (40, 20), 35: (40, 20),
    37: (40, 20), 38: (20, 10), 39: (20, 10), 41: (20, 10), 42: (20, 10), 43: (40, 20),
    45: (20, 10), 46: (20, 10), 47: (105, 75), 48: (210, 150), 49: (140, 95), 50: (40, 20),
    51: (20, 10), 52: (40, 20), 53: (40, 20), 55: (20, 10), 56: (20, 10), 58: (20, 10),
    59: (20, 10), 60: (20, 10), 62: (40, 20), 63: (40, 20), 64: (75, 35), 65: (140, 100),
    66: (75, 35), 68: (20, 10), 69: (40, 20), 70: (20, 10), 71: (40, 20), 73: (40, 20),
    74: (40, 20), 75: (40, 20), 76: (245, 180), 77: (40, 20), 79: (40, 20), 80: (40, 20),
    82: (40, 20), 83: (20, 10), 84: (20, 10), 85: (40, 20), 86: (20, 10), 87: (40, 20),
    88: (40, 20), 90: (40, 20), 92: (40, 20), 94: (40, 20), 95: (20, 10), 96: (20, 10),
    98: (40, 20), 99: (40, 20), 100: (40, 20), 102: (20, 10), 103: (40, 20), 104: (40, 20),
    106: (40, 20), 107: (40, 20), 109: (40, 20), 111: (20, 10), 112: (20, 10),
    113: (40, 20), 114: (20, 10),
}
IEEE123_TOTAL = (3490.0, 1920.0)


def _downstream_load(lines, loads, root):
    children = {}
    for a, b, *_ in lines:
        children.setdefault(a, []).append(b)

    def subtree(n):
        p, q = loads.get(n, (0.0, 0.0))
        for c in children.get(n, []):
            cp, cq = subtree(c)
            p, q = p + cp, q + cq
        return p, q

    return {b: subtree(b) for _, b, *_ in lines}


# Substation import limit (MW).  Chosen so that flexible capacity is scarce:
# the mean load leaves the dispatchable DG with less output than its
# reserve requirement, which makes the reserve constraints bind.
SUBSTATION_MW = {"ieee33": 26.5, "ieee123": 24.7}


def _generators(root, fixed_a, fixed_b, flex, substation_mw):
    """Substation, two must-run DGs (p_min = p_max) and one dispatchable DG."""
    return [
        (root, 0.0, substation_mw, -10.0, 25.0, 0.8, 380.0, 0.0),
        (fixed_a, 3.0, 3.0, -3.0, 4.0, 1.6, 360.0, 40.0),
        (fixed_b, 3.0, 3.0, -3.0, 3.0, 2.0, 370.0, 30.0),
        (flex, 0.0, 8.0, -3.0, 4.0, 1.2, 450.0, 50.0),
    ]


def _write(name, meta, buses, lines, gens, stations):
    d = OUT / name
    d.mkdir(parents=True, exist_ok=True)
    (d / "bundle.meta").write_text("".join(f"{k} = {v}\n" for k, v in meta.items()))

    def dump(fname, header, rows):
        with (d / fname).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([f"{v:.10g}" if isinstance(v, float) else v for v in r])

    dump("buses.csv", ["id", "kind", "p_load_mw", "q_load_mvar", "v2_min", "v2_max"], buses)
    dump("lines.csv", ["from", "to", "r_pu", "x_pu", "s_max_mva"], lines)
    dump("generators.csv",
         ["bus", "p_min_mw", "p_max_mw", "q_min_mvar", "q_max_mvar", "c2", "c1", "c0"], gens)
    dump("stations.csv", ["id", "bus", "chargers", "lambda_nominal", "lambda_offered"], stations)


# Charging-station allowance used when sizing line ratings (MW per charger).
STATION_ALLOWANCE_MW = 0.2


def _ratings(lines, loads, root, floor_mva, stations=()):
    """Ratings cover 1.25x the downstream spot load plus charging-station allowance."""
    down = _downstream_load(lines, loads, root)
    ev = _downstream_load(lines, {bus: (n * STATION_ALLOWANCE_MW, 0.0)
                                  for _, bus, n, *_ in stations}, root)
    out = {}
    for _, b, *_ in lines:
        p, q = down[b]
        s = np.hypot(p * LOAD_SCALE / 1000.0 + ev[b][0], q * LOAD_SCALE / 1000.0)
        out[b] = max(floor_mva, round(1.25 * s + 2.0, 1))
    return out


def ieee33():
    base_mva, kv = 10.0, 12.66
    zbase = kv ** 2 / base_mva
    loads = BW33_LOADS
    buses = [(1, "root", 0.0, 0.0, V2_MIN, V2_MAX)]
    for b in range(2, 34):
        p, q = loads[b]
        buses.append((b, "load", p * LOAD_SCALE / 1000, q * LOAD_SCALE / 1000, V2_MIN, V2_MAX))
    stations = [
        (1, 15, 20, 0.30, 0.26),
        (2, 21, 16, 0.30, 0.30),
        (3, 24, 24, 0.30, 0.24),
        (4, 31, 20, 0.30, 0.34),
    ]
    rating = _ratings(BW33_LINES, loads, 1, 4.0, stations)
    lines = [(a, b, r / zbase / LOAD_SCALE, x / zbase / LOAD_SCALE, rating[b])
             for a, b, r, x in BW33_LINES]
    gens = _generators(1, 18, 25, 33, SUBSTATION_MW["ieee33"])
    meta = {"name": "ieee33-modified", "base_mva": f"{base_mva:g}",
            "source": "Baran-Wu 33-bus, loads x8, impedances /8"}
    _write("ieee33", meta, buses, lines, gens, stations)


def ieee123():
    base_mva, kv = 10.0, 4.16
    zbase = kv ** 2 / base_mva
    raw = IEEE123_LOADS
    sp = sum(p for p, _ in raw.values())
    sq = sum(q for _, q in raw.values())
    loads = {b: (p * IEEE123_TOTAL[0] / sp, q * IEEE123_TOTAL[1] / sq) for b, (p, q) in raw.items()}
    nodes = {150}
    for a, b, *_ in IEEE123_LINES:
        nodes.update((a, b))
    buses = [(150, "root", 0.0, 0.0, V2_MIN, V2_MAX)]
    for b in sorted(nodes - {150}):
        p, q = loads.get(b, (0.0, 0.0))
        buses.append((b, "load", p * LOAD_SCALE / 1000, q * LOAD_SCALE / 1000, V2_MIN, V2_MAX))
    stations = [
        (1, 32, 20, 0.30, 0.26),
        (2, 48, 24, 0.30, 0.30),
        (3, 76, 28, 0.30, 0.24),
        (4, 104, 20, 0.30, 0.34),
    ]
    rating = _ratings(IEEE123_LINES, loads, 150, 4.0, stations)
    lines = []
    for a, b, ft, cfg in IEEE123_LINES:
        r, x = IEEE123_Z[cfg]
        miles = ft / 5280.0
        lines.append((a, b, r * miles / zbase / LOAD_SCALE, x * miles / zbase / LOAD_SCALE, rating[b]))
    gens = _generators(150, 66, 83, 67, SUBSTATION_MW["ieee123"])
    meta = {"name": "ieee123-modified", "base_mva": f"{base_mva:g}",
            "source": "IEEE 123-node positive-sequence reduction, loads x8, impedances /8"}
    _write("ieee123", meta, buses, lines, gens, stations)


if __name__ == "__main__":
    ieee33()
    ieee123()
