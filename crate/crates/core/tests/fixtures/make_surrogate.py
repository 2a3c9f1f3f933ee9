"""Writes surrogate_rooms.txt: synthetic WiFi fingerprints in the benchmark text layout.

Four rooms, seven access points, 500 samples per room. Each sample is taken at a random point
inside its room; each AP's level follows a log-distance path-loss model with per-AP transmit
power, a per-room wall attenuation and Gaussian shadowing, rounded to integer dBm. The file is a
stand-in for pipeline tests only; its numbers say nothing about the real benchmark.

    python3 make_surrogate.py > surrogate_rooms.txt
"""

import numpy as np

rng = np.random.default_rng(20240521)

# room rectangles (x0, y0, x1, y1) in metres, laid out as a 2x2 block with a corridor
rooms = [(0, 0, 8, 7), (9, 0, 17, 7), (0, 8, 8, 15), (9, 8, 17, 15)]
aps = np.array([[2, 3], [14, 2], [4, 12], [15, 13], [8.5, 7.5], [-3, 7], [20, 8]], dtype=float)
tx = np.array([-38, -40, -36, -42, -45, -39, -41], dtype=float)
exponent = 3.0
shadow_db = 4.5

def room_of(p):
    for r, (x0, y0, x1, y1) in enumerate(rooms):
        if x0 <= p[0] <= x1 and y0 <= p[1] <= y1:
            return r
    return -1

# extra loss for each wall crossed between the AP's room and the sample's room
ap_rooms = [room_of(a) for a in aps]
wall_db = 6.0

lines = []
for label, (x0, y0, x1, y1) in enumerate(rooms, start=1):
    for _ in range(500):
        p = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
        d = np.maximum(np.linalg.norm(aps - p, axis=1), 0.5)
        walls = np.array([0.0 if ar == label - 1 else wall_db for ar in ap_rooms])
        rss = tx - 10 * exponent * np.log10(d) - walls + rng.normal(0, shadow_db, len(aps))
        rss = np.clip(np.round(rss), -100, -10).astype(int)
        lines.append("\t".join(str(v) for v in rss) + f"\t{label}")

print("\n".join(lines))
