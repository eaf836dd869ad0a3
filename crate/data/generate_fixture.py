#!/usr/bin/env python3
"""Generates the bundled synthetic stress-index fixture.

The series is laid out segment by segment on business days: calm stretches
below 48 bp, mild stress bursts inside the (48, 80] band, and two severe
crises entered above 80 bp whose bodies stay above 48 bp. The segment
lengths are chosen so that a single 48 bp threshold yields five regimes of
each kind and the 48/80 hysteresis rule yields two of each, with the mean
lengths the estimation tests assert. Regenerating the file reproduces it
byte for byte (fixed RNG seed).
"""
import datetime as dt
import math, random

random.seed(20111230)

def business_days_from(start):
    d = start
    while True:
        if d.weekday() < 5:
            yield d
        d += dt.timedelta(days=1)

# single-threshold segment plan: (label, target inclusive calendar days, kind)
# kinds: n = normal, m = mild crisis (49..79, never >80), s = severe crisis
# (first day > 80, body stays > 48)
plan = [
    ("n", 349, "n"),
    ("c", 48, "m"),
    ("n", 110, "n"),
    ("c", 363, "s"),
    ("n", 138, "n"),
    ("c", 48, "m"),
    ("n", 130, "n"),
    ("c", 48, "m"),
    ("n", 140, "n"),
    ("c", 363, "s"),
]

start = dt.date(2007, 3, 26)  # Monday

rows = []
cursor = start
for (label, days, kind) in plan:
    seg_start = cursor
    while seg_start.weekday() >= 5:
        seg_start += dt.timedelta(days=1)
    seg_end_target = seg_start + dt.timedelta(days=days - 1)
    seg_end = seg_end_target
    while seg_end.weekday() >= 5:
        seg_end -= dt.timedelta(days=1)
    # collect business days of the segment
    seg_days = []
    d = seg_start
    while d <= seg_end:
        if d.weekday() < 5:
            seg_days.append(d)
        d += dt.timedelta(days=1)
    n = len(seg_days)
    for i, d in enumerate(seg_days):
        frac = i / max(n - 1, 1)
        if kind == "n":
            v = 31 + 9 * math.sin(2 * math.pi * frac * 2.3 + 1.0) + random.uniform(-3.5, 3.5)
            v = min(max(v, 17.0), 45.9)
        elif kind == "m":
            v = 57 + 14 * math.sin(math.pi * frac) + random.uniform(-3.0, 3.0)
            v = min(max(v, 49.2), 78.6)
        else:  # severe
            if i == 0:
                v = 92.0 + random.uniform(0, 8)
            else:
                peak = 265.0 if days > 300 and seg_start.year <= 2009 else 142.0
                hump = math.exp(-((frac - 0.32) ** 2) / 0.025) * peak
                tail = 58 + 22 * math.exp(-frac * 2.2)
                v = tail + hump + random.uniform(-6.0, 6.0)
                v = min(max(v, 49.6), 470.0)
        rows.append((d, round(v, 2)))
    cursor = seg_end + dt.timedelta(days=1)

rows = [r for r in rows if r[0] <= dt.date(2011, 12, 30)]

# sprinkle missing values away from segment boundaries
missing_idx = set()
i = 37
while i < len(rows) - 40:
    missing_idx.add(i)
    i += 61

with open("/root/crate/data/ted_spread.csv", "w") as f:
    f.write("date,value\n")
    for i, (d, v) in enumerate(rows):
        if i in missing_idx:
            f.write(f"{d.isoformat()},.\n")
        else:
            f.write(f"{d.isoformat()},{v}\n")

print("rows:", len(rows), "first:", rows[0][0], "last:", rows[-1][0])

# quick python re-implementation of the segmentation to sanity check
obs = [(d, v) for i, (d, v) in enumerate(rows) if i not in missing_idx]
def single(obs, lo):
    labels = ["c" if v > lo else "n" for _, v in obs]
    return segments(obs, labels)
def hyst(obs, lo, hi):
    state = "c" if obs[0][1] > hi else "n"
    labels = []
    for _, v in obs:
        if state == "n" and v > hi: state = "c"
        elif state == "c" and v < lo: state = "n"
        labels.append(state)
    return segments(obs, labels)
def segments(obs, labels):
    segs = []
    s = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[s]:
            segs.append((labels[s], obs[s][0], obs[i-1][0], (obs[i-1][0]-obs[s][0]).days + 1))
            s = i
    return segs

for name, segs in [("single48", single(obs, 48.0)), ("hyst48/80", hyst(obs, 48.0, 80.0))]:
    ns = [d for (l, _, _, d) in segs if l == "n"]
    cs = [d for (l, _, _, d) in segs if l == "c"]
    print(f"{name}: normal {len(ns)} mean {sum(ns)/len(ns):.1f}  crisis {len(cs)} mean {sum(cs)/len(cs):.1f}")
    print("   ", [(l, str(a), dd) for (l, a, b, dd) in segs][:12])
