"""Generate maps/loop_intersection.json: a figure-eight with a central crossing.

Two circular lobes (radius R, centers at (+-C, 0)) joined by two straight
diagonals that cross at the origin. Lane width W.
"""
import json
import math
import re
import sys

R = 1.0
C = 1.6
W = 0.3
ARC_SEGMENTS = 32

HW = W / 2.0
D = math.sqrt(C * C - R * R)
TH = math.asin(R / C)


def r2(p):
    return [round(p[0], 6), round(p[1], 6)]


def offset_line(a, b, hw):
    dx, dy = b[0] - a[0], b[1] - a[1]
    n = math.hypot(dx, dy)
    nx, ny = -dy / n, dx / n
    left = [[a[0] + nx * hw, a[1] + ny * hw], [b[0] + nx * hw, b[1] + ny * hw]]
    right = [[a[0] - nx * hw, a[1] - ny * hw], [b[0] - nx * hw, b[1] - ny * hw]]
    return left, [a, b], right


def arc(cx, cy, a0, sweep, ccw):
    center, left, right = [], [], []
    for k in range(ARC_SEGMENTS + 1):
        a = a0 + sweep * k / ARC_SEGMENTS * (1 if ccw else -1)
        ca, sa = math.cos(a), math.sin(a)
        center.append([cx + R * ca, cy + R * sa])
        r_left = R - HW if ccw else R + HW
        r_right = R + HW if ccw else R - HW
        left.append([cx + r_left * ca, cy + r_left * sa])
        right.append([cx + r_right * ca, cy + r_right * sa])
    return left, center, right


t1 = [D * math.cos(TH), -D * math.sin(TH)]
t2 = [D * math.cos(TH), D * math.sin(TH)]
t3 = [-D * math.cos(TH), -D * math.sin(TH)]
t4 = [-D * math.cos(TH), D * math.sin(TH)]
sweep = math.pi + 2 * TH

lanelets = []
l, c, r = offset_line(t4, t1, HW)
lanelets.append(("diag_down", l, c, r, ["lobe_east"]))
l, c, r = arc(C, 0.0, math.atan2(-D, -R), sweep, True)
lanelets.append(("lobe_east", l, c, r, ["diag_up"]))
l, c, r = offset_line(t2, t3, HW)
lanelets.append(("diag_up", l, c, r, ["lobe_west"]))
l, c, r = arc(-C, 0.0, math.atan2(-D, R), sweep, False)
lanelets.append(("lobe_west", l, c, r, ["diag_down"]))

def lanelet_doc(i, l, c, r, s):
    left = [r2(p) for p in l]
    right = [r2(p) for p in r]
    center = [r2(p) for p in c]
    # centerline ends sit exactly on the lane's end edges; the midpoint of two
    # 6-decimal values is exact at 7 decimals
    for k in (0, -1):
        center[k] = [round((left[k][j] + right[k][j]) / 2, 7) for j in (0, 1)]
    return {"id": i, "left": left, "right": right, "center": center, "successors": s}


doc = {
    "lanelets": [lanelet_doc(*x) for x in lanelets],
    "reference_paths": [
        {"name": "figure_eight", "lanelets": ["diag_down", "lobe_east", "diag_up", "lobe_west"]}
    ],
}
text = json.dumps(doc, indent=2)
# keep [x, y] pairs on one line
text = re.sub(r"\[\s+(-?[0-9.e-]+),\s+(-?[0-9.e-]+)\s+\]", r"[\1, \2]", text)
sys.stdout.write(text + "\n")
