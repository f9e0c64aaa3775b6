#!/usr/bin/env python3
"""Regenerate the bundled hand-spec JSON files.

Links are approximated by boxes; each hand gets 512 surface sample points
allocated across links proportionally to box area. Output is deterministic.

    python3 scripts/make_hand_specs.py crates/core/assets/hands
"""

import json
import math
import sys
from pathlib import Path

import numpy as np

TOTAL_POINTS = 512


class Spec:
    def __init__(self, name, display, hand_class):
        self.name = name
        self.display = display
        self.hand_class = hand_class
        self.joints = []
        self.links = []
        self.mimic = []

    def link(self, name, finger, box=None):
        self.links.append({"name": name, "finger": finger, "box": box})

    def joint(self, name, parent, child, jtype, axis, xyz, rpy=(0, 0, 0), limits=(0, 0)):
        self.joints.append(
            {
                "name": name,
                "parent": parent,
                "child": child,
                "type": jtype,
                "axis": list(axis),
                "origin": {"xyz": list(xyz), "rpy": list(rpy)},
                "limits": list(limits),
            }
        )

    def dof(self):
        mimicked = {m["joint"] for m in self.mimic}
        return sum(1 for j in self.joints if j["type"] != "fixed" and j["name"] not in mimicked)


def box_faces(lo, hi):
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    ext = hi - lo
    faces = []
    for axis in range(3):
        u, v = [a for a in range(3) if a != axis]
        area = ext[u] * ext[v]
        for side in (lo[axis], hi[axis]):
            faces.append((axis, side, u, v, area))
    return faces


def box_area(box):
    return sum(f[4] for f in box_faces(*box))


def sample_box(box, n, rng):
    lo, hi = (np.asarray(b, float) for b in box)
    faces = box_faces(lo, hi)
    areas = np.array([f[4] for f in faces])
    choice = rng.choice(len(faces), size=n, p=areas / areas.sum())
    pts = []
    for c in choice:
        axis, side, u, v, _ = faces[c]
        p = np.zeros(3)
        p[axis] = side
        p[u] = lo[u] + rng.random() * (hi[u] - lo[u])
        p[v] = lo[v] + rng.random() * (hi[v] - lo[v])
        pts.append([round(float(x), 6) for x in p])
    return pts


def allocate(areas, total):
    raw = [a / sum(areas) * total for a in areas]
    counts = [int(math.floor(r)) for r in raw]
    rem = total - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:rem]:
        counts[i] += 1
    return counts


def finish(spec, seed):
    rng = np.random.default_rng(seed)
    boxed = [l for l in spec.links if l["box"] is not None]
    counts = allocate([box_area(l["box"]) for l in boxed], TOTAL_POINTS)
    links = []
    it = iter(counts)
    for l in spec.links:
        pts = sample_box(l["box"], next(it), rng) if l["box"] is not None else []
        links.append({"name": l["name"], "finger": l["finger"], "sample_points": pts})
    return {
        "name": spec.name,
        "display_name": spec.display,
        "class": spec.hand_class,
        "dof": spec.dof(),
        "joints": spec.joints,
        "links": links,
        "mimic": spec.mimic,
    }


def phalanx(length, width=0.02, thickness=0.02):
    return ([-width / 2, -thickness / 2, 0.0], [width / 2, thickness / 2, length])


# Convention: wrist frame at the palm base, fingers extend along +z, the palm
# front faces +y. Flexion about (-1, 0, 0) curls a finger toward +y.
CURL = (-1.0, 0.0, 0.0)


def allegro():
    s = Spec("allegro", "Allegro Hand", "dexterous")
    s.link("palm", "palm", ([-0.06, -0.015, 0.0], [0.06, 0.015, 0.095]))
    lengths = [0.0164, 0.054, 0.0384, 0.0467]
    finger_limits = [(-0.47, 0.47), (-0.196, 1.61), (-0.174, 1.709), (-0.227, 1.618)]
    for finger, x in (("index", 0.045), ("middle", 0.0), ("ring", -0.045)):
        parent = "palm"
        for k in range(4):
            child = f"{finger}_link_{k}"
            s.link(child, finger, phalanx(lengths[k]) if k > 0 else None)
            xyz = (x, 0.0, 0.095) if k == 0 else (0.0, 0.0, lengths[k - 1])
            axis = (0.0, 1.0, 0.0) if k == 0 else CURL
            s.joint(f"{finger}_joint_{k}", parent, child, "revolute", axis, xyz, limits=finger_limits[k])
            parent = child
    thumb_lengths = [0.0, 0.0554, 0.0514, 0.0423]
    thumb_limits = [(0.263, 1.396), (-0.105, 1.163), (-0.189, 1.644), (-0.162, 1.719)]
    parent = "palm"
    for k in range(4):
        child = f"thumb_link_{k}"
        s.link(child, "thumb", phalanx(thumb_lengths[k]) if thumb_lengths[k] > 0 else None)
        if k == 0:
            xyz, rpy, axis = (0.045, 0.025, 0.02), (0.0, 0.6, 0.0), (0.0, 0.0, 1.0)
        else:
            xyz, rpy, axis = (0.0, 0.0, thumb_lengths[k - 1]), (0.0, 0.0, 0.0), CURL
        s.joint(f"thumb_joint_{k}", parent, child, "revolute", axis, xyz, rpy, thumb_limits[k])
        parent = child
    return finish(s, 1)


def shadow():
    s = Spec("shadow", "Shadow Hand", "dexterous")
    s.link("palm", "palm", ([-0.042, -0.0165, 0.0], [0.042, 0.0165, 0.095]))
    seg = [0.0, 0.045, 0.025, 0.026]
    lim = [(-0.349, 0.349), (-0.262, 1.571), (0.0, 1.571), (0.0, 1.571)]
    for finger, prefix, x in (("index", "ff", 0.033), ("middle", "mf", 0.011), ("ring", "rf", -0.011)):
        parent = "palm"
        for k in range(4):
            child = f"{prefix}_link_{k}"
            s.link(child, finger, phalanx(seg[k], 0.018, 0.018) if seg[k] > 0 else None)
            xyz = (x, 0.0, 0.095) if k == 0 else (0.0, 0.0, seg[k - 1])
            axis = (0.0, 1.0, 0.0) if k == 0 else CURL
            s.joint(f"{prefix}_j{4 - k}", parent, child, "revolute", axis, xyz, limits=lim[k])
            parent = child
    # little finger carries an extra metacarpal joint
    s.link("lf_metacarpal", "little", phalanx(0.03, 0.018, 0.018))
    s.joint("lf_j5", "palm", "lf_metacarpal", "revolute", (0.0, 0.0, 1.0), (-0.033, 0.0, 0.065), limits=(0.0, 0.785))
    parent = "lf_metacarpal"
    for k in range(4):
        child = f"lf_link_{k}"
        s.link(child, "little", phalanx(seg[k], 0.018, 0.018) if seg[k] > 0 else None)
        xyz = (0.0, 0.0, 0.03) if k == 0 else (0.0, 0.0, seg[k - 1])
        axis = (0.0, 1.0, 0.0) if k == 0 else CURL
        s.joint(f"lf_j{4 - k}", parent, child, "revolute", axis, xyz, limits=lim[k])
        parent = child
    th_seg = [0.0, 0.038, 0.0, 0.032, 0.0275]
    th_axes = [(0.0, 0.0, 1.0), (0.0, 1.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), CURL]
    th_lim = [(-1.047, 1.047), (0.0, 1.222), (-0.209, 0.209), (-0.524, 0.524), (-0.262, 1.571)]
    parent = "palm"
    for k in range(5):
        child = f"th_link_{k}"
        s.link(child, "thumb", phalanx(th_seg[k], 0.02, 0.02) if th_seg[k] > 0 else None)
        if k == 0:
            xyz, rpy = (0.034, 0.0085, 0.029), (0.0, 0.785, 0.0)
        else:
            xyz, rpy = (0.0, 0.0, th_seg[k - 1]), (0.0, 0.0, 0.0)
        s.joint(f"th_j{5 - k}", parent, child, "revolute", th_axes[k], xyz, rpy, th_lim[k])
        parent = child
    return finish(s, 2)


def barrett():
    s = Spec("barrett", "Barrett Hand", "dexterous")
    s.link("palm", "palm", ([-0.045, -0.045, 0.0], [0.045, 0.045, 0.08]))
    prox, dist = 0.07, 0.056
    # fingers 1 and 2 sit on the +y side and curl toward -y; the fixed thumb opposes them
    for finger, x, spread_axis in (("index", 0.025, (0.0, 0.0, 1.0)), ("middle", -0.025, (0.0, 0.0, -1.0))):
        s.link(f"{finger}_base", finger, None)
        s.link(f"{finger}_proximal", finger, phalanx(prox, 0.025, 0.02))
        s.link(f"{finger}_distal", finger, phalanx(dist, 0.022, 0.018))
        s.joint(f"{finger}_spread", "palm", f"{finger}_base", "revolute", spread_axis, (x, 0.025, 0.08), limits=(0.0, math.pi))
        s.joint(f"{finger}_flex", f"{finger}_base", f"{finger}_proximal", "revolute", (1.0, 0.0, 0.0), (0.0, 0.0, 0.0), limits=(0.0, 2.44))
        s.joint(f"{finger}_tip", f"{finger}_proximal", f"{finger}_distal", "revolute", (1.0, 0.0, 0.0), (0.0, 0.0, prox), limits=(0.0, 0.84))
    s.link("thumb_proximal", "thumb", phalanx(prox, 0.025, 0.02))
    s.link("thumb_distal", "thumb", phalanx(dist, 0.022, 0.018))
    s.joint("thumb_flex", "palm", "thumb_proximal", "revolute", CURL, (0.0, -0.025, 0.08), limits=(0.0, 2.44))
    s.joint("thumb_tip", "thumb_proximal", "thumb_distal", "revolute", CURL, (0.0, 0.0, prox), limits=(0.0, 0.84))
    s.mimic = [
        {"joint": "middle_spread", "source": "index_spread", "ratio": 1.0},
        {"joint": "index_tip", "source": "index_flex", "ratio": 0.3333},
        {"joint": "middle_tip", "source": "middle_flex", "ratio": 0.3333},
        {"joint": "thumb_tip", "source": "thumb_flex", "ratio": 0.3333},
    ]
    return finish(s, 3)


def jaco():
    s = Spec("jaco", "Jaco Hand", "dexterous")
    s.link("palm", "palm", ([-0.04, -0.04, 0.0], [0.04, 0.04, 0.09]))
    prox, dist = 0.044, 0.04
    for finger, xy, axis in (
        ("thumb", (0.0, -0.03), CURL),
        ("index", (0.02, 0.03), (1.0, 0.0, 0.0)),
        ("middle", (-0.02, 0.03), (1.0, 0.0, 0.0)),
    ):
        s.link(f"{finger}_proximal", finger, phalanx(prox, 0.022, 0.012))
        s.link(f"{finger}_distal", finger, phalanx(dist, 0.02, 0.01))
        s.joint(f"{finger}_joint", "palm", f"{finger}_proximal", "revolute", axis, (xy[0], xy[1], 0.09), limits=(0.0, 1.51))
        s.joint(f"{finger}_tip_joint", f"{finger}_proximal", f"{finger}_distal", "revolute", axis, (0.0, 0.0, prox), limits=(0.0, 2.0))
        s.mimic.append({"joint": f"{finger}_tip_joint", "source": f"{finger}_joint", "ratio": 1.0})
    return finish(s, 4)


def panda():
    s = Spec("panda", "Panda Gripper", "gripper")
    s.link("hand", "palm", ([-0.03, -0.1, 0.0], [0.03, 0.1, 0.058]))
    s.link("left_finger", "left", ([0.0, -0.01, 0.0], [0.012, 0.01, 0.054]))
    s.link("right_finger", "right", ([-0.012, -0.01, 0.0], [0.0, 0.01, 0.054]))
    s.joint("finger_joint1", "hand", "left_finger", "prismatic", (1.0, 0.0, 0.0), (0.0, 0.0, 0.058), limits=(0.0, 0.04))
    s.joint("finger_joint2", "hand", "right_finger", "prismatic", (-1.0, 0.0, 0.0), (0.0, 0.0, 0.058), limits=(0.0, 0.04))
    s.mimic = [{"joint": "finger_joint2", "source": "finger_joint1", "ratio": 1.0}]
    return finish(s, 5)


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "crates/core/assets/hands")
    out.mkdir(parents=True, exist_ok=True)
    for build in (allegro, shadow, barrett, jaco, panda):
        spec = build()
        total = sum(len(l["sample_points"]) for l in spec["links"])
        assert total == TOTAL_POINTS, (spec["name"], total)
        path = out / f"{spec['name']}.json"
        path.write_text(json.dumps(spec, indent=1) + "\n")
        print(f"{path}: dof={spec['dof']} links={len(spec['links'])}")


if __name__ == "__main__":
    main()
