#!/usr/bin/env python3
"""Writes the BVH corpus, the forward-kinematics oracle and the demo show.

Deterministic: re-running reproduces every file byte for byte.

    python3 tools/gen_fixtures.py
"""

import json
import math
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "crates" / "castelet" / "tests" / "fixtures"
DEMO = ROOT / "shows" / "demo"


# ---------------------------------------------------------------- BVH writing

class J:
    def __init__(self, name, offset, channels, children=(), end=None):
        self.name, self.offset, self.channels = name, offset, channels
        self.children, self.end = list(children), end


def walk(j, parent=None, out=None):
    out = [] if out is None else out
    out.append((j, parent))
    for c in j.children:
        walk(c, j, out)
    return out


def fmt(v, digits=None):
    if digits is None:
        return repr(float(v))
    s = f"{v:.{digits}f}"
    return "0." + "0" * digits if s == "-0." + "0" * digits else s


def write_hierarchy(j, lines, depth=0, indent="\t", root=True):
    pad = indent * depth
    lines.append(f"{pad}{'ROOT' if root else 'JOINT'} {j.name}")
    lines.append(pad + "{")
    lines.append(f"{pad}{indent}OFFSET {' '.join(fmt(v, 6) for v in j.offset)}")
    lines.append(f"{pad}{indent}CHANNELS {len(j.channels)} {' '.join(j.channels)}")
    for c in j.children:
        write_hierarchy(c, lines, depth + 1, indent, False)
    if j.end is not None:
        lines += [f"{pad}{indent}End Site", pad + indent + "{",
                  f"{pad}{indent * 2}OFFSET {' '.join(fmt(v, 6) for v in j.end)}", pad + indent + "}"]
    lines.append(pad + "}")


def write_bvh(path, root, frame_time, rows, digits=None, indent="\t", newline="\n", frame_time_text=None):
    lines = ["HIERARCHY"]
    write_hierarchy(root, lines, 0, indent)
    lines += ["MOTION", f"Frames: {len(rows)}", f"Frame Time: {frame_time_text or fmt(frame_time, 6)}"]
    lines += [" ".join(fmt(v, digits) for v in r) for r in rows]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes((newline.join(lines) + newline).encode())


# ----------------------------------------------------------- corpus skeletons

YXZ = ["Yrotation", "Xrotation", "Zrotation"]
ZXY = ["Zrotation", "Xrotation", "Yrotation"]
POS = ["Xposition", "Yposition", "Zposition"]


def neuron_arm(side, sx):
    n = f"{side}"
    fingers = []
    for k, (f, dz) in enumerate([("Index", 2.0), ("Middle", 0.5), ("Ring", -1.0), ("Pinky", -2.4)]):
        fingers.append(J(f"{n}InHand{f}", (sx * 1.2, 0.0, dz), YXZ, [
            J(f"{n}Hand{f}1", (sx * 6.5, 0.0, 0.2 * k), YXZ, [
                J(f"{n}Hand{f}2", (sx * 3.5, 0.0, 0.0), YXZ, [
                    J(f"{n}Hand{f}3", (sx * 2.2, 0.0, 0.0), YXZ, end=(sx * 1.8, 0.0, 0.0))])])]))
    thumb = J(f"{n}HandThumb1", (sx * 2.0, -0.5, 2.5), YXZ, [
        J(f"{n}HandThumb2", (sx * 3.0, 0.0, 1.2), YXZ, [
            J(f"{n}HandThumb3", (sx * 2.5, 0.0, 0.6), YXZ, end=(sx * 2.0, 0.0, 0.3))])])
    return J(f"{n}Shoulder", (sx * 3.5, 8.0, 0.0), YXZ, [
        J(f"{n}Arm", (sx * 13.0, 0.0, 0.0), YXZ, [
            J(f"{n}ForeArm", (sx * 28.0, 0.0, 0.0), YXZ, [
                J(f"{n}Hand", (sx * 24.0, 0.0, 0.0), YXZ, [thumb] + fingers)])])])


def neuron_leg(side, sx):
    return J(f"{side}UpLeg", (sx * 9.0, 0.0, 0.0), YXZ, [
        J(f"{side}Leg", (0.0, -44.0, 0.0), YXZ, [
            J(f"{side}Foot", (0.0, -42.0, 0.0), YXZ, end=(0.0, -6.0, 14.0))])])


def neuron59():
    head = J("Neck", (0.0, 14.0, 0.0), YXZ, [J("Head", (0.0, 9.0, 0.0), YXZ, end=(0.0, 18.0, 0.0))])
    spine3 = J("Spine3", (0.0, 10.0, 0.0), YXZ, [head, neuron_arm("Right", -1), neuron_arm("Left", 1)])
    spine = J("Spine", (0.0, 11.0, 0.0), YXZ, [
        J("Spine1", (0.0, 10.0, 0.0), YXZ, [J("Spine2", (0.0, 10.0, 0.0), YXZ, [spine3])])])
    return J("Hips", (0.0, 0.0, 0.0), POS + YXZ, [neuron_leg("Right", -1), neuron_leg("Left", 1), spine])


def cmu_like():
    def chain(names, offs, end):
        node = None
        for n, o in reversed(list(zip(names, offs))):
            node = J(n, o, ZXY, [node] if node else [], end if node is None else None)
        return node
    lleg = chain(["LHipJoint", "LeftUpLeg", "LeftLeg", "LeftFoot", "LeftToeBase"],
                 [(0, 0, 0), (8.9, -8.2, 3.2), (0, -17.0, 0), (0, -17.4, 0), (0, -1.5, 5.6)], (0, 0, 2.4))
    rleg = chain(["RHipJoint", "RightUpLeg", "RightLeg", "RightFoot", "RightToeBase"],
                 [(0, 0, 0), (-8.9, -8.2, 3.2), (0, -17.0, 0), (0, -17.4, 0), (0, -1.5, 5.6)], (0, 0, 2.4))
    larm = chain(["LeftShoulder", "LeftArm", "LeftForeArm", "LeftHand"],
                 [(0, 0, 0), (7.6, 4.0, 0), (12.1, 0, 0), (8.4, 0, 0)], (5.0, 0, 0))
    rarm = chain(["RightShoulder", "RightArm", "RightForeArm", "RightHand"],
                 [(0, 0, 0), (-7.6, 4.0, 0), (-12.1, 0, 0), (-8.4, 0, 0)], (-5.0, 0, 0))
    neck = chain(["Neck", "Neck1", "Head"], [(0, 3.8, 0), (0, 1.8, 0), (0, 1.8, 0)], (0, 3.4, 0))
    spine1 = J("Spine1", (0, 2.1, 0), ZXY, [neck, larm, rarm])
    spine = J("Spine", (0, 2.1, 0), ZXY, [spine1])
    lower = J("LowerBack", (0, 0, 0), ZXY, [spine])
    return J("Hips", (0, 0, 0), POS + ZXY, [lleg, rleg, lower])


def mixed_orders():
    tail = J("Tail", (0, 0, -12.5), ["Xrotation", "Yrotation", "Zrotation"], end=(0, 0, -10))
    wing = J("Wing", (15, 3, 0), POS + ["Zrotation", "Yrotation", "Xrotation"],
             [J("WingTip", (20, 0, 0), ["Yrotation", "Zrotation", "Xrotation"], end=(12, 0, 0))])
    neck = J("Neck", (0, 5, 10), ["Xrotation", "Zrotation", "Yrotation"],
             [J("Beak", (0, 2, 6), ["Zrotation", "Yrotation", "Xrotation"], end=(0, 0, 4))])
    return J("Body", (0, 40, 0), POS + ["Yrotation", "Zrotation", "Xrotation"], [tail, wing, neck])


def motion(root, frames, rng, amp_rot=35.0, amp_pos=(5.0, 2.0, 20.0), base=(0.0, 95.0, 0.0)):
    joints = walk(root)
    t = np.arange(frames)[:, None]
    cols = []
    for j, _ in joints:
        for c in j.channels:
            phase, freq = rng.uniform(0, 2 * np.pi), rng.uniform(0.02, 0.12)
            if c.endswith("position"):
                k = "XYZ".index(c[0])
                cols.append(base[k] * (j.name == root.name) + amp_pos[k] * np.sin(freq * t + phase))
            else:
                cols.append(rng.uniform(0.3, 1.0) * amp_rot * np.sin(freq * t + phase) + rng.uniform(-20, 20))
    return np.hstack(cols)


# ---------------------------------------------------------------- FK oracle

def axis_matrix(axis, deg):
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return {"X": np.array([[1, 0, 0], [0, c, -s], [0, s, c]]),
            "Y": np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]]),
            "Z": np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])}[axis]


def fk_positions(root, row, unit_scale):
    """Dense 4x4 products: root at offset + translation, rotations in channel order."""
    world, out, col = {}, {}, 0
    for j, parent in walk(root):
        r, t = np.eye(3), np.zeros(3)
        for c in j.channels:
            if c.endswith("rotation"):
                r = r @ axis_matrix(c[0], row[col])
            elif parent is None:
                t["XYZ".index(c[0])] = row[col]
            col += 1
        m = np.eye(4)
        m[:3, :3] = r
        m[:3, 3] = (np.array(j.offset) + t) * unit_scale
        world[j.name] = m if parent is None else world[parent.name] @ m
        out[j.name] = world[j.name][:3, 3].tolist()
    return out


# ------------------------------------------------------------- demo show rig

def flat_rig():
    def arm(p, sx):
        return J(f"{p}_shoulder", (sx * 8, 17, 0), ZXY, [
            J(f"{p}_upperarm", (sx * 10, 0, 0), ZXY, [
                J(f"{p}_forearm", (0, -28, 0), ZXY, [
                    J(f"{p}_hand", (0, -25, 0), ZXY, end=(0, -15, 0))])])])

    def leg(p, sx):
        return J(f"{p}_thigh", (sx * 9, 0, 0), ZXY, [
            J(f"{p}_shin", (0, -45, 0), ZXY, [
                J(f"{p}_foot", (0, -43, 0), ZXY, end=(sx * 6, -8, 0))])])

    chest = J("chest", (0, 20, 0), ZXY, [
        J("neck", (0, 20, 0), ZXY, [J("head", (0, 10, 0), ZXY, end=(0, 20, 0))]), arm("l", 1), arm("r", -1)])
    return J("pelvis", (0, 0, 0), POS + ZXY, [J("spine", (0, 10, 0), ZXY, [chest]), leg("l", 1), leg("r", -1)])


HALF_OUTLINE = [  # left half, cm, from the crotch down the inner leg round to the crown
    (0, -6), (4, -12), (5, -45), (5, -86), (4, -96), (17, -96), (16, -91), (14, -86), (14, -45),
    (13, -5), (12, 18), (13, 38), (15, 30), (15, 5), (15, -6), (14, -20), (17, -24), (22, -20),
    (21, -6), (21, 19), (22, 45), (19, 51), (9, 52), (4, 54), (4, 60), (8, 64), (9, 72), (6, 79), (0, 82),
]


def seg_dist(p, a, b):
    ab, ap = b - a, p - a
    t = np.clip(ap @ ab / (ab @ ab), 0.0, 1.0)
    return np.linalg.norm(ap - t * ab)


def flat_mesh(root):
    rest, pos = walk(root), {}
    for j, parent in rest:
        pos[j.name] = (pos[parent.name] if parent else np.zeros(3)) + np.array(j.offset, float)
    bones = []
    for j, parent in rest:
        ends = [pos[c.name] for c in j.children] or [pos[j.name] + np.array(j.end, float)]
        bones += [(j.name, pos[j.name][:2], e[:2]) for e in ends]
    left = [np.array(p, float) for p in HALF_OUTLINE]
    right = [np.array((-x, y)) for x, y in reversed(HALF_OUTLINE[1:-1])]
    outline = left + right
    vertices, weights = [], []
    for v in outline:
        d = sorted((seg_dist(v, a, b), name) for name, a, b in bones)
        best = {}
        for dist, name in d:
            best.setdefault(name, dist)
        (d0, n0), (d1, n1) = sorted((v_, k) for k, v_ in best.items())[:2]
        w0, w1 = 1 / (d0 + 1.0) ** 2, 1 / (d1 + 1.0) ** 2
        w0, w1 = w0 / (w0 + w1), 1.0 - w0 / (w0 + w1)
        vertices.append([round(v[0] / 100, 4), round(v[1] / 100, 4)])
        weights.append([[n0, w0], [n1, w1]])
    return {"vertices": vertices, "polygons": [list(range(len(vertices)))], "weights": weights}


FLAT_ORDER = [j.name for j, _ in walk(flat_rig())]


def flat_row(pose):
    """pose: {"root": (x, y, z), joint: (z, x, y) degrees}."""
    row = list(pose.get("root", (0.0, 96.0, 0.0)))
    for name in FLAT_ORDER:
        row += list(pose.get(name, (0.0, 0.0, 0.0)))
    return [float(v) for v in row]


def smooth(a, b, n, bump=None):
    """n rows from a to b inclusive with smoothstep easing; optional mid-way bump row."""
    a, b = np.array(a), np.array(b)
    rows = []
    for i in range(n):
        u = i / (n - 1)
        s = u * u * (3 - 2 * u)
        r = a + (b - a) * s
        if bump is not None:
            r = r + np.array(bump) * math.sin(math.pi * u)
        rows.append([float(x) for x in r])
    rows[0], rows[-1] = list(a), list(b)
    return rows


def demo_clips():
    up = (0.0, 96.0, 0.0)
    stand_a = {"l_upperarm": (6, 0, 0), "r_upperarm": (-6, 0, 0)}
    stand_b = {"l_upperarm": (3, 0, 0), "r_upperarm": (-8, 0, 0), "spine": (2, 0, 0), "head": (-4, 0, 0),
               "root": (1.5, 96.0, 0.0)}
    raised_a = {"l_upperarm": (150, 0, 0), "l_forearm": (10, 0, 0), "r_upperarm": (-10, 0, 0), "head": (6, 0, 0)}
    raised_b = {"l_upperarm": (140, 0, 0), "l_forearm": (25, 0, 0), "r_upperarm": (-14, 0, 0), "head": (3, 0, 0),
                "spine": (-3, 0, 0)}
    kneel_a = {"root": (0.0, 70.0, 0.0), "l_thigh": (70, 0, 0), "l_shin": (-95, 0, 0), "r_thigh": (-15, 0, 0),
               "r_shin": (-60, 0, 0), "l_upperarm": (20, 0, 0), "r_upperarm": (-20, 0, 0)}
    kneel_b = dict(kneel_a, head=(-8, 0, 0), spine=(4, 0, 0), root=(0.0, 69.0, 0.0))
    bow = {"spine": (0, 35, 0), "chest": (0, 15, 0), "head": (0, 10, 0), "root": up}
    rows = {k: flat_row(v) for k, v in dict(stand_a=stand_a, stand_b=stand_b, raised_a=raised_a,
                                            raised_b=raised_b, kneel_a=kneel_a, kneel_b=kneel_b).items()}
    mid = np.array(flat_row(bow)) - (np.array(rows["stand_a"]) + np.array(rows["stand_b"])) / 2
    return [
        ("idle_stand", "idle", smooth(rows["stand_a"], rows["stand_b"], 61), None),
        ("idle_raised", "idle", smooth(rows["raised_a"], rows["raised_b"], 61), None),
        ("idle_kneel", "idle", smooth(rows["kneel_a"], rows["kneel_b"], 61), None),
        ("act_raise", "action", smooth(rows["stand_b"], rows["raised_a"], 46), ("idle_stand", "idle_raised")),
        ("act_lower", "action", smooth(rows["raised_b"], rows["stand_a"], 46), ("idle_raised", "idle_stand")),
        ("act_bow", "action", smooth(rows["stand_b"], rows["stand_a"], 61, mid.tolist()), ("idle_stand", "idle_stand")),
        ("act_kneel", "action", smooth(rows["stand_b"], rows["kneel_a"], 46), ("idle_stand", "idle_kneel")),
        ("act_rise", "action", smooth(rows["kneel_b"], rows["stand_a"], 46), ("idle_kneel", "idle_stand")),
    ]


LIVE_MAP = [("Hips", "pelvis"), ("Spine", "spine"), ("Spine2", "chest"), ("Neck", "neck"), ("Head", "head")] + [
    (f"{S}{a}", f"{s}_{b}") for S, s in (("Left", "l"), ("Right", "r"))
    for a, b in (("Shoulder", "shoulder"), ("Arm", "upperarm"), ("ForeArm", "forearm"), ("Hand", "hand"),
                 ("UpLeg", "thigh"), ("Leg", "shin"), ("Foot", "foot"))]


def demo_show():
    oavs = []
    for i, (oid, x) in enumerate([("scholar", -2.6), ("shadow", -1.5), ("princess", 0.0),
                                  ("neighbour", 1.5), ("narrator", 3.0)]):
        o = {"id": oid, "rig": "flat", "initial_idle": "idle_stand", "position": [x, 0.0, -0.5],
             "yaw": 0.0, "visible": False, "casts_shadow": True, "tint": [0.92, 0.9, 0.85, 1.0]}
        if oid == "narrator":
            o.update(position=[2.8, 0.0, 1.2], visible=True, casts_shadow=False, tint=[0.25, 0.22, 0.3, 1.0])
        if oid == "shadow":
            o["live"] = {"source_skeleton": "rigs/neuron59.bvh", "unit_scale": 0.01,
                         "map": {"entries": [{"source_joint": s, "target_joint": t} for s, t in LIVE_MAP],
                                 "root_translation_scale": 1.0}}
        oavs.append(o)

    def eff(kind, **kw):
        return {"step": "effect", "effect": dict(effect=kind, **kw)}

    cues = [
        {"label": "Shadows wake", "steps": [
            {"step": "trigger", "oav": "scholar", "action": "act_bow"},
            {"step": "wait", "seconds": 0.5},
            {"step": "trigger", "oav": "princess", "action": "act_raise"}]},
        {"label": "The scholar peels his shadow", "steps": [
            eff("set_visible", oav="scholar", visible=True),
            eff("move_oav", oav="scholar", position=[-1.0, 0.0, 0.6], yaw=0.35),
            {"step": "trigger", "oav": "scholar", "action": "act_kneel"}]},
        {"label": "Princess lowers her arm", "steps": [
            {"step": "trigger", "oav": "princess", "action": "act_lower"},
            {"step": "trigger", "oav": "neighbour", "action": "act_raise"}]},
        {"label": "The lamp moves", "steps": [
            eff("move_light", light="key", position=[0.8, 1.6, 2.2]),
            eff("set_translucency", screen="backdrop", translucency=0.45),
            {"step": "trigger", "oav": "neighbour", "action": "act_lower"}]},
        {"label": "The shadow comes alive", "steps": [
            {"step": "set_live", "oav": "shadow", "on": True},
            {"step": "trigger", "oav": "scholar", "action": "act_rise"}]},
        {"label": "Curtain", "steps": [
            {"step": "set_live", "oav": "shadow", "on": False},
            {"step": "suspend", "oav": "neighbour"},
            eff("set_casts_shadow", oav="princess", casts_shadow=False),
            {"step": "wait", "seconds": 1.0},
            {"step": "trigger", "oav": "scholar", "action": "act_bow"}]},
    ]
    return {
        "title": "The Shadow, five shadows becoming avatars",
        "tick_rate": 60.0,
        "fade": 0.4,
        "chain_tolerance": 0.05,
        "spaces": {"A": "physical stage with the reading performer",
                   "C": "mocaptor area, stage left, hidden",
                   "E": "audience"},
        "stage": {"min": [-5.0, 0.0, -2.0], "max": [5.0, 4.0, 3.0]},
        "camera": {"projection": {"kind": "perspective", "fov_y": 0.8726646259971648},
                   "position": [0.0, 1.4, 8.0], "look": [0.0, -0.05, -1.0], "up": [0.0, 1.0, 0.0],
                   "viewport": [1280.0, 720.0]},
        "screens": [{"name": "backdrop", "normal": [0.0, 0.0, 1.0], "d": -1.5,
                     "bounds": [[-4.0, 0.0, -1.5], [4.0, 0.0, -1.5], [4.0, 3.0, -1.5], [-4.0, 3.0, -1.5]],
                     "translucency": 0.7}],
        "lights": [{"name": "key", "position": [0.0, 1.5, 2.0], "enabled": True},
                   {"name": "side", "position": [-3.0, 2.5, 1.0], "enabled": False}],
        "rigs": {"flat": {"skeleton": "rigs/flat.bvh", "mesh": "rigs/flat.mesh.json", "unit_scale": 0.01}},
        "oavs": oavs,
        "cues": cues,
    }


def main():
    rng = np.random.RandomState(20190401)

    neuron = neuron59()
    assert len(walk(neuron)) == 59
    rows = motion(neuron, 120, rng)
    write_bvh(CORPUS / "neuron59.bvh", neuron, 1 / 60, rows, digits=6, frame_time_text="0.016667")
    frame0 = [float(f"{v:.6f}") for v in rows[0]]
    oracle = {"file": "neuron59.bvh", "frame": 0, "unit_scale": 0.01,
              "joints": len(walk(neuron)), "channels": sum(len(j.channels) for j, _ in walk(neuron)),
              "frames": len(rows), "positions": fk_positions(neuron, frame0, 0.01)}
    (CORPUS / "neuron59.fk.json").write_text(json.dumps(oracle, indent=1) + "\n")

    cmu = cmu_like()
    write_bvh(CORPUS / "cmu_like_zxy.bvh", cmu, 1 / 120, motion(cmu, 90, rng, amp_rot=60.0, base=(0, 17, 0)),
              digits=4, indent="  ", frame_time_text="0.008333")
    bird = mixed_orders()
    write_bvh(CORPUS / "mixed_orders_crlf.bvh", bird, 1 / 30, motion(bird, 40, rng, amp_rot=170.0, base=(0, 0, 0)),
              digits=5, indent="\t", newline="\r\n", frame_time_text="0.033333")

    # Demo show.
    rig = flat_rig()
    assert len(walk(rig)) == 19
    write_bvh(DEMO / "rigs" / "flat.bvh", rig, 1 / 30, [flat_row({})])
    write_bvh(DEMO / "rigs" / "neuron59.bvh", neuron, 1 / 60, [rows[0].tolist()], digits=6)
    (DEMO / "rigs" / "flat.mesh.json").write_text(json.dumps(flat_mesh(rig)) + "\n")
    for cid, kind, clip_rows, idles in demo_clips():
        write_bvh(DEMO / "clips" / f"{cid}.bvh", rig, 1 / 30, clip_rows, frame_time_text=repr(1 / 30))
        side = {"id": cid, "kind": kind, "skeleton": "flat", "unit_scale": 0.01}
        if idles:
            side.update(start_idle=idles[0], end_idle=idles[1])
        (DEMO / "clips" / f"{cid}.clip.json").write_text(json.dumps(side, indent=1) + "\n")
    (DEMO / "show.json").write_text(json.dumps(demo_show(), indent=1) + "\n")
    script = {"duration": 24.0, "events": [
        {"at": 0.5, "command": {"type": "go"}},
        {"at": 0.7, "command": {"type": "go"}},
        {"at": 5.0, "command": {"type": "go"}},
        {"at": 9.0, "command": {"type": "go"}},
        {"at": 12.0, "command": {"type": "go"}},
        {"at": 13.0, "command": {"type": "suspend", "args": {"oav": "scholar"}}},
        {"at": 17.0, "command": {"type": "go"}},
        {"at": 18.0, "command": {"type": "back"}},
        {"at": 18.5, "command": {"type": "goto", "args": {"index": 4}}},
    ]}
    (DEMO / "script.json").write_text(json.dumps(script, indent=1) + "\n")


if __name__ == "__main__":
    main()
