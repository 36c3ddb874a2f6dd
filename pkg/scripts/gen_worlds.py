#!/usr/bin/env python3
"""Regenerates the shipped world files and location registries.

Run from the repo root:  python3 scripts/gen_worlds.py
"""

import math
from pathlib import Path

import numpy as np
import yaml

DATA = Path(__file__).resolve().parent.parent / "src" / "chatnav" / "data"
RES = 0.1


def fill(occ, x0, y0, x1, y1, value=1):
    c0, c1 = int(round(x0 / RES)), int(round(x1 / RES))
    r0, r1 = int(round(y0 / RES)), int(round(y1 / RES))
    occ[r0:r1, c0:c1] = value


def rows_text(occ):
    # Row 0 of the file is the top of the map.
    return ["".join("#" if v else "." for v in row) for row in occ[::-1]]


def dump_world(path, occ, robot_start, objects, rooms):
    doc = {
        "grid": {
            "width": occ.shape[1],
            "height": occ.shape[0],
            "resolution": RES,
            "origin": [0.0, 0.0],
            "rows": rows_text(occ),
        },
        "robot_start": robot_start,
        "objects": objects,
        "rooms": rooms,
    }
    text = yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=400)
    path.write_text(text)
    print(f"wrote {path} ({occ.shape[1]}x{occ.shape[0]} cells)")


def dump_locations(path, rooms, aliases):
    entries = []
    for room in rooms:
        yaw = room.get("yaw", 0.0)
        entries.append({
            "label": room["label"],
            "x": room["x"],
            "y": room["y"],
            "z": round(math.sin(yaw / 2), 12),
            "w": round(math.cos(yaw / 2), 12),
            "aliases": aliases.get(room["label"], []),
        })
    path.write_text(yaml.safe_dump({"locations": entries}, sort_keys=False))
    print(f"wrote {path} ({len(entries)} locations)")


def make_office():
    occ = np.zeros((200, 180), dtype=np.uint8)  # 18 x 20 m
    # outer walls
    fill(occ, 0, 0, 18, 0.2)
    fill(occ, 0, 19.8, 18, 20)
    fill(occ, 0, 0, 0.2, 20)
    fill(occ, 17.8, 0, 18, 20)
    # corridor side walls (corridor is x in [7.5, 10.5])
    fill(occ, 7.3, 0.2, 7.5, 16.2)
    fill(occ, 10.5, 0.2, 10.7, 16.2)
    # separator below the meeting room, with a door onto the corridor
    fill(occ, 0.2, 16.0, 17.8, 16.2)
    fill(occ, 8.2, 16.0, 9.8, 16.2, value=0)

    left_labels = ["secretary_office", "professor_office", "server_room", "kitchen", "lab"]
    right_labels = ["storage", "workshop", "library", "lounge", "printer_room"]
    rooms = []
    for i in range(5):
        y0 = 0.2 + i * 3.2
        yc = y0 + 1.5
        if i < 4:  # dividers between stacked rooms
            fill(occ, 0.2, y0 + 3.0, 7.3, y0 + 3.2)
            fill(occ, 10.7, y0 + 3.0, 17.8, y0 + 3.2)
        # doors onto the corridor (1.2 m)
        fill(occ, 7.3, yc - 0.6, 7.5, yc + 0.6, value=0)
        fill(occ, 10.5, yc - 0.6, 10.7, yc + 0.6, value=0)
        rooms.append({"label": left_labels[i], "x": 3.75, "y": round(yc, 2), "yaw": math.pi})
        rooms.append({"label": right_labels[i], "x": 14.25, "y": round(yc, 2), "yaw": 0.0})
    rooms.append({"label": "meeting_room", "x": 9.0, "y": 18.0, "yaw": math.pi / 2})

    objects = [
        {"label": "person", "x": 9.0, "y": 6.0, "radius": 0.3},
        {"label": "table", "x": 9.7, "y": 12.0, "radius": 0.5},
        {"label": "chair", "x": 8.3, "y": 12.3, "radius": 0.3},
        {"label": "bin", "x": 10.1, "y": 3.0, "radius": 0.25},
        {"label": "plant", "x": 8.0, "y": 15.2, "radius": 0.25},
        {"label": "table", "x": 9.0, "y": 18.5, "radius": 0.5},
        {"label": "chair", "x": 3.5, "y": 1.6, "radius": 0.3},
    ]
    robot_start = {"x": 9.0, "y": 10.0, "theta": round(math.pi / 2, 12)}
    dump_world(DATA / "office_18x20.world", occ, robot_start, objects, rooms)

    aliases = {
        "secretary_office": ["secretary's office", "the secretary's office",
                             "office of the secretary"],
        "professor_office": ["professor's office", "the professor's office"],
        "server_room": ["the server room"],
        "kitchen": ["the kitchen"],
        "lab": ["the lab", "the laboratory", "laboratory"],
        "storage": ["the storage room", "storage room"],
        "workshop": ["the workshop"],
        "library": ["the library"],
        "lounge": ["the lounge"],
        "printer_room": ["the printer room"],
        "meeting_room": ["the meeting room", "conference room", "the conference room"],
    }
    dump_locations(DATA / "locations_office.yaml", rooms, aliases)


def make_corridor():
    occ = np.zeros((1200, 60), dtype=np.uint8)  # 6 x 120 m
    fill(occ, 0, 0, 6, 0.2)
    fill(occ, 0, 119.8, 6, 120)
    fill(occ, 0, 0, 0.2, 120)
    fill(occ, 5.8, 0, 6, 120)

    rooms = [
        {"label": "south_end", "x": 3.0, "y": 2.0, "yaw": -math.pi / 2},
        {"label": "midpoint", "x": 3.0, "y": 60.0, "yaw": math.pi / 2},
        {"label": "north_end", "x": 3.0, "y": 118.0, "yaw": math.pi / 2},
    ]
    objects = [
        {"label": "person", "x": 3.0, "y": 30.0, "radius": 0.3},
        {"label": "bin", "x": 1.0, "y": 60.5, "radius": 0.25},
        {"label": "plant", "x": 5.0, "y": 90.0, "radius": 0.25},
    ]
    robot_start = {"x": 3.0, "y": 60.0, "theta": round(math.pi / 2, 12)}
    dump_world(DATA / "corridor_6x120.world", occ, robot_start, objects, rooms)

    aliases = {
        "south_end": ["the south end", "south end of the corridor"],
        "midpoint": ["the midpoint", "the middle", "middle of the corridor"],
        "north_end": ["the north end", "north end of the corridor"],
    }
    dump_locations(DATA / "locations_corridor.yaml", rooms, aliases)


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    make_office()
    make_corridor()
