import sys
from pathlib import Path

import pytest
import yaml

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

from chatnav.runtime import data_path


@pytest.fixture(scope="session")
def office_world_path() -> Path:
    return data_path("office_18x20.world")


@pytest.fixture(scope="session")
def office_locations_path() -> Path:
    return data_path("locations_office.yaml")


@pytest.fixture(scope="session")
def grammar_path() -> Path:
    return data_path("grammar.yaml")


@pytest.fixture(scope="session")
def patterns_path() -> Path:
    return data_path("patterns.yaml")


def write_world(path: Path, rows: list[str], resolution: float = 1.0,
                robot=(None, None, 0.0), objects=None, rooms=None) -> Path:
    """Small helper to write ad-hoc world files in tests."""
    height, width = len(rows), len(rows[0])
    x = robot[0] if robot[0] is not None else width * resolution / 2
    y = robot[1] if robot[1] is not None else height * resolution / 2
    doc = {
        "grid": {"width": width, "height": height, "resolution": resolution,
                 "origin": [0.0, 0.0], "rows": rows},
        "robot_start": {"x": x, "y": y, "theta": robot[2]},
        "objects": objects or [],
        "rooms": rooms or [],
    }
    path.write_text(yaml.safe_dump(doc, sort_keys=False))
    return path


@pytest.fixture
def open_world(tmp_path) -> Path:
    """10x10 m empty world, robot at the center."""
    return write_world(tmp_path / "open.world", ["." * 10] * 10)
