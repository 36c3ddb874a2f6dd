import math

import numpy as np
import pytest

from chatnav.bus import Bus
from chatnav.clock import FakeClock
from chatnav.msgs import Twist
from chatnav.world import (NoiseConfig, SimLoop, WorldError, load_world, sense,
                           step, wrap_angle)

from conftest import write_world


def test_wrap_angle_range():
    for a in np.linspace(-20, 20, 401):
        w = wrap_angle(float(a))
        assert -math.pi < w <= math.pi
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)


# -- loading -----------------------------------------------------------------


def test_load_minimal_world(tmp_path):
    path = write_world(tmp_path / "min.world", ["....."] * 5)
    world = load_world(path)
    assert world.grid.extent == (5.0, 5.0)
    assert world.grid.is_free(world.robot.x, world.robot.y)
    assert world.objects == []


def test_load_office_map(office_world_path):
    world = load_world(office_world_path)
    assert world.grid.extent == (18.0, 20.0)
    assert len(world.rooms) == 11
    assert "secretary_office" in world.rooms
    for x, y, _yaw in world.rooms.values():
        assert world.grid.is_free(x, y)


def test_load_corridor_map():
    from chatnav.runtime import data_path
    world = load_world(data_path("corridor_6x120.world"))
    assert world.grid.extent == (6.0, 120.0)


def test_object_outside_grid_rejected(tmp_path):
    path = write_world(tmp_path / "bad.world", ["....."] * 5,
                       objects=[{"label": "chair", "x": 99.0, "y": 1.0}])
    with pytest.raises(WorldError, match="chair"):
        load_world(path)


def test_robot_start_on_wall_rejected(tmp_path):
    rows = ["#####", "#...#", "#...#", "#...#", "#####"]
    path = write_world(tmp_path / "walled.world", rows, robot=(0.5, 0.5, 0.0))
    with pytest.raises(WorldError, match=r"\(0, 0\)"):
        load_world(path)


def test_bad_grid_characters_rejected(tmp_path):
    path = write_world(tmp_path / "chars.world", ["..x..", ".....", ".....",
                                                  ".....", "....."])
    with pytest.raises(WorldError, match="invalid cell"):
        load_world(path)


# -- kinematics ----------------------------------------------------------------


def test_step_straight_translation(open_world):
    world = load_world(open_world)
    world.robot.x, world.robot.y, world.robot.theta = 2.0, 2.0, 0.0
    state = step(world, Twist.planar(1.0, 0.0), 0.1)
    assert state.x == pytest.approx(2.1, abs=1e-12)
    assert state.y == pytest.approx(2.0, abs=1e-12)
    assert state.theta == 0.0


def test_step_pure_rotation(open_world):
    world = load_world(open_world)
    x0, y0 = world.robot.x, world.robot.y
    state = step(world, Twist.planar(0.0, math.pi), 0.5)
    assert state.theta == pytest.approx(math.pi / 2, abs=1e-12)
    assert state.x == x0 and state.y == y0  # exact: no translation applied


def test_pure_rotation_never_moves(open_world):
    world = load_world(open_world)
    x0, y0 = world.robot.x, world.robot.y
    for _ in range(500):
        step(world, Twist.planar(0.0, 0.7), 0.05)
    assert abs(world.robot.x - x0) <= 1e-12
    assert abs(world.robot.y - y0) <= 1e-12


def test_pure_translation_never_turns(open_world):
    world = load_world(open_world)
    world.robot.theta = 0.3
    for _ in range(50):
        step(world, Twist.planar(0.1, 0.0), 0.05)
    assert abs(world.robot.theta - 0.3) <= 1e-12


def test_wall_clamp_analytic(tmp_path):
    # Wall face at x = 3.0; robot at x = 2.7 drives straight at it for 1 s.
    rows = ["...#."] * 5
    path = write_world(tmp_path / "wall.world", rows, robot=(2.7, 2.5, 0.0))
    world = load_world(path)
    state = step(world, Twist.planar(1.0, 0.0), 1.0)
    assert world.last_collision
    assert state.x == pytest.approx(3.0, abs=1e-5)
    assert state.x < 3.0  # strictly inside the free cell
    assert world.grid.is_free(state.x, state.y)
    assert world.odom_distance == pytest.approx(0.3, abs=1e-5)


def test_collision_keeps_pose_on_free_cell(tmp_path):
    rows = ["#####", "#...#", "#...#", "#...#", "#####"]
    path = write_world(tmp_path / "box.world", rows, robot=(2.5, 2.5, 0.0))
    world = load_world(path)
    rng = np.random.default_rng(3)
    for _ in range(200):
        world.robot.theta = wrap_angle(rng.uniform(-math.pi, math.pi))
        step(world, Twist.planar(0.8, 0.0), 0.5)
        assert world.grid.is_free(world.robot.x, world.robot.y)


def test_odom_integrates_executed_distance(open_world):
    world = load_world(open_world)
    total = 0.0
    for v, dt in [(0.5, 0.1), (0.2, 0.3), (-0.4, 0.2)]:
        before = world.odom_distance
        step(world, Twist.planar(v, 0.1), dt)
        moved = world.odom_distance - before
        assert moved == pytest.approx(abs(v) * dt, abs=1e-9)
        total += moved
    assert world.odom_distance == pytest.approx(total)
    assert world.odom_distance >= 0


def test_nonplanar_components_ignored_with_warning(open_world):
    world = load_world(open_world)
    x0, y0 = world.robot.x, world.robot.y
    cmd = Twist(linear=(0.0, 1.0, 0.5), angular=(0.3, 0.2, 0.0))
    step(world, cmd, 0.1)
    assert (world.robot.x, world.robot.y) == (x0, y0)
    assert world.nonplanar_warnings == 1


def test_step_requires_positive_dt(open_world):
    world = load_world(open_world)
    with pytest.raises(ValueError):
        step(world, Twist(), 0.0)


# -- sensing --------------------------------------------------------------------


def test_scan_all_max_range_in_empty_world(open_world):
    world = load_world(open_world)
    world.max_range = 2.0
    snap = sense(world)
    assert len(snap.scan) == world.scan_rays
    assert all(r == pytest.approx(2.0) for _, r in snap.scan)


def test_object_ahead_is_visible(tmp_path):
    path = write_world(tmp_path / "obj.world", ["." * 10] * 10,
                       robot=(5.0, 5.0, 0.0),
                       objects=[{"label": "chair", "x": 7.0, "y": 5.0}])
    world = load_world(path)
    snap = sense(world)
    assert len(snap.visible) == 1
    vis = snap.visible[0]
    assert vis.label == "chair"
    assert vis.bearing == pytest.approx(0.0, abs=1e-12)
    assert vis.range == pytest.approx(2.0, abs=1e-12)


def test_object_behind_not_visible(tmp_path):
    path = write_world(tmp_path / "behind.world", ["." * 10] * 10,
                       robot=(5.0, 5.0, 0.0),
                       objects=[{"label": "chair", "x": 2.0, "y": 5.0}])
    world = load_world(path)
    assert sense(world).visible == []


def test_wall_blocks_line_of_sight(tmp_path):
    rows = ["." * 11] * 5 + ["....#......"] + ["." * 11] * 5
    # grid row 5 from the top => wall at y in [5, 6), x in [4, 5)
    path = write_world(tmp_path / "los.world", rows, robot=(4.5, 1.5, math.pi / 2),
                       objects=[{"label": "chair", "x": 4.5, "y": 9.5}])
    world = load_world(path)
    assert sense(world).visible == []


def test_object_inside_min_range_not_reported(tmp_path):
    path = write_world(tmp_path / "close.world", ["." * 10] * 10,
                       robot=(5.0, 5.0, 0.0),
                       objects=[{"label": "chair", "x": 5.3, "y": 5.0}])
    world = load_world(path)
    assert sense(world).visible == []


def test_zero_noise_sense_is_deterministic(office_world_path):
    w1 = load_world(office_world_path)
    w2 = load_world(office_world_path)
    s1, s2 = sense(w1), sense(w2)
    assert s1.pose == s2.pose
    assert s1.scan == s2.scan
    assert [v.label for v in s1.visible] == [v.label for v in s2.visible]


def test_pose_noise_statistics(open_world):
    # Sample std of reported x must sit within 20% of the configured sigma.
    world = load_world(open_world)
    noise = NoiseConfig(pose_sigma=0.05)
    rng = np.random.default_rng(1234)
    xs = [sense(world, noise, rng).pose[0] for _ in range(1000)]
    measured = float(np.std(xs))
    assert 0.05 * 0.8 <= measured <= 0.05 * 1.2


# -- loop -----------------------------------------------------------------------


def test_run_loop_publishes_at_rate(open_world):
    world = load_world(open_world)
    bus = Bus(clock=FakeClock())
    loop = SimLoop(world, bus, rate=20.0)
    poses = bus.subscribe("pose")
    loop.run(duration=1.0)
    assert len(poses.drain()) >= 19


def test_robot_stationary_without_cmd(open_world):
    world = load_world(open_world)
    start = (world.robot.x, world.robot.y, world.robot.theta)
    bus = Bus(clock=FakeClock())
    SimLoop(world, bus, rate=20.0).run(duration=1.0)
    assert (world.robot.x, world.robot.y, world.robot.theta) == start


def test_zero_twist_holds_pose_mid_run(open_world):
    world = load_world(open_world)
    bus = Bus(clock=FakeClock())
    loop = SimLoop(world, bus, rate=20.0)
    bus.publish("cmd_vel", Twist.planar(0.5, 0.0).to_payload())
    loop.run(duration=0.5)
    bus.publish("cmd_vel", Twist().to_payload())
    loop.tick()
    frozen = (world.robot.x, world.robot.y, world.robot.theta)
    loop.run(duration=0.5)
    assert (world.robot.x, world.robot.y, world.robot.theta) == frozen
