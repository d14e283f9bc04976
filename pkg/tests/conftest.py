import numpy as np
import pytest

from slmosaic.geometry import RigidTransform3D
from slmosaic.simulator import build_scene, preset, simulate_sequence
from slmosaic.simulator.trajectory import TrajectoryScript


def small_scene(name="plane", n_frames=4, scale=0.25, seed=0, **overrides):
    spec = preset(name, scale=scale, seed=seed)
    spec["trajectory"]["n_frames"] = n_frames
    spec.update(overrides)
    return spec


def render(spec):
    scene = build_scene(spec)
    frames, gt = simulate_sequence(scene.surface, scene.texture, scene.trajectory, scene.camera, scene.projector, scene.noise)
    return scene, frames, gt


@pytest.fixture(scope="session")
def plane_run():
    """Four quarter-size frames over the plane phantom."""
    return render(small_scene("plane", 4))


@pytest.fixture(scope="session")
def still_run():
    """Two frames from the same pose."""
    spec = small_scene("plane", 2)
    scene = build_scene(spec)
    pose = RigidTransform3D.identity()
    traj = TrajectoryScript((pose, pose))
    frames, gt = simulate_sequence(scene.surface, scene.texture, traj, scene.camera, scene.projector, scene.noise)
    return scene, frames, gt


def plane_homography(K, T, normal, distance):
    """Oracle: homography induced by ``T`` on the plane ``n . p = d``."""
    M = T.rotation + np.outer(T.D, normal) / distance
    return K.K @ M @ np.linalg.inv(K.K)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
