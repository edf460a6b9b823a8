import numpy as np
import pytest

from splat360.quats import to_rotmat
from splat360.scene_io import CameraPose, Intrinsics


def random_unit_quat(rng):
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def random_pose(rng, view_id=0, intr=None):
    if intr is None:
        intr = Intrinsics(fx=50.0, fy=50.0, cx=16.0, cy=16.0, width=32, height=32)
    return CameraPose(
        intrinsics=intr,
        rotation=to_rotmat(random_unit_quat(rng)),
        translation=rng.normal(scale=2.0, size=3),
        id=view_id,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
