import numpy as np
import pytest

from bevdebias.geometry import CameraModel, Extrinsics, Intrinsics, euler_pose


@pytest.fixture
def identity_camera() -> CameraModel:
    """f = 1000 px, principal point (352, 192), extrinsics = identity."""
    return CameraModel(Intrinsics(1000.0, 1000.0, 352.0, 192.0, 704, 384),
                       Extrinsics.identity(), "identity")


def random_camera(rng: np.random.Generator) -> CameraModel:
    f_u = rng.uniform(300, 2000)
    f_v = rng.uniform(300, 2000)
    intr = Intrinsics(f_u, f_v,
                      352.0 + rng.uniform(-80, 80), 192.0 + rng.uniform(-50, 50),
                      704, 384)
    extr = euler_pose(rng.uniform(-np.pi, np.pi), rng.uniform(-0.5, 0.5),
                      rng.uniform(-0.5, 0.5), rng.uniform(-5, 5, 3))
    return CameraModel(intr, extr, "random")
