import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from groovekit import PointCloud, kernels


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Run the test once per kernel backend (compiled + python fallback)."""
    with kernels.use_backend(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def grid_plane(nx=30, ny=30, pitch=0.001, z=0.0, viewpoint=(0.0, 0.0, 1.0)):
    x = np.arange(nx) * pitch
    y = np.arange(ny) * pitch
    gx, gy = np.meshgrid(x, y, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, z)])
    return PointCloud(pts, viewpoint=viewpoint)


def random_rigid(rng):
    """Random rotation matrix and translation vector."""
    rot = Rotation.random(random_state=np.random.RandomState(rng.integers(2**31)))
    return rot.as_matrix(), rng.uniform(-1, 1, 3)


def transform_cloud(cloud, R, t):
    pts = cloud.points @ R.T + t
    normals = None if cloud.normals is None else cloud.normals @ R.T
    return PointCloud(pts, normals, R @ cloud.viewpoint + t)
