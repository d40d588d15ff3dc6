import numpy as np
import pytest

from lidarbev.pointcloud_io import PointCloud

DATA_DIR = __import__("pathlib").Path(__file__).parent / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_cloud(rng, n, x_range=(0.0, 60.0), y_range=(-30.0, 30.0),
                 z_range=(-4.0, 4.0)) -> PointCloud:
    return PointCloud(
        rng.uniform(*x_range, n),
        rng.uniform(*y_range, n),
        rng.uniform(*z_range, n),
        rng.uniform(0.0, 1.0, n),
    )
