import numpy as np
import pytest

from pim import pointcloud


@pytest.fixture(scope="session")
def interval_cloud():
    return pointcloud.generate(pointcloud.ManifoldSpec.interval(0.0, 1.0, 101))


@pytest.fixture(scope="session")
def disk_cloud():
    return pointcloud.generate(pointcloud.ManifoldSpec.disk(300))


@pytest.fixture(scope="session")
def rectangle_cloud():
    return pointcloud.generate(
        pointcloud.ManifoldSpec.rectangle(1.0, 1.0, 300))


@pytest.fixture(scope="session")
def cap_cloud():
    return pointcloud.generate(pointcloud.ManifoldSpec.spherical_cap(0.5, 400))


@pytest.fixture(scope="session")
def all_clouds(interval_cloud, disk_cloud, rectangle_cloud, cap_cloud):
    return {
        "interval": interval_cloud,
        "disk": disk_cloud,
        "rectangle": rectangle_cloud,
        "spherical_cap": cap_cloud,
    }


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
