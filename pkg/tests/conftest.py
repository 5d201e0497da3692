import numpy as np
import pytest

from swarmshape import Kernel, SamplePointSet, ShapePose, to_world


@pytest.fixture
def kernel():
    return Kernel(1.5)


@pytest.fixture
def unit_square_set():
    pts = np.array([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])
    return SamplePointSet.from_points(pts, d_pts=0.5)


@pytest.fixture
def identity_world(unit_square_set):
    anchor = unit_square_set.points_local[unit_square_set.anchor_index]
    return to_world(unit_square_set, ShapePose(position=anchor, orientation=0.0))


def random_world(rng, m, d=2, span=4.0):
    pts = rng.uniform(-span, span, size=(m, d))
    s = SamplePointSet.from_points(pts, d_pts=1.0)
    anchor = s.points_local[s.anchor_index]
    return to_world(s, ShapePose(position=anchor, orientation=0.0))
