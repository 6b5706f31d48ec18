import numpy as np
import pytest

from matweight.errors import OutOfDomainError, ResolutionError
from matweight.geometry import (CubeWindow, DyadicCube, containing_cube,
                                cube_box, dilate, double)


def test_unit_dilation_is_identity():
    Q = DyadicCube(0, (0,))
    box = dilate(Q, 1.0)
    assert np.allclose(box.lo_arr, Q.lower) and np.allclose(box.hi_arr, Q.lower + 1)


def test_double_interval():
    Q = DyadicCube(2, (1,))
    box = double(Q, 1)
    assert box.sides[0] == pytest.approx(2 * 2.0 ** -2)
    assert box.center[0] == pytest.approx(Q.center[0])


def test_children_partition_parent():
    Q = DyadicCube(1, (1, -2))
    kids = Q.children()
    assert len(kids) == 4
    assert all(k.j == 2 for k in kids)
    assert sum(k.volume for k in kids) == pytest.approx(Q.volume)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = Q.lower + rng.random(2) * Q.side
        assert sum(k.contains_point(x) for k in kids) == 1
    assert all(k.parent() == Q for k in kids)


def test_window_levels_partition():
    win = CubeWindow(2, 1, 3)
    for j in win.levels():
        cubes = win.cubes_at_level(j)
        assert len(cubes) == 2 ** (2 * j)
        assert sum(Q.volume for Q in cubes) == pytest.approx(win.box.volume)
        rng = np.random.default_rng(j)
        for _ in range(20):
            x = win.box.lo_arr + rng.random(2) * win.box.sides
            assert sum(Q.contains_point(x) for Q in cubes) == 1


def test_containing_cube():
    Q = containing_cube(3, [0.3])
    assert Q.contains_point([0.3]) and Q.j == 3


def test_out_of_domain_raises_and_clips():
    domain = cube_box(1)
    Q = DyadicCube(1, (0,))
    with pytest.raises(OutOfDomainError):
        double(Q, 3, domain=domain, clip=False)
    clipped, was_clipped = double(Q, 3, domain=domain, clip=True)
    assert was_clipped and domain.contains_box(clipped)
    inside, flag = dilate(Q, 1.0, domain=domain, clip=True)
    assert not flag


def test_misaligned_window_rejected():
    with pytest.raises(ResolutionError):
        CubeWindow(1, 0, 2, cube_box(1))  # level-0 cubes exceed the unit box


def test_negative_levels_on_large_domain():
    win = CubeWindow(1, -3, -2, cube_box(1, 16.0))
    cubes = win.cubes_at_level(-3)
    assert len(cubes) == 4 and cubes[0].side == 8.0
