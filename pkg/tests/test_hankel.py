import numpy as np
import pytest

from cpekit.errors import InputError, InsufficientLengthError
from cpekit.hankel import (
    CompositionMode,
    build_composite,
    build_hankel,
    cumulative_selector,
    hankel_matrix,
    hybrid_selector,
)
from cpekit.trajectories import Trajectory, TrajectoryBundle


# --- oracles ---------------------------------------------------------------

def test_scalar_hankel_by_definition():
    np.testing.assert_array_equal(hankel_matrix([1, 2, 3, 4], 2), [[1, 2, 3], [2, 3, 4]])


def test_full_depth_is_stacked_trajectory(rng):
    z = rng.standard_normal((6, 2))
    H = hankel_matrix(z, 6)
    np.testing.assert_array_equal(H[:, 0], z.ravel())


def test_short_trajectory_shape():
    assert build_hankel(Trajectory(np.zeros((7, 2))), 5).shape == (10, 3)


def test_mosaic_column_count_of_short_bundle(rng):
    bundle = TrajectoryBundle(tuple(Trajectory(rng.standard_normal((T, 2))) for T in (7, 7, 6, 6, 5)))
    H = build_composite(bundle, 5, CompositionMode.mosaic())
    assert H.shape == (10, 3 + 3 + 2 + 2 + 1)
    assert [c for _, c in H.column_blocks] == [3, 3, 2, 2, 1]


def test_single_member_modes_coincide(rng):
    bundle = TrajectoryBundle((Trajectory(rng.standard_normal((9, 2))),), (2.5,))
    a = build_composite(bundle, 3, CompositionMode.mosaic()).matrix
    b = build_composite(bundle, 3, CompositionMode.cumulative()).matrix
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(a, 2.5 * hankel_matrix(bundle.members[0].samples, 3))


def test_cumulative_equals_mosaic_times_selector(rng):
    bundle = TrajectoryBundle(tuple(Trajectory(rng.standard_normal((8, 2))) for _ in range(4)), (1, -2, 0.5, 3))
    mos = build_composite(bundle, 3, CompositionMode.mosaic()).matrix
    cum = build_composite(bundle, 3, CompositionMode.cumulative()).matrix
    np.testing.assert_allclose(mos @ cumulative_selector(4, 6), cum, atol=1e-12)


def test_hybrid_equals_mosaic_times_selector(rng):
    lengths = (8, 8, 8, 5, 9)
    bundle = TrajectoryBundle(tuple(Trajectory(rng.standard_normal((T, 2))) for T in lengths), (1, 2, 3, 4, 5))
    mos = build_composite(bundle, 3, CompositionMode.mosaic()).matrix
    hyb = build_composite(bundle, 3, CompositionMode.hybrid(3)).matrix
    S = hybrid_selector(3, 6, 3 + 7)
    np.testing.assert_allclose(mos @ S, hyb, atol=1e-12)


# --- modes and errors ------------------------------------------------------

def test_mode_parse_and_str():
    assert str(CompositionMode.parse("hybrid:3")) == "hybrid:3"
    assert CompositionMode.parse("Mosaic").variant == "mosaic"
    assert CompositionMode.parse("hybrid", 2).shared_prefix == 2
    with pytest.raises(InputError):
        CompositionMode.parse("hybrid")
    with pytest.raises(InputError):
        CompositionMode("diagonal")
    with pytest.raises(InputError):
        CompositionMode("mosaic", 2)


def test_too_short_member_named_in_error(rng):
    bundle = TrajectoryBundle((Trajectory(rng.standard_normal(6)), Trajectory(rng.standard_normal(2))))
    with pytest.raises(InsufficientLengthError, match="trajectory 2"):
        build_composite(bundle, 3, CompositionMode.mosaic())


def test_cumulative_needs_equal_lengths(rng):
    bundle = TrajectoryBundle((Trajectory(rng.standard_normal(6)), Trajectory(rng.standard_normal(7))))
    with pytest.raises(InputError, match="trajectory 2"):
        build_composite(bundle, 3, CompositionMode.cumulative())


def test_hybrid_prefix_validation(rng):
    bundle = TrajectoryBundle((Trajectory(rng.standard_normal(6)), Trajectory(rng.standard_normal(7))))
    with pytest.raises(InputError):
        build_composite(bundle, 3, CompositionMode.hybrid(2))
    with pytest.raises(InputError):
        build_composite(bundle, 3, CompositionMode.hybrid(3))


def test_invalid_depth():
    with pytest.raises(InputError):
        hankel_matrix([1.0, 2.0], 0)
    with pytest.raises(InsufficientLengthError):
        hankel_matrix([1.0, 2.0], 3)


def test_weight_override(rng):
    bundle = TrajectoryBundle(tuple(Trajectory(rng.standard_normal(5)) for _ in range(2)))
    H = build_composite(bundle, 2, CompositionMode.mosaic(), weights=(2.0, -1.0))
    assert H.weights_used == (2.0, -1.0)
    np.testing.assert_allclose(H.matrix[:, :4], 2 * hankel_matrix(bundle.members[0].samples, 2))
    assert [s.stop - s.start for s in H.block_slices()] == [4, 4]
