import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcdart.projector import GridSpec, ParallelGeometry, build_operator
from mcdart.solvers import masked_arm, residual_sinogram, sirt_run, sirt_weights


@pytest.fixture(scope="module")
def small_op():
    return build_operator(GridSpec(2, 2), ParallelGeometry((0.0, np.pi / 4, np.pi / 2), 2))


def test_zero_iterations_returns_start(op32, rng):
    x0 = rng.random(op32.grid.n)
    out = sirt_run(op32, rng.random(op32.geometry.l), x0, 0)
    np.testing.assert_array_equal(out, x0)
    assert out is not x0


def test_single_pixel_single_ray():
    op = build_operator(GridSpec(1, 1), ParallelGeometry((0.0,), 1))
    assert op.matrix.toarray().tolist() == [[1.0]]
    np.testing.assert_array_equal(sirt_run(op, [3.0], [0.0], 1), [3.0])


def test_consistent_data_is_a_fixed_point(op32, rng):
    x0 = rng.random(op32.grid.n)
    np.testing.assert_allclose(sirt_run(op32, op32.apply(x0), x0, 7), x0, rtol=0, atol=1e-12)


def test_negative_iterations_and_shapes(op32):
    with pytest.raises(ValueError):
        sirt_run(op32, np.zeros(op32.geometry.l), np.zeros(op32.grid.n), -1)
    with pytest.raises(ValueError):
        sirt_run(op32, np.zeros(3), np.zeros(op32.grid.n), 1)
    with pytest.raises(ValueError):
        masked_arm(op32, np.zeros(op32.geometry.l), np.ones(5, bool), np.zeros(op32.grid.n),
                   np.zeros(op32.grid.n), 1)


def test_zero_sums_get_zero_weights():
    op = build_operator(GridSpec(3, 3), ParallelGeometry((0.0,), 9))
    R, C = sirt_weights(op)
    assert np.all(np.isfinite(R)) and np.all(np.isfinite(C))
    assert R[0] == 0 and R[-1] == 0
    sub = op.restrict(np.arange(9) != 4)
    assert sirt_weights(sub)[1][4] == 0


def test_residual_sinogram_cases(op32, rng):
    n = op32.grid.n
    p, y = rng.random(op32.geometry.l), rng.random(n)
    np.testing.assert_array_equal(residual_sinogram(op32, p, y, np.ones(n, bool)), p)
    np.testing.assert_allclose(residual_sinogram(op32, p, y, np.zeros(n, bool)), p - op32.apply(y),
                               rtol=0, atol=1e-12)


def test_projection_splits_over_free_and_fixed(op32, rng):
    n = op32.grid.n
    x = rng.random(n)
    free = rng.random(n) < 0.4
    whole = op32.apply(x)
    parts = op32.apply(np.where(free, x, 0)) + op32.apply(np.where(free, 0, x))
    np.testing.assert_allclose(whole, parts, rtol=0, atol=1e-12)


def test_masked_arm_all_fixed_returns_fixed_values(op32, rng):
    n = op32.grid.n
    y = rng.random(n)
    out = masked_arm(op32, rng.random(op32.geometry.l), np.zeros(n, bool), rng.random(n), y, 10)
    np.testing.assert_array_equal(out, y)


def test_masked_arm_all_free_is_plain_sirt(op32, rng):
    n = op32.grid.n
    p, x0, y = rng.random(op32.geometry.l), rng.random(n), rng.random(n)
    np.testing.assert_array_equal(masked_arm(op32, p, np.ones(n, bool), x0, y, 6), sirt_run(op32, p, x0, 6))


def test_masked_arm_reaches_restricted_least_squares(small_op):
    free = np.array([True, False, False, True])
    truth = np.array([0.3, 0.7, 0.2, 0.9])
    p = small_op.apply(truth)
    y_fixed = np.where(free, 0.0, truth)
    out = masked_arm(small_op, p, free, np.zeros(4), y_fixed, 50)
    W = small_op.matrix.toarray()
    oracle = np.linalg.solve(W[:, free].T @ W[:, free], W[:, free].T @ (p - W @ y_fixed))
    np.testing.assert_allclose(out[free], oracle, atol=1e-6)
    np.testing.assert_array_equal(out[~free], y_fixed[~free])


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), frac=st.floats(0.0, 1.0))
def test_fixed_voxels_are_bit_identical(op32, seed, frac):
    rng = np.random.default_rng(seed)
    n = op32.grid.n
    free = rng.random(n) < frac
    y = rng.random(n)
    out = masked_arm(op32, rng.random(op32.geometry.l), free, rng.random(n), y, 3)
    assert np.array_equal(out[~free], y[~free])
    assert np.all(np.isfinite(out))


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_residual_is_non_increasing(op32, seed):
    rng = np.random.default_rng(seed)
    x_true = rng.random(op32.grid.n) * (rng.random(op32.grid.n) < 0.6)
    p = op32.apply(x_true)
    x = np.zeros(op32.grid.n)
    prev = np.linalg.norm(p)
    for _ in range(40):
        x = sirt_run(op32, p, x, 1)
        cur = np.linalg.norm(p - op32.apply(x))
        assert cur <= prev + 1e-9
        prev = cur


def test_deterministic(op32, rng):
    p, x0 = rng.random(op32.geometry.l), rng.random(op32.grid.n)
    assert np.array_equal(sirt_run(op32, p, x0, 5), sirt_run(op32, p, x0, 5))


def test_matrix_free_solver_agrees(op32, rng):
    mf = build_operator(op32.grid, op32.geometry, "matrix-free")
    p = op32.apply(rng.random(op32.grid.n))
    free = rng.random(op32.grid.n) < 0.5
    y = rng.random(op32.grid.n)
    a = masked_arm(op32, p, free, np.zeros(op32.grid.n), y, 5)
    b = masked_arm(mf, p, free, np.zeros(op32.grid.n), y, 5)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-10)
