import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from slowmovers.algebra import (
    adjugate,
    batch_artifacts,
    build_time_shift_design,
    design_artifacts,
    determinant,
    residual_projector,
    solve_checked,
)
from slowmovers.errors import DimensionError, SingularDesignError, UnsupportedShapeError
from slowmovers.panel import Mode, PanelDataset, PanelObservation

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize(
    "m, expected",
    [([[1, 0], [0, 1]], 1.0), ([[1, 0.3], [1, 0.8]], 0.5), ([[1, 1], [1, 1]], 0.0)],
)
def test_determinant_examples(m, expected):
    assert determinant(m) == pytest.approx(expected, abs=1e-15)


def test_determinant_larger_matches_lu():
    m = np.array([[2.0, 1, 0], [1, 3, 1], [0, 1, 4]])
    assert determinant(m) == pytest.approx(18.0)


def test_determinant_rejects_non_square():
    with pytest.raises(DimensionError):
        determinant(np.ones((2, 3)))


@pytest.mark.parametrize(
    "m, expected",
    [
        ([[1, 0], [0, 1]], [[1, 0], [0, 1]]),
        ([[1, 2], [3, 4]], [[4, -2], [-3, 1]]),
        ([[1, 1], [1, 1]], [[1, -1], [-1, 1]]),
    ],
)
def test_adjugate_examples(m, expected):
    np.testing.assert_array_equal(adjugate(m), expected)


def test_adjugate_singular_product_is_zero():
    m = np.array([[1.0, 1], [1, 1]])
    np.testing.assert_array_equal(adjugate(m) @ m, np.zeros((2, 2)))


def test_adjugate_rejects_non_square():
    with pytest.raises(DimensionError):
        adjugate(np.ones((3, 2)))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5).flatmap(lambda p: arrays(float, (p, p), elements=finite)))
def test_adjugate_identity(m):
    p = m.shape[0]
    tol = 1e-12 * (1 + np.abs(m).sum(axis=1).max() ** p)
    adj = adjugate(m)
    d = determinant(m)
    assert np.max(np.abs(adj @ m - d * np.eye(p))) <= tol
    assert np.max(np.abs(m @ adj - d * np.eye(p))) <= tol


def test_adjugate_singular_3x3_rank_one():
    v = np.array([1.0, 2.0, 3.0])
    m = np.outer(v, v)
    np.testing.assert_allclose(adjugate(m), np.zeros((3, 3)), atol=1e-12)


def test_adjugate_stacked_matches_loop(rng):
    ms = rng.normal(size=(20, 3, 3))
    batch = adjugate(ms)
    for i in range(20):
        np.testing.assert_array_equal(batch[i], adjugate(ms[i]))


def test_time_shift_design_examples():
    np.testing.assert_array_equal(build_time_shift_design([[0.5, 0.2], [1, 0.7]]), [[0, 0], [1, 0.7]])
    np.testing.assert_array_equal(build_time_shift_design([[1.0], [2], [5]]), [[0, 0], [2, 0], [0, 5]])
    np.testing.assert_array_equal(build_time_shift_design([[1.0, 1], [0, 0]]), np.zeros((2, 2)))


def test_time_shift_design_needs_two_periods():
    with pytest.raises(UnsupportedShapeError):
        build_time_shift_design([[1.0, 2.0]])


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 5).flatmap(lambda t: st.integers(1, t).flatmap(
    lambda p: arrays(float, (t, p), elements=st.floats(0.5, 9)))))
def test_time_shift_design_structure(x):
    t_periods, p = x.shape
    w = build_time_shift_design(x)
    assert w.shape == (t_periods, p * (t_periods - 1))
    assert np.count_nonzero(w) == (t_periods - 1) * p
    assert not w[0].any()
    for t in range(1, t_periods):
        np.testing.assert_array_equal(w[t, (t - 1) * p : t * p], x[t])


def test_residual_projector_examples():
    np.testing.assert_allclose(residual_projector([[1.0], [1.0]]), [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)
    x = np.vstack([np.eye(2), np.zeros((1, 2))])
    np.testing.assert_allclose(residual_projector(x), np.diag([0.0, 0.0, 1.0]), atol=1e-15)


def test_residual_projector_collinear():
    x = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(SingularDesignError) as info:
        residual_projector(x, index=7)
    assert info.value.index == 7


def test_residual_projector_properties_randomized(rng):
    for _ in range(1000):
        t_periods = int(rng.integers(2, 7))
        p = int(rng.integers(1, t_periods))
        x = rng.normal(size=(t_periods, p))
        m = residual_projector(x)
        assert np.max(np.abs(m @ m - m)) <= 1e-10
        assert np.max(np.abs(m @ x)) <= 1e-10
        assert np.max(np.abs(m - m.T)) <= 1e-12


def test_design_artifacts_square_example():
    obs = PanelObservation(y=[0.0, 0.0], x=[[1, 0.2], [1, 0.9]])
    art = design_artifacts(obs, Mode.SQUARE)
    assert art.d == pytest.approx(0.7)
    assert art.m_x is None
    stayer = design_artifacts(PanelObservation(y=[0, 0], x=[[1, 0.4], [1, 0.4]]), "square")
    assert stayer.d == 0.0


def test_design_artifacts_tall_matches_gram_oracle(ds2):
    for obs in ds2.observations:
        art = design_artifacts(obs, Mode.TALL)
        x = obs.x
        g00 = sum(r[0] * r[0] for r in x)
        g01 = sum(r[0] * r[1] for r in x)
        g11 = sum(r[1] * r[1] for r in x)
        assert art.d == pytest.approx(g00 * g11 - g01 * g01, rel=1e-12)
        assert art.a_matrix.shape == (2, 3)
        np.testing.assert_allclose(art.a_matrix @ x, art.d * np.eye(2), atol=1e-12)
        np.testing.assert_allclose(art.m_x @ x, 0.0, atol=1e-10)


def test_design_artifacts_tall_stayer_is_total():
    obs = PanelObservation(y=[0, 0, 0], x=[[1, 0.5], [1, 0.5], [1, 0.5]])
    art = design_artifacts(obs, Mode.TALL)
    assert art.d == 0.0
    assert art.m_x is None
    np.testing.assert_allclose(art.a_matrix @ obs.x, 0.0, atol=1e-12)


def test_design_artifacts_mode_mismatch():
    obs = PanelObservation(y=[0, 0], x=[[1, 0.2], [1, 0.9]])
    with pytest.raises(UnsupportedShapeError):
        design_artifacts(obs, Mode.TALL)


def test_design_artifacts_pure(ds1):
    obs = ds1.observations[3]
    a, b = design_artifacts(obs, Mode.SQUARE), design_artifacts(obs, Mode.SQUARE)
    assert a.d == b.d
    np.testing.assert_array_equal(a.a_matrix, b.a_matrix)
    np.testing.assert_array_equal(a.w, b.w)


@pytest.mark.parametrize("fixture", ["ds1", "ds2"])
def test_batch_matches_per_observation(fixture, request):
    ds = request.getfixturevalue(fixture)
    batch = batch_artifacts(ds)
    for i, obs in enumerate(ds.observations):
        single = design_artifacts(obs, ds.mode)
        assert batch[i].d == pytest.approx(single.d, abs=1e-14)
        np.testing.assert_allclose(batch[i].a_matrix, single.a_matrix, atol=1e-14)
        np.testing.assert_array_equal(batch[i].w, single.w)
        if single.m_x is not None:
            np.testing.assert_allclose(batch[i].m_x, single.m_x, atol=1e-12)


def test_solve_checked_equilibrates_scale():
    a = np.diag([1.0, 1e-14])
    np.testing.assert_allclose(solve_checked(a, np.array([1.0, 1e-14]), name="a"), [1.0, 1.0])


def test_solve_checked_rejects_singular():
    with pytest.raises(SingularDesignError) as info:
        solve_checked(np.array([[1.0, 1], [1, 1]]), np.ones(2), name="gram")
    assert info.value.matrix == "gram"
    with pytest.raises(SingularDesignError):
        solve_checked(np.zeros((2, 2)), np.ones(2), name="zero")
