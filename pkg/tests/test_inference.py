import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import random_square_panel
from slowmovers.algebra import batch_artifacts
from slowmovers.desk import DS1_BANDWIDTH, homogeneous_panel
from slowmovers.errors import NumericalError, ValidationError
from slowmovers.estimators import EstimatorConfig, estimate_all, prepare
from slowmovers.inference import (
    confidence_intervals,
    covariance_and_se,
    inference_report,
    influence_contributions,
    mover_influence,
    normal_quantile,
)
from slowmovers.panel import PanelDataset
from slowmovers.simulation import SimulationConfig, generate_panel


def _fit(ds, cfg):
    design, stacks = prepare(ds, cfg)
    est = estimate_all(ds, cfg, prepared=(design, stacks))
    return design, stacks, est, influence_contributions(ds, design, stacks, est)


def test_normal_quantile_values():
    assert normal_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-12)
    assert normal_quantile(0.95) == pytest.approx(1.6448536269514722, abs=1e-12)
    assert normal_quantile(0.5) == 0.0


def test_interval_examples():
    np.testing.assert_allclose(confidence_intervals([0.0], [1.0], 0.95), [[-1.959964, 1.959964]], atol=1e-6)
    np.testing.assert_array_equal(confidence_intervals([0.3, 0.2], [0.0, 0.0], 0.9), [[0.3, 0.3], [0.2, 0.2]])
    half = 1.644854 * 0.006
    np.testing.assert_allclose(confidence_intervals([0.075], [0.006], 0.90), [[0.075 - half, 0.075 + half]], atol=1e-8)


def test_interval_invalid_level():
    with pytest.raises(ValidationError):
        confidence_intervals([0.0], [1.0], 1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(0, 3), st.floats(0.01, 0.98), st.floats(0.001, 0.01))
def test_interval_monotone_in_level(theta, se, lo, step):
    narrow = confidence_intervals([theta], [se], lo)[0]
    wide = confidence_intervals([theta], [se], min(lo + step, 0.999))[0]
    assert wide[0] <= narrow[0] and narrow[1] <= wide[1]
    assert narrow[1] - theta == pytest.approx(theta - narrow[0], abs=1e-12)


def test_covariance_examples():
    rep = covariance_and_se(np.zeros((5, 2)))
    np.testing.assert_array_equal(rep.covariance, np.zeros((2, 2)))
    np.testing.assert_array_equal(rep.std_errors, [0.0, 0.0])
    rep = covariance_and_se(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    np.testing.assert_allclose(rep.covariance, [[0.5, 0.0], [0.0, 0.0]])


def test_covariance_rejects_nonfinite_and_small_n():
    with pytest.raises(NumericalError):
        covariance_and_se(np.array([[np.nan, 0.0], [0.0, 0.0]]))
    with pytest.raises(ValidationError):
        covariance_and_se(np.ones((1, 2)))


def test_covariance_psd_symmetric(rng):
    for _ in range(50):
        rep = covariance_and_se(rng.standard_t(3, size=(30, 3)))
        np.testing.assert_array_equal(rep.covariance, rep.covariance.T)
        assert np.linalg.eigvalsh(rep.covariance).min() >= -1e-10 * np.trace(rep.covariance)


def test_zeta_matches_loop_oracle_ds1(ds1):
    cfg = EstimatorConfig(bandwidth=DS1_BANDWIDTH, poly_order=2)
    _, _, est, infl = _fit(ds1, cfg)
    expected = oracles.zeta_loop(ds1, est.delta_hat, est.gamma_hat, DS1_BANDWIDTH, 2)
    np.testing.assert_allclose(infl.zeta, expected, rtol=1e-9, atol=1e-11)


def test_zeta_matches_loop_oracle_period_two(ds1):
    cfg = EstimatorConfig(bandwidth=DS1_BANDWIDTH, poly_order=1, target_period=2)
    _, _, est, infl = _fit(ds1, cfg)
    expected = oracles.zeta_loop(ds1, est.delta_hat, est.gamma_hat, DS1_BANDWIDTH, 1, target_period=2)
    np.testing.assert_allclose(infl.zeta, expected, rtol=1e-9, atol=1e-11)


def test_zeta_zero_on_homogeneous(rng):
    x1 = rng.normal(size=50)
    x2 = x1 + rng.uniform(-2, 2, size=50)
    xs = np.column_stack([x1, x2])
    x = np.stack([np.ones_like(xs), xs], axis=-1)
    ds = homogeneous_panel(x, [0.0, 0.0], [0.3, 0.3])
    for period in (1, 2):
        cfg = EstimatorConfig(bandwidth=0.6, target_period=period)
        _, _, est, infl = _fit(ds, cfg)
        np.testing.assert_allclose(infl.zeta, 0.0, atol=1e-10)
        rep = inference_report(est.theta_hat, infl.zeta, cfg.ci_levels)
        np.testing.assert_allclose(rep.std_errors, 0.0, atol=1e-10)


def test_block_one_centered_randomized():
    rng = np.random.default_rng(99)
    for _ in range(100):
        x, y = random_square_panel(rng, n=int(rng.integers(20, 60)))
        ds = PanelDataset(y, x)
        _, _, _, infl = _fit(ds, EstimatorConfig(bandwidth=0.35, poly_order=int(rng.integers(1, 3))))
        assert np.max(np.abs(infl.blocks[0].mean(axis=0))) <= 1e-10


def test_zeta_linear_in_outcomes(ds1):
    cfg = EstimatorConfig()
    _, _, est, infl = _fit(ds1, cfg)
    _, _, est2, infl2 = _fit(ds1.with_outcomes(2.5 * ds1.y), cfg)
    np.testing.assert_allclose(infl2.zeta, 2.5 * infl.zeta, rtol=1e-9, atol=1e-12)
    se = covariance_and_se(infl.zeta).std_errors
    se2 = covariance_and_se(infl2.zeta).std_errors
    np.testing.assert_allclose(se2, 2.5 * se, rtol=1e-9)


def test_simulated_std_errors_positive():
    ds = generate_panel(SimulationConfig(n=500, seed=3), 0)
    cfg = EstimatorConfig()
    design, stacks, est, infl = _fit(ds, cfg)
    rep = inference_report(est.theta_hat, infl.zeta, cfg.ci_levels)
    assert np.all(rep.std_errors > 0)
    assert set(rep.intervals) == {0.9, 0.95}
    zm = mover_influence(ds, design, stacks, est, infl)
    assert np.all(covariance_and_se(zm).std_errors > 0)


def test_mover_influence_variants(ds1):
    design, stacks, est, infl = _fit(ds1, EstimatorConfig(bandwidth=DS1_BANDWIDTH))
    plain = mover_influence(ds1, design, stacks, est, infl)
    ratio = mover_influence(ds1, design, stacks, est, infl, normalize=True)
    assert plain.shape == ratio.shape == (ds1.n, 2)
    # both variants share the mover term and differ only through the mover share
    share = stacks.mover_share
    d = batch_artifacts(ds1).d
    r = oracles.residuals(ds1, est.delta_hat)
    terms = np.zeros_like(r)
    terms[stacks.mover] = r[stacks.mover] / d[stacks.mover, None]
    block1_plain = terms - terms.mean(axis=0)
    block1_ratio = (terms - stacks.mover[:, None] * est.beta_mover) / share
    np.testing.assert_allclose(block1_ratio.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(block1_plain.mean(axis=0), 0.0, atol=1e-12)
    assert np.all(np.isfinite(plain)) and np.all(np.isfinite(ratio))
    assert not np.allclose(plain, ratio)
