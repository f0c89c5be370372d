import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nakmap.errors import InvalidArgumentError
from nakmap.maps import OmegaField, ParamMap
from nakmap.nakagami import NakagamiParams, analytic_score, sample
from nakmap.pipeline import (
    estimate_omega,
    low_pass,
    phantom_from_gray,
    pixel_shape_estimate,
    score_based_map,
    synthesize_envelope,
)


class TestPhantomFromGray:
    def test_affine_map(self):
        g = np.array([[0.0, 0.5], [1.0, 0.2]])
        pm = phantom_from_gray(g)
        np.testing.assert_allclose(pm.values, [[0.5, 1.25], [2.0, 0.8]])
        assert pm.mask.all()

    def test_range_check(self):
        with pytest.raises(InvalidArgumentError):
            phantom_from_gray(np.array([[0.0, 1.2]]))

    def test_dims(self):
        with pytest.raises(InvalidArgumentError):
            phantom_from_gray(np.zeros(5))


class TestSynthesizeEnvelope:
    def test_deterministic(self):
        gt = phantom_from_gray(np.full((16, 16), 0.5))
        a = synthesize_envelope(gt, 1.0, seed=3)
        b = synthesize_envelope(gt, 1.0, seed=3)
        np.testing.assert_array_equal(a, b)

    def test_per_pixel_law(self):
        # every pixel of a homogeneous phantom follows the target distribution
        gt = phantom_from_gray(np.full((256, 256), 1.0 / 3.0))  # m = 1.0
        env = synthesize_envelope(gt, 2.0, seed=4)
        assert np.mean(env**2) == pytest.approx(2.0, abs=0.02)
        ref = sample(NakagamiParams(1.0, 2.0), 256 * 256, seed=99)
        for q in (0.1, 0.5, 0.9):
            assert np.quantile(env, q) == pytest.approx(np.quantile(ref, q), abs=0.02)

    def test_bad_omega(self):
        gt = phantom_from_gray(np.zeros((4, 4)))
        with pytest.raises(InvalidArgumentError):
            synthesize_envelope(gt, 0.0, seed=0)


class TestEstimateOmega:
    def test_global(self):
        img = sample(NakagamiParams(1.0, 3.0), 0, seed=5, size=(100, 100))
        om = estimate_omega(img, "global")
        assert om.mode == "global"
        assert om.value == pytest.approx(np.mean(img**2), rel=1e-12)

    def test_roi_restriction(self):
        img = np.ones((10, 10))
        img[:5] = 2.0
        roi = np.zeros((10, 10), dtype=bool)
        roi[:5] = True
        assert estimate_omega(img, "global", roi=roi).value == pytest.approx(4.0)

    def test_local_shape(self):
        img = sample(NakagamiParams(1.0, 1.0), 0, seed=6, size=(32, 32))
        om = estimate_omega(img, "local", side=9)
        assert om.as_array((32, 32)).shape == (32, 32)

    def test_empty_roi(self):
        with pytest.raises(InvalidArgumentError):
            estimate_omega(np.ones((4, 4)), "global", roi=np.zeros((4, 4), dtype=bool))


class TestPixelShapeEstimate:
    def test_closed_form_identity(self):
        # analytic score + true scale recover the shape exactly
        p = NakagamiParams(1.7, 0.9)
        r = 0.4
        s = analytic_score(r, p)
        m, valid = pixel_shape_estimate(r, s, 0.9)
        assert valid
        assert m == pytest.approx(1.7, abs=1e-12)

    def test_identity_random_triples(self):
        rng = np.random.default_rng(12)
        worst = 0.0
        for _ in range(500):
            p = NakagamiParams(rng.uniform(0.2, 8), rng.uniform(0.2, 4))
            r = rng.uniform(0.05, 2.5) * np.sqrt(p.omega)
            denom = 2 / r - 2 * r / p.omega
            if abs(denom) < 1e-2:
                continue
            m, valid = pixel_shape_estimate(r, analytic_score(r, p), p.omega)
            if valid:
                worst = max(worst, abs(m - p.m))
        assert worst < 1e-9

    def test_singularity_masked(self):
        # r^2 = omega kills the denominator
        p = NakagamiParams(1.0, 1.0)
        m, valid = pixel_shape_estimate(1.0, analytic_score(1.0, p), 1.0)
        assert not valid

    def test_clamp_flags_invalid(self):
        # a wildly wrong score pushes the ratio outside the clamp range
        m, valid = pixel_shape_estimate(0.5, 1000.0, 1.0)
        assert not valid
        assert m == 10.0

    def test_array_path_matches_scalar(self):
        p = NakagamiParams(2.0, 1.0)
        rs = np.array([0.3, 0.5, 1.4])
        ss = analytic_score(rs, p)
        ms, vs = pixel_shape_estimate(rs, ss, 1.0)
        for r, s, m, v in zip(rs, ss, ms, vs):
            m1, v1 = pixel_shape_estimate(float(r), float(s), 1.0)
            assert m1 == pytest.approx(float(m)) and v1 == bool(v)


class TestScoreBasedMap:
    def test_oracle_recovery(self):
        gt = phantom_from_gray(np.linspace(0, 1, 64 * 64).reshape(64, 64))
        env = synthesize_envelope(gt, 1.0, seed=7)
        score = (2 * gt.values - 1) / env - 2 * gt.values * env
        pm = score_based_map(env, score, OmegaField(1.0, "global"))
        err = np.abs(pm.values - gt.values)[pm.mask]
        assert np.median(err) < 1e-9

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            score_based_map(np.ones((4, 4)), np.ones((5, 5)), OmegaField(1.0, "global"))


class TestLowPass:
    def test_single_outlier_removed(self):
        vals = np.full((15, 15), 1.0)
        vals[7, 7] = 10.0
        pm = ParamMap(vals, np.ones((15, 15), dtype=bool), {})
        out = low_pass(pm, "median", 7)
        np.testing.assert_array_equal(out.values, np.full((15, 15), 1.0))

    def test_constant_fixed_point(self):
        vals = np.full((12, 12), 1.7)
        pm = ParamMap(vals, np.ones((12, 12), dtype=bool), {})
        for kind in ("median", "average"):
            out = low_pass(pm, kind, 5)
            np.testing.assert_allclose(out.values, vals, atol=1e-12)

    def test_fills_masked_holes(self):
        vals = np.full((9, 9), 2.0)
        mask = np.ones((9, 9), dtype=bool)
        mask[4, 4] = False
        vals[4, 4] = 0.0
        out = low_pass(ParamMap(vals, mask, {}), "median", 3)
        assert out.mask[4, 4]
        assert out.values[4, 4] == pytest.approx(2.0)

    def test_all_masked_stays_masked(self):
        pm = ParamMap(np.zeros((8, 8)), np.zeros((8, 8), dtype=bool), {})
        out = low_pass(pm, "average", 3)
        assert not out.mask.any()

    def test_average_matches_nanmean(self):
        rng = np.random.default_rng(20)
        vals = rng.uniform(0.5, 2.0, (10, 10))
        mask = rng.random((10, 10)) > 0.3
        out = low_pass(ParamMap(vals, mask, {}), "average", 3)
        i, j = 5, 5
        patch = np.where(mask, vals, np.nan)[i - 1 : i + 2, j - 1 : j + 2]
        assert out.values[i, j] == pytest.approx(np.nanmean(patch))

    def test_bad_args(self):
        pm = ParamMap(np.ones((8, 8)), np.ones((8, 8), dtype=bool), {})
        with pytest.raises(InvalidArgumentError):
            low_pass(pm, "gaussian", 7)
        with pytest.raises(InvalidArgumentError):
            low_pass(pm, "median", 4)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.2, 8.0),
    st.floats(0.2, 4.0),
    st.floats(0.05, 2.5),
)
def test_closed_form_inverts_analytic_score(m, omega, r_rel):
    p = NakagamiParams(m, omega)
    r = r_rel * np.sqrt(omega)
    est, valid = pixel_shape_estimate(r, analytic_score(r, p), omega)
    if valid:
        assert est == pytest.approx(m, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_low_pass_median_idempotent_on_smooth_fields(seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0.5, 5.0)
    pm = ParamMap(np.full((10, 10), c), np.ones((10, 10), dtype=bool), {})
    out = low_pass(pm, "median", 3)
    np.testing.assert_allclose(out.values, pm.values, atol=1e-12)
