import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nakmap.errors import DegenerateWindowError, DomainError, InvalidArgumentError
from nakmap.nakagami import NakagamiParams, digamma, sample
from nakmap.windowed import (
    WindowSpec,
    mle_exact,
    mle_taylor,
    moment_estimate,
    sliding_map,
    wmc_map,
)


class TestWindowSpec:
    def test_defaults(self):
        s = WindowSpec(9)
        assert s.stride == 1 and s.border_policy == "shrink"

    @pytest.mark.parametrize("side", [2, 4, 1, -3])
    def test_bad_side(self, side):
        with pytest.raises(InvalidArgumentError):
            WindowSpec(side)

    def test_bad_stride(self):
        with pytest.raises(InvalidArgumentError):
            WindowSpec(9, stride=10)

    def test_bad_policy(self):
        with pytest.raises(InvalidArgumentError):
            WindowSpec(9, border_policy="wrap")


class TestMomentEstimate:
    def test_worked_numbers(self):
        r = np.array([0.8, 1.0, 1.2, 0.9, 1.1])
        m, omega = moment_estimate(r)
        assert omega == pytest.approx(1.02, rel=1e-12)
        # E[r^4] = 1.12068, var = 1.12068 - 1.02^2 = 0.08028
        assert m == pytest.approx(1.02**2 / 0.08028, rel=1e-10)

    def test_constant_window_degenerate(self):
        with pytest.raises(DegenerateWindowError):
            moment_estimate(np.full(25, 1.3))

    def test_consistency(self):
        p = NakagamiParams(2.5, 1.5)
        r = sample(p, 10**6, seed=0)
        m, omega = moment_estimate(r)
        assert m == pytest.approx(2.5, abs=0.02)
        assert omega == pytest.approx(1.5, abs=0.01)


class TestMle:
    def test_taylor_worked_numbers(self):
        r = np.array([0.8, 1.0, 1.2, 0.9, 1.1])
        delta = np.log(np.mean(r**2)) - np.mean(np.log(r**2))
        m = mle_taylor(r)
        assert m == pytest.approx(1.0 / (2.0 * delta), rel=1e-10)

    def test_exact_solves_stationarity(self):
        r = sample(NakagamiParams(1.8, 1.0), 5000, seed=4)
        m = mle_exact(r)
        delta = np.log(np.mean(r**2)) - np.mean(np.log(r**2))
        assert abs(np.log(m) - digamma(m) - delta) < 1e-10

    @pytest.mark.parametrize("m_true", [0.3, 0.7, 1.0, 2.0, 5.0, 9.0])
    def test_exact_consistency(self, m_true):
        r = sample(NakagamiParams(m_true, 1.0), 2 * 10**5, seed=8)
        assert mle_exact(r) == pytest.approx(m_true, rel=0.03)

    def test_taylor_near_exact_for_large_m(self):
        # the expansion log(m) - psi(m) ~ 1/(2m) tightens as m grows
        r = sample(NakagamiParams(6.0, 1.0), 10**5, seed=2)
        assert mle_taylor(r) == pytest.approx(mle_exact(r), rel=0.05)

    def test_nonpositive_rejected(self):
        with pytest.raises(DomainError):
            mle_taylor(np.array([1.0, 0.0, 2.0]))


class TestSlidingMap:
    def test_shapes_full_stride1(self):
        img = sample(NakagamiParams(1.0, 1.0), 0, seed=0, size=(40, 50))
        pm = sliding_map(img, WindowSpec(9), "moment")
        assert pm.values.shape == (40, 50)

    def test_homogeneous_recovery(self):
        img = sample(NakagamiParams(2.0, 1.0), 0, seed=1, size=(128, 128))
        pm = sliding_map(img, WindowSpec(11), "moment")
        interior = pm.values[20:-20, 20:-20]
        assert np.median(interior) == pytest.approx(2.0, abs=0.35)

    def test_matches_direct_window_computation(self):
        # box-filter path must agree with naive per-window moments
        rng = np.random.default_rng(3)
        img = rng.uniform(0.2, 2.0, size=(20, 20))
        pm = sliding_map(img, WindowSpec(5, border_policy="shrink"), "moment")
        for i, j in [(10, 10), (7, 13), (2, 2), (0, 0)]:
            lo_i, hi_i = max(0, i - 2), min(20, i + 3)
            lo_j, hi_j = max(0, j - 2), min(20, j + 3)
            patch = img[lo_i:hi_i, lo_j:hi_j].ravel()
            m_ref, _ = moment_estimate(patch)
            m_ref = float(np.clip(m_ref, 0.01, 10.0))
            assert pm.values[i, j] == pytest.approx(m_ref, rel=1e-9)

    def test_reflect_border(self):
        rng = np.random.default_rng(5)
        img = rng.uniform(0.2, 2.0, size=(16, 16))
        pm = sliding_map(img, WindowSpec(5, border_policy="reflect"), "moment")
        patch = np.pad(img, 2, mode="symmetric")[0:5, 0:5].ravel()
        m_ref = float(np.clip(moment_estimate(patch)[0], 0.01, 10.0))
        assert pm.values[0, 0] == pytest.approx(m_ref, rel=1e-9)

    def test_stride_fill(self):
        img = sample(NakagamiParams(1.0, 1.0), 0, seed=6, size=(30, 30))
        a = sliding_map(img, WindowSpec(9, stride=1), "moment")
        b = sliding_map(img, WindowSpec(9, stride=3), "moment")
        assert b.values.shape == a.values.shape
        # strided map is piecewise constant on 3x3 cells
        assert np.unique(b.values).size < np.unique(a.values).size

    def test_constant_image_masked(self):
        pm = sliding_map(np.ones((16, 16)), WindowSpec(5), "moment")
        assert not pm.mask.any()
        assert pm.masked_fraction == 1.0

    def test_mle_taylor_map_runs(self):
        img = sample(NakagamiParams(1.5, 1.0), 0, seed=7, size=(48, 48))
        pm = sliding_map(img, WindowSpec(9), "mle_taylor")
        assert np.median(pm.valid_values()) == pytest.approx(1.5, abs=0.4)

    def test_unknown_estimator(self):
        with pytest.raises(InvalidArgumentError):
            sliding_map(np.ones((8, 8)), WindowSpec(3), "bogus")


class TestWmc:
    def test_identical_windows_bit_exact(self):
        img = sample(NakagamiParams(1.0, 1.0), 0, seed=9, size=(32, 32))
        spec = WindowSpec(9)
        single = sliding_map(img, spec, "moment")
        multi = wmc_map(img, [spec, spec, spec])
        np.testing.assert_array_equal(single.values, multi.values)

    def test_three_window_mean(self):
        img = sample(NakagamiParams(1.2, 1.0), 0, seed=10, size=(40, 40))
        specs = [WindowSpec(s) for s in (9, 11, 13)]
        maps = [sliding_map(img, s, "moment").values for s in specs]
        combined = wmc_map(img, specs)
        ref = np.mean(np.stack(maps), axis=0)
        ok = ~combined.mask
        np.testing.assert_allclose(combined.values[ok], ref[ok], atol=1e-12)

    def test_empty_specs(self):
        with pytest.raises(InvalidArgumentError):
            wmc_map(np.ones((8, 8)), [])


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 4.0), st.integers(0, 1000))
def test_moment_scale_invariance_of_shape(scale, seed):
    # m depends only on the shape of the amplitude distribution, not its scale
    r = sample(NakagamiParams(1.5, 1.0), 500, seed=seed)
    m1, o1 = moment_estimate(r)
    m2, o2 = moment_estimate(scale * r)
    assert m2 == pytest.approx(m1, rel=1e-9)
    assert o2 == pytest.approx(scale * scale * o1, rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 4.0), st.integers(0, 1000))
def test_mle_scale_invariance(scale, seed):
    r = sample(NakagamiParams(1.5, 1.0), 500, seed=seed)
    assert mle_taylor(scale * r) == pytest.approx(mle_taylor(r), rel=1e-9)
    assert mle_exact(scale * r) == pytest.approx(mle_exact(r), rel=1e-8)
