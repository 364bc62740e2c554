import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from rssvar.estimators import (
    EstimatorId,
    TableWeights,
    UnsupportedProfileError,
    concomitant_variance,
    constant_weights,
    pooled_weights,
    upper_triangle,
    var_concomitant,
    var_frey_feeman,
    var_jps_stratified,
    var_maceachern,
    var_rss_empirical,
)
from rssvar.kernreg import InsufficientDataError
from rssvar.sampling import (
    DesignError,
    RankingModel,
    TargetTransform,
    draw_ds_sample,
    draw_jps_sample,
    draw_rss_sample,
)

values = st.floats(-10, 10, allow_nan=False)


@st.composite
def balanced(draw, max_k=4, max_n=5):
    k = draw(st.integers(1, max_k))
    n = draw(st.integers(2, max_n))
    return {r: draw(arrays(float, n, elements=values)) for r in range(1, k + 1)}


@st.composite
def post_strata(draw, max_k=5):
    k = draw(st.integers(1, max_k))
    data = {r: draw(arrays(float, st.integers(0, 4), elements=values)) for r in range(1, k + 1)}
    if not any(v.size for v in data.values()):
        data[1] = draw(arrays(float, st.integers(1, 3), elements=values))
    return data


def close(a, b, rel=1e-9):
    return abs(a - b) <= rel * max(1.0, abs(b))


class TestEmpirical:
    def test_examples(self):
        assert var_rss_empirical([3.0, 3.0, 3.0]).value == 0.0
        assert var_rss_empirical([0.0, 1.0]).value == 0.5
        assert var_rss_empirical([0.0, 2.0, 4.0]).value == 4.0
        assert var_rss_empirical([0.0, 1.0]).estimator_id is EstimatorId.RSS

    def test_needs_two(self):
        with pytest.raises(InsufficientDataError):
            var_rss_empirical([1.0])


class TestMacEachern:
    def test_constant(self):
        assert var_maceachern({1: [2.0, 2.0], 2: [2.0, 2.0]}).value == 0.0

    def test_k1_two_points(self):
        assert var_maceachern({1: [0.0, 2.0]}).value == pytest.approx(2.0)

    def test_k2(self):
        assert var_maceachern({1: [0.0, 2.0], 2: [1.0, 3.0]}).value == pytest.approx(1.75)

    def test_accepts_rss_sample(self):
        s = draw_rss_sample(4, 3, RankingModel(0.8), TargetTransform.IDENTITY, np.random.default_rng(0))
        strata = [list(s.y[s.rank == r]) for r in (1, 2, 3)]
        assert var_maceachern(s).value == pytest.approx(oracles.maceachern(strata), rel=1e-12)

    def test_rejects_other_designs(self):
        g = np.random.default_rng(0)
        jps = draw_jps_sample(12, 3, RankingModel(0.8), TargetTransform.IDENTITY, g)
        with pytest.raises(DesignError):
            var_maceachern(jps)
        with pytest.raises(DesignError):
            var_maceachern({1: [0.0, 1.0], 2: [1.0, 2.0, 3.0]})
        with pytest.raises(InsufficientDataError):
            var_maceachern({1: [0.0], 2: [1.0]})

    @given(balanced())
    def test_matches_oracle(self, data):
        expected = oracles.maceachern([list(v) for _, v in sorted(data.items())])
        assert close(var_maceachern(data).value, expected)

    @given(st.integers(2, 8).flatmap(lambda n: arrays(float, n, elements=values)))
    def test_k1_equals_empirical(self, ys):
        assert close(var_maceachern({1: ys}).value, var_rss_empirical(ys).value)


class TestJPS:
    def test_examples(self):
        assert var_jps_stratified({1: [4.0], 2: [], 3: [4.0, 4.0]}).value == 0.0
        assert var_jps_stratified({1: [0.0, 2.0], 2: []}).value == pytest.approx(1.0)
        assert var_jps_stratified({1: [0.0], 2: [2.0]}).value == pytest.approx(1.0)

    def test_all_empty(self):
        with pytest.raises(InsufficientDataError):
            var_jps_stratified({1: [], 2: []})

    @given(post_strata())
    def test_matches_oracle(self, data):
        expected = oracles.jps([list(v) for _, v in sorted(data.items())])
        # the oracle subtracts two moments directly, so allow for its cancellation
        assert abs(var_jps_stratified(data).value - expected) <= 1e-12 * 400


class TestFreyFeeman:
    def test_constant(self):
        assert var_frey_feeman({1: [1.0, 1.0], 2: [1.0]}, constant_weights(0.3)).value == 0.0

    def test_single_stratum(self):
        assert var_frey_feeman({1: [0.0, 2.0]}, constant_weights(0.5)).value == pytest.approx(2.0)

    def test_two_strata(self):
        assert var_frey_feeman({1: [0.0, 2.0], 2: [1.0]}, constant_weights(0.25)).value == pytest.approx(1.5)

    def test_reorders_by_size(self):
        # w_11 applies to the larger stratum whatever its rank
        w = TableWeights({(2, 1): upper_triangle((2, 1), [1.0, 0.0, 5.0])})
        assert var_frey_feeman({1: [7.0], 2: [0.0, 3.0]}, w).value == pytest.approx(9.0)

    def test_missing_profile(self):
        w = TableWeights({(2,): [[0.5]]})
        with pytest.raises(UnsupportedProfileError):
            var_frey_feeman({1: [0.0], 2: [1.0]}, w)

    @given(post_strata())
    def test_pooled_stub_gives_sample_variance(self, data):
        ys = np.concatenate([v for v in data.values()])
        if ys.size < 2:
            return
        assert close(var_frey_feeman(data, pooled_weights).value, var_rss_empirical(ys).value)

    @given(post_strata())
    def test_matches_oracle(self, data):
        def weight(profile, i, j):
            return (1 + i + 2 * j) / (1 + sum(profile) + profile[i])

        def provider(profile):
            m = len(profile)
            return np.array([[weight(profile, min(i, j), max(i, j)) for j in range(m)] for i in range(m)])

        expected = oracles.frey_feeman([list(v) for _, v in sorted(data.items())], weight)
        assert close(var_frey_feeman(data, provider).value, expected)


class TestWeightsUnpacking:
    def test_upper_triangle(self):
        w = upper_triangle((3, 2, 1), [1, 2, 3, 4, 5, 6])
        assert w.tolist() == [[1, 2, 3], [2, 4, 5], [3, 5, 6]]

    def test_wrong_count(self):
        with pytest.raises(ValueError):
            upper_triangle((3, 2), [1.0, 2.0])


class TestConcomitant:
    def test_constant_response(self):
        xs = np.array([-1.0, 0.2, 0.9, 1.7])
        pool = np.concatenate([xs, [-3.0, 0.0, 4.0]])
        est = concomitant_variance(np.full(4, 2.5), xs, pool)
        assert est.value == pytest.approx(0.0, abs=1e-12)
        assert est.estimator_id is EstimatorId.N

    def test_matches_oracle_small(self):
        g = np.random.default_rng(21)
        xs = g.standard_normal(6)
        ys = 1.0 + 2.0 * xs + 0.3 * g.standard_normal(6)
        pool = np.concatenate([xs, g.standard_normal(12)])
        est = concomitant_variance(ys, xs, pool)
        assert est.value == pytest.approx(oracles.concomitant(list(ys), list(xs), list(pool)), rel=1e-12)
        h1, h2 = est.bandwidths
        grid = oracles.grid(6)
        assert h1 == pytest.approx(oracles.cv_bandwidth(list(xs), list(ys), grid))
        assert h2 == pytest.approx(oracles.cv_bandwidth(list(xs), list(ys**2), grid))

    @pytest.mark.parametrize("draw", [draw_rss_sample, draw_jps_sample, draw_ds_sample])
    def test_each_design(self, draw):
        g = np.random.default_rng(5)
        size = 3 if draw is not draw_jps_sample else 9
        s = draw(size, 3, RankingModel(0.8), TargetTransform.NORMAL_CDF, g)
        est = var_concomitant(s)
        expected = oracles.concomitant(list(s.y), list(s.x), list(s.pool))
        assert est.value == pytest.approx(expected, rel=1e-12)
        assert est.estimator_id is (EstimatorId.N_DS if draw is draw_ds_sample else EstimatorId.N)

    @settings(max_examples=40, deadline=None)
    @given(arrays(float, st.integers(3, 8), elements=st.floats(-2, 2), unique=True),
           st.floats(-5, 5), st.floats(0.2, 2.0))
    def test_shift_invariant_with_common_bandwidth(self, xs, c, h):
        ys = np.sin(xs) + xs
        pool = np.concatenate([xs, xs / 2 + 0.1])
        base = concomitant_variance(ys, xs, pool, h1=h, h2=h).value
        shifted = concomitant_variance(ys + c, xs, pool, h1=h, h2=h).value
        assert shifted == pytest.approx(base, abs=1e-9 * (1 + c * c))

    def test_not_clamped(self):
        # differing bandwidths can push the estimate below zero
        xs = np.array([0.0, 0.1, 0.2, 3.0])
        ys = np.array([0.0, 0.0, 0.0, 1.0])
        pool = np.array([3.0] * 10 + [0.0])
        assert concomitant_variance(ys, xs, pool, h1=0.1, h2=5.0).value < 0

    def test_needs_two_units(self):
        with pytest.raises(InsufficientDataError):
            concomitant_variance([1.0], [0.0], [0.0, 1.0])


@given(post_strata(), st.floats(-50, 50), st.floats(0.1, 5))
def test_location_and_scale(data, c, a):
    shifted = {r: np.asarray(v) + c for r, v in data.items()}
    scaled = {r: a * np.asarray(v) for r, v in data.items()}
    base = var_jps_stratified(data).value
    assert var_jps_stratified(shifted).value == pytest.approx(base, abs=1e-9 * (1 + c * c))
    assert var_jps_stratified(scaled).value == pytest.approx(a * a * base, rel=1e-9, abs=1e-12)
    w = constant_weights(0.1)
    assert var_frey_feeman(shifted, w).value == pytest.approx(var_frey_feeman(data, w).value, rel=1e-9, abs=1e-9)
    ys = np.concatenate(list(data.values()))
    if ys.size >= 2:
        v = var_rss_empirical(ys).value
        assert var_rss_empirical(ys + c).value == pytest.approx(v, abs=1e-9 * (1 + c * c))
        assert var_rss_empirical(a * ys).value == pytest.approx(a * a * v, rel=1e-9, abs=1e-12)


@given(balanced(), st.floats(-50, 50), st.floats(0.1, 5))
def test_maceachern_location_and_scale(data, c, a):
    base = var_maceachern(data).value
    assert var_maceachern({r: v + c for r, v in data.items()}).value == pytest.approx(base, abs=1e-9)
    assert var_maceachern({r: a * v for r, v in data.items()}).value == pytest.approx(a * a * base, rel=1e-9, abs=1e-12)


@given(balanced(), post_strata())
def test_nonnegative(bal, strata):
    assert var_maceachern(bal).value >= 0
    assert var_jps_stratified(strata).value >= 0
