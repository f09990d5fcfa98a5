import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import ratio_mc as rm

from conftest import analytic_log_ratio


def const_est(value, n0=1, n1=1, eps=1e-7):
    return rm.RatioEstimator(rm.ConstantPosterior(value), n0=n0, n1=n1, clamp_eps=eps)


class TestRatioHat:
    def test_half_posterior_equal_counts_is_one(self):
        est = const_est(0.5)
        x = np.linspace(-5, 5, 11).reshape(-1, 1)
        assert (est.ratio(x) == 1.0).all()

    def test_two_thirds_posterior_is_two(self):
        est = const_est(2.0 / 3.0)
        assert est.ratio(np.zeros((1, 1)))[0] == pytest.approx(2.0, rel=1e-12)

    def test_oracle_at_origin_matches_density_ratio(self, oracle_est_1d, gauss_pair_1d):
        p1, p0 = gauss_pair_1d
        r = oracle_est_1d.ratio(np.zeros((1, 1)))[0]
        exact = np.exp(p1.log_pdf([0.0]) - p0.log_pdf([0.0]))
        assert r == pytest.approx(2.0, rel=1e-12)
        assert r == pytest.approx(exact, rel=1e-12)

    def test_prior_odds_prefactor(self):
        est = const_est(0.5, n0=30, n1=10)
        assert est.ratio(np.zeros((1, 1)))[0] == pytest.approx(3.0, rel=1e-12)


class TestLogRatioHat:
    def test_half_posterior_is_zero(self):
        est = const_est(0.5)
        assert est.log_ratio(np.zeros((3, 1))) == pytest.approx(0.0, abs=1e-15)

    def test_clamp_boundary_is_finite(self):
        est = const_est(1.0 - 1e-12)  # clamped down to 1 - 1e-7
        lo = est.log_ratio(np.zeros((1, 1)))[0]
        assert np.isfinite(lo)
        # The complement of the clamp bound is quantized at ~5.6e-10 relative,
        # so only absolute agreement at that scale is meaningful here.
        assert lo == pytest.approx(np.log((1.0 - 1e-7) / 1e-7), abs=1e-8)

    def test_exp_consistency(self, oracle_est_1d):
        x = np.linspace(-4, 4, 33).reshape(-1, 1)
        assert np.exp(oracle_est_1d.log_ratio(x)) == pytest.approx(
            oracle_est_1d.ratio(x), rel=1e-14
        )

    def test_oracle_matches_analytic_on_grid(self, oracle_est_1d):
        x = np.linspace(-3, 3, 101)
        err = np.abs(oracle_est_1d.log_ratio(x.reshape(-1, 1)) - analytic_log_ratio(x))
        assert err.max() < 1e-10


class TestEnvelope:
    def test_constant_ratio(self):
        ds = rm.LabeledDataset(np.linspace(-2, 2, 10).reshape(-1, 1), [0, 1] * 5)
        env = rm.estimate_envelope(const_est(0.5), ds)
        assert env.value == 1.0
        assert env.n_points_seen == 10

    def test_dataset_containing_mode_attains_sup(self, oracle_est_1d):
        pts = np.concatenate([[0.0], np.linspace(-3, 3, 200)]).reshape(-1, 1)
        ds = rm.LabeledDataset(pts, np.zeros(len(pts), dtype=int))
        env = rm.estimate_envelope(oracle_est_1d, ds)
        assert env.value == pytest.approx(2.0, rel=1e-12)
        assert env.argmax_point[0] == 0.0

    def test_dataset_missing_mode_underestimates(self, oracle_est_1d):
        x = np.linspace(1.0, 4.0, 500)
        x = np.concatenate([x, -x]).reshape(-1, 1)
        ds = rm.LabeledDataset(x, np.zeros(len(x), dtype=int))
        env = rm.estimate_envelope(oracle_est_1d, ds)
        # Analytic sup over |x| >= 1 is 2*exp(-3/8), attained at the boundary.
        assert env.value == pytest.approx(2.0 * np.exp(-3.0 / 8.0), rel=1e-6)
        assert env.value < 2.0

    def test_update_keeps_maximum(self, oracle_est_1d):
        env = rm.EnvelopeConstant(1.0, np.array([3.0]), 1)
        worse = rm.update_envelope(env, oracle_est_1d, [2.5])
        assert worse.value == 1.0 and worse.n_points_seen == 2
        better = rm.update_envelope(worse, oracle_est_1d, [0.1])
        assert better.value > 1.9
        assert better.argmax_point[0] == 0.1

    def test_stream_of_proposals_converges_upward(self, oracle_est_1d, gauss_pair_1d):
        _, p0 = gauss_pair_1d
        draws = p0.sample(10_000, rm.RngStream(60, 0))
        ratios = oracle_est_1d.ratio(draws)
        env_values = np.maximum.accumulate(ratios)
        env = rm.EnvelopeConstant(ratios[0], draws[0], 1)
        for i in range(1, 200):  # API-level fold on a prefix, then vectorized check
            env = rm.update_envelope(env, oracle_est_1d, draws[i])
            assert env.value == env_values[i]
        assert (env_values <= 2.0 + 1e-12).all()
        assert env_values[-1] > 1.99


class TestPPhi:
    def test_half_posterior_reduces_to_proposal_density(self, gauss_pair_1d):
        _, p0 = gauss_pair_1d
        est = const_est(0.5)
        x = np.linspace(-5, 5, 41).reshape(-1, 1)
        assert rm.p_phi_unnorm(est, p0, x) == pytest.approx(
            np.exp(p0.log_pdf(x)), rel=1e-14
        )

    def test_oracle_recovers_target_density(self, oracle_est_1d, gauss_pair_1d):
        p1, p0 = gauss_pair_1d
        x = np.linspace(-6, 6, 101).reshape(-1, 1)
        vals = rm.p_phi_unnorm(oracle_est_1d, p0, x)
        assert vals == pytest.approx(np.exp(p1.log_pdf(x)), rel=1e-10)

    def test_far_tail_vanishes(self, oracle_est_1d, gauss_pair_1d):
        _, p0 = gauss_pair_1d
        assert rm.p_phi_unnorm(oracle_est_1d, p0, np.array([[40.0]]))[0] < 1e-60

    def test_requires_density(self, oracle_est_1d):
        with pytest.raises(rm.UnsupportedDensity):
            rm.p_phi_unnorm(oracle_est_1d, rm.Rings(), np.zeros((1, 2)))

    def test_normalizer_constant_posterior_exact(self, gauss_pair_1d):
        _, p0 = gauss_pair_1d
        for m in (1, 7, 1000):
            value, se = rm.p_phi_normalizer(const_est(0.5), p0, m, rm.RngStream(61, m))
            assert value == 1.0
            assert se == 0.0

    def test_normalizer_oracle_near_one(self, oracle_est_1d, gauss_pair_1d):
        _, p0 = gauss_pair_1d
        value, se = rm.p_phi_normalizer(oracle_est_1d, p0, 10**5, rm.RngStream(62, 0))
        assert se > 0
        assert abs(value - 1.0) < 3 * se

    def test_normalizer_single_draw(self, oracle_est_1d, gauss_pair_1d):
        _, p0 = gauss_pair_1d
        value, se = rm.p_phi_normalizer(oracle_est_1d, p0, 1, rm.RngStream(63, 0))
        assert np.isfinite(value) and value > 0
        assert se == 0.0

    def test_normalized_density_integrates_to_one(self, oracle_est_1d, gauss_pair_1d):
        _, p0 = gauss_pair_1d
        normalizer, _ = rm.p_phi_normalizer(oracle_est_1d, p0, 10**6, rm.RngStream(64, 0))
        grid = rm.Grid.regular_1d(-20, 20, 10_001)
        vals = rm.p_phi_unnorm(oracle_est_1d, p0, grid.points()) / normalizer
        assert grid.integrate(vals) == pytest.approx(1.0, abs=1e-2)


@given(
    a=st.floats(min_value=1e-9, max_value=1e6, allow_nan=False),
    b=st.floats(min_value=1e-9, max_value=1e6, allow_nan=False),
)
@settings(max_examples=300, deadline=None)
def test_odds_identity_round_trip(a, b):
    """r = a/(a+b) and its complement recover a/b to 1e-12."""
    s = a + b
    r1, r0 = a / s, b / s
    assert abs(r1 / r0 - a / b) <= 1e-12 * (a / b)


@given(st.lists(st.floats(min_value=0.0, max_value=1e6, allow_nan=False), min_size=1, max_size=50))
@settings(max_examples=200, deadline=None)
def test_envelope_updates_never_decrease(values):
    est = const_est(0.5)

    class FakeRatio:
        clamp_eps = 1e-7

        def __init__(self, seq):
            self.seq = list(seq)

        def ratio(self, x):
            return np.array([self.seq[int(x[0, 0])]])

    fake = FakeRatio(values)
    env = rm.EnvelopeConstant(0.0, np.array([0.0]), 0)
    prev = env.value
    for i in range(len(values)):
        env = rm.update_envelope(env, fake, [float(i)])
        assert env.value >= prev
        prev = env.value
    assert env.value == max(values)


def test_validation_of_counts_and_eps():
    with pytest.raises(ValueError):
        rm.RatioEstimator(rm.ConstantPosterior(0.5), n0=0, n1=1)
    with pytest.raises(ValueError):
        rm.RatioEstimator(rm.ConstantPosterior(0.5), n0=1, n1=1, clamp_eps=0.7)


def test_classifier_ratio_estimator_api():
    rng = rm.RngStream(65, 0)
    a = rm.Gaussian([1.5], [[1.0]]).sample(300, rng)
    b = rm.Gaussian([-1.5], [[1.0]]).sample(300, rng)
    ds = rm.from_samples(a, b, rng)
    cr = rm.ClassifierRatio(rm.MlpClassifier(hidden_layer_sizes=(8,), epochs=20, seed=0))
    cr.fit(ds.points, ds.labels)
    ratios = cr.predict(np.array([[1.5], [-1.5]]))
    assert (ratios > 0).all()
    assert ratios[0] > 1.0 > ratios[1]
    assert np.exp(cr.predict(np.array([[0.5]]), log=True)) == pytest.approx(
        cr.predict(np.array([[0.5]])), rel=1e-12
    )
    assert cr.get_params()["clamp_eps"] == 1e-7
