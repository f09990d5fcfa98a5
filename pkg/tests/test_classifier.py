import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import expit

import ratio_mc as rm
from ratio_mc.classifier import MlpNetwork

from conftest import true_posterior_1d


def small_net(seed=0, layers=(2, 5, 4, 1), activation="tanh"):
    return MlpNetwork.initialize(list(layers), activation, rm.RngStream(seed, 0))


def randomized_net(seed=0, layers=(2, 5, 4, 1), activation="tanh"):
    """Network with every parameter random (biases included), so relu
    kinks sit at measure-zero positions and finite differences are clean."""
    net = small_net(seed, layers, activation)
    theta = net.flat_params()
    theta += 0.3 * rm.RngStream(seed, 1).standard_normal(theta.size)
    net.set_flat_params(theta)
    return net


def numeric_grad(net, x, y, h=1e-5):
    theta = net.flat_params()
    out = np.empty_like(theta)
    for i in range(theta.size):
        up = theta.copy()
        up[i] += h
        net.set_flat_params(up)
        lp = net.bce_loss(x, y)
        dn = theta.copy()
        dn[i] -= h
        net.set_flat_params(dn)
        lm = net.bce_loss(x, y)
        out[i] = (lp - lm) / (2.0 * h)
    net.set_flat_params(theta)
    return out


def grad_rel_error(net, x, y):
    gw, gb = net.grad_bce(x, y)
    analytic = np.concatenate([g.ravel() for g in gw] + [g.ravel() for g in gb])
    numeric = numeric_grad(net, x, y)
    denom = np.maximum.reduce([np.abs(analytic), np.abs(numeric), np.full_like(numeric, 1e-6)])
    return float(np.max(np.abs(analytic - numeric) / denom))


def bayes_cross_entropy_quad():
    """Expected BCE per sample at the true posterior of the reference pair,
    by scipy quadrature (independent of the package's own grids)."""
    def h_x(x):
        return 0.5 * (np.exp(-x * x / 2) / np.sqrt(2 * np.pi)
                      + np.exp(-x * x / 8) / (2 * np.sqrt(2 * np.pi)))

    def integrand(x):
        r = expit(np.log(2.0) - 3.0 * x * x / 8.0)
        return h_x(x) * -(r * np.log(r) + (1 - r) * np.log1p(-r))

    value, err = quad(integrand, -40, 40, limit=200)
    assert err < 1e-9
    return value


class TestForward:
    def test_zero_final_layer_outputs_half(self):
        net = small_net()
        net.weights[-1][:] = 0.0
        net.biases[-1][:] = 0.0
        x = rm.RngStream(1).standard_normal(40).reshape(20, 2)
        assert (net.forward(x) == 0.5).all()

    def test_forward_deterministic(self):
        net = small_net(3)
        x = rm.RngStream(2).standard_normal(20).reshape(10, 2)
        assert np.array_equal(net.forward(x), net.forward(x))

    def test_output_strictly_inside_unit_interval(self):
        # A bare logistic unit with huge weights saturates the sigmoid.
        net = MlpNetwork([1, 1], "tanh", [np.array([[1000.0]])], [np.zeros(1)],
                         [0.0], [1.0])
        out = net.forward(np.array([[5.0], [-5.0], [0.0]]))
        assert (out > 0.0).all() and (out < 1.0).all()

    def test_trained_posterior_at_zero(self, trained_pair_classifier):
        clf, _ = trained_pair_classifier
        # True posterior at the origin is 2/3; trained value must beat 0.5.
        r0 = clf.posterior(np.array([[0.0]]))[0]
        assert 0.5 < r0 < 1.0
        assert r0 == pytest.approx(2.0 / 3.0, abs=0.05)


class TestBceLoss:
    def test_constant_half(self):
        ds = rm.LabeledDataset(np.zeros((10, 1)), [0, 1] * 5)
        loss = rm.bce_loss(rm.ConstantPosterior(0.5), ds)
        assert loss == pytest.approx(10 * np.log(2.0), rel=1e-12)

    def test_perfect_separation_hits_clamp(self):
        pts = np.array([[-1.0]] * 4 + [[1.0]] * 4)
        ds = rm.LabeledDataset(pts, [0] * 4 + [1] * 4)
        sharp = lambda x: np.where(x[:, 0] > 0, 1.0 - 1e-12, 1e-12)
        loss = rm.bce_loss(sharp, ds)
        assert loss == pytest.approx(-8 * np.log1p(-1e-7), rel=1e-6)
        assert loss < 1e-5

    def test_true_posterior_matches_quadrature(self, gauss_pair_1d):
        p1, p0 = gauss_pair_1d
        ds = rm.build_dataset(p1, p0, 10_000, 10_000, rm.RngStream(77, 0))
        empirical = rm.bce_loss(true_posterior_1d, ds) / ds.n
        assert empirical == pytest.approx(bayes_cross_entropy_quad(), abs=0.01)


class TestGradients:
    def test_balanced_symmetric_batch_zero_bias_gradient(self):
        net = small_net(4)
        net.weights[-1][:] = 0.0
        net.biases[-1][:] = 0.0
        x = rm.RngStream(5).standard_normal(16).reshape(8, 2)
        pts = np.vstack([x, -x])
        labels = np.array([1] * 8 + [0] * 8)
        _, gb = net.grad_bce(pts, labels)
        assert gb[-1] == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("activation", ["tanh", "relu"])
    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_matches_finite_differences(self, seed, activation):
        net = randomized_net(seed, activation=activation)
        x = rm.RngStream(100 + seed).standard_normal(32).reshape(16, 2)
        y = (rm.RngStream(200 + seed).uniform(16) < 0.5).astype(int)
        assert grad_rel_error(net, x, y) < 1e-4

    def test_single_sample_logit_gradient(self):
        # With r = 0.5 the loss derivative wrt the output logit is r - k.
        net = MlpNetwork([1, 1], "tanh", [np.zeros((1, 1))], [np.zeros(1)], [0.0], [1.0])
        _, gb = net.grad_bce(np.array([[3.0]]), np.array([1]))
        assert gb[-1][0] == pytest.approx(-0.5, abs=1e-15)


class TestTrain:
    def test_separable_clusters_high_accuracy(self):
        rng = rm.RngStream(8, 0)
        a = rm.Gaussian([5.0, 0.0], np.eye(2)).sample(500, rng)
        b = rm.Gaussian([-5.0, 0.0], np.eye(2)).sample(500, rng)
        ds = rm.from_samples(a, b, rng)
        clf, _ = rm.train(ds, rm.TrainConfig(epochs=40, seed=0, early_stop_patience=10))
        held_a = rm.Gaussian([5.0, 0.0], np.eye(2)).sample(1000, rm.RngStream(8, 1))
        held_b = rm.Gaussian([-5.0, 0.0], np.eye(2)).sample(1000, rm.RngStream(8, 2))
        acc = 0.5 * (clf.predict(held_a) == 1).mean() + 0.5 * (clf.predict(held_b) == 0).mean()
        assert acc >= 0.99

    def test_validation_loss_near_bayes_cross_entropy(self, trained_pair_classifier):
        _, trace = trained_pair_classifier
        best_val = min(trace.val_loss)
        assert best_val == pytest.approx(bayes_cross_entropy_quad(), abs=0.02)

    def test_training_is_deterministic(self):
        pts = rm.RngStream(30).standard_normal(400).reshape(200, 2)
        labels = (pts[:, 0] + 0.3 * pts[:, 1] > 0).astype(int)
        ds = rm.LabeledDataset(pts, labels)
        cfg = rm.TrainConfig(epochs=8, seed=3)
        clf_a, _ = rm.train(ds, cfg)
        clf_b, _ = rm.train(ds, cfg)
        assert np.array_equal(clf_a.network_.flat_params(), clf_b.network_.flat_params())

    def test_monotone_improvement(self, trained_pair_classifier):
        _, trace = trained_pair_classifier
        assert trace.returned_train_loss() <= trace.init_train_loss

    def test_rejects_single_class(self):
        ds = rm.LabeledDataset(np.zeros((4, 1)), [1, 1, 1, 1])
        with pytest.raises(ValueError):
            rm.train(ds, rm.TrainConfig(epochs=1))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_loss_aborts(self):
        pts = rm.RngStream(31).standard_normal(200).reshape(100, 2)
        labels = (pts[:, 0] > 0).astype(int)
        ds = rm.LabeledDataset(pts, labels)
        # An absurd step size overflows relu activations into inf - inf.
        cfg = rm.TrainConfig(epochs=10, seed=0, optimizer="sgd", learning_rate=1e160,
                             early_stop_patience=50)
        with pytest.raises(rm.NonFiniteLoss, match="epoch"):
            rm.train(ds, cfg, activation="relu")

    def test_logistic_regression_baseline(self):
        rng = rm.RngStream(9, 0)
        a = rm.Gaussian([3.0], [[1.0]]).sample(400, rng)
        b = rm.Gaussian([-3.0], [[1.0]]).sample(400, rng)
        ds = rm.from_samples(a, b, rng)
        clf, _ = rm.train(ds, rm.TrainConfig(epochs=60, seed=1), hidden_layer_sizes=())
        assert clf.network_.layer_sizes == [1, 1]
        assert (clf.predict(np.array([[3.0]]))[0], clf.predict(np.array([[-3.0]]))[0]) == (1, 0)


class TestOraclePosterior:
    def test_identical_distributions_equal_counts(self):
        g = rm.Gaussian([0.0], [[1.0]])
        post = rm.OraclePosterior(g, g, 10, 10)
        x = np.linspace(-3, 3, 7).reshape(-1, 1)
        assert post(x) == pytest.approx(0.5, abs=1e-15)

    def test_reference_pair_at_zero(self, gauss_pair_1d):
        p1, p0 = gauss_pair_1d
        post = rm.OraclePosterior(p1, p0, 5, 5)
        assert post(np.array([[0.0]]))[0] == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_prior_only_case(self):
        g = rm.Gaussian([0.0], [[1.0]])
        post = rm.OraclePosterior(g, g, 30, 10)
        assert post(np.array([[1.7]]))[0] == pytest.approx(0.75, rel=1e-12)

    def test_requires_log_pdf(self):
        with pytest.raises(rm.UnsupportedDensity):
            rm.OraclePosterior(rm.TwoMoons(), rm.Gaussian([0.0, 0.0], np.eye(2)), 1, 1)


def test_posterior_optimality_under_perturbation(gauss_pair_1d):
    """Quadrature expected BCE is minimized by the oracle posterior."""
    p1, p0 = gauss_pair_1d
    oracle = rm.OraclePosterior(p1, p0, 1, 1)
    grid = rm.Grid.regular_1d(-20, 20, 10_001)
    base = rm.kl_bce_consistency(p1, p0, 1, 1, oracle, grid)["expected_bce_per_sample"]
    for delta in (-0.1, -0.05, 0.05, 0.1):
        perturbed = lambda x, d=delta: np.clip(oracle(x) + d, 1e-7, 1 - 1e-7)
        ce = rm.kl_bce_consistency(p1, p0, 1, 1, perturbed, grid)["expected_bce_per_sample"]
        assert ce >= base


class TestPersistence:
    def test_round_trip_bit_exact(self, tmp_path):
        pts = rm.RngStream(40).standard_normal(200).reshape(100, 2)
        labels = (pts[:, 0] > 0).astype(int)
        clf, _ = rm.train(rm.LabeledDataset(pts, labels), rm.TrainConfig(epochs=3, seed=2))
        path = tmp_path / "model.json"
        rm.save_model(clf, path)
        loaded = rm.load_model(path)
        assert np.array_equal(loaded.network_.flat_params(), clf.network_.flat_params())
        probe = rm.RngStream(41).standard_normal(20).reshape(10, 2)
        assert np.array_equal(loaded.posterior(probe), clf.posterior(probe))
        assert loaded.n0_ == clf.n0_ and loaded.n1_ == clf.n1_

    def test_rejects_foreign_json(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text('{"format": "something-else"}\n')
        with pytest.raises(rm.ParseError):
            rm.load_model(path)


def test_sklearn_get_params_clone():
    from sklearn.base import clone

    clf = rm.MlpClassifier(hidden_layer_sizes=(8,), epochs=5, seed=7)
    params = clf.get_params()
    assert params["hidden_layer_sizes"] == (8,) and params["seed"] == 7
    dup = clone(clf)
    assert dup.get_params() == params
