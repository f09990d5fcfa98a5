import numpy as np
import pytest

import ratio_mc as rm


def analytic_log_ratio(x):
    """Exact log(p1/p0) for the N(0,1) vs N(0,4) reference pair."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return np.log(2.0) - 3.0 * x * x / 8.0


def true_posterior_1d(pts):
    """Exact class-1 posterior for the reference pair with equal counts."""
    from scipy.special import expit

    return expit(analytic_log_ratio(np.asarray(pts)[:, 0]))


@pytest.fixture(scope="session")
def gauss_pair_1d():
    return rm.Gaussian([0.0], [[1.0]]), rm.Gaussian([0.0], [[4.0]])


@pytest.fixture(scope="session")
def oracle_est_1d(gauss_pair_1d):
    p1, p0 = gauss_pair_1d
    return rm.RatioEstimator(rm.OraclePosterior(p1, p0, 1, 1), n0=1, n1=1)


@pytest.fixture(scope="session")
def pair_dataset_1d(gauss_pair_1d):
    p1, p0 = gauss_pair_1d
    return rm.build_dataset(p1, p0, 10_000, 10_000, rm.RngStream(2024, 0))


@pytest.fixture(scope="session")
def trained_pair_classifier(pair_dataset_1d):
    """One classifier trained on the reference pair, shared across tests."""
    clf, trace = rm.train(pair_dataset_1d, rm.TrainConfig(seed=1))
    return clf, trace
