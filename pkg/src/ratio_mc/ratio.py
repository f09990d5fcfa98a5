"""Posterior-odds density-ratio estimation and envelope tracking.

A posterior r(x) for "x came from the target rather than the instrumental
distribution" is turned into the ratio estimate

    (n0 / n1) * r(x) / (1 - r(x)),

with r clamped into [eps, 1-eps] first so the odds stay finite, and all
arithmetic carried in log space.  The envelope constant is the running
maximum of that ratio over every point it has been offered; it seeds the
acceptance-rejection sampler and can be refreshed online as proposals come
in.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, clone

from .classifier import DEFAULT_CLAMP_EPS, MlpClassifier, posterior_values
from .dataset import LabeledDataset
from .validation import check_points


class RatioEstimator:
    """Wraps a posterior function into a density-ratio estimator.

    Immutable and safe to share across threads; the posterior must be a
    fitted classifier, an oracle, or any callable on (n, d) matrices.
    """

    def __init__(self, posterior, n0: int, n1: int, clamp_eps: float = DEFAULT_CLAMP_EPS):
        if n0 < 1 or n1 < 1:
            raise ValueError("n0 and n1 must be >= 1")
        if not 0.0 < clamp_eps < 0.5:
            raise ValueError("clamp_eps must lie in (0, 0.5)")
        self.posterior = posterior
        self.n0 = int(n0)
        self.n1 = int(n1)
        self.clamp_eps = float(clamp_eps)
        self._log_prior = np.log(float(n0)) - np.log(float(n1))

    def __repr__(self):
        return (
            f"RatioEstimator(n0={self.n0}, n1={self.n1}, clamp_eps={self.clamp_eps})"
        )

    def _clamped_r(self, x):
        r = np.asarray(posterior_values(self.posterior, x), dtype=np.float64).reshape(-1)
        clamped = (r < self.clamp_eps) | (r > 1.0 - self.clamp_eps)
        return np.clip(r, self.clamp_eps, 1.0 - self.clamp_eps), clamped

    def log_odds(self, x) -> np.ndarray:
        """logit of the clamped posterior; the ratio without its n0/n1 prefactor.

        This is the quantity IMH acceptance and SIR weights consume: the
        prefactor cancels there algebraically, so it is never added in the
        first place and rescaling n0/n1 cannot perturb those decisions.
        """
        return self.log_odds_detail(x)[0]

    def log_odds_detail(self, x):
        r, clamped = self._clamped_r(x)
        return np.log(r) - np.log1p(-r), clamped

    def log_ratio(self, x) -> np.ndarray:
        """log of (n0/n1) * r/(1-r)."""
        return self._log_prior + self.log_odds(x)

    def log_ratio_detail(self, x):
        lo, clamped = self.log_odds_detail(x)
        return self._log_prior + lo, clamped

    def ratio(self, x) -> np.ndarray:
        """(n0/n1) * r/(1-r), positive and finite for finite x."""
        return np.exp(self.log_ratio(x))


@dataclass(frozen=True)
class EnvelopeConstant:
    """Running maximum of the estimated ratio over the points seen so far."""

    value: float
    argmax_point: np.ndarray
    n_points_seen: int

    def to_dict(self) -> dict:
        return {
            "value": float(self.value),
            "argmax_point": np.asarray(self.argmax_point).reshape(-1).tolist(),
            "n_points_seen": int(self.n_points_seen),
        }


def estimate_envelope(est: RatioEstimator, ds: LabeledDataset) -> EnvelopeConstant:
    """Max of the estimated ratio over every dataset point, both labels."""
    if ds.n == 0:
        raise ValueError("dataset is empty")
    values = est.ratio(ds.points)
    k = int(np.argmax(values))
    return EnvelopeConstant(
        value=float(values[k]), argmax_point=ds.points[k].copy(), n_points_seen=ds.n
    )


def update_envelope(env: EnvelopeConstant, est: RatioEstimator, x_new) -> EnvelopeConstant:
    """Fold one more point into the running maximum; never decreases."""
    pt = check_points(x_new, name="x_new").reshape(-1)
    value = float(est.ratio(pt.reshape(1, -1))[0])
    if value > env.value:
        return EnvelopeConstant(
            value=value, argmax_point=pt.copy(), n_points_seen=env.n_points_seen + 1
        )
    return replace(env, n_points_seen=env.n_points_seen + 1)


def p_phi_unnorm(est: RatioEstimator, p0, x) -> np.ndarray:
    """Unnormalized density of the accepted samples: p0(x) * r/(1-r).

    Needs p0 to expose an exact log-pdf; raises UnsupportedDensity otherwise.
    The n0/n1 prefactor is excluded; it would cancel after normalization.
    """
    pts = check_points(x, p0.dim)
    return np.exp(p0.log_pdf(pts) + est.log_odds(pts))


def p_phi_normalizer(est: RatioEstimator, p0, m: int, rng):
    """Monte Carlo estimate of the integral of p0 * r/(1-r).

    Returns (estimate, standard error); the standard error is 0.0 for the
    degenerate single-draw case.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    z = p0.sample(m, rng)
    vals = np.exp(est.log_odds(z))
    value = float(vals.mean())
    stderr = float(vals.std(ddof=1) / np.sqrt(m)) if m > 1 else 0.0
    return value, stderr


class ClassifierRatio(BaseEstimator):
    """Density-ratio estimation by binary classification, sklearn-style.

    ``fit(X, y)`` trains the underlying classifier on labels 1 (target) vs
    0 (instrumental) and records the class counts; ``predict`` returns the
    estimated ratio target/instrumental at new points.
    """

    def __init__(self, classifier=None, clamp_eps=DEFAULT_CLAMP_EPS):
        self.classifier = classifier
        self.clamp_eps = clamp_eps

    def fit(self, X, y):
        base = self.classifier if self.classifier is not None else MlpClassifier()
        clf = clone(base)
        clf.fit(X, y)
        y = np.asarray(y).reshape(-1)
        n1 = int(np.count_nonzero(y))
        n0 = int(y.size - n1)
        self.classifier_ = clf
        self.estimator_ = RatioEstimator(clf, n0=n0, n1=n1, clamp_eps=self.clamp_eps)
        return self

    def predict(self, X, log=False) -> np.ndarray:
        if log:
            return self.estimator_.log_ratio(X)
        return self.estimator_.ratio(X)
