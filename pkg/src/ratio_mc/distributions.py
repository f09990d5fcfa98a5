"""Sampleable target and instrumental distributions.

The Gaussian and Gaussian-mixture kinds expose exact log-densities and act
as oracle references in tests; two-moons and rings are sample-only 2D toys
for the multimodal demos.  A moment-fit Gaussian built from target samples
serves as the instrumental distribution when none is given explicitly.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import ConfigError, DegenerateData, UnsupportedDensity
from .rng import RngStream
from .validation import check_points

_LOG_2PI = float(np.log(2.0 * np.pi))

# Scaled by trace(cov)/dim before being added to the diagonal in
# fit_gaussian_moments; keeps the Cholesky factorization stable for nearly
# degenerate point clouds.
COVARIANCE_RIDGE = 1e-6


class Distribution:
    """Base class: sampleable, with an optional exact log-density."""

    kind = "abstract"
    dim: int

    @property
    def has_log_pdf(self) -> bool:
        return False

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        """n iid draws, returned as an (n, dim) float64 matrix."""
        raise NotImplementedError

    def log_pdf(self, x) -> np.ndarray:
        raise UnsupportedDensity(f"{self.kind} has no tractable density")

    def to_spec(self) -> dict:
        """JSON-serializable description (the run-config schema)."""
        raise NotImplementedError


class Gaussian(Distribution):
    """Multivariate normal with an SPD covariance."""

    kind = "gaussian"

    def __init__(self, mean, cov):
        self.mean = np.asarray(mean, dtype=np.float64).reshape(-1)
        self.cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
        d = self.mean.shape[0]
        if self.cov.shape != (d, d):
            raise DegenerateData(
                f"covariance shape {self.cov.shape} does not match dimension {d}"
            )
        if not np.allclose(self.cov, self.cov.T, rtol=0.0, atol=1e-12):
            raise DegenerateData("covariance is not symmetric")
        try:
            self._chol = np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError as exc:
            raise DegenerateData(f"covariance is not positive definite: {exc}") from exc
        self.dim = d
        self._log_norm = -0.5 * d * _LOG_2PI - float(
            np.sum(np.log(np.diag(self._chol)))
        )

    def __repr__(self):
        return f"Gaussian(mean={self.mean.tolist()}, cov={self.cov.tolist()})"

    @property
    def has_log_pdf(self) -> bool:
        return True

    def sample(self, n, rng):
        if n == 0:
            return np.empty((0, self.dim), dtype=np.float64)
        z = rng.standard_normal(n * self.dim).reshape(n, self.dim)
        return self.mean + z @ self._chol.T

    def log_pdf(self, x):
        pts = check_points(x, self.dim)
        diff = pts - self.mean
        y = solve_triangular(self._chol, diff.T, lower=True)
        out = self._log_norm - 0.5 * np.sum(y * y, axis=0)
        if np.ndim(x) <= 1 and np.asarray(x).size == self.dim:
            return float(out[0])
        return out

    def to_spec(self):
        return {
            "kind": "gaussian",
            "mean": self.mean.tolist(),
            "cov": self.cov.tolist(),
        }


class GaussianMixture(Distribution):
    """Finite mixture of Gaussians with positive weights summing to 1."""

    kind = "gaussian_mixture"

    def __init__(self, weights, components):
        self.weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        self.components = list(components)
        if len(self.components) != self.weights.shape[0]:
            raise ConfigError("mixture: weights and components disagree in length")
        if len(self.components) == 0:
            raise ConfigError("mixture: needs at least one component")
        if (self.weights < 0).any():
            raise ConfigError("mixture: weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ConfigError(
                f"mixture: weights sum to {self.weights.sum()!r}, expected 1 within 1e-12"
            )
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise ConfigError(f"mixture: component dimensions disagree: {sorted(dims)}")
        self.dim = dims.pop()
        self._cum = np.cumsum(self.weights)
        self._cum[-1] = 1.0

    @property
    def has_log_pdf(self) -> bool:
        return True

    def sample(self, n, rng):
        if n == 0:
            return np.empty((0, self.dim), dtype=np.float64)
        # Component index first, then one block of normals: keeps the draw
        # order independent of which components get picked.
        u = rng.uniform(n)
        idx = np.searchsorted(self._cum, u, side="left")
        z = rng.standard_normal(n * self.dim).reshape(n, self.dim)
        out = np.empty((n, self.dim), dtype=np.float64)
        for c, comp in enumerate(self.components):
            mask = idx == c
            if mask.any():
                out[mask] = comp.mean + z[mask] @ comp._chol.T
        return out

    def log_pdf(self, x):
        pts = check_points(x, self.dim)
        per_comp = np.stack([c.log_pdf(pts) for c in self.components], axis=0)
        out = logsumexp(per_comp, b=self.weights[:, None], axis=0)
        if np.ndim(x) <= 1 and np.asarray(x).size == self.dim:
            return float(out[0])
        return out

    def to_spec(self):
        return {
            "kind": "gaussian_mixture",
            "weights": self.weights.tolist(),
            "components": [c.to_spec() for c in self.components],
        }


class TwoMoons(Distribution):
    """Two interleaved half-circles in 2D with isotropic Gaussian noise.

    Sample-only: the density exists but is not exposed.
    """

    kind = "two_moons"

    def __init__(self, noise_scale=0.1):
        if noise_scale < 0:
            raise ConfigError("two_moons: noise_scale must be >= 0")
        self.noise_scale = float(noise_scale)
        self.dim = 2

    def sample(self, n, rng):
        if n == 0:
            return np.empty((0, 2), dtype=np.float64)
        upper = rng.uniform(n) < 0.5
        t = rng.uniform(n) * np.pi
        x = np.where(upper, np.cos(t), 1.0 - np.cos(t))
        y = np.where(upper, np.sin(t), 0.5 - np.sin(t))
        pts = np.column_stack([x, y])
        pts += self.noise_scale * rng.standard_normal(2 * n).reshape(n, 2)
        return pts

    def to_spec(self):
        return {"kind": "two_moons", "noise_scale": self.noise_scale}


class Rings(Distribution):
    """Concentric circles in 2D, each picked uniformly, with Gaussian noise.

    Sample-only: the density is not exposed.
    """

    kind = "rings"

    def __init__(self, radii=(1.0, 2.0), noise_scale=0.05):
        self.radii = np.asarray(radii, dtype=np.float64).reshape(-1)
        if self.radii.size == 0 or (self.radii <= 0).any():
            raise ConfigError("rings: radii must be positive and nonempty")
        if noise_scale < 0:
            raise ConfigError("rings: noise_scale must be >= 0")
        self.noise_scale = float(noise_scale)
        self.dim = 2

    def sample(self, n, rng):
        if n == 0:
            return np.empty((0, 2), dtype=np.float64)
        k = self.radii.size
        idx = np.minimum((rng.uniform(n) * k).astype(np.int64), k - 1)
        theta = 2.0 * np.pi * rng.uniform(n)
        r = self.radii[idx]
        pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        pts += self.noise_scale * rng.standard_normal(2 * n).reshape(n, 2)
        return pts

    def to_spec(self):
        return {
            "kind": "rings",
            "radii": self.radii.tolist(),
            "noise_scale": self.noise_scale,
        }


def fit_gaussian_moments(points) -> Gaussian:
    """Gaussian with the sample mean and ridge-regularized sample covariance.

    The ridge is COVARIANCE_RIDGE * trace(S)/d on the diagonal, with S the
    sample covariance (ddof=1).  Raises DegenerateData when the result is
    still not positive definite (e.g. all points identical, where the ridge
    itself vanishes).
    """
    pts = check_points(points, name="points")
    n, d = pts.shape
    if n < d + 1:
        raise DegenerateData(f"need at least {d + 1} points to fit a {d}-D Gaussian, got {n}")
    mean = pts.mean(axis=0)
    centered = pts - mean
    cov = centered.T @ centered / (n - 1)
    ridge = COVARIANCE_RIDGE * np.trace(cov) / d
    cov = cov + ridge * np.eye(d)
    try:
        return Gaussian(mean, cov)
    except DegenerateData as exc:
        raise DegenerateData(f"moment fit failed: {exc}") from exc


def distribution_from_spec(spec) -> Distribution:
    """Build a Distribution from its JSON description."""
    if not isinstance(spec, dict):
        raise ConfigError(f"distribution spec must be an object, got {type(spec).__name__}")
    kind = spec.get("kind")
    try:
        if kind == "gaussian":
            return Gaussian(spec["mean"], spec["cov"])
        if kind == "gaussian_mixture":
            comps = [distribution_from_spec(c) for c in spec["components"]]
            if any(c.kind != "gaussian" for c in comps):
                raise ConfigError("mixture components must be gaussian specs")
            return GaussianMixture(spec["weights"], comps)
        if kind == "two_moons":
            return TwoMoons(spec.get("noise_scale", 0.1))
        if kind == "rings":
            return Rings(spec.get("radii", (1.0, 2.0)), spec.get("noise_scale", 0.05))
    except KeyError as exc:
        raise ConfigError(f"distribution spec for {kind!r} is missing field {exc}") from exc
    raise ConfigError(f"unknown distribution kind {kind!r}")
