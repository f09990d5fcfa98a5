"""Statistical verification: two-sample tests, importance-weight
diagnostics, and the quadrature cross-entropy / KL bookkeeping that ties
the empirical training loss to its population counterpart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .classifier import posterior_values
from .errors import AllZeroWeights, DimensionMismatch
from .rng import RngStream
from .validation import check_points, check_weights

_TINY = np.finfo(np.float64).tiny

KOLMOGOROV_SERIES_TERMS = 100
# Below this argument the asymptotic survival function is 1 to far beyond
# double precision, and the alternating series would need >100 terms.
_KOLMOGOROV_SMALL = 0.05


@dataclass(frozen=True)
class Grid:
    """Regular rectangular grid, one (lo, hi, n_nodes) triple per dimension.

    Used for trapezoidal quadrature; at most 2 dimensions.
    """

    axes: tuple

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 2:
            raise ValueError("Grid supports 1 or 2 dimensions")
        for lo, hi, n in self.axes:
            if not lo < hi:
                raise ValueError(f"grid axis needs lo < hi, got ({lo}, {hi})")
            if n < 2:
                raise ValueError("grid axis needs at least 2 nodes")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @classmethod
    def regular_1d(cls, lo, hi, n_nodes=10_000) -> "Grid":
        return cls(axes=((float(lo), float(hi), int(n_nodes)),))

    @classmethod
    def regular_2d(cls, lo, hi, n_nodes=500) -> "Grid":
        axis = (float(lo), float(hi), int(n_nodes))
        return cls(axes=(axis, axis))

    def axis_nodes(self, i) -> np.ndarray:
        lo, hi, n = self.axes[i]
        return np.linspace(lo, hi, n)

    def points(self) -> np.ndarray:
        """All grid nodes as an (n_total, dim) matrix, first axis slowest."""
        if self.dim == 1:
            return self.axis_nodes(0).reshape(-1, 1)
        a, b = self.axis_nodes(0), self.axis_nodes(1)
        aa, bb = np.meshgrid(a, b, indexing="ij")
        return np.column_stack([aa.ravel(), bb.ravel()])

    def _axis_weights(self, i) -> np.ndarray:
        lo, hi, n = self.axes[i]
        h = (hi - lo) / (n - 1)
        w = np.full(n, h)
        w[0] = w[-1] = h / 2.0
        return w

    def integrate(self, values) -> float:
        """Trapezoidal quadrature of values sampled at self.points()."""
        vals = np.asarray(values, dtype=np.float64).reshape(-1)
        if self.dim == 1:
            w = self._axis_weights(0)
        else:
            w = np.outer(self._axis_weights(0), self._axis_weights(1)).ravel()
        if vals.shape != w.shape:
            raise DimensionMismatch(
                f"expected {w.size} values for this grid, got {vals.size}"
            )
        return float(vals @ w)


def kolmogorov_sf(lam: float, terms: int = KOLMOGOROV_SERIES_TERMS) -> float:
    """Survival function of the Kolmogorov distribution.

    Alternating series 2 * sum_k (-1)^(k-1) exp(-2 k^2 lam^2), truncated.
    For lam below 0.05 the value is 1 to well beyond double precision.
    """
    if lam < _KOLMOGOROV_SMALL:
        return 1.0
    k = np.arange(1, terms + 1, dtype=np.float64)
    series = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * (k * lam) ** 2))
    return float(min(max(series, 0.0), 1.0))


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov test on scalar samples.

    Returns (statistic, p_value): the exact supremum distance between the
    right-continuous empirical CDFs, and the asymptotic p-value at
    effective size n_a*n_b/(n_a+n_b).
    """
    a = np.sort(np.asarray(a, dtype=np.float64).reshape(-1))
    b = np.sort(np.asarray(b, dtype=np.float64).reshape(-1))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    support = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, support, side="right") / a.size
    cdf_b = np.searchsorted(b, support, side="right") / b.size
    stat = float(np.max(np.abs(cdf_a - cdf_b)))
    n_eff = a.size * b.size / (a.size + b.size)
    return stat, kolmogorov_sf(np.sqrt(n_eff) * stat)


@dataclass
class TwoSampleReport:
    """Marginal and random-projection KS results plus moment deltas."""

    n_a: int
    n_b: int
    dim: int
    marginals: list
    projections: list

    @property
    def n_tests(self) -> int:
        return len(self.marginals) + len(self.projections)

    def min_p_value(self) -> float:
        return min(
            entry["p_value"] for entry in (*self.marginals, *self.projections)
        )

    def rejected(self, alpha: float) -> bool:
        """Bonferroni-corrected rejection across all marginal/projection tests."""
        return self.min_p_value() < alpha / self.n_tests

    def to_dict(self) -> dict:
        return {
            "n_a": self.n_a,
            "n_b": self.n_b,
            "dim": self.dim,
            "marginals": self.marginals,
            "projections": self.projections,
        }


def _as_points(sample):
    pts = getattr(sample, "points", sample)
    return check_points(pts, name="sample")


def two_sample_report(a, b, n_projections: int = 10,
                      rng: RngStream = None) -> TwoSampleReport:
    """Compare two sample sets dimension by dimension.

    Per-dimension KS statistic/p-value and mean/variance deltas, plus KS on
    ``n_projections`` random unit-vector projections (directions drawn from
    ``rng``, recorded in the report).
    """
    pa = _as_points(a)
    pb = _as_points(b)
    if pa.shape[1] != pb.shape[1]:
        raise DimensionMismatch(f"dims differ: {pa.shape[1]} vs {pb.shape[1]}")
    d = pa.shape[1]
    marginals = []
    for i in range(d):
        stat, p = ks_two_sample(pa[:, i], pb[:, i])
        marginals.append({
            "dimension": i,
            "ks_statistic": stat,
            "p_value": p,
            "mean_delta": float(pa[:, i].mean() - pb[:, i].mean()),
            "var_delta": float(pa[:, i].var() - pb[:, i].var()),
        })
    projections = []
    for j in range(n_projections):
        v = rng.standard_normal(d)
        v = v / np.linalg.norm(v)
        stat, p = ks_two_sample(pa @ v, pb @ v)
        projections.append({
            "projection": j,
            "direction": v.tolist(),
            "ks_statistic": stat,
            "p_value": p,
        })
    return TwoSampleReport(
        n_a=pa.shape[0], n_b=pb.shape[0], dim=d,
        marginals=marginals, projections=projections,
    )


def ess(weights) -> float:
    """Effective sample size (sum w)^2 / sum(w^2) of nonnegative weights."""
    w = check_weights(weights)
    total = w.sum()
    if total == 0.0:
        raise AllZeroWeights("all weights are zero")
    return float(total * total / np.sum(w * w))


def kl_bce_consistency(p1, p0, n1: int, n0: int, posterior, grid: Grid) -> dict:
    """Quadrature cross-entropy and KL of a posterior against the truth.

    With h the joint law of (point, label) implied by (p1, p0, n1, n0),
    computes

      expected_bce_per_sample = E_h[-log p_model(label | point)]
      kl_term = E_h(x)[ KL( h(label|x) || Bernoulli(posterior(x)) ) ]
      additive_gap = expected_bce_per_sample - kl_term

    The gap is the conditional label entropy and does not depend on the
    posterior, which is exactly why minimizing the empirical BCE minimizes
    the KL.
    """
    pts = grid.points()
    la = np.log(float(n1)) + p1.log_pdf(pts)
    lb = np.log(float(n0)) + p0.log_pdf(pts)
    log_hx = np.logaddexp(la, lb) - np.log(float(n1 + n0))
    hx = np.exp(log_hx)
    h1 = expit(la - lb)
    h0 = expit(lb - la)

    r = np.clip(
        np.asarray(posterior_values(posterior, pts), dtype=np.float64).reshape(-1),
        _TINY,
        float(np.nextafter(1.0, 0.0)),
    )
    log_r = np.log(r)
    log_1mr = np.log1p(-r)
    log_h1 = np.log(np.maximum(h1, _TINY))
    log_h0 = np.log(np.maximum(h0, _TINY))

    ce_density = hx * -(h1 * log_r + h0 * log_1mr)
    kl_density = hx * (h1 * (log_h1 - log_r) + h0 * (log_h0 - log_1mr))
    ce = grid.integrate(ce_density)
    kl = grid.integrate(kl_density)
    return {
        "kl_term": kl,
        "expected_bce_per_sample": ce,
        "additive_gap": ce - kl,
    }
