"""Ratio-driven samplers: acceptance-rejection, independent MH, SIR and
self-normalized importance sampling.

Every sampler takes a RatioEstimator, so the exact-density oracle and a
trained classifier are interchangeable.  Draw orders are fixed and
documented per sampler; given the same RngStream a run is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidC
from .ratio import EnvelopeConstant, RatioEstimator
from .rng import RngStream
from .validation import check_points

DEFAULT_BUDGET_FACTOR = 100
_AR_CHUNK = 4096


@dataclass
class SampleSet:
    """Points produced by a sampler plus bookkeeping metadata.

    ``weights``, when present, are normalized to sum to 1.  ``meta`` always
    records the sampler kind, stream identity and acceptance statistics.
    """

    points: np.ndarray
    weights: Optional[np.ndarray] = None
    meta: dict = None

    def __post_init__(self):
        if self.meta is None:
            self.meta = {}


@dataclass
class ChainResult:
    """Post-burn-in Markov chain states and acceptance statistics."""

    states: np.ndarray
    acceptance_rate: float
    burn_in: int
    meta: dict


@dataclass
class Integrand:
    """A named function whose expectation under the target is wanted."""

    fn: Callable[[np.ndarray], np.ndarray]
    name: str = "f"

    def __call__(self, points) -> np.ndarray:
        vals = np.asarray(self.fn(points), dtype=np.float64).reshape(-1)
        if not np.isfinite(vals).all():
            raise ValueError(f"integrand {self.name!r} is non-finite on sampled points")
        return vals


def ar_sample(est: RatioEstimator, envelope: EnvelopeConstant, proposal,
              n_target: int, max_proposals: Optional[int] = None,
              rng: RngStream = None) -> SampleSet:
    """Acceptance-rejection with an online-refreshed envelope constant.

    Each proposal x is accepted with probability min(1, ratio(x) / C) where
    C is the envelope value *before* x is folded in; x then updates the
    envelope.  Proposals whose ratio exceeds the current C are capped at
    acceptance 1 and counted as cap events.

    Stops after ``n_target`` acceptances or ``max_proposals`` tested
    proposals (default 100 * n_target), in which case the partial result is
    flagged ``budget_exhausted`` in meta.  Draw order per chunk: proposal
    points, then one uniform per proposal; trailing draws of the final
    chunk are discarded.
    """
    if n_target < 1:
        raise ValueError("n_target must be >= 1")
    if envelope.value <= 0.0:
        raise ValueError("envelope value must be positive")
    if max_proposals is None:
        max_proposals = DEFAULT_BUDGET_FACTOR * n_target

    env_value = float(envelope.value)
    env_argmax = np.asarray(envelope.argmax_point, dtype=np.float64).copy()
    env_seen = int(envelope.n_points_seen)

    accepted = []
    n_proposed = 0
    n_accepted = 0
    clamp_events = 0
    cap_events = 0

    while n_accepted < n_target and n_proposed < max_proposals:
        k = min(_AR_CHUNK, max_proposals - n_proposed)
        pts = proposal.sample(k, rng)
        log_ratio, clamped = est.log_ratio_detail(pts)
        ratios = np.exp(log_ratio)
        u = rng.uniform(k)
        for i in range(k):
            r_i = float(ratios[i])
            n_proposed += 1
            if clamped[i]:
                clamp_events += 1
            if r_i > env_value:
                # Acceptance probability capped at 1; the envelope then
                # catches up to the new maximum.
                cap_events += 1
                accept = True
                env_value = r_i
                env_argmax = pts[i].copy()
            else:
                accept = u[i] < r_i / env_value
            env_seen += 1
            if accept:
                accepted.append(pts[i])
                n_accepted += 1
                if n_accepted == n_target:
                    break

    points = (
        np.asarray(accepted, dtype=np.float64)
        if accepted
        else np.empty((0, proposal.dim), dtype=np.float64)
    )
    meta = {
        "sampler": "ar",
        "rng": rng.describe(),
        "n_proposed": n_proposed,
        "n_accepted": n_accepted,
        "acceptance_rate": (n_accepted / n_proposed) if n_proposed else 0.0,
        "envelope_final": EnvelopeConstant(env_value, env_argmax, env_seen).to_dict(),
        "clamp_events": clamp_events,
        "cap_events": cap_events,
        "budget_exhausted": n_accepted < n_target,
    }
    return SampleSet(points=points, weights=None, meta=meta)


def imh_log_alpha(log_odds_new: float, log_odds_current: float) -> float:
    """Log acceptance probability of independent MH: min(0, new - current).

    Uses the prefactor-free log odds; the n0/n1 factors cancel exactly, so
    equal inputs give log alpha == 0.0 identically.
    """
    return min(0.0, log_odds_new - log_odds_current)


def imh_chain(est: RatioEstimator, proposal, n_steps: int,
              burn_in: Optional[int] = None, init=None,
              rng: RngStream = None) -> ChainResult:
    """Independent Metropolis-Hastings driven by the estimated ratio.

    Candidates are iid proposal draws; a candidate replaces the current
    state with probability min(1, ratio(x*) / ratio(x_t)), evaluated in log
    space with the current state's value cached.  ``init`` defaults to one
    draw from the proposal (``burn_in`` to 10% of ``n_steps``).

    Draw order: init point (if not given), then all proposal points, then
    all uniforms.
    """
    if burn_in is None:
        burn_in = n_steps // 10
    if not n_steps > burn_in >= 0:
        raise ValueError(f"need n_steps > burn_in >= 0, got {n_steps}, {burn_in}")

    if init is None:
        current = proposal.sample(1, rng)[0]
    else:
        current = check_points(init, getattr(proposal, "dim", None)).reshape(-1)
    candidates = proposal.sample(n_steps, rng)
    u = rng.uniform(n_steps)

    lo_cand, clamped = est.log_odds_detail(candidates)
    lo_current = float(est.log_odds(current.reshape(1, -1))[0])

    states = np.empty_like(candidates)
    n_accept = 0
    for t in range(n_steps):
        if u[t] < np.exp(lo_cand[t] - lo_current):
            current = candidates[t]
            lo_current = lo_cand[t]
            n_accept += 1
        states[t] = current

    meta = {
        "sampler": "imh",
        "rng": rng.describe(),
        "n_steps": n_steps,
        "n_accepted": n_accept,
        "clamp_events": int(clamped.sum()),
        "init": "proposal-draw" if init is None else "explicit",
    }
    return ChainResult(
        states=states[burn_in:],
        acceptance_rate=n_accept / n_steps,
        burn_in=burn_in,
        meta=meta,
    )


def sir_sample(est: RatioEstimator, proposal, n_proposals: int, m_resampled: int,
               scheme: str = "multinomial", rng: RngStream = None) -> SampleSet:
    """Sampling-importance-resampling with classifier weights.

    Draws N proposals, weights them by the posterior odds (the n0/n1
    prefactor cancels under normalization and is never applied), then
    resamples M points.  ``multinomial`` resampling matches iid draws from
    the weighted empirical measure; ``systematic`` is the lower-variance
    stratified variant and its output is not iid.

    The returned points are the resampled ones; the pre-resampling weights
    and proposal points live in meta.  A single point carrying all the
    weight sets the ``degenerate_weights`` flag rather than aborting.
    """
    if n_proposals < 1 or m_resampled < 1:
        raise ValueError("n_proposals and m_resampled must be >= 1")
    if scheme not in ("multinomial", "systematic"):
        raise ValueError(f"unknown resampling scheme {scheme!r}")

    pts = proposal.sample(n_proposals, rng)
    lo, clamped = est.log_odds_detail(pts)
    w = np.exp(lo - lo.max())
    weights = w / w.sum()

    cum = np.cumsum(weights)
    cum[-1] = 1.0
    if scheme == "multinomial":
        u = rng.uniform(m_resampled)
        idx = np.searchsorted(cum, u, side="left")
    else:
        u0 = rng.uniform(1)[0]
        positions = (np.arange(m_resampled) + u0) / m_resampled
        idx = np.searchsorted(cum, positions, side="left")
    idx = np.minimum(idx, n_proposals - 1)

    meta = {
        "sampler": "sir",
        "scheme": scheme,
        "rng": rng.describe(),
        "n_proposed": n_proposals,
        "n_accepted": m_resampled,
        "clamp_events": int(clamped.sum()),
        "degenerate_weights": bool(weights.max() >= 1.0 - 1e-9),
        "pre_resampling_weights": weights,
        "proposal_points": pts,
    }
    return SampleSet(points=pts[idx], weights=None, meta=meta)


def is_estimate(est: RatioEstimator, proposal, f: Integrand, n: int,
                rng: RngStream = None):
    """Self-normalized importance sampling estimate of E_target[f].

    Returns (estimate, standard error), the latter from the delta method:
    sqrt(sum(w_i^2 (f_i - mu)^2)) / sum(w_i).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    pts = proposal.sample(n, rng)
    w = est.ratio(pts)
    fv = f(pts) if isinstance(f, Integrand) else Integrand(f)(pts)
    w_sum = w.sum()
    mu = float(np.sum(w * fv) / w_sum)
    resid = fv - mu
    se = float(np.sqrt(np.sum((w * resid) ** 2)) / w_sum)
    return mu, se


def mixture_decomposition_check(p, q, C: float, grid) -> dict:
    """Check that C*q envelopes p by examining the implied second component.

    The proposal decomposes as q = (1/C) p + (1 - 1/C) reminder; a valid
    envelope makes the reminder a probability density.  Evaluates
    reminder(x) = (q(x) - p(x)/C) / (1 - 1/C) on the grid and returns its
    minimum and quadrature integral.
    """
    if C <= 1.0:
        raise InvalidC(f"envelope constant must exceed 1, got {C}")
    pts = grid.points()
    p_vals = np.exp(p.log_pdf(pts))
    q_vals = np.exp(q.log_pdf(pts))
    reminder = (q_vals - p_vals / C) / (1.0 - 1.0 / C)
    return {
        "min_reminder": float(reminder.min()),
        "reminder_integral": float(grid.integrate(reminder)),
    }
