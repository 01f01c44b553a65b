"""Concentration and generalization utilities.

Tail bounds for sums sampled without replacement from a bounded finite
population, a Monte-Carlo estimator to check them against, an exhaustive
empirical-vs-true error gap checker over a finite hypothesis class, and the
standard voting-classifier generalization bound calculators. All universal
constants that the underlying statements leave unspecified are explicit
arguments defaulting to 1, so reported values are "up to that constant".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Concept, Hypothesis, WeightVector, weighted_error
from .errors import InvalidInput
from .seeding import rng_for

_Z95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class Population:
    """Finite list of real values confined to [0, 1/rho]."""

    values: np.ndarray
    rho: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size == 0:
            raise InvalidInput("population must be a nonempty 1-d array")
        if self.rho <= 0:
            raise InvalidInput("rho must be positive")
        if vals.min() < 0 or vals.max() > 1.0 / self.rho:
            raise InvalidInput("population values must lie in [0, 1/rho]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def size(self) -> int:
        return int(self.values.shape[0])

    def expected_sum(self, n: int) -> float:
        """Mean of the sum of n uniform draws (with or without replacement)."""
        return n * float(self.values.mean())


def without_replacement_tail_bound(
    population: Population, n: int, delta: float, mu: float, side: str
) -> float:
    """Chernoff-style tail bound for n draws without replacement.

    Lower tail: P[sum <= (1-delta)*mu] <= exp(-rho*delta^2*mu/2) for any
    mu at most the expected sum. Upper tail: P[sum >= (1+delta)*mu] <=
    exp(-rho*delta^2*mu/3) for any mu at least the expected sum.
    """
    if side not in ("lower", "upper"):
        raise InvalidInput("side must be 'lower' or 'upper'")
    if not 0.0 < delta < 1.0:
        raise InvalidInput("delta must lie in (0, 1)")
    if n < 0 or n > population.size:
        raise InvalidInput("n must lie in [0, population size]")
    if mu < 0:
        raise InvalidInput("mu must be nonnegative")
    expected = population.expected_sum(n)
    if side == "lower" and mu > expected + 1e-12:
        raise InvalidInput(f"lower tail needs mu <= E[sum] = {expected!r}")
    if side == "upper" and mu < expected - 1e-12:
        raise InvalidInput(f"upper tail needs mu >= E[sum] = {expected!r}")
    denom = 2.0 if side == "lower" else 3.0
    return math.exp(-population.rho * delta**2 * mu / denom)


def wilson_interval(hits: int, trials: int, z: float = _Z95):
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise InvalidInput("trials must be positive")
    if not 0 <= hits <= trials:
        raise InvalidInput("hits must lie in [0, trials]")
    phat = hits / trials
    denom = 1.0 + z**2 / trials
    center = (phat + z**2 / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / trials + z**2 / (4 * trials**2))
    low = 0.0 if hits == 0 else max(0.0, center - half)
    high = 1.0 if hits == trials else min(1.0, center + half)
    return low, high


@dataclass(frozen=True)
class TailEstimate:
    estimate: float
    ci_low: float
    ci_high: float
    hits: int
    trials: int


def monte_carlo_tail_estimate(
    population: Population,
    n: int,
    threshold: float,
    trials: int,
    seed,
    side: str = "lower",
    chunk: int = 20000,
) -> TailEstimate:
    """Empirical tail frequency for the sum of n draws without replacement.

    ``side='lower'`` counts sums <= threshold, ``'upper'`` counts
    sums >= threshold. Subsets are exactly uniform: each trial ranks the
    population by independent random keys and takes the n smallest.
    """
    if side not in ("lower", "upper"):
        raise InvalidInput("side must be 'lower' or 'upper'")
    if trials < 1:
        raise InvalidInput("trials must be positive")
    if n < 1 or n > population.size:
        raise InvalidInput("n must lie in [1, population size]")
    rng = rng_for(seed, "mc-tail")
    vals = population.values
    hits = 0
    remaining = trials
    while remaining > 0:
        batch = min(chunk, remaining)
        keys = rng.random((batch, population.size))
        picks = np.argpartition(keys, n - 1, axis=1)[:, :n]
        sums = vals[picks].sum(axis=1)
        if side == "lower":
            hits += int(np.count_nonzero(sums <= threshold))
        else:
            hits += int(np.count_nonzero(sums >= threshold))
        remaining -= batch
    low, high = wilson_interval(hits, trials)
    return TailEstimate(hits / trials, low, high, hits, trials)


@dataclass(frozen=True)
class ApproxReport:
    holds: bool
    worst_h: int
    worst_gap: float


def is_eps_approximation(
    sample,  # multiset of domain indices
    dist: WeightVector,
    hypotheses: Sequence[Hypothesis],
    concept: Concept,
    eps: float,
) -> ApproxReport:
    """Does the sample estimate every hypothesis's error within eps?

    Exhaustive over the class: for each hypothesis, compare its true
    weighted error under ``dist`` with its empirical error frequency on the
    multiset. Reports the worst offender (ties to the lowest id).
    """
    sample = np.asarray(sample, dtype=np.int64)
    if sample.ndim != 1 or sample.size == 0:
        raise InvalidInput("sample must be a nonempty multiset")
    if not hypotheses:
        raise InvalidInput("hypothesis list must be nonempty")
    if eps < 0:
        raise InvalidInput("eps must be nonnegative")
    order = np.argsort([h.id for h in hypotheses], kind="stable")
    worst_gap = -1.0
    worst_id = -1
    for i in order:
        h = hypotheses[i]
        true_err = weighted_error(h, concept, dist)
        emp_err = float(np.mean(h.predictions[sample] != concept.labels[sample]))
        gap = abs(true_err - emp_err)
        if gap > worst_gap:
            worst_gap = gap
            worst_id = h.id
    return ApproxReport(holds=worst_gap <= eps, worst_h=worst_id, worst_gap=worst_gap)


def epsilon_approximation_sample_size(
    d: int, eps: float, delta: float, b: float = 1.0
) -> int:
    """Sample count ceil(b * (d + ln(1/delta)) / eps^2) sufficient for an
    eps-approximation with probability 1-delta, up to the constant b."""
    if d < 1 or eps <= 0 or not 0 < delta < 1 or b <= 0:
        raise InvalidInput("need d >= 1, eps > 0, delta in (0,1), b > 0")
    return math.ceil(b * (d + math.log(1.0 / delta)) / eps**2)


def adaboost_generalization_bound(
    d: int, m: int, delta: float, gamma: float, constant: float = 1.0
) -> float:
    """constant * (d ln(m) ln(m/d) + ln(1/delta)) / (gamma^2 m).

    The classic sample-complexity form, up to the unspecified universal
    constant.
    """
    if d < 1 or m <= d:
        raise InvalidInput("need m > d >= 1")
    if not 0 < delta < 1 or gamma <= 0 or constant <= 0:
        raise InvalidInput("need delta in (0,1), gamma > 0, constant > 0")
    return (
        constant
        * (d * math.log(m) * math.log(m / d) + math.log(1.0 / delta))
        / (gamma**2 * m)
    )


def breiman_min_margin_bound(
    d: int, m: int, delta: float, margin: float, constant: float = 1.0
) -> float:
    """Generalization bound for a voting classifier whose every training
    margin is at least ``margin``; same functional form with gamma=margin."""
    if margin <= 0:
        raise InvalidInput("margin must be positive")
    return adaboost_generalization_bound(d, m, delta, margin, constant)
