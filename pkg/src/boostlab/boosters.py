"""Fixed-weight boosting with multiset queries.

Two boosters share the same reweighting rule: a one-shot variant that draws
size-n multisets from the current distribution and queries the oracle with
the uniform distribution over each multiset (all distinct queries count as a
single parallel round), and a sequential baseline that queries the current
distribution directly, one call per round. Both produce an equal-vote
classifier whose training margins are profiled exactly.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .core import (
    Concept,
    Hypothesis,
    QueryLedger,
    TrainingSet,
    WeakLearner,
    WeightVector,
    weak_learner_query,
)
from .errors import InvalidInput, TerminationFailure, WeakLearnerContractViolation
from .seeding import rng_for


def fixed_weight(gamma: float) -> float:
    """The constant per-round vote weight, 0.5*ln((1/2+g/4)/(1/2-g/4)).

    Positive and at most gamma for gamma in (0, 1/2).
    """
    if not 0.0 < gamma < 0.5:
        raise InvalidInput("gamma must lie in (0, 1/2)")
    return 0.5 * math.log((0.5 + gamma / 4.0) / (0.5 - gamma / 4.0))


def multiset_query_distribution(indices) -> WeightVector:
    """Uniform distribution over a multiset: mass multiplicity/|T| per point."""
    return WeightVector.from_multiset(indices)


@dataclass(frozen=True)
class QueryCount:
    exact: int  # number of size-n multisets of an m-set
    bound: int  # the coarse bound m**n


def nominal_query_count(m: int, n: int) -> QueryCount:
    """How many multiset queries the one-shot booster nominally issues.

    Exact count C(m+n-1, n), together with the bound m**n it never exceeds.
    Python integers make overflow a non-issue.
    """
    if m < 1 or n < 1:
        raise InvalidInput("m and n must be positive")
    exact = math.comb(m + n - 1, n)
    bound = m**n
    assert exact <= bound
    return QueryCount(exact=exact, bound=bound)


@dataclass(frozen=True)
class BoostConfig:
    """Run parameters for the one-shot booster.

    ``d`` is the VC budget of the oracle's hypothesis class; the multiset
    size is n = ceil(sample_factor * d / gamma^2). The round count defaults
    to ceil(16 * ln(m) / gamma^2) and can be overridden.
    """

    gamma: float
    m: int
    d: int
    sample_factor: float = 4.0
    rounds_override: Optional[int] = None
    retry_cap: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma < 0.5:
            raise InvalidInput("gamma must lie in (0, 1/2)")
        if self.m < 1 or self.d < 1:
            raise InvalidInput("m and d must be positive")
        if self.sample_factor <= 0:
            raise InvalidInput("sample_factor must be positive")
        if self.retry_cap < 1:
            raise InvalidInput("retry_cap must be positive")
        if self.rounds_override is not None and self.rounds_override < 1:
            raise InvalidInput("rounds_override must be positive")

    @property
    def n_samples(self) -> int:
        return max(1, math.ceil(self.sample_factor * self.d / self.gamma**2))

    @property
    def rounds(self) -> int:
        if self.rounds_override is not None:
            return self.rounds_override
        return max(1, math.ceil(16.0 * math.log(self.m) / self.gamma**2))


class VotingClassifier:
    """Equal-vote aggregate of K hypotheses: g = (1/K) * sum of predictions,
    f = sign(g) with ties resolved to +1."""

    def __init__(self, hypotheses: Sequence[Hypothesis]):
        if len(hypotheses) < 1:
            raise InvalidInput("a voting classifier needs at least one hypothesis")
        self.hypotheses = list(hypotheses)
        self._agg: Optional[np.ndarray] = None

    @property
    def k(self) -> int:
        return len(self.hypotheses)

    @property
    def domain_size(self) -> int:
        return self.hypotheses[0].domain_size

    def vote_totals(self) -> np.ndarray:
        """Integer prediction sums per domain point (exact)."""
        totals = np.zeros(self.domain_size, dtype=np.int64)
        counts: Dict[int, int] = {}
        by_id: Dict[int, Hypothesis] = {}
        for h in self.hypotheses:
            counts[h.id] = counts.get(h.id, 0) + 1
            by_id[h.id] = h
        for hid, cnt in counts.items():
            totals += cnt * by_id[hid].predictions.astype(np.int64)
        return totals

    def aggregate(self) -> np.ndarray:
        """g over the whole domain; every entry lies in [-1, 1]."""
        if self._agg is None:
            self._agg = self.vote_totals() / self.k
        return self._agg

    def predict(self) -> np.ndarray:
        return np.where(self.aggregate() >= 0, 1, -1).astype(np.int8)


@dataclass(frozen=True)
class MarginProfile:
    margins: np.ndarray  # c(x) * g(x) per training sample
    min_margin: float


def margins(classifier: VotingClassifier, train: TrainingSet) -> MarginProfile:
    """Exact per-sample margins of the aggregate on the training set."""
    g = classifier.aggregate()
    vals = train.labels.astype(np.float64) * g[train.indices]
    return MarginProfile(margins=vals, min_margin=float(vals.min()))


@dataclass
class RunTrace:
    """Per-round diagnostics of a completed booster run."""

    gamma: float
    w: float
    errors: List[float] = field(default_factory=list)
    z_values: List[float] = field(default_factory=list)
    retries: List[int] = field(default_factory=list)
    query_digests: List[str] = field(default_factory=list)
    final_weights: Optional[WeightVector] = None

    @property
    def distinct_queries(self) -> int:
        return len(self.query_digests)

    @property
    def total_retries(self) -> int:
        return sum(self.retries)

    def to_record(self) -> dict:
        return {
            "gamma": self.gamma,
            "w": self.w,
            "errors": self.errors,
            "z_values": self.z_values,
            "retries": self.retries,
            "query_digests": self.query_digests,
            "distinct_queries": self.distinct_queries,
        }


@dataclass
class BoostRun:
    classifier: VotingClassifier
    trace: RunTrace

    def margin_profile(self, train: TrainingSet) -> MarginProfile:
        return margins(self.classifier, train)

    def to_record(self, train: TrainingSet) -> dict:
        """Full run trace plus the resulting margins, JSON-ready."""
        profile = self.margin_profile(train)
        rec = self.trace.to_record()
        rec.update(
            rounds=self.classifier.k,
            hypothesis_ids=[h.id for h in self.classifier.hypotheses],
            margins=profile.margins.tolist(),
            min_margin=profile.min_margin,
        )
        return rec


def exponential_loss_identity_check(run: BoostRun, train: TrainingSet) -> float:
    """Relative gap between sum_i exp(-w c_i sum_k h_k(x_i)) and m * prod Z_k.

    The two sides agree exactly in real arithmetic; both are evaluated in
    log-space so long runs neither overflow nor lose the comparison.
    """
    totals = run.classifier.vote_totals()[train.indices]
    w = run.trace.w
    log_lhs = logsumexp(-w * train.labels.astype(np.float64) * totals)
    log_rhs = math.log(train.m) + float(np.log(run.trace.z_values).sum())
    return abs(math.expm1(log_lhs - log_rhs))


def _multiset_digest(sorted_indices: np.ndarray) -> str:
    # canonical key for memoization; full keys are too large to keep around
    return hashlib.blake2b(
        np.ascontiguousarray(sorted_indices, dtype=np.int64).tobytes(), digest_size=16
    ).hexdigest()


class _ReweightState:
    """Shared update rule: D(i) <- D(i) * exp(-w c_i h(x_i)) / Z."""

    def __init__(self, train: TrainingSet, w: float):
        support, counts = train.merged()
        self.support = support
        self.weights = counts / train.m
        pos = np.searchsorted(support, train.indices)
        self.labels = np.zeros(support.shape[0], dtype=np.int8)
        self.labels[pos] = train.labels
        self.up = math.exp(w)
        self.down = math.exp(-w)

    def error_of(self, h: Hypothesis) -> Tuple[float, np.ndarray]:
        mismatch = h.predictions[self.support] != self.labels
        return float(self.weights[mismatch].sum()), mismatch

    def apply(self, mismatch: np.ndarray) -> float:
        scaled = self.weights * np.where(mismatch, self.up, self.down)
        z = float(scaled.sum())
        self.weights = scaled / z
        return z

    def distribution(self) -> WeightVector:
        return WeightVector(self.support, self.weights)


def sampled_boost(
    train: TrainingSet,
    oracle: WeakLearner,
    cfg: BoostConfig,
    ledger: Optional[QueryLedger] = None,
) -> BoostRun:
    """One-shot booster: all oracle queries belong to a single parallel round.

    Each round draws an n-sample multiset T from the current distribution and
    adopts the oracle's answer for the uniform distribution over T, re-drawing
    while that answer errs above 1/2 - gamma/4 on the full distribution.
    Queries are materialized lazily and memoized by canonical multiset, so
    repeated draws of the same multiset reuse the recorded answer; the ledger
    sees each distinct query once, all in round 1.
    """
    if cfg.m != train.m:
        raise InvalidInput("config m does not match the training set size")
    w = fixed_weight(cfg.gamma)
    n = cfg.n_samples
    threshold = 0.5 - cfg.gamma / 4.0
    state = _ReweightState(train, w)
    trace = RunTrace(gamma=cfg.gamma, w=w)
    memo: Dict[str, Hypothesis] = {}
    chosen: List[Hypothesis] = []

    for k in range(1, cfg.rounds + 1):
        attempts = 0
        while True:
            rng = rng_for(cfg.seed, "draw", k, attempts)
            positions = rng.choice(state.support.shape[0], size=n, p=state.weights)
            drawn = np.sort(state.support[positions])
            key = _multiset_digest(drawn)
            h = memo.get(key)
            if h is None:
                query = multiset_query_distribution(drawn)
                h = weak_learner_query(oracle, query, ledger, round_id=1)
                memo[key] = h
                trace.query_digests.append(key)
            er, mismatch = state.error_of(h)
            if er <= threshold:
                break
            attempts += 1
            if attempts > cfg.retry_cap:
                raise TerminationFailure(
                    f"round {k}: {attempts} re-draws all failed the error "
                    f"threshold {threshold:.6g}; sample_factor="
                    f"{cfg.sample_factor} appears too small for this oracle",
                    round_index=k,
                    attempts=attempts,
                )
        z = state.apply(mismatch)
        chosen.append(h)
        trace.errors.append(er)
        trace.z_values.append(z)
        trace.retries.append(attempts)

    trace.final_weights = state.distribution()
    return BoostRun(classifier=VotingClassifier(chosen), trace=trace)


def adaboost_fixed(
    train: TrainingSet,
    oracle: WeakLearner,
    gamma: float,
    p_max: int,
    seed: int = 0,
    ledger: Optional[QueryLedger] = None,
) -> BoostRun:
    """Sequential baseline: p_max rounds, one direct query per round.

    Uses the same fixed-weight update as the one-shot booster but queries the
    current distribution itself, so every answer already satisfies the
    oracle's error guarantee and no re-draw loop is needed.
    """
    if p_max < 1:
        raise InvalidInput("p_max must be at least 1")
    w = fixed_weight(gamma)
    state = _ReweightState(train, w)
    trace = RunTrace(gamma=gamma, w=w)
    chosen: List[Hypothesis] = []

    for k in range(1, p_max + 1):
        query = state.distribution()
        h = weak_learner_query(oracle, query, ledger, round_id=k)
        er, mismatch = state.error_of(h)
        if er > 0.5 - gamma + 1e-12:
            raise WeakLearnerContractViolation(
                f"oracle answer errs at {er:.6g} on its own query in round {k}",
                best_error=er,
            )
        z = state.apply(mismatch)
        chosen.append(h)
        trace.errors.append(er)
        trace.z_values.append(z)
        trace.retries.append(0)

    trace.final_weights = state.distribution()
    return BoostRun(classifier=VotingClassifier(chosen), trace=trace)


class FiniteClassOracle(WeakLearner):
    """Weak learner over an explicit finite hypothesis class.

    ``pick="best"`` returns the minimum-weighted-error hypothesis (ERM);
    ``pick="weakest"`` returns the worst hypothesis that still meets the
    1/2 - gamma contract, which stresses the boosters without breaking the
    guarantee. Ties go to the lowest hypothesis id. If nothing in the class
    meets the contract the oracle refuses and reports its best error.
    """

    def __init__(
        self,
        hypotheses: Sequence[Hypothesis],
        concept: Concept,
        gamma: float,
        pick: str = "best",
    ):
        if not hypotheses:
            raise InvalidInput("hypothesis class must be nonempty")
        if not 0.0 < gamma < 0.5:
            raise InvalidInput("gamma must lie in (0, 1/2)")
        if pick not in ("best", "weakest"):
            raise InvalidInput("pick must be 'best' or 'weakest'")
        ids = [h.id for h in hypotheses]
        if len(set(ids)) != len(ids):
            raise InvalidInput("hypothesis ids must be unique within a class")
        order = np.argsort(ids, kind="stable")
        self.hypotheses = [hypotheses[i] for i in order]
        self.concept = concept
        self.gamma = float(gamma)
        self.pick = pick
        preds = np.stack([h.predictions for h in self.hypotheses])
        self._mismatch = (preds != concept.labels[None, :]).astype(np.float64)

    @property
    def class_size(self) -> int:
        return len(self.hypotheses)

    def errors_for(self, dist: WeightVector) -> np.ndarray:
        if dist.support[-1] >= self.concept.domain_size:
            raise InvalidInput("query support exceeds the domain")
        return self._mismatch[:, dist.support] @ dist.weights

    def respond(self, dist: WeightVector) -> Hypothesis:
        errs = self.errors_for(dist)
        best = int(np.argmin(errs))
        if errs[best] > self.advantage_threshold:
            raise WeakLearnerContractViolation(
                f"no hypothesis reaches error <= {self.advantage_threshold:.6g}; "
                f"best achieved {errs[best]:.6g}",
                best_error=errs[best],
            )
        if self.pick == "best":
            return self.hypotheses[best]
        valid = np.flatnonzero(errs <= self.advantage_threshold)
        worst = int(valid[np.argmax(errs[valid])])
        return self.hypotheses[worst]
