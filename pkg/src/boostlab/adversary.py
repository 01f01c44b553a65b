"""Adversarial weak learner over a random concept.

The construction hides a shrinking chain of subsets X_1 over X_2 over ... of
the domain. Each level carries a group of "masked" hypotheses that agree with
the concept everywhere outside its subset and are coin flips inside, plus a
group of fully random hypotheses for concentrated queries. Answers scan the
groups in order and return the first hypothesis meeting the advantage
threshold; only when every group fails does the oracle fall back to the
concept itself, which is the one event that leaks the hidden labels. Trials
instrument that event and the learner's error on the still-hidden points.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .boosters import adaboost_fixed
from .core import (
    Concept,
    FiniteDomain,
    Hypothesis,
    QueryLedger,
    TrainingSet,
    WeakLearner,
    WeightVector,
    make_uniform_weights,
    weak_learner_query,
    weighted_error,
)
from .errors import InvalidInput, ProtocolViolation
from .seeding import rng_for

GAMMA_WARN_THRESHOLD = 1.0 / 16.0


def beta_from_params(gamma: float, d: int, t: int, p: int, a_prime: float = 4.0) -> float:
    """Shrink factor 1 + max(32*gamma, a_prime * ln(t*p) * gamma^2 / d)."""
    if not 0.0 < gamma < 0.5:
        raise InvalidInput("gamma must lie in (0, 1/2)")
    if d < 1 or t < 1 or p < 1:
        raise InvalidInput("d, t and p must be positive")
    return 1.0 + max(32.0 * gamma, a_prime * math.log(t * p) * gamma**2 / d)


@dataclass(frozen=True)
class AdversaryParams:
    """Construction parameters; the domain has 2*m points.

    ``beta`` may be given directly; otherwise it is derived from
    (gamma, d, declared_width, p). Each of the p levels holds
    2^ceil(d/2) masked plus 2^ceil(d/2) random hypotheses, and the
    concept is appended as the fallback, so the class size is
    p * 2^(ceil(d/2)+1) + 1. By default that size must stay within 2^d;
    ``enforce_hypothesis_budget=False`` lifts the cap for tiny-d
    demonstrations where the construction is still meaningful but cannot
    fit the budget (no d below 4 can).
    """

    m: int
    d: int
    gamma: float
    p: int
    beta: Optional[float] = None
    a_prime: float = 4.0
    declared_width: Optional[int] = None
    enforce_hypothesis_budget: bool = True

    def __post_init__(self):
        if self.m < 1:
            raise InvalidInput("m must be positive")
        if self.d < 2:
            raise InvalidInput("d must be at least 2")
        if self.p < 1:
            raise InvalidInput("p must be positive")
        if not 0.0 < self.gamma < 0.5:
            raise InvalidInput("gamma must lie in (0, 1/2)")
        if self.gamma >= GAMMA_WARN_THRESHOLD:
            warnings.warn(
                f"gamma={self.gamma} is above {GAMMA_WARN_THRESHOLD}; the "
                "construction's guarantees degrade for large advantages",
                stacklevel=2,
            )
        if self.beta is None and self.declared_width is None:
            raise InvalidInput("either beta or declared_width must be given")
        if self.beta is not None and self.beta <= 1.0:
            raise InvalidInput("beta must exceed 1")
        if self.enforce_hypothesis_budget and self.hypothesis_count > 2**self.d:
            raise InvalidInput(
                f"hypothesis count {self.hypothesis_count} exceeds the "
                f"2^d = {2 ** self.d} budget"
            )
        if self.subset_size(self.p) < 1:
            raise InvalidInput("the deepest subset would be empty; shrink beta or p")

    @property
    def domain_size(self) -> int:
        return 2 * self.m

    @property
    def group_half(self) -> int:
        """Masked (and likewise random) hypotheses per level: 2^ceil(d/2)."""
        return 2 ** math.ceil(self.d / 2)

    @property
    def hypothesis_count(self) -> int:
        return self.p * 2 * self.group_half + 1

    @property
    def resolved_beta(self) -> float:
        if self.beta is not None:
            return float(self.beta)
        return beta_from_params(
            self.gamma, self.d, self.declared_width, self.p, self.a_prime
        )

    def subset_size(self, level: int) -> int:
        # divide rather than multiply by beta**-level: exact when the
        # quotient is representable, so round sizes land on integers
        return math.floor(self.domain_size / self.resolved_beta**level)


@dataclass
class AdversaryState:
    """Materialized construction: concept, nested subsets, ordered groups.

    ``hypotheses`` holds the full scan order (level 1 masked, level 1
    random, level 2 masked, ...) with the fallback concept-copy last.
    ``event_E`` stays true until the fallback is ever returned.
    """

    params: AdversaryParams
    concept: Concept
    subsets: List[np.ndarray]
    hypotheses: List[Hypothesis]
    event_E: bool = True
    _pred_matrix: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def fallback(self) -> Hypothesis:
        return self.hypotheses[-1]

    def group_slice(self, level: int) -> slice:
        width = 2 * self.params.group_half
        return slice((level - 1) * width, level * width)

    def prediction_matrix(self) -> np.ndarray:
        if self._pred_matrix is None:
            self._pred_matrix = np.stack([h.predictions for h in self.hypotheses])
        return self._pred_matrix

    def to_record(self) -> dict:
        """Full dump, concept included; handle with care."""
        return {
            "params": {
                "m": self.params.m,
                "d": self.params.d,
                "gamma": self.params.gamma,
                "p": self.params.p,
                "beta": self.params.resolved_beta,
            },
            "concept": self.concept.to_record(),
            "subsets": [s.tolist() for s in self.subsets],
            "hypotheses": [h.to_record() for h in self.hypotheses],
            "event_E": self.event_E,
        }


def build_adversary(params: AdversaryParams, seed) -> AdversaryState:
    """Materialize the full construction deterministically from the seed."""
    n = params.domain_size
    beta = params.resolved_beta
    concept = Concept.random(FiniteDomain(n), seed)
    sign_pool = np.array([-1, 1], dtype=np.int8)

    subsets: List[np.ndarray] = []
    current = np.arange(n)
    for level in range(1, params.p + 1):
        size = params.subset_size(level)
        rng = rng_for(seed, "subset", level)
        current = np.sort(rng.choice(current, size=size, replace=False))
        subsets.append(current)

    hypotheses: List[Hypothesis] = []
    half = params.group_half
    for level in range(1, params.p + 1):
        inside = subsets[level - 1]
        rng = rng_for(seed, "masked", level)
        for j in range(half):
            preds = concept.labels.copy()
            preds[inside] = rng.choice(sign_pool, size=inside.shape[0])
            hypotheses.append(Hypothesis(len(hypotheses), preds))
        rng = rng_for(seed, "random", level)
        for j in range(half):
            hypotheses.append(
                Hypothesis(len(hypotheses), rng.choice(sign_pool, size=n))
            )
    hypotheses.append(Hypothesis(len(hypotheses), concept.labels.copy()))

    return AdversaryState(params=params, concept=concept, subsets=subsets, hypotheses=hypotheses)


def adversary_respond(state: AdversaryState, dist: WeightVector) -> Hypothesis:
    """First hypothesis in scan order with error <= 1/2 - gamma under dist.

    The fallback concept-copy always qualifies (error 0); returning it
    permanently clears ``event_E``.
    """
    if dist.support[-1] >= state.concept.domain_size:
        raise InvalidInput("query support exceeds the domain")
    preds = state.prediction_matrix()
    mismatch = preds[:, dist.support] != state.concept.labels[dist.support]
    errs = mismatch.astype(np.float64) @ dist.weights
    qualifying = errs <= 0.5 - state.params.gamma
    first = int(np.argmax(qualifying))  # fallback has error 0, so one exists
    if first == len(state.hypotheses) - 1:
        state.event_E = False
    return state.hypotheses[first]


class AdversaryOracle(WeakLearner):
    """Weak-learner facade over an adversary state."""

    def __init__(self, state: AdversaryState):
        self.state = state
        self.gamma = state.params.gamma

    def respond(self, dist: WeightVector) -> Hypothesis:
        return adversary_respond(self.state, dist)


@dataclass(frozen=True)
class StructureReport:
    nesting_ok: bool
    sizes_ok: bool
    masking_ok: bool
    count_ok: bool

    @property
    def ok(self) -> bool:
        return self.nesting_ok and self.sizes_ok and self.masking_ok and self.count_ok


def check_structure(state: AdversaryState) -> StructureReport:
    """Exhaustive verification of the construction invariants."""
    params = state.params
    nesting = True
    sizes = True
    prev = set(range(params.domain_size))
    for level, subset in enumerate(state.subsets, start=1):
        pts = set(subset.tolist())
        nesting &= pts <= prev
        sizes &= len(pts) == len(subset) == params.subset_size(level)
        prev = pts

    masking = True
    labels = state.concept.labels
    for level in range(1, params.p + 1):
        outside = np.setdiff1d(np.arange(params.domain_size), state.subsets[level - 1])
        group = state.hypotheses[state.group_slice(level)]
        for h in group[: params.group_half]:
            masking &= bool(np.array_equal(h.predictions[outside], labels[outside]))

    count = len(state.hypotheses) == params.hypothesis_count
    if params.enforce_hypothesis_budget:
        count &= len(state.hypotheses) <= 2**params.d
    count &= bool(np.array_equal(state.fallback.predictions, labels))
    return StructureReport(nesting, sizes, masking, count)


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one learner-vs-adversary run."""

    seed: int
    event_E: bool
    test_error: float
    error_on_hidden: float
    hidden_size: int
    p_used: int
    t_used: int
    status: str = "ok"
    max_response_error: float = float("nan")
    structure_ok: bool = True


class ConstantLearner:
    """Outputs a fixed label everywhere and never queries the oracle."""

    declared_rounds = 0
    declared_width = 0

    def __init__(self, label: int = 1):
        if label not in (-1, 1):
            raise InvalidInput("label must be -1 or +1")
        self.label = label

    def fit(self, train, oracle, ledger, seed) -> np.ndarray:
        n = oracle.state.concept.domain_size
        return np.full(n, self.label, dtype=np.int8)


class TruncatedFixedWeightBooster:
    """Runs the sequential fixed-weight booster for a capped number of rounds."""

    def __init__(self, rounds: int):
        if rounds < 1:
            raise InvalidInput("rounds must be at least 1")
        self.declared_rounds = rounds
        self.declared_width = 1

    def fit(self, train, oracle, ledger, seed) -> np.ndarray:
        run = adaboost_fixed(
            train, oracle, oracle.gamma, self.declared_rounds, seed=seed, ledger=ledger
        )
        return run.classifier.predict()


class SingletonProbeLearner:
    """Queries the point mass on every domain point in one round.

    Pure event-E stressor: concentrated queries force the oracle onto its
    coin-flip hypotheses point by point. The returned predictor is constant.
    """

    def __init__(self, domain_size: int):
        self.declared_rounds = 1
        self.declared_width = domain_size
        self.domain_size = domain_size

    def fit(self, train, oracle, ledger, seed) -> np.ndarray:
        for x in range(self.domain_size):
            weak_learner_query(
                oracle, WeightVector(np.array([x]), np.array([1.0])), ledger, round_id=1
            )
        return np.ones(self.domain_size, dtype=np.int8)


class RandomProbeLearner:
    """Issues a batch of mixed probe distributions in one round.

    Used to exercise the reply rule: uniform over the domain, singletons,
    and random sparse distributions. The returned predictor is constant.
    """

    def __init__(self, probes: int):
        if probes < 1:
            raise InvalidInput("probes must be positive")
        self.declared_rounds = 1
        self.declared_width = probes

    def fit(self, train, oracle, ledger, seed) -> np.ndarray:
        n = oracle.state.concept.domain_size
        rng = rng_for(seed, "probes")
        for j in range(self.declared_width):
            kind = j % 3
            if kind == 0:
                dist = make_uniform_weights(np.arange(n))
            elif kind == 1:
                dist = WeightVector(rng.integers(0, n, size=1), np.array([1.0]))
            else:
                size = int(rng.integers(2, max(3, n // 8)))
                support = rng.choice(n, size=size, replace=False)
                dist = WeightVector.from_mass(support, rng.random(size) + 1e-3)
            weak_learner_query(oracle, dist, ledger, round_id=1)
        return np.ones(n, dtype=np.int8)


def event_E_trial(
    params: AdversaryParams,
    learner,
    m_train: int,
    seed,
    check: bool = False,
) -> TrialRecord:
    """Run one learner against a freshly built adversary.

    Samples the training set uniformly from the domain, enforces the
    learner's declared (rounds, width) budget through the ledger, and
    records whether the fallback was ever returned, the learner's exact
    error under the uniform domain distribution, and its error restricted
    to the deepest subset minus the training points. With ``check`` the
    construction invariants and per-response validity are also audited.
    """
    if m_train < 1:
        raise InvalidInput("m_train must be positive")
    state = build_adversary(params, seed)
    oracle = AdversaryOracle(state)
    train = TrainingSet.sample_uniform(state.concept, m_train, seed)
    ledger = QueryLedger(
        max_rounds=learner.declared_rounds,
        max_width=learner.declared_width,
        keep_queries=check,
    )

    structure_ok = check_structure(state).ok if check else True
    try:
        output = np.asarray(learner.fit(train, oracle, ledger, seed))
    except ProtocolViolation:
        return TrialRecord(
            seed=int(seed),
            event_E=state.event_E,
            test_error=float("nan"),
            error_on_hidden=float("nan"),
            hidden_size=0,
            p_used=ledger.p,
            t_used=ledger.t,
            status="protocol-violation",
            structure_ok=structure_ok,
        )

    labels = state.concept.labels
    test_error = float(np.mean(output != labels))
    hidden = np.setdiff1d(state.subsets[-1], np.unique(train.indices))
    if hidden.size:
        error_on_hidden = float(np.mean(output[hidden] != labels[hidden]))
    else:
        error_on_hidden = float("nan")

    max_response_error = float("nan")
    if check:
        worst = 0.0
        for rec in ledger.records():
            worst = max(worst, weighted_error(rec.response, state.concept, rec.query))
        max_response_error = worst if ledger.total_queries else float("nan")

    return TrialRecord(
        seed=int(seed),
        event_E=state.event_E,
        test_error=test_error,
        error_on_hidden=error_on_hidden,
        hidden_size=int(hidden.size),
        p_used=ledger.p,
        t_used=ledger.t,
        max_response_error=max_response_error,
        structure_ok=structure_ok,
    )
