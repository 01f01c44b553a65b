"""Finite-domain learning primitives.

Points are abstract indices ``0..N-1``; concepts and hypotheses are dense
±1 vectors over the domain, so every weighted error is an exact enumeration.
Distributions are weight vectors over merged (duplicate-free) supports, and a
query ledger tracks how many rounds of weak-learner calls were used and how
wide each round was.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np

from .errors import InvalidInput, ProtocolViolation
from .seeding import rng_for

WEIGHT_SUM_TOL = 1e-9


def _sign_vector(values, expect_len: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int8)
    if arr.ndim != 1:
        raise InvalidInput("label/prediction vector must be one-dimensional")
    if expect_len is not None and arr.shape[0] != expect_len:
        raise InvalidInput(
            f"vector length {arr.shape[0]} does not match domain size {expect_len}"
        )
    if arr.size == 0 or not np.all(np.abs(arr) == 1):
        raise InvalidInput("every entry must be -1 or +1")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FiniteDomain:
    """An unstructured point set {0, .., size-1}."""

    size: int

    def __post_init__(self):
        if int(self.size) < 2:
            raise InvalidInput("domain needs at least 2 points")
        object.__setattr__(self, "size", int(self.size))

    def points(self) -> np.ndarray:
        return np.arange(self.size)


@dataclass(frozen=True)
class Concept:
    """Ground-truth ±1 labeling of the domain."""

    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", _sign_vector(self.labels))

    @property
    def domain_size(self) -> int:
        return int(self.labels.shape[0])

    @classmethod
    def random(cls, domain: FiniteDomain, seed) -> "Concept":
        rng = rng_for(seed, "concept")
        return cls(rng.choice(np.array([-1, 1], dtype=np.int8), size=domain.size))

    def to_record(self) -> dict:
        return {"labels": self.labels.tolist()}

    @classmethod
    def from_record(cls, rec: dict) -> "Concept":
        return cls(np.asarray(rec["labels"], dtype=np.int8))


@dataclass(frozen=True)
class Hypothesis:
    """A ±1 predictor over the domain, identified by an integer id."""

    id: int
    predictions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "predictions", _sign_vector(self.predictions))

    @property
    def domain_size(self) -> int:
        return int(self.predictions.shape[0])

    def negated(self, new_id: Optional[int] = None) -> "Hypothesis":
        return Hypothesis(self.id if new_id is None else new_id, -self.predictions)

    def to_record(self) -> dict:
        return {"id": self.id, "predictions": self.predictions.tolist()}

    @classmethod
    def from_record(cls, rec: dict) -> "Hypothesis":
        return cls(rec["id"], np.asarray(rec["predictions"], dtype=np.int8))


@dataclass(frozen=True)
class TrainingSet:
    """A size-m multiset of domain indices with their concept labels."""

    indices: np.ndarray
    labels: np.ndarray
    domain_size: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise InvalidInput("training indices must be a nonempty 1-d multiset")
        n = int(self.domain_size)
        if idx.min() < 0 or idx.max() >= n:
            raise InvalidInput("training index out of domain range")
        lab = _sign_vector(self.labels, expect_len=idx.shape[0])
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "domain_size", n)

    @property
    def m(self) -> int:
        return int(self.indices.shape[0])

    @classmethod
    def from_concept(cls, concept: Concept, indices) -> "TrainingSet":
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size == 0 or idx.min() < 0 or idx.max() >= concept.domain_size:
            raise InvalidInput("training index out of domain range")
        return cls(idx, concept.labels[idx], concept.domain_size)

    @classmethod
    def sample_uniform(cls, concept: Concept, m: int, seed) -> "TrainingSet":
        """m i.i.d. uniform draws from the domain (with replacement)."""
        if m < 1:
            raise InvalidInput("training size must be positive")
        idx = rng_for(seed, "train").integers(0, concept.domain_size, size=m)
        return cls.from_concept(concept, idx)

    def merged(self):
        """Unique indices and their multiplicities, sorted by index."""
        return np.unique(self.indices, return_counts=True)

    def to_record(self) -> dict:
        return {
            "indices": self.indices.tolist(),
            "labels": self.labels.tolist(),
            "domain_size": self.domain_size,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "TrainingSet":
        return cls(
            np.asarray(rec["indices"], dtype=np.int64),
            np.asarray(rec["labels"], dtype=np.int8),
            rec["domain_size"],
        )


class WeightVector:
    """A probability distribution over a merged index support.

    Duplicate indices passed to any constructor are merged by summing their
    mass. The weight sum must land within ``WEIGHT_SUM_TOL`` of one; the
    stored weights are then renormalized so downstream sums are clean.
    """

    __slots__ = ("support", "weights")

    def __init__(self, support, weights):
        sup = np.asarray(support, dtype=np.int64)
        w = np.asarray(weights, dtype=np.float64)
        if sup.ndim != 1 or sup.size == 0:
            raise InvalidInput("support must be a nonempty index list")
        if w.shape != sup.shape:
            raise InvalidInput("support and weights must have equal length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidInput("weights must be finite and nonnegative")
        if sup.min() < 0:
            raise InvalidInput("support indices must be nonnegative")
        uniq, inv = np.unique(sup, return_inverse=True)
        if uniq.shape != sup.shape:
            merged = np.zeros(uniq.shape[0])
            np.add.at(merged, inv, w)
            sup, w = uniq, merged
        else:
            order = np.argsort(sup, kind="stable")
            sup, w = sup[order], w[order]
        total = float(w.sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidInput(f"weights sum to {total!r}, not 1")
        w = w / total
        sup.setflags(write=False)
        w.setflags(write=False)
        self.support = sup
        self.weights = w

    @classmethod
    def from_mass(cls, support, mass) -> "WeightVector":
        """Normalize an arbitrary nonnegative mass vector."""
        m = np.asarray(mass, dtype=np.float64)
        total = m.sum()
        if not np.isfinite(total) or total <= 0:
            raise InvalidInput("total mass must be positive")
        return cls(support, m / total)

    @classmethod
    def from_multiset(cls, indices) -> "WeightVector":
        """Uniform distribution over a multiset: mass multiplicity/|T|."""
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size == 0:
            raise InvalidInput("multiset must be nonempty")
        uniq, counts = np.unique(idx, return_counts=True)
        return cls(uniq, counts / idx.shape[0])

    def __len__(self) -> int:
        return int(self.support.shape[0])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, WeightVector)
            and np.array_equal(self.support, other.support)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self) -> str:
        return f"WeightVector(support={self.support.tolist()}, weights={self.weights.tolist()})"

    def to_record(self) -> dict:
        return {"support": self.support.tolist(), "weights": self.weights.tolist()}


def make_uniform_weights(support) -> WeightVector:
    """Uniform distribution over a nonempty index list (duplicates merged)."""
    return WeightVector.from_multiset(support)


def weighted_error(h: Hypothesis, c: Concept, dist: WeightVector) -> float:
    """Probability mass where the hypothesis disagrees with the concept."""
    if h.domain_size != c.domain_size:
        raise InvalidInput("hypothesis and concept cover different domains")
    if dist.support[-1] >= c.domain_size:
        raise InvalidInput("distribution support exceeds the domain")
    mismatch = h.predictions[dist.support] != c.labels[dist.support]
    return float(dist.weights[mismatch].sum())


@dataclass(frozen=True)
class QueryRecord:
    query: Optional[WeightVector]  # None when the ledger drops query payloads
    response: Hypothesis


class QueryLedger:
    """Append-only record of weak-learner calls, grouped into rounds.

    Round ids are 1-based. A call may be recorded into the current round or
    open the next one; anything else is a protocol violation, as is exceeding
    the optional (max_rounds, max_width) budget. ``keep_queries=False`` drops
    query payloads (responses and counts are always kept), which matters for
    runs with tens of thousands of queries.
    """

    def __init__(
        self,
        max_rounds: Optional[int] = None,
        max_width: Optional[int] = None,
        keep_queries: bool = True,
    ):
        self._rounds: List[List[QueryRecord]] = []
        self._lock = threading.Lock()
        self.max_rounds = max_rounds
        self.max_width = max_width
        self.keep_queries = keep_queries

    @property
    def p(self) -> int:
        """Number of rounds used."""
        return len(self._rounds)

    @property
    def t(self) -> int:
        """Maximum number of queries in any single round."""
        return max((len(r) for r in self._rounds), default=0)

    @property
    def total_queries(self) -> int:
        return sum(len(r) for r in self._rounds)

    def round_sizes(self) -> List[int]:
        return [len(r) for r in self._rounds]

    def records(self) -> Iterable[QueryRecord]:
        for rnd in self._rounds:
            yield from rnd

    def record(self, round_id: int, query: WeightVector, response: Hypothesis) -> None:
        with self._lock:
            current = len(self._rounds)
            if round_id == current + 1:
                if self.max_rounds is not None and round_id > self.max_rounds:
                    raise ProtocolViolation(
                        f"round {round_id} exceeds the declared budget of "
                        f"{self.max_rounds} round(s)"
                    )
                self._rounds.append([])
            elif round_id != current or current == 0:
                raise ProtocolViolation(
                    f"cannot record into round {round_id}; current round is {current}"
                )
            bucket = self._rounds[round_id - 1]
            if self.max_width is not None and len(bucket) + 1 > self.max_width:
                raise ProtocolViolation(
                    f"round {round_id} exceeds the declared width of {self.max_width}"
                )
            bucket.append(QueryRecord(query if self.keep_queries else None, response))

    def to_record(self) -> dict:
        return {
            "p": self.p,
            "t": self.t,
            "rounds": [
                [
                    {
                        "query": None if rec.query is None else rec.query.to_record(),
                        "response_id": rec.response.id,
                    }
                    for rec in rnd
                ]
                for rnd in self._rounds
            ],
        }


class WeakLearner:
    """Oracle interface: given a query distribution, return a hypothesis with
    weighted error at most 1/2 - gamma under that distribution."""

    gamma: float

    def respond(self, dist: WeightVector) -> Hypothesis:
        raise NotImplementedError

    @property
    def advantage_threshold(self) -> float:
        return 0.5 - self.gamma


def weak_learner_query(
    oracle: WeakLearner,
    dist: WeightVector,
    ledger: Optional[QueryLedger] = None,
    round_id: int = 1,
) -> Hypothesis:
    """Query the oracle and log the exchange."""
    h = oracle.respond(dist)
    if ledger is not None:
        ledger.record(round_id, dist, h)
    return h
