import threading

import numpy as np
import pytest

from boostlab.boosters import FiniteClassOracle
from boostlab.core import (
    Concept,
    FiniteDomain,
    Hypothesis,
    QueryLedger,
    TrainingSet,
    WeightVector,
    make_uniform_weights,
    weak_learner_query,
    weighted_error,
)
from boostlab.errors import InvalidInput, ProtocolViolation, WeakLearnerContractViolation
from boostlab.seeding import rng_for


def test_domain_requires_two_points():
    assert FiniteDomain(2).size == 2
    with pytest.raises(InvalidInput):
        FiniteDomain(1)


def test_sign_vectors_validated():
    Concept(np.array([1, -1, 1]))
    with pytest.raises(InvalidInput):
        Concept(np.array([1, 0, -1]))
    with pytest.raises(InvalidInput):
        Hypothesis(0, np.array([2, 1]))


def test_training_set_bounds_and_labels():
    c = Concept(np.array([1, -1, 1, -1]))
    train = TrainingSet.from_concept(c, [0, 2, 2, 3])
    assert train.m == 4
    assert np.array_equal(train.labels, [1, 1, 1, -1])
    with pytest.raises(InvalidInput):
        TrainingSet.from_concept(c, [0, 4])
    sup, counts = train.merged()
    assert sup.tolist() == [0, 2, 3]
    assert counts.tolist() == [1, 2, 1]


def test_records_round_trip():
    c = Concept(np.array([1, -1]))
    h = Hypothesis(3, np.array([-1, 1]))
    t = TrainingSet.from_concept(c, [0, 1, 1])
    assert np.array_equal(Concept.from_record(c.to_record()).labels, c.labels)
    assert Hypothesis.from_record(h.to_record()).id == 3
    rt = TrainingSet.from_record(t.to_record())
    assert np.array_equal(rt.indices, t.indices) and rt.domain_size == 2


def test_make_uniform_weights():
    w = make_uniform_weights([0, 1, 2, 3])
    assert np.allclose(w.weights, 0.25) and w.weights.sum() == 1.0
    single = make_uniform_weights([7])
    assert single.support.tolist() == [7] and single.weights.tolist() == [1.0]
    ten = make_uniform_weights(list(range(10)))
    assert np.allclose(ten.weights, 0.1)
    assert abs(ten.weights.sum() - 1.0) <= 1e-9
    with pytest.raises(InvalidInput):
        make_uniform_weights([])


def test_weight_vector_merges_and_validates():
    w = WeightVector([3, 1, 3], [0.25, 0.5, 0.25])
    assert w.support.tolist() == [1, 3]
    assert np.allclose(w.weights, [0.5, 0.5])
    with pytest.raises(InvalidInput):
        WeightVector([0, 1], [0.9, 0.2])  # sum too far from 1
    with pytest.raises(InvalidInput):
        WeightVector([0, 1], [-0.1, 1.1])
    mass = WeightVector.from_mass([5, 6], [3.0, 1.0])
    assert np.allclose(mass.weights, [0.75, 0.25])


def test_weighted_error_enumerations():
    c = Concept(np.array([1, 1, -1, -1]))
    agree = Hypothesis(0, c.labels.copy())
    disagree = Hypothesis(1, -c.labels)
    half = Hypothesis(2, np.array([1, 1, 1, 1]))
    uniform = make_uniform_weights([0, 1, 2, 3])
    assert weighted_error(agree, c, uniform) == 0.0
    assert weighted_error(disagree, c, uniform) == 1.0
    assert weighted_error(half, c, uniform) == 0.5
    with pytest.raises(InvalidInput):
        weighted_error(agree, c, WeightVector([4], [1.0]))


def test_error_complement_property():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n = int(rng.integers(2, 40))
        c = Concept(rng.choice([-1, 1], size=n))
        h = Hypothesis(0, rng.choice([-1, 1], size=n))
        size = int(rng.integers(1, n + 1))
        support = rng.choice(n, size=size, replace=False)
        dist = WeightVector.from_mass(support, rng.random(size) + 1e-9)
        total = weighted_error(h, c, dist) + weighted_error(h.negated(), c, dist)
        assert abs(total - 1.0) <= 1e-12


def test_ledger_counts():
    led = QueryLedger()
    assert led.p == 0 and led.t == 0
    q = make_uniform_weights([0, 1])
    h = Hypothesis(0, np.array([1, -1]))
    for _ in range(3):
        led.record(1, q, h)
    assert (led.p, led.t) == (1, 3)
    led2 = QueryLedger()
    for _ in range(2):
        led2.record(1, q, h)
    for _ in range(5):
        led2.record(2, q, h)
    assert (led2.p, led2.t) == (2, 5)
    assert led2.round_sizes() == [2, 5]


def test_ledger_protocol_violations():
    q = make_uniform_weights([0])
    h = Hypothesis(0, np.array([1, 1]))
    led = QueryLedger()
    led.record(1, q, h)
    led.record(2, q, h)
    with pytest.raises(ProtocolViolation):
        led.record(1, q, h)  # round 1 is closed
    with pytest.raises(ProtocolViolation):
        led.record(4, q, h)  # cannot skip round 3
    capped = QueryLedger(max_rounds=1, max_width=2)
    capped.record(1, q, h)
    capped.record(1, q, h)
    with pytest.raises(ProtocolViolation):
        capped.record(1, q, h)
    with pytest.raises(ProtocolViolation):
        capped.record(2, q, h)
    zero = QueryLedger(max_rounds=0)
    with pytest.raises(ProtocolViolation):
        zero.record(1, q, h)


def test_ledger_is_append_only_and_thread_safe():
    q = make_uniform_weights([0, 1])
    h = Hypothesis(0, np.array([1, -1]))
    led = QueryLedger()
    led.record(1, q, h)

    def worker():
        for _ in range(50):
            led.record(1, q, h)

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert led.p == 1 and led.t == 201
    rec = next(iter(led.records()))
    assert rec.response is h  # responses are stored, never copied or mutated


def test_ledger_can_drop_query_payloads():
    led = QueryLedger(keep_queries=False)
    led.record(1, make_uniform_weights([0]), Hypothesis(0, np.array([1, 1])))
    rec = next(iter(led.records()))
    assert rec.query is None and rec.response.id == 0
    assert led.to_record()["rounds"][0][0]["query"] is None


def test_weak_learner_query_logs_and_contract():
    c = Concept(np.array([1, -1, 1, -1]))
    oracle = FiniteClassOracle([Hypothesis(0, c.labels.copy())], c, gamma=0.2)
    led = QueryLedger()
    h = weak_learner_query(oracle, make_uniform_weights([0, 1, 2, 3]), led, round_id=1)
    assert weighted_error(h, c, make_uniform_weights([0, 1, 2, 3])) == 0.0
    assert led.total_queries == 1

    hostile = FiniteClassOracle([Hypothesis(0, -c.labels)], c, gamma=0.1)
    with pytest.raises(WeakLearnerContractViolation) as exc:
        hostile.respond(make_uniform_weights([0, 1, 2, 3]))
    assert exc.value.best_error == 1.0


def test_logged_responses_meet_contract():
    # every response recorded against its own query stays within the advantage
    rng = np.random.default_rng(7)
    n = 16
    c = Concept(rng.choice([-1, 1], size=n))
    hyps = [Hypothesis(0, c.labels.copy())] + [
        Hypothesis(i, rng.choice([-1, 1], size=n)) for i in range(1, 9)
    ]
    oracle = FiniteClassOracle(hyps, c, gamma=0.15)
    led = QueryLedger()
    for _ in range(40):
        size = int(rng.integers(1, n + 1))
        support = rng.choice(n, size=size, replace=False)
        dist = WeightVector.from_mass(support, rng.random(size) + 1e-9)
        weak_learner_query(oracle, dist, led, round_id=1)
    for rec in led.records():
        assert weighted_error(rec.response, c, rec.query) <= 0.5 - 0.15 + 1e-12


def test_rng_streams_are_stable_and_distinct():
    a = rng_for(3, "draw", 1, 0).random(4)
    b = rng_for(3, "draw", 1, 0).random(4)
    other = rng_for(3, "draw", 2, 0).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, other)
