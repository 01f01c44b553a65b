import math

import numpy as np
import pytest

import boostlab as bl
from boostlab.adversary import (
    AdversaryParams,
    AdversaryState,
    ConstantLearner,
    TruncatedFixedWeightBooster,
    adversary_respond,
    build_adversary,
    check_structure,
    event_E_trial,
)
from boostlab.core import Concept, Hypothesis, WeightVector, make_uniform_weights, weighted_error
from boostlab.errors import InvalidInput
from boostlab.seeding import rng_for


def test_beta_formula():
    assert bl.beta_from_params(0.05, 16, 4, 3, a_prime=1.0) == pytest.approx(2.6)
    assert bl.beta_from_params(0.07, 8, 1, 1) == pytest.approx(1 + 32 * 0.07)
    assert bl.beta_from_params(0.01, 4, 10**6, 10) == pytest.approx(1.32)
    with pytest.raises(InvalidInput):
        bl.beta_from_params(0.0, 4, 1, 1)


def _params(**kw):
    base = dict(m=64, d=8, gamma=0.05, p=2, beta=2.0)
    base.update(kw)
    return AdversaryParams(**base)


def test_params_validation():
    p = _params()
    assert p.hypothesis_count == 2 * 2 * 16 + 1 == 65
    with pytest.raises(InvalidInput):
        _params(beta=1.0)
    with pytest.raises(InvalidInput):
        _params(beta=None)  # needs declared_width to derive beta
    assert _params(beta=None, declared_width=1).resolved_beta == pytest.approx(1 + 32 * 0.05)
    # the deepest subset must be nonempty
    with pytest.raises(InvalidInput):
        _params(m=2, beta=5.0, p=4)
    with pytest.raises(InvalidInput):
        _params(gamma=0.6)


def test_hypothesis_budget():
    # d=10, p=3: 3 * 2^6 + 1 = 193 <= 1024
    p = _params(d=10, p=3, m=64)
    assert p.hypothesis_count == 193 <= 2**10
    # no p fits within the budget at d=2; the escape hatch permits it
    with pytest.raises(InvalidInput):
        _params(d=2, p=1)
    tiny = _params(d=2, p=1, enforce_hypothesis_budget=False)
    assert tiny.hypothesis_count == 5 > 2**2


def test_gamma_warning_threshold():
    with pytest.warns(UserWarning):
        _params(gamma=0.1)


def test_subset_sizes():
    p = _params(m=64, beta=2.0, p=3)
    state = build_adversary(p, 0)
    assert [len(s) for s in state.subsets] == [64, 32, 16]
    # quotients that are exact in binary stay exact
    q = _params(m=384, d=8, beta=1.5, p=1)
    assert q.subset_size(1) == 512
    # beta as large as the domain leaves a single hidden point
    extreme = _params(m=8, d=8, beta=16.0, p=1)
    assert extreme.subset_size(1) == 1
    assert len(build_adversary(extreme, 1).subsets[0]) == 1


def test_build_is_deterministic():
    p = _params()
    a = build_adversary(p, 123)
    b = build_adversary(p, 123)
    assert np.array_equal(a.concept.labels, b.concept.labels)
    for sa, sb in zip(a.subsets, b.subsets):
        assert np.array_equal(sa, sb)
    for ha, hb in zip(a.hypotheses, b.hypotheses):
        assert ha.id == hb.id and np.array_equal(ha.predictions, hb.predictions)
    rng = rng_for(99, "probe")
    for _ in range(10):
        support = rng.choice(p.domain_size, size=8, replace=False)
        dist = WeightVector.from_mass(support, rng.random(8) + 1e-6)
        assert adversary_respond(a, dist).id == adversary_respond(b, dist).id
    assert a.event_E == b.event_E


def test_structure_checks():
    for seed in range(5):
        state = build_adversary(_params(p=3, m=128, d=10), seed)
        report = check_structure(state)
        assert report.ok, report


def test_masked_group_answers_query_outside_first_subset():
    state = build_adversary(_params(), 7)
    outside = np.setdiff1d(np.arange(state.params.domain_size), state.subsets[0])
    dist = make_uniform_weights(outside[:20])
    h = adversary_respond(state, dist)
    assert h.id == 0  # first masked hypothesis has error 0 there
    assert weighted_error(h, state.concept, dist) == 0.0
    assert state.event_E


def test_fallback_flips_event_flag_permanently():
    # hand-built tiny state: one level, every non-fallback hypothesis wrong at x
    labels = np.array([1, -1, 1, -1], dtype=np.int8)
    concept = Concept(labels)
    x = 2
    masked = []
    for hid in range(2):
        preds = labels.copy()
        preds[x] = -labels[x]
        masked.append(Hypothesis(hid, preds))
    randoms = []
    for hid in (2, 3):
        preds = -labels
        randoms.append(Hypothesis(hid, preds))
    fallback = Hypothesis(4, labels.copy())
    params = AdversaryParams(
        m=2, d=2, gamma=0.05, p=1, beta=4.0, enforce_hypothesis_budget=False
    )
    state = AdversaryState(
        params=params,
        concept=concept,
        subsets=[np.array([x])],
        hypotheses=masked + randoms + [fallback],
    )
    singleton = WeightVector(np.array([x]), np.array([1.0]))
    h = adversary_respond(state, singleton)
    assert h is fallback
    assert state.event_E is False
    # sticky: a trivially answerable query does not resurrect the flag
    easy = make_uniform_weights([0, 1, 3])
    assert adversary_respond(state, easy).id == 0
    assert state.event_E is False


def test_every_response_is_valid():
    rng = rng_for(5, "queries")
    state = build_adversary(_params(m=128, d=10, p=3), 21)
    threshold = 0.5 - state.params.gamma
    for _ in range(50):
        size = int(rng.integers(1, 40))
        support = rng.choice(state.params.domain_size, size=size, replace=False)
        dist = WeightVector.from_mass(support, rng.random(size) + 1e-9)
        h = adversary_respond(state, dist)
        assert weighted_error(h, state.concept, dist) <= threshold + 1e-12


def test_singleton_probing_hidden_set_breaks_event_E():
    # with only four coin-flip hypotheses per point, probing every hidden
    # point forces the fallback out with high probability
    params = AdversaryParams(
        m=64, d=2, gamma=0.05, p=1, beta=2.0, enforce_hypothesis_budget=False
    )
    broke = 0
    trials = 1000
    for seed in range(trials):
        state = build_adversary(params, seed)
        for x in state.subsets[-1]:
            adversary_respond(state, WeightVector(np.array([x]), np.array([1.0])))
            if not state.event_E:
                break
        broke += not state.event_E
    assert broke / trials >= 0.9


def test_constant_learner_trial():
    params = _params()
    rec = event_E_trial(params, ConstantLearner(label=1), m_train=64, seed=3)
    assert rec.event_E is True
    assert rec.p_used == 0 and rec.t_used == 0
    state = build_adversary(params, 3)
    assert rec.test_error == np.mean(state.concept.labels == -1)


def test_trial_rejects_budget_overrun():
    class Liar:
        declared_rounds = 1
        declared_width = 1

        def fit(self, train, oracle, ledger, seed):
            dist = make_uniform_weights(np.arange(oracle.state.concept.domain_size))
            bl.weak_learner_query(oracle, dist, ledger, round_id=1)
            bl.weak_learner_query(oracle, dist, ledger, round_id=1)  # over width
            return np.ones(oracle.state.concept.domain_size, dtype=np.int8)

    rec = event_E_trial(_params(), Liar(), m_train=32, seed=0)
    assert rec.status == "protocol-violation"
    assert math.isnan(rec.test_error)


def test_truncated_booster_trial_fields():
    params = _params(m=128, d=8, p=2, beta=2.0)
    rec = event_E_trial(params, TruncatedFixedWeightBooster(2), m_train=128, seed=8, check=True)
    assert rec.status == "ok"
    assert rec.p_used == 2 and rec.t_used == 1
    assert rec.structure_ok
    assert rec.max_response_error <= 0.5 - params.gamma + 1e-12
    assert rec.hidden_size > 0
    assert 0.0 <= rec.test_error <= 1.0


def test_hidden_disagreement_near_half_smoke():
    # small-sample sanity; the full statistical check lives in acceptance
    params = _params(m=128, d=8, p=2, beta=2.0)
    vals, kept = [], 0
    for seed in range(15):
        rec = event_E_trial(params, TruncatedFixedWeightBooster(2), m_train=128, seed=seed)
        if rec.event_E and rec.hidden_size:
            vals.append(rec.error_on_hidden)
            kept += 1
    assert kept >= 10
    assert 0.35 <= float(np.mean(vals)) <= 0.65


def test_state_record_round_trips_concept():
    state = build_adversary(_params(), 2)
    rec = state.to_record()
    assert rec["event_E"] is True
    assert rec["concept"]["labels"] == state.concept.labels.tolist()
    assert len(rec["hypotheses"]) == state.params.hypothesis_count
