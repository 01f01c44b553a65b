"""Experiment harness: configs, dataset synthesis, grid execution, output.

Every experiment is an ExperimentConfig (kind + parameters + seeds). Grid
axes are the list-valued parameters; each (cell, seed) pair yields one row.
Rows are plain dicts with stable column order, sorted by their grid key
before writing, so identical configs produce byte-identical files once the
timestamped header line is suppressed.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import adversary as adv
from . import boosters, stats
from .core import Concept, FiniteDomain, Hypothesis, QueryLedger, TrainingSet
from .errors import BoostlabError, InvalidInput
from .seeding import rng_for

KINDS = ("sampled-boost", "adaboost", "adversary-sim", "tail-check", "bounds-table")

EXIT_OK = 0
EXIT_INVALID_CONFIG = 2
EXIT_PARTIAL_FAILURES = 3


@dataclass
class ExperimentConfig:
    kind: str
    parameters: Dict[str, object] = field(default_factory=dict)
    seeds: List[int] = field(default_factory=lambda: [0])
    out: Optional[str] = None
    fmt: str = "csv"
    header_meta: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown experiment kind {self.kind!r}")
        if self.fmt not in ("csv", "json"):
            raise InvalidInput("format must be 'csv' or 'json'")
        if not self.seeds:
            raise InvalidInput("at least one seed is required")
        if self.workers < 1:
            raise InvalidInput("workers must be positive")

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            raw = json.load(fh)
        return cls(
            kind=raw["kind"],
            parameters=raw.get("parameters", {}),
            seeds=[int(s) for s in raw.get("seeds", [0])],
            out=raw.get("output", {}).get("path"),
            fmt=raw.get("output", {}).get("format", "csv"),
            header_meta=raw.get("header_meta", True),
            workers=int(raw.get("workers", 1)),
        )


# ---------------------------------------------------------------------------
# dataset synthesis


def stump_class(domain_size: int) -> List[Hypothesis]:
    """All 1-d threshold predictors over the index line, both polarities."""
    hyps = []
    idx = np.arange(domain_size)
    hid = 0
    for theta in range(domain_size + 1):
        base = np.where(idx >= theta, 1, -1).astype(np.int8)
        hyps.append(Hypothesis(hid, base))
        hyps.append(Hypothesis(hid + 1, -base))
        hid += 2
    return hyps


def synthesize_dataset(
    kind: str,
    m: int,
    d: int,
    gamma: float,
    seed,
    include_concept: bool = True,
    oracle_mode: str = "best",
):
    """Build a training set and a matching finite-class oracle.

    ``realizable-by-stumps``: the domain is the index line 0..m-1, the
    concept is a threshold labeling, and the class is every stump (contains
    the concept, so any gamma below 1/2 is honored).

    ``finite-class``: random concept plus a class of at most 2^d hypotheses;
    with ``include_concept`` the concept itself is a member (id 0), which
    guarantees the weak-learning contract for every query distribution.
    Dropping it exposes the contract-violation path.
    """
    if m < 2:
        raise InvalidInput("m must be at least 2")
    if kind == "realizable-by-stumps":
        rng = rng_for(seed, "stump-concept")
        theta = int(rng.integers(1, m))
        polarity = int(rng.choice([-1, 1]))
        labels = polarity * np.where(np.arange(m) >= theta, 1, -1)
        concept = Concept(labels.astype(np.int8))
        hyps = stump_class(m)
        if not include_concept:
            hyps = [h for h in hyps if not np.array_equal(h.predictions, concept.labels)]
    elif kind == "finite-class":
        if d < 1:
            raise InvalidInput("d must be positive")
        concept = Concept.random(FiniteDomain(m), seed)
        rng = rng_for(seed, "class")
        count = 2**d - 1
        hyps = []
        if include_concept:
            hyps.append(Hypothesis(0, concept.labels.copy()))
        for j in range(count):
            if j % 2 == 0:
                # correlated at advantage ~2*gamma, capped below certainty so
                # excluding the concept cannot be undone by exact copies
                agree = rng.random(m) < min(0.5 + 2 * gamma, 0.95)
                preds = np.where(agree, concept.labels, -concept.labels)
            else:
                preds = rng.choice(np.array([-1, 1], dtype=np.int8), size=m)
            hyps.append(Hypothesis(len(hyps), preds.astype(np.int8)))
    else:
        raise InvalidInput(f"unknown dataset kind {kind!r}")

    train = TrainingSet.from_concept(concept, np.arange(m))
    oracle = boosters.FiniteClassOracle(hyps, concept, gamma, pick=oracle_mode)
    return train, oracle


# ---------------------------------------------------------------------------
# per-kind cell runners (module level so a process pool can pickle them)


def _boost_cell(args) -> dict:
    row, _run, _train = _execute_boost(*args)
    return row


def export_boost_trace(kind: str, params: Dict[str, object], seed: int, path: str) -> None:
    """Run one booster cell and write its full trace (with margins) as JSON."""
    row, run, train = _execute_boost(params, seed, kind == "adaboost")
    if row["status"] != "ok" or run is None:
        raise InvalidInput(f"trace export failed: cell status {row['status']}")
    with open(path, "w") as fh:
        json.dump(run.to_record(train), fh)


def _execute_boost(params, seed, sequential):
    gamma = float(params["gamma"])
    m = int(params["m"])
    d = int(params.get("d", 2))
    row = {
        "kind": "adaboost" if sequential else "sampled-boost",
        "seed": seed,
        "gamma": gamma,
        "m": m,
        "d": d,
        "dataset": params.get("dataset", "realizable-by-stumps"),
        "oracle_mode": params.get("oracle_mode", "weakest"),
        "status": "ok",
    }
    run = train = None
    try:
        train, oracle = synthesize_dataset(
            row["dataset"],
            m,
            d,
            gamma,
            seed,
            include_concept=bool(params.get("include_concept", True)),
            oracle_mode=row["oracle_mode"],
        )
        ledger = QueryLedger(keep_queries=False)
        if sequential:
            rounds = int(params.get("rounds", 0)) or boosters.BoostConfig(
                gamma=gamma, m=m, d=d
            ).rounds
            run = boosters.adaboost_fixed(
                train, oracle, gamma, rounds, seed=seed, ledger=ledger
            )
            row.update(rounds=rounds, n=1)
        else:
            cfg = boosters.BoostConfig(
                gamma=gamma,
                m=m,
                d=d,
                sample_factor=float(params.get("sample_factor", 4.0)),
                rounds_override=int(params["rounds"]) if params.get("rounds") else None,
                retry_cap=int(params.get("retry_cap", 1000)),
                seed=seed,
            )
            run = boosters.sampled_boost(train, oracle, cfg, ledger)
            row.update(rounds=cfg.rounds, n=cfg.n_samples)
        profile = run.margin_profile(train)
        zvals = np.asarray(run.trace.z_values)
        row.update(
            min_margin=profile.min_margin,
            margin_floor=gamma / 16.0,
            identity_dev=boosters.exponential_loss_identity_check(run, train),
            z_max=float(zvals.max()),
            z_bound=math.sqrt(1.0 - gamma**2 / 4.0),
            p=ledger.p,
            t=ledger.t,
            distinct_queries=run.trace.distinct_queries,
            total_retries=run.trace.total_retries,
        )
    except BoostlabError as exc:
        row["status"] = type(exc).__name__
    return row, run, train


_LEARNERS = {
    "constant": lambda params: adv.ConstantLearner(),
    "truncated-adaboost": lambda params: adv.TruncatedFixedWeightBooster(
        int(params["p"])
    ),
    "singleton-prober": lambda params: adv.SingletonProbeLearner(
        2 * int(params["m"])
    ),
    "random-probes": lambda params: adv.RandomProbeLearner(int(params.get("probes", 16))),
}


def _adversary_cell(args) -> dict:
    params, seed = args
    learner_kind = params.get("learner", "truncated-adaboost")
    row = {
        "kind": "adversary-sim",
        "seed": seed,
        "learner": learner_kind,
        "p": int(params.get("p", 1)),
        "beta": params.get("beta"),
        "gamma": float(params["gamma"]),
        "d": int(params["d"]),
        "m": int(params["m"]),
        "m_train": int(params.get("m_train", params["m"])),
        "status": "ok",
    }
    try:
        learner = _LEARNERS[learner_kind](params)
        aparams = adv.AdversaryParams(
            m=row["m"],
            d=row["d"],
            gamma=row["gamma"],
            p=row["p"],
            beta=row["beta"],
            a_prime=float(params.get("a_prime", 4.0)),
            declared_width=learner.declared_width or None,
            enforce_hypothesis_budget=bool(params.get("enforce_budget", True)),
        )
        row["beta"] = aparams.resolved_beta
        row["t"] = learner.declared_width
        trial = adv.event_E_trial(
            aparams, learner, row["m_train"], seed, check=bool(params.get("check", False))
        )
        row.update(
            event_E=trial.event_E,
            test_error=trial.test_error,
            error_on_hidden=trial.error_on_hidden,
            hidden_size=trial.hidden_size,
            p_used=trial.p_used,
            t_used=trial.t_used,
            max_response_error=trial.max_response_error,
            structure_ok=trial.structure_ok,
            status=trial.status,
        )
    except BoostlabError as exc:
        row["status"] = type(exc).__name__
    return row


def two_level_population(size: int, rho: float, high_fraction: float) -> stats.Population:
    """Population with a high_fraction of mass-1/rho values, rest zeros."""
    high = int(round(size * high_fraction))
    vals = np.zeros(size)
    vals[:high] = 1.0 / rho
    return stats.Population(vals, rho)


def graded_population(size: int, rho: float) -> stats.Population:
    """Evenly spaced values across [0, 1/rho]."""
    return stats.Population(np.linspace(0.0, 1.0 / rho, size), rho)


def _tail_cell(args) -> dict:
    params, seed = args
    rho = float(params["rho"])
    n = int(params["n"])
    delta = float(params["delta"])
    side = params.get("side", "lower")
    trials = int(params.get("trials", 100000))
    shape = params.get("population", "two-level")
    size = int(params.get("population_size", 200))
    row = {
        "kind": "tail-check",
        "seed": seed,
        "population": shape,
        "population_size": size,
        "rho": rho,
        "n": n,
        "delta": delta,
        "side": side,
        "trials": trials,
        "status": "ok",
    }
    try:
        if shape == "two-level":
            pop = two_level_population(size, rho, float(params.get("high_fraction", 0.5)))
        elif shape == "graded":
            pop = graded_population(size, rho)
        else:
            raise InvalidInput(f"unknown population shape {shape!r}")
        mu = pop.expected_sum(n)
        threshold = (1.0 - delta) * mu if side == "lower" else (1.0 + delta) * mu
        bound = stats.without_replacement_tail_bound(pop, n, delta, mu, side)
        est = stats.monte_carlo_tail_estimate(pop, n, threshold, trials, seed, side)
        row.update(
            mu=mu,
            threshold=threshold,
            analytic_bound=bound,
            empirical=est.estimate,
            ci_low=est.ci_low,
            ci_high=est.ci_high,
        )
        row["pass"] = est.ci_high <= bound
    except BoostlabError as exc:
        row["status"] = type(exc).__name__
    return row


def _bounds_cell(args) -> dict:
    params, seed = args
    d = int(params["d"])
    m = int(params["m"])
    delta = float(params["delta"])
    gamma = float(params["gamma"])
    constant = float(params.get("constant", 1.0))
    margin = float(params.get("margin", gamma / 16.0))
    row = {
        "kind": "bounds-table",
        "seed": seed,
        "d": d,
        "m": m,
        "delta": delta,
        "gamma": gamma,
        "margin": margin,
        "constant": constant,
        "status": "ok",
    }
    try:
        row["adaboost_bound"] = stats.adaboost_generalization_bound(
            d, m, delta, gamma, constant
        )
        row["breiman_bound_at_gamma"] = stats.breiman_min_margin_bound(
            d, m, delta, gamma, constant
        )
        row["breiman_bound_at_margin"] = stats.breiman_min_margin_bound(
            d, m, delta, margin, constant
        )
        row["eps_approx_n"] = stats.epsilon_approximation_sample_size(
            d, gamma / 2.0, delta
        )
    except BoostlabError as exc:
        row["status"] = type(exc).__name__
    return row


def _sampled_boost_entry(args):
    return _boost_cell((args[0], args[1], False))


def _adaboost_entry(args):
    return _boost_cell((args[0], args[1], True))


_POOL_RUNNERS = {
    "sampled-boost": _sampled_boost_entry,
    "adaboost": _adaboost_entry,
    "adversary-sim": _adversary_cell,
    "tail-check": _tail_cell,
    "bounds-table": _bounds_cell,
}


# ---------------------------------------------------------------------------
# grid execution and output


def expand_grid(parameters: Dict[str, object]) -> List[Dict[str, object]]:
    """Cartesian product over the list-valued parameters, axes sorted by name."""
    axes = {k: v for k, v in sorted(parameters.items()) if isinstance(v, (list, tuple))}
    fixed = {k: v for k, v in parameters.items() if not isinstance(v, (list, tuple))}
    if not axes:
        return [dict(fixed)]
    cells = []
    for combo in itertools.product(*axes.values()):
        cell = dict(fixed)
        cell.update(zip(axes.keys(), combo))
        cells.append(cell)
    return cells


def _row_sort_key(row: dict):
    return tuple(
        (k, "" if row.get(k) is None else str(row.get(k))) for k in sorted(row.keys())
    )


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: List[dict]
    fieldnames: List[str]
    exit_code: int

    def failures(self) -> List[dict]:
        return [r for r in self.rows if r.get("status") != "ok"]


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Execute the whole grid, write output if requested, report exit code."""
    runner = _POOL_RUNNERS[cfg.kind]
    cells = expand_grid(cfg.parameters)
    jobs = [(cell, seed) for cell in cells for seed in cfg.seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(runner, jobs))
    else:
        rows = [runner(job) for job in jobs]
    rows.sort(key=_row_sort_key)

    fieldnames: List[str] = []
    for row in rows:
        for key in row:
            if key not in fieldnames:
                fieldnames.append(key)

    if cfg.out:
        payload = render_output(rows, fieldnames, cfg)
        with open(cfg.out, "wb") as fh:
            fh.write(payload)

    exit_code = EXIT_OK
    if any(r.get("status") != "ok" for r in rows):
        exit_code = EXIT_PARTIAL_FAILURES
    return ExperimentResult(cfg, rows, fieldnames, exit_code)


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_output(rows: Sequence[dict], fieldnames: Sequence[str], cfg: ExperimentConfig) -> bytes:
    meta = None
    if cfg.header_meta:
        meta = f"generated={time.strftime('%Y-%m-%dT%H:%M:%S')} kind={cfg.kind} seeds={len(cfg.seeds)}"
    if cfg.fmt == "csv":
        return rows_to_csv_bytes(rows, fieldnames, meta)
    return rows_to_json_bytes(rows, meta)


def rows_to_csv_bytes(
    rows: Sequence[dict], fieldnames: Sequence[str], meta: Optional[str] = None
) -> bytes:
    buf = io.StringIO()
    if meta is not None:
        buf.write(f"# {meta}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fieldnames)
    for row in rows:
        writer.writerow([_format_value(row.get(k)) for k in fieldnames])
    return buf.getvalue().encode("utf-8")


def rows_to_json_bytes(rows: Sequence[dict], meta: Optional[str] = None) -> bytes:
    def scrub(value):
        if isinstance(value, (np.bool_,)):
            return bool(value)
        if isinstance(value, (np.integer,)):
            return int(value)
        if isinstance(value, (np.floating,)):
            return float(value)
        if isinstance(value, float) and math.isnan(value):
            return None
        return value

    doc = {"rows": [{k: scrub(v) for k, v in row.items()} for row in rows]}
    if meta is not None:
        doc = {"meta": meta, **doc}
    return (json.dumps(doc, indent=2, sort_keys=False) + "\n").encode("utf-8")
