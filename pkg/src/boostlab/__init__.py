"""boostlab: a desk-scale laboratory for boosting with query accounting.

Builds voting classifiers from weak-learner oracles while tracking how many
parallel rounds and how many queries per round were spent, pits learners
against an adversarial oracle that hides label information in nested random
subsets, and ships the concentration and generalization calculators used to
reason about both.
"""

from .boosters import (
    BoostConfig,
    BoostRun,
    FiniteClassOracle,
    MarginProfile,
    VotingClassifier,
    adaboost_fixed,
    exponential_loss_identity_check,
    fixed_weight,
    margins,
    multiset_query_distribution,
    nominal_query_count,
    sampled_boost,
)
from .adversary import (
    AdversaryOracle,
    AdversaryParams,
    AdversaryState,
    adversary_respond,
    beta_from_params,
    build_adversary,
    check_structure,
    event_E_trial,
)
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
from .errors import (
    BoostlabError,
    InvalidInput,
    ProtocolViolation,
    TerminationFailure,
    WeakLearnerContractViolation,
)
from .stats import (
    Population,
    adaboost_generalization_bound,
    breiman_min_margin_bound,
    epsilon_approximation_sample_size,
    is_eps_approximation,
    monte_carlo_tail_estimate,
    without_replacement_tail_bound,
)

__version__ = "0.1.0"
