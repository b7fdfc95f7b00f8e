"""Single-server private computation with side information: the GMPC and
PC-IA protocols, exact Bayesian privacy verifiers, and capacity tables."""

from .algebra import FieldElement, Message, Rational, fq, msg_axpy
from .model import (
    Answer,
    ChoiceTrace,
    ProblemInstance,
    Query,
    QueryPart,
    Scenario,
    SplitRng,
    answer_query,
    marginal_demand_prior,
    prior_probability,
    sample_scenario,
)
from .gmpc import (
    GmpcParams,
    GmpcTrace,
    enumerate_gmpc_traces,
    gmpc_answer,
    gmpc_params,
    gmpc_query,
    gmpc_recover,
)
from .pcia import (
    PciaParams,
    PciaTrace,
    pcia_answer,
    pcia_coefficients,
    pcia_params,
    pcia_query,
    pcia_recover,
    support_requirement_check,
)
from .verify import (
    LinearSystem,
    PosteriorReport,
    decodable,
    lemma1_condition,
    lemma2_condition,
    measured_rate,
    monte_carlo_privacy,
    posterior_for_query,
    posterior_individual,
    posterior_joint,
)
from .capacity import comparison_table, ipc_capacity, jpc_csi_lower, jpc_si_lower

__version__ = "0.1.0"
