import itertools
import json
import math
from fractions import Fraction

import pytest

from pcsilab.algebra import FieldElement, Message
from pcsilab.model import (
    ChoiceTrace,
    ProblemInstance,
    Query,
    QueryPart,
    Scenario,
    SplitRng,
    answer_query,
    canonical_bytes,
    demand_index_prior,
    demand_subset_prior,
    form_str,
    marginal_demand_prior,
    prior_probability,
    sample_scenario,
    scenario_from_json_dict,
    scenario_to_json_dict,
)


def inst(K, M, D, q=3, ell=1, si_mode="coded"):
    return ProblemInstance(K=K, M=M, D=D, q=q, ell=ell, si_mode=si_mode)


def test_instance_validation():
    with pytest.raises(ValueError):
        inst(3, 2, 2)          # K < M+D
    with pytest.raises(ValueError):
        inst(4, 2, 0)          # D < 1
    with pytest.raises(ValueError):
        inst(4, -1, 2)
    with pytest.raises(ValueError):
        ProblemInstance(K=4, M=1, D=1, q=4)   # q not prime
    with pytest.raises(ValueError):
        ProblemInstance(K=4, M=1, D=1, q=3, si_mode="weird")


# -------------------------------------------------------------------- priors

def test_prior_zero_on_overlap():
    i = inst(4, 2, 2)
    assert prior_probability(i, (1, 2), (1, 1), (2, 3), (1, 1)) == 0


def test_prior_uniform_value_and_total_mass_K4():
    # count the valid tuples exhaustively and confirm they sum to 1
    i = inst(4, 2, 2, q=3)
    total = Fraction(0)
    count = 0
    for S in itertools.combinations(range(1, 5), 2):
        for W in itertools.combinations(sorted(set(range(1, 5)) - set(S)), 2):
            for V in itertools.product((1, 2), repeat=2):
                for U in itertools.product((1, 2), repeat=2):
                    p = prior_probability(i, W, V, S, U)
                    assert p == Fraction(1, 96)
                    total += p
                    count += 1
    assert count == 96
    assert total == 1


@pytest.mark.parametrize("K,M,D,q", [(5, 1, 2, 3), (6, 2, 1, 3), (4, 0, 2, 3)])
def test_prior_total_mass_is_one(K, M, D, q):
    i = inst(K, M, D, q)
    total = Fraction(0)
    nz = tuple(range(1, q))
    for S in itertools.combinations(range(1, K + 1), M):
        for W in itertools.combinations(sorted(set(range(1, K + 1)) - set(S)), D):
            for V in itertools.product(nz, repeat=D):
                for U in itertools.product(nz, repeat=M):
                    total += prior_probability(i, W, V, S, U)
    assert total == 1


def test_marginal_index_prior_paper_values():
    assert demand_index_prior(inst(12, 2, 2, q=7), 5) == Fraction(1, 6)
    assert demand_index_prior(inst(11, 2, 2, q=7), 2) == Fraction(2, 11)


def test_marginal_subset_prior_matches_summed_prior():
    # oracle: sum the joint prior over all (V, S, U) with W = {1, 2}
    i = inst(6, 2, 2, q=3)
    W = (1, 2)
    total = Fraction(0)
    for S in itertools.combinations(range(3, 7), 2):
        for V in itertools.product((1, 2), repeat=2):
            for U in itertools.product((1, 2), repeat=2):
                total += prior_probability(i, W, V, S, U)
    assert total == Fraction(1, 15) == demand_subset_prior(i, W)
    assert marginal_demand_prior(i, W) == Fraction(1, 15)
    assert marginal_demand_prior(i, 3) == Fraction(2, 6)


# ------------------------------------------------------------------ sampling

def test_sample_scenario_invariants_and_determinism():
    i = inst(6, 2, 2, q=7, ell=2)
    a = sample_scenario(i, 42)
    b = sample_scenario(i, 42)
    assert a.S == b.S and a.W == b.W and a.dataset == b.dataset
    assert not set(a.W) & set(a.S)
    # Y and Z recompute from the dataset
    y = Message.zero(2, 7)
    for idx, u in zip(a.S, a.U):
        y = y + a.dataset[idx - 1].scale(u)
    assert y == a.Y


def test_sample_scenario_m0_and_forced_union():
    a = sample_scenario(inst(5, 0, 2), 1)
    assert a.S == ()
    assert a.Y == Message.zero(1, 3)
    b = sample_scenario(inst(4, 2, 2), 1)
    assert set(b.W) | set(b.S) == {1, 2, 3, 4}


def test_sample_scenario_demand_marginal_within_3_sigma():
    i = inst(5, 1, 2)
    trials = 10**5
    root = SplitRng(7)
    hits = 0
    for t in range(trials):
        if 3 in sample_scenario(i, root.child(str(t))).W:
            hits += 1
    p = 2 / 5
    sigma = math.sqrt(p * (1 - p) / trials)
    assert abs(hits / trials - p) < 3 * sigma


def test_scenario_rejects_bad_shapes():
    i = inst(4, 1, 1, q=3)
    data = tuple(Message.zero(1, 3) for _ in range(4))
    one = FieldElement(1, 3)
    with pytest.raises(ValueError):
        Scenario(i, data, (2,), (one,), (2,), (one,))   # overlap
    with pytest.raises(ValueError):
        Scenario(i, data, (2,), (FieldElement(0, 3),), (1,), (one,))  # zero coeff
    with pytest.raises(ValueError):
        Scenario(i, data, (2,), (one,), (9,), (one,))   # out of range


def test_split_rng_children_independent_of_order():
    r = SplitRng(5)
    a1 = r.child("a").randrange(1000)
    b1 = r.child("b").randrange(1000)
    r2 = SplitRng(5)
    b2 = r2.child("b").randrange(1000)
    a2 = r2.child("a").randrange(1000)
    assert (a1, b1) == (a2, b2)


def test_bernoulli_exactness_extremes():
    r = SplitRng(0)
    assert r.bernoulli(Fraction(1)) is True
    assert r.bernoulli(Fraction(0)) is False


# ------------------------------------------------------------- serialization

def test_query_round_trip_and_injectivity():
    q1 = Query((QueryPart((2, 4, 1, 3), (3, 1, 1, 5)),
                QueryPart((10, 8, 6, 5), (3, 1, 1, 5))), 7)
    q2 = Query((QueryPart((2, 4, 1, 3), (3, 1, 1, 5)),
                QueryPart((10, 8, 5, 6), (3, 1, 1, 5))), 7)
    assert Query.from_json_dict(json.loads(q1.serialize())) == q1
    assert q1.serialize() != q2.serialize()
    # order is significant: no sorting on serialization
    q3 = Query((QueryPart((4, 2, 1, 3), (1, 3, 1, 5)),), 7)
    q4 = Query((QueryPart((2, 4, 1, 3), (3, 1, 1, 5)),), 7)
    assert q3.serialize() != q4.serialize()


def test_query_part_validation():
    with pytest.raises(ValueError):
        QueryPart((1, 1), (1, 2))     # duplicate index
    with pytest.raises(ValueError):
        QueryPart((1, 2), (1, 0))     # zero coefficient
    with pytest.raises(ValueError):
        QueryPart((1, 2), (1,))       # length mismatch


def test_scenario_serialization_round_trip():
    sc = sample_scenario(inst(5, 1, 2, q=7, ell=2), 3)
    back = scenario_from_json_dict(json.loads(canonical_bytes(scenario_to_json_dict(sc))))
    assert back == sc


def test_answer_query_matches_manual_combination():
    i = inst(4, 1, 1, q=5, ell=2)
    sc = sample_scenario(i, 9)
    q = Query((QueryPart((1, 3), (2, 4)),), 5)
    ans = answer_query(q, sc.dataset)
    manual = sc.dataset[0].scale(FieldElement(2, 5)) + sc.dataset[2].scale(FieldElement(4, 5))
    assert ans.symbols[0] == manual


def test_choice_trace_weight_is_product():
    t = ChoiceTrace()
    t.record("a", 1, Fraction(1, 2))
    t.record("b", "x", Fraction(2, 3))
    assert t.weight == Fraction(1, 3)
    with pytest.raises(ValueError):
        t.record("bad", 0, Fraction(3, 2))


def test_form_str_rendering():
    assert form_str((2, 4, 1, 3), (3, 1, 1, 5)) == "3X_2 + X_4 + X_1 + 5X_3"
    assert form_str((), ()) == "0"
