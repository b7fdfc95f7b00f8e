import itertools
import math
from collections import Counter
from fractions import Fraction

import pytest

from conftest import fixture_setup
from pcsilab.algebra import FieldElement, Message
from pcsilab.gmpc import (
    BRANCH_BETA,
    BudgetExceededError,
    DegenerateBetaError,
    count_placements,
    enumerate_gmpc_traces,
    gmpc_answer,
    gmpc_params,
    gmpc_query,
    gmpc_recover,
    iter_placements,
)
from pcsilab.model import ProblemInstance, SplitRng, form_str, sample_scenario


def inst(K, M, D, q=3, ell=1, si_mode="coded"):
    return ProblemInstance(K=K, M=M, D=D, q=q, ell=ell, si_mode=si_mode)


GRID = [(K, M, D) for K in range(4, 9) for M in (0, 1, 2) for D in (1, 2)
        if K >= M + D]


# ------------------------------------------------------------------- params

def test_params_example1():
    p = gmpc_params(inst(12, 2, 2, q=7))
    assert (p.n, p.m, p.r) == (3, 0, 4)
    assert p.alpha == Fraction(2, 3)
    assert p.beta == Fraction(1, 4)
    assert (p.mu, p.rho) == (0, 2)


def test_params_example2():
    p = gmpc_params(inst(11, 2, 2, q=7))
    assert (p.n, p.m, p.r) == (3, 1, 3)
    assert p.alpha == Fraction(7, 11)
    assert p.beta == Fraction(2, 7)
    assert (p.mu, p.rho) == (1, 2)


def test_params_k8_direct_formula():
    p = gmpc_params(inst(8, 2, 2))
    assert (p.n, p.m, p.r) == (2, 0, 4)
    assert p.alpha == 1    # no middle blocks when n = 2


def test_params_blocks_structure():
    p = gmpc_params(inst(11, 2, 2, q=7))
    assert p.blocks[0] == (1, 2, 3, 4)
    assert p.blocks[1] == (5, 6, 7, 8)
    assert p.blocks[2] == (1, 9, 10, 11)
    assert set(p.blocks[0]) & set(p.blocks[2]) == {1}


def test_beta_in_unit_interval_across_grid():
    for K, M, D in GRID:
        p = gmpc_params(inst(K, M, D))
        assert not p.beta_degenerate
        assert 0 <= p.beta <= 1, (K, M, D, p.beta)


def test_degenerate_beta_flagged_and_rejected():
    # K=9, M=1, D=3: m=3, r=1 -> beta = 1 - 2D/(m+2r) = -1/5
    i = inst(9, 1, 3, q=7)
    p = gmpc_params(i)
    assert p.beta_degenerate
    sc = sample_scenario(i, 0)
    with pytest.raises(DegenerateBetaError):
        gmpc_query(i, sc, 0)
    with pytest.raises(DegenerateBetaError):
        list(iter_placements(p, sc.W, sc.S))


# --------------------------------------------------------------- golden runs

def test_example1_scripted_query(example1):
    i, sc = fixture_setup(example1)
    query, trace = gmpc_query(i, sc, example1["trace"])
    expected = example1["expected"]["queries"]
    for part, exp in zip(query.parts, expected):
        assert list(part.indices) == exp["indices"]
        assert list(part.coeffs) == exp["coeffs"]
    assert [form_str(p.indices, p.coeffs) for p in query.parts] \
        == example1["expected"]["answers"]
    # pi really is the permutation the worked example writes down
    assert trace.pi == (2, 4, 1, 3, 10, 8, 6, 5, 11, 9, 12, 7)


def test_example1_recovery_over_datasets(example1):
    for seed in range(100):
        i, sc = fixture_setup(example1, seed=seed)
        query, trace = gmpc_query(i, sc, example1["trace"])
        ans = gmpc_answer(query, sc.dataset)
        assert gmpc_recover(ans, trace, sc) == sc.Z


def test_example2_scripted_query(example2):
    i, sc = fixture_setup(example2)
    query, trace = gmpc_query(i, sc, example2["trace"])
    expected = example2["expected"]["queries"]
    for part, exp in zip(query.parts, expected):
        assert list(part.indices) == exp["indices"]
        assert list(part.coeffs) == exp["coeffs"]
    # the overlap index 2 appears in both the first and last part
    assert query.parts[0].indices[0] == 2
    assert query.parts[2].indices[0] == 2
    assert trace.branch == BRANCH_BETA
    ans = gmpc_answer(query, sc.dataset)
    assert gmpc_recover(ans, trace, sc) == sc.Z


def test_example2_trace_weight_is_exact(example2):
    i, sc = fixture_setup(example2)
    _, trace = gmpc_query(i, sc, example2["trace"])
    # (alpha/2) * beta * 1/C(2,1) * 1/1! * 1/3! * 1/7!
    assert trace.weight == Fraction(7, 22) * Fraction(2, 7) * Fraction(1, 2) \
        * Fraction(1, 6) * Fraction(1, math.factorial(7))


def test_scripted_trace_rejects_wrong_overlap_counts(example2):
    i, sc = fixture_setup(example2)
    bad = {
        "l_star": 1,
        "branch": "one_minus_beta",          # needs an S index in the overlap
        "assignments": example2["trace"]["assignments"],
    }
    with pytest.raises(ValueError, match="branch"):
        gmpc_query(i, sc, bad)


def test_single_block_instance():
    i = inst(4, 2, 2)
    sc = sample_scenario(i, 5)
    query, trace = gmpc_query(i, sc, 11)
    assert len(query.parts) == 1
    assert sorted(query.parts[0].indices) == [1, 2, 3, 4]
    ans = gmpc_answer(query, sc.dataset)
    assert gmpc_recover(ans, trace, sc) == sc.Z


# ------------------------------------------------------------------ answers

def test_answer_zero_dataset():
    i = inst(6, 1, 1, q=7)
    data = tuple(Message.zero(1, 7) for _ in range(6))
    sc = sample_scenario(i, 0)
    query, _ = gmpc_query(i, sc, 0)
    ans = gmpc_answer(query, data)
    assert all(s == Message.zero(1, 7) for s in ans.symbols)


def test_answer_matches_dot_product_oracle():
    i = inst(6, 2, 1, q=3, ell=2)
    sc = sample_scenario(i, 21)
    query, _ = gmpc_query(i, sc, 4)
    ans = gmpc_answer(query, sc.dataset)
    for part, sym in zip(query.parts, ans.symbols):
        for coord in range(2):
            acc = 0
            for idx, c in zip(part.indices, part.coeffs):
                acc += c * sc.dataset[idx - 1].coords[coord].value
            assert acc % 3 == sym.coords[coord].value


def test_recover_m0_returns_answer_symbol():
    i = inst(6, 0, 2)
    sc = sample_scenario(i, 3)
    query, trace = gmpc_query(i, sc, 8)
    ans = gmpc_answer(query, sc.dataset)
    assert gmpc_recover(ans, trace, sc) == ans.symbols[trace.l_star - 1]


# ------------------------------------------------------------ protocol shape

@pytest.mark.parametrize("K,M,D", GRID)
def test_recoverability_partition_and_coefficients(K, M, D):
    i = inst(K, M, D, q=3)
    p = gmpc_params(i)
    for seed in range(12):
        sc = sample_scenario(i, seed)
        query, trace = gmpc_query(i, sc, seed + 100)
        assert len(query.parts) == p.n
        # partition soundness: overlap indices in two parts, the rest in one
        counts = Counter(idx for part in query.parts for idx in part.indices)
        overlap = set(query.parts[0].indices[:p.m]) if p.n > 1 else set()
        for idx in range(1, K + 1):
            assert counts[idx] == (2 if idx in overlap else 1)
        # coefficient correctness in the demand block
        part = query.parts[trace.l_star - 1]
        vu = {**sc.v_map, **sc.u_map}
        for idx, c in zip(part.indices, part.coeffs):
            if idx in vu:
                assert c == vu[idx].value
        assert set(sc.W) | set(sc.S) <= set(part.indices)
        ans = gmpc_answer(query, sc.dataset)
        assert gmpc_recover(ans, trace, sc) == sc.Z


def test_uncoded_mode_round_trip():
    i = inst(7, 2, 2, q=7, si_mode="uncoded")
    sc = sample_scenario(i, 2)
    assert len(sc.side_information) == 2    # the user holds X_S itself
    query, trace = gmpc_query(i, sc, 3)
    ans = gmpc_answer(query, sc.dataset)
    assert gmpc_recover(ans, trace, sc) == sc.Z


# ---------------------------------------------------------------- enumeration

def test_enumeration_total_weight_single_block():
    i = inst(4, 2, 2)
    total = Fraction(0)
    seen = set()
    for query, w in enumerate_gmpc_traces(i, (1, 2), (1, 2), (3, 4), (2, 1)):
        total += w
        seen.add(query.key())
    assert total == 1
    assert len(seen) == math.factorial(4)


@pytest.mark.parametrize("K,M,D", [(6, 2, 1), (8, 2, 2), (5, 0, 2), (7, 1, 2)])
def test_enumeration_total_weight_is_one(K, M, D):
    i = inst(K, M, D)
    W = tuple(range(1, D + 1))
    S = tuple(range(D + 1, D + M + 1))
    V = (1,) * D
    U = (2,) * M
    total = Fraction(0)
    count = 0
    for _, w in enumerate_gmpc_traces(i, W, V, S, U):
        total += w
        count += 1
    assert total == 1
    assert count == count_placements(gmpc_params(i))


def test_enumeration_budget_guard():
    i = inst(11, 2, 2, q=7)
    with pytest.raises(BudgetExceededError, match="Monte-Carlo"):
        next(iter(enumerate_gmpc_traces(i, (1, 2), (1, 3), (3, 4), (5, 1),
                                        budget=1000)))


def test_sampler_matches_enumeration_chi_squared():
    from scipy.stats import chisquare

    i = inst(5, 1, 1)
    W, V, S, U = (2,), (1,), (4,), (2,)
    expected = {}
    for query, w in enumerate_gmpc_traces(i, W, V, S, U):
        expected[query.key()] = expected.get(query.key(), Fraction(0)) + w
    sc = None
    base = sample_scenario(i, 0)
    from pcsilab.model import Scenario

    sc = Scenario(i, base.dataset, S, tuple(FieldElement(u, 3) for u in U),
                  W, tuple(FieldElement(v, 3) for v in V))
    trials = 30000
    root = SplitRng(123)
    counts = Counter()
    for t in range(trials):
        query, _ = gmpc_query(i, sc, root.child(str(t)))
        counts[query.key()] += 1
    keys = sorted(expected)
    assert set(counts) <= set(keys)
    f_exp = [float(expected[k]) * trials for k in keys]
    f_obs = [counts.get(k, 0) for k in keys]
    stat, pvalue = chisquare(f_obs, f_exp)
    assert pvalue > 1e-4, (stat, pvalue)


def test_trace_json_round_trip(example2):
    i, sc = fixture_setup(example2)
    _, trace = gmpc_query(i, sc, example2["trace"])
    d = trace.to_json_dict()
    query2, trace2 = gmpc_query(i, sc, d)
    assert trace2.pi == trace.pi
    assert trace2.weight == trace.weight
