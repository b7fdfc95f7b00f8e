"""Generalized Modified Partition-and-Code protocol (individual privacy).

The user partitions positions 1..K into n blocks of size M+D, where the
first and last block share the first m positions. A random permutation pi
places the demand/side-information indices into one block l* (splitting
them between the shared positions and the rest according to a branch
probability beta), the server returns one linear combination per block, and
the user recovers Z = A_{l*} - Y.

All randomness is reified: every run yields a GmpcTrace whose recorded
choices multiply to the trace weight, and the same placement generator
drives sampling, scripted replay, and exhaustive enumeration.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .algebra import Message
from .model import (
    Answer,
    ChoiceTrace,
    ProblemInstance,
    Query,
    QueryPart,
    Scenario,
    answer_query,
    as_rng,
)

BRANCH_BETA = "beta"
BRANCH_ONE_MINUS_BETA = "one_minus_beta"
BRANCH_MIDDLE = "middle"
BRANCH_SINGLE = "single"


class DegenerateBetaError(ValueError):
    """The beta table produced a value outside [0, 1] for these parameters."""


@dataclass(frozen=True)
class GmpcParams:
    instance: ProblemInstance
    n: int
    m: int
    r: int
    alpha: Fraction
    beta: Fraction
    mu: int
    rho: int
    beta_degenerate: bool

    @property
    def blocks(self) -> tuple[tuple[int, ...], ...]:
        """Position blocks I_1..I_n (1-based positions)."""
        K, sz = self.instance.K, self.instance.M + self.instance.D
        if self.n == 1:
            return (tuple(range(1, K + 1)),)
        out = [tuple(range((l - 1) * sz + 1, l * sz + 1)) for l in range(1, self.n)]
        out.append(tuple(range(1, self.m + 1)) + tuple(range((self.n - 1) * sz + 1, K + 1)))
        return tuple(out)

    def part_positions(self, l: int) -> tuple[int, ...]:
        return self.blocks[l - 1]


def gmpc_params(instance: ProblemInstance) -> GmpcParams:
    """Protocol parameters; beta follows the four-case table.

    With a single block (K = M+D) the partition is forced and none of the
    branch machinery applies. With M = 0 the two branches place the same
    number of demand indices in the shared positions, so beta is irrelevant
    and pinned to 0 (the fourth table case would divide by M).
    """
    K, M, D = instance.K, instance.M, instance.D
    n = -(-K // (M + D))
    m = n * (M + D) - K
    r = M + D - m
    mu = min(D, m)
    rho = min(D, r)
    if n == 1:
        return GmpcParams(instance, 1, 0, M + D, Fraction(1), Fraction(0), mu, rho, False)
    alpha = Fraction(m + 2 * r, K)
    degenerate = False
    if M == 0:
        beta = Fraction(0)
    elif D <= m and D <= r:
        beta = Fraction(m, m + 2 * r)
    elif D > m and D <= r:
        beta = Fraction(D, m + 2 * r)
    elif D <= m and D > r:
        beta = 1 - Fraction(2 * D, m + 2 * r)
    else:
        beta = Fraction(r, M) * (1 - Fraction(2 * D, m + 2 * r))
    if not 0 <= beta <= 1:
        degenerate = True
    return GmpcParams(instance, n, m, r, alpha, beta, mu, rho, degenerate)


@dataclass(frozen=True)
class GmpcTrace:
    """One fully resolved run of Step 1.

    Assignments map positions j to indices pi(j); their union is the whole
    permutation pi. branch records which placement rule filled the shared
    positions.
    """

    params: GmpcParams
    l_star: int
    branch: str
    overlap_assignment: dict[int, int]
    block_assignment: dict[int, int]
    rest_assignment: dict[int, int]
    choices: ChoiceTrace

    @property
    def weight(self) -> Fraction:
        return self.choices.weight

    @property
    def pi(self) -> tuple[int, ...]:
        K = self.params.instance.K
        out = [0] * K
        for d in (self.overlap_assignment, self.block_assignment, self.rest_assignment):
            for j, i in d.items():
                if out[j - 1]:
                    raise ValueError(f"position {j} assigned twice")
                out[j - 1] = i
        if sorted(out) != list(range(1, K + 1)):
            raise ValueError("assignments do not form a permutation of 1..K")
        return tuple(out)

    def to_json_dict(self) -> dict:
        return {
            "l_star": self.l_star,
            "branch": self.branch,
            "assignments": {
                "overlap": {str(j): i for j, i in sorted(self.overlap_assignment.items())},
                "block": {str(j): i for j, i in sorted(self.block_assignment.items())},
                "rest": {str(j): i for j, i in sorted(self.rest_assignment.items())},
            },
        }


def _branch_counts(params: GmpcParams) -> dict[str, tuple[Fraction, int, int]]:
    """branch -> (probability, #W-indices in overlap, #S-indices in overlap)."""
    out = {}
    if params.beta > 0:
        out[BRANCH_BETA] = (params.beta, params.mu, params.m - params.mu)
    if params.beta < 1:
        D, rho, m = params.instance.D, params.rho, params.m
        out[BRANCH_ONE_MINUS_BETA] = (1 - params.beta, D - rho, m - D + rho)
    return out


def _query_from_pi(params: GmpcParams, pi: tuple[int, ...], l_star: int,
                   v_map: dict[int, int], u_map: dict[int, int]) -> Query:
    inst = params.instance
    coeffs = []
    for j in params.part_positions(l_star):
        i = pi[j - 1]
        if i in v_map:
            coeffs.append(v_map[i])
        elif i in u_map:
            coeffs.append(u_map[i])
        else:
            raise ValueError(f"index {i} in block l*={l_star} is neither demand nor side information")
    qpp = tuple(coeffs)
    parts = tuple(
        QueryPart(tuple(pi[j - 1] for j in params.part_positions(l)), qpp)
        for l in range(1, params.n + 1)
    )
    return Query(parts, inst.q)


def _coeff_maps(scenario: Scenario) -> tuple[dict[int, int], dict[int, int]]:
    v_map = {i: c.value for i, c in zip(scenario.W, scenario.V)}
    u_map = {i: c.value for i, c in zip(scenario.S, scenario.U)}
    return v_map, u_map


def gmpc_query(instance: ProblemInstance, scenario: Scenario, randomness) -> tuple[Query, GmpcTrace]:
    """Step 1. randomness is a seed/SplitRng, or a scripted trace dict."""
    params = gmpc_params(instance)
    if isinstance(randomness, dict):
        trace = trace_from_json_dict(params, scenario, randomness)
    elif isinstance(randomness, GmpcTrace):
        trace = randomness
    else:
        trace = _sample_trace(params, scenario, as_rng(randomness))
    v_map, u_map = _coeff_maps(scenario)
    return _query_from_pi(params, trace.pi, trace.l_star, v_map, u_map), trace


def _sample_trace(params: GmpcParams, scenario: Scenario, rng) -> GmpcTrace:
    if params.beta_degenerate:
        raise DegenerateBetaError(
            f"beta={params.beta} lies outside [0,1]; protocol undefined for "
            f"K={params.instance.K} M={params.instance.M} D={params.instance.D}")
    inst = params.instance
    K, M, D = inst.K, inst.M, inst.D
    W, S = list(scenario.W), list(scenario.S)
    others = sorted(set(range(1, K + 1)) - set(W) - set(S))
    choices = ChoiceTrace()

    if params.n == 1:
        order = W + S
        rng.shuffle(order)
        choices.record("single_block_order", tuple(order), Fraction(1, math.factorial(K)))
        return GmpcTrace(params, 1, BRANCH_SINGLE, {},
                         {j: i for j, i in enumerate(order, start=1)}, {}, choices)

    if rng.bernoulli(params.alpha):
        l_star = (1, params.n)[rng.randrange(2)]
        choices.record("l_star", l_star, params.alpha / 2)
    else:
        l_star = 2 + rng.randrange(params.n - 2)
        choices.record("l_star", l_star, (1 - params.alpha) * Fraction(1, params.n - 2))

    overlap_asg: dict[int, int] = {}
    block_asg: dict[int, int] = {}
    rest_asg: dict[int, int] = {}
    branch = BRANCH_MIDDLE
    rest_ws = None
    if l_star in (1, params.n):
        bc = _branch_counts(params)
        if BRANCH_BETA in bc and (len(bc) == 1 or rng.bernoulli(params.beta)):
            branch = BRANCH_BETA
        else:
            branch = BRANCH_ONE_MINUS_BETA
        bprob, kw, ks = bc[branch]
        choices.record("branch", branch, bprob)
        w_over = sorted(rng.sample(W, kw))
        choices.record("overlap_W_subset", tuple(w_over), Fraction(1, math.comb(D, kw)))
        s_over = sorted(rng.sample(S, ks))
        choices.record("overlap_S_subset", tuple(s_over), Fraction(1, math.comb(M, ks)))
        over = w_over + s_over
        rng.shuffle(over)
        choices.record("overlap_order", tuple(over), Fraction(1, math.factorial(params.m)))
        overlap_asg = {j: i for j, i in enumerate(over, start=1)}
        rest_ws = sorted((set(W) | set(S)) - set(over))
        rng.shuffle(rest_ws)
        choices.record("block_order", tuple(rest_ws), Fraction(1, math.factorial(params.r)))
        block_pos = [j for j in params.part_positions(l_star) if j > params.m]
        block_asg = {j: i for j, i in zip(block_pos, rest_ws)}
    else:
        ws = W + S
        rng.shuffle(ws)
        choices.record("block_order", tuple(ws), Fraction(1, math.factorial(M + D)))
        block_asg = {j: i for j, i in zip(params.part_positions(l_star), ws)}
    rest = list(others)
    rng.shuffle(rest)
    choices.record("rest_order", tuple(rest), Fraction(1, math.factorial(K - M - D)))
    taken = set(overlap_asg) | set(block_asg)
    rest_pos = [j for j in range(1, K + 1) if j not in taken]
    rest_asg = {j: i for j, i in zip(rest_pos, rest)}
    return GmpcTrace(params, l_star, branch, overlap_asg, block_asg, rest_asg, choices)


def trace_from_json_dict(params: GmpcParams, scenario: Scenario, d: dict) -> GmpcTrace:
    """Rebuild a scripted trace, recomputing its exact probability weight."""
    inst = params.instance
    l_star = d["l_star"]
    branch = d["branch"]
    asg = d.get("assignments", {})
    overlap = {int(j): i for j, i in asg.get("overlap", {}).items()}
    block = {int(j): i for j, i in asg.get("block", {}).items()}
    rest = {int(j): i for j, i in asg.get("rest", {}).items()}
    choices = ChoiceTrace()
    W, S = set(scenario.W), set(scenario.S)
    if params.n == 1:
        choices.record("single_block_order", tuple(block[j] for j in sorted(block)),
                       Fraction(1, math.factorial(inst.K)))
        return GmpcTrace(params, 1, BRANCH_SINGLE, {}, block, {}, choices)
    if l_star in (1, params.n):
        choices.record("l_star", l_star, params.alpha / 2)
        bc = _branch_counts(params)
        if branch not in bc:
            raise ValueError(f"branch {branch!r} has zero probability here")
        bprob, kw, ks = bc[branch]
        w_over = sorted(i for i in overlap.values() if i in W)
        s_over = sorted(i for i in overlap.values() if i in S)
        if len(w_over) != kw or len(s_over) != ks:
            raise ValueError(
                f"overlap holds {len(w_over)} demand / {len(s_over)} side indices; "
                f"branch {branch} requires {kw}/{ks}")
        choices.record("branch", branch, bprob)
        choices.record("overlap_W_subset", tuple(w_over), Fraction(1, math.comb(inst.D, kw)))
        choices.record("overlap_S_subset", tuple(s_over), Fraction(1, math.comb(inst.M, ks)))
        choices.record("overlap_order", tuple(overlap[j] for j in sorted(overlap)),
                       Fraction(1, math.factorial(params.m)))
        choices.record("block_order", tuple(block[j] for j in sorted(block)),
                       Fraction(1, math.factorial(params.r)))
    else:
        choices.record("l_star", l_star, (1 - params.alpha) * Fraction(1, params.n - 2))
        choices.record("block_order", tuple(block[j] for j in sorted(block)),
                       Fraction(1, math.factorial(inst.M + inst.D)))
    choices.record("rest_order", tuple(rest[j] for j in sorted(rest)),
                   Fraction(1, math.factorial(inst.K - inst.M - inst.D)))
    trace = GmpcTrace(params, l_star, branch, overlap, block, rest, choices)
    placed = set(overlap.values()) | set(block.values())
    if placed != W | S:
        raise ValueError("block l* must hold exactly the demand and side information indices")
    return trace


def gmpc_answer(query: Query, dataset: tuple[Message, ...]) -> Answer:
    """Step 2: one linear combination per part."""
    return answer_query(query, dataset)


def gmpc_recover(answer: Answer, trace: GmpcTrace, scenario: Scenario) -> Message:
    """Step 3: Z = A_{l*} - Y."""
    return answer.symbols[trace.l_star - 1] - scenario.Y


# ---------------------------------------------------------------- enumeration

def edge_trace_weight(params: GmpcParams, bprob: Fraction, kw: int, ks: int) -> Fraction:
    """Probability of one fully specified edge-block trace."""
    inst = params.instance
    return (params.alpha / 2) * bprob \
        * Fraction(1, math.comb(inst.D, kw)) * Fraction(1, math.comb(inst.M, ks)) \
        * Fraction(1, math.factorial(params.m)) \
        * Fraction(1, math.factorial(params.r)) \
        * Fraction(1, math.factorial(inst.K - inst.M - inst.D))


def middle_trace_weight(params: GmpcParams) -> Fraction:
    inst = params.instance
    return (1 - params.alpha) * Fraction(1, params.n - 2) \
        * Fraction(1, math.factorial(inst.M + inst.D)) \
        * Fraction(1, math.factorial(inst.K - inst.M - inst.D))


def trace_weights(params: GmpcParams) -> list[Fraction]:
    """The distinct per-trace weights the enumeration can emit."""
    if params.n == 1:
        return [Fraction(1, math.factorial(params.instance.K))]
    out = [edge_trace_weight(params, bprob, kw, ks)
           for bprob, kw, ks in _branch_counts(params).values()]
    if params.n >= 3 and params.alpha < 1:
        out.append(middle_trace_weight(params))
    return out


def iter_placements(params: GmpcParams, W, S):
    """Exhaustive Step-1 randomness for fixed supports.

    Yields (weight, pi, l_star) over every choice the protocol can make;
    weights sum to exactly 1. Iteration order is lexicographic in each
    component.
    """
    inst = params.instance
    K, M, D = inst.K, inst.M, inst.D
    Wl, Sl = sorted(W), sorted(S)
    ws_set = set(Wl) | set(Sl)
    others = sorted(set(range(1, K + 1)) - ws_set)
    if params.n == 1:
        w = Fraction(1, math.factorial(K))
        for perm in itertools.permutations(sorted(ws_set)):
            yield w, perm, 1
        return
    if params.beta_degenerate:
        raise DegenerateBetaError("beta outside [0,1]; enumeration undefined")
    sz = M + D
    branches = _branch_counts(params)
    for l_star in (1, params.n):
        for bprob, kw, ks in branches.values():
            wgt = edge_trace_weight(params, bprob, kw, ks)
            for w_over in itertools.combinations(Wl, kw):
                for s_over in itertools.combinations(Sl, ks):
                    over = w_over + s_over
                    rest_ws = sorted(ws_set - set(over))
                    for operm in itertools.permutations(over):
                        for bperm in itertools.permutations(rest_ws):
                            for rperm in itertools.permutations(others):
                                if l_star == 1:
                                    pi = operm + bperm + rperm
                                else:
                                    pi = operm + rperm + bperm
                                yield wgt, pi, l_star
    if params.n >= 3 and params.alpha < 1:
        wmid = middle_trace_weight(params)
        for l_star in range(2, params.n):
            a = (l_star - 1) * sz
            for wsperm in itertools.permutations(sorted(ws_set)):
                for rperm in itertools.permutations(others):
                    pi = rperm[:a] + wsperm + rperm[a:]
                    yield wmid, pi, l_star


def count_placements(params: GmpcParams) -> int:
    """Number of (weight > 0) placements per (W, S) pair, without iterating."""
    inst = params.instance
    K, M, D = inst.K, inst.M, inst.D
    if params.n == 1:
        return math.factorial(K)
    rest = math.factorial(K - M - D)
    total = 0
    for _, kw, ks in _branch_counts(params).values():
        total += 2 * math.comb(D, kw) * math.comb(M, ks) \
            * math.factorial(params.m) * math.factorial(params.r) * rest
    if params.n >= 3 and params.alpha < 1:
        total += (params.n - 2) * math.factorial(M + D) * rest
    return total


def enumerate_gmpc_traces(instance: ProblemInstance, W, V, S, U, budget: int = 10**8):
    """Stream (Query, weight) over the protocol's full randomness.

    V and U are coefficient value tuples aligned with sorted(W), sorted(S).
    Weights sum to exactly 1 per (W, V, S, U).
    """
    params = gmpc_params(instance)
    total = count_placements(params)
    if total > budget:
        raise BudgetExceededError(
            f"{total} traces exceed the budget of {budget}; use Monte-Carlo mode")
    v_map = dict(zip(sorted(W), V))
    u_map = dict(zip(sorted(S), U))
    for wgt, pi, l_star in iter_placements(params, W, S):
        yield _query_from_pi(params, pi, l_star, v_map, u_map), wgt


class BudgetExceededError(RuntimeError):
    pass
