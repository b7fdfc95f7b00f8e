"""Partition-and-Code with Interference Alignment (joint privacy).

The dataset indices are placed into m = K/s ordered blocks of s slots; block
B_1 is shared and each answer A_i combines B_1 (scaled by omega_i = 1/(x_i -
y_1)) with block B_{1+i}. The demand and side-information indices together
fill exactly two blocks, and a left null vector c of the shared-block scaling
column cancels B_1 from the recovery combination sum_{i in I} c_i A_i = Z + Y.

This implements the t=1 case (every query part is two blocks), which exists
exactly when M + D = 2s with s = floor(M/D) + 1, i.e. D = 2 with M even,
and (K - M - D) divisible by s.

Placement: the pair of blocks holding W and S may be any two blocks,
including the shared one. Four placement shapes arise (W split over two
non-shared blocks / split over B_1 and a non-shared block / both in B_1 /
both in one non-shared block), and their probabilities are chosen so that
every specific placement of every hypothesis is equally likely given the
observed query; the exact joint-privacy verifier is the arbiter of that
choice. The narrower rule that only ever splits W over non-shared blocks is
kept available as placement="restricted" -- it fails joint privacy (most
demand pairs get posterior zero) and the verifier surfaces that.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .algebra import Message, inv_mod
from .model import (
    Answer,
    ChoiceTrace,
    ProblemInstance,
    Query,
    QueryPart,
    Scenario,
    SI_CODED,
    answer_query,
    as_rng,
)

PLACEMENT_GENERAL = "general"
PLACEMENT_RESTRICTED = "restricted"

CASE_SPLIT = "split"                    # W in two distinct non-shared blocks
CASE_SHARED_SPLIT = "shared_split"      # W split between B_1 and a non-shared block
CASE_SHARED_PAIR = "shared_pair"        # W entirely inside B_1
CASE_CO_BLOCKED = "co_blocked"          # W entirely inside one non-shared block


class NotCoveredError(ValueError):
    """Parameters outside the implemented PC-IA construction."""


@dataclass(frozen=True)
class PciaParams:
    instance: ProblemInstance
    s: int              # block size = floor(M/D) + 1
    n: int              # answer count
    m: int              # block count = n + 1
    t: int              # shared block count (always 1 here)
    r: int              # overlap size of the general construction (0 here)
    xs: tuple[int, ...]
    y0: int
    y1: int
    omegas: tuple[int, ...]  # omega_{i,1} = 1/(x_i - y_1), i = 1..n

    def omega(self, i: int) -> int:
        return self.omegas[i - 1]


def pcia_params(instance: ProblemInstance, xs=None, ys=None) -> PciaParams:
    """Parameters for the divisible t=1 case; errors outside it."""
    K, M, D, q = instance.K, instance.M, instance.D, instance.q
    s = M // D + 1
    if (K - M - D) % s != 0:
        raise NotCoveredError(
            f"PC-IA divisible case only: floor(M/D)+1 = {s} does not divide K-M-D = {K - M - D}")
    if 2 * s != M + D:
        raise NotCoveredError(
            f"two-block parts need M+D = 2(floor(M/D)+1); got M+D={M + D}, s={s}")
    n = (K - M - D) // s + 1
    m = n + 1
    t = 1
    if s * m != K:
        raise NotCoveredError(f"block structure needs s*m = K; got {s}*{m} != {K}")
    if q < n + t + 1:
        raise NotCoveredError(f"need q >= n+t+1 = {n + t + 1} distinct evaluation points, q={q}")
    if xs is None:
        xs = tuple(range(n))
    else:
        xs = tuple(x % q for x in xs)
    if ys is None:
        y0, y1 = q - 2, q - 1
    else:
        y0, y1 = (y % q for y in ys)
    pts = (*xs, y0, y1)
    if len(set(pts)) != len(pts):
        raise NotCoveredError("evaluation points must be distinct")
    omegas = tuple(inv_mod(x - y1, q) for x in xs)
    return PciaParams(instance, s, n, m, t, 0, xs, y0, y1, omegas)


def case_counts(params: PciaParams) -> dict[str, int]:
    """Number of distinct (W, S) slot assignments per placement shape."""
    s, m, M = params.s, params.m, params.instance.M
    mf = math.factorial(M)
    return {
        CASE_SPLIT: math.comb(m - 1, 2) * 2 * s * s * mf,
        CASE_SHARED_SPLIT: 2 * s * s * (m - 1) * mf,
        CASE_SHARED_PAIR: s * (s - 1) * (m - 1) * mf,
        CASE_CO_BLOCKED: (m - 1) * s * (s - 1) * mf,
    }


def case_probabilities(params: PciaParams, placement: str = PLACEMENT_GENERAL) -> dict[str, Fraction]:
    """Placement-shape probabilities making every hypothesis equally likely.

    Per observed query, a hypothesis (W*, S*) of shape `case` has likelihood
    p_case / count_case; shape shared_pair admits m-1 hypotheses per demand
    pair (one per choice of the all-side-information block), so its specific
    placements are down-weighted by m-1.
    """
    if placement == PLACEMENT_RESTRICTED:
        return {CASE_SPLIT: Fraction(1), CASE_SHARED_SPLIT: Fraction(0),
                CASE_SHARED_PAIR: Fraction(0), CASE_CO_BLOCKED: Fraction(0)}
    c = case_counts(params)
    m = params.m
    shared_pair_unit = c[CASE_SHARED_PAIR] // (m - 1)
    total = c[CASE_SPLIT] + c[CASE_SHARED_SPLIT] + c[CASE_CO_BLOCKED] + shared_pair_unit
    lam = Fraction(1, total)
    return {
        CASE_SPLIT: c[CASE_SPLIT] * lam,
        CASE_SHARED_SPLIT: c[CASE_SHARED_SPLIT] * lam,
        CASE_SHARED_PAIR: shared_pair_unit * lam,
        CASE_CO_BLOCKED: c[CASE_CO_BLOCKED] * lam,
    }


@dataclass(frozen=True)
class PciaTrace:
    params: PciaParams
    case: str
    blocks: tuple[tuple[int, ...], ...]   # blocks[0] is B_1; slot order kept
    J: tuple[int, ...]                    # 1-based blocks holding demand indices
    I: tuple[int, ...]                    # 1-based answer ids used in recovery
    H: tuple[int, ...]
    c: tuple[int, ...]                    # aligned with I; c[0] == 1
    alphas: tuple[tuple[int, ...], ...]   # per block, per slot
    choices: ChoiceTrace

    @property
    def weight(self) -> Fraction:
        return self.choices.weight

    @property
    def active_blocks(self) -> tuple[int, ...]:
        """1-based blocks holding demand or side-information indices."""
        shared = () if self.case == CASE_SPLIT else (1,)
        return tuple(sorted({*shared, *(1 + i for i in self.I)}))

    def to_json_dict(self) -> dict:
        active = set(self.active_blocks)
        free = {str(j): list(self.alphas[j - 1])
                for j in range(1, self.params.m + 1) if j not in active}
        return {"blocks": [list(b) for b in self.blocks], "free_alphas": free}


def _classify(blocks, W, S) -> str:
    Wset = set(W)
    wblocks = [j for j, b in enumerate(blocks) if Wset & set(b)]
    if wblocks == [0]:
        return CASE_SHARED_PAIR
    if len(wblocks) == 1:
        return CASE_CO_BLOCKED
    if 0 in wblocks:
        return CASE_SHARED_SPLIT
    return CASE_SPLIT


def _recovery_sets(params: PciaParams, blocks, W, S):
    """J, I, H and the alignment vector c for a placement.

    I is the minimal set of answer indices covering W whose residual support
    is exactly the side information (so recovery can subtract Y); ties would
    be broken toward the lexicographically largest set, but in this
    construction the choice is always forced.
    """
    q = params.instance.q
    Wset, Sset = set(W), set(S)
    J = tuple(j + 1 for j, b in enumerate(blocks) if Wset & set(b))
    active_nonshared = [j for j, b in enumerate(blocks)
                        if j > 0 and (Wset | Sset) & set(b)]
    I = tuple(j for j in active_nonshared)     # answer i covers block 1+i
    H = tuple(sorted(set(range(1, params.t + 1)) - set(J), reverse=True)[: len(I) - 1])
    if len(I) == 2:
        c = (1, (-params.omega(I[0]) * inv_mod(params.omega(I[1]), q)) % q)
    elif len(I) == 1:
        c = (1,)
    else:
        raise ValueError("demand/side information must occupy exactly two blocks")
    # alignment sanity: sum_{i in I} c_i * omega_{i,h} = 0 for h in H
    for h in H:
        if sum(ci * params.omega(i) for ci, i in zip(c, I)) % q != 0:
            raise ValueError("alignment vector fails c . T = 0")
    return J, I, H, c


def pcia_coefficients(trace_or_blocks, scenario: Scenario, params: PciaParams,
                      free_alphas=None, rng=None):
    """Coefficient assignment (alphas, c) for a placement.

    Indices l in W (or S) sitting in block j get alpha = v_l / d_j (or
    u_l / d_j) where d_1 = sum_{i in I} c_i omega_i and d_{1+i} = c_i; all
    other alphas are free nonzero draws (given explicitly or drawn from rng).
    """
    blocks = trace_or_blocks.blocks if isinstance(trace_or_blocks, PciaTrace) else trace_or_blocks
    q = params.instance.q
    W, S = scenario.W, scenario.S
    J, I, H, c = _recovery_sets(params, blocks, W, S)
    v_map = {i: cf.value for i, cf in zip(scenario.W, scenario.V)}
    u_map = {i: cf.value for i, cf in zip(scenario.S, scenario.U)}
    d_shared = sum(ci * params.omega(i) for ci, i in zip(c, I)) % q
    cmap = dict(zip(I, c))
    alphas = []
    for j, blk in enumerate(blocks):
        row = []
        for k, l in enumerate(blk):
            val = v_map.get(l, u_map.get(l))
            if val is None:
                row.append(None)
            else:
                denom = d_shared if j == 0 else cmap[j]
                row.append((val * inv_mod(denom, q)) % q)
        alphas.append(row)
    if free_alphas is not None:
        it = iter(free_alphas)
        for row in alphas:
            for k, v in enumerate(row):
                if v is None:
                    row[k] = next(it)
    else:
        for row in alphas:
            for k, v in enumerate(row):
                if v is None:
                    row[k] = rng.nonzero(q)
    return tuple(tuple(r) for r in alphas), (J, I, H, c)


def _query_from_blocks(params: PciaParams, blocks, alphas) -> Query:
    q = params.instance.q
    parts = []
    for i in range(1, params.n + 1):
        idx = blocks[0] + blocks[i]
        w = params.omega(i)
        coeffs = tuple((a * w) % q for a in alphas[0]) + tuple(alphas[i])
        parts.append(QueryPart(tuple(idx), coeffs))
    return Query(tuple(parts), q)


def _free_slot_count(params: PciaParams) -> int:
    return params.s * (params.m - 2)


def pcia_query(instance: ProblemInstance, scenario: Scenario, randomness,
               placement: str = PLACEMENT_GENERAL, params: PciaParams = None,
               max_rejections: int = 64) -> tuple[Query, PciaTrace]:
    """Generate a PC-IA query; randomness is a seed/SplitRng or a trace dict.

    In coded-SI mode the free coefficient draws are rejection-resampled until
    the answers pass the exact-(M+D)-support requirement for every D-subset.
    For t=1 two-block parts the support pattern of any combination of the
    answers does not depend on the coefficient values, so the first draw is
    always accepted; the loop guards overridden evaluation points.
    """
    params = params or pcia_params(instance)
    if isinstance(randomness, dict):
        return _scripted_query(params, scenario, randomness, placement)
    rng = as_rng(randomness)
    blocks, case, choices = _sample_placement(params, scenario, rng, placement)
    for attempt in range(max_rejections):
        free = [rng.nonzero(instance.q) for _ in range(_free_slot_count(params))]
        alphas, (J, I, H, c) = pcia_coefficients(blocks, scenario, params, free_alphas=free)
        query = _query_from_blocks(params, blocks, alphas)
        if instance.si_mode != SI_CODED or _csi_acceptable(query, instance):
            break
    else:
        raise RuntimeError("free-coefficient rejection failed to terminate")
    ct = ChoiceTrace(list(choices.choices))
    nf = _free_slot_count(params)
    if nf:
        ct.record("free_alphas", tuple(free), Fraction(1, (instance.q - 1) ** nf))
    trace = PciaTrace(params, case, blocks, J, I, H, c, alphas, ct)
    return query, trace


def _csi_acceptable(query: Query, instance: ProblemInstance) -> bool:
    report = support_requirement_check(query, instance, mode="CSI")
    return report.passed


def _sample_placement(params: PciaParams, scenario: Scenario, rng, placement):
    inst = params.instance
    s, m = params.s, params.m
    W, S = list(scenario.W), list(scenario.S)
    others = sorted(set(range(1, inst.K + 1)) - set(W) - set(S))
    probs = case_probabilities(params, placement)
    counts = case_counts(params)
    choices = ChoiceTrace()
    # exact case draw over a common denominator
    denom = 1
    for p in probs.values():
        denom = denom * p.denominator // math.gcd(denom, p.denominator)
    u = rng.randrange(denom)
    acc = 0
    for case, p in probs.items():
        acc += int(p * denom)
        if u < acc:
            break
    choices.record("placement_case", case, probs[case])
    blocks = [[None] * s for _ in range(m)]
    worder = list(W)
    rng.shuffle(worder)

    def fill_s(active_blocks):
        sorder = list(S)
        rng.shuffle(sorder)
        if S:
            choices.record("side_fill", tuple(sorder), Fraction(1, math.factorial(len(S))))
        it = iter(sorder)
        for j in active_blocks:
            for k in range(s):
                if blocks[j][k] is None:
                    blocks[j][k] = next(it)

    if case == CASE_SPLIT:
        jj = sorted(rng.sample(range(1, m), 2))
        choices.record("demand_blocks", tuple(jj), Fraction(1, math.comb(m - 1, 2)))
        choices.record("demand_order", tuple(worder), Fraction(1, 2))
        k1, k2 = rng.randrange(s), rng.randrange(s)
        choices.record("demand_slots", (k1, k2), Fraction(1, s * s))
        blocks[jj[0]][k1] = worder[0]
        blocks[jj[1]][k2] = worder[1]
        fill_s(jj)
    elif case == CASE_SHARED_SPLIT:
        choices.record("demand_order", tuple(worder), Fraction(1, 2))
        k0 = rng.randrange(s)
        j = 1 + rng.randrange(m - 1)
        k1 = rng.randrange(s)
        choices.record("demand_slots", (k0, j, k1), Fraction(1, s * s * (m - 1)))
        blocks[0][k0] = worder[0]
        blocks[j][k1] = worder[1]
        fill_s([0, j])
    elif case == CASE_SHARED_PAIR:
        kk = rng.sample(range(s), 2)
        choices.record("demand_slots", tuple(kk), Fraction(1, s * (s - 1)))
        j = 1 + rng.randrange(m - 1)
        choices.record("side_block", j + 1, Fraction(1, m - 1))
        blocks[0][kk[0]] = worder[0]
        blocks[0][kk[1]] = worder[1]
        fill_s([0, j])
    else:  # CASE_CO_BLOCKED
        j = 1 + rng.randrange(m - 1)
        kk = rng.sample(range(s), 2)
        choices.record("demand_block_slots", (j + 1, *kk), Fraction(1, (m - 1) * s * (s - 1)))
        blocks[j][kk[0]] = worder[0]
        blocks[j][kk[1]] = worder[1]
        fill_s([j, 0])
    filler = list(others)
    rng.shuffle(filler)
    if filler:
        choices.record("filler_order", tuple(filler), Fraction(1, math.factorial(len(filler))))
    it = iter(filler)
    for j in range(m):
        for k in range(s):
            if blocks[j][k] is None:
                blocks[j][k] = next(it)
    return tuple(tuple(b) for b in blocks), case, choices


def _scripted_query(params: PciaParams, scenario: Scenario, d: dict, placement):
    blocks = tuple(tuple(b) for b in d["blocks"])
    inst = params.instance
    if sorted(i for b in blocks for i in b) != list(range(1, inst.K + 1)):
        raise ValueError("blocks must partition 1..K")
    case = _classify(blocks, scenario.W, scenario.S)
    free = []
    Wset, Sset = set(scenario.W), set(scenario.S)
    fa = d.get("free_alphas", {})
    for j in range(1, params.m + 1):
        blk = blocks[j - 1]
        if not (Wset | Sset) & set(blk):
            free.extend(fa[str(j)])
    alphas, (J, I, H, c) = pcia_coefficients(blocks, scenario, params, free_alphas=free)
    choices = ChoiceTrace()
    probs = case_probabilities(params, placement)
    counts = case_counts(params)
    choices.record("placement", (case, blocks),
                   probs[case] * Fraction(1, counts[case])
                   * Fraction(1, math.factorial(inst.K - inst.M - inst.D)))
    nf = _free_slot_count(params)
    if nf:
        choices.record("free_alphas", tuple(free), Fraction(1, (inst.q - 1) ** nf))
    trace = PciaTrace(params, case, blocks, J, I, H, c, alphas, choices)
    return _query_from_blocks(params, blocks, alphas), trace


def pcia_answer(query: Query, dataset: tuple[Message, ...]) -> Answer:
    return answer_query(query, dataset)


def pcia_recover(answer: Answer, trace: PciaTrace, scenario: Scenario) -> Message:
    """sum_{i in I} c_i A_i - Y; the shared block cancels by alignment."""
    from .algebra import FieldElement

    q = trace.params.instance.q
    acc = None
    for ci, i in zip(trace.c, trace.I):
        term = answer.symbols[i - 1].scale(FieldElement(ci, q))
        acc = term if acc is None else acc + term
    return acc - scenario.Y


# ------------------------------------------------------------- placements

def iter_placements(params: PciaParams, W, S, placement: str = PLACEMENT_GENERAL):
    """Exhaustive placement randomness: yields (weight, blocks).

    Weights sum to exactly 1 over the stream for any fixed (W, S).
    """
    inst = params.instance
    s, m = params.s, params.m
    Wl, Sl = sorted(W), sorted(S)
    others = sorted(set(range(1, inst.K + 1)) - set(W) - set(S))
    probs = case_probabilities(params, placement)
    counts = case_counts(params)
    fill_w = Fraction(1, math.factorial(len(others)))

    def filled(partial):
        holes = [(j, k) for j in range(m) for k in range(s) if partial[j][k] is None]
        for perm in itertools.permutations(others):
            blk = [list(b) for b in partial]
            for (j, k), v in zip(holes, perm):
                blk[j][k] = v
            yield tuple(tuple(b) for b in blk)

    def s_fills(partial, active):
        holes = [(j, k) for j in active for k in range(s) if partial[j][k] is None]
        for perm in itertools.permutations(Sl):
            blk = [list(b) for b in partial]
            for (j, k), v in zip(holes, perm):
                blk[j][k] = v
            yield blk

    def emit(case, partial, active):
        w = probs[case] * Fraction(1, counts[case]) * fill_w
        if w == 0:
            return
        for blk in s_fills(partial, active):
            for full in filled(blk):
                yield w, full

    def empty():
        return [[None] * s for _ in range(m)]

    for j1, j2 in itertools.combinations(range(1, m), 2):
        for wp in itertools.permutations(Wl):
            for k1 in range(s):
                for k2 in range(s):
                    blk = empty()
                    blk[j1][k1] = wp[0]
                    blk[j2][k2] = wp[1]
                    yield from emit(CASE_SPLIT, blk, (j1, j2))
    for wp in itertools.permutations(Wl):
        for k0 in range(s):
            for j in range(1, m):
                for k1 in range(s):
                    blk = empty()
                    blk[0][k0] = wp[0]
                    blk[j][k1] = wp[1]
                    yield from emit(CASE_SHARED_SPLIT, blk, (0, j))
    if s >= 2:
        for kk in itertools.permutations(range(s), 2):
            for j in range(1, m):
                blk = empty()
                blk[0][kk[0]] = Wl[0]
                blk[0][kk[1]] = Wl[1]
                yield from emit(CASE_SHARED_PAIR, blk, (0, j))
        for j in range(1, m):
            for kk in itertools.permutations(range(s), 2):
                blk = empty()
                blk[j][kk[0]] = Wl[0]
                blk[j][kk[1]] = Wl[1]
                yield from emit(CASE_CO_BLOCKED, blk, (j, 0))


# ------------------------------------------------------------- hypotheses

@dataclass(frozen=True)
class QueryHypothesis:
    """One (W*, S*) explanation of an observed block arrangement.

    slot_var_scale maps each (block, slot) to (variable_id, scale): the
    observed block coefficient there equals scale * value, where value is
    v (variables 0..D-1, aligned with sorted W*), u (D..D+M-1, sorted S*)
    or a free draw (the rest). weight is the probability of this exact
    (W, S) slot assignment given the tuple; filler and coefficient factors
    are common to all hypotheses of an arrangement.
    """

    W: tuple[int, ...]
    S: tuple[int, ...]
    case: str
    weight: Fraction
    slot_var_scale: dict[tuple[int, int], tuple[int, int]]


def iter_query_hypotheses(params: PciaParams, blocks,
                          placement: str = PLACEMENT_GENERAL):
    """All tuple hypotheses consistent with an observed arrangement."""
    inst = params.instance
    q, s, m, D, M = inst.q, params.s, params.m, inst.D, inst.M
    probs = case_probabilities(params, placement)
    counts = case_counts(params)

    def build(wslots, active):
        Wst = tuple(sorted(blocks[j][k] for j, k in wslots))
        wslot_set = set(wslots)
        s_slots = [(j, k) for j in active for k in range(s) if (j, k) not in wslot_set]
        Sst = tuple(sorted(blocks[j][k] for j, k in s_slots))
        case = _classify(blocks, Wst, Sst)
        w = probs[case] * Fraction(1, counts[case])
        if w == 0:
            return None
        _, I, _, c = _recovery_sets(params, blocks, Wst, Sst)
        d_shared = sum(ci * params.omega(i) for ci, i in zip(c, I)) % q
        cmap = dict(zip(I, c))
        w_rank = {v: r for r, v in enumerate(Wst)}
        s_rank = {v: r for r, v in enumerate(Sst)}
        svs = {}
        for j, k in wslots:
            denom = d_shared if j == 0 else cmap[j]
            svs[(j, k)] = (w_rank[blocks[j][k]], inv_mod(denom, q))
        for j, k in s_slots:
            denom = d_shared if j == 0 else cmap[j]
            svs[(j, k)] = (D + s_rank[blocks[j][k]], inv_mod(denom, q))
        fid = D + M
        for j in range(m):
            for k in range(s):
                if (j, k) not in svs:
                    svs[(j, k)] = (fid, 1)
                    fid += 1
        return QueryHypothesis(Wst, Sst, case, w, svs)

    hyps = []
    for j1, j2 in itertools.combinations(range(1, m), 2):
        for k1 in range(s):
            for k2 in range(s):
                hyps.append(build([(j1, k1), (j2, k2)], (j1, j2)))
    for k0 in range(s):
        for j in range(1, m):
            for k1 in range(s):
                hyps.append(build([(0, k0), (j, k1)], (0, j)))
    if s >= 2:
        for kk in itertools.combinations(range(s), 2):
            for j in range(1, m):
                hyps.append(build([(0, kk[0]), (0, kk[1])], (0, j)))
        for j in range(1, m):
            for kk in itertools.combinations(range(s), 2):
                hyps.append(build([(j, kk[0]), (j, kk[1])], (j, 0)))
    return [h for h in hyps if h is not None]


# --------------------------------------------------- support requirement

@dataclass(frozen=True)
class SupportCheckEntry:
    subset: tuple[int, ...]
    passed: bool
    best_size: int                  # smallest covering-combination support
    witness: tuple[int, ...] | None  # lambda achieving an admissible size
    witness_support: tuple[int, ...] | None


@dataclass(frozen=True)
class SupportCheckReport:
    mode: str
    entries: tuple[SupportCheckEntry, ...]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def entry(self, subset) -> SupportCheckEntry:
        key = tuple(sorted(subset))
        for e in self.entries:
            if e.subset == key:
                return e
        raise KeyError(key)


def answer_support_forms(query: Query, K: int) -> list[list[int]]:
    """Each part's linear form as a dense coefficient vector (1-based)."""
    forms = []
    for part in query.parts:
        v = [0] * (K + 1)
        for i, c in zip(part.indices, part.coeffs):
            v[i] = (v[i] + c) % query.q
        forms.append(v)
    return forms


def support_requirement_check(answers, instance: ProblemInstance, mode: str = "CSI",
                              budget: int = 10**8) -> SupportCheckReport:
    """Per-D-subset structural requirement on the answers' combination space.

    For each D-subset W*, consider every nonzero combination of the answer
    forms whose support covers W*, and let b be the smallest support size
    among them. Uncoded side information can absorb any residue of size up
    to M, so SI mode passes iff b <= M+D. A coded side information is a
    single combination with exactly M nonzero coefficients, so a covering
    combination serves a hypothetical user only at support size exactly D
    (no side information used) or exactly M+D; CSI mode passes iff b is one
    of those two sizes. (Matching a combination of strictly intermediate
    size to a coded Y would force some of its M coefficients to zero.)
    """
    if mode not in ("SI", "CSI"):
        raise ValueError(f"mode must be SI or CSI, got {mode!r}")
    K, M, D, q = instance.K, instance.M, instance.D, instance.q
    if isinstance(answers, Query):
        forms = answer_support_forms(answers, K)
    else:
        forms = [list(f) for f in answers]
        for f in forms:
            if len(f) != K + 1:
                raise ValueError("forms must be dense vectors of length K+1")
    n = len(forms)
    n_combos = (q**n - 1) // (q - 1)
    n_subsets = math.comb(K, D)
    if n_combos * n_subsets > budget:
        raise gmpc_budget_error(n_combos * n_subsets, budget)
    supports = []
    for lam in _normalized_lambdas(n, q):
        vec = [0] * (K + 1)
        for li, f in zip(lam, forms):
            if li:
                for i in range(1, K + 1):
                    vec[i] = (vec[i] + li * f[i]) % q
        mask = 0
        for i in range(1, K + 1):
            if vec[i]:
                mask |= 1 << i
        supports.append((mask, lam))
    entries = []
    for subset in itertools.combinations(range(1, K + 1), D):
        smask = 0
        for i in subset:
            smask |= 1 << i
        best, best_lam, best_mask = None, None, None
        for mask, lam in supports:
            if mask & smask == smask:
                size = mask.bit_count()
                if best is None or size < best:
                    best, best_lam, best_mask = size, lam, mask
        if best is None:
            entries.append(SupportCheckEntry(subset, False, 0, None, None))
            continue
        ok = best <= M + D if mode == "SI" else best in (D, M + D)
        sup = tuple(i for i in range(1, K + 1) if best_mask >> i & 1)
        entries.append(SupportCheckEntry(subset, ok, best, best_lam if ok else None,
                                         sup if ok else None))
    return SupportCheckReport(mode, tuple(entries))


def _normalized_lambdas(n: int, q: int):
    """All nonzero combination coefficient vectors up to scaling."""
    for lead in range(n):
        for tail in itertools.product(range(q), repeat=n - lead - 1):
            yield (0,) * lead + (1,) + tail


def gmpc_budget_error(size, budget):
    from .gmpc import BudgetExceededError

    return BudgetExceededError(f"{size} combination/subset pairs exceed budget {budget}")
