"""Exact Bayesian privacy verification, Monte-Carlo estimation, and the
linear-algebra decodability checkers.

The exact verifiers enumerate every protocol random choice for every
(W, V, S, U) tuple with rational arithmetic; a posterior passes only on
exact equality with the uniform target. Per-query conditioning is also
available via hypothesis inversion, which the tests cross-check against the
forward enumeration.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import gmpc as gmpc_mod
from . import pcia as pcia_mod
from .gmpc import BudgetExceededError
from .model import ProblemInstance, Query, QueryPart, canonical_bytes

DEFAULT_BUDGET = 10**9
MAX_DETAILED_VIOLATIONS = 50


@dataclass(frozen=True)
class Violation:
    query: Query
    subject: object          # index (individual) or D-subset (joint)
    posterior: Fraction
    target: Fraction


@dataclass(frozen=True)
class PosteriorReport:
    privacy: str             # "individual" | "joint"
    target: Fraction
    query_count: int
    total_mass: Fraction     # must be exactly 1
    checked_cells: int
    violation_count: int
    violations: tuple[Violation, ...]   # first MAX_DETAILED_VIOLATIONS
    details: dict | None = None         # query key -> {subject: posterior}

    @property
    def passed(self) -> bool:
        return self.violation_count == 0 and self.total_mass == 1

    @property
    def worst_deviation(self) -> Fraction:
        dev = Fraction(0)
        for v in self.violations:
            dev = max(dev, abs(v.posterior - v.target))
        return dev

    def to_json_dict(self) -> dict:
        return {
            "privacy": self.privacy,
            "queries": self.query_count,
            "mass": str(self.total_mass),
            "target": str(self.target),
            "checked_cells": self.checked_cells,
            "violations": [
                {
                    "query": v.query.to_json_dict(),
                    "subject": list(v.subject) if isinstance(v.subject, tuple) else v.subject,
                    "posterior": str(v.posterior),
                }
                for v in self.violations
            ],
            "violation_count": self.violation_count,
            "passed": self.passed,
        }


def _ws_pairs(instance: ProblemInstance):
    kall = range(1, instance.K + 1)
    for S in itertools.combinations(kall, instance.M):
        rest = sorted(set(kall) - set(S))
        for W in itertools.combinations(rest, instance.D):
            yield W, S


def _tuple_count(instance: ProblemInstance) -> int:
    K, M, D, q = instance.K, instance.M, instance.D, instance.q
    return math.comb(K, M) * math.comb(K - M, D) * (q - 1) ** (M + D)


# ------------------------------------------------- individual (GMPC) exact

def posterior_individual(instance: ProblemInstance, protocol: str = "gmpc", *,
                         budget: int = DEFAULT_BUDGET, partitions: int = 1,
                         collect_queries: bool = False,
                         trace_iter=None) -> PosteriorReport:
    """Exact Pr(i in W | Q) for every reachable query, by full enumeration.

    trace_iter overrides the protocol under test (negative controls): a
    callable (instance, W, V, S, U) -> iterable of (Query, Fraction).
    """
    if trace_iter is not None:
        return _posterior_general(instance, trace_iter, "individual", budget,
                                  collect_queries)
    if protocol != "gmpc":
        raise ValueError(f"unknown individual-privacy protocol {protocol!r}")
    params = gmpc_mod.gmpc_params(instance)
    K, M, D, q = instance.K, instance.M, instance.D, instance.q
    n_ws = math.comb(K, M) * math.comb(K - M, D)
    per_ws = gmpc_mod.count_placements(params) * (q - 1) ** (M + D)
    if n_ws * per_ws > budget:
        raise BudgetExceededError(
            f"{n_ws * per_ws} (trace x tuple) pairs exceed budget {budget}; "
            "use monte_carlo_privacy")

    den = 1
    for w in gmpc_mod.trace_weights(params):
        den = den * w.denominator // math.gcd(den, w.denominator)
    coeff_space = list(itertools.product(range(1, q), repeat=M + D))
    pairs = list(_ws_pairs(instance))
    chunks = [pairs[i::partitions] for i in range(partitions)]
    accs = []
    for chunk in chunks:
        acc: dict[tuple, list[int]] = {}
        for W, S in chunk:
            rank = {i: r for r, i in enumerate(sorted(W))}
            for r, i in enumerate(sorted(S)):
                rank[i] = D + r
            placed = []
            for wgt, pi, lstar in gmpc_mod.iter_placements(params, W, S):
                w_int = int(wgt * den)
                src = tuple(rank[pi[j - 1]] for j in params.part_positions(lstar))
                placed.append((w_int, pi, src))
            Wl = list(W)
            for w_int, pi, src in placed:
                for vu in coeff_space:
                    key = pi + tuple(vu[r] for r in src)
                    row = acc.get(key)
                    if row is None:
                        row = acc[key] = [0] * (K + 1)
                    row[0] += w_int
                    for i in Wl:
                        row[i] += w_int
        accs.append(acc)
    acc = accs[0]
    for other in accs[1:]:
        for key, row in other.items():
            main = acc.get(key)
            if main is None:
                acc[key] = row
            else:
                for i in range(K + 1):
                    main[i] += row[i]

    target = Fraction(D, K)
    violations = []
    vio_count = 0
    total_scaled = 0
    details = {} if collect_queries else None
    for key, row in acc.items():
        total_scaled += row[0]
        if details is not None:
            details[_gmpc_query_from_key(params, key).key()] = {
                i: Fraction(row[i], row[0]) for i in range(1, K + 1)}
        for i in range(1, K + 1):
            if row[i] * K != row[0] * D:
                vio_count += 1
                if len(violations) < MAX_DETAILED_VIOLATIONS:
                    violations.append(Violation(
                        _gmpc_query_from_key(params, key), i,
                        Fraction(row[i], row[0]), target))
    mass = Fraction(total_scaled, n_ws * (q - 1) ** (M + D) * den)
    return PosteriorReport("individual", target, len(acc), mass,
                           len(acc) * K, vio_count, tuple(violations), details)


def _gmpc_query_from_key(params, key) -> Query:
    K = params.instance.K
    pi, qpp = key[:K], key[K:]
    parts = tuple(
        QueryPart(tuple(pi[j - 1] for j in params.part_positions(l)), qpp)
        for l in range(1, params.n + 1)
    )
    return Query(parts, params.instance.q)


# ----------------------------------------------------- generic exact path

def _posterior_general(instance, trace_iter, privacy, budget, collect_queries):
    """Protocol-agnostic exhaustive verifier (rational accumulation)."""
    K, M, D, q = instance.K, instance.M, instance.D, instance.q
    target = (Fraction(D, K) if privacy == "individual"
              else Fraction(1, math.comb(K, D)))
    acc: dict[tuple, dict] = {}
    queries: dict[tuple, Query] = {}
    seen_pairs = 0
    for W, S in _ws_pairs(instance):
        for V in itertools.product(range(1, q), repeat=D):
            for U in itertools.product(range(1, q), repeat=M):
                total_w = Fraction(0)
                for query, w in trace_iter(instance, W, V, S, U):
                    seen_pairs += 1
                    if seen_pairs > budget:
                        raise BudgetExceededError(
                            f"enumeration exceeded budget {budget}")
                    key = query.key()
                    queries.setdefault(key, query)
                    row = acc.setdefault(key, {"total": Fraction(0)})
                    row["total"] += w
                    total_w += w
                    if privacy == "individual":
                        for i in W:
                            row[i] = row.get(i, Fraction(0)) + w
                    else:
                        row[W] = row.get(W, Fraction(0)) + w
                if total_w != 1:
                    raise ValueError(
                        f"trace weights for (W={W}, V={V}, S={S}, U={U}) "
                        f"sum to {total_w}, not 1")
    subjects = (list(range(1, K + 1)) if privacy == "individual"
                else list(itertools.combinations(range(1, K + 1), D)))
    violations, vio_count = [], 0
    mass = Fraction(0)
    details = {} if collect_queries else None
    n_tuples = _tuple_count(instance)
    for key, row in acc.items():
        mass += row["total"]
        if details is not None:
            details[key] = {s: row.get(s, Fraction(0)) / row["total"] for s in subjects}
        for s in subjects:
            post = row.get(s, Fraction(0)) / row["total"]
            if post != target:
                vio_count += 1
                if len(violations) < MAX_DETAILED_VIOLATIONS:
                    violations.append(Violation(queries[key], s, post, target))
    return PosteriorReport(privacy, target, len(acc), mass / n_tuples,
                           len(acc) * len(subjects), vio_count,
                           tuple(violations), details)


def gmpc_trace_iter(instance, W, V, S, U):
    """Adapter: the GMPC enumerator in the generic verifier's interface."""
    return gmpc_mod.enumerate_gmpc_traces(instance, W, V, S, U)


def pcia_trace_iter(instance, W, V, S, U, placement=pcia_mod.PLACEMENT_GENERAL):
    """PC-IA full randomness (placements x free coefficient draws)."""
    from .algebra import FieldElement
    from .model import Message, Scenario

    params = pcia_mod.pcia_params(instance)
    q = instance.q
    dataset = tuple(Message.zero(instance.ell, q) for _ in range(instance.K))
    # coefficients only depend on (W, V, S, U) via the maps, not the data
    scenario = Scenario(instance, dataset, tuple(sorted(S)),
                        tuple(FieldElement(u, q) for u in U),
                        tuple(sorted(W)),
                        tuple(FieldElement(v, q) for v in V))
    nf = params.s * (params.m - 2)
    free_w = Fraction(1, (q - 1) ** nf)
    from .model import SI_CODED

    for wgt, blocks in pcia_mod.iter_placements(params, W, S, placement):
        first = instance.si_mode == SI_CODED
        for free in itertools.product(range(1, q), repeat=nf):
            alphas, _ = pcia_mod.pcia_coefficients(blocks, scenario, params,
                                                   free_alphas=free)
            query = pcia_mod._query_from_blocks(params, blocks, alphas)
            if first:
                # rejection acceptance is coefficient-independent for
                # two-block parts, so one draw per placement stands for all
                first = False
                if not pcia_mod.support_requirement_check(query, instance, mode="CSI").passed:
                    raise ValueError("coded-SI support requirement failed; "
                                     "rejection weights would be non-uniform")
            yield query, wgt * free_w


# --------------------------------------------------- joint (PC-IA) exact

def posterior_joint(instance: ProblemInstance, protocol: str = "pcia", *,
                    placement: str = pcia_mod.PLACEMENT_GENERAL,
                    budget: int = DEFAULT_BUDGET,
                    collect_queries: bool = False,
                    trace_iter=None) -> PosteriorReport:
    """Exact Pr(W = W* | Q) for every reachable query.

    The default path enumerates arrangements with numpy acceleration: for a
    fixed arrangement every consistent tuple hypothesis is expanded over the
    full coefficient space by executing its value-to-coefficient map, so the
    result is still a complete enumeration of (tuple, trace) pairs.
    """
    if trace_iter is not None:
        return _posterior_general(instance, trace_iter, "joint", budget,
                                  collect_queries)
    if protocol != "pcia":
        raise ValueError(f"unknown joint-privacy protocol {protocol!r}")
    import numpy as np

    params = pcia_mod.pcia_params(instance)
    K, M, D, q = instance.K, instance.M, instance.D, instance.q
    s, m, nz = params.s, params.m, q - 1
    space = nz**K
    n_arr = math.factorial(K)
    # one hypothesis expansion touches `space` coefficient columns
    sample_hyps = pcia_mod.iter_query_hypotheses(
        params, tuple(tuple(range(j * s + 1, (j + 1) * s + 1)) for j in range(m)),
        placement)
    if n_arr * len(sample_hyps) * space > budget:
        raise BudgetExceededError(
            f"{n_arr * len(sample_hyps) * space} (trace x tuple) pairs exceed "
            f"budget {budget}; use monte_carlo_privacy")

    fill_w = Fraction(1, math.factorial(K - M - D))
    coeff_w = Fraction(1, (q - 1) ** (M + D)) * Fraction(1, (q - 1) ** (s * (m - 2)))
    prior_w = Fraction(1, math.comb(K, M) * math.comb(K - M, D))
    den = 1
    for h in sample_hyps:
        w = h.weight * fill_w * coeff_w * prior_w
        den = den * w.denominator // math.gcd(den, w.denominator)

    digits = np.empty((K, space), dtype=np.int64)
    idx = np.arange(space, dtype=np.int64)
    for v in range(K):
        digits[v] = (idx // (nz**v)) % nz
    contrib = {}
    for scale in range(1, q):
        for slot in range(K):
            tab = np.array([((scale * (d + 1)) % q - 1) * (nz**slot)
                            for d in range(nz)], dtype=np.int64)
            contrib[(scale, slot)] = tab

    pairs = list(itertools.combinations(range(1, K + 1), D))
    pair_id = {p: i for i, p in enumerate(pairs)}
    target = Fraction(1, math.comb(K, D))
    violations, vio_count = [], 0
    total_scaled = 0
    query_count = 0
    details = {} if collect_queries else None
    from .model import SI_CODED

    csi = instance.si_mode == SI_CODED
    for perm in itertools.permutations(range(1, K + 1)):
        blocks = tuple(tuple(perm[j * s + k] for k in range(s)) for j in range(m))
        if csi:
            # execute the rejection acceptance test once per arrangement;
            # the support pattern does not depend on the coefficient values
            rep = pcia_mod.support_requirement_check(
                _pcia_query_from_arrangement(params, blocks, 0), instance, mode="CSI")
            if not rep.passed:
                raise ValueError("coded-SI support requirement failed; "
                                 "rejection weights would be non-uniform")
        rows = np.zeros((len(pairs), space), dtype=np.int64)
        for h in pcia_mod.iter_query_hypotheses(params, blocks, placement):
            w_int = int(h.weight * fill_w * coeff_w * prior_w * den)
            colidx = np.zeros(space, dtype=np.int64)
            for (j, k), (vid, scale) in h.slot_var_scale.items():
                colidx += contrib[(scale, j * s + k)][digits[vid]]
            rows[pair_id[h.W]] += w_int * np.bincount(colidx, minlength=space)
        tot = rows.sum(axis=0)
        total_scaled += int(tot.sum())
        query_count += space
        if (tot == 0).any():
            raise ValueError("unreachable coefficient column in arrangement")
        bad = rows * len(pairs) != tot[None, :]
        if bad.any():
            vio_count += int(bad.sum())
            for pid, col in zip(*np.nonzero(bad)):
                if len(violations) >= MAX_DETAILED_VIOLATIONS:
                    break
                violations.append(Violation(
                    _pcia_query_from_arrangement(params, blocks, int(col)),
                    pairs[pid], Fraction(int(rows[pid, col]), int(tot[col])),
                    target))
        if details is not None:
            for col in range(space):
                key = _pcia_query_from_arrangement(params, blocks, col).key()
                details[key] = {p: Fraction(int(rows[pair_id[p], col]), int(tot[col]))
                                for p in pairs}
    mass = Fraction(total_scaled, den)
    return PosteriorReport("joint", target, query_count, mass,
                           query_count * len(pairs), vio_count,
                           tuple(violations), details)


def _pcia_query_from_arrangement(params, blocks, col: int) -> Query:
    q = params.instance.q
    nz = q - 1
    s, m = params.s, params.m
    alphas = []
    for j in range(m):
        row = []
        for k in range(s):
            row.append(col // nz ** (j * s + k) % nz + 1)
        alphas.append(tuple(row))
    return pcia_mod._query_from_blocks(params, blocks, alphas)


# ----------------------------------------------- conditioned on one query

@dataclass(frozen=True)
class QueryPosterior:
    privacy: str
    target: Fraction
    posteriors: dict          # subject -> Fraction
    total_mass: Fraction      # unnormalized hypothesis mass

    @property
    def passed(self) -> bool:
        return all(p == self.target for p in self.posteriors.values())


def posterior_for_query(instance: ProblemInstance, query: Query,
                        privacy: str = "individual",
                        placement: str = pcia_mod.PLACEMENT_GENERAL) -> QueryPosterior:
    """Exact Bayesian posterior conditioned on one observed query.

    Enumerates every (W, V, S, U, internal randomness) consistent with the
    query instead of the full unconditional space, so it stays exact at
    sizes where the forward enumeration would blow the budget (e.g. the
    worked K=11 example).
    """
    if privacy == "individual":
        return _gmpc_query_posterior(instance, query)
    return _pcia_query_posterior(instance, query, placement)


def _gmpc_query_posterior(instance, query) -> QueryPosterior:
    params = gmpc_mod.gmpc_params(instance)
    K, M, D = instance.K, instance.M, instance.D
    target = Fraction(D, K)
    masses = {i: Fraction(0) for i in range(1, K + 1)}
    total = Fraction(0)
    rest_w = Fraction(1, math.factorial(K - M - D))
    if params.n == 1:
        part = query.parts[0]
        w = Fraction(1, math.factorial(K))
        for Wst in itertools.combinations(sorted(part.indices), D):
            total += w
            for i in Wst:
                masses[i] += w
    else:
        overlap = set(query.parts[0].indices[:params.m])
        branches = gmpc_mod._branch_counts(params)
        for lstar in range(1, params.n + 1):
            part = query.parts[lstar - 1]
            part_set = set(part.indices)
            edge = lstar in (1, params.n)
            for Wst in itertools.combinations(sorted(part_set), D):
                Sst = part_set - set(Wst)
                if edge:
                    kw = len(set(Wst) & overlap)
                    ks = len(Sst & overlap)
                    w = Fraction(0)
                    for bprob, bkw, bks in branches.values():
                        if (kw, ks) == (bkw, bks):
                            w += (params.alpha / 2) * bprob \
                                * Fraction(1, math.comb(D, kw)) \
                                * Fraction(1, math.comb(M, ks)) \
                                * Fraction(1, math.factorial(params.m)) \
                                * Fraction(1, math.factorial(params.r)) * rest_w
                else:
                    w = (1 - params.alpha) * Fraction(1, params.n - 2) \
                        * Fraction(1, math.factorial(M + D)) * rest_w
                if w == 0:
                    continue
                total += w
                for i in Wst:
                    masses[i] += w
    posts = {i: masses[i] / total for i in masses}
    return QueryPosterior("individual", target, posts, total)


def _pcia_query_posterior(instance, query, placement) -> QueryPosterior:
    params = pcia_mod.pcia_params(instance)
    q, s, m = instance.q, params.s, params.m
    shared = query.parts[0].indices[:s]
    blocks = [shared]
    for part in query.parts:
        if part.indices[:s] != shared:
            raise ValueError("parts do not share a common first block")
        blocks.append(part.indices[s:])
    blocks = tuple(blocks)
    # undo the omega scaling and assert cross-part consistency of B_1 coeffs
    from .algebra import inv_mod

    base = None
    for i, part in enumerate(query.parts, start=1):
        w_inv = inv_mod(params.omega(i), q)
        this = tuple(c * w_inv % q for c in part.coeffs[:s])
        if base is None:
            base = this
        elif base != this:
            raise ValueError("shared-block coefficients are not omega-aligned")
    target = Fraction(1, math.comb(instance.K, instance.D))
    masses: dict[tuple, Fraction] = {}
    total = Fraction(0)
    for h in pcia_mod.iter_query_hypotheses(params, blocks, placement):
        masses[h.W] = masses.get(h.W, Fraction(0)) + h.weight
        total += h.weight
    posts = {W: masses.get(W, Fraction(0)) / total
             for W in itertools.combinations(range(1, instance.K + 1), instance.D)}
    return QueryPosterior("joint", target, posts, total)


# ------------------------------------------------------------ Monte-Carlo

@dataclass(frozen=True)
class MonteCarloCell:
    query_class: int
    subject: object
    count: int
    hits: int
    estimate: float
    ci_low: float
    ci_high: float
    contains_target: bool


@dataclass(frozen=True)
class MonteCarloReport:
    privacy: str
    target: Fraction
    trials: int
    query_classes: int
    cells: tuple[MonteCarloCell, ...]
    flagged: tuple[MonteCarloCell, ...]

    @property
    def coverage(self) -> float:
        return 1.0 if not self.cells else 1 - len(self.flagged) / len(self.cells)

    @property
    def passed(self) -> bool:
        return not self.flagged


def clopper_pearson(hits: int, n: int, confidence: float) -> tuple[float, float]:
    """Exact binomial confidence interval (correct even at tiny counts)."""
    from scipy.stats import beta

    if n == 0:
        return 0.0, 1.0
    a = (1 - confidence) / 2
    lo = 0.0 if hits == 0 else float(beta.ppf(a, hits, n - hits + 1))
    hi = 1.0 if hits == n else float(beta.ppf(1 - a, hits + 1, n - hits))
    return lo, hi


def monte_carlo_privacy(instance: ProblemInstance, protocol: str = "gmpc",
                        trials: int = 10**5, seed=0, confidence: float = 0.99,
                        sampler=None) -> MonteCarloReport:
    """Empirical conditional frequencies by query class, with exact CIs.

    Flags any (query class, subject) cell whose confidence interval excludes
    the uniform target.
    """
    from .model import SplitRng, sample_scenario

    if trials < 1000:
        raise ValueError("need at least 1000 trials for meaningful intervals")
    privacy = "joint" if protocol == "pcia" else "individual"
    if sampler is None:
        if protocol == "gmpc":
            def sampler(inst, rng):
                sc = sample_scenario(inst, rng.child("scenario"))
                query, _ = gmpc_mod.gmpc_query(inst, sc, rng.child("protocol"))
                return query, sc.W
        elif protocol == "pcia":
            params = pcia_mod.pcia_params(instance)

            def sampler(inst, rng, _params=params):
                sc = sample_scenario(inst, rng.child("scenario"))
                query, _ = pcia_mod.pcia_query(inst, sc, rng.child("protocol"),
                                               params=_params)
                return query, sc.W
        else:
            raise ValueError(f"unknown protocol {protocol!r}")
    root = SplitRng(seed)
    counts: dict[tuple, list] = {}
    for t in range(trials):
        query, W = sampler(instance, root.child(f"trial{t}"))
        key = query.key()
        slot = counts.get(key)
        if slot is None:
            slot = counts[key] = [0, {}]
        slot[0] += 1
        if privacy == "individual":
            for i in W:
                slot[1][i] = slot[1].get(i, 0) + 1
        else:
            slot[1][W] = slot[1].get(W, 0) + 1
    K, D = instance.K, instance.D
    target = (Fraction(D, K) if privacy == "individual"
              else Fraction(1, math.comb(K, D)))
    subjects = (list(range(1, K + 1)) if privacy == "individual"
                else list(itertools.combinations(range(1, K + 1), D)))
    t_float = float(target)
    cells, flagged = [], []
    for class_id, (key, (n_k, hits)) in enumerate(counts.items()):
        for s in subjects:
            h = hits.get(s, 0)
            lo, hi = clopper_pearson(h, n_k, confidence)
            ok = lo <= t_float <= hi
            cell = MonteCarloCell(class_id, s, n_k, h, h / n_k, lo, hi, ok)
            cells.append(cell)
            if not ok:
                flagged.append(cell)
    return MonteCarloReport(privacy, target, trials, len(counts),
                            tuple(cells), tuple(flagged))


# ------------------------------------------------------- linear decodability

@dataclass(frozen=True)
class LinearSystem:
    """Answer linear forms plus known-side rows, all over F_q on 1..K."""

    rows: tuple[tuple[int, ...], ...]
    side_rows: tuple[tuple[int, ...], ...]
    q: int

    @classmethod
    def from_query(cls, query: Query, instance: ProblemInstance,
                   side_indices=()) -> "LinearSystem":
        rows = tuple(tuple(f) for f in pcia_mod.answer_support_forms(query, instance.K))
        side = tuple(unit_vector(instance.K, j) for j in side_indices)
        return cls(rows, side, query.q)


def unit_vector(K: int, j: int) -> tuple[int, ...]:
    v = [0] * (K + 1)
    v[j] = 1
    return tuple(v)


def _eliminate(rows, q):
    """Row-reduce over F_q; returns list of (pivot_col, reduced_row)."""
    from .algebra import inv_mod

    basis = []
    for row in rows:
        r = list(row)
        for piv, b in basis:
            if r[piv]:
                f = r[piv]
                for i in range(len(r)):
                    r[i] = (r[i] - f * b[i]) % q
        piv = next((i for i in range(1, len(r)) if r[i]), None)
        if piv is None:
            continue
        f = inv_mod(r[piv], q)
        r = [x * f % q for x in r]
        basis.append((piv, r))
    return basis


def rank(rows, q: int) -> int:
    return len(_eliminate(rows, q))


def decodable(system: LinearSystem, target) -> bool:
    """True iff the target form lies in the span of answer plus side rows."""
    q = system.q
    basis = _eliminate(list(system.rows) + list(system.side_rows), q)
    r = list(target)
    for piv, b in basis:
        if r[piv]:
            f = r[piv]
            for i in range(len(r)):
                r[i] = (r[i] - f * b[i]) % q
    return not any(r[1:])


# ------------------------------------------------ lemma 1 / lemma 2 checks

@dataclass(frozen=True)
class WitnessEntry:
    subject: object
    found: bool
    W_star: tuple[int, ...] | None = None
    V_star: tuple[int, ...] | None = None
    S_star: tuple[int, ...] | None = None


@dataclass(frozen=True)
class WitnessReport:
    lemma: str
    entries: tuple[WitnessEntry, ...]

    @property
    def passed(self) -> bool:
        return all(e.found for e in self.entries)


def _combo_pool(query: Query, instance: ProblemInstance, budget: int):
    """Nonzero combinations of the answer forms, smallest supports first."""
    K, q = instance.K, query.q
    forms = pcia_mod.answer_support_forms(query, K)
    n = len(forms)
    n_combos = (q**n - 1) // (q - 1)
    if n_combos > budget:
        raise BudgetExceededError(f"{n_combos} combinations exceed budget {budget}")
    pool = []
    for lam in pcia_mod._normalized_lambdas(n, q):
        vec = [0] * (K + 1)
        for li, f in zip(lam, forms):
            if li:
                for i in range(1, K + 1):
                    vec[i] = (vec[i] + li * f[i]) % q
        support = tuple(i for i in range(1, K + 1) if vec[i])
        pool.append((support, vec))
    pool.sort(key=lambda t: len(t[0]))
    return forms, pool


def _witness_from_combo(instance, forms, support, vec, W_star, q):
    """Build (V*, S*) from a covering combination and verify by rank oracle."""
    K, M = instance.K, instance.M
    resid = [i for i in support if i not in W_star]
    if len(resid) > M:
        return None
    pad = [i for i in range(1, K + 1)
           if i not in W_star and i not in resid][: M - len(resid)]
    S_star = tuple(sorted(resid + pad))
    if len(S_star) != M:
        return None
    V_star = tuple(vec[i] for i in W_star)
    target = [0] * (K + 1)
    for i, v in zip(W_star, V_star):
        target[i] = v
    system = LinearSystem(tuple(tuple(f) for f in forms),
                          tuple(unit_vector(K, j) for j in S_star), q)
    if not decodable(system, target):
        return None
    return V_star, S_star


def lemma1_condition(query: Query, instance: ProblemInstance,
                     budget: int = 10**7) -> WitnessReport:
    """Necessary condition for individual privacy: every index i admits
    (W*, V*, S*), i in W*, with the demand decodable from answers and X_S*."""
    K, D = instance.K, instance.D
    forms, pool = _combo_pool(query, instance, budget)
    entries = []
    for i in range(1, K + 1):
        found = None
        for support, vec in pool:
            if i not in support or len(support) > instance.M + D:
                continue
            if len(support) < D:
                continue
            for W_star in itertools.combinations(support, D):
                if i not in W_star:
                    continue
                got = _witness_from_combo(instance, forms, support, vec, W_star, query.q)
                if got:
                    found = (W_star, *got)
                    break
            if found:
                break
        entries.append(WitnessEntry(i, found is not None,
                                    *(found if found else (None, None, None))))
    return WitnessReport("lemma1", tuple(entries))


def lemma2_condition(query: Query, instance: ProblemInstance,
                     budget: int = 10**7) -> WitnessReport:
    """Necessary condition for joint privacy: every D-subset W* admits
    (V*, S*) with the demand decodable from answers and X_S*."""
    K, D = instance.K, instance.D
    forms, pool = _combo_pool(query, instance, budget)
    entries = []
    for W_star in itertools.combinations(range(1, K + 1), D):
        found = None
        wset = set(W_star)
        for support, vec in pool:
            if len(support) > instance.M + D or not wset <= set(support):
                continue
            got = _witness_from_combo(instance, forms, support, vec, W_star, query.q)
            if got:
                found = (W_star, *got)
                break
        entries.append(WitnessEntry(W_star, found is not None,
                                    *(found if found else (None, None, None))))
    return WitnessReport("lemma2", tuple(entries))


# ------------------------------------------------------------------- rate

def measured_rate(query: Query, instance: ProblemInstance) -> Fraction:
    """1/n for an n-symbol answer; valid because the answer forms are
    linearly independent (asserted), so the answer entropy is exactly n*L."""
    forms = pcia_mod.answer_support_forms(query, instance.K)
    n = len(forms)
    if rank(forms, query.q) != n:
        raise ValueError("answer symbols dependent; entropy accounting invalid")
    return Fraction(1, n)
