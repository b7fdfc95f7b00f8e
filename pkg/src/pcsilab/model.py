"""Problem instances, scenarios, queries/answers, priors, and randomness.

Conventions: message indices are 1-based throughout, matching the usual
notation for datasets X_1..X_K. A query is an ordered list of parts; each
part pairs an ordered index list with an ordered coefficient list, and its
canonical JSON serialization preserves that exact order, so byte equality
of serializations coincides with query equality.
"""
from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .algebra import FieldElement, Message, check_prime_modulus

SI_CODED = "coded"
SI_UNCODED = "uncoded"


class SplitRng:
    """Counter-based splittable RNG.

    Children are derived by hashing (seed, label), so the stream consumed by
    one component never shifts another component's draws, and enumeration /
    sampling stay reproducible regardless of evaluation order.
    """

    def __init__(self, seed):
        if isinstance(seed, SplitRng):
            seed = seed._rng.randrange(2**63)
        self._seed = seed
        digest = hashlib.sha256(repr(seed).encode()).digest()
        self._rng = random.Random(int.from_bytes(digest[:8], "big"))

    def child(self, label: str) -> "SplitRng":
        return SplitRng(f"{self._seed}/{label}")

    # thin passthroughs
    def randrange(self, n: int) -> int:
        return self._rng.randrange(n)

    def choice(self, seq):
        return seq[self._rng.randrange(len(seq))]

    def sample(self, seq, k: int):
        return self._rng.sample(seq, k)

    def shuffle(self, seq) -> None:
        self._rng.shuffle(seq)

    def bernoulli(self, p: Fraction) -> bool:
        """Exact coin flip for a rational probability."""
        if p <= 0:
            return False
        if p >= 1:
            return True
        return self._rng.randrange(p.denominator) < p.numerator

    def nonzero(self, q: int) -> int:
        return 1 + self._rng.randrange(q - 1)


def as_rng(randomness) -> SplitRng:
    return randomness if isinstance(randomness, SplitRng) else SplitRng(randomness)


@dataclass(frozen=True)
class ProblemInstance:
    """(K, M, D, q, ell) with a side-information mode."""

    K: int
    M: int
    D: int
    q: int
    ell: int = 1
    si_mode: str = SI_CODED

    def __post_init__(self):
        check_prime_modulus(self.q)
        if self.D < 1:
            raise ValueError("demand support size D must be >= 1")
        if self.M < 0:
            raise ValueError("side information size M must be >= 0")
        if self.K < self.M + self.D:
            raise ValueError("need K >= M + D")
        if self.ell < 1:
            raise ValueError("extension degree ell must be >= 1")
        if self.si_mode not in (SI_CODED, SI_UNCODED):
            raise ValueError(f"unknown si_mode {self.si_mode!r}")

    @property
    def message_bits(self) -> float:
        """Per-message entropy in bits: ell * log2(q)."""
        return self.ell * math.log2(self.q)

    @property
    def nonzero(self) -> tuple[int, ...]:
        return tuple(range(1, self.q))


@dataclass(frozen=True)
class Scenario:
    """A dataset together with one user's side information and demand.

    S/W are sorted index tuples; U/V map each index to its nonzero
    coefficient. Y and Z are recomputed on construction, so a Scenario can
    never hold an inconsistent coded value.
    """

    instance: ProblemInstance
    dataset: tuple[Message, ...]
    S: tuple[int, ...]
    U: tuple[FieldElement, ...]
    W: tuple[int, ...]
    V: tuple[FieldElement, ...]
    Y: Message = field(init=False)
    Z: Message = field(init=False)

    def __post_init__(self):
        inst = self.instance
        if len(self.dataset) != inst.K:
            raise ValueError("dataset must hold K messages")
        if len(self.S) != inst.M or len(self.U) != inst.M:
            raise ValueError("S/U must have size M")
        if len(self.W) != inst.D or len(self.V) != inst.D:
            raise ValueError("W/V must have size D")
        if tuple(sorted(self.S)) != self.S or tuple(sorted(self.W)) != self.W:
            raise ValueError("S and W must be sorted index tuples")
        if set(self.W) & set(self.S):
            raise ValueError("demand and side information supports must be disjoint")
        for i in (*self.S, *self.W):
            if not 1 <= i <= inst.K:
                raise ValueError(f"index {i} out of range 1..{inst.K}")
        if any(c.value == 0 for c in (*self.U, *self.V)):
            raise ValueError("side information / demand coefficients must be nonzero")
        object.__setattr__(self, "Y", self._combine(self.S, self.U))
        object.__setattr__(self, "Z", self._combine(self.W, self.V))

    def _combine(self, idxs, coeffs) -> Message:
        acc = Message.zero(self.instance.ell, self.instance.q)
        for i, c in zip(idxs, coeffs):
            acc = acc + self.dataset[i - 1].scale(c)
        return acc

    @property
    def u_map(self) -> dict[int, FieldElement]:
        return dict(zip(self.S, self.U))

    @property
    def v_map(self) -> dict[int, FieldElement]:
        return dict(zip(self.W, self.V))

    @property
    def side_information(self):
        """What the user actually holds: Y (coded) or X_S (uncoded)."""
        if self.instance.si_mode == SI_CODED:
            return self.Y
        return tuple(self.dataset[i - 1] for i in self.S)


@dataclass(frozen=True)
class QueryPart:
    indices: tuple[int, ...]
    coeffs: tuple[int, ...]

    def __post_init__(self):
        if len(self.indices) != len(self.coeffs):
            raise ValueError("indices and coeffs must have equal length")
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("indices within a part must be distinct")
        if any(c == 0 for c in self.coeffs):
            raise ValueError("coefficients must be nonzero")


@dataclass(frozen=True)
class Query:
    parts: tuple[QueryPart, ...]
    q: int

    def key(self) -> tuple:
        """Hashable canonical form; injective for fixed q."""
        return tuple((p.indices, p.coeffs) for p in self.parts)

    def to_json_dict(self) -> dict:
        return {
            "q": self.q,
            "parts": [
                {"indices": list(p.indices), "coeffs": list(p.coeffs)}
                for p in self.parts
            ],
        }

    def serialize(self) -> bytes:
        return canonical_bytes(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, d: dict) -> "Query":
        parts = tuple(
            QueryPart(tuple(p["indices"]), tuple(p["coeffs"])) for p in d["parts"]
        )
        return cls(parts, d["q"])


@dataclass(frozen=True)
class Answer:
    symbols: tuple[Message, ...]

    def to_json_dict(self) -> dict:
        return {"symbols": [m.to_ints() for m in self.symbols]}

    def serialize(self) -> bytes:
        return canonical_bytes(self.to_json_dict())


def canonical_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def scenario_to_json_dict(sc: Scenario) -> dict:
    inst = sc.instance
    return {
        "instance": {"K": inst.K, "M": inst.M, "D": inst.D, "q": inst.q,
                     "ell": inst.ell, "si_mode": inst.si_mode},
        "dataset": [m.to_ints() for m in sc.dataset],
        "S": list(sc.S),
        "U": [c.value for c in sc.U],
        "W": list(sc.W),
        "V": [c.value for c in sc.V],
        "Y": sc.Y.to_ints(),
        "Z": sc.Z.to_ints(),
    }


def scenario_from_json_dict(d: dict) -> Scenario:
    inst = ProblemInstance(**d["instance"])
    q = inst.q
    return Scenario(
        instance=inst,
        dataset=tuple(Message.from_ints(v, q) for v in d["dataset"]),
        S=tuple(d["S"]),
        U=tuple(FieldElement(v, q) for v in d["U"]),
        W=tuple(d["W"]),
        V=tuple(FieldElement(v, q) for v in d["V"]),
    )


@dataclass(frozen=True)
class Choice:
    label: str
    branch: object
    probability: Fraction


@dataclass
class ChoiceTrace:
    """Explicit record of every random decision a protocol run makes."""

    choices: list[Choice] = field(default_factory=list)

    def record(self, label: str, branch, probability) -> None:
        p = Fraction(probability)
        if not 0 < p <= 1:
            raise ValueError(f"choice probability must be in (0,1], got {p}")
        self.choices.append(Choice(label, branch, p))

    @property
    def weight(self) -> Fraction:
        w = Fraction(1)
        for c in self.choices:
            w *= c.probability
        return w


# ------------------------------------------------------------------ sampling

def sample_scenario(instance: ProblemInstance, seed) -> Scenario:
    """Uniform scenario: S, W|S, U, V and all messages drawn uniformly."""
    rng = as_rng(seed)
    q, K, M, D = instance.q, instance.K, instance.M, instance.D
    S = tuple(sorted(rng.sample(range(1, K + 1), M)))
    rest = sorted(set(range(1, K + 1)) - set(S))
    W = tuple(sorted(rng.sample(rest, D)))
    U = tuple(FieldElement(rng.nonzero(q), q) for _ in range(M))
    V = tuple(FieldElement(rng.nonzero(q), q) for _ in range(D))
    dataset = tuple(
        Message.from_ints([rng.randrange(q) for _ in range(instance.ell)], q)
        for _ in range(K)
    )
    return Scenario(instance, dataset, S, U, W, V)


# -------------------------------------------------------------------- priors

def prior_probability(instance: ProblemInstance, W, V, S, U) -> Fraction:
    """Joint prior of a (W, V, S, U) realization; zero if W meets S."""
    K, M, D, q = instance.K, instance.M, instance.D, instance.q
    if len(W) != D or len(S) != M or len(V) != D or len(U) != M:
        raise ValueError("tuple shapes do not match the instance")
    if set(W) & set(S):
        return Fraction(0)
    return (
        Fraction(1, math.comb(K, M))
        * Fraction(1, (q - 1) ** M)
        * Fraction(1, math.comb(K - M, D))
        * Fraction(1, (q - 1) ** D)
    )


def demand_index_prior(instance: ProblemInstance, i: int) -> Fraction:
    """Pr(i in W) = D/K under the uniform prior."""
    if not 1 <= i <= instance.K:
        raise ValueError(f"index {i} out of range")
    return Fraction(instance.D, instance.K)


def demand_subset_prior(instance: ProblemInstance, W_star) -> Fraction:
    """Pr(W = W*) = 1/C(K, D) under the uniform prior."""
    if len(set(W_star)) != instance.D:
        raise ValueError("W* must be a D-subset")
    return Fraction(1, math.comb(instance.K, instance.D))


def marginal_demand_prior(instance: ProblemInstance, target) -> Fraction:
    """Dispatch: an int means Pr(i in W); a subset means Pr(W = W*)."""
    if isinstance(target, int):
        return demand_index_prior(instance, target)
    return demand_subset_prior(instance, target)


# ----------------------------------------------------------- answer evaluation

def answer_query(query: Query, dataset: tuple[Message, ...]) -> Answer:
    """Evaluate each part's linear form over the dataset."""
    q = query.q
    ell = dataset[0].ell
    out = []
    for part in query.parts:
        acc = Message.zero(ell, q)
        for i, c in zip(part.indices, part.coeffs):
            if not 1 <= i <= len(dataset):
                raise ValueError(f"query index {i} out of dataset range")
            acc = acc + dataset[i - 1].scale(FieldElement(c, q))
        out.append(acc)
    return Answer(tuple(out))


def form_str(indices, coeffs, prefix: str = "X_") -> str:
    """Render a linear form the way the worked examples print them."""
    terms = []
    for i, c in zip(indices, coeffs):
        if c == 0:
            continue
        terms.append(f"{prefix}{i}" if c == 1 else f"{c}{prefix}{i}")
    return " + ".join(terms) if terms else "0"
