"""Exact arithmetic: prime fields F_q, extension-field messages, rationals.

Messages model F_{q^l} as an l-dimensional vector space over F_q; protocols
only ever add messages and scale them by base-field elements, so no
polynomial-basis multiplication is implemented.

Exact probabilities are carried by fractions.Fraction, re-exported as
Rational.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

Rational = Fraction

_PRIME_CACHE: dict[int, bool] = {}

MAX_PRIME = 2**31


def is_prime(n: int) -> bool:
    if n in _PRIME_CACHE:
        return _PRIME_CACHE[n]
    if n < 2:
        ok = False
    else:
        ok = True
        d = 2
        while d * d <= n:
            if n % d == 0:
                ok = False
                break
            d += 1 if d == 2 else 2
    _PRIME_CACHE[n] = ok
    return ok


def check_prime_modulus(q: int) -> int:
    if not (2 <= q <= MAX_PRIME) or not is_prime(q):
        raise ValueError(f"modulus must be a prime <= 2^31, got {q}")
    return q


@dataclass(frozen=True)
class FieldElement:
    """An element of F_q for a prime q, stored as a residue in [0, q)."""

    value: int
    q: int

    def __post_init__(self):
        check_prime_modulus(self.q)
        object.__setattr__(self, "value", self.value % self.q)

    def _match(self, other: "FieldElement") -> None:
        if not isinstance(other, FieldElement):
            raise TypeError(f"expected FieldElement, got {type(other).__name__}")
        if other.q != self.q:
            raise ValueError(f"mismatched moduli: {self.q} vs {other.q}")

    def __add__(self, other: "FieldElement") -> "FieldElement":
        self._match(other)
        return FieldElement((self.value + other.value) % self.q, self.q)

    def __sub__(self, other: "FieldElement") -> "FieldElement":
        self._match(other)
        return FieldElement((self.value - other.value) % self.q, self.q)

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        self._match(other)
        return FieldElement((self.value * other.value) % self.q, self.q)

    def __neg__(self) -> "FieldElement":
        return FieldElement(-self.value % self.q, self.q)

    def inverse(self) -> "FieldElement":
        if self.value == 0:
            raise ZeroDivisionError("zero has no inverse")
        return FieldElement(pow(self.value, self.q - 2, self.q), self.q)

    def __truediv__(self, other: "FieldElement") -> "FieldElement":
        self._match(other)
        return self * other.inverse()

    def __bool__(self) -> bool:
        return self.value != 0

    def __repr__(self) -> str:
        return f"F{self.q}({self.value})"


def fq(q: int):
    """Element constructor for F_q: fq(7)(12) == F7(5)."""
    check_prime_modulus(q)
    return lambda v: FieldElement(v, q)


def inv_mod(a: int, q: int) -> int:
    """Inverse of a nonzero residue, as a plain int (hot-path helper)."""
    a %= q
    if a == 0:
        raise ZeroDivisionError("zero has no inverse")
    return pow(a, q - 2, q)


@dataclass(frozen=True)
class Message:
    """An element of F_{q^l}: a length-l coefficient vector over F_q."""

    coords: tuple[FieldElement, ...]

    def __post_init__(self):
        if not self.coords:
            raise ValueError("message needs at least one coordinate")
        q = self.coords[0].q
        if any(c.q != q for c in self.coords):
            raise ValueError("mixed moduli in message coordinates")

    @property
    def q(self) -> int:
        return self.coords[0].q

    @property
    def ell(self) -> int:
        return len(self.coords)

    @classmethod
    def from_ints(cls, values, q: int) -> "Message":
        return cls(tuple(FieldElement(v, q) for v in values))

    @classmethod
    def zero(cls, ell: int, q: int) -> "Message":
        return cls.from_ints([0] * ell, q)

    def to_ints(self) -> list[int]:
        return [c.value for c in self.coords]

    def _match(self, other: "Message") -> None:
        if len(other.coords) != len(self.coords) or other.q != self.q:
            raise ValueError("message length/field mismatch")

    def __add__(self, other: "Message") -> "Message":
        self._match(other)
        return Message(tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other: "Message") -> "Message":
        self._match(other)
        return Message(tuple(a - b for a, b in zip(self.coords, other.coords)))

    def scale(self, c: FieldElement) -> "Message":
        if c.q != self.q:
            raise ValueError("scalar modulus mismatch")
        return Message(tuple(c * x for x in self.coords))


def msg_axpy(c: FieldElement, x: Message, acc: Message) -> Message:
    """acc + c*x, coordinatewise."""
    if len(x.coords) != len(acc.coords):
        raise ValueError("message length mismatch")
    return acc + x.scale(c)
