import pytest
from fractions import Fraction

from hypothesis import given, strategies as st

from pcsilab.algebra import FieldElement, Message, Rational, fq, inv_mod, msg_axpy

F7 = fq(7)
F3 = fq(3)


def test_mul_mod_7():
    assert (F7(3) * F7(5)).value == 1  # 15 mod 7


def test_inverse_matches_exhaustive_scan():
    # oracle: scan F_7 for the x with 5x = 1
    expected = next(x for x in range(1, 7) if (5 * x) % 7 == 1)
    assert expected == 3
    assert F7(5).inverse().value == expected


def test_neg_one_times_inv_four_is_five():
    # -omega_{1,1}/omega_{2,1} with omega values 1 and 4, in F_7
    assert ((-F7(1)) * F7(4).inverse()).value == 5


@pytest.mark.parametrize("q", [2, 3, 5, 7, 11, 13])
def test_every_nonzero_element_has_inverse(q):
    for a in range(1, q):
        e = FieldElement(a, q)
        assert (e * e.inverse()).value == 1


def test_zero_inverse_rejected():
    with pytest.raises(ZeroDivisionError, match="zero has no inverse"):
        F7(0).inverse()
    with pytest.raises(ZeroDivisionError):
        inv_mod(0, 7)


def test_mismatched_moduli_rejected():
    with pytest.raises(ValueError, match="mismatched moduli"):
        F7(1) + F3(1)


def test_non_prime_or_oversized_modulus_rejected():
    with pytest.raises(ValueError):
        FieldElement(1, 6)
    with pytest.raises(ValueError):
        FieldElement(1, 2**31 + 11)


def test_field_ops_basics():
    assert (F7(2) - F7(5)).value == 4
    assert (-F7(1)).value == 6
    assert (F7(3) / F7(5)).value == (3 * 3) % 7  # inv(5) = 3


# ---------------------------------------------------------------- messages

def test_axpy_identity():
    m = Message.from_ints([2, 5], 7)
    zero = Message.zero(2, 7)
    assert msg_axpy(F7(1), m, zero) == m


def test_axpy_length_one_reduces_to_scalar_ops():
    c, x, acc = 4, 6, 3
    got = msg_axpy(F7(c), Message.from_ints([x], 7), Message.from_ints([acc], 7))
    assert got.to_ints() == [(acc + c * x) % 7]


def test_axpy_mod3_oracle():
    # coordinatewise oracle over F_3: 2*(1,2) + (0,0) = (2,4) = (2,1)
    got = msg_axpy(F3(2), Message.from_ints([1, 2], 3), Message.zero(2, 3))
    assert got.to_ints() == [(2 * 1) % 3, (2 * 2) % 3] == [2, 1]


def test_axpy_length_mismatch():
    with pytest.raises(ValueError):
        msg_axpy(F3(1), Message.zero(2, 3), Message.zero(3, 3))


msgs = st.lists(st.integers(0, 6), min_size=3, max_size=3).map(
    lambda v: Message.from_ints(v, 7))


@given(msgs, msgs)
def test_message_addition_commutes(a, b):
    assert a + b == b + a


@given(msgs, msgs, msgs)
def test_message_addition_associates(a, b, c):
    assert (a + b) + c == a + (b + c)


@given(st.integers(0, 6), msgs, msgs)
def test_scalar_distributes_over_message_addition(c, x, y):
    ce = FieldElement(c, 7)
    assert (x + y).scale(ce) == x.scale(ce) + y.scale(ce)


# --------------------------------------------------------------- rationals

def test_rational_add():
    assert Rational(1, 2) + Rational(1, 3) == Rational(5, 6)


def test_rational_normalizes():
    r = Rational(2, 4)
    assert (r.numerator, r.denominator) == (1, 2)


def test_alpha_beta_product_matches_worked_posterior():
    # alpha*beta for the K=11 worked example equals the 2/11 posterior
    assert Rational(7, 11) * Rational(2, 7) == Rational(2, 11)


@given(st.fractions(), st.fractions())
def test_rational_round_trip(a, b):
    assert (a + b) - b == a


@given(st.fractions(), st.fractions())
def test_rational_always_lowest_terms(a, b):
    from math import gcd

    c = a * b + a
    assert gcd(c.numerator, c.denominator) == 1
    assert c.denominator > 0
