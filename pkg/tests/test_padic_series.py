import pytest
from hypothesis import given
from hypothesis import strategies as st

from abscalc.exact_core import IntQPoly, euclid_div_exact, q_integer
from abscalc.padic_series import (
    NotAUnit, OKElt, Precision, PrecisionMismatch, PrecisionTooLow, TruncSeries, from_qpoly, gamma, invert,
    lambda_series, partial_delta, pq, reduce_mod_pq, substitute_gr,
)


def T(prec, *c):
    return TruncSeries(prec, list(c))


@st.composite
def series(draw, prec):
    return TruncSeries(prec, [draw(st.integers(0, prec.modulus - 1)) for _ in range(prec.N)])


PRECS = [Precision(2, 4, 6), Precision(3, 3, 5), Precision(5, 2, 5)]


def test_from_qpoly_examples():
    pr = Precision(3, 3, 5)
    assert from_qpoly(IntQPoly.q(), pr) == T(pr, 1, 1)
    p2 = Precision(2, 4, 4)
    assert from_qpoly(q_integer(2), p2) == T(p2, 2, 1)
    assert from_qpoly(q_integer(3), pr) == T(pr, 3, 3, 1)


def test_invert_examples():
    pr = Precision(3, 2, 3)
    assert invert(T(pr, 1)) == T(pr, 1)
    assert invert(T(pr, 1, 1)) == T(pr, 1, 8, 1)
    with pytest.raises(NotAUnit):
        invert(pq(Precision(3, 3, 4)))


def test_substitute_examples():
    p2 = Precision(2, 4, 5)
    t = TruncSeries.t(p2)
    assert substitute_gr(t, 1) == t
    assert substitute_gr(t, 3) == T(p2, 0, 3, 3, 1)
    pr = Precision(2, 3, 3)
    assert substitute_gr(TruncSeries.q(pr), -1) == T(pr, 1, 7, 1)


def test_partial_delta_examples():
    pr = Precision(2, 5, 6)
    assert partial_delta(T(pr, 1)).is_zero()
    d = partial_delta(TruncSeries.q(pr))
    assert d == T(d.prec, 2, 1)
    t2 = TruncSeries.t(pr) ** 2
    d2 = partial_delta(t2)
    low = d2.prec
    assert d2 == (T(low, 2, 1) * T(low, 4, 3, 1)).mul_t()


def test_partial_delta_loses_one_order():
    pr = Precision(3, 3, 5)
    assert partial_delta(TruncSeries.q(pr)).prec == Precision(3, 3, 4)


def test_reduce_mod_pq_examples():
    for p in (2, 3, 5):
        pr = Precision(p, 3, 3 * (p - 1))
        assert reduce_mod_pq(pq(pr)).is_zero()
        z = reduce_mod_pq(TruncSeries.q(pr))
        assert z == OKElt.zeta(p, z.M)
    pr = Precision(3, 3, 6)
    x = reduce_mod_pq(TruncSeries.q(pr) ** 2)
    assert x == OKElt(3, [-1, -1], x.M)
    with pytest.raises(PrecisionTooLow):
        reduce_mod_pq(TruncSeries.q(Precision(5, 2, 3)))


def test_comparison_needs_equal_precision():
    with pytest.raises(PrecisionMismatch):
        OKElt(3, [1], 2) == OKElt(3, [1], 3)


def test_lambda_identity():
    # lambda (p)_q = (p)_{q^{p+1}} and lambda is a unit
    for pr in PRECS:
        p = pr.p
        lam = lambda_series(pr)
        assert lam.is_unit()
        assert lam * pq(pr) == from_qpoly(q_integer(p, p + 1), pr)


def test_bklim_congruence():
    for p in (2, 3, 5):
        for r in (1, 2):
            a, b = q_integer(p ** (r + 1)), q_integer(p ** r)
            euclid_div_exact(a - b * p, b * b)


def test_nygaard_graded_action():
    for pr in PRECS:
        p = pr.p
        for n in range(pr.N - 1):
            d = partial_delta(TruncSeries.t(pr) ** (n + 1))
            lead = ((p + 1) ** (n + 1) - 1) % pr.modulus
            assert all(c == 0 for c in d.coeffs[:n])
            if n < d.prec.N:
                assert d.coeffs[n] % pr.modulus == lead


@pytest.mark.parametrize("pr", PRECS)
@given(data=st.data())
def test_twisted_leibniz_and_buium(pr, data):
    a, b = data.draw(series(pr)), data.draw(series(pr))
    lo = partial_delta(a).prec
    da, db, dab = partial_delta(a), partial_delta(b), partial_delta(a * b)
    assert dab == da * b.reduce_to(lo) + gamma(a).reduce_to(lo) * db
    qq = (TruncSeries.q(lo) ** 2 - TruncSeries.q(lo))
    assert dab == da * b.reduce_to(lo) + a.reduce_to(lo) * db + qq * da * db


@pytest.mark.parametrize("pr", PRECS)
@given(data=st.data())
def test_gamma_is_id_plus_derivation(pr, data):
    a = data.draw(series(pr))
    lo = partial_delta(a).prec
    qq = TruncSeries.q(lo) ** 2 - TruncSeries.q(lo)
    assert gamma(a).reduce_to(lo) == a.reduce_to(lo) + qq * partial_delta(a)


@pytest.mark.parametrize("pr", PRECS)
@given(data=st.data())
def test_griffiths(pr, data):
    a = data.draw(series(pr))
    for n in range(pr.N - 1):
        d = partial_delta(a * TruncSeries.t(pr) ** (n + 1))
        assert all(c == 0 for c in d.coeffs[:n])


@pytest.mark.parametrize("pr", PRECS)
@given(data=st.data())
def test_invert_round_trip(pr, data):
    a = data.draw(series(pr))
    if a.coeffs[0] % pr.p == 0:
        a = a + 1
    assert a * invert(a) == T(pr, 1)


@given(st.lists(st.integers(-30, 30), min_size=1, max_size=4), st.lists(st.integers(-30, 30), min_size=1, max_size=4),
       st.sampled_from([2, 3, 5, 7]))
def test_okelt_ring_laws(a, b, p):
    x, y = OKElt(p, a), OKElt(p, b)
    assert x * y == y * x
    assert (x + y) * x == x * x + y * x
    assert (x * y).norm() == x.norm() * y.norm()
