import pytest

from abscalc.connections import (
    FrobStructure, NablaModule, NotWeaklyNilpotent, build_example, dual, frobenius_check, gamma_roundtrip, hom,
    hyperstrat_solve, is_weakly_nilpotent, mat_map, pullback_gr, rank1_cohomology_OK, smith_diagonal, tensor,
    tensor_power, verify_connections, verify_frobenius, verify_hyperstrat,
)
from abscalc.exact_core import IntQPoly, partial_qp_poly, q_integer
from abscalc.omega_algebra import L_of_omega, NoConvergence, Ring
from abscalc.padic_series import OKElt, Precision, TruncSeries, from_qpoly, invert, lambda_series

PRIMES = [2, 3, 5]


def prec(p, M=4, N=6):
    return Precision(p, M, N)


def rank1(pr, a, name="x"):
    return NablaModule(pr, ((a,),), name)


# --- examples ----------------------------------------------------------------------

@pytest.mark.parametrize("p", PRIMES)
def test_examples(p):
    pr = prec(p)
    assert build_example("trivial", pr).scalar().is_zero()
    assert build_example("Fn", pr, 1).scalar() == from_qpoly(partial_qp_poly(q_integer(p), p), pr)
    # BK(1) scalar times (q^2 - q) equals (p+1)/(p+1)_q - 1
    bk = build_example("BK", pr).scalar()
    Q = TruncSeries.q(pr)
    assert bk * (Q * Q - Q) == invert(from_qpoly(q_integer(p + 1), pr)) * (p + 1) - 1


def test_bk_closed_form_p2():
    pr = prec(2)
    Q = TruncSeries.q(pr)
    want = -(Q + 2) * invert(Q * from_qpoly(q_integer(3), pr))
    assert build_example("BK", pr).scalar() == want


def test_unknown_example():
    with pytest.raises(ValueError):
        build_example("nope", prec(3))


@pytest.mark.parametrize("p", PRIMES)
def test_weak_nilpotency(p):
    pr = prec(p)
    for name, n in (("trivial", 0), ("Fn", 1), ("Fn", 3), ("BK", 1), ("BK", 2)):
        assert is_weakly_nilpotent(build_example(name, pr, n))
    one = rank1(pr, TruncSeries.const(pr, 1))
    assert is_weakly_nilpotent(one) == (p == 2)  # A^2 - A = 0 at p = 2


# --- constructions ------------------------------------------------------------------

@pytest.mark.parametrize("p", PRIMES)
def test_tensor_unit_and_powers(p):
    pr = prec(p)
    triv, F1, BK = (build_example(n, pr) for n in ("trivial", "Fn", "BK"))
    assert tensor(triv, BK).matrix == BK.matrix
    assert tensor_power(F1, 3).scalar() == build_example("Fn", pr, 3).scalar()
    assert tensor_power(BK, 2).scalar() == build_example("BK", pr, 2).scalar()


@pytest.mark.parametrize("p", PRIMES)
def test_dual(p):
    pr = prec(p)
    F1 = build_example("Fn", pr)
    assert dual(F1).scalar() == -invert(lambda_series(pr)) * F1.scalar()
    BK = build_example("BK", pr)
    assert dual(dual(BK)).matrix == BK.matrix
    assert hom(BK, BK).scalar().is_zero()


@pytest.mark.parametrize("p", PRIMES)
def test_pullbacks(p):
    pr = prec(p)
    BK = build_example("BK", pr)
    assert pullback_gr(BK, 1).matrix == BK.matrix
    a = pullback_gr(pullback_gr(BK, 2), 3)
    b = pullback_gr(BK, 6)
    assert a.matrix == b.matrix
    assert pullback_gr(build_example("trivial", pr), 5).scalar().is_zero()


@pytest.mark.parametrize("p", PRIMES)
def test_gamma_roundtrip(p):
    pr = prec(p)
    for name in ("trivial", "Fn", "BK"):
        assert gamma_roundtrip(build_example(name, pr)).ok
    # gamma of F_n is lambda^n, of BK(1) is (p+1)/(p+1)_q
    F2 = build_example("Fn", pr, 2)
    assert F2.gamma_matrix()[0][0] == lambda_series(pr) ** 2
    BK = build_example("BK", pr)
    assert BK.gamma_matrix()[0][0] == invert(from_qpoly(q_integer(p + 1), pr)) * (p + 1)
    assert not gamma_roundtrip(BK, mutate=True).ok


@pytest.mark.parametrize("p", PRIMES)
def test_connections_suite(p):
    rep = verify_connections(p, mutate=True)
    assert rep.ok and any(c.control for c in rep.cases)


# --- frobenius ----------------------------------------------------------------------

@pytest.mark.parametrize("p", PRIMES)
def test_frobenius(p):
    rep = verify_frobenius(p, mutate=True)
    assert rep.ok
    pr = prec(p)
    bk = build_example("BK", pr)
    qm = ((IntQPoly.q(),),)
    bad = FrobStructure(bk, mat_map(lambda a: from_qpoly(a, pr), qm), 1, qm)
    assert not frobenius_check(bad).ok


# --- hyperstratification ------------------------------------------------------------

def test_hyperstrat_trivial_and_F1():
    pr = Precision(5, 4, 8)
    triv = build_example("trivial", pr)
    h = hyperstrat_solve(triv, [TruncSeries.const(pr, 1)], 4)
    comp = h.component(0)
    assert comp.e() == TruncSeries.const(comp.e().prec, 1)
    assert all(c.is_zero() for c in comp.coeffs[1:])
    F1 = build_example("Fn", pr)
    comp = hyperstrat_solve(F1, [TruncSeries.const(pr, 1)], 4).component(0)
    L = L_of_omega(5, 4, Ring.truncated(pr))
    assert comp == L.reduce_to(comp.prec)


@pytest.mark.parametrize("p", [3, 5])
def test_hyperstrat_suite(p):
    rep = verify_hyperstrat(p, mutate=True)
    assert rep.ok and any(c.control for c in rep.cases)


def test_hyperstrat_errors():
    pr = Precision(3, 3, 5)
    with pytest.raises(NotWeaklyNilpotent):
        hyperstrat_solve(rank1(pr, TruncSeries.const(pr, 1)), [TruncSeries.const(pr, 1)], 2)
    with pytest.raises(NoConvergence):
        p2 = Precision(2, 3, 4)
        hyperstrat_solve(build_example("Fn", p2), [TruncSeries.const(p2, 1)], 1)


# --- cohomology ---------------------------------------------------------------------

def test_smith_and_trivial_cohomology():
    assert smith_diagonal([[2, 0], [0, 3]]) == [1, 6]
    assert rank1_cohomology_OK(OKElt(5, [1])).H1 == []
    h = rank1_cohomology_OK(OKElt(2, [4]))
    assert h.H1 == [4] and h.order_H1 == 4
    with pytest.raises(ValueError):
        rank1_cohomology_OK(OKElt(3, [1], 2))
