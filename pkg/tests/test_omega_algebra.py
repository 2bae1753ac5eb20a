import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from abscalc.exact_core import IntQPoly, q_factorial, q_integer
from abscalc.omega_algebra import (
    EXACT, OmegaElt, OrderCapTooHigh, Ring, WrongPrime, L_of_omega, closed_form_partial, gamma_alg, log_q_omega,
    partial_delta_alg, plain_power, sigma_p2, stirling_power, tau_flip, taylor_theta, taylor_theta_horner,
    verify_basis_change, verify_estcong, verify_flip, verify_L_omega, verify_taylor_closed_form, verify_transan,
)
from abscalc.padic_series import Precision, TruncSeries, from_qpoly, invert, lambda_series, partial_delta, pq

q = IntQPoly.q()


def P(*c):
    return IntQPoly(list(c))


def qq():
    return P(0, -1, 1)


def exact(p, K, coeffs):
    return OmegaElt(p, EXACT, list(coeffs) + [0] * (K + 1 - len(coeffs)))


# --- multiplication -----------------------------------------------------------------------

@pytest.mark.parametrize("p", [2, 3, 5])
def test_omega_squared(p):
    w = OmegaElt.omega(p, EXACT, 3)
    assert w * w == exact(p, 3, [0, qq(), q_integer(2, p)])
    one = OmegaElt.scalar(p, EXACT, 3, 1)
    assert one * w == w


@pytest.mark.parametrize("p", [2, 3, 5])
def test_plain_power_two_ways(p):
    assert plain_power(0, 3, p) == OmegaElt.scalar(p, EXACT, 3, 1)
    for n in range(5):
        assert plain_power(n, 4, p) == stirling_power(n, 4, p)


def test_plain_power_p2_repeated_multiplication():
    p, K = 2, 3
    w = OmegaElt.omega(p, EXACT, K)
    x = w + OmegaElt.scalar(p, EXACT, K, qq())
    # w^(2) = w (w - (q-1) q), so (w + (q-1)q) w = w^(2) + 2 (q-1) q w
    w2 = w * (w - OmegaElt.scalar(p, EXACT, K, qq()))
    assert x * w == w2 + w.scale(qq() * 2)


def _rand_omega(rng, p, K):
    return OmegaElt(p, EXACT, [IntQPoly([rng.randint(-3, 3) for _ in range(3)]) for _ in range(K + 1)])


@pytest.mark.parametrize("p", [2, 3])
def test_ring_axioms(p):
    rng = random.Random(p)
    K = 6 if p == 2 else 4
    for _ in range(3):
        a, b, c = (_rand_omega(rng, p, K) for _ in range(3))
        assert (a * b) * c == a * (b * c)
        assert a * b == b * a


# --- Taylor map ---------------------------------------------------------------------------

@pytest.mark.parametrize("p", [2, 3, 5])
def test_taylor_examples(p):
    assert taylor_theta(P(1), 3, p) == OmegaElt.scalar(p, EXACT, 3, 1)
    pq_ = q_integer(p)
    want = exact(p, 2, [q * q, pq_ * q_integer(2, p) * q, pq_ * pq_ * q_integer(2, p)])
    assert taylor_theta(q * q, 2, p) == want
    assert closed_form_partial(0, 5, p) == IntQPoly.monomial(5)
    assert closed_form_partial(1, 1, p) == pq_
    assert closed_form_partial(2, 2, p) == pq_ * pq_ * q_integer(2, p)


def test_taylor_pq_at_2():
    assert taylor_theta(q_integer(2), 2, 2) == exact(2, 2, [q_integer(2), q_integer(2)])


def test_taylor_q2_at_3_cli_values():
    th = taylor_theta(q * q, 2, 3)
    assert th[1] == IntQPoly([0, 1, 1, 1, 1, 1, 1])
    assert th[2] == IntQPoly([1, 2, 3, 3, 3, 3, 2, 1])


@given(st.lists(st.integers(-5, 5), max_size=6), st.sampled_from([2, 3, 5]))
def test_split_theta_matches_horner(c, p):
    a = IntQPoly(c)
    assert taylor_theta(a, 4, p) == taylor_theta_horner(a, 4, p)


@given(st.lists(st.integers(-5, 5), max_size=4), st.lists(st.integers(-5, 5), max_size=4))
def test_theta_is_multiplicative(a, b):
    A, B = IntQPoly(a), IntQPoly(b)
    assert taylor_theta(A * B, 3, 3) == taylor_theta(A, 3, 3) * taylor_theta(B, 3, 3)


def test_augmentation_of_theta():
    a = IntQPoly([3, -1, 4, 1])
    assert taylor_theta(a, 3, 5).e() == a


# --- L(w) ---------------------------------------------------------------------------------

def test_L_examples():
    assert L_of_omega(2, 3) == exact(2, 3, [1, 1])
    L3 = L_of_omega(3, 2)
    # direct substitution value (the 1 + q - q^2 + q^4 + q^5 variant does not satisfy theta((3)_q) = (3)_q L)
    assert L3 == exact(3, 2, [1, P(1, 1, 0, 0, 1), q_integer(3) * q_integer(2, 3)])
    assert L3.scale(q_integer(3)) == taylor_theta(q_integer(3), 2, 3)
    assert L_of_omega(5, 0) == OmegaElt.scalar(5, EXACT, 0, 1)


@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_L_suite(p):
    assert verify_L_omega(p, 6).ok
    assert not verify_L_omega(p, 6, mutate=True).ok


# --- truncated operations ------------------------------------------------------------------

def trunc(p, M=4, N=5):
    pr = Precision(p, M, N)
    return pr, Ring.truncated(pr)


def test_gamma_alg_examples():
    pr, R = trunc(3)
    w = OmegaElt.omega(3, R, 2)
    lam_inv = invert(lambda_series(pr))
    Q = TruncSeries.q(pr)
    g = gamma_alg(w)
    want = OmegaElt(3, R, [-(Q * Q - Q) * lam_inv, lam_inv, 0]).reduce_to(g.prec)
    assert g == want
    assert gamma_alg(OmegaElt.scalar(3, R, 2, 1)) == OmegaElt.scalar(3, R, 2, 1).reduce_to(g.prec)
    qw = w.scale(Q)
    assert gamma_alg(qw) == (want.scale(Q ** 4)).reduce_to(gamma_alg(qw).prec)


def test_gamma_cap():
    _, R = trunc(3)
    with pytest.raises(OrderCapTooHigh):
        gamma_alg(OmegaElt.omega(3, R, 3))
    with pytest.raises(OrderCapTooHigh):
        tau_flip(OmegaElt.omega(3, R, 3))


def test_partial_delta_alg_omega():
    pr, R = trunc(3)
    d = partial_delta_alg(OmegaElt.omega(3, R, 2))
    lo = d.prec
    lam_inv = invert(lambda_series(lo))
    dq = from_qpoly(_dqp_pq(3), lo)
    want = OmegaElt(3, Ring.truncated(lo), [-lam_inv, -lam_inv * dq, 0])
    assert d == want.reduce_to(d.prec)


def _dqp_pq(p):
    from abscalc.exact_core import partial_qp_poly
    return partial_qp_poly(q_integer(p), p)


def test_partial_delta_alg_on_coefficients():
    pr, R = trunc(5, 3, 5)
    a = TruncSeries(pr, [3, 1, 4, 1, 5])
    d = partial_delta_alg(OmegaElt.scalar(5, R, 1, a))
    assert d[0] == partial_delta(a).reduce_to(d[0].prec)


def test_tau_examples():
    pr, R = trunc(2, 4, 5)
    w = OmegaElt.omega(2, R, 1)
    t = tau_flip(w)
    assert t == (-w).reduce_to(t.prec)
    one = OmegaElt.scalar(2, R, 1, 1)
    assert tau_flip(one) == one.reduce_to(tau_flip(one).prec)


@pytest.mark.parametrize("p", [3, 5])
def test_tau_involution_on_theta_images(p):
    pr, R = trunc(p, 6, 8)
    K = p - 1
    for a in (IntQPoly.q(), IntQPoly.monomial(2), q_integer(p)):
        th = taylor_theta(from_qpoly(a, pr), K)
        tt = tau_flip(tau_flip(th))
        assert tt == th.reduce_to(tt.prec)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_flip_suite(p):
    assert verify_flip(p).ok
    assert not verify_flip(p, mutate=True).ok


def test_sigma_p2():
    pr, R = trunc(2, 4, 5)
    w = OmegaElt.omega(2, R, 1)
    Q = TruncSeries.q(pr)
    s = sigma_p2(w)
    assert s == OmegaElt(2, R, [Q - 1, Q]).reduce_to(s.prec)
    ss = sigma_p2(sigma_p2(w))
    assert ss == w.reduce_to(ss.prec)
    with pytest.raises(WrongPrime):
        sigma_p2(OmegaElt.omega(3, trunc(3)[1], 1))


def test_sigma_commutes_with_gamma():
    pr, R = trunc(2, 4, 6)
    x = OmegaElt(2, R, [TruncSeries(pr, [1, 2, 3]), TruncSeries(pr, [3, 1])])
    a, b = sigma_p2(gamma_alg(x)), gamma_alg(sigma_p2(x))
    lo = Precision(2, 4, min(a.prec.N, b.prec.N))
    assert a.reduce_to(lo) == b.reduce_to(lo)


def test_log_q_omega_examples():
    pr = Precision(3, 4, 5)
    lg = log_q_omega(2, pr)
    Qi = invert(TruncSeries.q(pr))
    # graded precision: the w{k} coefficient is meaningful mod t^(N-k)
    assert lg[1].coeffs[:4] == (Qi * 3).coeffs[:4]
    # k = 2 term of the series: (1)_{q^3}! = 1, so no (2)_{q^3} factor
    assert lg[2].coeffs[:3] == (from_qpoly(q_integer(3), pr) * Qi ** 5 * (-3)).coeffs[:3]
    assert log_q_omega(0, pr).is_zero()


# --- suites -------------------------------------------------------------------------------

@pytest.mark.parametrize("p", [2, 3, 5])
def test_closed_form_suite(p):
    assert verify_taylor_closed_form(p, 12, 6).ok
    assert not verify_taylor_closed_form(p, 4, 2, mutate=True).ok


@pytest.mark.parametrize("p", [2, 3, 5])
def test_estcong_transan(p):
    assert verify_estcong(p, 4).ok and not verify_estcong(p, 4, mutate=True).ok
    assert verify_transan(p).ok and not verify_transan(p, mutate=True).ok


@pytest.mark.parametrize("n_max,p", [(6, 3), (4, 2)])
def test_basis_change_examples(n_max, p):
    assert verify_basis_change(n_max, p).ok
    assert not verify_basis_change(n_max, p, mutate=True).ok
