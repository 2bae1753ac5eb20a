import random

import pytest

from abscalc.coalgebra import (
    ExactTensor, L_delta, L_upper, TensorElt, comult, delta_omega, kernel_check, little_poincare_solve,
    random_omega, verify_coassoc, verify_comult, verify_estimates, verify_little_poincare, verify_modp, verify_rlin,
)
from abscalc.exact_core import IntQPoly
from abscalc.omega_algebra import EXACT, L_of_omega, NoConvergence, OmegaElt, Ring
from abscalc.padic_series import Precision


def trunc(p, M, N):
    pr = Precision(p, M, N)
    return pr, Ring.truncated(pr)


# --- comultiplication ---------------------------------------------------------------

@pytest.mark.parametrize("p", [2, 3, 5])
def test_comult_of_one_and_omega(p):
    one = OmegaElt.scalar(p, EXACT, 3, 1)
    d1 = comult(one, 2)
    assert d1 == ExactTensor(TensorElt.left(one, 2), IntQPoly([1]))
    dw = comult(OmegaElt.omega(p, EXACT, 3), 2)
    assert dw == ExactTensor(delta_omega(p, EXACT, 3, 2), IntQPoly([1]))
    # right coefficient of w{1} is L(w), of w{0} is w
    assert dw.num[1] == L_of_omega(p, 3) and dw.num[0] == OmegaElt.omega(p, EXACT, 3)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_comult_suite(p):
    assert verify_comult(p, 4).ok
    assert not verify_comult(p, 4, mutate=True).ok


@pytest.mark.parametrize("p", [2, 3])
def test_coassoc_suite(p):
    assert verify_coassoc(p, 4).ok
    assert not verify_coassoc(p, 2, mutate=True).ok


def test_L_upper_counit_and_L_omega():
    pr, R = trunc(3, 4, 6)
    rng = random.Random(1)
    phi = random_omega(rng, 3, pr, 2)
    l0 = L_upper(0, phi)
    assert l0 == phi.reduce_to(l0.prec).truncate(l0.K)
    Lw = L_delta(OmegaElt.omega(3, R, 2))
    assert Lw == L_of_omega(3, Lw.K, Ring.truncated(Lw.prec)).reduce_to(Lw.prec)


# --- structure mod (p, q-1) ---------------------------------------------------------

def test_estimates_n1():
    # alpha = (1, 3, 6) at p = 3 and (1, 1) at p = 2 reproduce L_Delta(w) mod q - 1
    for p in (2, 3, 5):
        assert verify_estimates(1, p).ok
        assert not verify_estimates(1, p, mutate=True).ok


def test_estimates_literal_fails_beyond_n1():
    # finding: the literal estimate misses the right-derivation correction for n >= 2
    for p in (3, 5):
        assert not verify_estimates(2, p).ok


@pytest.mark.parametrize("p", [3, 5])
def test_modp_odd(p):
    assert verify_modp(4, p).ok
    assert not verify_modp(4, p, mutate=True).ok


def test_modp_literal_p2_fails():
    # finding: L_Delta(w{2}) vanishes mod (2, q-1)
    assert not verify_modp(4, 2).ok


@pytest.mark.parametrize("p", [2, 3, 5])
def test_rlin(p):
    assert verify_rlin(p, 4, 6, p - 1).ok
    assert not verify_rlin(p, 4, 6, p - 1, mutate=True).ok


# --- little Poincare ----------------------------------------------------------------

def test_little_poincare_example():
    pr, R = trunc(3, 2, 3)
    phi = little_poincare_solve(OmegaElt(3, R, [1, 0, 0]))
    got = L_delta(phi)
    assert got == OmegaElt.scalar(3, Ring.truncated(got.prec), got.K, 1)
    assert phi.e().is_zero()
    # phi = w mod (p, q - 1)
    assert [c.coeffs[0] % 3 if c.coeffs else 0 for c in phi.coeffs] == [0, 1] + [0] * (phi.K - 1)


def test_little_poincare_zero_and_round_trip():
    pr, R = trunc(5, 4, 6)
    assert little_poincare_solve(OmegaElt(5, R, [0] * 5)).is_zero()
    pr1 = Precision(5, 4, 7)
    w2 = OmegaElt.basis(5, Ring.truncated(pr1), 5, 2)
    phi = little_poincare_solve(L_delta(w2))
    assert phi == w2.reduce_to(phi.prec)


@pytest.mark.parametrize("p", [3, 5])
def test_little_poincare_suite(p):
    rep = verify_little_poincare(p, 4, 6, p - 1, mutate=True)
    assert rep.ok and any(c.control for c in rep.cases)
    assert kernel_check(p, p - 1)


def test_little_poincare_p2_does_not_converge():
    # the p = 2 section is built from the mod (2, q - 1) formula, which is wrong for even n
    pr, R = trunc(2, 3, 4)
    for seed in range(3):
        with pytest.raises(NoConvergence):
            little_poincare_solve(random_omega(random.Random(seed), 2, pr, 2))
