"""The two-variable algebra R<w> (x) R<w>, comultiplication and the operators L^<k>.

A TensorElt is sum_j X_j (x) w{j} with X_j in the left algebra.  Scalars of the
right factor pass to the left through the Taylor map.

Exact layer.  The twisted factorial (n)_{q^p}! splits as N_n U_n, where N_n
collects the factors (p)_{q^{p^e}} (those vanishing at q = 1 modulo p) and U_n
is a unit of Z_p[[q-1]].  Delta(w^(n)) is exactly divisible by N_n in Z[q],
and Delta(w{n}) is the quotient divided by the unit U_n.  The exact layer
stores the pair (Delta(w^(n)) / N_n, U_n); the truncated layer inverts U_n.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

from .exact_core import IntQPoly, NonzeroRemainder, QPoly, euclid_div_exact, q_factorial, q_integer, stirling_q
from .omega_algebra import (
    EXACT,
    NoConvergence,
    OmegaElt,
    Ring,
    RingMismatch,
    L_of_omega,
    gamma_alg,
    partial_qp_upper,
    structure_constants,
    taylor_theta,
)
from .padic_series import Precision, TruncSeries, from_qpoly, gamma, invert, partial_delta
from .reports import Report


# --- tensor elements ---------------------------------------------------------------

@lru_cache(maxsize=None)
def _theta_constants(ring: Ring, p: int, a: int, b: int, Kl: int, Kr: int):
    """Structure constants of w{a} w{b} in the right factor, moved left by theta."""
    out = []
    for m, c in structure_constants(p, a, b):
        if m <= Kr:
            out.append((m, taylor_theta(c, Kl, p).to_ring(ring)))
    return tuple(out)


class TensorElt:
    """sum_j coeffs[j] (x) w{j}, with left caps Kl and right cap Kr."""

    __slots__ = ("p", "coeffs")

    def __init__(self, p: int, coeffs):
        self.p = p
        self.coeffs = tuple(coeffs)
        Ks = {c.K for c in self.coeffs}
        if len(Ks) != 1:
            raise RingMismatch("left caps differ between components")

    @classmethod
    def zero(cls, p: int, ring: Ring, Kl: int, Kr: int) -> "TensorElt":
        return cls(p, [OmegaElt.scalar(p, ring, Kl, 0) for _ in range(Kr + 1)])

    @classmethod
    def left(cls, phi: OmegaElt, Kr: int) -> "TensorElt":
        """phi (x) 1."""
        z = OmegaElt.scalar(phi.p, phi.ring, phi.K, 0)
        return cls(phi.p, [phi] + [z] * Kr)

    @classmethod
    def right_basis(cls, p: int, ring: Ring, Kl: int, Kr: int, j: int) -> "TensorElt":
        """1 (x) w{j}."""
        c = [OmegaElt.scalar(p, ring, Kl, 0) for _ in range(Kr + 1)]
        if j <= Kr:
            c[j] = OmegaElt.scalar(p, ring, Kl, 1)
        return cls(p, c)

    @classmethod
    def right(cls, phi: OmegaElt, Kl: int, ring: Ring | None = None) -> "TensorElt":
        """1 (x) phi: each coefficient of phi passes to the left through theta."""
        ring = ring or phi.ring
        out = []
        for c in phi.coeffs:
            if ring.exact:
                out.append(taylor_theta(c, Kl, phi.p).to_ring(ring))
            else:
                out.append(taylor_theta(ring.lift(c), Kl))
        return cls(phi.p, out)

    @property
    def Kl(self) -> int:
        return self.coeffs[0].K

    @property
    def Kr(self) -> int:
        return len(self.coeffs) - 1

    @property
    def ring(self) -> Ring:
        r = self.coeffs[0].ring
        for c in self.coeffs[1:]:
            r = r.join(c.ring)
        return r

    def __getitem__(self, j: int) -> OmegaElt:
        return self.coeffs[j]

    def __add__(self, other: "TensorElt") -> "TensorElt":
        return TensorElt(self.p, [a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __neg__(self) -> "TensorElt":
        return TensorElt(self.p, [-a for a in self.coeffs])

    def __sub__(self, other: "TensorElt") -> "TensorElt":
        return self + (-other)

    def scale_left(self, c) -> "TensorElt":
        """Multiply by c (x) 1 for a scalar or a left OmegaElt."""
        if isinstance(c, OmegaElt):
            return TensorElt(self.p, [c * a for a in self.coeffs])
        return TensorElt(self.p, [a.scale(c) for a in self.coeffs])

    def scale_right(self, c) -> "TensorElt":
        """Multiply by 1 (x) c for a scalar c of the right factor."""
        th = taylor_theta(c, self.Kl, self.p) if not isinstance(c, TruncSeries) else taylor_theta(c, self.Kl)
        return TensorElt(self.p, [th * a for a in self.coeffs])

    def __mul__(self, other: "TensorElt") -> "TensorElt":
        if not isinstance(other, TensorElt):
            return self.scale_left(other)
        ring = self.ring.join(other.ring)
        Kl, Kr = self.Kl, self.Kr
        out = [OmegaElt.scalar(self.p, ring, Kl, 0) for _ in range(Kr + 1)]
        for a, x in enumerate(self.coeffs):
            if x.is_zero():
                continue
            for b, y in enumerate(other.coeffs):
                if y.is_zero():
                    continue
                xy = x * y
                for m, th in _theta_constants(ring, self.p, a, b, Kl, Kr):
                    out[m] = out[m] + th * xy
        return TensorElt(self.p, out)

    def __eq__(self, other) -> bool:
        return isinstance(other, TensorElt) and self.Kr == other.Kr and all(
            a == b for a, b in zip(self.coeffs, other.coeffs)
        )

    def __hash__(self):
        return hash(self.coeffs)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coeffs)

    def map(self, f) -> "TensorElt":
        return TensorElt(self.p, [f(c) for c in self.coeffs])

    def __repr__(self):
        return "TensorElt(" + ", ".join(f"[{j}] {c}" for j, c in enumerate(self.coeffs) if not c.is_zero()) + ")"

    def to_json(self) -> dict:
        return {"p": self.p, "Kl": self.Kl, "Kr": self.Kr, "coeffs": [c.to_json() for c in self.coeffs]}


# --- factorial splitting -----------------------------------------------------------------

@lru_cache(maxsize=None)
def nonunit_factorial(n: int, p: int) -> IntQPoly:
    """N_n: product over j <= n and p^e | j (e >= 1) of (p)_{q^{p^e}}."""
    out = IntQPoly([1])
    for j in range(1, n + 1):
        e, m = 0, j
        while m % p == 0:
            e, m = e + 1, m // p
            out = out * q_integer(p, p ** e)
    return out


@lru_cache(maxsize=None)
def unit_factorial(n: int, p: int) -> IntQPoly:
    """U_n = (n)_{q^p}! / N_n, a unit of Z_p[[q-1]]."""
    u = euclid_div_exact(q_factorial(n, p), nonunit_factorial(n, p))
    if u(1) % p == 0:
        raise AssertionError(f"U_{n} is not a unit modulo (p, q-1)")
    return u


# --- comultiplication -----------------------------------------------------------------------

def delta_omega(p: int, ring: Ring, Kl: int, Kr: int) -> TensorElt:
    """Delta(w) = L(w) (x) w + w (x) 1."""
    L = L_of_omega(p, Kl, ring)
    w = OmegaElt.omega(p, ring, Kl)
    z = OmegaElt.scalar(p, ring, Kl, 0)
    return TensorElt(p, ([w, L] + [z] * Kr)[: Kr + 1])


@lru_cache(maxsize=None)
def _delta_falling(p: int, Kl: int, Kr: int, n: int) -> TensorElt:
    """Delta(w^(n)) = prod_{j<n} (Delta(w) - (j)_{q^p}(q^2 - q)), exact over Z[q]."""
    if n == 0:
        return TensorElt.left(OmegaElt.scalar(p, EXACT, Kl, 1), Kr)
    prev = _delta_falling(p, Kl, Kr, n - 1)
    shift = q_integer(n - 1, p) * IntQPoly([0, -1, 1])
    dw = delta_omega(p, EXACT, Kl, Kr)
    factor = TensorElt(p, [dw[0] - shift] + list(dw.coeffs[1:]))
    return prev * factor


@lru_cache(maxsize=None)
def comult_hat(n: int, p: int, Kl: int, Kr: int) -> TensorElt:
    """U_n Delta(w{n}) = Delta(w^(n)) / N_n; raises NonzeroRemainder if not integral."""
    d = nonunit_factorial(n, p)
    return _delta_falling(p, Kl, Kr, n).map(lambda phi: phi.map(lambda c: euclid_div_exact(c, d)))


@dataclass(frozen=True)
class ExactTensor:
    """num / den with num over Z[q] and den a unit of Z_p[[q-1]] (left scalar)."""

    num: TensorElt
    den: IntQPoly

    def __eq__(self, other) -> bool:
        return self.num.scale_left(other.den) == other.num.scale_left(self.den)

    def to_truncated(self, prec: Precision) -> TensorElt:
        ring = Ring.truncated(prec)
        inv = invert(from_qpoly(self.den, prec))
        return self.num.map(lambda phi: phi.to_ring(ring).scale(inv))


def comult(a: OmegaElt, Kr: int, Kl: int | None = None):
    """Delta(a) on the divided basis.

    Exact input gives an ExactTensor; truncated input gives a TensorElt over
    the same ring.  Kl defaults to the cap of a.
    """
    p = a.p
    Kl = a.K if Kl is None else Kl
    if a.ring.exact:
        nmax = max((n for n, c in enumerate(a.coeffs) if c), default=0)
        den = unit_factorial(nmax, p)
        num = TensorElt.zero(p, EXACT, Kl, Kr)
        for n, c in enumerate(a.coeffs):
            if c:
                scal = c * euclid_div_exact(den, unit_factorial(n, p))
                num = num + comult_hat(n, p, Kl, Kr).map(lambda phi: phi.to_ring(a.ring.join(EXACT)).scale(scal))
        return ExactTensor(num, den)
    ring = a.ring
    out = TensorElt.zero(p, ring, Kl, Kr)
    for n, c in enumerate(a.coeffs):
        if c:
            out = out + _delta_basis_trunc(p, ring.prec, Kl, Kr, n).scale_left(c)
    return out


@lru_cache(maxsize=None)
def _delta_basis_trunc(p: int, prec: Precision, Kl: int, Kr: int, n: int) -> TensorElt:
    return ExactTensor(comult_hat(n, p, Kl, Kr), unit_factorial(n, p)).to_truncated(prec)


def L_upper(k: int, a: OmegaElt):
    """The coefficient of (x) w{k} in Delta(a), valid up to left cap a.K - k.

    Truncated inputs lose k steps of graded t-precision, and the output
    precision is also capped at K + 1 - k.  Exact inputs return
    a pair (numerator, unit denominator).
    """
    p, K = a.p, a.K
    Kout = K - k
    if Kout < 0:
        raise ValueError("order cap too small for this L^<k>")
    if a.ring.exact:
        ex = comult(a, k, Kl=Kout)
        return ex.num[k], ex.den
    out = OmegaElt.scalar(p, a.ring, Kout, 0)
    for n, c in enumerate(a.coeffs):
        if c:
            out = out + _delta_basis_trunc(p, a.prec, Kout, k, n)[k].scale(c)
    # the w{j} coefficient of L^<k>(w{m}) is divisible by t^(m-k-j), so the
    # terms above the input cap are only invisible modulo t^(K+1-k-j)
    N = min(a.prec.N, K + 1) - k
    if N < 1:
        raise ValueError("not enough t-precision for this L^<k>")
    return out.reduce_to(Precision(p, a.prec.M, N))


def L_delta(a: OmegaElt) -> OmegaElt:
    return L_upper(1, a)


def L_upper_exact(k: int, n: int, p: int, Kl: int) -> tuple[OmegaElt, IntQPoly]:
    """(numerator, unit denominator) of L^<k>(w{n}) on left cap Kl."""
    return comult_hat(n, p, Kl, k)[k], unit_factorial(n, p)


# --- checks ---------------------------------------------------------------------------------

def _at_one_mod(phi: OmegaElt, den: IntQPoly, mod: int | None) -> list:
    """Coefficients of phi / den at q = 1, as Fractions or residues mod `mod`."""
    d = den(1)
    out = []
    for c in phi.coeffs:
        v = Fraction(c(1)) / d
        out.append(v if mod is None else v.numerator * pow(v.denominator, -1, mod) % mod)
    return out


def alpha_estimates(p: int) -> list[int]:
    """alpha_0 = 1, alpha_i = p^{i-1} i! sum_{j=i}^{p-1} binom(j, i) for 0 < i < p."""
    return [1] + [p ** (i - 1) * factorial(i) * sum(comb(j, i) for j in range(i, p)) for i in range(1, p)]


def verify_estimates(n: int, p: int, mutate: bool = False) -> Report:
    """L_Delta(w{n}) = P_{n-1}(w) modulo q - 1, exact over Q."""
    rep = Report("estimates", {"n": n, "p": p})
    alpha = alpha_estimates(p)
    if mutate:
        alpha[0] += 1
    Kl = n + p
    num, den = L_upper_exact(1, n, p, Kl)
    got = _at_one_mod(num, den, None)
    want = [Fraction(0)] * (Kl + 1)
    for i, a in enumerate(alpha):
        if n - 1 + i <= Kl:
            want[n - 1 + i] = Fraction(comb(n - 1 + i, n - 1) * a)
    bad = next((m for m in range(Kl + 1) if got[m] != want[m]), None)
    rep.add(f"estimates/n={n}/p={p}", bad is None, {"index": bad, "got": [str(x) for x in got], "want": [str(x) for x in want]})
    # L_Delta twists products through theta(q^2 - q) = p w + p^2 w^2 at q = 1, so
    # phi -> phi + u L_Delta(phi) is multiplicative there and fixes L_Delta(w^n).
    rd = right_derivation_estimate(n, p, Kl)
    bad = next((m for m in range(Kl + 1) if got[m] != rd[m]), None)
    rep.add(f"estimates/rightder/n={n}/p={p}", bad is None, {"index": bad, "want": [str(x) for x in rd]})
    return rep


def _ser_mul(a: list, b: list, deg: int) -> list:
    out = [Fraction(0)] * (deg + 1)
    for i, x in enumerate(a[: deg + 1]):
        if x:
            for j, y in enumerate(b[: deg + 1 - i]):
                out[i + j] += x * y
    return out


def right_derivation_estimate(n: int, p: int, deg: int) -> list[Fraction]:
    """Coefficients of L_Delta(w{n}) at q = 1 on w{0..deg}, from the twisted Leibniz rule."""
    top = deg + 2
    L1 = [Fraction(a, factorial(i)) for i, a in enumerate(alpha_estimates(p))] + [Fraction(0)] * top
    u = [Fraction(0), Fraction(p), Fraction(p * p)] + [Fraction(0)] * top
    w = [Fraction(0), Fraction(1)] + [Fraction(0)] * top
    m = [x + y for x, y in zip(w, _ser_mul(u, L1, top))]
    mn, wn = [Fraction(1)] + [Fraction(0)] * top, [Fraction(1)] + [Fraction(0)] * top
    for _ in range(n):
        mn, wn = _ser_mul(mn, m, top), _ser_mul(wn, w, top)
    # (m^n - w^n) / (p w (1 + p w))
    d = [(x - y) / p for x, y in zip(mn, wn)][1:]
    inv = [Fraction((-p) ** k) for k in range(top + 1)]
    plain = _ser_mul(d, inv, deg)
    return [plain[k] * factorial(k) / factorial(n) for k in range(deg + 1)]


def verify_modp(n_max: int, p: int, mutate: bool = False) -> Report:
    """L_Delta(w{n}) mod (p, q-1) is w{n-1} (p odd) or w{n-1} + n w{n} (p = 2)."""
    rep = Report("modp", {"nmax": n_max, "p": p})
    for n in range(1, n_max + 1):
        Kl = n + p
        num, den = L_upper_exact(1, n, p, Kl)
        got = _at_one_mod(num, den, p)
        want = [0] * (Kl + 1)
        want[n - 1] = 1
        if p == 2:
            want[n] = n % 2
        if mutate and n == 1:
            want[0] = (want[0] + 1) % p
        if got != want:
            rep.add(f"modp/p={p}", False, {"n": n, "got": got, "want": want})
            return rep
    rep.add(f"modp/p={p}", True)
    return rep


def verify_comult(p: int, n_max: int, mutate: bool = False) -> Report:
    """Delta(w), integrality, the counit, and Delta(w{n}) from the Stirling expansion."""
    rep = Report("comult", {"p": p, "nmax": n_max})
    Kl = Kr = n_max
    L = L_of_omega(p, Kl)
    dw = comult(OmegaElt.omega(p, EXACT, Kl), Kr)
    expect = TensorElt.left(OmegaElt.omega(p, EXACT, Kl), Kr) + TensorElt.right_basis(p, EXACT, Kl, Kr, 1).scale_left(L)
    rep.add(f"comult/delom/p={p}", dw == ExactTensor(expect, IntQPoly([1])))
    # integrality: exact division by N_n succeeded and U_n is a unit
    try:
        for n in range(n_max + 1):
            comult_hat(n, p, Kl, Kr)
            unit_factorial(n, p)
        rep.add(f"comult/integral/p={p}", True)
    except (NonzeroRemainder, AssertionError) as exc:
        rep.add(f"comult/integral/p={p}", False, str(exc))
    # counit: the right w{0} component of Delta(w{n}) is w{n}
    bad = None
    for n in range(n_max + 1):
        num, den = comult_hat(n, p, Kl, Kr), unit_factorial(n, p)
        if num[0] != OmegaElt.basis(p, EXACT, Kl, n).scale(den):
            bad = n
            break
    rep.add(f"comult/counit/p={p}", bad is None, {"n": bad})
    # Stirling route: (n)! w{n} = sum_k s_{q^p}(n,k) (q^2-q)^{n-k} w^k, so
    # N_n U_n Delta(w{n}) = sum_k s(n,k)(q^2-q)^{n-k} Delta(w)^k
    dwt = delta_omega(p, EXACT, Kl, Kr)
    bad = None
    for n in range(1, n_max + 1):
        rhs = TensorElt.zero(p, EXACT, Kl, Kr)
        power = TensorElt.left(OmegaElt.scalar(p, EXACT, Kl, 1), Kr)
        for k in range(0, n + 1):
            if k:
                power = power * dwt
            c = stirling_q("first", n, k, p) * IntQPoly([0, -1, 1]) ** (n - k)
            if mutate and (n, k) == (2, 1):
                c = c + 1
            rhs = rhs + power.scale_left(c)
        lhs = comult_hat(n, p, Kl, Kr).scale_left(nonunit_factorial(n, p))
        if lhs != rhs:
            bad = n
            break
    rep.add(f"comult/stirling-route/p={p}", bad is None, {"n": bad})
    return rep


def _t3_mul(X: list, Y: list, p: int) -> list:
    """Product of triple tensors stored as lists over the third factor's w{c}.

    Third-factor scalars pass to the second factor through theta, and from
    there to the first factor through theta again (TensorElt.right).
    """
    K3 = len(X) - 1
    K1, K2 = X[0].Kl, X[0].Kr
    out = [TensorElt.zero(p, EXACT, K1, K2) for _ in range(K3 + 1)]
    for a, x in enumerate(X):
        if x.is_zero():
            continue
        for b, y in enumerate(Y):
            if y.is_zero():
                continue
            xy = x * y
            for m, th in _theta2_constants(p, a, b, K1, K2, K3):
                out[m] = out[m] + xy * th
    return out


@lru_cache(maxsize=None)
def _theta2_constants(p: int, a: int, b: int, K1: int, K2: int, K3: int):
    return tuple(
        (m, TensorElt.right(taylor_theta(c, K2, p), K1, EXACT))
        for m, c in structure_constants(p, a, b) if m <= K3
    )


def verify_coassoc(p: int, n_max: int, caps: tuple[int, int] = (2, 2), mutate: bool = False) -> Report:
    """(Delta (x) Id) Delta = (Id (x) Delta) Delta on w{n}, n <= n_max, and on theta(q).

    Triple tensors are lists over the third factor's w{c} of elements of the
    first two factors, truncated at caps (K1, K2, n).  Left caps of Delta(w{n})
    cannot be cut before applying Delta again, so the left side is built as a
    ring map from Delta(w) = L (x) w + w (x) 1:
        U^n N_n (Delta (x) Id) Delta(w{n}) ... = prod_j (W - U s_j),
    with W = Delta(L)^ (x) w + U Delta(w) (x) 1, U = U_{p-1} the denominator of
    Delta(L) and s_j = (j)_{q^p}(q^2 - q).  The right side uses the computed
    Delta(w{n}) and Delta(w{b}) directly; slot-2 denominators are cleared by
    D2 = U_{n_max}.
    """
    rep = Report("comult-coassoc", {"p": p, "nmax": n_max, "caps": list(caps)})
    K1, K2 = caps
    D2 = unit_factorial(n_max, p)
    dL = comult(L_of_omega(p, p - 1), K2, Kl=K1)  # ExactTensor, den = U_{p-1}
    U = dL.den
    dw = delta_omega(p, EXACT, K1, K2)
    for n in range(n_max + 1):
        K3 = n
        z = TensorElt.zero(p, EXACT, K1, K2)
        W = [dw.scale_left(U), dL.num] + [z] * (K3 - 1) if K3 >= 1 else [dw.scale_left(U)]
        lhs = [TensorElt.left(OmegaElt.scalar(p, EXACT, K1, 1), K2)] + [z] * K3
        for j in range(n):
            shift = q_integer(j, p) * IntQPoly([0, -1, 1]) * U
            f = [W[0] - TensorElt.left(OmegaElt.scalar(p, EXACT, K1, shift), K2)] + W[1:]
            lhs = _t3_mul(lhs, f, p)
        lhs = [X.scale_right(D2) for X in lhs]
        # RHS: U^n N_n sum_b U_n Delta(w{n})_b (x) Delta(w{b})
        outer = comult_hat(n, p, K1, K3)
        rhs = [z for _ in range(K3 + 1)]
        lead = (U ** n) * nonunit_factorial(n, p)
        for b in range(K3 + 1):
            phi = outer[b].scale(lead)
            if mutate and (n, b) == (1, 1):
                phi = phi + OmegaElt.scalar(p, EXACT, K1, 1)
            inner = comult_hat(b, p, K2, K3)
            scal = euclid_div_exact(D2, unit_factorial(b, p))
            for c in range(K3 + 1):
                # phi (x) (inner[c] * scal) : second-slot scalars move left via theta
                rhs[c] = rhs[c] + TensorElt.right(inner[c].scale(scal), K1, EXACT).scale_left(phi)
        if any(x != y for x, y in zip(lhs, rhs)):
            rep.add(f"coassoc/p={p}", False, {"n": n})
            return rep
    rep.add(f"coassoc/p={p}", True)
    # cocycle identity for the Taylor map: Delta(theta(alpha)) = 1 (x) theta(alpha)
    bad = None
    for alpha in (IntQPoly.q(), IntQPoly.monomial(2), q_integer(p)):
        # theta(alpha) has w-degree deg(alpha); a smaller cap would cut it
        Kl = Kr = max(n_max, alpha.degree, 1)
        th = taylor_theta(alpha, Kl, p)
        lhs = comult(th, Kr)
        rhs = TensorElt.right(th, Kl, EXACT)
        if lhs != ExactTensor(rhs, IntQPoly([1])):
            bad = str(alpha)
            break
    rep.add(f"coassoc/taylor-cocycle/p={p}", bad is None, {"alpha": bad})
    return rep


# --- little Poincare ---------------------------------------------------------------------

def section(psi: OmegaElt) -> OmegaElt:
    """Approximate inverse of L_Delta from its mod-(p, q-1) triangular form.

    p odd: w{n} -> w{n+1}.  p = 2: w{n} -> w{n+1} - (n+1) w{n+2}.  Output cap psi.K + 1,
    one more step of graded t-precision.
    """
    p, K = psi.p, psi.K
    prec = Precision(p, psi.prec.M, psi.prec.N + 1)
    ring = Ring.truncated(prec)
    out = [TruncSeries(prec, [])] * (K + 2)
    for n, c in enumerate(psi.coeffs):
        c = TruncSeries(prec, c.coeffs)
        out[n + 1] = out[n + 1] + c
        if p == 2 and n + 2 <= K + 1:
            out[n + 2] = out[n + 2] - c * (n + 1)
    return OmegaElt(p, ring, out)


def little_poincare_solve(psi: OmegaElt, max_rounds: int | None = None) -> OmegaElt:
    """phi with e(phi) = 0 and L_Delta(phi) = psi.

    The identity holds modulo the graded ideal of level min(N, K + 1): terms of
    phi above its cap K + 1 are not seen by L_Delta beyond that level.
    """
    if psi.ring.exact:
        raise RingMismatch("the solver works in the truncated layer")
    p, K = psi.p, psi.K
    prec = psi.prec
    rounds = max_rounds if max_rounds is not None else prec.M + prec.N + K + 2
    phi = section(OmegaElt.scalar(p, psi.ring, K, 0))
    for _ in range(rounds):
        r = psi - L_delta(phi)
        if r.is_zero():
            return phi
        phi = phi + section(r)
    if (psi - L_delta(phi)).is_zero():
        return phi
    raise NoConvergence("little Poincare iteration did not converge")


def L_delta_matrix_modp(p: int, K: int) -> list[list[int]]:
    """Matrix of L_Delta from span(w{1..K+1}) to span(w{0..K}) modulo (p, q-1)."""
    cols = []
    for n in range(1, K + 2):
        num, den = L_upper_exact(1, n, p, K)
        cols.append(_at_one_mod(num, den, p))
    return [[cols[j][i] for j in range(K + 1)] for i in range(K + 1)]


def kernel_check(p: int, K: int) -> bool:
    """ker L_Delta meets the augmentation ideal trivially: the matrix is invertible mod (p, q-1)."""
    from sympy import Matrix

    return Matrix(L_delta_matrix_modp(p, K)).det() % p != 0


def random_omega(rng: random.Random, p: int, prec: Precision, K: int) -> OmegaElt:
    mod = prec.modulus
    return OmegaElt(p, Ring.truncated(prec), [TruncSeries(prec, [rng.randrange(mod) for _ in range(prec.N)]) for _ in range(K + 1)])


def verify_little_poincare(p: int, M: int, N: int, K: int, samples: int = 20, seed: int = 0, mutate: bool = False) -> Report:
    rep = Report("little-poincare", {"p": p, "M": M, "N": N, "K": K, "samples": samples})
    prec = Precision(p, M, N)
    rng = random.Random(seed)
    bad = None
    for i in range(samples):
        psi = random_omega(rng, p, prec, K)
        phi = little_poincare_solve(psi)
        got = L_delta(phi)
        if not phi.e().is_zero() or got != psi.reduce_to(got.prec):
            bad = i
            break
    rep.add(f"little-poincare/residual/p={p}", bad is None, {"sample": bad})
    rep.add(f"little-poincare/kernel/p={p}", kernel_check(p, K))
    # round trip on L_Delta(w{2})
    if K >= 1:
        prec1 = Precision(p, M, N + 1)
        w2 = OmegaElt.basis(p, Ring.truncated(prec1), K + 1, 2)
        psi = L_delta(w2)
        phi = little_poincare_solve(psi)
        rep.add(f"little-poincare/round-trip/p={p}", phi == w2.reduce_to(phi.prec))
    if mutate:
        inner = Report("little-poincare-control")
        psi = random_omega(rng, p, prec, K)
        phi = little_poincare_solve(psi) + OmegaElt.basis(p, Ring.truncated(Precision(p, M, N + 1)), K + 1, 1).scale(p ** (M - 1))
        got = L_delta(phi)
        inner.add("mutated", got == psi.reduce_to(got.prec))
        rep.add_control(f"little-poincare/control/p={p}", inner)
    return rep


def verify_rlin(p: int, M: int, N: int, K: int, seed: int = 0, mutate: bool = False) -> Report:
    """L_Delta(theta(a) phi) = theta(d_Delta a) phi + theta(gamma a) L_Delta(phi) and the counit."""
    rep = Report("rlin", {"p": p, "M": M, "N": N, "K": K})
    rng = random.Random(seed)
    prec = Precision(p, M, N)
    a = TruncSeries(prec, [rng.randrange(prec.modulus) for _ in range(N)])
    phi = random_omega(rng, p, prec, K + 1)
    lhs = L_delta(taylor_theta(a, K + 1) * phi)
    # mutation: drop the gamma twist on the second term
    rhs = taylor_theta(partial_delta(a), K) * phi.truncate(K) + taylor_theta(a if mutate else gamma(a), K) * L_delta(phi)
    pr = Precision(p, M, min(lhs.prec.N, rhs.prec.N))
    rep.add(f"rlin/p={p}", lhs.reduce_to(pr) == rhs.reduce_to(pr))
    return rep
