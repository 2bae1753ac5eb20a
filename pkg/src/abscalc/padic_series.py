"""Truncated p-adic series in t = q - 1 and exact arithmetic in Z[zeta_p]."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence, Union

from .exact_core import QPoly, lambda_poly, q_integer


class NotAUnit(ArithmeticError):
    pass


class PrecisionTooLow(ValueError):
    pass


class PrecisionMismatch(ValueError):
    pass


def is_prime(p: int) -> bool:
    return p >= 2 and all(p % d for d in range(2, int(p ** 0.5) + 1))


@dataclass(frozen=True, order=True)
class Precision:
    """Work modulo (p^M, t^N)."""

    p: int
    M: int
    N: int

    def __post_init__(self):
        if not is_prime(self.p):
            raise ValueError(f"{self.p} is not prime")
        if self.M < 1 or self.N < 1:
            raise ValueError("precision exponents must be positive")

    @property
    def modulus(self) -> int:
        return self.p ** self.M

    def meet(self, other: "Precision") -> "Precision":
        if self.p != other.p:
            raise PrecisionMismatch(f"different primes {self.p} and {other.p}")
        return Precision(self.p, min(self.M, other.M), min(self.N, other.N))

    def to_json(self) -> dict:
        return {"p": self.p, "M": self.M, "N": self.N}


class TruncSeries:
    """Element of (Z/p^M)[t]/(t^N)."""

    __slots__ = ("prec", "coeffs")

    def __init__(self, prec: Precision, coeffs: Sequence[int] = ()):
        mod = prec.modulus
        c = [int(x) % mod for x in list(coeffs)[: prec.N]]
        c += [0] * (prec.N - len(c))
        self.prec = prec
        self.coeffs = tuple(c)

    # constructors -------------------------------------------------------
    @classmethod
    def const(cls, prec: Precision, c: Union[int, Fraction]) -> "TruncSeries":
        return cls(prec, [_residue(c, prec.modulus)])

    @classmethod
    def t(cls, prec: Precision) -> "TruncSeries":
        return cls(prec, [0, 1])

    @classmethod
    def q(cls, prec: Precision) -> "TruncSeries":
        return cls(prec, [1, 1])

    # helpers --------------------------------------------------------------
    def _coerce(self, other) -> "TruncSeries":
        if isinstance(other, TruncSeries):
            return other
        if isinstance(other, (int, Fraction)):
            return TruncSeries.const(self.prec, other)
        if isinstance(other, QPoly):
            return from_qpoly(other, self.prec)
        return NotImplemented

    def reduce_to(self, prec: Precision) -> "TruncSeries":
        if prec.p != self.prec.p or prec.M > self.prec.M or prec.N > self.prec.N:
            raise PrecisionMismatch(f"cannot lift {self.prec} to {prec}")
        return TruncSeries(prec, self.coeffs)

    def _pair(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return None, None, None
        prec = self.prec if other.prec == self.prec else self.prec.meet(other.prec)
        return prec, self.coeffs[: prec.N], other.coeffs[: prec.N]

    # arithmetic -------------------------------------------------------------
    def __add__(self, other):
        prec, a, b = self._pair(other)
        if prec is None:
            return NotImplemented
        return TruncSeries(prec, [x + y for x, y in zip(a, b)])

    __radd__ = __add__

    def __neg__(self):
        return TruncSeries(self.prec, [-x for x in self.coeffs])

    def __sub__(self, other):
        prec, a, b = self._pair(other)
        if prec is None:
            return NotImplemented
        return TruncSeries(prec, [x - y for x, y in zip(a, b)])

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        prec, a, b = self._pair(other)
        if prec is None:
            return NotImplemented
        N = prec.N
        out = [0] * N
        for i, x in enumerate(a):
            if x:
                for j in range(N - i):
                    out[i + j] += x * b[j]
        return TruncSeries(prec, out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            return invert(self) ** (-n)
        result, base = TruncSeries.const(self.prec, 1), self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = TruncSeries.const(self.prec, other)
        if not isinstance(other, TruncSeries):
            return NotImplemented
        if other.prec != self.prec:
            raise PrecisionMismatch(f"comparing {self.prec} with {other.prec}")
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.prec, self.coeffs))

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __bool__(self) -> bool:
        return any(self.coeffs)

    def is_unit(self) -> bool:
        return self.coeffs[0] % self.prec.p != 0

    def valuation_t(self) -> int:
        """Index of the first nonzero coefficient (N when zero)."""
        return next((i for i, c in enumerate(self.coeffs) if c), self.prec.N)

    def div_t(self, k: int = 1) -> "TruncSeries":
        """Exact division by t^k; the result loses k digits of t-precision."""
        if any(self.coeffs[:k]):
            from .exact_core import NonzeroRemainder

            raise NonzeroRemainder("series is not divisible by (q-1)^%d" % k)
        if self.prec.N <= k:
            raise PrecisionTooLow("no t-precision left after division")
        return TruncSeries(Precision(self.prec.p, self.prec.M, self.prec.N - k), self.coeffs[k:])

    def mul_t(self, k: int = 1) -> "TruncSeries":
        return TruncSeries(self.prec, [0] * k + list(self.coeffs))

    def compose(self, u: "TruncSeries") -> "TruncSeries":
        """self(u) for u with zero constant term."""
        if u.coeffs[0] % u.prec.modulus:
            raise ValueError("substituted series must lie in (t)")
        out = TruncSeries(u.prec.meet(self.prec), [])
        for c in reversed(self.coeffs):
            out = out * u + c
        return out

    def lift_ints(self) -> list[int]:
        return list(self.coeffs)

    def __repr__(self):
        return f"TruncSeries({self.prec.p},{self.prec.M},{self.prec.N}; {list(self.coeffs)})"

    def __str__(self):
        terms = [f"{c}" + ("" if i == 0 else ("*t" if i == 1 else f"*t^{i}")) for i, c in enumerate(self.coeffs) if c]
        return (" + ".join(terms) or "0") + f" + O(p^{self.prec.M}, t^{self.prec.N})"

    def to_json(self) -> dict:
        return {"prec": self.prec.to_json(), "coeffs": [str(c) for c in self.coeffs]}


def _residue(c: Union[int, Fraction], mod: int) -> int:
    c = Fraction(c)
    if c.denominator == 1:
        return c.numerator % mod
    try:
        return c.numerator * pow(c.denominator, -1, mod) % mod
    except ValueError as exc:
        raise NotAUnit(f"denominator of {c} is not invertible mod {mod}") from exc


def from_qpoly(a: QPoly, prec: Precision) -> TruncSeries:
    """Rewrite a polynomial in q in the basis t^n (q = 1 + t) and reduce."""
    mod = prec.modulus
    out = TruncSeries(prec, [])
    tq = TruncSeries.q(prec)
    for c in reversed(a.coeffs):
        out = out * tq + TruncSeries(prec, [_residue(c, mod)])
    return out


def invert(a: TruncSeries) -> TruncSeries:
    if not a.is_unit():
        raise NotAUnit(f"constant term {a.coeffs[0]} is divisible by {a.prec.p}")
    prec = a.prec
    mod = prec.modulus
    c0inv = pow(a.coeffs[0], -1, mod)
    out = [0] * prec.N
    out[0] = c0inv
    for n in range(1, prec.N):
        s = sum(a.coeffs[k] * out[n - k] for k in range(1, n + 1))
        out[n] = (-s * c0inv) % mod
    return TruncSeries(prec, out)


@lru_cache(maxsize=None)
def _gr_image_of_t(prec: Precision, r: int) -> TruncSeries:
    q = TruncSeries.q(prec)
    return q ** r - 1


def substitute_gr(a: TruncSeries, r: int) -> TruncSeries:
    """Apply g_r : q -> q^r (phi = g_p, gamma = g_{p+1}, sigma = g_{-1})."""
    return a.compose(_gr_image_of_t(a.prec, r))


def frobenius(a: TruncSeries) -> TruncSeries:
    return substitute_gr(a, a.prec.p)


def gamma(a: TruncSeries) -> TruncSeries:
    return substitute_gr(a, a.prec.p + 1)


def pq(prec: Precision) -> TruncSeries:
    """(p)_q as a series."""
    return from_qpoly(q_integer(prec.p), prec)


def _twisted_diff(a: TruncSeries) -> TruncSeries:
    """t^n -> (n)_{(p+1)_q} t^{n-1}; this is the q^p-derivative on series."""
    prec = a.prec
    x = from_qpoly(q_integer(prec.p + 1), prec)
    out = TruncSeries(prec, [])
    qint = TruncSeries(prec, [])  # (n)_x, starting at n = 0
    xpow = TruncSeries.const(prec, 1)
    tpow = TruncSeries.const(prec, 1)  # t^{n-1}
    for n in range(1, prec.N):
        qint = qint + xpow
        xpow = xpow * x
        if a.coeffs[n]:
            out = out + qint * tpow * a.coeffs[n]
        tpow = tpow.mul_t()
    return TruncSeries(Precision(prec.p, prec.M, max(prec.N - 1, 1)), out.coeffs)


def partial_qp(a: TruncSeries) -> TruncSeries:
    """The q^p-derivative: q^k -> (k)_{q^p} q^{k-1}; t-precision drops by one."""
    return _twisted_diff(a)


def partial_delta(a: TruncSeries) -> TruncSeries:
    """The Delta-derivation (p)_q times the q^p-derivative."""
    d = _twisted_diff(a)
    return d * pq(d.prec)


@lru_cache(maxsize=None)
def lambda_series(prec: Precision) -> TruncSeries:
    """lambda = 1 + (q^2 - q) d_{q^p}((p)_q), a unit with lambda (p)_q = (p)_{q^{p+1}}."""
    return from_qpoly(lambda_poly(prec.p), prec)


# --- Z[zeta_p] --------------------------------------------------------------------

class OKElt:
    """Element of Z[zeta] (exact) or Z[zeta]/p^M on the basis 1, zeta, ..., zeta^{p-2}."""

    __slots__ = ("p", "M", "coeffs")

    def __init__(self, p: int, coeffs: Sequence, M: int | None = None):
        n = p - 1
        c = list(coeffs)
        if len(c) > n:
            c = _reduce_cyclotomic(c, p)
        c += [0] * (n - len(c))
        if M is None:
            c = [x if isinstance(x, Fraction) and x.denominator != 1 else int(x) for x in c]
        else:
            c = [_residue(x, p ** M) for x in c]
        self.p, self.M, self.coeffs = p, M, tuple(c)

    @classmethod
    def zeta(cls, p: int, M: int | None = None) -> "OKElt":
        return cls(p, [0, 1], M)

    @classmethod
    def const(cls, p: int, c, M: int | None = None) -> "OKElt":
        return cls(p, [c], M)

    @property
    def exact(self) -> bool:
        return self.M is None

    def _coerce(self, other) -> "OKElt":
        if isinstance(other, OKElt):
            if other.p != self.p:
                raise PrecisionMismatch("different primes")
            return other
        if isinstance(other, (int, Fraction)):
            return OKElt(self.p, [other], self.M)
        return NotImplemented

    def _M(self, other):
        if self.M is None:
            return other.M
        if other.M is None:
            return self.M
        return min(self.M, other.M)

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return OKElt(self.p, [a + b for a, b in zip(self.coeffs, other.coeffs)], self._M(other))

    __radd__ = __add__

    def __neg__(self):
        return OKElt(self.p, [-a for a in self.coeffs], self.M)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        a, b = self.coeffs, other.coeffs
        prod = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    prod[i + j] += x * y
        return OKElt(self.p, prod, self._M(other))

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = OKElt(self.p, [1], self.M)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = OKElt(self.p, [other], self.M)
        if not isinstance(other, OKElt):
            return NotImplemented
        if other.p != self.p or other.M != self.M:
            raise PrecisionMismatch("OKElt comparison at different precision")
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.p, self.M, self.coeffs))

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def reduce(self, M: int) -> "OKElt":
        if self.M is not None and M > self.M:
            raise PrecisionMismatch("cannot lift an OKElt")
        return OKElt(self.p, self.coeffs, M)

    def mult_matrix(self) -> list[list]:
        """Matrix of multiplication by self on the basis zeta^j (columns = images)."""
        n = self.p - 1
        cols = []
        for j in range(n):
            img = self * OKElt(self.p, [0] * j + [1], self.M)
            cols.append(list(img.coeffs))
        return [[cols[j][i] for j in range(n)] for i in range(n)]

    def norm(self) -> int:
        """Absolute norm (determinant of multiplication), exact elements only."""
        from sympy import Matrix

        return int(Matrix(self.mult_matrix()).det())

    def __repr__(self):
        tag = "" if self.M is None else f" mod {self.p}^{self.M}"
        return f"OKElt(p={self.p}, {list(self.coeffs)}{tag})"

    def to_json(self) -> dict:
        return {"p": self.p, "M": self.M, "coeffs": [str(c) for c in self.coeffs]}


def _reduce_cyclotomic(c: list, p: int) -> list:
    """Reduce a coefficient list in zeta modulo Phi_p(zeta) = 1 + zeta + ... + zeta^{p-1}."""
    c = list(c)
    for i in range(len(c) - 1, p - 2, -1):
        a = c[i]
        if a:
            c[i] = 0
            # zeta^i = zeta^{i-p+1} * zeta^{p-1} = -zeta^{i-p+1} (1 + ... + zeta^{p-2})
            for j in range(p - 1):
                c[i - (p - 1) + j] -= a
    return c[: p - 1]


def reduce_mod_pq(a: TruncSeries) -> OKElt:
    """Image in O_K/p^M' with zeta the class of q.

    A series known modulo t^N only determines its image modulo pi^N, where
    pi = zeta - 1 has pi^{p-1} ~ p, so the result carries M' = min(M, N // (p - 1)).
    """
    p, M, N = a.prec.p, a.prec.M, a.prec.N
    if N < p - 1:
        raise PrecisionTooLow(f"need N >= p - 1 = {p - 1}")
    M_eff = min(M, N // (p - 1))
    mod = p ** M_eff
    # polynomial in t, reduced by Phi_p(1+t) which is monic of degree p-1 in t
    from math import comb

    phi = [comb(p, k + 1) for k in range(p)]  # Phi_p(1+t) = ((1+t)^p - 1)/t
    rem = [x % mod for x in a.coeffs]
    for i in range(len(rem) - 1, p - 2, -1):
        c = rem[i]
        if c:
            for j in range(p):
                rem[i - (p - 1) + j] = (rem[i - (p - 1) + j] - c * phi[j]) % mod
    rem = rem[: p - 1]
    # t = zeta - 1
    out = OKElt(p, [], M_eff)
    tz = OKElt(p, [-1, 1], M_eff)
    for c in reversed(rem):
        out = out * tz + c
    return out
