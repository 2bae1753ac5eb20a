"""Exact polynomials in q, q-analogs, twisted Stirling numbers and their identities."""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import comb
from typing import Iterable, Union

from .reports import Report

Number = Union[int, Fraction]


class NonzeroRemainder(ArithmeticError):
    """Raised when an exact division leaves a remainder."""


def _strip(c: list) -> list:
    while c and c[-1] == 0:
        c.pop()
    return c


def _pack(c: tuple, nbytes: int) -> int:
    pos = b"".join(max(x, 0).to_bytes(nbytes, "little") for x in c)
    neg = b"".join(max(-x, 0).to_bytes(nbytes, "little") for x in c)
    return int.from_bytes(pos, "little") - int.from_bytes(neg, "little")


def _kronecker_mul(a: tuple, b: tuple) -> list:
    """Integer polynomial product through one big-integer multiplication."""
    bound = max(map(abs, a)) * max(map(abs, b)) * min(len(a), len(b))
    nbytes = (bound.bit_length() + 2 + 7) // 8
    n = len(a) + len(b) - 1
    half = 1 << (8 * nbytes - 1)
    offset = int.from_bytes(half.to_bytes(nbytes, "little") * n, "little")
    raw = (_pack(a, nbytes) * _pack(b, nbytes) + offset).to_bytes(nbytes * n, "little")
    return [int.from_bytes(raw[i * nbytes:(i + 1) * nbytes], "little") - half for i in range(n)]


class QPoly:
    """Polynomial in q stored as a coefficient tuple (index = degree)."""

    __slots__ = ("coeffs",)
    _conv = staticmethod(int)

    def __init__(self, coeffs: Iterable[Number] = ()):
        self.coeffs = tuple(_strip([self._conv(c) for c in coeffs]))

    @classmethod
    def _wrap(cls, coeffs: list) -> "QPoly":
        """Build from coefficients already of the right type (skips conversion)."""
        obj = object.__new__(cls)
        obj.coeffs = tuple(_strip(coeffs))
        return obj

    # construction -------------------------------------------------------
    @classmethod
    def const(cls, c: Number) -> "QPoly":
        return cls([c])

    @classmethod
    def monomial(cls, n: int, c: Number = 1) -> "QPoly":
        return cls([0] * n + [c])

    @classmethod
    def q(cls) -> "QPoly":
        return cls([0, 1])

    # coercion -----------------------------------------------------------
    @staticmethod
    def _result_cls(a, b):
        return RatQPoly if isinstance(a, RatQPoly) or isinstance(b, RatQPoly) else IntQPoly

    def _coerce(self, other):
        if isinstance(other, QPoly):
            return other
        if isinstance(other, Fraction):
            return RatQPoly([other])
        if isinstance(other, int):
            return type(self)([other])
        return NotImplemented

    # basic queries ------------------------------------------------------
    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __getitem__(self, i: int) -> Number:
        return self.coeffs[i] if 0 <= i < len(self.coeffs) else 0

    def __eq__(self, other) -> bool:
        other = self._coerce(other) if not isinstance(other, QPoly) else other
        if other is NotImplemented:
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        a, b = self.coeffs, other.coeffs
        n = max(len(a), len(b))
        out = [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)]
        if type(self) is type(other):
            return type(self)._wrap(out)
        return self._result_cls(self, other)(out)

    __radd__ = __add__

    def __neg__(self):
        return type(self)._wrap([-c for c in self.coeffs])

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
        cls = self._result_cls(self, other)
        if not a or not b:
            return cls()
        if cls is IntQPoly and min(len(a), len(b)) > 8:
            return cls._wrap(_kronecker_mul(a, b))
        out = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    out[i + j] += x * y
        return cls._wrap(out) if type(self) is type(other) else cls(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power of a polynomial")
        result, base = type(self)([1]), self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def shift(self, k: int):
        """Multiply by q^k (k >= 0)."""
        return type(self)([0] * k + list(self.coeffs)) if self.coeffs else self

    def subs_power(self, r: int):
        """Substitute q -> q^r for r >= 1."""
        if r < 1:
            raise ValueError("r must be positive")
        if not self.coeffs:
            return self
        out = [0] * (r * self.degree + 1)
        for i, c in enumerate(self.coeffs):
            out[r * i] = c
        return type(self)(out)

    def compose(self, other: "QPoly"):
        """Return self(other) by Horner's rule."""
        result = self._result_cls(self, other)()
        for c in reversed(self.coeffs):
            result = result * other + c
        return result

    def __call__(self, x):
        result = 0
        for c in reversed(self.coeffs):
            result = result * x + c
        return result

    def divmod_monic(self, d: "QPoly"):
        if not d.coeffs or d.coeffs[-1] != 1:
            raise ValueError("divisor must be monic")
        cls = self._result_cls(self, d)
        rem = list(self.coeffs)
        dd = d.degree
        if len(rem) <= dd:
            return cls(), cls(rem)
        quo = [0] * (len(rem) - dd)
        for i in range(len(rem) - 1, dd - 1, -1):
            c = rem[i]
            if c:
                quo[i - dd] = c
                for j, dc in enumerate(d.coeffs):
                    rem[i - dd + j] -= c * dc
        return cls(quo), cls(rem[:dd])

    def to_rational(self) -> "RatQPoly":
        return RatQPoly(self.coeffs)

    def map_coeffs(self, f):
        return type(self)([f(c) for c in self.coeffs])

    # display ------------------------------------------------------------
    def __repr__(self) -> str:
        return f"{type(self).__name__}({list(self.coeffs)!r})"

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        terms = []
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            mono = "" if i == 0 else ("q" if i == 1 else f"q^{i}")
            if mono and c == 1:
                s = mono
            elif mono and c == -1:
                s = "-" + mono
            else:
                s = f"{c}*{mono}" if mono else f"{c}"
            terms.append(s)
        return " + ".join(terms).replace("+ -", "- ")

    def to_json(self) -> list[str]:
        return [str(c) for c in self.coeffs]


class IntQPoly(QPoly):
    """Polynomial in q with integer coefficients."""

    __slots__ = ()

    @staticmethod
    def _conv(c):
        if isinstance(c, Fraction):
            if c.denominator != 1:
                raise ValueError(f"non-integral coefficient {c}")
            return int(c.numerator)
        return int(c)


class RatQPoly(QPoly):
    """Polynomial in q with rational coefficients."""

    __slots__ = ()
    _conv = staticmethod(Fraction)

    def is_integral(self) -> bool:
        return all(c.denominator == 1 for c in self.coeffs)

    def to_int(self) -> IntQPoly:
        return IntQPoly(self.coeffs)


Q = IntQPoly.q()
ONE = IntQPoly([1])
ZERO = IntQPoly()


def euclid_div_exact(a: QPoly, d: QPoly) -> QPoly:
    """Quotient of ``a`` by the monic ``d``; raises NonzeroRemainder unless exact."""
    quo, rem = a.divmod_monic(d)
    if rem:
        raise NonzeroRemainder(f"{a} is not divisible by {d}")
    return quo


def p_integrality(a: QPoly, p: int) -> bool:
    return all(Fraction(c).denominator % p for c in a.coeffs)


# --- q-analogs ---------------------------------------------------------------

@lru_cache(maxsize=None)
def q_integer(n: int, r: int = 1) -> IntQPoly:
    """(n)_{q^r} = 1 + q^r + ... + q^{r(n-1)}."""
    if n < 0:
        raise ValueError("n must be natural")
    out = [0] * (r * (n - 1) + 1) if n else []
    for k in range(n):
        out[r * k] = 1
    return IntQPoly(out)


@lru_cache(maxsize=None)
def q_factorial(n: int, r: int = 1) -> IntQPoly:
    out = ONE
    for j in range(1, n + 1):
        out = out * q_integer(j, r)
    return out


@lru_cache(maxsize=None)
def q_binomial(n: int, k: int, r: int = 1) -> IntQPoly:
    """Gaussian binomial in q^r from the rule C(n+1,k) = C(n,k-1) + q^k C(n,k)."""
    if k < 0 or n < 0:
        return ZERO
    if k == 0:
        return ONE
    if n == 0:
        return ZERO
    return q_binomial(n - 1, k - 1, r) + q_binomial(n - 1, k, r).shift(r * k)


@lru_cache(maxsize=None)
def _stirling_row(kind: str, n: int, r: int) -> tuple[IntQPoly, ...]:
    if n == 0:
        return (ONE,)
    prev = _stirling_row(kind, n - 1, r) + (ZERO,)
    out = [ZERO]
    for k in range(1, n + 1):
        if kind == "first":
            out.append(prev[k - 1] - q_integer(n - 1, r) * prev[k])
        else:
            out.append(prev[k - 1] + q_integer(k, r) * prev[k])
    return tuple(out)


def stirling_q(kind: str, n: int, k: int, r: int = 1) -> IntQPoly:
    """Twisted Stirling number s_{q^r}(n,k) (kind='first') or S_{q^r}(n,k) (kind='second')."""
    if kind not in ("first", "second"):
        raise ValueError(f"unknown kind {kind!r}")
    if k < 0 or k > n:
        return ZERO
    return _stirling_row(kind, n, r)[k]


def stirling_table(kind: str, n_max: int, r: int = 1) -> list[list[IntQPoly]]:
    return [[stirling_q(kind, n, k, r) for k in range(n_max + 1)] for n in range(n_max + 1)]


def elementary_symmetric(xs: list[QPoly], k: int) -> QPoly:
    """e_k(xs) read off the generating product prod(1 + x_i z)."""
    coeffs: list[QPoly] = [ONE]
    for x in xs:
        nxt = coeffs + [ZERO]
        for j in range(len(coeffs)):
            nxt[j + 1] = nxt[j + 1] + x * coeffs[j]
        coeffs = nxt
    return coeffs[k] if 0 <= k < len(coeffs) else ZERO


# --- two-variable polynomials -------------------------------------------------

class BiPoly:
    """Sparse polynomial in X, Y with IntQPoly coefficients; keys are (deg_X, deg_Y)."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict | None = None):
        self.terms = {k: v for k, v in (terms or {}).items() if v}

    @classmethod
    def X(cls) -> "BiPoly":
        return cls({(1, 0): ONE})

    @classmethod
    def Y(cls) -> "BiPoly":
        return cls({(0, 1): ONE})

    @classmethod
    def one(cls) -> "BiPoly":
        return cls({(0, 0): ONE})

    def __add__(self, other: "BiPoly") -> "BiPoly":
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, ZERO) + v
        return BiPoly(out)

    def __neg__(self) -> "BiPoly":
        return BiPoly({k: -v for k, v in self.terms.items()})

    def __sub__(self, other: "BiPoly") -> "BiPoly":
        return self + (-other)

    def __mul__(self, other) -> "BiPoly":
        if isinstance(other, QPoly) or isinstance(other, int):
            return BiPoly({k: v * other for k, v in self.terms.items()})
        out: dict = {}
        for (a, b), u in self.terms.items():
            for (c, d), v in other.terms.items():
                key = (a + c, b + d)
                out[key] = out.get(key, ZERO) + u * v
        return BiPoly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "BiPoly":
        out = BiPoly.one()
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, BiPoly) and self.terms == other.terms

    def __repr__(self) -> str:
        return f"BiPoly({ {k: str(v) for k, v in sorted(self.terms.items())} })"


def falling_twisted(n: int, r: int = 1) -> BiPoly:
    """X_n = prod_{k<n} (X - (k)_{q^r} Y)."""
    X, Y = BiPoly.X(), BiPoly.Y()
    out = BiPoly.one()
    for k in range(n):
        out = out * (X - Y * q_integer(k, r))
    return out


# --- identity suites ------------------------------------------------------------

COMBINATORIAL_SUITES = (
    "stirling-orthogonality",
    "stirling-elementary-symmetric",
    "stirling-qbinom",
    "funstir",
)


def _check_orthogonality(n_max, r, s, S, rep, cid):
    for n, m in product(range(n_max + 1), repeat=2):
        delta = ONE if n == m else ZERO
        lhs = ZERO
        rhs = ZERO
        for j in range(n_max + 1):
            lhs = lhs + s(n, j) * S(j, m)
            rhs = rhs + S(n, j) * s(j, m)
        if lhs != delta:
            rep.add(cid, False, {"n": n, "m": m, "order": "sS"})
            return
        if rhs != delta:
            rep.add(cid, False, {"n": n, "m": m, "order": "Ss"})
            return
    rep.add(cid, True)


def _check_elementary(n_max, r, s, rep, cid):
    for n in range(n_max + 1):
        xs = [q_integer(i, r) for i in range(1, n)]
        for k in range(n + 1):
            e = elementary_symmetric(xs, n - k)
            if s(n, k) != (e if (n - k) % 2 == 0 else -e):
                rep.add(cid, False, {"n": n, "k": k})
                return
    rep.add(cid, True)


def _check_qbinom(n_max, r, s, rep, cid):
    qm1 = IntQPoly([-1, 1]).subs_power(r)
    for n in range(n_max + 1):
        for k in range(n + 1):
            rhs = ZERO
            for j in range(k, n + 1):
                term = q_binomial(n, j, r).shift(r * comb(n - j, 2)) * comb(j, k)
                rhs = rhs + (term if (n - j) % 2 == 0 else -term)
            if qm1 ** (n - k) * s(n, k) != rhs:
                rep.add(cid, False, {"n": n, "k": k})
                return
    rep.add(cid, True)


def _check_funstir(n_max, r, s, S, rep, cid):
    X, Y = BiPoly.X(), BiPoly.Y()
    falling = [falling_twisted(k, r) for k in range(n_max + 1)]
    for n in range(n_max + 1):
        expand = BiPoly()
        for k in range(n + 1):
            expand = expand + (X ** k) * (Y ** (n - k)) * s(n, k)
        if falling[n] != expand:
            rep.add(cid, False, {"n": n, "identity": "falling"})
            return
        back = BiPoly()
        for k in range(n + 1):
            back = back + falling[k] * (Y ** (n - k)) * S(n, k)
        if X ** n != back:
            rep.add(cid, False, {"n": n, "identity": "power"})
            return
    rep.add(cid, True)


def verify_combinatorics(suite: str, n_max: int, r: int = 1, mutate: dict | None = None) -> Report:
    """Check one family of twisted Stirling identities for all indices up to ``n_max``.

    ``mutate`` maps (kind, n, k) to an additive perturbation; it exists so the
    harness can show that it notices a wrong table entry.
    """
    if suite not in COMBINATORIAL_SUITES:
        raise ValueError(f"unknown suite identifier {suite!r}")
    mutate = mutate or {}

    def s(n, k):
        return stirling_q("first", n, k, r) + mutate.get(("first", n, k), 0)

    def S(n, k):
        return stirling_q("second", n, k, r) + mutate.get(("second", n, k), 0)

    rep = Report(suite, {"n_max": n_max, "r": r})
    cid = f"{suite}/r={r}"
    if suite == "stirling-orthogonality":
        _check_orthogonality(n_max, r, s, S, rep, cid)
    elif suite == "stirling-elementary-symmetric":
        _check_elementary(n_max, r, s, rep, cid)
    elif suite == "stirling-qbinom":
        _check_qbinom(n_max, r, s, rep, cid)
    else:
        _check_funstir(n_max, r, s, S, rep, cid)
    return rep


# --- derivations on polynomials ------------------------------------------------------

def partial_qp_poly(a: QPoly, p: int) -> QPoly:
    """q^p-derivative on polynomials: q^k -> (k)_{q^p} q^{k-1}.

    Computed as (a(q^{p+1}) - a(q)) / (q (q^p - 1)), an exact division.
    """
    diff = a.subs_power(p + 1) - a
    if not diff:
        return type(a)()
    return euclid_div_exact(type(diff)(diff.coeffs[1:]), IntQPoly([-1] + [0] * (p - 1) + [1]))


def partial_delta_poly(a: QPoly, p: int) -> QPoly:
    """Delta-derivation on polynomials: (p)_q times the q^p-derivative, so q^k -> (pk)_q q^{k-1}."""
    return q_integer(p) * partial_qp_poly(a, p)


def gr_poly(a: QPoly, r: int) -> QPoly:
    """g_r : q -> q^r on polynomials (r >= 1)."""
    return a.subs_power(r)


@lru_cache(maxsize=None)
def lambda_poly(p: int) -> IntQPoly:
    return IntQPoly([1]) + IntQPoly([0, -1, 1]) * partial_qp_poly(q_integer(p), p)
