"""Command-line front end: verification suites, tables, Taylor expansions, cohomology, reports."""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from . import coalgebra, connections, cyclotomic, exact_core, omega_algebra
from .padic_series import Precision, is_prime
from .reports import Report


class UsageError(ValueError):
    """Malformed command-line input (exit code 2)."""


@dataclass(frozen=True)
class SuiteParams:
    p: int = 2
    M: int = 4
    N: int = 6
    K: int | None = None
    nmax: int = 4

    def k_or(self, default: int) -> int:
        return default if self.K is None else self.K


@dataclass(frozen=True)
class Suite:
    """A named verification: default parameters and a runner.

    ``control`` says how the negative control is produced: "wrap" reruns the
    runner with mutate=True and expects a failure, "internal" means the runner
    records its own control case when asked to.
    """

    name: str
    run: Callable[[SuiteParams, bool], Report]
    defaults: SuiteParams = field(default_factory=SuiteParams)
    control: str = "wrap"
    odd_only: bool = False
    doc: str = ""


def _combinatorial(suite: str) -> Callable[[SuiteParams, bool], Report]:
    def run(P: SuiteParams, mutate: bool) -> Report:
        mut = {("first", 2, 1): 1, ("second", 2, 1): 1} if mutate else None
        rep = Report(suite, {"p": P.p, "nmax": P.nmax})
        for r in sorted({1, P.p}):
            rep.extend(exact_core.verify_combinatorics(suite, P.nmax, r, mut))
        return rep

    return run


def _estimates(P: SuiteParams, mutate: bool) -> Report:
    rep = Report("estimates", {"p": P.p, "nmax": P.nmax})
    for n in range(1, P.nmax + 1):
        rep.extend(coalgebra.verify_estimates(n, P.p, mutate))
    return rep


def _gamma(P: SuiteParams, mutate: bool) -> Report:
    prec = Precision(P.p, P.M, P.N)
    rep = Report("gamma", {"p": P.p, "M": P.M, "N": P.N})
    for name, n in (("trivial", 0), ("Fn", 1), ("BK", 1)):
        rep.extend(connections.gamma_roundtrip(connections.build_example(name, prec, n), mutate=mutate))
    return rep


def _omega_identities(P: SuiteParams, mutate: bool) -> Report:
    K = P.k_or(4)
    rep = Report("omega-identities", {"p": P.p, "K": K, "nmax": P.nmax})
    rep.extend(omega_algebra.verify_estcong(P.p, K, mutate))
    rep.extend(omega_algebra.verify_transan(P.p, P.nmax, 2, K, mutate))
    return rep


SUITES: dict[str, Suite] = {}


def register(s: Suite) -> None:
    SUITES[s.name] = s


for _name in exact_core.COMBINATORIAL_SUITES:
    register(Suite(_name, _combinatorial(_name), SuiteParams(nmax=10), doc="twisted Stirling identities for r in {1, p}"))

register(Suite("taylor-closed-form", lambda P, m: omega_algebra.verify_taylor_closed_form(P.p, P.nmax, P.k_or(6), m),
               SuiteParams(nmax=12, K=6), doc="Taylor coefficients of q^n"))
register(Suite("L-omega", lambda P, m: omega_algebra.verify_L_omega(P.p, P.k_or(6), m), SuiteParams(K=6)))
register(Suite("flip", lambda P, m: omega_algebra.verify_flip(P.p, P.k_or(P.p - 1), P.M, P.N, m),
               SuiteParams(M=6, N=8), doc="flip involution and tau(L) = L^{-1}"))
register(Suite("omega-identities", _omega_identities, SuiteParams(K=4, nmax=4)))
register(Suite("basis-change", lambda P, m: omega_algebra.verify_basis_change(P.nmax, P.p, m), SuiteParams(nmax=8)))
register(Suite("comult", lambda P, m: coalgebra.verify_comult(P.p, P.nmax, m), SuiteParams(nmax=4)))
register(Suite("coassoc", lambda P, m: coalgebra.verify_coassoc(P.p, P.nmax, mutate=m), SuiteParams(nmax=4)))
register(Suite("estimates", _estimates, SuiteParams(nmax=3)))
register(Suite("modp", lambda P, m: coalgebra.verify_modp(P.nmax, P.p, m), SuiteParams(nmax=4)))
register(Suite("rlin", lambda P, m: coalgebra.verify_rlin(P.p, P.M, P.N, P.k_or(P.p - 1), mutate=m)))
register(Suite("little-poincare",
               lambda P, m: coalgebra.verify_little_poincare(P.p, P.M, P.N, P.k_or(P.p - 1), mutate=m),
               SuiteParams(p=3), control="internal", odd_only=True))
register(Suite("hyperstrat", lambda P, m: connections.verify_hyperstrat(P.p, P.M, P.N, P.k_or(4), m),
               SuiteParams(p=5, M=4, N=8, K=4), control="internal", odd_only=True))
register(Suite("connections", lambda P, m: connections.verify_connections(P.p, P.M, P.N, min(P.nmax, 3), m),
               SuiteParams(nmax=3), control="internal"))
register(Suite("frobenius", lambda P, m: connections.verify_frobenius(P.p, P.M, P.N, m), control="internal"))
register(Suite("gamma", _gamma))
register(Suite("cyclotomic", lambda P, m: cyclotomic.verify_cyclotomic(P.p, P.M, P.nmax, P.k_or(3), mutate=m),
               SuiteParams(nmax=8, K=3), control="internal"))
register(Suite("cohomology", lambda P, m: cyclotomic.verify_cohomology(P.p, m), control="internal"))


def run_suite(name: str, params: SuiteParams | None = None, controls: bool = True) -> Report:
    """Run a registered suite; with ``controls`` the report carries a negative-control case."""
    if name not in SUITES:
        raise UsageError(f"unknown suite {name!r}; known: {', '.join(sorted(SUITES))}")
    s = SUITES[name]
    P = params or s.defaults
    if not is_prime(P.p):
        raise UsageError(f"p = {P.p} is not prime")
    if s.odd_only and P.p == 2:
        raise UsageError(f"suite {name} needs an odd prime")
    t0 = time.perf_counter()
    if s.control == "internal":
        rep = s.run(P, controls)
    else:
        rep = s.run(P, False)
        if controls:
            rep.add_control(f"{name}/control/p={P.p}", s.run(P, True))
    rep.duration = time.perf_counter() - t0
    return rep


# --- golden fixtures ----------------------------------------------------------------------------

def _diff(a, b, path: str, out: list) -> None:
    if isinstance(a, dict) and isinstance(b, dict):
        for k in sorted(set(a) | set(b)):
            if k not in a or k not in b:
                out.append(f"{path}/{k}: present on one side only")
            else:
                _diff(a[k], b[k], f"{path}/{k}", out)
    elif isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            out.append(f"{path}: length {len(a)} != {len(b)}")
        for i, (x, y) in enumerate(zip(a, b)):
            _diff(x, y, f"{path}[{i}]", out)
    elif a != b:
        out.append(f"{path}: {json.dumps(a)} != {json.dumps(b)}")


def golden_diff(report: Report, fixture: str | Path) -> tuple[int, list[str]]:
    """Compare a report with a fixture (durations ignored); returns (exit code, differences)."""
    path = Path(fixture)
    if not path.exists():
        return 2, [f"missing fixture {path}"]
    try:
        want = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        return 2, [f"fixture {path} does not parse: {e}"]
    want.pop("duration", None)
    got = report.to_json(with_duration=False)
    diffs: list[str] = []
    for key in ("suite", "params"):
        if got.get(key) != want.get(key):
            diffs.append(f"header mismatch at /{key}: {json.dumps(got.get(key))} != {json.dumps(want.get(key))}")
    if diffs:
        return 1, diffs
    _diff(got, want, "", diffs)
    return (1 if diffs else 0), diffs


# --- other subcommands ----------------------------------------------------------------------------

def parse_qpoly(text: str) -> exact_core.IntQPoly:
    """Integer combination of powers of q, e.g. '1 + 2*q - q^3'."""
    import sympy

    q = sympy.Symbol("q")
    try:
        expr = sympy.sympify(text.replace("^", "**"), locals={"q": q}, rational=True)
        poly = sympy.Poly(sympy.expand(expr), q)
    except (sympy.SympifyError, sympy.PolynomialError, TypeError, SyntaxError) as e:
        raise UsageError(f"cannot parse q-polynomial {text!r}: {e}") from None
    if poly.free_symbols - {q}:
        raise UsageError(f"only the variable q is allowed in {text!r}")
    coeffs = poly.all_coeffs()[::-1]
    if any(not c.is_integer for c in coeffs):
        raise UsageError(f"non-integer coefficient in {text!r}")
    return exact_core.IntQPoly([int(c) for c in coeffs])


def _poly_str(a) -> str:
    import sympy

    q = sympy.Symbol("q")
    return str(sympy.Poly(list(reversed(a.coeffs)) or [0], q).as_expr()) if a.coeffs else "0"


def table_rows(kind: str, n: int, r: int = 1) -> list[list]:
    if kind == "qbinom":
        return [[exact_core.q_binomial(i, k, r) for k in range(i + 1)] for i in range(n + 1)]
    sk = {"stirling-first": "first", "stirling-second": "second"}[kind]
    return [[exact_core.stirling_q(sk, i, k, r) for k in range(i + 1)] for i in range(n + 1)]


def _cohomology(module: str, n: int, p: int):
    from .padic_series import OKElt, reduce_mod_pq

    if module == "Gn":
        return connections.rank1_cohomology_OK(cyclotomic.a_n(n, p))
    if module == "Fn":
        # F_n reduced mod (p)_q: d_Delta acts on the generator by alpha_n evaluated at zeta
        a = connections.alpha_exact(n, p)
        return connections.rank1_cohomology_OK(OKElt(p, list(a.coeffs)))
    if module == "BK":
        # image mod (p)_q is known mod p^8; invariant factors below p^8 are exact
        prec = Precision(p, 8, 8 * (p - 1))
        x = reduce_mod_pq(connections.bk_scalar(n, prec))
        return connections.rank1_cohomology_OK(OKElt(p, list(x.coeffs)))
    raise UsageError(f"unknown module {module!r}")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="abscalc", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    suite = sub.add_parser("suite", help="verification suites")
    ssub = suite.add_subparsers(dest="suite_cmd", required=True)
    srun = ssub.add_parser("run")
    srun.add_argument("--name", required=True)
    srun.add_argument("--p", type=int)
    srun.add_argument("--padic-prec", type=int, dest="M")
    srun.add_argument("--t-prec", type=int, dest="N")
    srun.add_argument("--omega-order", type=int, dest="K")
    srun.add_argument("--nmax", type=int)
    srun.add_argument("--format", choices=("text", "json"), default="text")
    srun.add_argument("--golden", help="fixture to compare against")
    srun.add_argument("--no-controls", action="store_true", help="skip the negative-control case")
    ssub.add_parser("list")

    tab = sub.add_parser("table", help="q-binomial and twisted Stirling tables")
    tab.add_argument("--kind", required=True, choices=("qbinom", "stirling-first", "stirling-second"))
    tab.add_argument("--n", type=int, required=True)
    tab.add_argument("--qpow", type=int, default=1)

    tay = sub.add_parser("taylor", help="Taylor expansion theta(f) in the w{k} basis")
    tay.add_argument("--poly", required=True)
    tay.add_argument("--p", type=int, required=True)
    tay.add_argument("--omega-order", type=int, required=True, dest="K")

    coh = sub.add_parser("cohomology", help="H^0, H^1 of a rank-one reduced module")
    coh.add_argument("--module", required=True, choices=("Fn", "Gn", "BK"))
    coh.add_argument("--n", type=int, required=True)
    coh.add_argument("--p", type=int, required=True)

    rep = sub.add_parser("report", help="report files")
    rsub = rep.add_subparsers(dest="report_cmd", required=True)
    merge = rsub.add_parser("merge")
    merge.add_argument("paths", nargs="+")
    return ap


def _cmd_suite(args, out) -> int:
    if args.suite_cmd == "list":
        for name in sorted(SUITES):
            out.write(f"{name}\n")
        return 0
    if args.name not in SUITES:
        raise UsageError(f"unknown suite {args.name!r}; known: {', '.join(sorted(SUITES))}")
    base = SUITES[args.name].defaults
    upd = {k: v for k, v in (("p", args.p), ("M", args.M), ("N", args.N), ("K", args.K), ("nmax", args.nmax)) if v is not None}
    if any(v < 0 for v in upd.values()):
        raise UsageError("parameters must be non-negative")
    rep = run_suite(args.name, replace(base, **upd), controls=not args.no_controls)
    out.write(rep.dumps() if args.format == "json" else rep.text())
    code = 0 if rep.ok else 1
    if args.golden:
        gcode, diffs = golden_diff(rep, args.golden)
        for d in diffs:
            sys.stderr.write(f"golden: {d}\n")
        code = max(code, gcode)
    return code


def _cmd_table(args, out) -> int:
    if args.n < 0 or args.qpow < 0:
        raise UsageError("--n and --qpow must be non-negative")
    for i, row in enumerate(table_rows(args.kind, args.n, args.qpow)):
        out.write(f"n={i}: " + " | ".join(_poly_str(a) for a in row) + "\n")
    return 0


def _cmd_taylor(args, out) -> int:
    if not is_prime(args.p) or args.K < 0:
        raise UsageError("need a prime --p and a non-negative --omega-order")
    f = parse_qpoly(args.poly)
    th = omega_algebra.taylor_theta(f, args.K, args.p)
    for k in range(args.K + 1):
        out.write(f"w{{{k}}}: {_poly_str(th[k])}\n")
    return 0


def _cmd_cohomology(args, out) -> int:
    if not is_prime(args.p) or args.n < 0:
        raise UsageError("need a prime --p and n >= 0")
    h = _cohomology(args.module, args.n, args.p)
    out.write(json.dumps({"module": args.module, "n": args.n, **h.to_json(), "order_H1": h.order_H1},
                         sort_keys=True) + "\n")
    out.write(f"H1 invariant factors: {h.H1}\n")
    return 0


def _cmd_report(args, out) -> int:
    merged = Report("merged", {"sources": [str(p) for p in args.paths]})
    for path in args.paths:
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read report {path}: {e}") from None
        r = Report.from_json(d)
        merged.extend(r, prefix=f"{r.suite}:")
        merged.duration += r.duration
    out.write(merged.dumps())
    return 0 if merged.ok else 1


def run(argv: list[str] | None = None, out=None) -> int:
    """Entry point; returns 0 (all pass), 1 (verification failure) or 2 (usage error)."""
    out = out or sys.stdout
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    handlers = {"suite": _cmd_suite, "table": _cmd_table, "taylor": _cmd_taylor,
                "cohomology": _cmd_cohomology, "report": _cmd_report}
    try:
        return handlers[args.cmd](args, out)
    except UsageError as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    except (ValueError, omega_algebra.OrderCapTooHigh) as e:
        sys.stderr.write(f"error: {e}\n")
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
