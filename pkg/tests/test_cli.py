import io
import json
import sys
from dataclasses import replace
from pathlib import Path

import pytest

from abscalc.cli import SUITES, SuiteParams, UsageError, golden_diff, parse_qpoly, run, run_suite
from abscalc.reports import Report

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "scripts"))
from make_golden import GOLDEN, fixture_path  # noqa: E402


def cli(*argv):
    out = io.StringIO()
    return run(list(argv), out), out.getvalue()


# --- exit codes ---------------------------------------------------------------------

def test_suite_list():
    code, out = cli("suite", "list")
    assert code == 0 and set(out.split()) == set(SUITES)


def test_suite_run_pass_and_json():
    code, out = cli("suite", "run", "--name", "stirling-orthogonality", "--nmax", "8", "--format", "json")
    assert code == 0
    d = json.loads(out)
    assert d["suite"] and all(c["status"] == "pass" for c in d["cases"])
    assert any(c["control"] for c in d["cases"])


def test_suite_run_failure_exit_1():
    code, _ = cli("suite", "run", "--name", "estimates", "--p", "3", "--nmax", "2")
    assert code == 1


@pytest.mark.parametrize("argv", [
    ("suite", "run", "--name", "no-such-suite"),
    ("suite", "run", "--name", "flip", "--p", "4"),
    ("suite", "run", "--name", "little-poincare", "--p", "2"),
    ("suite", "run", "--name", "flip", "--nmax", "-1"),
    ("taylor", "--poly", "1 + q^", "--p", "3", "--omega-order", "2"),
    ("taylor", "--poly", "q + x", "--p", "3", "--omega-order", "2"),
    ("taylor", "--poly", "q/2", "--p", "3", "--omega-order", "2"),
    ("taylor", "--poly", "q", "--p", "6", "--omega-order", "2"),
    ("table", "--kind", "qbinom", "--n", "-2"),
    ("cohomology", "--module", "Xn", "--n", "1", "--p", "3"),
    ("report", "merge", "/nonexistent/report.json"),
    ("bogus",),
])
def test_usage_errors_exit_2(argv):
    assert cli(*argv)[0] == 2


def test_run_suite_rejects_bad_prime():
    with pytest.raises(UsageError):
        run_suite("flip", SuiteParams(p=9))


# --- other subcommands --------------------------------------------------------------

def test_table_qbinom():
    code, out = cli("table", "--kind", "qbinom", "--n", "3")
    lines = out.splitlines()
    assert code == 0 and len(lines) == 4
    assert lines[2] == "n=2: 1 | q + 1 | 1"


def test_table_stirling_runs():
    for kind in ("stirling-first", "stirling-second"):
        code, out = cli("table", "--kind", kind, "--n", "4", "--qpow", "3")
        assert code == 0 and len(out.splitlines()) == 5


def test_taylor_q_squared():
    from abscalc.cli import _poly_str
    from abscalc.omega_algebra import taylor_theta

    code, out = cli("taylor", "--poly", "q^2", "--p", "2", "--omega-order", "2")
    assert code == 0
    th = taylor_theta(parse_qpoly("q^2"), 2, 2)
    assert out.splitlines() == [f"w{{{k}}}: {_poly_str(th[k])}" for k in range(3)]
    assert out.splitlines()[0] == "w{0}: q**2"


def test_parse_qpoly():
    assert parse_qpoly("1 + 2*q - q^3").coeffs[:4] == parse_qpoly("-q**3+2*q+1").coeffs[:4]
    with pytest.raises(UsageError):
        parse_qpoly("q*y")


@pytest.mark.parametrize("module,n,p,h1", [("Gn", 2, 2, [4]), ("Gn", 4, 2, [8]), ("Gn", 3, 3, [3, 9])])
def test_cohomology_cmd(module, n, p, h1):
    code, out = cli("cohomology", "--module", module, "--n", str(n), "--p", str(p))
    assert code == 0
    assert json.loads(out.splitlines()[0])["order_H1"] in (str(_prod(h1)), _prod(h1))
    assert out.splitlines()[1] == f"H1 invariant factors: {h1}"


def _prod(xs):
    out = 1
    for x in xs:
        out *= x
    return out


@pytest.mark.parametrize("module", ["Fn", "BK"])
def test_cohomology_other_modules(module):
    code, out = cli("cohomology", "--module", module, "--n", "1", "--p", "3")
    assert code == 0 and "H1 invariant factors" in out


def test_report_merge(tmp_path):
    a = run_suite("stirling-qbinom", replace(SUITES["stirling-qbinom"].defaults, nmax=5))
    b = run_suite("estimates", SuiteParams(p=3, nmax=2))
    pa, pb = tmp_path / "a.json", tmp_path / "b.json"
    pa.write_text(a.dumps())
    pb.write_text(b.dumps())
    code, out = cli("report", "merge", str(pa))
    assert code == 0 and len(json.loads(out)["cases"]) == len(a.cases)
    code, out = cli("report", "merge", str(pa), str(pb))
    merged = json.loads(out)
    assert code == 1 and len(merged["cases"]) == len(a.cases) + len(b.cases)


# --- golden fixtures ----------------------------------------------------------------

@pytest.mark.parametrize("name,p", GOLDEN)
def test_golden(name, p):
    rep = run_suite(name, replace(SUITES[name].defaults, p=p))
    code, diffs = golden_diff(rep, fixture_path(name, p))
    assert code == 0, diffs


def test_golden_diff_codes(tmp_path):
    rep = run_suite("stirling-orthogonality", replace(SUITES["stirling-orthogonality"].defaults, p=3))
    fx = fixture_path("stirling-orthogonality", 3)
    assert golden_diff(rep, fx) == (0, [])
    # perturb one case status
    d = json.loads(fx.read_text())
    d["cases"][0]["status"] = "fail"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    code, diffs = golden_diff(rep, bad)
    assert code == 1 and any("/cases[0]/status" in x for x in diffs)
    # different parameters: header mismatch
    other = run_suite("stirling-orthogonality", replace(SUITES["stirling-orthogonality"].defaults, p=5))
    code, diffs = golden_diff(other, fx)
    assert code == 1 and diffs[0].startswith("header mismatch")
    # missing and unparseable
    assert golden_diff(rep, tmp_path / "none.json")[0] == 2
    junk = tmp_path / "junk.json"
    junk.write_text("{not json")
    assert golden_diff(rep, junk)[0] == 2


def test_golden_via_cli():
    fx = fixture_path("flip", 3)
    code, _ = cli("suite", "run", "--name", "flip", "--p", "3", "--golden", str(fx))
    assert code == 0
    code, _ = cli("suite", "run", "--name", "flip", "--p", "5", "--golden", str(fx))
    assert code == 1


def test_report_round_trip():
    rep = run_suite("cohomology", SuiteParams(p=3))
    back = Report.from_json(json.loads(rep.dumps()))
    assert back.to_json(with_duration=False) == rep.to_json(with_duration=False)
