"""Regenerate the golden report fixtures under tests/golden/v1.

Run after an intentional change to a suite's case set; review the diff before committing.
"""

import argparse
from dataclasses import replace
from pathlib import Path

from abscalc.cli import SUITES, run_suite

# fast suites only; the slow ones are covered by the acceptance tests
GOLDEN = [
    ("stirling-orthogonality", 3),
    ("stirling-qbinom", 2),
    ("funstir", 5),
    ("taylor-closed-form", 3),
    ("L-omega", 5),
    ("flip", 3),
    ("comult", 3),
    ("modp", 3),
    ("estimates", 3),
    ("connections", 3),
    ("frobenius", 2),
    ("gamma", 5),
    ("cyclotomic", 3),
    ("cohomology", 2),
    ("cohomology", 3),
]

ROOT = Path(__file__).resolve().parent.parent / "tests" / "golden" / "v1"


def fixture_path(name: str, p: int) -> Path:
    return ROOT / f"{name}-p{p}.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--check", action="store_true", help="only report which fixtures would change")
    args = ap.parse_args()
    ROOT.mkdir(parents=True, exist_ok=True)
    changed = 0
    for name, p in GOLDEN:
        text = run_suite(name, replace(SUITES[name].defaults, p=p)).dumps(with_duration=False)
        path = fixture_path(name, p)
        if path.exists() and path.read_text() == text:
            continue
        changed += 1
        print(f"{'would update' if args.check else 'wrote'} {path.name}")
        if not args.check:
            path.write_text(text)
    print(f"{changed} fixture(s) {'differ' if args.check else 'updated'}")


if __name__ == "__main__":
    main()
