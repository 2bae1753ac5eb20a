"""Run every registered suite for p in {2, 3, 5} and write JSON reports plus a merged summary."""

import argparse
import json
from dataclasses import replace
from pathlib import Path

from abscalc.cli import SUITES, UsageError, run_suite
from abscalc.reports import Report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="reports")
    ap.add_argument("--primes", default="2,3,5")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    merged = Report("all-suites", {"primes": args.primes})
    for name in sorted(SUITES):
        for p in (int(x) for x in args.primes.split(",")):
            try:
                rep = run_suite(name, replace(SUITES[name].defaults, p=p))
            except UsageError as e:
                print(f"skip    {name} p={p}: {e}")
                continue
            (out / f"{name}-p{p}.json").write_text(rep.dumps())
            merged.extend(rep, prefix=f"{name}:")
            print(f"{'PASS' if rep.ok else 'FAIL':7s} {name} p={p} ({rep.duration:.2f}s)")
    (out / "summary.json").write_text(merged.dumps(with_duration=False))
    print(json.dumps({"cases": len(merged.cases), "ok": merged.ok}))


if __name__ == "__main__":
    main()
