"""Run every acceptance check and print one PASS/FAIL line per check.

    python3 scripts/run_acceptance.py [--jobs 4] [--only 1a 5 ...] [--json results/acceptance.json]

Exit status is the number of failed checks.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from sirhawkes import experiments as E
from sirhawkes._parallel import default_jobs

ROOT = Path(__file__).resolve().parents[1]


def checks(jobs: int, outdir: Path):
    pl = E.RecoveryConfig(
        family="powerlaw", beta=2.5, theta=1.0, c=2.0, pinned={"c": 2.0},
        groups=5, seed=1, restarts=3, beta_tol=None, theta_tol=0.20,
    )
    return {
        "1a": lambda: E.run_recovery(replace(E.RecoveryConfig(), jobs=jobs), "1a recovery exp"),
        "1b": lambda: E.run_recovery(replace(pl, jobs=jobs), "1b recovery powerlaw"),
        "2": lambda: E.run_likelihood(E.LikelihoodConfig(), "2 likelihood correctness"),
        "3": lambda: E.run_transforms(E.TransformConfig(), "3 transform suite"),
        "4": lambda: E.run_simulator(E.SimulatorConfig(), "4 simulator validity"),
        "5": lambda: E.run_calibration(replace(E.CalibrationConfig(), jobs=jobs), "5 GoF calibration"),
        "6": lambda: E.run_holdout(E.HoldoutConfig(), "6 holdout additivity"),
        "7": lambda: E.run_prediction(replace(E.PredictionConfig(), jobs=jobs), "7 prediction pipeline"),
        "8": lambda: E.run_corpus_pipeline(
            E.CorpusConfig(str(ROOT / "data/synthetic_corpus.csv"), str(outdir / "corpus"), jobs=jobs),
            "8 corpus gof pipeline",
        ),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--jobs", type=int, default=default_jobs())
    ap.add_argument("--only", nargs="*")
    ap.add_argument("--outdir", default=str(ROOT / "results"))
    ap.add_argument("--json", help="write all outcomes here")
    args = ap.parse_args(argv)
    outdir = Path(args.outdir)
    table = checks(args.jobs, outdir)
    failed, records = 0, []
    for key, run in table.items():
        if args.only and key not in args.only:
            continue
        outcome = run()
        print(outcome.line(), flush=True)
        failed += not outcome.passed
        records.append({"check": key, "name": outcome.name, "passed": outcome.passed,
                        "summary": outcome.summary, "values": outcome.values, "seconds": outcome.seconds})
    if args.json:
        Path(args.json).parent.mkdir(parents=True, exist_ok=True)
        Path(args.json).write_text(json.dumps(records, indent=2, default=str) + "\n")
    return failed


if __name__ == "__main__":
    sys.exit(main())
