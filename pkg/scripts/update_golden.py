"""Rewrite tests/golden/ from the fixture trace.

Run after an intentional change to the report format, then review the diff.
The arguments must stay in step with GOLDEN_ARGS in tests/test_acceptance.py.
"""
import os
from datetime import date
from pathlib import Path

from wattprint.cli import main

ROOT = Path(__file__).resolve().parent.parent
ARGS = ["estimate", "--trace", "trace20.tsv", "--readings", "readings11.csv", "--node-cores", "16", "--ci", "ci3.csv"]

if __name__ == "__main__":
    os.chdir(ROOT / "tests" / "fixtures")
    raise SystemExit(main(ARGS + ["--out-dir", str(ROOT / "tests" / "golden")], today=date(2025, 1, 1)))
