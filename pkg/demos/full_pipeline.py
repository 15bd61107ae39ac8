"""
The whole pipeline from the command line
========================================

Writes a synthetic dataset, runs every stage, and prints the summary.
Same as::

    copetition synth --override outdir=demo_out
    copetition pipeline --override outdir=demo_out
"""
import sys
import tempfile
from pathlib import Path

from copetition.cli import main

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp()) / "run"
args = ["--override", f"outdir={out}", "--override", "synth.seed=5"]
assert main(["synth", *args]) == 0
assert main(["pipeline", *args]) == 0
print((out / "report" / "summary.txt").read_text())
print("artifacts under", out)
