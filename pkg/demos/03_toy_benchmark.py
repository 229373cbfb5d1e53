# The whole pipeline on the bundled toy corpus, through the command line.
import subprocess
import sys
import tempfile
from pathlib import Path

import crsadv

data = Path(crsadv.__file__).parent / "data"
kb = data / "toy_kb.json"
work = Path(tempfile.mkdtemp(prefix="crsadv-demo-"))


def run(*args):
    cmd = [sys.executable, "-m", "crsadv", *map(str, args)]
    print("$ crsadv", " ".join(map(str, args[:2])), "...")
    return subprocess.run(cmd, check=True, capture_output=True, text=True).stdout


run("ingest", "--format", "redial", data / "toy_redial.jsonl", "--out", work / "corpus.jsonl",
    "--kb", kb)
run("perturb", "--corpus", work / "corpus.jsonl", "--scenario", "all", "--seed", 0,
    "--kb", kb, "--out-dir", work)
perturbed = sorted(work.glob("perturbed_*.jsonl"))
run("evaluate", "--corpus", work / "corpus.jsonl", "--kb", kb, "--perturbed", *perturbed,
    "--out-dir", work)
print(run("report", "--scores-dir", work, "--out-dir", work))

# swap the builtin ranker for any program speaking the line protocol:
#   crsadv evaluate ... --adapter "cmd:python my_model.py"
#   crsadv evaluate ... --adapter "http:http://localhost:8000"
print("outputs in", work)
