"""The staged command-line pipeline on the bundled sentences.

Each stage writes files the next one reads. Run:
python demos/05_cli_walkthrough.py
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

from phonorich.data import SAMPLE_SENTENCES

CONFIG = """\
name: sample
exclusion:
  min_corpus_tokens: 1
selection:
  word_bounds: [1, 40]
  type_quotas: {declarative: 1.0, interrogative: 0.0, exclamative: 0.0}
  target_sentences: 8
  reserve_sentences: 0
  phoneme_min_count: 1
"""


def phonorich(*args):
    cmd = [sys.executable, "-m", "phonorich", *map(str, args)]
    print("$ phonorich", " ".join(map(str, args)))
    proc = subprocess.run(cmd, capture_output=True, text=True)
    print(proc.stdout.rstrip())
    if proc.returncode:
        print(proc.stderr, file=sys.stderr)
        raise SystemExit(proc.returncode)


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    cfg = tmp / "config.yaml"
    cfg.write_text(CONFIG, encoding="utf-8")
    out = tmp / "sample"
    common = ("--config", cfg, "--output", out)
    phonorich("ingest", "--input", SAMPLE_SENTENCES, *common)
    phonorich("transcribe", "--input", out / "sentences.jsonl", "--workers", 2, *common)
    phonorich("select", "--input", out / "transcribed.jsonl", *common)
    phonorich("analyze", "--input", out / "selected.jsonl", out / "trace.jsonl", *common)

    baseline = tmp / "globo.json"
    baseline.write_text(json.dumps({"name": "globo", "distinct": 5832, "total": 45504}))
    alana = tmp / "alana.json"
    alana.write_text(json.dumps({"name": "alana", "distinct": 9088, "total": 45360}))
    phonorich("compare", "--input", alana, baseline, "--baseline", "globo")
    print("\nfiles:", ", ".join(sorted(p.name for p in out.iterdir())))
