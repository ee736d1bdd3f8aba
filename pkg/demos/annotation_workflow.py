"""
From raw text to labeled feature groups
=======================================

The end-to-end command-line loop on a generated corpus:

1. ``synth`` writes a corpus, a group file, embeddings and a config.
2. ``annotate-export`` trains a plain model and lists its heaviest words.
3. A person marks words as causal or spurious in a JSON group file.
   Here the planted truth stands in for that person.
4. ``train`` and ``eval`` use the labeled groups.

Everything is written under a temporary directory.
Run with ``python demos/annotation_workflow.py``.
"""

import json
import tempfile
from pathlib import Path

from causalreg.cli import main

work = Path(tempfile.mkdtemp(prefix="causalreg-demo-"))
(work / "synth.json").write_text(json.dumps({"dataset": {"synthetic": {"n": 2000}}, "output": "data"}))
assert main(["synth", "--config", str(work / "synth.json")]) == 0
data = work / "data"

# A run config without feature groups: the annotator has not labeled anything yet.
run = json.loads((data / "config.json").read_text())
truth = json.loads((data / "groups.json").read_text())
run["dataset"].pop("groups")
run.update(train={"learning_rate": 0.05}, annotate_threshold=0.5, output="export")
(data / "unlabeled.json").write_text(json.dumps(run))
assert main(["annotate-export", "--config", str(data / "unlabeled.json")]) == 0

rows = (data / "export" / "annotation.tsv").read_text().splitlines()[1:]
print(f"{len(rows)} words with |weight| > 0.5; the top five:")
for line in rows[:5]:
    print("   ", line)

# %%
# The "annotator" keeps only words that were exported and sorts them into groups.
exported = {line.split("\t")[0] for line in rows}
labeled = {key: [w for w in words if w in exported] for key, words in truth.items()}
print({key: len(v) for key, v in labeled.items()}, "words labeled")
(data / "labeled.json").write_text(json.dumps(labeled))

run["dataset"]["groups"] = "labeled.json"
run["output"] = "trained"
(data / "labeled_run.json").write_text(json.dumps(run))
assert main(["train", "--config", str(data / "labeled_run.json"), "--lambda-s", "100", "--lambda-r", "1"]) == 0
assert main(["eval", "--config", str(data / "labeled_run.json"),
             "--model", str(data / "trained" / "model.json"), "--output", str(data / "evaluated")]) == 0
print((data / "evaluated" / "report.txt").read_text())
print("outputs in", work)
