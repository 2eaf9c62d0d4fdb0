"""Regenerate the shipped test fixtures.

* ``tests/fixtures/store``: replay transcripts for the full 3 x 4 x 11 prompt
  matrix, answered by a synthetic CBN agent with integer-rounded noisy replies.
  One reply is prose, so the fixture also exercises error accounting.
* ``tests/fixtures/human_synthetic.csv``: noiseless judgments from a 3p CBN,
  one subject per (domain, counterbalance) cell.

Run from the repository root: ``python3 scripts/build_fixture_store.py``.
"""

import shutil
from pathlib import Path

import numpy as np

from colliderlab.datafiles import write_judgments
from colliderlab.harness import QueryRequest, ScriptedTransport, TranscriptStore, run_experiment
from colliderlab.model import ColliderParameters, predict_task_battery
from colliderlab.prompts import builtin_vocabularies, prompt_matrix
from colliderlab.stats import DOMAINS, JudgmentRecord
from colliderlab.tasks import catalog

ROOT = Path(__file__).resolve().parents[1] / "tests" / "fixtures"
MODEL, PROVIDER = "fixture-llm", "openai"
HUMAN_PARAMS = ColliderParameters.shared(0.528, 1.06, 0.91)
LLM_PARAMS = ColliderParameters.shared(0.553, 1.55, 1.87)
PROSE_INDEX = 17


def build_store():
    store_dir = ROOT / "store"
    shutil.rmtree(store_dir, ignore_errors=True)
    store = TranscriptStore(store_dir)
    bundles = prompt_matrix(builtin_vocabularies(), catalog())
    expected = dict(zip((t.id for t in catalog()), predict_task_battery(LLM_PARAMS, catalog())))
    rng = np.random.default_rng(20240607)
    replies = {}
    for i, bundle in enumerate(bundles):
        value = int(np.clip(np.rint(100 * expected[bundle.task_id] + rng.normal(0, 6)), 0, 100))
        replies[bundle.full_text] = f"I would estimate about {value}." if i == PROSE_INDEX else str(value)
    template = QueryRequest(PROVIDER, MODEL, 0.0)
    report = run_experiment(bundles, template, ScriptedTransport(replies), store, concurrency=1,
                            clock=lambda: "2024-01-01T00:00:00+00:00")
    print(f"store: {len(report.records)} parsed, {len(report.errors)} errors")


def build_humans():
    preds = predict_task_battery(HUMAN_PARAMS, catalog())
    records = []
    subject = 0
    for domain in DOMAINS:
        for cb in (1, 2, 3, 4):
            subject += 1
            for task, p in zip(catalog(), preds):
                records.append(JudgmentRecord(f"h{subject:02d}", "human", "", domain, cb, task.id, 100.0 * p))
    write_judgments(records, ROOT / "human_synthetic.csv")
    print(f"humans: {len(records)} judgments")


if __name__ == "__main__":
    build_store()
    build_humans()
