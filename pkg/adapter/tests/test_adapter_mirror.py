"""Cross-implementation equivalence on the shared trainer fixture.

The fixture (kept with the host package's tests) freezes a seed, config,
three stage batches, and the scores the host's built-in trainer produces.
Driving the same sequence through the adapter process must reproduce those
scores within 1e-6, elementwise.
"""

import json
import math
from pathlib import Path

import pytest

from pytrainer_adapter.model import HashedLogisticModel
from test_adapter_protocol import AdapterProcess

SHARED_FIXTURE = (
    Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "trainer_mirror.json"
)


@pytest.fixture(scope="module")
def fixture():
    return json.loads(SHARED_FIXTURE.read_text(encoding="utf-8"))


def test_adapter_process_matches_host_trainer(fixture):
    with AdapterProcess() as adapter:
        reply = adapter.request(
            {
                "cmd": "init",
                "config": fixture["config"],
                "seed": fixture["seed"],
                "protocol": 1,
            }
        )
        assert reply["ok"] is True
        for stage, batch in enumerate(fixture["stages"]):
            adapter.request({"cmd": "train_stage", "stage": stage, "examples": batch})
        scores = adapter.request({"cmd": "score", "texts": fixture["score_texts"]})[
            "scores"
        ]
        assert adapter.request({"cmd": "shutdown"}) == {"ok": True}
        assert adapter.close() == 0

    expected = fixture["expected_scores"]
    assert len(scores) == len(expected) == 50
    for got, want in zip(scores, expected):
        assert math.isclose(got, want, rel_tol=0, abs_tol=1e-6)


def test_in_process_model_matches_host_trainer(fixture):
    model = HashedLogisticModel(fixture["config"], fixture["seed"])
    for batch in fixture["stages"]:
        model.train_stage([(ex["text"], ex["label"]) for ex in batch])
    scores = model.score(fixture["score_texts"])
    for got, want in zip(scores, fixture["expected_scores"]):
        assert math.isclose(got, want, rel_tol=0, abs_tol=1e-6)
