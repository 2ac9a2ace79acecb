import itertools
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topicforge.evaluation import (
    EmptyResults,
    LengthMismatch,
    NoRelevantClaims,
    RankedEntry,
    RankedList,
    RunReport,
    TopicResult,
    average_precision,
    emit_report,
    mean_average_precision,
    rank,
)
from topicforge.schedule import Scheme

from .conftest import make_claim


def brute_force_ap(bits, denominator="relevant"):
    """Independent oracle: precision at every k recomputed from scratch."""
    n = len(bits)
    total = 0.0
    for k in range(1, n + 1):
        if bits[k - 1]:
            total += sum(bits[:k]) / k
    d = sum(bits) if denominator == "relevant" else n
    return total / d


def ranked_from_bits(bits):
    # descending scores so the ranking preserves the given order
    return RankedList(
        entries=tuple(
            RankedEntry(claim_id=f"c{i:02d}", score=1.0 - i / (len(bits) + 1), relevant=bool(b))
            for i, b in enumerate(bits)
        )
    )


class TestRank:
    def test_tie_break_by_id(self):
        claims = [
            make_claim("c", "T", "x", 0),
            make_claim("a", "T", "y", 1),
            make_claim("b", "T", "z", 0),
        ]
        ranked = rank(claims, [0.2, 0.9, 0.9])
        assert [e.claim_id for e in ranked.entries] == ["a", "b", "c"]
        assert [e.relevant for e in ranked.entries] == [True, False, False]

    def test_empty(self):
        assert rank([], []).entries == ()

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            rank([make_claim("a", "T", "x")], [0.1, 0.2])

    def test_scores_non_increasing(self):
        claims = [make_claim(f"c{i}", "T", "x") for i in range(6)]
        ranked = rank(claims, [0.3, 0.9, 0.1, 0.9, 0.5, 0.0])
        scores = [e.score for e in ranked.entries]
        assert scores == sorted(scores, reverse=True)

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            rank([make_claim("a", "T", "x")], [float("nan")])


class TestAveragePrecision:
    def test_perfect(self):
        assert average_precision(ranked_from_bits([1, 1, 1])) == 1.0

    def test_worked_example(self):
        ap = average_precision(ranked_from_bits([1, 0, 1, 1]))
        assert ap == pytest.approx((1 + 2 / 3 + 3 / 4) / 3, abs=1e-9)
        assert ap == pytest.approx(0.80556, abs=1e-5)

    def test_no_relevant(self):
        with pytest.raises(NoRelevantClaims):
            average_precision(ranked_from_bits([0, 0, 0]))

    def test_total_denominator(self):
        ap = average_precision(ranked_from_bits([1, 0, 1, 1]), denominator="total")
        assert ap == pytest.approx((1 + 2 / 3 + 3 / 4) / 4, abs=1e-12)

    def test_unknown_denominator(self):
        with pytest.raises(ValueError):
            average_precision(ranked_from_bits([1]), denominator="weird")

    @pytest.mark.parametrize("denominator", ["relevant", "total"])
    def test_exhaustive_against_brute_force(self, denominator):
        for n in range(1, 13):
            for bits in itertools.product((0, 1), repeat=n):
                if sum(bits) == 0:
                    continue
                ap = average_precision(ranked_from_bits(bits), denominator)
                assert abs(ap - brute_force_ap(bits, denominator)) < 1e-12

    def test_permutation_extremes(self):
        # all relevant first -> AP 1; all relevant last -> minimum over
        # every placement of the relevant items.
        for n in range(2, 9):
            for n_rel in range(1, n):
                first = [1] * n_rel + [0] * (n - n_rel)
                assert average_precision(ranked_from_bits(first)) == 1.0
                last_ap = average_precision(ranked_from_bits(first[::-1]))
                every = [
                    average_precision(ranked_from_bits(bits))
                    for bits in set(itertools.permutations(first))
                ]
                assert last_ap == pytest.approx(min(every), abs=1e-12)

    def test_monotone_transform_leaves_ap_unchanged(self):
        claims = [make_claim(f"c{i}", "T", "x", int(i % 3 == 0)) for i in range(9)]
        scores = [0.91, 0.13, 0.47, 0.82, 0.55, 0.21, 0.68, 0.05, 0.39]
        base = rank(claims, scores)
        for transform in (lambda s: 2 * s + 1, lambda s: s**3, lambda s: s / 10):
            moved = rank(claims, [transform(s) for s in scores])
            assert [e.claim_id for e in moved.entries] == [e.claim_id for e in base.entries]
            assert average_precision(moved) == average_precision(base)


class TestMeanAveragePrecision:
    def _result(self, tid, avep):
        return TopicResult(topic_id=tid, avep=avep, n_test=1, n_relevant=1)

    def test_single(self):
        assert mean_average_precision([self._result("a", 0.73)]) == 0.73

    def test_mean(self):
        results = [self._result("a", 1.0), self._result("b", 0.0)]
        assert mean_average_precision(results) == 0.5

    def test_empty(self):
        with pytest.raises(EmptyResults):
            mean_average_precision([])

    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=20))
    @settings(max_examples=200, deadline=None)
    def test_bounds(self, aveps):
        results = [self._result(f"t{i}", a) for i, a in enumerate(aveps)]
        value = mean_average_precision(results)
        assert min(aveps) - 1e-12 <= value <= max(aveps) + 1e-12


class TestTopicResult:
    def test_validation(self):
        with pytest.raises(ValueError):
            TopicResult(topic_id="t", avep=1.2, n_test=5, n_relevant=2)
        with pytest.raises(ValueError):
            TopicResult(topic_id="t", avep=0.5, n_test=5, n_relevant=0)


@pytest.fixture
def report():
    return RunReport(
        scheme=Scheme.SGTL_EQU_INC,
        stages=6,
        per_topic=(
            TopicResult(topic_id="t1", avep=0.75, n_test=100, n_relevant=28),
            TopicResult(topic_id="t2", avep=0.5, n_test=53, n_relevant=12),
        ),
        map=0.625,
        fingerprint={"seed": 1, "budget": 200},
    )


class TestEmitReport:
    def test_csv_shape(self, report):
        lines = emit_report(report, "csv").strip().split("\n")
        assert lines[0] == "topic_id,avep,n_test,n_relevant"
        assert len(lines) == 4
        assert lines[-1].startswith("AVERAGE,0.625000")

    def test_json_round_trip(self, report):
        parsed = RunReport.from_dict(json.loads(emit_report(report, "json")))
        assert parsed == report

    def test_table_shape(self):
        results = tuple(
            TopicResult(topic_id=f"topic-{i:02d}", avep=0.5, n_test=10, n_relevant=3)
            for i in range(14)
        )
        table_report = RunReport(
            scheme=Scheme.GTL_DEC_INC, stages=2, per_topic=results, map=0.5, fingerprint={}
        )
        lines = emit_report(table_report, "table").strip().split("\n")
        assert len(lines) == 16  # header + 14 topics + average
        assert lines[-1].split()[0] == "Average"

    def test_unknown_format(self, report):
        with pytest.raises(ValueError):
            emit_report(report, "yaml")
