"""Ranking evaluation: AveP per topic and MAP across topics."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

from .corpus import Claim, Label
from .errors import TopicForgeError
from .schedule import Scheme


class LengthMismatch(TopicForgeError):
    pass


class NoRelevantClaims(TopicForgeError):
    pass


class EmptyResults(TopicForgeError):
    pass


@dataclass(frozen=True)
class RankedEntry:
    claim_id: str
    score: float
    relevant: bool


@dataclass(frozen=True)
class RankedList:
    """Entries sorted by score descending, ties broken by claim id ascending."""

    entries: tuple[RankedEntry, ...]


@dataclass(frozen=True)
class TopicResult:
    topic_id: str
    avep: float
    n_test: int
    n_relevant: int

    def __post_init__(self):
        if not 0.0 <= self.avep <= 1.0:
            raise ValueError(f"avep outside [0, 1]: {self.avep}")
        if self.n_relevant < 1:
            raise ValueError("a topic needs at least one relevant test claim")


@dataclass(frozen=True)
class RunReport:
    """Per-topic AveP plus their mean, for one (scheme, stages, seed) run."""

    scheme: Scheme
    stages: int
    per_topic: tuple[TopicResult, ...]
    map: float
    fingerprint: dict

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "stages": self.stages,
            "per_topic": [
                {
                    "topic_id": t.topic_id,
                    "avep": t.avep,
                    "n_test": t.n_test,
                    "n_relevant": t.n_relevant,
                }
                for t in self.per_topic
            ],
            "map": self.map,
            "fingerprint": dict(self.fingerprint),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        return cls(
            scheme=Scheme.from_slug(data["scheme"]),
            stages=data["stages"],
            per_topic=tuple(
                TopicResult(
                    topic_id=t["topic_id"],
                    avep=t["avep"],
                    n_test=t["n_test"],
                    n_relevant=t["n_relevant"],
                )
                for t in data["per_topic"]
            ),
            map=data["map"],
            fingerprint=data["fingerprint"],
        )


def rank(test_claims: Sequence[Claim], scores: Sequence[float]) -> RankedList:
    """Sort claims by predicted score descending (ties: claim id ascending).

    An entry is relevant when its claim is labeled check-worthy.
    """
    if len(test_claims) != len(scores):
        raise LengthMismatch(
            f"{len(test_claims)} claims but {len(scores)} scores"
        )
    for score in scores:
        if math.isnan(score):
            raise ValueError("scores must not contain NaN")
    pairs = sorted(
        zip(test_claims, scores), key=lambda cs: (-cs[1], cs[0].id)
    )
    return RankedList(
        entries=tuple(
            RankedEntry(claim_id=c.id, score=s, relevant=c.label is Label.CW)
            for c, s in pairs
        )
    )


def average_precision(ranked: RankedList, denominator: str = "relevant") -> float:
    """Average precision of a ranked list.

    AP = sum_k P(k) * rel(k) / D with P(k) the precision of the top-k prefix.
    D is the number of relevant entries by default; ``denominator="total"``
    divides by the list length instead.
    """
    if denominator not in ("relevant", "total"):
        raise ValueError(f"denominator must be 'relevant' or 'total', got {denominator!r}")
    hits = 0
    total = 0.0
    for k, entry in enumerate(ranked.entries, 1):
        if entry.relevant:
            hits += 1
            total += hits / k
    if hits == 0:
        raise NoRelevantClaims("ranked list has no relevant entries")
    d = hits if denominator == "relevant" else len(ranked.entries)
    return min(1.0, total / d)


def mean_average_precision(results: Sequence[TopicResult]) -> float:
    """Arithmetic mean of per-topic AveP values."""
    if not results:
        raise EmptyResults("no topic results to average")
    return sum(r.avep for r in results) / len(results)


def _csv_rows(report: RunReport) -> list[str]:
    rows = ["topic_id,avep,n_test,n_relevant"]
    for t in report.per_topic:
        rows.append(f"{t.topic_id},{t.avep:.6f},{t.n_test},{t.n_relevant}")
    total_test = sum(t.n_test for t in report.per_topic)
    total_rel = sum(t.n_relevant for t in report.per_topic)
    rows.append(f"AVERAGE,{report.map:.6f},{total_test},{total_rel}")
    return rows


def _table_rows(report: RunReport) -> list[str]:
    width = max([len("topic_id")] + [len(t.topic_id) for t in report.per_topic])
    rows = [f"{'topic_id':<{width}}  {'avep':>8}  {'n_test':>6}  {'n_rel':>5}"]
    for t in report.per_topic:
        rows.append(
            f"{t.topic_id:<{width}}  {t.avep:>8.4f}  {t.n_test:>6}  {t.n_relevant:>5}"
        )
    rows.append(f"{'Average':<{width}}  {report.map:>8.4f}")
    return rows


def emit_report(report: RunReport, format: str = "json") -> str:
    """Render a run report as json, csv, or an aligned text table."""
    if format == "json":
        return json.dumps(report.to_dict(), ensure_ascii=False, sort_keys=True, indent=2)
    if format == "csv":
        return "\n".join(_csv_rows(report)) + "\n"
    if format == "table":
        return "\n".join(_table_rows(report)) + "\n"
    raise ValueError(f"unknown report format {format!r}")
