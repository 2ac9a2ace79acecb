"""Topic similarity: word-count vectors and ascending cosine orderings.

Source topics are ordered dissimilar-to-similar against the target so a
curriculum can introduce them in increasing order of relevance.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .corpus import Claim, Corpus, UnknownTopic
from .errors import TopicForgeError


class EmptyTopic(TopicForgeError):
    pass


class ZeroVector(TopicForgeError):
    pass


@dataclass(frozen=True)
class TopicVector:
    """Bag-of-words counts for one topic (zero-count terms omitted)."""

    topic_id: str
    counts: dict[str, int]


@dataclass(frozen=True)
class TopicOrdering:
    """Source topics with their similarity to the target, ascending."""

    target_id: str
    ordered_sources: tuple[tuple[str, float], ...]

    @property
    def source_ids(self) -> tuple[str, ...]:
        return tuple(tid for tid, _ in self.ordered_sources)


def count_vector(claims: Sequence[Claim]) -> TopicVector:
    """Total term occurrences across the claims' normalized texts
    (whitespace tokenization).  All claims must share one topic."""
    if not claims:
        raise EmptyTopic("cannot vectorize an empty claim sequence")
    topic_ids = {c.topic_id for c in claims}
    if len(topic_ids) != 1:
        raise ValueError(f"claims span multiple topics: {sorted(topic_ids)}")
    counts: Counter[str] = Counter()
    for claim in claims:
        counts.update(claim.text.split())
    return TopicVector(topic_id=topic_ids.pop(), counts=dict(counts))


def cosine(a: TopicVector, b: TopicVector) -> float:
    """Cosine similarity of two count vectors over their union vocabulary.

    Counts are non-negative, so the result lies in [0, 1].
    """
    if not a.counts or not b.counts:
        raise ZeroVector("cosine undefined for an all-zero vector")
    small, large = (a.counts, b.counts) if len(a.counts) <= len(b.counts) else (b.counts, a.counts)
    dot = sum(count * large.get(term, 0) for term, count in small.items())
    norm_a = math.sqrt(sum(c * c for c in a.counts.values()))
    norm_b = math.sqrt(sum(c * c for c in b.counts.values()))
    return min(1.0, dot / (norm_a * norm_b))


def order_sources(
    corpus: Corpus, target_id: str, target_reference: Sequence[Claim]
) -> TopicOrdering:
    """Order source topics by cosine similarity to the target, ascending.

    The target side is vectorized from ``target_reference`` (the few-shot
    training sample, never held-out test claims); each source topic is
    vectorized over its full claim set.  Ties break on topic id.
    """
    if target_id not in corpus.topics:
        raise UnknownTopic(target_id)
    if not target_reference:
        raise EmptyTopic("target reference sample is empty")
    reference = count_vector(target_reference)
    scored = []
    for topic_id in corpus.topic_ids:
        if topic_id == target_id:
            continue
        vector = count_vector(corpus.topic_claims(topic_id))
        scored.append((cosine(vector, reference), topic_id))
    scored.sort(key=lambda pair: (pair[0], pair[1]))
    return TopicOrdering(
        target_id=target_id,
        ordered_sources=tuple((tid, sim) for sim, tid in scored),
    )
