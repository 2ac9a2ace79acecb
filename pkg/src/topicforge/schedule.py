"""Stage allocation arithmetic and concrete training plans.

The few-shot target budget grows across stages while source material either
shrinks (Dec) or stays level (Equ), and the final stage always trains on
target claims alone.  ``build_plan`` binds concrete claim ids to stages for
any of the five schemes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .corpus import Corpus, Label, UnknownTopic
from .errors import TopicForgeError
from .seeding import derive_seed
from .similarity import TopicOrdering


class InvalidStages(TopicForgeError):
    pass


class InvalidBudget(TopicForgeError):
    pass


class MissingOrdering(TopicForgeError):
    pass


class TargetTooSmall(TopicForgeError):
    def __init__(self, topic_size: int, budget: int, min_test: int):
        super().__init__(
            f"target topic has {topic_size} claims; needs at least "
            f"budget ({budget}) + min_test ({min_test})"
        )
        self.topic_size = topic_size
        self.budget = budget
        self.min_test = min_test


class Scheme(Enum):
    """The four staged curricula plus the single-stage baseline."""

    GTL_DEC_INC = "gtl-dec-inc"
    GTL_EQU_INC = "gtl-equ-inc"
    SGTL_DEC_INC = "sgtl-dec-inc"
    SGTL_EQU_INC = "sgtl-equ-inc"
    BASELINE_SINGLE_STAGE = "baseline"

    @property
    def needs_ordering(self) -> bool:
        return self in (Scheme.SGTL_DEC_INC, Scheme.SGTL_EQU_INC)

    @property
    def decremental(self) -> bool:
        return self in (Scheme.GTL_DEC_INC, Scheme.SGTL_DEC_INC)

    @classmethod
    def from_slug(cls, slug: str) -> "Scheme":
        for scheme in cls:
            if scheme.value == slug:
                return scheme
        if slug == "baseline-single-stage":
            return cls.BASELINE_SINGLE_STAGE
        raise ValueError(f"unknown scheme {slug!r}")


def divisor(stages: int) -> int:
    """Allocation divisor for a staged split: sum of stage indices plus 2.

    The +2 keeps the per-stage floor shares strictly below the budget so the
    final stage absorbs a substantial remainder.
    """
    if stages < 1:
        raise InvalidStages(f"stage count must be >= 1, got {stages}")
    return stages * (stages + 1) // 2 + 2


def incremental_sizes(budget: int, stages: int) -> list[int]:
    """Split ``budget`` into non-decreasing per-stage sizes.

    Stage i (1-based) gets floor(budget * i / divisor); the last stage takes
    every remaining item.
    """
    if stages < 1:
        raise InvalidStages(f"stage count must be >= 1, got {stages}")
    if budget < stages:
        raise InvalidBudget(f"budget {budget} smaller than stage count {stages}")
    if stages == 1:
        return [budget]
    y = divisor(stages)
    sizes = [budget * i // y for i in range(1, stages)]
    sizes.append(budget - sum(sizes))
    return sizes


def decremental_source_sizes(n_src: int, stages: int) -> list[int]:
    """Non-increasing source allocation with an empty final stage.

    Computed as the incremental split over stages-1, reversed, plus a
    trailing zero.
    """
    if stages < 2:
        raise InvalidStages(f"source provisioning needs >= 2 stages, got {stages}")
    if n_src < stages - 1:
        raise InvalidBudget(f"source size {n_src} smaller than {stages - 1} stages")
    sizes = incremental_sizes(n_src, stages - 1)
    sizes.reverse()
    sizes.append(0)
    return sizes


def equivalent_source_sizes(n_src: int, stages: int) -> list[int]:
    """Near-equal source allocation with an empty final stage.

    The remainder of n_src / (stages-1) goes one item at a time to the
    earliest stages.
    """
    if stages < 2:
        raise InvalidStages(f"source provisioning needs >= 2 stages, got {stages}")
    if n_src < stages - 1:
        raise InvalidBudget(f"source size {n_src} smaller than {stages - 1} stages")
    base, remainder = divmod(n_src, stages - 1)
    sizes = [base + 1] * remainder + [base] * (stages - 1 - remainder)
    sizes.append(0)
    return sizes


@dataclass(frozen=True)
class AllocationSizes:
    """Per-stage target and source counts for one plan."""

    stages: int
    target_sizes: tuple[int, ...]
    source_sizes: tuple[int, ...]


def allocation_sizes(
    scheme: Scheme, stages: int, budget: int, n_src: int
) -> AllocationSizes:
    if scheme is Scheme.BASELINE_SINGLE_STAGE:
        if stages != 1:
            raise InvalidStages("the single-stage baseline runs with exactly 1 stage")
        return AllocationSizes(1, (budget,), (n_src,))
    if stages < 2:
        raise InvalidStages(f"gradual schemes need >= 2 stages, got {stages}")
    target = incremental_sizes(budget, stages)
    if scheme.decremental:
        source = decremental_source_sizes(n_src, stages)
    else:
        source = equivalent_source_sizes(n_src, stages)
    return AllocationSizes(stages, tuple(target), tuple(source))


def split_target(
    corpus: Corpus,
    target_id: str,
    budget: int = 200,
    seed: int = 0,
    min_test: int = 50,
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Draw the few-shot training sample from the target topic.

    The sample is seeded and stratified by label (class proportions kept
    within one claim); the complement is the held-out test set.
    """
    claims = corpus.topic_claims(target_id)
    if budget < 1:
        raise InvalidBudget(f"budget must be >= 1, got {budget}")
    if len(claims) - budget < min_test:
        raise TargetTooSmall(len(claims), budget, min_test)

    cw_ids = [c.id for c in claims if c.label is Label.CW]
    ncw_ids = [c.id for c in claims if c.label is Label.NCW]
    k_cw = round(budget * len(cw_ids) / len(claims))
    k_cw = min(max(k_cw, budget - len(ncw_ids)), len(cw_ids), budget)
    rng = random.Random(derive_seed(seed, "split", target_id))
    train = set(rng.sample(cw_ids, k_cw)) | set(rng.sample(ncw_ids, budget - k_cw))
    train_ids = tuple(c.id for c in claims if c.id in train)
    test_ids = tuple(c.id for c in claims if c.id not in train)
    return train_ids, test_ids


@dataclass(frozen=True)
class StageAlloc:
    index: int
    source_ids: tuple[str, ...]
    target_ids: tuple[str, ...]


@dataclass(frozen=True)
class StagePlan:
    """Executable curriculum: claim ids bound to stages plus the test set."""

    scheme: Scheme
    target_id: str
    stages: tuple[StageAlloc, ...]
    test_ids: tuple[str, ...]
    seed: int

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "target": self.target_id,
            "seed": self.seed,
            "stages": [
                {
                    "index": s.index,
                    "source_ids": list(s.source_ids),
                    "target_ids": list(s.target_ids),
                }
                for s in self.stages
            ],
            "test_ids": list(self.test_ids),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StagePlan":
        return cls(
            scheme=Scheme.from_slug(data["scheme"]),
            target_id=data["target"],
            stages=tuple(
                StageAlloc(
                    index=s["index"],
                    source_ids=tuple(s["source_ids"]),
                    target_ids=tuple(s["target_ids"]),
                )
                for s in data["stages"]
            ),
            test_ids=tuple(data["test_ids"]),
            seed=data["seed"],
        )


def _slices(pool: Sequence[str], sizes: Sequence[int]) -> list[tuple[str, ...]]:
    out, start = [], 0
    for size in sizes:
        out.append(tuple(pool[start : start + size]))
        start += size
    return out


def build_plan(
    corpus: Corpus,
    target_id: str,
    scheme: Scheme,
    stages: int,
    budget: int = 200,
    seed: int = 0,
    ordering: TopicOrdering | None = None,
    min_test: int = 50,
) -> StagePlan:
    """Materialize a stage plan binding claim ids to stages.

    Target ids come from :func:`split_target` and are distributed across
    stages in seeded-shuffled order.  The source pool is a seeded shuffle of
    all source claims (GTL, baseline) or the similarity-ordered topic
    concatenation sliced sequentially (SGTL), so every source claim is used
    exactly once.
    """
    if target_id not in corpus.topics:
        raise UnknownTopic(target_id)
    if scheme.needs_ordering:
        if ordering is None:
            raise MissingOrdering(f"{scheme.value} requires a topic ordering")
        if ordering.target_id != target_id:
            raise ValueError(
                f"ordering targets {ordering.target_id!r}, plan targets {target_id!r}"
            )
        expected = set(corpus.topic_ids) - {target_id}
        if set(ordering.source_ids) != expected:
            raise ValueError("ordering does not cover exactly the source topics")
    elif ordering is not None:
        raise ValueError(f"{scheme.value} does not take a topic ordering")

    train_ids, test_ids = split_target(corpus, target_id, budget, seed, min_test)

    target_pool = list(train_ids)
    random.Random(derive_seed(seed, "plan-target", target_id)).shuffle(target_pool)

    if scheme.needs_ordering:
        source_pool = []
        for topic_id in ordering.source_ids:
            ids = list(corpus.topics[topic_id])
            random.Random(derive_seed(seed, "plan-source", target_id, topic_id)).shuffle(ids)
            source_pool.extend(ids)
    else:
        source_pool = [
            cid
            for topic_id in corpus.topic_ids
            if topic_id != target_id
            for cid in corpus.topics[topic_id]
        ]
        random.Random(derive_seed(seed, "plan-source", target_id)).shuffle(source_pool)

    alloc = allocation_sizes(scheme, stages, budget, len(source_pool))
    target_slices = _slices(target_pool, alloc.target_sizes)
    source_slices = _slices(source_pool, alloc.source_sizes)
    return StagePlan(
        scheme=scheme,
        target_id=target_id,
        stages=tuple(
            StageAlloc(index=i + 1, source_ids=src, target_ids=tgt)
            for i, (src, tgt) in enumerate(zip(source_slices, target_slices))
        ),
        test_ids=test_ids,
        seed=seed,
    )
