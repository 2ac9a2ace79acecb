import pytest

from topicforge.corpus import (
    Claim,
    Corpus,
    Label,
    SyntheticSpec,
    SyntheticTopic,
    generate_synthetic,
    normalize_text,
)


def make_claim(cid, topic, text, label=0):
    return Claim(
        id=cid,
        topic_id=topic,
        text=normalize_text(text),
        raw_text=text,
        label=Label(label),
    )


def make_synthetic(topic_overlaps, size=120, seed=0, **kwargs):
    """Corpus from (topic_id, overlap) pairs; kwargs feed SyntheticSpec."""
    spec = SyntheticSpec(
        topics=tuple(SyntheticTopic(id=t, size=size, overlap=o) for t, o in topic_overlaps),
        **kwargs,
    )
    return generate_synthetic(spec, seed)


@pytest.fixture
def tiny_corpus():
    return Corpus(
        [
            make_claim("a1", "T1", "apples grow on trees", 1),
            make_claim("a2", "T1", "apples are red", 0),
            make_claim("b1", "T2", "boats float on water", 1),
            make_claim("b2", "T2", "boats have sails", 0),
            make_claim("b3", "T2", "water is wet", 0),
            make_claim("c1", "T3", "cars drive on roads", 1),
            make_claim("c2", "T3", "cars have wheels", 0),
            make_claim("c3", "T3", "roads are long", 0),
            make_claim("c4", "T3", "wheels are round", 1),
        ]
    )


@pytest.fixture(scope="session")
def small_experiment_corpus():
    """3 topics x 120 claims, separable signal, small enough for fast runs."""
    return make_synthetic(
        [("alpha", 0.2), ("beta", 0.5), ("gamma", 0.8)],
        size=120,
        seed=3,
        vocab_size=40,
        prevalence=0.3,
    )
