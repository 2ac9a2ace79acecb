"""Claim corpora: text normalization, ingestion, topic surgery, synthetic data.

A corpus is an immutable collection of labeled claims partitioned into
topics.  Texts are normalized on the way in (URL/email/mention/digit runs
replaced by placeholder tokens, markup and punctuation stripped), and the
normalization is idempotent so stored corpora can be reloaded safely.
"""

from __future__ import annotations

import csv
import json
import random
import re
import unicodedata
from dataclasses import dataclass, replace
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import TopicForgeError
from .seeding import derive_seed


class MalformedRecord(TopicForgeError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateId(TopicForgeError):
    def __init__(self, claim_id: str):
        super().__init__(f"duplicate claim id: {claim_id!r}")
        self.claim_id = claim_id


class UnknownLabel(TopicForgeError):
    def __init__(self, value: object):
        super().__init__(f"label must be 0 or 1, got {value!r}")
        self.value = value


class UnknownTopic(TopicForgeError):
    def __init__(self, topic_id: str):
        super().__init__(f"unknown topic: {topic_id!r}")
        self.topic_id = topic_id


class OverlappingGroups(TopicForgeError):
    pass


class InvalidSpec(TopicForgeError):
    pass


class Label(IntEnum):
    """Binary check-worthiness label, serialized as 1 (CW) / 0 (NCW)."""

    NCW = 0
    CW = 1


@dataclass(frozen=True)
class Claim:
    """One labeled text unit.  ``text`` is the normalized form of ``raw_text``."""

    id: str
    topic_id: str
    text: str
    raw_text: str
    label: Label


class Corpus:
    """Immutable topic-partitioned claim collection.

    Every claim id appears under exactly one topic, and topic sizes sum to
    the total claim count.  Safe for concurrent read access.
    """

    def __init__(self, claims: Iterable[Claim]):
        self._claims = tuple(claims)
        by_id: dict[str, Claim] = {}
        topics: dict[str, list[str]] = {}
        for claim in self._claims:
            if claim.id in by_id:
                raise DuplicateId(claim.id)
            by_id[claim.id] = claim
            topics.setdefault(claim.topic_id, []).append(claim.id)
        self._by_id = by_id
        self._topics = {tid: tuple(ids) for tid, ids in topics.items()}

    @property
    def claims(self) -> tuple[Claim, ...]:
        return self._claims

    @property
    def topics(self) -> dict[str, tuple[str, ...]]:
        """Mapping topic_id -> claim ids, in input order."""
        return dict(self._topics)

    @property
    def topic_ids(self) -> tuple[str, ...]:
        return tuple(self._topics)

    def claim(self, claim_id: str) -> Claim:
        return self._by_id[claim_id]

    def topic_claims(self, topic_id: str) -> tuple[Claim, ...]:
        if topic_id not in self._topics:
            raise UnknownTopic(topic_id)
        return tuple(self._by_id[cid] for cid in self._topics[topic_id])

    def __len__(self) -> int:
        return len(self._claims)

    def __iter__(self) -> Iterator[Claim]:
        return iter(self._claims)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Corpus) and self._claims == other._claims

    def __repr__(self) -> str:
        return f"Corpus({len(self._claims)} claims, {len(self._topics)} topics)"


@dataclass(frozen=True)
class NormalizationConfig:
    """Replacement tokens and strip flags for :func:`normalize_text`.

    Tokens must be non-empty and whitespace-free.  The defaults follow
    common Arabic social-media preprocessing; tokens should avoid digits
    and markup so a second normalization pass leaves them untouched.
    """

    url_token: str = "[رابط]"
    email_token: str = "[بريد]"
    user_token: str = "[مستخدم]"
    digit_token: str = "[رقم]"
    strip_punctuation: bool = True
    strip_emoji: bool = True
    strip_html: bool = True

    def __post_init__(self):
        for name in ("url_token", "email_token", "user_token", "digit_token"):
            token = getattr(self, name)
            if not token or any(ch.isspace() for ch in token):
                raise ValueError(f"{name} must be non-empty and contain no whitespace")

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "NormalizationConfig":
        unknown = set(data) - {f.name for f in cls.__dataclass_fields__.values()}
        if unknown:
            raise ValueError(f"unknown normalization keys: {sorted(unknown)}")
        return cls(**data)  # type: ignore[arg-type]


_HTML_RE = re.compile(r"<[^>]+>")
_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_EMAIL_RE = re.compile(r"[\w.+-]+@[\w-]+(?:\.[\w-]+)+")
_MENTION_RE = re.compile(r"@\w+")
_DIGITS_RE = re.compile(r"\d+")
_WS_RE = re.compile(r"\s+")

# Curated emoji / pictograph blocks; replaced by a space so stripping never
# fuses neighbouring characters into a new URL or digit run.
_EMOJI_RE = re.compile(
    "["
    "\U0001f000-\U0001f0ff"
    "\U0001f1e6-\U0001f1ff"
    "\U0001f300-\U0001f5ff"
    "\U0001f600-\U0001f64f"
    "\U0001f680-\U0001f6ff"
    "\U0001f700-\U0001faff"
    "⌀-⏿"
    "☀-➿"
    "⬀-⯿"
    "︎️"
    "‍"
    "]+"
)


def _strip_punctuation(text: str) -> str:
    # Square brackets survive so replacement tokens like [رقم] stay intact.
    kept = []
    for ch in text:
        if ch in "[]" or not unicodedata.category(ch).startswith("P"):
            kept.append(ch)
    return "".join(kept)


def normalize_text(raw: str, cfg: NormalizationConfig | None = None) -> str:
    """Normalize one text: token replacements, markup/emoji/punctuation
    stripping, whitespace collapse.

    Passes run in a fixed order (HTML, URL, email, mention, digits, emoji,
    punctuation incl. hash signs, whitespace) and the result is idempotent
    under the default configuration.
    """
    if cfg is None:
        cfg = _DEFAULT_NORMALIZATION
    text = raw
    if cfg.strip_html:
        text = _HTML_RE.sub(" ", text)
    text = _URL_RE.sub(cfg.url_token, text)
    text = _EMAIL_RE.sub(cfg.email_token, text)
    text = _MENTION_RE.sub(cfg.user_token, text)
    text = _DIGITS_RE.sub(cfg.digit_token, text)
    if cfg.strip_emoji:
        text = _EMOJI_RE.sub(" ", text)
    if cfg.strip_punctuation:
        text = _strip_punctuation(text)
    return _WS_RE.sub(" ", text).strip()


_DEFAULT_NORMALIZATION = NormalizationConfig()


@dataclass(frozen=True)
class FieldMapping:
    """Names of the id/topic/text/label fields or columns in an input file."""

    id: str = "id"
    topic: str = "topic"
    text: str = "text"
    label: str = "label"


def _parse_label(value: object) -> Label:
    if isinstance(value, bool):
        raise UnknownLabel(value)
    if isinstance(value, int):
        if value in (0, 1):
            return Label(value)
    elif isinstance(value, str) and value.strip() in ("0", "1"):
        return Label(int(value.strip()))
    raise UnknownLabel(value)


def _iter_jsonl_records(path: Path, mapping: FieldMapping):
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise MalformedRecord(line_no, "record is not a JSON object")
            yield line_no, obj


def _iter_delimited_records(path: Path, mapping: FieldMapping, delimiter: str):
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = reader.fieldnames or []
        missing = [
            name
            for name in (mapping.id, mapping.topic, mapping.text, mapping.label)
            if name not in header
        ]
        if missing:
            raise MalformedRecord(1, f"missing columns: {missing}")
        for line_no, row in enumerate(reader, 2):
            yield line_no, row


def load_corpus(
    path: str | Path,
    mapping: FieldMapping | None = None,
    cfg: NormalizationConfig | None = None,
) -> Corpus:
    """Load a corpus from JSONL (canonical) or delimited text (csv/tsv).

    Texts are normalized; input order is preserved within each topic.
    Raises MalformedRecord / DuplicateId / UnknownLabel on bad input.
    """
    path = Path(path)
    mapping = mapping or FieldMapping()
    suffix = path.suffix.lower()
    if suffix in (".csv",):
        records = _iter_delimited_records(path, mapping, ",")
    elif suffix in (".tsv", ".tab"):
        records = _iter_delimited_records(path, mapping, "\t")
    else:
        records = _iter_jsonl_records(path, mapping)

    claims = []
    for line_no, obj in records:
        values = {}
        for attr, key in (
            ("id", mapping.id),
            ("topic", mapping.topic),
            ("text", mapping.text),
            ("label", mapping.label),
        ):
            if key not in obj or obj[key] is None:
                raise MalformedRecord(line_no, f"missing field {key!r}")
            values[attr] = obj[key]
        raw = str(values["text"])
        claims.append(
            Claim(
                id=str(values["id"]),
                topic_id=str(values["topic"]),
                text=normalize_text(raw, cfg),
                raw_text=raw,
                label=_parse_label(values["label"]),
            )
        )
    return Corpus(claims)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus in the canonical JSONL format (normalized texts)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for claim in corpus:
            record = {
                "id": claim.id,
                "topic": claim.topic_id,
                "text": claim.text,
                "label": int(claim.label),
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def merge_topics(corpus: Corpus, groups: Mapping[str, Iterable[str]]) -> Corpus:
    """Reassign the topics of each group to a single new topic id.

    Groups must be disjoint and reference existing topics; the total claim
    count is unchanged.
    """
    remap: dict[str, str] = {}
    for new_id, members in groups.items():
        for tid in members:
            if tid not in corpus.topics:
                raise UnknownTopic(tid)
            if tid in remap:
                raise OverlappingGroups(f"topic {tid!r} appears in more than one group")
            remap[tid] = new_id
    if not remap:
        return corpus
    return Corpus(
        replace(c, topic_id=remap.get(c.topic_id, c.topic_id)) for c in corpus
    )


# --- synthetic corpora -----------------------------------------------------
#
# Stand-in generator for experiments where the real datasets cannot be
# redistributed.  Each topic draws its vocabulary partly from a shared pool
# ("overlap" = fraction of the topic vocabulary taken from the pool), so the
# realized vocabulary overlap between two topics is min(overlap_a, overlap_b).
# Check-worthy claims embed topic-specific marker terms with probability
# p_signal, which is the signal a classifier can learn.


@dataclass(frozen=True)
class SyntheticTopic:
    id: str
    size: int
    overlap: float = 0.5

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "SyntheticTopic":
        unknown = set(data) - {"id", "size", "overlap"}
        if unknown:
            raise InvalidSpec(f"unknown synthetic topic keys: {sorted(unknown)}")
        if "id" not in data or "size" not in data:
            raise InvalidSpec("synthetic topic needs 'id' and 'size'")
        return cls(**data)  # type: ignore[arg-type]


@dataclass(frozen=True)
class SyntheticSpec:
    topics: tuple[SyntheticTopic, ...]
    vocab_size: int = 60
    prevalence: float = 0.284
    p_signal: float = 1.0
    tokens_per_claim: int = 12
    markers_per_topic: int = 3
    marker_copies: int = 2

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "SyntheticSpec":
        fields = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(data) - fields
        if unknown:
            raise InvalidSpec(f"unknown synthetic spec keys: {sorted(unknown)}")
        if "topics" not in data:
            raise InvalidSpec("synthetic spec needs 'topics'")
        topics = tuple(SyntheticTopic.from_dict(t) for t in data["topics"])  # type: ignore[union-attr]
        rest = {k: v for k, v in data.items() if k != "topics"}
        return cls(topics=topics, **rest)  # type: ignore[arg-type]


def _validate_spec(spec: SyntheticSpec) -> None:
    if not spec.topics:
        raise InvalidSpec("at least one topic required")
    seen = set()
    for topic in spec.topics:
        if topic.size < 0:
            raise InvalidSpec(f"topic {topic.id!r} has negative size")
        if not 0.0 <= topic.overlap <= 1.0:
            raise InvalidSpec(f"topic {topic.id!r} overlap outside [0, 1]")
        if topic.id in seen:
            raise InvalidSpec(f"duplicate topic id {topic.id!r}")
        seen.add(topic.id)
    if not 0.0 <= spec.prevalence <= 1.0:
        raise InvalidSpec("prevalence outside [0, 1]")
    if not 0.0 <= spec.p_signal <= 1.0:
        raise InvalidSpec("p_signal outside [0, 1]")
    if spec.vocab_size < 1 or spec.tokens_per_claim < 1:
        raise InvalidSpec("vocab_size and tokens_per_claim must be >= 1")
    if spec.markers_per_topic < 1 or spec.marker_copies < 1:
        raise InvalidSpec("markers_per_topic and marker_copies must be >= 1")


def _letters(n: int) -> str:
    # Base-26 a..z encoding, at least two characters, so generated terms
    # contain no digits and survive normalization unchanged.
    chars = []
    while True:
        n, r = divmod(n, 26)
        chars.append(chr(ord("a") + r))
        if n == 0:
            break
    while len(chars) < 2:
        chars.append("a")
    return "".join(reversed(chars))


def generate_synthetic(spec: SyntheticSpec, seed: int) -> Corpus:
    """Generate a deterministic multi-topic corpus from a synthetic spec.

    Topic sizes are honored exactly and each topic receives exactly
    round(size * prevalence) check-worthy claims, so label counts are
    reproducible rather than sampled.
    """
    _validate_spec(spec)
    pool = [f"base{_letters(i)}" for i in range(spec.vocab_size)]
    claims: list[Claim] = []
    for t_index, topic in enumerate(spec.topics):
        rng = random.Random(derive_seed(seed, "synthetic", topic.id))
        shared = round(topic.overlap * spec.vocab_size)
        vocab = pool[:shared] + [
            f"top{_letters(t_index)}w{_letters(j)}"
            for j in range(spec.vocab_size - shared)
        ]
        markers = [
            f"top{_letters(t_index)}mark{_letters(k)}"
            for k in range(spec.markers_per_topic)
        ]
        n_cw = round(topic.size * spec.prevalence)
        labels = [Label.CW] * n_cw + [Label.NCW] * (topic.size - n_cw)
        rng.shuffle(labels)
        for i, label in enumerate(labels):
            tokens = [
                vocab[rng.randrange(len(vocab))] for _ in range(spec.tokens_per_claim)
            ]
            if label is Label.CW and rng.random() < spec.p_signal:
                marker = markers[rng.randrange(len(markers))]
                tokens.extend([marker] * spec.marker_copies)
            raw = " ".join(tokens)
            claims.append(
                Claim(
                    id=f"{topic.id}-{i:04d}",
                    topic_id=topic.id,
                    text=normalize_text(raw),
                    raw_text=raw,
                    label=label,
                )
            )
    return Corpus(claims)
