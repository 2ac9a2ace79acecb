import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topicforge.corpus import (
    Corpus,
    DuplicateId,
    FieldMapping,
    InvalidSpec,
    Label,
    MalformedRecord,
    NormalizationConfig,
    OverlappingGroups,
    SyntheticSpec,
    SyntheticTopic,
    UnknownLabel,
    UnknownTopic,
    generate_synthetic,
    load_corpus,
    merge_topics,
    normalize_text,
    save_corpus,
)
from topicforge.similarity import cosine, count_vector

from .conftest import make_claim, make_synthetic


class TestNormalizeText:
    def test_empty(self):
        assert normalize_text("") == ""

    def test_url_replacement(self):
        assert normalize_text("see https://x.co NOW!!") == "see [رابط] NOW"

    def test_digits_and_hash(self):
        assert normalize_text("call 112 #help") == "call [رقم] help"

    def test_email_and_mention(self):
        assert normalize_text("mail me@ex.com or ping @user") == "mail [بريد] or ping [مستخدم]"

    def test_html_stripped(self):
        assert normalize_text("<b>bold</b> text") == "bold text"

    def test_emoji_stripped(self):
        assert normalize_text("great 😀 stuff") == "great stuff"

    def test_whitespace_collapsed(self):
        assert normalize_text("  a \t b \n c  ") == "a b c"

    def test_arabic_indic_digits(self):
        assert normalize_text("٢٠٢٣ عام") == "[رقم] عام"

    def test_flags_off_keep_content(self):
        cfg = NormalizationConfig(
            strip_punctuation=False, strip_emoji=False, strip_html=False
        )
        assert normalize_text("keep, <i>this</i>! 😀", cfg) == "keep, <i>this</i>! 😀"

    def test_custom_tokens(self):
        cfg = NormalizationConfig(url_token="<URL>", strip_html=False)
        assert normalize_text("go http://a.b", cfg) == "go <URL>"

    def test_emoji_does_not_fuse_neighbours_into_url(self):
        # stripping must not create a brand-new www. token
        once = normalize_text("ww😀w.example stay")
        assert normalize_text(once) == once

    @pytest.mark.parametrize("field", ["url_token", "email_token", "user_token", "digit_token"])
    def test_token_validation(self, field):
        with pytest.raises(ValueError):
            NormalizationConfig(**{field: ""})
        with pytest.raises(ValueError):
            NormalizationConfig(**{field: "a b"})

    @given(st.text(max_size=200))
    @settings(max_examples=300, deadline=None)
    def test_idempotent(self, text):
        once = normalize_text(text)
        assert normalize_text(once) == once

    @given(st.text(alphabet="a1@#. :/😀<>\nww", max_size=60))
    @settings(max_examples=300, deadline=None)
    def test_idempotent_adversarial_alphabet(self, text):
        once = normalize_text(text)
        assert normalize_text(once) == once


class TestCorpus:
    def test_partition(self, tiny_corpus):
        sizes = {t: len(ids) for t, ids in tiny_corpus.topics.items()}
        assert sizes == {"T1": 2, "T2": 3, "T3": 4}
        assert sum(sizes.values()) == len(tiny_corpus)

    def test_duplicate_id_rejected(self):
        with pytest.raises(DuplicateId):
            Corpus([make_claim("x", "T", "a"), make_claim("x", "T", "b")])

    def test_unknown_topic_lookup(self, tiny_corpus):
        with pytest.raises(UnknownTopic):
            tiny_corpus.topic_claims("nope")


class TestLoadSave:
    def _write_jsonl(self, path, records):
        path.write_text(
            "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records),
            encoding="utf-8",
        )

    def test_load_jsonl(self, tmp_path):
        path = tmp_path / "c.jsonl"
        self._write_jsonl(
            path,
            [
                {"id": "1", "topic": "T", "text": "one 1", "label": 1},
                {"id": "2", "topic": "T", "text": "two", "label": 0},
                {"id": "3", "topic": "T", "text": "three", "label": "1"},
            ],
        )
        corpus = load_corpus(path)
        assert len(corpus) == 3
        assert corpus.topic_ids == ("T",)
        assert corpus.claim("1").text == "one [رقم]"
        assert corpus.claim("3").label is Label.CW

    def test_unknown_label(self, tmp_path):
        path = tmp_path / "c.jsonl"
        self._write_jsonl(path, [{"id": "1", "topic": "T", "text": "x", "label": 2}])
        with pytest.raises(UnknownLabel):
            load_corpus(path)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "c.jsonl"
        self._write_jsonl(
            path,
            [
                {"id": "1", "topic": "T", "text": "x", "label": 0},
                {"id": "1", "topic": "T", "text": "y", "label": 0},
            ],
        )
        with pytest.raises(DuplicateId):
            load_corpus(path)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": "1"\n', encoding="utf-8")
        with pytest.raises(MalformedRecord) as exc:
            load_corpus(path)
        assert exc.value.line == 1

    def test_missing_field(self, tmp_path):
        path = tmp_path / "c.jsonl"
        self._write_jsonl(path, [{"id": "1", "topic": "T", "label": 0}])
        with pytest.raises(MalformedRecord):
            load_corpus(path)

    def test_load_csv_with_mapping(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text(
            "key,subject,claim,cw\nr1,T,hello there,1\nr2,T,more text,0\n",
            encoding="utf-8",
        )
        mapping = FieldMapping(id="key", topic="subject", text="claim", label="cw")
        corpus = load_corpus(path, mapping)
        assert [c.id for c in corpus] == ["r1", "r2"]

    def test_load_tsv(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text("id\ttopic\ttext\tlabel\nr1\tT\thello\t1\n", encoding="utf-8")
        assert len(load_corpus(path)) == 1

    def test_csv_missing_column(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("id,topic,text\nr1,T,hello\n", encoding="utf-8")
        with pytest.raises(MalformedRecord):
            load_corpus(path)

    def test_round_trip(self, tmp_path):
        corpus = make_synthetic([("t1", 0.1), ("t2", 0.6)], size=40)
        path = tmp_path / "round.jsonl"
        save_corpus(corpus, path)
        loaded = load_corpus(path)
        assert [c.id for c in loaded] == [c.id for c in corpus]
        assert [c.topic_id for c in loaded] == [c.topic_id for c in corpus]
        assert [c.label for c in loaded] == [c.label for c in corpus]
        assert [c.text for c in loaded] == [c.text for c in corpus]

    def test_order_preserved_within_topic(self, tmp_path):
        path = tmp_path / "c.jsonl"
        self._write_jsonl(
            path,
            [
                {"id": f"r{i}", "topic": "T" if i % 2 else "U", "text": f"t {i}", "label": 0}
                for i in range(10)
            ],
        )
        corpus = load_corpus(path)
        assert list(corpus.topics["T"]) == [f"r{i}" for i in range(10) if i % 2]
        assert list(corpus.topics["U"]) == [f"r{i}" for i in range(10) if not i % 2]


class TestMergeTopics:
    def test_counts(self, tiny_corpus):
        merged = merge_topics(tiny_corpus, {"M": {"T1", "T2"}})
        sizes = {t: len(ids) for t, ids in merged.topics.items()}
        assert sizes == {"M": 5, "T3": 4}
        assert len(merged) == len(tiny_corpus)

    def test_empty_groups_identity(self, tiny_corpus):
        assert merge_topics(tiny_corpus, {}) is tiny_corpus

    def test_unknown_topic(self, tiny_corpus):
        with pytest.raises(UnknownTopic):
            merge_topics(tiny_corpus, {"M": {"T1", "TX"}})

    def test_overlapping_groups(self, tiny_corpus):
        with pytest.raises(OverlappingGroups):
            merge_topics(tiny_corpus, {"M": {"T1", "T2"}, "N": {"T2", "T3"}})


class TestGenerateSynthetic:
    def test_sizes_exact_and_label_band(self):
        corpus = make_synthetic(
            [("t1", 0.3), ("t2", 0.3), ("t3", 0.3)], size=100, prevalence=0.3
        )
        assert len(corpus) == 300
        n_cw = sum(1 for c in corpus if c.label is Label.CW)
        assert 84 <= n_cw <= 96

    def test_deterministic(self, tmp_path):
        spec = SyntheticSpec(
            topics=(SyntheticTopic("a", 50, 0.2), SyntheticTopic("b", 50, 0.7))
        )
        first, second = generate_synthetic(spec, 42), generate_synthetic(spec, 42)
        assert first == second
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_corpus(first, p1)
        save_corpus(second, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_different_seed_differs(self):
        spec = SyntheticSpec(topics=(SyntheticTopic("a", 50, 0.2),))
        assert generate_synthetic(spec, 1) != generate_synthetic(spec, 2)

    def test_zero_overlap_means_zero_cosine(self):
        corpus = make_synthetic([("t1", 0.0), ("t2", 0.0)], size=60)
        v1 = count_vector(corpus.topic_claims("t1"))
        v2 = count_vector(corpus.topic_claims("t2"))
        assert cosine(v1, v2) == 0.0

    def test_realized_overlap_near_spec(self):
        vocab_size = 50
        corpus = make_synthetic(
            [("t1", 1.0), ("t2", 0.4), ("t3", 0.8)],
            size=150,
            vocab_size=vocab_size,
            p_signal=0.0,
        )
        vocab = {
            t: set(count_vector(corpus.topic_claims(t)).counts) for t in corpus.topic_ids
        }
        for tid, expected in [("t2", 0.4), ("t3", 0.8)]:
            realized = len(vocab["t1"] & vocab[tid]) / vocab_size
            assert abs(realized - expected) <= 0.05

    @pytest.mark.parametrize(
        "bad",
        [
            {"topics": (SyntheticTopic("a", -1),)},
            {"topics": (SyntheticTopic("a", 10),), "prevalence": 1.5},
            {"topics": (SyntheticTopic("a", 10),), "p_signal": -0.2},
            {"topics": (SyntheticTopic("a", 10, overlap=2.0),)},
            {"topics": (SyntheticTopic("a", 10), SyntheticTopic("a", 5))},
            {"topics": ()},
        ],
    )
    def test_invalid_specs(self, bad):
        with pytest.raises(InvalidSpec):
            generate_synthetic(SyntheticSpec(**bad), 0)

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(InvalidSpec):
            SyntheticSpec.from_dict({"topics": [{"id": "a", "size": 5}], "bogus": 1})
        with pytest.raises(InvalidSpec):
            SyntheticSpec.from_dict({"topics": [{"id": "a", "size": 5, "x": 1}]})

    def test_texts_are_normalization_fixed_points(self):
        corpus = make_synthetic([("t1", 0.5)], size=30)
        for claim in corpus:
            assert claim.text == claim.raw_text == normalize_text(claim.raw_text)
