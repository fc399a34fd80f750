"""Corpus loading, validation, subsampling, and statistics."""

from __future__ import annotations

import json

import pytest

from attrqa.chains import PromptMode, parse_chain
from attrqa.corpus import (
    CorpusFormatError,
    Document,
    QAInstance,
    corpus_stats,
    count_words,
    load_annotated,
    load_corpus,
    save_annotated,
    save_corpus,
    subsample,
    validate_instance,
)

from helpers import COQ_TEXT, crush_tour_instance


def _write_lines(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")


class TestLoaders:
    def test_musique_fixture_twenty_docs_three_supporting(self, fixtures_dir):
        instances = load_corpus(fixtures_dir / "musique_sample.jsonl", "musique")
        assert len(instances) == 1
        inst = instances[0]
        assert len(inst.documents) == 20
        assert sum(d.is_supporting for d in inst.documents) == 3
        assert inst.hop_count == 3  # from the 3hop__ id prefix
        assert [d.index for d in inst.documents] == list(range(1, 21))
        assert inst.answer == "Ostmere"
        assert "Ostmere City" in inst.answer_aliases
        assert inst.decomposition is not None and len(inst.decomposition) == 3

    def test_twowiki_fixture(self, fixtures_dir):
        instances = load_corpus(fixtures_dir / "twowiki_sample.jsonl", "twowiki")
        inst = instances[0]
        assert inst.hop_count == 2
        assert inst.supporting_ids == {1, 2}
        assert inst.documents[0].body.startswith("Quilbrook Weekly is printed")

    def test_hotpot_fixture(self, fixtures_dir):
        instances = load_corpus(fixtures_dir / "hotpot_sample.jsonl", "hotpot")
        inst = instances[0]
        assert inst.hop_count == 2
        assert inst.answer == "Copper Heron"
        assert sum(d.is_supporting for d in inst.documents) == 2

    def test_empty_file(self, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("", encoding="utf-8")
        assert load_corpus(empty, "internal") == []

    def test_missing_answer_field_named_with_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        record = {
            "id": "x",
            "question": "q?",
            "documents": [{"title": "T", "body": "B", "is_supporting": True}],
            "hop_count": 2,
        }
        _write_lines(path, [record])
        with pytest.raises(CorpusFormatError, match=r"line 1: missing field: answer"):
            load_corpus(path, "internal")

    def test_unknown_format_rejected(self, fixtures_dir):
        with pytest.raises(CorpusFormatError, match="unknown format"):
            load_corpus(fixtures_dir / "corpus.jsonl", "triviaqa")

    def test_source_indices_reassigned_by_position(self, tmp_path):
        path = tmp_path / "m.jsonl"
        record = {
            "id": "2hop__1_2",
            "question": "q?",
            "paragraphs": [
                {"idx": 7, "title": "A", "paragraph_text": "First body.", "is_supporting": True},
                {"idx": 3, "title": "B", "paragraph_text": "Second body.", "is_supporting": True},
            ],
            "answer": "x",
        }
        _write_lines(path, [record])
        inst = load_corpus(path, "musique")[0]
        assert [d.index for d in inst.documents] == [1, 2]
        assert [d.title for d in inst.documents] == ["A", "B"]

    def test_round_trip_identity(self, fixtures_dir, tmp_path):
        corpus = load_corpus(fixtures_dir / "corpus.jsonl", "internal")
        out = tmp_path / "roundtrip.jsonl"
        save_corpus(corpus, out)
        assert load_corpus(out, "internal") == corpus
        # and once more: export is byte-stable
        again = tmp_path / "again.jsonl"
        save_corpus(load_corpus(out, "internal"), again)
        assert out.read_bytes() == again.read_bytes()

    def test_annotated_round_trip(self, fixtures_dir, tmp_path):
        pairs = load_annotated(fixtures_dir / "gold.jsonl")
        assert len(pairs) == 5
        out = tmp_path / "annotated.jsonl"
        save_annotated(pairs, out)
        assert load_annotated(out) == pairs


class TestValidation:
    def test_well_formed_instance_empty_report(self, crush_instance):
        assert validate_instance(crush_instance) == []

    def test_duplicate_index_reported(self):
        docs = (
            Document(index=1, title="A", body="a body", is_supporting=True),
            Document(index=3, title="B", body="b body"),
            Document(index=3, title="C", body="c body"),
        )
        inst = QAInstance(
            id="x", question="q?", documents=docs, answer="a",
            answer_aliases=("a",), hop_count=2,
        )
        report = validate_instance(inst)
        assert any("duplicate index 3" in v for v in report)
        assert any("not contiguous" in v for v in report)

    def test_no_supporting_document_reported(self):
        docs = (Document(index=1, title="A", body="a body"),)
        inst = QAInstance(
            id="x", question="q?", documents=docs, answer="a",
            answer_aliases=("a",), hop_count=2,
        )
        assert any("no supporting document" in v for v in validate_instance(inst))

    def test_bad_hop_count_reported(self):
        docs = (Document(index=1, title="A", body="a body", is_supporting=True),)
        inst = QAInstance(
            id="x", question="q?", documents=docs, answer="a",
            answer_aliases=("a",), hop_count=5,
        )
        assert any("hop_count 5" in v for v in validate_instance(inst))


class TestSubsample:
    def test_full_size_returns_all_ids(self, fixtures_dir):
        corpus = load_corpus(fixtures_dir / "corpus.jsonl", "internal")
        picked = subsample(corpus, len(corpus), seed=3)
        assert sorted(i.id for i in picked) == sorted(i.id for i in corpus)

    def test_zero(self, fixtures_dir):
        corpus = load_corpus(fixtures_dir / "corpus.jsonl", "internal")
        assert subsample(corpus, 0, seed=1) == []

    def test_deterministic_double_execution(self):
        corpus = [crush_tour_instance() for _ in range(10)]
        corpus = [
            QAInstance(
                id=f"inst-{i}", question=c.question, documents=c.documents,
                answer=c.answer, answer_aliases=c.answer_aliases, hop_count=c.hop_count,
            )
            for i, c in enumerate(corpus)
        ]
        first = subsample(corpus, 3, seed=7)
        second = subsample(corpus, 3, seed=7)
        assert [i.id for i in first] == [i.id for i in second]
        assert len({i.id for i in first}) == 3

    def test_oversample_rejected(self, fixtures_dir):
        corpus = load_corpus(fixtures_dir / "corpus.jsonl", "internal")
        with pytest.raises(ValueError, match="exceeds corpus size"):
            subsample(corpus, len(corpus) + 1, seed=0)


class TestWordCounting:
    def test_punctuation_stripped_from_token_edges(self):
        assert count_words("hello, world!") == 2
        assert count_words('"quoted" (parenthesized)') == 2

    def test_pure_punctuation_tokens_dropped(self):
        assert count_words("a -- b") == 2

    def test_internal_punctuation_kept(self):
        assert count_words("U.S. records") == 2


def _one_doc_instance(instance_id: str, question: str) -> QAInstance:
    return QAInstance(
        id=instance_id,
        question=question,
        documents=(Document(index=1, title="T", body="B", is_supporting=True),),
        answer="a",
        answer_aliases=("a",),
        hop_count=2,
    )


class TestStats:
    def test_single_two_hop_distribution(self):
        stats = corpus_stats([_one_doc_instance("a", "why?")])
        assert stats.hop_distribution == {2: 1.0}

    def test_hand_counted_means(self):
        # rendered sample = "Document [1](Title: T): B\nQuestion: <q>"
        # -> 4 words for the document line + 1 for "Question:" + question words
        ten = _one_doc_instance("a", "one two three four five")  # 4 + 1 + 5 = 10
        twenty = _one_doc_instance(
            "b",
            "one two three four five six seven eight nine ten eleven twelve thirteen fourteen fifteen",
        )  # 4 + 1 + 15 = 20
        stats = corpus_stats([ten, twenty])
        assert stats.mean_words_per_sample == 15.0
        assert stats.max_words_per_sample == 20
        assert stats.total_samples == 2

    def test_hop_fractions_sum_to_one(self, fixtures_dir):
        corpus = load_corpus(fixtures_dir / "corpus.jsonl", "internal")
        stats = corpus_stats(corpus)
        assert abs(sum(stats.hop_distribution.values()) - 1.0) < 1e-9

    def test_chain_count_mismatch_rejected(self, fixtures_dir):
        corpus = load_corpus(fixtures_dir / "corpus.jsonl", "internal")
        chain = parse_chain(COQ_TEXT, PromptMode.COQ)
        with pytest.raises(ValueError, match="count mismatch"):
            corpus_stats(corpus, [chain])

    def test_step_and_quote_means(self, fixtures_dir):
        pairs = load_annotated(fixtures_dir / "gold.jsonl")
        stats = corpus_stats([i for i, _ in pairs], [c for _, c in pairs])
        # every synthetic claim/quote is "The <rel> of <X> is <Y>": 6+ words
        assert stats.mean_words_per_step is not None and stats.mean_words_per_step >= 6
        assert stats.mean_words_per_quote is not None and stats.mean_words_per_quote >= 6

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            corpus_stats([])
