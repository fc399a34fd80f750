"""Normalized multi-hop QA corpora: schema, format adapters, validation,
deterministic subsampling, and dataset statistics.

Internal format is one JSON object per line with fields `id`, `question`,
`documents` ([{title, body, is_supporting}]), `answer`, `answer_aliases`,
`hop_count`, and optional `decomposition`. MuSiQue / 2WikiMultiHopQA /
HotpotQA records are mapped onto this schema; document indices are always
assigned 1-based by position at load time, regardless of any indices the
source file carries.
"""

from __future__ import annotations

import random
import re
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from . import chains
from .jsonio import read_jsonl, write_jsonl

FORMATS = ("musique", "twowiki", "hotpot", "internal")

_MUSIQUE_HOP_PREFIX = re.compile(r"^(\d+)hop")


class CorpusFormatError(ValueError):
    """A source record does not match its declared format."""


@dataclass(frozen=True)
class Document:
    """One context paragraph as rendered: `Document [index](Title: title): body`."""

    index: int
    title: str
    body: str
    is_supporting: bool = False


@dataclass(frozen=True)
class QAInstance:
    id: str
    question: str
    documents: tuple[Document, ...]
    answer: str
    answer_aliases: tuple[str, ...]
    hop_count: int
    decomposition: tuple[str, ...] | None = None

    @property
    def supporting_ids(self) -> frozenset[int]:
        return frozenset(d.index for d in self.documents if d.is_supporting)

    @property
    def references(self) -> tuple[str, ...]:
        """Gold answer plus aliases, deduplicated, answer first."""
        seen = {self.answer}
        refs = [self.answer]
        for alias in self.answer_aliases:
            if alias not in seen:
                seen.add(alias)
                refs.append(alias)
        return tuple(refs)


@dataclass(frozen=True)
class CorpusStats:
    total_samples: int
    max_words_per_sample: int
    mean_words_per_sample: float
    hop_distribution: dict[int, float]
    mean_words_per_step: float | None = None
    mean_words_per_quote: float | None = None

    def to_dict(self) -> dict:
        return {
            "total_samples": self.total_samples,
            "max_words_per_sample": self.max_words_per_sample,
            "mean_words_per_sample": self.mean_words_per_sample,
            "hop_distribution": {str(k): v for k, v in sorted(self.hop_distribution.items())},
            "mean_words_per_step": self.mean_words_per_step,
            "mean_words_per_quote": self.mean_words_per_quote,
        }


def count_words(text: str) -> int:
    """Whitespace tokens that are non-empty after stripping leading/trailing
    punctuation. This is the toolkit-wide word counting rule."""
    n = 0
    for token in text.split():
        if token.strip(string.punctuation):
            n += 1
    return n


def _require(record: dict, key: str, lineno: int):
    if key not in record:
        raise CorpusFormatError(f"line {lineno}: missing field: {key}")
    return record[key]


def _clamp_hops(n: int) -> int:
    return max(2, min(4, n))


def _documents_from(entries: list[tuple[str, str, bool]]) -> tuple[Document, ...]:
    return tuple(
        Document(index=i, title=title, body=body, is_supporting=bool(sup))
        for i, (title, body, sup) in enumerate(entries, start=1)
    )


def _load_internal(record: dict, lineno: int) -> QAInstance:
    docs = []
    for doc in _require(record, "documents", lineno):
        for key in ("title", "body"):
            if key not in doc:
                raise CorpusFormatError(f"line {lineno}: missing field: documents.{key}")
        docs.append((doc["title"], doc["body"], doc.get("is_supporting", False)))
    answer = _require(record, "answer", lineno)
    aliases = record.get("answer_aliases") or [answer]
    decomposition = record.get("decomposition")
    return QAInstance(
        id=str(_require(record, "id", lineno)),
        question=_require(record, "question", lineno),
        documents=_documents_from(docs),
        answer=answer,
        answer_aliases=tuple(aliases),
        hop_count=int(_require(record, "hop_count", lineno)),
        decomposition=tuple(decomposition) if decomposition else None,
    )


def _load_musique(record: dict, lineno: int) -> QAInstance:
    paragraphs = _require(record, "paragraphs", lineno)
    docs = []
    for par in paragraphs:
        for key in ("title", "paragraph_text"):
            if key not in par:
                raise CorpusFormatError(f"line {lineno}: missing field: paragraphs.{key}")
        docs.append((par["title"], par["paragraph_text"], par.get("is_supporting", False)))
    answer = _require(record, "answer", lineno)
    aliases = [answer] + [a for a in record.get("answer_aliases", []) if a != answer]
    instance_id = str(_require(record, "id", lineno))
    decomposition = tuple(
        step["question"] for step in record.get("question_decomposition", []) if "question" in step
    )

    hop_match = _MUSIQUE_HOP_PREFIX.match(instance_id)
    if hop_match:
        hops = int(hop_match.group(1))
    elif decomposition:
        hops = len(decomposition)
    else:
        hops = sum(1 for _, _, sup in docs if sup)
    return QAInstance(
        id=instance_id,
        question=_require(record, "question", lineno),
        documents=_documents_from(docs),
        answer=answer,
        answer_aliases=tuple(aliases),
        hop_count=_clamp_hops(hops),
        decomposition=decomposition or None,
    )


_TWOWIKI_HOPS = {"comparison": 2, "inference": 2, "compositional": 2, "bridge_comparison": 4}


def _load_title_sentence_format(record: dict, lineno: int, hops: int) -> QAInstance:
    context = _require(record, "context", lineno)
    supporting_titles = {fact[0] for fact in _require(record, "supporting_facts", lineno)}
    entries = []
    for entry in context:
        title, sentences = entry[0], entry[1]
        entries.append((title, "".join(sentences).strip(), title in supporting_titles))
    answer = _require(record, "answer", lineno)
    return QAInstance(
        id=str(_require(record, "_id", lineno)),
        question=_require(record, "question", lineno),
        documents=_documents_from(entries),
        answer=answer,
        answer_aliases=(answer,),
        hop_count=hops,
    )


def _load_twowiki(record: dict, lineno: int) -> QAInstance:
    hops = _TWOWIKI_HOPS.get(record.get("type", ""), 2)
    return _load_title_sentence_format(record, lineno, hops)


def _load_hotpot(record: dict, lineno: int) -> QAInstance:
    return _load_title_sentence_format(record, lineno, hops=2)


_LOADERS = {
    "internal": _load_internal,
    "musique": _load_musique,
    "twowiki": _load_twowiki,
    "hotpot": _load_hotpot,
}


def load_corpus(path: str | Path, format: str = "internal") -> list[QAInstance]:
    """Load one instance per line; every returned instance passes validate_instance.

    Source document order is preserved and indices are assigned by position.
    """
    if format not in _LOADERS:
        raise CorpusFormatError(f"unknown format: {format}; expected one of {FORMATS}")
    loader = _LOADERS[format]
    instances = []
    for lineno, record in read_jsonl(path):
        try:
            instance = loader(record, lineno)
        except CorpusFormatError:
            raise
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise CorpusFormatError(f"line {lineno}: malformed {format} record: {exc}") from exc
        violations = validate_instance(instance)
        if violations:
            raise CorpusFormatError(f"line {lineno}: invalid instance: {'; '.join(violations)}")
        instances.append(instance)
    return instances


def instance_to_record(instance: QAInstance) -> dict:
    record = {
        "id": instance.id,
        "question": instance.question,
        "documents": [
            {"title": d.title, "body": d.body, "is_supporting": d.is_supporting}
            for d in instance.documents
        ],
        "answer": instance.answer,
        "answer_aliases": list(instance.answer_aliases),
        "hop_count": instance.hop_count,
    }
    if instance.decomposition:
        record["decomposition"] = list(instance.decomposition)
    return record


def save_corpus(corpus: Sequence[QAInstance], path: str | Path) -> int:
    """Write the internal format. load_corpus(save_corpus(c)) is identity."""
    return write_jsonl(path, (instance_to_record(inst) for inst in corpus))


def validate_instance(instance: QAInstance) -> list[str]:
    """Invariant violations as human-readable strings; empty means valid."""
    violations = []
    seen: set[int] = set()
    for doc in instance.documents:
        if doc.index < 1:
            violations.append(f"index {doc.index} below 1")
        if doc.index in seen:
            violations.append(f"duplicate index {doc.index}")
        seen.add(doc.index)
        if not doc.title:
            violations.append(f"document {doc.index}: empty title")
        if not doc.body:
            violations.append(f"document {doc.index}: empty body")
    expected = list(range(1, len(instance.documents) + 1))
    if sorted(seen) != expected:
        violations.append("indices not contiguous from 1")
    if not any(d.is_supporting for d in instance.documents):
        violations.append("no supporting document")
    if instance.hop_count not in (2, 3, 4):
        violations.append(f"hop_count {instance.hop_count} outside {{2,3,4}}")
    return violations


def subsample(corpus: Sequence[QAInstance], n: int, seed: int) -> list[QAInstance]:
    """n distinct instances, deterministic under the seed."""
    if n > len(corpus):
        raise ValueError(f"subsample n={n} exceeds corpus size {len(corpus)}")
    return random.Random(seed).sample(list(corpus), n)


def _rendered_sample_text(instance: QAInstance, chain: chains.AttributionChain | None) -> str:
    from .prompting import render_context  # circular at module level

    parts = [render_context(instance.documents), f"Question: {instance.question}"]
    if chain is not None:
        parts.append(chain.raw or "")
    return "\n".join(parts)


WORD_COUNT_NOTE = (
    "word counts split on whitespace after stripping leading/trailing punctuation "
    "from each token, over the rendered context lines + question"
    " + the raw chain text when chains are supplied"
)


def corpus_stats(
    corpus: Sequence[QAInstance],
    chains_list: Sequence[chains.AttributionChain] | None = None,
) -> CorpusStats:
    """Dataset statistics over a non-empty corpus, optionally with one chain
    per instance for the step/quote word averages."""
    if not corpus:
        raise ValueError("corpus_stats requires a non-empty corpus")
    if chains_list is not None and len(chains_list) != len(corpus):
        raise ValueError(
            f"chain/instance count mismatch: {len(chains_list)} chains for {len(corpus)} instances"
        )

    paired: Iterable[tuple[QAInstance, chains.AttributionChain | None]]
    if chains_list is None:
        paired = ((inst, None) for inst in corpus)
    else:
        paired = zip(corpus, chains_list)

    word_counts = []
    step_counts: list[int] = []
    quote_counts: list[int] = []
    hop_counter: dict[int, int] = {}
    for instance, chain in paired:
        word_counts.append(count_words(_rendered_sample_text(instance, chain)))
        hop_counter[instance.hop_count] = hop_counter.get(instance.hop_count, 0) + 1
        if chain is not None:
            for step in chain.steps:
                step_counts.append(count_words(step.claim))
                for quote in step.quotes:
                    quote_counts.append(count_words(quote.text))

    total = len(corpus)
    return CorpusStats(
        total_samples=total,
        max_words_per_sample=max(word_counts),
        mean_words_per_sample=sum(word_counts) / total,
        hop_distribution={hop: n / total for hop, n in sorted(hop_counter.items())},
        mean_words_per_step=(sum(step_counts) / len(step_counts)) if step_counts else None,
        mean_words_per_quote=(sum(quote_counts) / len(quote_counts)) if quote_counts else None,
    )


def load_annotated(path: str | Path) -> list[tuple[QAInstance, chains.AttributionChain]]:
    """Internal-format records carrying an embedded `chain` record."""
    pairs = []
    for lineno, record in read_jsonl(path):
        if "chain" not in record:
            raise CorpusFormatError(f"line {lineno}: missing field: chain")
        instance = _load_internal(record, lineno)
        pairs.append((instance, chains.chain_from_record(record["chain"])))
    return pairs


def save_annotated(
    pairs: Sequence[tuple[QAInstance, chains.AttributionChain]], path: str | Path
) -> int:
    records = []
    for instance, chain in pairs:
        record = instance_to_record(instance)
        record["chain"] = chains.chain_to_record(chain)
        records.append(record)
    return write_jsonl(path, records)
