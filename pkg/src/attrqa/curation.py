"""Dataset curation: the five filter rules applied to raw annotated generations.

A sample is kept only when its answer matches a reference after normalization,
every citation and quote exists in the context, every citation lands on a
supporting document, no document is cited twice, and every quote is longer
than five words without spanning its whole document. Verdicts record every
failing rule; the corpus-level report publishes incidence under both
denominators (fraction of all samples, and first-failure fraction of rejected
samples in rule order) since either reading of the published rates is
defensible.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from . import chains
from .chains import AttributionChain
from .corpus import Document, QAInstance, count_words
from .metrics import normalize_answer


class FailureKind(str, Enum):
    """The five rejection rules, in report order."""

    INCORRECT_ANSWER = "IncorrectAnswer"
    NON_EXISTENT_ATTRIBUTION = "NonExistentAttribution"
    INCORRECT_CITATION = "IncorrectCitation"
    REPEATED_CITATION = "RepeatedCitation"
    EXTREME_QUOTE = "ExtremeQuote"


FAILURE_ORDER = tuple(FailureKind)

CheckResult = tuple[bool, list[str]]


@dataclass(frozen=True)
class CurationVerdict:
    sample_id: str
    failures: tuple[FailureKind, ...]
    details: tuple[str, ...]

    @property
    def kept(self) -> bool:
        return not self.failures

    def to_record(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "kept": self.kept,
            "failures": [f.value for f in self.failures],
            "details": list(self.details),
        }


@dataclass(frozen=True)
class CurationReport:
    total_in: int
    total_kept: int
    incidence_any: dict[str, float]
    incidence_among_rejected: dict[str, float]
    no_citation_samples: int

    def to_dict(self) -> dict:
        return {
            "total_in": self.total_in,
            "total_kept": self.total_kept,
            "incidence_any": dict(self.incidence_any),
            "incidence_among_rejected": dict(self.incidence_among_rejected),
            "no_citation_samples": self.no_citation_samples,
        }


def _collapse_ws(text: str) -> str:
    return " ".join(text.split())


def check_answer(chain: AttributionChain, answer: str, aliases: Sequence[str] = ()) -> CheckResult:
    """Pass iff the normalized prediction equals the normalized gold answer or
    any alias."""
    predicted = normalize_answer(chain.answer)
    references = [answer, *aliases]
    if any(predicted == normalize_answer(ref) for ref in references):
        return True, []
    return False, [f"answer {chain.answer!r} does not match any of {len(references)} references"]


def check_attribution_existence(
    chain: AttributionChain, documents: Sequence[Document]
) -> CheckResult:
    """Every citation must name an existing document and every quote must occur
    verbatim (after whitespace collapsing) in its cited document's body."""
    by_index = {d.index: d for d in documents}
    reasons = []
    for step in chain.steps:
        for cite in step.citations:
            if cite not in by_index:
                reasons.append(f"citation {cite} does not exist")
        for quote in step.quotes:
            doc = by_index.get(quote.doc)
            if doc is None:
                continue  # the missing citation is already reported above
            if _collapse_ws(quote.text) not in _collapse_ws(doc.body):
                reasons.append(f'quote not found in document {quote.doc}: "{quote.text}"')
    return not reasons, reasons


def check_citation_correctness(
    chain: AttributionChain, supporting_ids: Iterable[int]
) -> CheckResult:
    """Every cited document must be among the supporting documents. A chain
    with zero citations passes vacuously (surfaced via the report instead)."""
    supporting = set(supporting_ids)
    reasons = []
    for step in chain.steps:
        for cite in step.citations:
            if cite not in supporting:
                reasons.append(f"citation {cite} is not a supporting document")
    return not reasons, reasons


def check_repeated_citations(chain: AttributionChain) -> CheckResult:
    """Fail when any document is cited more than once, across steps or within one."""
    seen: set[int] = set()
    reasons = []
    for step in chain.steps:
        for cite in step.citations:
            if cite in seen:
                reasons.append(f"document {cite} cited more than once")
            seen.add(cite)
    return not reasons, reasons


def check_quote_lengths(chain: AttributionChain, documents: Sequence[Document]) -> CheckResult:
    """Every quote must be longer than five words and a strict substring of its
    cited document's body (never the entire document)."""
    by_index = {d.index: d for d in documents}
    reasons = []
    for step in chain.steps:
        for quote in step.quotes:
            words = count_words(quote.text)
            if words <= 5:
                reasons.append(f'quote of {words} words is too short (needs more than 5): "{quote.text}"')
            doc = by_index.get(quote.doc)
            if doc is None:
                reasons.append(f"quote cites missing document {quote.doc}")
                continue
            collapsed, body = _collapse_ws(quote.text), _collapse_ws(doc.body)
            if collapsed == body:
                reasons.append(f"quote spans the entire document {quote.doc}")
            elif collapsed not in body:
                reasons.append(f'quote is not a substring of document {quote.doc}: "{quote.text}"')
    return not reasons, reasons


def judge(instance: QAInstance, chain: AttributionChain) -> CurationVerdict:
    """Run all five checks in rule order; every failing rule is recorded."""
    checks = (
        (FailureKind.INCORRECT_ANSWER,
         check_answer(chain, instance.answer, instance.answer_aliases)),
        (FailureKind.NON_EXISTENT_ATTRIBUTION,
         check_attribution_existence(chain, instance.documents)),
        (FailureKind.INCORRECT_CITATION,
         check_citation_correctness(chain, instance.supporting_ids)),
        (FailureKind.REPEATED_CITATION,
         check_repeated_citations(chain)),
        (FailureKind.EXTREME_QUOTE,
         check_quote_lengths(chain, instance.documents)),
    )
    failures = []
    details = []
    for kind, (ok, reasons) in checks:
        if not ok:
            failures.append(kind)
            details.extend(reasons)
    return CurationVerdict(
        sample_id=instance.id, failures=tuple(failures), details=tuple(details)
    )


def curate(
    samples: Sequence[tuple[QAInstance, AttributionChain]],
) -> tuple[list[tuple[QAInstance, AttributionChain]], list[CurationVerdict], CurationReport]:
    """Filter samples, returning the kept set, per-sample verdicts, and the
    corpus-level incidence report."""
    verdicts = [judge(instance, chain) for instance, chain in samples]
    kept = [sample for sample, verdict in zip(samples, verdicts) if verdict.kept]

    total = len(samples)
    rejected = [v for v in verdicts if not v.kept]
    incidence_any = {}
    incidence_first = {}
    for kind in FAILURE_ORDER:
        any_count = sum(1 for v in verdicts if kind in v.failures)
        first_count = sum(1 for v in rejected if v.failures[0] is kind)
        incidence_any[kind.value] = any_count / total if total else 0.0
        incidence_first[kind.value] = first_count / len(rejected) if rejected else 0.0

    no_citation = sum(
        1 for _, chain in samples if not chains.cited_documents(chain)
    )
    report = CurationReport(
        total_in=total,
        total_kept=len(kept),
        incidence_any=incidence_any,
        incidence_among_rejected=incidence_first,
        no_citation_samples=no_citation,
    )
    return kept, verdicts, report
