"""Attribution-chain grammar: parse model outputs into structured reasoning steps,
render chains back to text in any prompting mode, convert between modes, and
remap citation indices after contexts are reshuffled.

Surface formats (one sentence per step, citations at sentence end):

    AO   Fenford Press
    CoT  The publisher of the weekly is Fenford Press. The answer is: Fenford Press
    CoC  The publisher of the weekly is Fenford Press [3]. The answer is: Fenford Press
    CoQ  The publisher of the weekly is Fenford Press ("the weekly has been
         printed by Fenford Press" [3]). The answer is: Fenford Press

Accepted citation syntax: `[8]`, adjacent `[8][17]`, comma lists `[8, 17]`.
Emitted form is always one singleton bracket per citation. Quotes are accepted
with straight or curly double quotes and emitted with straight quotes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

ANSWER_MARKER = "The answer is:"


class PromptMode(str, Enum):
    """The four prompting variants: answer-only, chain-of-thought, and the two
    attribution-grounded forms (citations; citations plus word-for-word quotes)."""

    AO = "ao"
    COT = "cot"
    COC = "coc"
    COQ = "coq"

    @classmethod
    def from_string(cls, value: str) -> "PromptMode":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown mode {value!r}; expected one of {[m.value for m in cls]}"
            ) from None


STEPWISE_MODES = (PromptMode.COT, PromptMode.COC, PromptMode.COQ)
CITING_MODES = (PromptMode.COC, PromptMode.COQ)


class ChainError(ValueError):
    """Base class for chain grammar failures."""


class ChainParseError(ChainError):
    pass


class ConversionError(ChainError):
    pass


class RenderError(ChainError):
    pass


class RemapError(ChainError):
    pass


@dataclass(frozen=True)
class Quote:
    """A word-for-word span attributed to one context document."""

    text: str
    doc: int


@dataclass(frozen=True)
class ReasoningStep:
    """One reasoning sentence with its citations and any bound quotes.

    Citation order follows appearance in the sentence; every quote's document
    index is also recorded in `citations`.
    """

    claim: str
    citations: tuple[int, ...] = ()
    quotes: tuple[Quote, ...] = ()


@dataclass(frozen=True)
class AttributionChain:
    """A parsed model output: ordered steps plus the final answer.

    `raw` keeps the original text for provenance and is excluded from equality,
    so a parse/render round trip compares equal to its source chain.
    """

    steps: tuple[ReasoningStep, ...]
    answer: str
    raw: str = field(default="", compare=False)


_CITATION_GROUP = re.compile(r"\[(\d+(?:\s*,\s*\d+)*)\]")
# Parenthesized quote immediately followed by its citation bracket(s), e.g.
# ("printed by Fenford Press" [3])
_QUOTE_GROUP = re.compile(
    r"\(\s*[\"“](?P<text>.*?)[\"”]\s*(?P<cites>(?:\[\d+(?:\s*,\s*\d+)*\]\s*)+)\)",
    re.DOTALL,
)


def _expand_citation_list(group: str) -> list[int]:
    return [int(part) for part in group.split(",")]


def _split_sentences(text: str) -> list[str]:
    """Split on sentence-ending periods outside quotes and parentheses."""
    sentences: list[str] = []
    buf: list[str] = []
    depth = 0
    in_quote = False
    for ch in text:
        buf.append(ch)
        if ch == '"':
            in_quote = not in_quote
        elif ch == "“":
            in_quote = True
        elif ch == "”":
            in_quote = False
        elif not in_quote and ch == "(":
            depth += 1
        elif not in_quote and ch == ")":
            depth = max(0, depth - 1)
        elif ch == "." and depth == 0 and not in_quote:
            sentences.append("".join(buf))
            buf = []
    if "".join(buf).strip():
        sentences.append("".join(buf))
    return [s for s in (sent.strip() for sent in sentences) if s]


def _parse_step(sentence: str) -> ReasoningStep | None:
    body = sentence.strip()
    if body.endswith("."):
        body = body[:-1]

    # (position, indices, quote-or-None) for every attribution group found
    groups: list[tuple[int, list[int], str | None]] = []
    spans: list[tuple[int, int]] = []
    for match in _QUOTE_GROUP.finditer(body):
        indices: list[int] = []
        for cite in _CITATION_GROUP.finditer(match.group("cites")):
            indices.extend(_expand_citation_list(cite.group(1)))
        groups.append((match.start(), indices, match.group("text")))
        spans.append(match.span())
    for match in _CITATION_GROUP.finditer(body):
        if any(start <= match.start() < end for start, end in spans):
            continue
        groups.append((match.start(), _expand_citation_list(match.group(1)), None))
        spans.append(match.span())

    citations: list[int] = []
    quotes: list[Quote] = []
    for _, indices, quote_text in sorted(groups, key=lambda g: g[0]):
        citations.extend(indices)
        if quote_text is not None:
            quotes.append(Quote(text=quote_text, doc=indices[0]))

    claim = body
    for start, end in sorted(spans, reverse=True):
        claim = claim[:start] + claim[end:]
    claim = re.sub(r"\s+", " ", claim).strip()

    if not claim and not citations:
        return None
    return ReasoningStep(claim=claim, citations=tuple(citations), quotes=tuple(quotes))


def _answer_after_marker(text: str, marker_pos: int) -> str:
    answer = text[marker_pos + len(ANSWER_MARKER):].strip()
    if answer.endswith("."):
        answer = answer[:-1]
    return answer


def extract_answer(text: str) -> str:
    """Answer after the last "The answer is:" marker (one trailing period
    trimmed); the full trimmed text when no marker is present."""
    pos = text.rfind(ANSWER_MARKER)
    if pos == -1:
        return text.strip()
    return _answer_after_marker(text, pos)


def parse_chain(text: str, mode: PromptMode) -> AttributionChain:
    """Parse a raw model output in the given mode.

    Raises ChainParseError in CoT/CoC/CoQ mode when the answer marker is
    missing, the answer is empty, or no reasoning steps precede the marker.
    AO outputs never fail: the whole trimmed text is the answer when no
    marker is present.
    """
    pos = text.rfind(ANSWER_MARKER)
    if mode is PromptMode.AO:
        answer = text.strip() if pos == -1 else _answer_after_marker(text, pos)
        return AttributionChain(steps=(), answer=answer, raw=text)

    if pos == -1:
        raise ChainParseError("no answer marker")
    answer = _answer_after_marker(text, pos)
    if not answer:
        raise ChainParseError("empty answer after marker")

    steps = []
    for sentence in _split_sentences(text[:pos]):
        step = _parse_step(sentence)
        if step is not None:
            steps.append(step)
    if not steps:
        raise ChainParseError("no reasoning steps before answer marker")
    return AttributionChain(steps=tuple(steps), answer=answer, raw=text)


def _strip_step(step: ReasoningStep, keep_citations: bool) -> ReasoningStep:
    return ReasoningStep(
        claim=step.claim,
        citations=step.citations if keep_citations else (),
        quotes=(),
    )


def convert(chain: AttributionChain, target_mode: PromptMode) -> AttributionChain:
    """Drop information to reach the target mode; never invents it.

    Allowed direction is downward only (CoQ -> CoC -> CoT -> AO); converting a
    chain that lacks the target's required fields is an error. Idempotent.
    """
    if target_mode is PromptMode.AO:
        return AttributionChain(steps=(), answer=chain.answer, raw=chain.raw)
    if not chain.steps:
        raise ConversionError(f"conversion to {target_mode.value} would add information: chain has no steps")
    if target_mode is PromptMode.COT:
        steps = tuple(_strip_step(s, keep_citations=False) for s in chain.steps)
        return AttributionChain(steps=steps, answer=chain.answer, raw=chain.raw)
    if target_mode is PromptMode.COC:
        for i, step in enumerate(chain.steps, start=1):
            if not step.citations:
                raise ConversionError(
                    f"conversion to coc would add information: step {i} has no citations"
                )
        steps = tuple(_strip_step(s, keep_citations=True) for s in chain.steps)
        return AttributionChain(steps=steps, answer=chain.answer, raw=chain.raw)
    # CoQ: only a chain that already carries quotes everywhere qualifies.
    for i, step in enumerate(chain.steps, start=1):
        if not step.quotes:
            raise ConversionError(
                f"conversion to coq would add information: step {i} has no quotes"
            )
    return AttributionChain(steps=chain.steps, answer=chain.answer, raw=chain.raw)


def _render_step(step: ReasoningStep, mode: PromptMode, index: int) -> str:
    if mode is PromptMode.COT:
        return f"{step.claim}."
    parts = [step.claim]
    if mode is PromptMode.COC:
        parts.extend(f"[{c}]" for c in step.citations)
    else:
        pending: dict[int, list[Quote]] = {}
        for quote in step.quotes:
            if quote.doc not in step.citations:
                raise RenderError(
                    f"step {index}: quote cites document {quote.doc} "
                    "which is not in the step's citations"
                )
            pending.setdefault(quote.doc, []).append(quote)
        for cite in step.citations:
            queue = pending.get(cite)
            if queue:
                quote = queue.pop(0)
                parts.append(f'("{quote.text}" [{cite}])')
            else:
                parts.append(f"[{cite}]")
        leftover = sum(len(q) for q in pending.values())
        if leftover:
            raise RenderError(
                f"step {index}: {leftover} quote(s) exceed the step's citation slots"
            )
    return " ".join(parts) + "."


def render_chain(chain: AttributionChain, mode: PromptMode) -> str:
    """Render to the mode's canonical surface form.

    parse_chain(render_chain(c, m), m) reproduces c's steps, citations,
    quotes, and answer for any chain carrying the fields m requires.
    """
    if mode is PromptMode.AO:
        if chain.steps:
            raise RenderError("ao rendering requires a step-free chain; convert first")
        return chain.answer
    if not chain.steps:
        raise RenderError(f"{mode.value} rendering requires at least one step")
    for i, step in enumerate(chain.steps, start=1):
        if mode in CITING_MODES and not step.citations:
            raise RenderError(f"{mode.value} rendering requires citations: step {i} has none")
        if mode is PromptMode.COQ and not step.quotes:
            raise RenderError(f"coq rendering requires quotes: step {i} has none")
    rendered = " ".join(_render_step(s, mode, i) for i, s in enumerate(chain.steps, start=1))
    return f"{rendered} {ANSWER_MARKER} {chain.answer}"


def remap_citations(chain: AttributionChain, index_map: dict[int, int]) -> AttributionChain:
    """Rewrite every citation and quote binding through index_map; claims and
    the answer are untouched. Raises RemapError naming any unmapped index."""
    steps = []
    for step in chain.steps:
        for cite in step.citations:
            if cite not in index_map:
                raise RemapError(f"unmapped citation {cite}")
        steps.append(
            ReasoningStep(
                claim=step.claim,
                citations=tuple(index_map[c] for c in step.citations),
                quotes=tuple(Quote(text=q.text, doc=index_map[q.doc]) for q in step.quotes),
            )
        )
    return AttributionChain(steps=tuple(steps), answer=chain.answer, raw=chain.raw)


def cited_documents(chain: AttributionChain) -> set[int]:
    """The set of document indices cited anywhere in the chain."""
    return {c for step in chain.steps for c in step.citations}


def chain_to_record(chain: AttributionChain, id: str | None = None) -> dict:
    record = {
        "steps": [
            {
                "claim": step.claim,
                "citations": list(step.citations),
                "quotes": [{"text": q.text, "doc": q.doc} for q in step.quotes],
            }
            for step in chain.steps
        ],
        "answer": chain.answer,
        "raw": chain.raw,
    }
    if id is not None:
        record["id"] = id
    return record


def chain_from_record(record: dict) -> AttributionChain:
    try:
        steps = tuple(
            ReasoningStep(
                claim=s["claim"],
                citations=tuple(int(c) for c in s.get("citations", [])),
                quotes=tuple(Quote(text=q["text"], doc=int(q["doc"])) for q in s.get("quotes", [])),
            )
            for s in record["steps"]
        )
        return AttributionChain(steps=steps, answer=record["answer"], raw=record.get("raw", ""))
    except KeyError as exc:
        raise ValueError(f"chain record missing field: {exc.args[0]}") from None
