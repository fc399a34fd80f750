"""Chain grammar: parsing, rendering, conversion, remapping, round trips."""

from __future__ import annotations

import random

import pytest

from attrqa.chains import (
    AttributionChain,
    ChainParseError,
    ConversionError,
    PromptMode,
    Quote,
    ReasoningStep,
    RemapError,
    RenderError,
    chain_from_record,
    chain_to_record,
    cited_documents,
    convert,
    extract_answer,
    parse_chain,
    remap_citations,
    render_chain,
)

from helpers import COC_TEXT, COQ_TEXT, COT_TEXT


class TestParse:
    def test_coc_exemplar(self):
        chain = parse_chain(COC_TEXT, PromptMode.COC)
        assert len(chain.steps) == 3
        assert [s.citations for s in chain.steps] == [(8,), (17,), (19,)]
        assert chain.answer == "jazz"
        assert chain.steps[0].claim == "The Crush Tour is performed by the band Bon Jovi"

    def test_coq_exemplar_quotes_bound(self):
        chain = parse_chain(COQ_TEXT, PromptMode.COQ)
        assert len(chain.steps) == 3
        assert chain.steps[0].quotes == (Quote("The Crush Tour is a third concert", 8),)
        assert chain.steps[1].quotes == (Quote("Bounce is the eighth studio album by American", 17),)
        assert chain.steps[2].quotes == (Quote("The Antidote is the debut album by English jazz", 19),)
        assert [s.citations for s in chain.steps] == [(8,), (17,), (19,)]
        assert chain.answer == "jazz"

    def test_ao_bare_answer(self):
        chain = parse_chain("jazz", PromptMode.AO)
        assert chain.steps == ()
        assert chain.answer == "jazz"

    def test_ao_honors_marker_when_present(self):
        chain = parse_chain("The answer is: jazz.", PromptMode.AO)
        assert chain.answer == "jazz"

    def test_missing_marker_fails_in_stepwise_modes(self):
        with pytest.raises(ChainParseError, match="no answer marker"):
            parse_chain("Some reasoning without a conclusion.", PromptMode.COT)

    def test_no_steps_fails_in_stepwise_modes(self):
        with pytest.raises(ChainParseError, match="no reasoning steps"):
            parse_chain("The answer is: jazz", PromptMode.COC)

    def test_comma_citation_list(self):
        chain = parse_chain("Both sources agree [8, 17]. The answer is: x", PromptMode.COC)
        assert chain.steps[0].citations == (8, 17)

    def test_adjacent_citations(self):
        chain = parse_chain("Both sources agree [8][17]. The answer is: x", PromptMode.COC)
        assert chain.steps[0].citations == (8, 17)

    def test_curly_quotes_accepted(self):
        text = "The label is Island (“Bounce is the eighth studio album” [17]). The answer is: x"
        chain = parse_chain(text, PromptMode.COQ)
        assert chain.steps[0].quotes == (Quote("Bounce is the eighth studio album", 17),)

    def test_period_inside_quote_does_not_split(self):
        text = 'The record shows it ("Released Oct. 8, 2002 by the label" [17]). The answer is: x'
        chain = parse_chain(text, PromptMode.COQ)
        assert len(chain.steps) == 1
        assert chain.steps[0].quotes[0].text == "Released Oct. 8, 2002 by the label"

    def test_duplicate_citations_preserved(self):
        chain = parse_chain("A claim [4, 4]. The answer is: x", PromptMode.COC)
        assert chain.steps[0].citations == (4, 4)

    def test_raw_preserved_and_excluded_from_equality(self):
        chain = parse_chain(COC_TEXT, PromptMode.COC)
        assert chain.raw == COC_TEXT
        clone = AttributionChain(steps=chain.steps, answer=chain.answer, raw="other")
        assert clone == chain


class TestExtractAnswer:
    def test_marker(self):
        assert extract_answer("Reasoning. The answer is: jazz") == "jazz"

    def test_last_marker_wins(self):
        assert extract_answer("The answer is: A. The answer is: B.") == "B"

    def test_no_marker_returns_trimmed_text(self):
        assert extract_answer("  Benny Beaver \n") == "Benny Beaver"

    def test_single_trailing_period_trimmed(self):
        assert extract_answer("The answer is: U.S.") == "U.S"
        assert extract_answer("The answer is: jazz..") == "jazz."

    def test_agrees_with_parse_chain(self):
        for text, mode in [
            (COC_TEXT, PromptMode.COC),
            (COQ_TEXT, PromptMode.COQ),
            (COT_TEXT, PromptMode.COT),
        ]:
            assert extract_answer(text) == parse_chain(text, mode).answer


class TestConvert:
    def test_coq_to_coc_matches_exemplar(self):
        chain = parse_chain(COQ_TEXT, PromptMode.COQ)
        coc = convert(chain, PromptMode.COC)
        assert render_chain(coc, PromptMode.COC) == COC_TEXT

    def test_coq_to_cot_drops_attributions(self):
        chain = parse_chain(COQ_TEXT, PromptMode.COQ)
        cot = convert(chain, PromptMode.COT)
        assert all(s.citations == () and s.quotes == () for s in cot.steps)
        assert [s.claim for s in cot.steps] == [s.claim for s in chain.steps]

    def test_any_chain_to_ao(self):
        for text, mode in [(COC_TEXT, PromptMode.COC), (COQ_TEXT, PromptMode.COQ)]:
            ao = convert(parse_chain(text, mode), PromptMode.AO)
            assert ao.steps == ()
            assert ao.answer == "jazz"

    def test_information_adding_conversion_rejected(self):
        cot = parse_chain(COT_TEXT, PromptMode.COT)
        with pytest.raises(ConversionError):
            convert(cot, PromptMode.COC)
        with pytest.raises(ConversionError):
            convert(cot, PromptMode.COQ)
        coc = parse_chain(COC_TEXT, PromptMode.COC)
        with pytest.raises(ConversionError):
            convert(coc, PromptMode.COQ)

    def test_idempotent(self):
        chain = parse_chain(COQ_TEXT, PromptMode.COQ)
        for mode in PromptMode:
            once = convert(chain, mode)
            assert convert(once, mode) == once


class TestRender:
    def test_coc_exemplar_byte_exact(self):
        assert render_chain(parse_chain(COC_TEXT, PromptMode.COC), PromptMode.COC) == COC_TEXT

    def test_coq_exemplar_byte_exact(self):
        assert render_chain(parse_chain(COQ_TEXT, PromptMode.COQ), PromptMode.COQ) == COQ_TEXT

    def test_ao_zero_steps(self):
        assert render_chain(AttributionChain(steps=(), answer="x"), PromptMode.AO) == "x"

    def test_ao_with_steps_rejected(self):
        chain = parse_chain(COC_TEXT, PromptMode.COC)
        with pytest.raises(RenderError):
            render_chain(chain, PromptMode.AO)

    def test_missing_fields_rejected(self):
        cot = parse_chain(COT_TEXT, PromptMode.COT)
        with pytest.raises(RenderError):
            render_chain(cot, PromptMode.COC)
        coc = parse_chain(COC_TEXT, PromptMode.COC)
        with pytest.raises(RenderError):
            render_chain(coc, PromptMode.COQ)

    def test_multi_citation_emitted_as_singletons(self):
        chain = AttributionChain(
            steps=(ReasoningStep(claim="Both agree", citations=(8, 17)),), answer="x"
        )
        assert render_chain(chain, PromptMode.COC) == "Both agree [8] [17]. The answer is: x"

    def test_two_quotes_on_a_doubly_cited_document(self):
        step = ReasoningStep(
            claim="Twice grounded", citations=(8, 8),
            quotes=(Quote("first span", 8), Quote("second span", 8)),
        )
        chain = AttributionChain(steps=(step,), answer="x")
        rendered = render_chain(chain, PromptMode.COQ)
        assert rendered == 'Twice grounded ("first span" [8]) ("second span" [8]). The answer is: x'
        assert parse_chain(rendered, PromptMode.COQ) == chain

    def test_quote_without_citation_slot_rejected(self):
        step = ReasoningStep(
            claim="Overfull", citations=(8,),
            quotes=(Quote("first span", 8), Quote("second span", 8)),
        )
        chain = AttributionChain(steps=(step,), answer="x")
        with pytest.raises(RenderError, match="exceed the step's citation slots"):
            render_chain(chain, PromptMode.COQ)

    def test_quote_bound_to_uncited_document_rejected(self):
        step = ReasoningStep(claim="Astray", citations=(8,), quotes=(Quote("span", 9),))
        chain = AttributionChain(steps=(step,), answer="x")
        with pytest.raises(RenderError, match="not in the step's citations"):
            render_chain(chain, PromptMode.COQ)


def _random_chain(rng: random.Random, mode: PromptMode) -> AttributionChain:
    """A canonical chain carrying exactly the fields the mode needs."""
    words = ["harbor", "ledger", "violet", "archive", "meridian", "copper", "lattice", "orchard"]

    def phrase(n):
        return " ".join(rng.choice(words) for _ in range(n)).capitalize()

    if mode is PromptMode.AO:
        return AttributionChain(steps=(), answer=phrase(2))
    steps = []
    used = iter(rng.sample(range(1, 40), 12))
    for _ in range(rng.randint(1, 4)):
        claim = phrase(rng.randint(3, 7))
        if mode is PromptMode.COT:
            steps.append(ReasoningStep(claim=claim))
            continue
        cites = tuple(next(used) for _ in range(rng.randint(1, 2)))
        if mode is PromptMode.COC:
            steps.append(ReasoningStep(claim=claim, citations=cites))
        else:
            quotes = tuple(Quote(text=phrase(rng.randint(6, 9)), doc=c) for c in cites)
            steps.append(ReasoningStep(claim=claim, citations=cites, quotes=quotes))
    return AttributionChain(steps=tuple(steps), answer=phrase(rng.randint(1, 2)))


class TestProperties:
    def test_round_trip_over_generated_chains(self):
        rng = random.Random(1234)
        for _ in range(300):
            mode = rng.choice(list(PromptMode))
            chain = _random_chain(rng, mode)
            rendered = render_chain(chain, mode)
            assert parse_chain(rendered, mode) == chain, (mode, rendered)

    def test_remap_bijection_invertible(self):
        rng = random.Random(99)
        for _ in range(100):
            chain = _random_chain(rng, PromptMode.COQ)
            cited = sorted(cited_documents(chain))
            targets = rng.sample(range(100, 200), len(cited))
            forward = dict(zip(cited, targets))
            inverse = {v: k for k, v in forward.items()}
            assert remap_citations(remap_citations(chain, forward), inverse) == chain


class TestRemap:
    def test_hand_application(self):
        chain = parse_chain(COC_TEXT, PromptMode.COC)
        remapped = remap_citations(chain, {8: 2, 17: 5, 19: 1})
        assert [s.citations for s in remapped.steps] == [(2,), (5,), (1,)]
        assert remapped.answer == chain.answer
        assert [s.claim for s in remapped.steps] == [s.claim for s in chain.steps]

    def test_identity_map(self):
        chain = parse_chain(COQ_TEXT, PromptMode.COQ)
        assert remap_citations(chain, {8: 8, 17: 17, 19: 19}) == chain

    def test_unmapped_citation_named(self):
        chain = parse_chain(COC_TEXT, PromptMode.COC)
        with pytest.raises(RemapError, match="unmapped citation 17"):
            remap_citations(chain, {8: 1, 19: 2})

    def test_quote_bindings_rewritten(self):
        chain = parse_chain(COQ_TEXT, PromptMode.COQ)
        remapped = remap_citations(chain, {8: 3, 17: 2, 19: 1})
        assert remapped.steps[0].quotes[0].doc == 3


class TestSerialization:
    def test_record_round_trip(self):
        chain = parse_chain(COQ_TEXT, PromptMode.COQ)
        record = chain_to_record(chain, id="sample-1")
        assert record["id"] == "sample-1"
        restored = chain_from_record(record)
        assert restored == chain
        assert restored.raw == chain.raw

    def test_missing_field_named(self):
        with pytest.raises(ValueError, match="missing field: steps"):
            chain_from_record({"answer": "x"})
