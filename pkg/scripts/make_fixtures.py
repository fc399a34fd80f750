#!/usr/bin/env python3
"""Regenerate the committed test fixtures under tests/fixtures/.

Builds a deterministic synthetic corpus of multi-hop instances with gold CoQ
chains, demonstration and raw-generation files, native-format adapter samples,
and records the replay cassette by running the evaluation harness against a
scripted stand-in model. Rerun after any change to prompt surfaces or request
serialization, then commit the outputs.
"""

from __future__ import annotations

import itertools
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from attrqa import chains, corpus, metrics, prompting  # noqa: E402
from attrqa.chains import AttributionChain, PromptMode, Quote, ReasoningStep  # noqa: E402
from attrqa.corpus import Document, QAInstance  # noqa: E402
from attrqa.jsonio import write_jsonl  # noqa: E402
from attrqa.llmio import Cassette, CompletionRequest, LLMClient  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"

PREFIXES = [
    "Vel", "Mar", "Tor", "Quil", "Sen", "Bryn", "Cal", "Dor", "Fen", "Gal",
    "Hol", "Ist", "Jor", "Kel", "Lum", "Ned", "Ost", "Pren", "Rud", "Sal",
]
SUFFIXES = ["mora", "dale", "wick", "brook", "haven", "ford", "mere", "stad", "burg", "holt"]
NAMES = [p + s for p, s in itertools.product(PREFIXES, SUFFIXES)]

RELATIONS = [
    "record label", "home city", "founder", "parent company", "mascot",
    "publisher", "flagship venue", "head curator", "genre", "namesake",
]

HOPS = {"fx-001": 2, "fx-002": 3, "fx-003": 2, "fx-004": 4, "fx-005": 2}
DOCS_PER_INSTANCE = 20
WRONG_ANSWER = "Gravel Harbor"


def support_body(rel: str, entity: str, target: str) -> str:
    return (
        f"{entity} maintains extensive records across the region. "
        f"The {rel} of {entity} is {target}, as documented by independent chroniclers. "
        "Archivists confirmed the entry twice."
    )


def distractor_body(rel: str, entity: str, target: str) -> str:
    return (
        f"{entity} operates under close scrutiny in the capital. "
        f"The {rel} of {entity} is {target}, though some records remain disputed. "
        "Later surveys never revisited the claim."
    )


class World:
    """One synthetic instance plus everything the scripted model needs."""

    def __init__(self, instance_id: str, hops: int, rng: random.Random, n_docs: int):
        self.id = instance_id
        names = iter(rng.sample(NAMES, len(NAMES)))
        relations = rng.sample(RELATIONS, hops)
        chain_entities = [next(names) for _ in range(hops + 1)]

        phrase = chain_entities[0]
        for rel in relations:
            phrase = f"the {rel} of {phrase}"
        self.question = f"What is {phrase}?"
        self.answer = chain_entities[-1]

        # (claim, supporting title, quote) per hop, in reasoning order
        self.steps = []
        supporting_docs = []
        for i, rel in enumerate(relations):
            entity, target = chain_entities[i], chain_entities[i + 1]
            claim = f"The {rel} of {entity} is {target}"
            supporting_docs.append((entity, support_body(rel, entity, target)))
            self.steps.append((claim, entity, claim))

        distractor_docs = []
        for _ in range(n_docs - hops):
            entity, target = next(names), next(names)
            distractor_docs.append((entity, distractor_body(rng.choice(RELATIONS), entity, target)))

        slots = list(range(n_docs))
        rng.shuffle(slots)
        layout: list[tuple[str, str, bool] | None] = [None] * n_docs
        for (title, body), slot in zip(supporting_docs, slots[:hops]):
            layout[slot] = (title, body, True)
        spare = iter(distractor_docs)
        for i in range(n_docs):
            if layout[i] is None:
                title, body = next(spare)
                layout[i] = (title, body, False)

        self.instance = QAInstance(
            id=instance_id,
            question=self.question,
            documents=tuple(
                Document(index=i, title=t, body=b, is_supporting=s)
                for i, (t, b, s) in enumerate(layout, start=1)
            ),
            answer=self.answer,
            answer_aliases=(self.answer,),
            hop_count=min(4, max(2, hops)),
        )

    def gold_chain(self) -> AttributionChain:
        by_title = {d.title: d.index for d in self.instance.documents}
        steps = tuple(
            ReasoningStep(
                claim=claim,
                citations=(by_title[title],),
                quotes=(Quote(text=quote, doc=by_title[title]),),
            )
            for claim, title, quote in self.steps
        )
        return AttributionChain(steps=steps, answer=self.answer)


def build_worlds() -> dict[str, World]:
    rng = random.Random(20240408)
    return {
        wid: World(wid, hops, random.Random(rng.randrange(2**31)), DOCS_PER_INSTANCE)
        for wid, hops in HOPS.items()
    }


def build_demos() -> list[World]:
    rng = random.Random(77)
    return [
        World(f"demo-{i:02d}", 2, random.Random(rng.randrange(2**31)), n_docs=6)
        for i in range(1, 4)
    ]


class ScriptedModel:
    """Deterministic stand-in endpoint: reads the final user turn, rebuilds the
    gold chain against the (shuffled) context it was shown, and responds in
    whatever mode the system instruction asks for.

    Behaviors: fx-003 answers wrongly; fx-004 cites one extra distractor.
    """

    def __init__(self, worlds: dict[str, World]):
        self.by_question = {w.question: w for w in worlds.values()}
        self.modes = {prompting.build_instruction(m): m for m in PromptMode}

    def __call__(self, request: CompletionRequest) -> str:
        mode = self.modes[request.system]
        final_user = request.turns[-1][1]
        question = None
        titles: dict[str, int] = {}
        first_distractor = None
        for line in final_user.splitlines():
            if line.startswith("Document ["):
                index = int(line[len("Document ["):line.index("]")])
                title = line[line.index("(Title: ") + len("(Title: "):line.index("): ")]
                titles[title] = index
            elif line.startswith("Question: "):
                question = line[len("Question: "):].removesuffix(" " + prompting.STEP_SUFFIX)
        world = self.by_question[question]

        supporting_titles = {title for _, title, _ in world.steps}
        for line in final_user.splitlines():
            if line.startswith("Document ["):
                title = line[line.index("(Title: ") + len("(Title: "):line.index("): ")]
                if title not in supporting_titles and first_distractor is None:
                    first_distractor = titles[title]

        answer = WRONG_ANSWER if world.id == "fx-003" else world.answer
        if mode is PromptMode.AO:
            return answer

        steps = []
        for claim, title, quote in world.steps:
            index = titles[title]
            steps.append(
                ReasoningStep(claim=claim, citations=(index,), quotes=(Quote(quote, index),))
            )
        if world.id == "fx-004" and first_distractor is not None:
            # every distractor body contains this 6-word span
            steps.append(
                ReasoningStep(
                    claim="The registry also references an unrelated entry",
                    citations=(first_distractor,),
                    quotes=(Quote("operates under close scrutiny in the capital", first_distractor),),
                )
            )
        chain = AttributionChain(steps=tuple(steps), answer=answer)
        return chains.render_chain(chains.convert(chain, mode), mode)


def raw_generation_records(worlds: dict[str, World]) -> list[dict]:
    """Hand-mixed raw CoQ outputs covering every curation failure kind."""

    def render(world: World, mutate=None) -> str:
        chain = world.gold_chain()
        if mutate:
            chain = mutate(chain)
        return chains.render_chain(chain, PromptMode.COQ)

    def with_answer(answer):
        return lambda c: AttributionChain(steps=c.steps, answer=answer)

    def fabricate_quote(c: AttributionChain) -> AttributionChain:
        first = c.steps[0]
        bad = ReasoningStep(
            claim=first.claim,
            citations=first.citations,
            quotes=(Quote("this sentence never appears in any document", first.quotes[0].doc),),
        )
        return AttributionChain(steps=(bad,) + c.steps[1:], answer=c.answer)

    def nonexistent_citation(c: AttributionChain) -> AttributionChain:
        first = c.steps[0]
        bad = ReasoningStep(claim=first.claim, citations=(99,), quotes=(Quote(first.quotes[0].text, 99),))
        return AttributionChain(steps=(bad,) + c.steps[1:], answer=c.answer)

    def wrong_citation(world: World):
        distractor = next(d.index for d in world.instance.documents if not d.is_supporting)
        quote = "operates under close scrutiny in the capital"

        def mutate(c: AttributionChain) -> AttributionChain:
            first = c.steps[0]
            bad = ReasoningStep(claim=first.claim, citations=(distractor,), quotes=(Quote(quote, distractor),))
            return AttributionChain(steps=(bad,) + c.steps[1:], answer=c.answer)

        return mutate

    def repeat_citation(c: AttributionChain) -> AttributionChain:
        return AttributionChain(steps=c.steps + (c.steps[0],), answer=c.answer)

    def short_quote(c: AttributionChain) -> AttributionChain:
        first = c.steps[0]
        # first five words of the gold quote stay a substring but are too short
        clipped = " ".join(first.quotes[0].text.split()[:5])
        bad = ReasoningStep(
            claim=first.claim, citations=first.citations,
            quotes=(Quote(clipped, first.quotes[0].doc),),
        )
        return AttributionChain(steps=(bad,) + c.steps[1:], answer=c.answer)

    def whole_document_quote(world: World):
        def mutate(c: AttributionChain) -> AttributionChain:
            first = c.steps[0]
            doc = next(d for d in world.instance.documents if d.index == first.quotes[0].doc)
            bad = ReasoningStep(
                claim=first.claim, citations=first.citations,
                quotes=(Quote(doc.body, doc.index),),
            )
            return AttributionChain(steps=(bad,) + c.steps[1:], answer=c.answer)

        return mutate

    w = worlds
    records = [
        {"id": "fx-001", "response": render(w["fx-001"])},
        {"id": "fx-002", "response": render(w["fx-002"])},
        {"id": "fx-003", "response": render(w["fx-003"], with_answer(WRONG_ANSWER))},
        {"id": "fx-004", "response": render(w["fx-004"], fabricate_quote)},
        {"id": "fx-005", "response": render(w["fx-005"], nonexistent_citation)},
        {"id": "fx-001", "response": render(w["fx-001"], wrong_citation(w["fx-001"]))},
        {"id": "fx-002", "response": render(w["fx-002"], repeat_citation)},
        {"id": "fx-003", "response": render(w["fx-003"], short_quote)},
        {"id": "fx-004", "response": render(w["fx-004"], whole_document_quote(w["fx-004"]))},
        {"id": "fx-005", "response": "I cannot find the answer in these documents."},
        {"id": "fx-005", "response": render(w["fx-005"])},
        {"id": "fx-002", "response": render(w["fx-002"], with_answer("the " + w["fx-002"].answer))},
    ]
    return records


def native_format_samples() -> None:
    rng = random.Random(5150)
    paragraphs = []
    support_slots = {3, 9, 15}
    for i in range(20):
        a, b = rng.sample(NAMES, 2)
        paragraphs.append(
            {
                "idx": i,
                "title": a,
                "paragraph_text": distractor_body(rng.choice(RELATIONS), a, b),
                "is_supporting": i in support_slots,
            }
        )
    musique = {
        "id": "3hop__fixture_0001",
        "question": "What is the home city of the founder of the record label of Velmora?",
        "paragraphs": paragraphs,
        "question_decomposition": [
            {"question": "What is the record label of Velmora?", "answer": "Kelford"},
            {"question": "Who founded Kelford?", "answer": "Senholt"},
            {"question": "What is the home city of Senholt?", "answer": "Ostmere"},
        ],
        "answer": "Ostmere",
        "answer_aliases": ["Ostmere City"],
        "answerable": True,
    }
    write_jsonl(FIXTURES / "musique_sample.jsonl", [musique])

    twowiki = {
        "_id": "2wiki-fixture-1",
        "question": "Who is the founder of the publisher of Quilbrook Weekly?",
        "context": [
            ["Quilbrook Weekly", ["Quilbrook Weekly is printed by Fenford Press.", " It runs each autumn."]],
            ["Fenford Press", ["Fenford Press was founded by Lumdale.", " Its archive burned twice."]],
            ["Torwick Society", ["The Torwick Society curates maps.", " It meets monthly."]],
        ],
        "supporting_facts": [["Quilbrook Weekly", 0], ["Fenford Press", 0]],
        "evidences": [],
        "answer": "Lumdale",
        "type": "compositional",
    }
    write_jsonl(FIXTURES / "twowiki_sample.jsonl", [twowiki])

    hotpot = {
        "_id": "hotpot-fixture-1",
        "question": "What is the mascot of the university attended by Brynholt?",
        "context": [
            ["Brynholt", ["Brynholt attended Salmere University.", " He studied chemistry."]],
            ["Salmere University", ["The mascot of Salmere University is the Copper Heron.", " It was adopted in 1921."]],
            ["Galburg Harbor", ["Galburg Harbor ships grain.", " Its docks are wooden."]],
        ],
        "supporting_facts": [["Brynholt", 0], ["Salmere University", 0]],
        "answer": "Copper Heron",
        "type": "bridge",
        "level": "easy",
    }
    write_jsonl(FIXTURES / "hotpot_sample.jsonl", [hotpot])


def record_cassette(worlds: dict[str, World], demo_worlds: list[World]) -> None:
    cassette_path = FIXTURES / "cassette.jsonl"
    if cassette_path.exists():
        cassette_path.unlink()
    cassette = Cassette(cassette_path, mode="record")
    # single-lane recording keeps the cassette line order reproducible
    client = LLMClient(
        model_name="scripted-v1", cassette=cassette, transport=ScriptedModel(worlds), parallelism=1
    )

    instances = [worlds[wid].instance for wid in sorted(worlds)]
    for mode in PromptMode:
        mode_demos = [
            prompting.make_demonstration(w.instance, w.gold_chain(), mode) for w in demo_worlds
        ]
        metrics.evaluate_corpus(
            instances, client, mode, seeds=(1, 2, 3), demos=mode_demos, shots=2
        )
    coc_demos = [prompting.make_demonstration(w.instance, w.gold_chain(), PromptMode.COC) for w in demo_worlds]
    metrics.sweep_noise(
        instances, client, PromptMode.COC, ratios=[0, 100], seeds=(1,), demos=coc_demos, shots=2
    )
    coq_demos = [prompting.make_demonstration(w.instance, w.gold_chain(), PromptMode.COQ) for w in demo_worlds]
    metrics.collect_generations(instances, client, coq_demos, shots=2, seed=0)
    print(f"recorded {len(cassette.entries)} cassette entries")


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    worlds = build_worlds()
    demo_worlds = build_demos()

    corpus.save_corpus([worlds[wid].instance for wid in sorted(worlds)], FIXTURES / "corpus.jsonl")
    corpus.save_annotated(
        [(w.instance, w.gold_chain()) for w in (worlds[wid] for wid in sorted(worlds))],
        FIXTURES / "gold.jsonl",
    )
    corpus.save_annotated(
        [(w.instance, w.gold_chain()) for w in demo_worlds], FIXTURES / "demos.jsonl"
    )
    write_jsonl(FIXTURES / "raw_coq.jsonl", raw_generation_records(worlds))
    native_format_samples()
    record_cassette(worlds, demo_worlds)
    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
