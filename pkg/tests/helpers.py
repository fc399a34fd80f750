"""Shared test data: the golden exemplar texts and a matching instance."""

from __future__ import annotations

from pathlib import Path

from attrqa.corpus import Document, QAInstance

FIXTURES = Path(__file__).parent / "fixtures"

# Verbatim exemplar texts (CoC / CoQ / CoT rows of the golden example).
COC_TEXT = (
    "The Crush Tour is performed by the band Bon Jovi [8]. "
    "The record label of Bon Jovi is Island Records [17]. "
    "The genre of Island Records is jazz [19]. "
    "The answer is: jazz"
)
COQ_TEXT = (
    'The Crush Tour is performed by the band Bon Jovi ("The Crush Tour is a third concert" [8]). '
    'The record label of Bon Jovi is Island Records ("Bounce is the eighth studio album by American" [17]). '
    'The genre of Island Records is jazz ("The Antidote is the debut album by English jazz" [19]). '
    "The answer is: jazz"
)
COT_TEXT = (
    "The Crush Tour is performed by the band Bon Jovi. "
    "The record label of Bon Jovi is Island Records. "
    "The genre of Island Records is jazz. "
    "The answer is: jazz"
)

CRUSH_QUESTION = "What is the genre of the record label of the band that performed on the Crush Tour?"

_SUPPORT_BODIES = {
    8: (
        "The Crush Tour is a third concert tour by the American rock band Bon Jovi, "
        "launched in support of their seventh studio album."
    ),
    17: (
        "Bounce is the eighth studio album by American rock band Bon Jovi, released "
        "on October 8, 2002 through Island Records."
    ),
    19: (
        "The Antidote is the debut album by English jazz guitarist Ronny Jordan, "
        "released on Island Records at the height of the acid jazz movement."
    ),
}
_SUPPORT_TITLES = {8: "The Crush Tour", 17: "Bounce (Bon Jovi album)", 19: "The Antidote"}


def crush_tour_instance(n_docs: int = 20) -> QAInstance:
    """A 20-document instance shaped like the golden exemplar: supporting
    documents at indices 8, 17, 19 whose bodies contain the CoQ quotes."""
    documents = []
    for i in range(1, n_docs + 1):
        if i in _SUPPORT_BODIES:
            documents.append(
                Document(index=i, title=_SUPPORT_TITLES[i], body=_SUPPORT_BODIES[i], is_supporting=True)
            )
        else:
            documents.append(
                Document(
                    index=i,
                    title=f"Unrelated Entry {i}",
                    body=f"Entry {i} records an unrelated fact about a minor subject kept for padding purposes.",
                )
            )
    return QAInstance(
        id="crush-tour",
        question=CRUSH_QUESTION,
        documents=tuple(documents),
        answer="jazz",
        answer_aliases=("jazz",),
        hop_count=3,
    )
