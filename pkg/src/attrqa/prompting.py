"""Prompt assembly for the four reasoning modes: mode instructions loaded from
versioned template files, Table-1-style context rendering, demonstration turns,
and budget-constrained few-shot construction (demonstrations dropped from the
end until the prompt fits).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

from . import chains, corpus
from .chains import STEPWISE_MODES, PromptMode

TokenCounter = Callable[[str], int]

STEP_SUFFIX = "Think step-by-step."


class BudgetError(ValueError):
    """The zero-demonstration prompt already exceeds the token budget."""


@dataclass(frozen=True)
class Demonstration:
    """An in-context example: the instance plus its gold response rendered in
    the active mode."""

    instance: corpus.QAInstance
    target_text: str


@dataclass(frozen=True)
class PromptBundle:
    """A ready-to-send prompt: instruction for the system slot, demonstration
    dialogue turns, and the final user turn."""

    instruction: str
    turns: tuple[tuple[str, str], ...]
    final_user: str
    demos_kept: int
    estimated_tokens: int

    def as_chat_turns(self) -> tuple[tuple[str, str], ...]:
        """(role, text) turns ending with the final user turn."""
        out: list[tuple[str, str]] = []
        for user, assistant in self.turns:
            out.append(("user", user))
            out.append(("assistant", assistant))
        out.append(("user", self.final_user))
        return tuple(out)


@lru_cache(maxsize=None)
def _template(name: str) -> str:
    text = resources.files("attrqa.templates").joinpath(name).read_text(encoding="utf-8")
    return text[:-1] if text.endswith("\n") else text


def build_instruction(mode: PromptMode) -> str:
    """The mode's instruction, byte-exact as stored in its template file."""
    return _template(f"instruction_{mode.value}.txt")


def qi_instruction() -> str:
    """Fixed instruction for the quote-identification training task."""
    return _template("instruction_qi.txt")


def render_context(documents: Sequence[corpus.Document]) -> str:
    """One `Document [i](Title: <title>): <body>` line per document, in index order."""
    indices = [d.index for d in documents]
    if indices != list(range(1, len(documents) + 1)):
        raise ValueError(f"document indices not contiguous from 1: {indices}")
    return "\n".join(f"Document [{d.index}](Title: {d.title}): {d.body}" for d in documents)


def _question_block(question: str, mode: PromptMode) -> str:
    if mode in STEPWISE_MODES:
        question = f"{question} {STEP_SUFFIX}"
    return f"\n\nQuestion: {question}\n\nAnswer:"


def render_user_turn(instance: corpus.QAInstance, mode: PromptMode) -> str:
    return render_context(instance.documents) + _question_block(instance.question, mode)


def render_demo(demo: Demonstration, mode: PromptMode) -> tuple[str, str]:
    """(user text, assistant text) for one demonstration turn pair.

    The target is re-parsed in the active mode first so a mismatched
    demonstration fails loudly instead of teaching the wrong format.
    """
    try:
        chains.parse_chain(demo.target_text, mode)
    except chains.ChainParseError as exc:
        raise ValueError(
            f"demonstration {demo.instance.id} target not parsable as {mode.value}: {exc}"
        ) from exc
    return render_user_turn(demo.instance, mode), demo.target_text


def default_token_counter(text: str) -> int:
    """Whitespace-separated words times 1.3, rounded up. Callers with a real
    tokenizer should pass their own counter."""
    return math.ceil(len(text.split()) * 1.3)


def _estimate_tokens(
    instruction: str,
    turns: Sequence[tuple[str, str]],
    final_user: str,
    counter: TokenCounter,
) -> int:
    total = counter(instruction) + counter(final_user)
    for user, assistant in turns:
        total += counter(user) + counter(assistant)
    return total


def build_prompt(
    instance: corpus.QAInstance,
    mode: PromptMode,
    demos: Sequence[Demonstration] = (),
    budget: int = 16000,
    counter: TokenCounter | None = None,
) -> PromptBundle:
    """Assemble the full prompt, dropping demonstrations strictly from the end
    of the list until the estimate fits the budget."""
    counter = counter or default_token_counter
    instruction = build_instruction(mode)
    final_user = render_user_turn(instance, mode)

    base_tokens = _estimate_tokens(instruction, (), final_user, counter)
    if base_tokens > budget:
        raise BudgetError(
            f"prompt exceeds budget by {base_tokens - budget} tokens with no demonstrations"
        )

    turns = [render_demo(demo, mode) for demo in demos]
    estimate = _estimate_tokens(instruction, turns, final_user, counter)
    while turns and estimate > budget:
        turns.pop()
        estimate = _estimate_tokens(instruction, turns, final_user, counter)

    return PromptBundle(
        instruction=instruction,
        turns=tuple(turns),
        final_user=final_user,
        demos_kept=len(turns),
        estimated_tokens=estimate,
    )


def make_demonstration(
    instance: corpus.QAInstance, chain: chains.AttributionChain, mode: PromptMode
) -> Demonstration:
    """Build a demonstration from a gold chain by converting down to the mode."""
    target = chains.render_chain(chains.convert(chain, mode), mode)
    return Demonstration(instance=instance, target_text=target)


def load_demonstrations(path: str | Path, mode: PromptMode) -> list[Demonstration]:
    """Load annotated records (instance + gold CoQ chain) as demonstrations."""
    return [
        make_demonstration(instance, chain, mode)
        for instance, chain in corpus.load_annotated(path)
    ]
