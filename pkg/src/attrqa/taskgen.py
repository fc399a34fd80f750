"""Training-data generation from curated samples: the four task formats
(learn-to-attribute, answer prediction, CoT generation, quote identification),
distractor-sampling + document-shuffling augmentation with citation remapping,
synthetic noise injection for evaluation sweeps, and instruction-tuning export.
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

from . import chains, prompting
from .chains import AttributionChain, PromptMode
from .corpus import Document, QAInstance
from .jsonio import write_jsonl


class TaskKind(str, Enum):
    LA = "la"  # learn to attribute: CoC target
    AP = "ap"  # answer prediction: bare answer target
    CG = "cg"  # CoT generation: citation-free reasoning target
    QI = "qi"  # quote identification: one quote + citation per line

    @classmethod
    def from_string(cls, value: str) -> "TaskKind":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown task {value!r}; expected one of {[t.value for t in cls]}"
            ) from None


_TASK_TARGET_MODE = {
    TaskKind.LA: PromptMode.COC,
    TaskKind.CG: PromptMode.COT,
    TaskKind.AP: PromptMode.AO,
}


@dataclass(frozen=True)
class TaskExample:
    id: str
    task: TaskKind
    instruction: str
    context_documents: tuple[Document, ...]
    question: str
    target: str


@dataclass(frozen=True)
class AugmentPolicy:
    """Per-copy distractor sampling and shuffling. `max_distractors` may be the
    string "all"; `copies` is the number of output examples per input."""

    min_distractors: int = 0
    max_distractors: int | str = "all"
    shuffle: bool = True
    copies: int = 2

    def __post_init__(self):
        if self.copies < 1:
            raise ValueError(f"copies must be >= 1, got {self.copies}")
        if self.max_distractors != "all" and self.min_distractors > int(self.max_distractors):
            raise ValueError(
                f"min_distractors {self.min_distractors} exceeds max {self.max_distractors}"
            )


@dataclass(frozen=True)
class NoiseSpec:
    """Fraction of distractors (0-100) to retain alongside the supporting set."""

    ratio_percent: int
    seed: int

    def __post_init__(self):
        if not 0 <= self.ratio_percent <= 100:
            raise ValueError(f"noise ratio must be 0-100, got {self.ratio_percent}")


def derive_seed(*parts) -> int:
    """Stable per-example seed from a master seed and identifying parts."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _round_half_up(x: float) -> int:
    return int(x + 0.5)


def build_examples(
    sample: tuple[QAInstance, AttributionChain], task: TaskKind
) -> TaskExample:
    """One training example from a curated (instance, CoQ chain) sample."""
    instance, chain = sample
    if task is TaskKind.QI:
        quotes = [q for step in chain.steps for q in step.quotes]
        if not quotes:
            raise ValueError(f"sample {instance.id}: chain has no quotes for the qi task")
        instruction = prompting.qi_instruction()
        target = "\n".join(f'"{q.text}" [{q.doc}]' for q in quotes)
    else:
        mode = _TASK_TARGET_MODE[task]
        instruction = prompting.build_instruction(mode)
        target = chains.render_chain(chains.convert(chain, mode), mode)
    return TaskExample(
        id=f"{instance.id}:{task.value}",
        task=task,
        instruction=instruction,
        context_documents=instance.documents,
        question=instance.question,
        target=target,
    )


_QI_LINE = re.compile(r'^"(?P<text>.*)" \[(?P<doc>\d+)\]$')


def _remap_target(target: str, task: TaskKind, index_map: dict[int, int]) -> str:
    if task in (TaskKind.AP, TaskKind.CG):
        return target
    if task is TaskKind.LA:
        chain = chains.parse_chain(target, PromptMode.COC)
        return chains.render_chain(chains.remap_citations(chain, index_map), PromptMode.COC)
    lines = []
    for line in target.splitlines():
        match = _QI_LINE.match(line)
        if not match:
            raise ValueError(f"malformed qi target line: {line!r}")
        doc = int(match.group("doc"))
        if doc not in index_map:
            raise chains.RemapError(f"unmapped citation {doc}")
        lines.append(f'"{match.group("text")}" [{index_map[doc]}]')
    return "\n".join(lines)


def _rebuild_context(
    keep: Sequence[Document], shuffle: bool, rng: random.Random
) -> tuple[tuple[Document, ...], dict[int, int]]:
    """Re-index the kept documents 1..n (optionally shuffled) and return the
    old-index -> new-index map."""
    ordered = list(keep)
    if shuffle:
        rng.shuffle(ordered)
    index_map = {}
    rebuilt = []
    for position, doc in enumerate(ordered, start=1):
        index_map[doc.index] = position
        rebuilt.append(replace(doc, index=position))
    return tuple(rebuilt), index_map


def augment(
    example: TaskExample,
    supporting_ids: Sequence[int],
    policy: AugmentPolicy,
    seed: int,
) -> list[TaskExample]:
    """policy.copies augmented variants: each keeps all supporting documents,
    samples a fresh distractor count, optionally shuffles, re-indexes from 1,
    and rewrites the target's citations so every one still points at the
    same-titled document. Deterministic under (example id, seed)."""
    supporting_set = set(supporting_ids)
    by_index = {d.index: d for d in example.context_documents}
    for sid in sorted(supporting_set):
        if sid not in by_index:
            raise ValueError(f"supporting document {sid} missing from context of {example.id}")
    distractors = [d for d in example.context_documents if d.index not in supporting_set]

    max_k = len(distractors) if policy.max_distractors == "all" else int(policy.max_distractors)
    max_k = min(max_k, len(distractors))
    min_k = min(policy.min_distractors, max_k)

    out = []
    for copy_index in range(policy.copies):
        rng = random.Random(derive_seed(seed, example.id, copy_index))
        k = rng.randint(min_k, max_k)
        chosen_ids = {d.index for d in rng.sample(distractors, k)}
        keep = [
            d for d in example.context_documents
            if d.index in supporting_set or d.index in chosen_ids
        ]
        context, index_map = _rebuild_context(keep, policy.shuffle, rng)
        out.append(
            replace(
                example,
                id=f"{example.id}:aug{copy_index}",
                context_documents=context,
                target=_remap_target(example.target, example.task, index_map),
            )
        )
    return out


def apply_noise_with_map(
    instance: QAInstance, spec: NoiseSpec
) -> tuple[QAInstance, dict[int, int]]:
    """apply_noise plus the old-index -> new-index map, for callers that must
    rewrite citations referring to the original context."""
    rng = random.Random(spec.seed)
    supporting = [d for d in instance.documents if d.is_supporting]
    distractors = [d for d in instance.documents if not d.is_supporting]
    keep_count = _round_half_up(spec.ratio_percent / 100 * len(distractors))
    chosen_ids = {d.index for d in rng.sample(distractors, keep_count)}
    keep = [d for d in instance.documents if d.is_supporting or d.index in chosen_ids]
    context, index_map = _rebuild_context(keep, shuffle=True, rng=rng)
    return replace(instance, documents=context), index_map


def apply_noise(instance: QAInstance, spec: NoiseSpec) -> QAInstance:
    """Retain all supporting documents plus round(ratio/100 * D) of the D
    distractors, shuffled and re-indexed. Ratio 0 keeps supporting only;
    ratio 100 keeps the full context."""
    noisy, _ = apply_noise_with_map(instance, spec)
    return noisy


def example_to_record(example: TaskExample) -> dict:
    """Instruction-tuning record: input is the rendered context + question block."""
    context = prompting.render_context(example.context_documents)
    return {
        "id": example.id,
        "instruction": example.instruction,
        "input": f"{context}\n\nQuestion: {example.question}\n\nAnswer:",
        "output": example.target,
    }


def export(
    examples: Sequence[TaskExample],
    path: str | Path,
    mixin: Sequence[dict] | None = None,
    seed: int = 0,
) -> int:
    """Write instruction-tuning records, interleaving an equal-sized generic
    mixin under the seed when one is supplied. Byte-deterministic."""
    records = [example_to_record(ex) for ex in examples]
    if mixin is not None:
        if len(mixin) != len(records):
            raise ValueError(
                f"mixin size {len(mixin)} does not match reasoning example count {len(records)}"
            )
        records = records + [dict(r) for r in mixin]
        random.Random(seed).shuffle(records)
    return write_jsonl(path, records)


def generate_tasks(
    samples: Sequence[tuple[QAInstance, AttributionChain]],
    tasks: Sequence[TaskKind],
    policy: AugmentPolicy,
    no_augment: Sequence[TaskKind] = (TaskKind.QI,),
    seed: int = 0,
) -> list[TaskExample]:
    """Full pipeline: per task per sample, build the base example and either
    emit it once (unaugmented tasks) or emit policy.copies augmented variants."""
    skip = set(no_augment)
    out = []
    for task in tasks:
        for instance, chain in samples:
            example = build_examples((instance, chain), task)
            if task in skip:
                out.append(example)
            else:
                out.extend(augment(example, sorted(instance.supporting_ids), policy, seed))
    return out
