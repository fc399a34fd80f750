"""Scoring and the evaluation harness: QuAC-style answer normalization, EM and
token-overlap F1 (max over references), set-overlap citation precision/recall,
multi-trial aggregation, correlation statistics with permutation p-values, and
the noise-ratio sweep that drives the prompt -> complete -> parse -> score path.
"""

from __future__ import annotations

import random
import re
import string
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from scipy import stats as scipy_stats

from . import chains, prompting
from .chains import CITING_MODES, AttributionChain, PromptMode
from .corpus import QAInstance
from .llmio import LLMClient
from .prompting import Demonstration, TokenCounter
from .taskgen import NoiseSpec, apply_noise, apply_noise_with_map, derive_seed

_ARTICLE = re.compile(r"\b(a|an|the)\b")
_PUNCT = set(string.punctuation)

CORRELATION_METHODS = ("pearson", "spearman", "kendall")


def normalize_answer(text: str) -> str:
    """Lowercase, strip ASCII punctuation, drop whole-word articles, collapse
    whitespace. Idempotent."""
    text = text.lower()
    text = "".join(ch for ch in text if ch not in _PUNCT)
    text = _ARTICLE.sub(" ", text)
    return " ".join(text.split())


def exact_match(pred: str, golds: Sequence[str]) -> int:
    """1 iff the normalized prediction equals some normalized reference."""
    if not golds:
        raise ValueError("exact_match requires at least one reference")
    normalized = normalize_answer(pred)
    return int(any(normalized == normalize_answer(g) for g in golds))


def _f1_single(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def f1(pred: str, golds: Sequence[str]) -> float:
    """Token-bag F1 between normalized strings, maximized over references."""
    if not golds:
        raise ValueError("f1 requires at least one reference")
    pred_tokens = normalize_answer(pred).split()
    return max(_f1_single(pred_tokens, normalize_answer(g).split()) for g in golds)


def citation_scores(
    predicted: Iterable[int], gold_supporting: Iterable[int]
) -> tuple[float, float]:
    """(precision, recall) of the deduplicated predicted citation set against
    the gold supporting set; empty predictions score (0, 0)."""
    gold = set(gold_supporting)
    if not gold:
        raise ValueError("citation_scores requires a non-empty gold supporting set")
    pred = set(predicted)
    if not pred:
        return 0.0, 0.0
    hits = len(pred & gold)
    return hits / len(pred), hits / len(gold)


@dataclass(frozen=True)
class ScoredPrediction:
    id: str
    em: int
    f1: float
    citation_precision: float | None = None
    citation_recall: float | None = None

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "em": self.em,
            "f1": self.f1,
            "citation_precision": self.citation_precision,
            "citation_recall": self.citation_recall,
        }


@dataclass(frozen=True)
class TrialMeans:
    em: float
    f1: float
    citation_precision: float | None
    citation_recall: float | None

    def to_dict(self) -> dict:
        return {
            "em": self.em,
            "f1": self.f1,
            "citation_precision": self.citation_precision,
            "citation_recall": self.citation_recall,
        }


@dataclass(frozen=True)
class MetricReport:
    mean_em: float
    mean_f1: float
    mean_citation_precision: float | None
    mean_citation_recall: float | None
    per_trial: tuple[TrialMeans, ...]
    performance_range: float

    def to_dict(self) -> dict:
        return {
            "mean_em": self.mean_em,
            "mean_f1": self.mean_f1,
            "mean_citation_precision": self.mean_citation_precision,
            "mean_citation_recall": self.mean_citation_recall,
            "per_trial": [t.to_dict() for t in self.per_trial],
            "performance_range": self.performance_range,
        }


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _optional_mean(values: Sequence[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return _mean(present) if present else None


def aggregate(trials: Sequence[Sequence[ScoredPrediction]]) -> MetricReport:
    """Per-trial means, then cross-trial means. performance_range is the spread
    of the per-trial EM means (for sweeps, each ratio's report is one trial of
    the outer range computation)."""
    if not trials:
        raise ValueError("aggregate requires at least one trial")
    sizes = {len(t) for t in trials}
    if len(sizes) != 1:
        raise ValueError(f"ragged trials: prediction counts {sorted(sizes)}")
    if sizes == {0}:
        raise ValueError("aggregate requires non-empty trials")

    per_trial = tuple(
        TrialMeans(
            em=_mean([p.em for p in trial]),
            f1=_mean([p.f1 for p in trial]),
            citation_precision=_optional_mean([p.citation_precision for p in trial]),
            citation_recall=_optional_mean([p.citation_recall for p in trial]),
        )
        for trial in trials
    )
    ems = [t.em for t in per_trial]
    return MetricReport(
        mean_em=_mean(ems),
        mean_f1=_mean([t.f1 for t in per_trial]),
        mean_citation_precision=_optional_mean([t.citation_precision for t in per_trial]),
        mean_citation_recall=_optional_mean([t.citation_recall for t in per_trial]),
        per_trial=per_trial,
        performance_range=max(ems) - min(ems),
    )


@dataclass(frozen=True)
class CorrelationResult:
    method: str
    coefficient: float
    p_value: float

    def to_dict(self) -> dict:
        return {"method": self.method, "coefficient": self.coefficient, "p_value": self.p_value}


def _coefficient(xs: Sequence[float], ys: Sequence[float], method: str) -> float:
    if method == "pearson":
        return float(scipy_stats.pearsonr(xs, ys)[0])
    if method == "spearman":
        return float(scipy_stats.spearmanr(xs, ys)[0])
    return float(scipy_stats.kendalltau(xs, ys)[0])  # tau-b (tie-corrected)


def correlation(
    xs: Sequence[float],
    ys: Sequence[float],
    method: str = "pearson",
    permutations: int = 1000,
    seed: int = 0,
) -> CorrelationResult:
    """Correlation coefficient with a two-sided permutation p-value.

    The p-value is the add-one estimator (count of |permuted coefficient| >=
    |observed| plus one, over permutations plus one), so it is never zero.
    """
    if method not in CORRELATION_METHODS:
        raise ValueError(f"unknown method: {method}; expected one of {CORRELATION_METHODS}")
    if len(xs) != len(ys):
        raise ValueError(f"undefined correlation: length mismatch {len(xs)} vs {len(ys)}")
    if len(xs) < 3:
        raise ValueError(f"undefined correlation: need at least 3 points, got {len(xs)}")
    if len(set(xs)) < 2 or len(set(ys)) < 2:
        raise ValueError("undefined correlation: constant series")

    observed = _coefficient(xs, ys, method)
    rng = random.Random(seed)
    shuffled = list(ys)
    extreme = 0
    for _ in range(permutations):
        rng.shuffle(shuffled)
        if abs(_coefficient(xs, shuffled, method)) >= abs(observed) - 1e-12:
            extreme += 1
    p_value = (extreme + 1) / (permutations + 1)
    return CorrelationResult(method=method, coefficient=observed, p_value=p_value)


def score_response(
    instance: QAInstance,
    references: Sequence[str],
    mode: PromptMode,
    text: str,
) -> ScoredPrediction:
    """Parse one model output and score it against the (possibly noised)
    instance it was prompted with. Unparsable outputs fall back to the
    answer-only reading so a malformed response scores rather than crashes."""
    try:
        chain = chains.parse_chain(text, mode)
    except chains.ChainParseError:
        chain = AttributionChain(steps=(), answer=chains.extract_answer(text), raw=text)
    precision = recall = None
    if mode in CITING_MODES:
        precision, recall = citation_scores(
            chains.cited_documents(chain), instance.supporting_ids
        )
    return ScoredPrediction(
        id=instance.id,
        em=exact_match(chain.answer, references),
        f1=f1(chain.answer, references),
        citation_precision=precision,
        citation_recall=recall,
    )


def _sample_demos(
    demos: Sequence[Demonstration], shots: int, seed: int
) -> list[Demonstration]:
    pool = list(demos)
    if shots >= len(pool):
        return pool
    return random.Random(derive_seed(seed, "demo-sample")).sample(pool, shots)


def _noise_demo(demo: Demonstration, mode: PromptMode, ratio: int, seed: int) -> Demonstration:
    """Noise a demonstration's context and remap its target's citations through
    the shuffle so the demo still teaches correct attributions."""
    spec = NoiseSpec(ratio, derive_seed(seed, "demo-noise", demo.instance.id, ratio))
    noisy, index_map = apply_noise_with_map(demo.instance, spec)
    chain = chains.parse_chain(demo.target_text, mode)
    target = chains.render_chain(chains.remap_citations(chain, index_map), mode)
    return Demonstration(instance=noisy, target_text=target)


def _run_trial(
    instances: Sequence[QAInstance],
    client: LLMClient,
    mode: PromptMode,
    seed: int,
    ratio: int,
    demos: Sequence[Demonstration],
    shots: int,
    budget: int,
    counter: TokenCounter | None,
    noise_demos: bool,
) -> list[ScoredPrediction]:
    subset = _sample_demos(demos, shots, seed)
    if noise_demos:
        subset = [_noise_demo(d, mode, ratio, seed) for d in subset]
    noisy_instances = []
    batch = []
    for instance in instances:
        spec = NoiseSpec(ratio, derive_seed(seed, "noise", instance.id, ratio))
        noisy = apply_noise(instance, spec)
        bundle = prompting.build_prompt(noisy, mode, subset, budget, counter)
        noisy_instances.append(noisy)
        batch.append((bundle.instruction, bundle.as_chat_turns()))
    texts = client.complete_texts(batch)
    return [
        score_response(noisy, instance.references, mode, text)
        for instance, noisy, text in zip(instances, noisy_instances, texts)
    ]


def evaluate_corpus(
    instances: Sequence[QAInstance],
    client: LLMClient,
    mode: PromptMode,
    seeds: Sequence[int] = (1, 2, 3),
    demos: Sequence[Demonstration] = (),
    shots: int = 5,
    budget: int = 16000,
    counter: TokenCounter | None = None,
) -> MetricReport:
    """The standard protocol: per trial seed, shuffle each full context, build
    the few-shot prompt, complete, parse, score; then average across trials."""
    trials = [
        _run_trial(
            instances, client, mode, seed, ratio=100, demos=demos, shots=shots,
            budget=budget, counter=counter, noise_demos=False,
        )
        for seed in seeds
    ]
    return aggregate(trials)


def sweep_noise(
    instances: Sequence[QAInstance],
    client: LLMClient,
    mode: PromptMode,
    ratios: Sequence[int],
    seeds: Sequence[int] = (1, 2, 3),
    demos: Sequence[Demonstration] = (),
    shots: int = 5,
    budget: int = 16000,
    counter: TokenCounter | None = None,
) -> dict[int, MetricReport]:
    """Per-ratio evaluation with noise applied to both the test instances and
    the demonstration contexts."""
    for ratio in ratios:
        if not 0 <= ratio <= 100:
            raise ValueError(f"noise ratio must be 0-100, got {ratio}")
    results: dict[int, MetricReport] = {}
    for ratio in ratios:
        trials = [
            _run_trial(
                instances, client, mode, seed, ratio=ratio, demos=demos, shots=shots,
                budget=budget, counter=counter, noise_demos=True,
            )
            for seed in seeds
        ]
        results[ratio] = aggregate(trials)
    return results


def sweep_performance_range(reports: dict[int, MetricReport]) -> float:
    """Table-10-style range: spread of mean EM across the swept noise ratios."""
    if not reports:
        return 0.0
    ems = [r.mean_em for r in reports.values()]
    return max(ems) - min(ems)


def collect_generations(
    instances: Sequence[QAInstance],
    client: LLMClient,
    demos: Sequence[Demonstration],
    mode: PromptMode = PromptMode.COQ,
    shots: int = 5,
    budget: int = 16000,
    counter: TokenCounter | None = None,
    seed: int = 0,
) -> list[tuple[str, str]]:
    """Raw annotation collection over unmodified contexts; returns (id, response)."""
    subset = _sample_demos(demos, shots, seed)
    batch = []
    for instance in instances:
        bundle = prompting.build_prompt(instance, mode, subset, budget, counter)
        batch.append((bundle.instruction, bundle.as_chat_turns()))
    texts = client.complete_texts(batch)
    return [(instance.id, text) for instance, text in zip(instances, texts)]
