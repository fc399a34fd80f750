"""Task example construction, augmentation, noise injection, and export."""

from __future__ import annotations

import random

import pytest

from attrqa.chains import PromptMode, parse_chain
from attrqa.corpus import load_annotated, validate_instance
from attrqa.curation import check_attribution_existence
from attrqa.jsonio import dumps_canonical
from attrqa.taskgen import (
    AugmentPolicy,
    NoiseSpec,
    TaskKind,
    apply_noise,
    augment,
    build_examples,
    derive_seed,
    example_to_record,
    export,
    generate_tasks,
)

from helpers import COC_TEXT, COT_TEXT


@pytest.fixture
def crush_sample(crush_instance, coq_chain):
    return (crush_instance, coq_chain)


class TestBuildExamples:
    def test_la_target_is_coc_text(self, crush_sample):
        example = build_examples(crush_sample, TaskKind.LA)
        assert example.target == COC_TEXT
        assert "Always cite for any factual claim." in example.instruction

    def test_cg_target_is_cot_text(self, crush_sample):
        example = build_examples(crush_sample, TaskKind.CG)
        assert example.target == COT_TEXT
        assert "cite" not in example.instruction.lower()

    def test_ap_target_is_bare_answer(self, crush_sample):
        example = build_examples(crush_sample, TaskKind.AP)
        assert example.target == "jazz"

    def test_qi_target_lines(self, crush_sample):
        example = build_examples(crush_sample, TaskKind.QI)
        lines = example.target.splitlines()
        assert len(lines) == 3
        assert lines[0] == '"The Crush Tour is a third concert" [8]'
        assert lines[1] == '"Bounce is the eighth studio album by American" [17]'

    def test_qi_without_quotes_rejected(self, crush_instance):
        coc_chain = parse_chain(COC_TEXT, PromptMode.COC)
        with pytest.raises(ValueError, match="no quotes"):
            build_examples((crush_instance, coc_chain), TaskKind.QI)

    def test_ids_carry_task(self, crush_sample):
        assert build_examples(crush_sample, TaskKind.AP).id == "crush-tour:ap"


def _titles(example):
    return {d.index: d.title for d in example.context_documents}


class TestAugment:
    def test_zero_distractors_keeps_supporting_only(self, crush_sample):
        example = build_examples(crush_sample, TaskKind.LA)
        policy = AugmentPolicy(min_distractors=0, max_distractors=0, shuffle=True, copies=1)
        (variant,) = augment(example, [8, 17, 19], policy, seed=5)
        assert len(variant.context_documents) == 3
        assert {d.title for d in variant.context_documents} == {
            "The Crush Tour", "Bounce (Bon Jovi album)", "The Antidote",
        }
        chain = parse_chain(variant.target, PromptMode.COC)
        cited = [c for step in chain.steps for c in step.citations]
        assert sorted(cited) == [1, 2, 3]

    def test_identity_policy_changes_nothing(self, crush_sample):
        example = build_examples(crush_sample, TaskKind.LA)
        policy = AugmentPolicy(min_distractors=17, max_distractors="all", shuffle=False, copies=1)
        (variant,) = augment(example, [8, 17, 19], policy, seed=5)
        assert variant.context_documents == example.context_documents
        assert variant.target == example.target

    def test_identical_seed_identical_bytes(self, crush_sample):
        example = build_examples(crush_sample, TaskKind.LA)
        policy = AugmentPolicy(copies=3)
        first = [dumps_canonical(example_to_record(v)) for v in augment(example, [8, 17, 19], policy, 11)]
        second = [dumps_canonical(example_to_record(v)) for v in augment(example, [8, 17, 19], policy, 11)]
        assert first == second

    def test_citation_titles_preserved_over_random_policies(self, crush_sample):
        example = build_examples(crush_sample, TaskKind.LA)
        original = _titles(example)
        original_chain = parse_chain(example.target, PromptMode.COC)
        rng = random.Random(2024)
        for trial in range(60):
            policy = AugmentPolicy(
                min_distractors=rng.randint(0, 5),
                max_distractors=rng.choice(["all", rng.randint(5, 17)]),
                shuffle=rng.random() < 0.5,
                copies=rng.randint(1, 2),
            )
            for variant in augment(example, [8, 17, 19], policy, seed=rng.randint(0, 10**6)):
                new_titles = _titles(variant)
                chain = parse_chain(variant.target, PromptMode.COC)
                for old_step, new_step in zip(original_chain.steps, chain.steps):
                    for old_cite, new_cite in zip(old_step.citations, new_step.citations):
                        assert new_titles[new_cite] == original[old_cite]
                # all supporting documents retained
                assert {"The Crush Tour", "Bounce (Bon Jovi album)", "The Antidote"} <= set(
                    new_titles.values()
                )

    def test_qi_targets_reground_after_augmentation(self, crush_sample):
        example = build_examples(crush_sample, TaskKind.QI)
        policy = AugmentPolicy(copies=2)
        for variant in augment(example, [8, 17, 19], policy, seed=3):
            bodies = {d.index: d.body for d in variant.context_documents}
            for line in variant.target.splitlines():
                quote, doc = line.rsplit(" [", 1)
                assert quote.strip('"') in bodies[int(doc.rstrip("]"))]

    def test_missing_supporting_document_rejected(self, crush_sample):
        example = build_examples(crush_sample, TaskKind.LA)
        with pytest.raises(ValueError, match="supporting document 25 missing"):
            augment(example, [25], AugmentPolicy(copies=1), seed=0)


class TestApplyNoise:
    def test_ratio_zero_keeps_supporting_only(self, crush_instance):
        noisy = apply_noise(crush_instance, NoiseSpec(0, seed=1))
        assert len(noisy.documents) == 3
        assert all(d.is_supporting for d in noisy.documents)

    def test_ratio_hundred_keeps_everything_shuffled(self, crush_instance):
        noisy = apply_noise(crush_instance, NoiseSpec(100, seed=1))
        assert len(noisy.documents) == 20
        assert {d.title for d in noisy.documents} == {d.title for d in crush_instance.documents}
        assert [d.title for d in noisy.documents] != [d.title for d in crush_instance.documents]

    def test_round_half_up(self, crush_instance):
        # 17 distractors at 50% -> round(8.5) = 9 kept, plus 3 supporting
        noisy = apply_noise(crush_instance, NoiseSpec(50, seed=1))
        assert len(noisy.documents) == 12

    def test_monotone_in_ratio(self, crush_instance):
        sizes = [len(apply_noise(crush_instance, NoiseSpec(r, seed=7)).documents) for r in range(0, 101, 10)]
        assert sizes == sorted(sizes)

    def test_result_is_valid_instance(self, crush_instance):
        for ratio in (0, 35, 70, 100):
            noisy = apply_noise(crush_instance, NoiseSpec(ratio, seed=3))
            assert validate_instance(noisy) == []

    def test_deterministic(self, crush_instance):
        a = apply_noise(crush_instance, NoiseSpec(40, seed=9))
        b = apply_noise(crush_instance, NoiseSpec(40, seed=9))
        assert a == b

    def test_ratio_bounds_enforced(self):
        with pytest.raises(ValueError, match="0-100"):
            NoiseSpec(101, seed=0)


class TestExport:
    def test_mixin_doubles_record_count(self, crush_sample, tmp_path):
        examples = [build_examples(crush_sample, TaskKind.AP)] * 100
        mixin = [{"id": f"mix-{i}", "instruction": "demo", "input": "", "output": "ok"} for i in range(100)]
        path = tmp_path / "train.jsonl"
        assert export(examples, path, mixin=mixin, seed=0) == 200

    def test_mixin_size_mismatch_rejected(self, crush_sample, tmp_path):
        examples = [build_examples(crush_sample, TaskKind.AP)]
        with pytest.raises(ValueError, match="mixin size"):
            export(examples, tmp_path / "x.jsonl", mixin=[{}, {}], seed=0)

    def test_no_mixin_deterministic_bytes(self, crush_sample, tmp_path):
        examples = [build_examples(crush_sample, t) for t in (TaskKind.LA, TaskKind.AP)]
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        export(examples, a)
        export(examples, b)
        assert a.read_bytes() == b.read_bytes()

    def test_record_shape(self, crush_sample, tmp_path):
        example = build_examples(crush_sample, TaskKind.LA)
        record = example_to_record(example)
        assert set(record) == {"id", "instruction", "input", "output"}
        assert record["input"].startswith("Document [1](Title: ")
        assert record["input"].endswith("\n\nAnswer:")
        assert record["output"] == COC_TEXT


class TestGenerateTasks:
    def test_default_pipeline_doubles_all_but_qi(self, fixtures_dir):
        samples = load_annotated(fixtures_dir / "gold.jsonl")
        examples = generate_tasks(
            samples,
            tasks=list(TaskKind),
            policy=AugmentPolicy(copies=2),
            no_augment=[TaskKind.QI],
            seed=0,
        )
        by_task = {}
        for ex in examples:
            by_task.setdefault(ex.task, []).append(ex)
        assert len(by_task[TaskKind.LA]) == 2 * len(samples)
        assert len(by_task[TaskKind.AP]) == 2 * len(samples)
        assert len(by_task[TaskKind.CG]) == 2 * len(samples)
        assert len(by_task[TaskKind.QI]) == len(samples)

    def test_generated_la_targets_satisfy_invariant(self, fixtures_dir):
        samples = load_annotated(fixtures_dir / "gold.jsonl")
        examples = generate_tasks(samples, [TaskKind.LA], AugmentPolicy(copies=2), seed=1)
        for ex in examples:
            chain = parse_chain(ex.target, PromptMode.COC)
            indices = {d.index for d in ex.context_documents}
            assert all(c in indices for step in chain.steps for c in step.citations)
            ok, reasons = check_attribution_existence(chain, ex.context_documents)
            assert ok, reasons


class TestDeriveSeed:
    def test_stable(self):
        assert derive_seed(1, "a", 0) == derive_seed(1, "a", 0)

    def test_distinct_parts_distinct_seeds(self):
        assert derive_seed(1, "a", 0) != derive_seed(1, "a", 1)
        assert derive_seed(1, "a", 0) != derive_seed(2, "a", 0)
