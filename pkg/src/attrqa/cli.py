"""Command-line pipeline: raw annotation generation, curation, training-data
export, evaluation, noise sweeps, corpus statistics, report rendering, and the
review server.

Exit codes: 0 success, 1 usage, 2 data error, 3 transport/cassette error.
"""

from __future__ import annotations

import argparse
import csv
import random
import sys
from pathlib import Path

import yaml

from . import chains, corpus, curation, metrics, prompting, review, taskgen
from .chains import PromptMode
from .jsonio import read_json, read_jsonl, write_json, write_jsonl
from .llmio import Cassette, CassetteMiss, HttpTransport, LLMClient, TransportError, load_client_config
from .taskgen import AugmentPolicy, TaskKind

DEFAULT_SEEDS = (1, 2, 3)
DEFAULT_SHOTS = 5
DEFAULT_BUDGET = 16000


class CliUsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliUsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _task_list(text: str) -> list[TaskKind]:
    return [TaskKind.from_string(part) for part in text.split(",") if part.strip()]


def _load_config(path: str | None, command: str) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        loaded = yaml.safe_load(fh) or {}
    if not isinstance(loaded, dict):
        raise ValueError(f"config must be a mapping: {path}")
    section = loaded.get(command, {})
    if not isinstance(section, dict):
        raise ValueError(f"config section {command!r} must be a mapping")
    merged = {k: v for k, v in loaded.items() if not isinstance(v, dict)}
    merged.update(section)
    return merged


def _resolve(args: argparse.Namespace, defaults: dict) -> argparse.Namespace:
    """Fallback chain: explicit flag > config file value > built-in default."""
    config = _load_config(getattr(args, "config", None), args.command)
    merged = dict(defaults)
    merged.update({k: v for k, v in config.items() if k in defaults})
    merged.update({k: v for k, v in vars(args).items() if k in defaults and v is not None})
    for key, value in merged.items():
        setattr(args, key, value)
    return args


def _require(args: argparse.Namespace, *names: str) -> None:
    for name in names:
        if getattr(args, name, None) is None:
            raise CliUsageError(f"attrqa {args.command}: error: --{name.replace('_', '-')} is required")


def _client(args: argparse.Namespace) -> LLMClient:
    cassette = Cassette(args.cassette, mode=args.cassette_mode)
    transport = None
    if args.cassette_mode in ("record", "passthrough"):
        config = load_client_config(getattr(args, "client_config", None))
        endpoint = args.endpoint or config.get("endpoint")
        if not endpoint:
            raise ValueError("record/passthrough mode needs --endpoint or a client config")
        transport = HttpTransport(endpoint_url=endpoint, api_key=args.api_key or config.get("api_key", ""))
    return LLMClient(
        model_name=args.model,
        cassette=cassette,
        transport=transport,
        max_output_tokens=args.max_output_tokens,
    )


def _load_pairs_by_id(raw_path: str, corpus_path: str, mode: PromptMode, format: str = "internal"):
    """Join raw {id, response} records against the corpus and parse each
    response, falling back to the answer-only reading when parsing fails."""
    instances = {inst.id: inst for inst in corpus.load_corpus(corpus_path, format)}
    pairs = []
    for lineno, record in read_jsonl(raw_path):
        for key in ("id", "response"):
            if key not in record:
                raise ValueError(f"line {lineno}: missing field: {key}")
        if record["id"] not in instances:
            raise ValueError(f"line {lineno}: unknown instance id: {record['id']}")
        text = record["response"]
        try:
            chain = chains.parse_chain(text, mode)
        except chains.ChainParseError:
            chain = chains.AttributionChain(steps=(), answer=chains.extract_answer(text), raw=text)
        pairs.append((instances[record["id"]], chain))
    return pairs


# ---------------------------------------------------------------- commands


def cmd_generate(args) -> None:
    _require(args, "corpus", "demos", "cassette", "out")
    instances = corpus.load_corpus(args.corpus, args.format)
    demos = prompting.load_demonstrations(args.demos, PromptMode.COQ)
    client = _client(args)
    responses = metrics.collect_generations(
        instances, client, demos, mode=PromptMode.COQ,
        shots=args.shots, budget=args.budget, seed=args.seed,
    )
    write_jsonl(args.out, ({"id": id_, "response": text} for id_, text in responses))
    print(f"wrote {len(responses)} raw generations to {args.out}")


def cmd_curate(args) -> None:
    _require(args, "in_path", "corpus", "out", "report")
    pairs = _load_pairs_by_id(args.in_path, args.corpus, PromptMode.COQ, args.format)
    kept, verdicts, report = curation.curate(pairs)
    corpus.save_annotated(kept, args.out)
    write_json(args.report, {"kind": "curation_report", **report.to_dict()})
    if args.verdicts:
        write_jsonl(args.verdicts, (v.to_record() for v in verdicts))
    print(f"kept {report.total_kept} of {report.total_in} samples -> {args.out}")


def cmd_build_tasks(args) -> None:
    _require(args, "in_path", "out")
    samples = corpus.load_annotated(args.in_path)
    tasks = [TaskKind.from_string(t) if isinstance(t, str) else t for t in args.tasks]
    no_augment = [TaskKind.from_string(t) if isinstance(t, str) else t for t in args.no_augment]
    policy = AugmentPolicy(
        min_distractors=args.min_distractors,
        max_distractors="all" if args.max_distractors in (None, "all") else int(args.max_distractors),
        shuffle=args.shuffle if args.shuffle is not None else True,
        copies=args.copies,
    )
    examples = taskgen.generate_tasks(samples, tasks, policy, no_augment=no_augment, seed=args.seed)
    mixin = None
    if args.mixin:
        mixin = [record for _, record in read_jsonl(args.mixin)]
        if len(mixin) > len(examples):
            # oversized mixin pools are subsampled to the reasoning count
            mixin = random.Random(args.seed).sample(mixin, len(examples))
        elif len(mixin) < len(examples):
            raise ValueError(
                f"mixin file has {len(mixin)} records but {len(examples)} are needed"
            )
    n = taskgen.export(examples, args.out, mixin=mixin, seed=args.seed)
    print(f"wrote {n} training records to {args.out}")


def cmd_evaluate(args) -> None:
    _require(args, "corpus", "cassette", "out")
    instances = corpus.load_corpus(args.corpus, args.format)
    mode = PromptMode.from_string(args.mode)
    demos = prompting.load_demonstrations(args.demos, mode) if args.demos else []
    client = _client(args)
    report = metrics.evaluate_corpus(
        instances, client, mode, seeds=args.seeds, demos=demos,
        shots=args.shots, budget=args.budget,
    )
    write_json(
        args.out,
        {
            "kind": "evaluation",
            "model": args.model,
            "mode": mode.value,
            "seeds": list(args.seeds),
            "shots": args.shots,
            "report": report.to_dict(),
        },
    )
    print(f"mean EM {report.mean_em:.4f}, mean F1 {report.mean_f1:.4f} -> {args.out}")


def cmd_sweep_noise(args) -> None:
    _require(args, "corpus", "cassette", "out")
    instances = corpus.load_corpus(args.corpus, args.format)
    mode = PromptMode.from_string(args.mode)
    demos = prompting.load_demonstrations(args.demos, mode) if args.demos else []
    client = _client(args)
    reports = metrics.sweep_noise(
        instances, client, mode, ratios=args.ratios, seeds=args.seeds,
        demos=demos, shots=args.shots, budget=args.budget,
    )
    write_json(
        args.out,
        {
            "kind": "noise_sweep",
            "model": args.model,
            "mode": mode.value,
            "seeds": list(args.seeds),
            "ratios": list(args.ratios),
            "reports": {str(r): reports[r].to_dict() for r in reports},
            "performance_range": metrics.sweep_performance_range(reports),
        },
    )
    print(f"swept {len(reports)} noise ratios -> {args.out}")


def cmd_stats(args) -> None:
    _require(args, "out")
    if args.annotated:
        pairs = corpus.load_annotated(args.annotated)
        instances = [inst for inst, _ in pairs]
        chain_list = [chain for _, chain in pairs]
    elif args.corpus:
        instances = corpus.load_corpus(args.corpus, args.format)
        chain_list = None
    else:
        raise CliUsageError("attrqa stats: error: --corpus or --annotated is required")
    stats = corpus.corpus_stats(instances, chain_list)
    write_json(
        args.out,
        {"kind": "corpus_stats", "stats": stats.to_dict(), "notes": [corpus.WORD_COUNT_NOTE]},
    )
    print(f"stats over {stats.total_samples} samples -> {args.out}")


def _error_incidence_table(curation_report: dict) -> dict:
    rows = [
        {
            "error_type": kind.value,
            "incidence_any": curation_report["incidence_any"][kind.value],
            "incidence_among_rejected": curation_report["incidence_among_rejected"][kind.value],
        }
        for kind in curation.FAILURE_ORDER
    ]
    return {
        "rows": rows,
        "total_in": curation_report["total_in"],
        "total_kept": curation_report["total_kept"],
        "no_citation_samples": curation_report["no_citation_samples"],
    }


def _dataset_stats_table(stats_artifact: dict) -> dict:
    stats = stats_artifact["stats"]
    hops = stats["hop_distribution"]
    rows = [
        {"entry": "max_words_per_sample", "value": stats["max_words_per_sample"]},
        {"entry": "mean_words_per_sample", "value": stats["mean_words_per_sample"]},
        {"entry": "mean_words_per_step", "value": stats["mean_words_per_step"]},
        {"entry": "mean_words_per_quote", "value": stats["mean_words_per_quote"]},
        {"entry": "total_samples", "value": stats["total_samples"]},
        {"entry": "2_hop_pct", "value": 100 * hops.get("2", 0.0)},
        {"entry": "3_hop_pct", "value": 100 * hops.get("3", 0.0)},
        {"entry": "4_hop_pct", "value": 100 * hops.get("4", 0.0)},
    ]
    return {"rows": rows, "notes": stats_artifact.get("notes", [])}


def _correlation_points(evaluations: list[dict]) -> tuple[list, list, list]:
    """Per-trial (EM, citation precision, citation recall) points across runs."""
    ems, precisions, recalls = [], [], []
    for artifact in evaluations:
        for trial in artifact["report"]["per_trial"]:
            if trial.get("citation_precision") is None:
                continue
            ems.append(trial["em"])
            precisions.append(trial["citation_precision"])
            recalls.append(trial["citation_recall"])
    return ems, precisions, recalls


def _correlation_table(evaluations: list[dict], permutations: int, seed: int) -> dict:
    ems, precisions, recalls = _correlation_points(evaluations)
    pairs = []
    for pair_name, ys in (
        ("em_vs_citation_precision", precisions),
        ("em_vs_citation_recall", recalls),
    ):
        row: dict = {"pair": pair_name, "points": len(ys)}
        for method in metrics.CORRELATION_METHODS:
            try:
                result = metrics.correlation(ems, ys, method, permutations=permutations, seed=seed)
                row[method] = {"coefficient": result.coefficient, "p_value": result.p_value}
            except ValueError as exc:
                row[method] = {"coefficient": None, "p_value": None, "note": str(exc)}
        pairs.append(row)
    return {"pairs": pairs}


def _range_table(sweeps: list[dict]) -> dict:
    rows = [
        {
            "model": artifact.get("model", "unknown"),
            "mode": artifact.get("mode", "unknown"),
            "performance_range": artifact["performance_range"],
        }
        for artifact in sweeps
    ]
    return {"rows": rows}


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_report(args) -> None:
    _require(args, "out")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    if args.curation:
        write_json(outdir / "error_incidence.json", _error_incidence_table(read_json(args.curation)))
        written.append("error_incidence.json")
    if args.stats:
        write_json(outdir / "dataset_stats.json", _dataset_stats_table(read_json(args.stats)))
        written.append("dataset_stats.json")

    evaluations = [read_json(p) for p in args.evaluations or []]
    sweeps = [read_json(p) for p in args.sweeps or []]
    if evaluations:
        write_json(outdir / "correlations.json", _correlation_table(evaluations, args.permutations, args.seed))
        written.append("correlations.json")
        rows = [
            [
                f"{a.get('model', 'unknown')}:{a.get('mode', 'unknown')}",
                a["report"]["mean_em"],
                a["report"]["mean_citation_precision"],
                a["report"]["mean_citation_recall"],
            ]
            for a in evaluations
        ]
        _write_csv(
            outdir / "citation_quality.csv",
            ["label", "mean_em", "mean_citation_precision", "mean_citation_recall"],
            rows,
        )
        written.append("citation_quality.csv")
    if sweeps:
        write_json(outdir / "performance_ranges.json", _range_table(sweeps))
        written.append("performance_ranges.json")
        rows = []
        for artifact in sweeps:
            label = f"{artifact.get('model', 'unknown')}:{artifact.get('mode', 'unknown')}"
            for ratio in sorted(artifact["reports"], key=int):
                rows.append([label, int(ratio), artifact["reports"][ratio]["mean_em"]])
        _write_csv(outdir / "noise_curves.csv", ["label", "noise_ratio", "mean_em"], rows)
        written.append("noise_curves.csv")

    if not written:
        raise ValueError("report: no input artifacts supplied")
    print(f"wrote {', '.join(written)} to {outdir}")


def cmd_serve_review(args) -> None:
    _require(args, "data", "annotations")
    samples = corpus.load_annotated(args.data)
    app = review.create_app(samples, args.annotations, ui_dir=args.ui_dir)
    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port)


# ---------------------------------------------------------------- parser


def _add_client_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--model", help="model name sent to the endpoint")
    sub.add_argument("--cassette", help="cassette file for record/replay")
    sub.add_argument("--cassette-mode", choices=("record", "replay", "passthrough"))
    sub.add_argument("--endpoint", help="chat-completions endpoint URL")
    sub.add_argument("--api-key")
    sub.add_argument("--client-config", help="YAML/JSON client config file")
    sub.add_argument("--max-output-tokens", type=int)


def _add_prompt_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--demos", help="annotated demonstrations file")
    sub.add_argument("--shots", type=int, help=f"demonstrations per prompt (default {DEFAULT_SHOTS})")
    sub.add_argument("--budget", type=int, help=f"prompt token budget (default {DEFAULT_BUDGET})")


def build_parser() -> _Parser:
    parser = _Parser(prog="attrqa", description=__doc__)
    parser.add_argument("--config", help="structured configuration document (YAML/JSON)")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = commands.add_parser("generate", help="collect raw CoQ annotations")
    gen.add_argument("--corpus")
    gen.add_argument("--format", choices=corpus.FORMATS)
    _add_prompt_flags(gen)
    _add_client_flags(gen)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out")

    cur = commands.add_parser("curate", help="filter raw annotations into a curated set")
    cur.add_argument("--in", dest="in_path", help="raw {id, response} JSONL")
    cur.add_argument("--corpus")
    cur.add_argument("--format", choices=corpus.FORMATS)
    cur.add_argument("--out", help="kept annotated JSONL")
    cur.add_argument("--report", help="curation report JSON")
    cur.add_argument("--verdicts", help="optional per-sample verdict JSONL")

    tasks = commands.add_parser("build-tasks", help="export multi-task training data")
    tasks.add_argument("--in", dest="in_path", help="kept annotated JSONL")
    tasks.add_argument("--tasks", type=_task_list)
    tasks.add_argument("--copies", type=int)
    tasks.add_argument("--no-augment", type=_task_list, help="tasks emitted without augmentation")
    tasks.add_argument("--min-distractors", type=int)
    tasks.add_argument("--max-distractors")
    tasks.add_argument("--shuffle", action=argparse.BooleanOptionalAction)
    tasks.add_argument("--mixin", help="generic instruction records to interleave")
    tasks.add_argument("--seed", type=int)
    tasks.add_argument("--out")

    ev = commands.add_parser("evaluate", help="prompt/complete/parse/score with trials")
    ev.add_argument("--corpus")
    ev.add_argument("--format", choices=corpus.FORMATS)
    ev.add_argument("--mode", help="ao|cot|coc|coq")
    ev.add_argument("--seeds", type=_int_list, help="comma-separated trial seeds")
    _add_prompt_flags(ev)
    _add_client_flags(ev)
    ev.add_argument("--out")

    sweep = commands.add_parser("sweep-noise", help="evaluate across noise ratios")
    sweep.add_argument("--corpus")
    sweep.add_argument("--format", choices=corpus.FORMATS)
    sweep.add_argument("--mode")
    sweep.add_argument("--ratios", type=_int_list, help="comma-separated noise ratios (0-100)")
    sweep.add_argument("--seeds", type=_int_list)
    _add_prompt_flags(sweep)
    _add_client_flags(sweep)
    sweep.add_argument("--out")

    st = commands.add_parser("stats", help="corpus statistics")
    st.add_argument("--corpus")
    st.add_argument("--format", choices=corpus.FORMATS)
    st.add_argument("--annotated", help="annotated file supplying instances and chains")
    st.add_argument("--out")

    rep = commands.add_parser("report", help="render tables and figure series from artifacts")
    rep.add_argument("--curation", help="curation report JSON")
    rep.add_argument("--stats", help="stats artifact JSON")
    rep.add_argument("--evaluations", nargs="*", help="evaluation artifact JSONs")
    rep.add_argument("--sweeps", nargs="*", help="sweep artifact JSONs")
    rep.add_argument("--permutations", type=int)
    rep.add_argument("--seed", type=int)
    rep.add_argument("--out", help="output directory")

    serve = commands.add_parser("serve-review", help="host the review UI and data API")
    serve.add_argument("--data", help="kept annotated JSONL")
    serve.add_argument("--annotations", help="append-only annotation log")
    serve.add_argument("--ui-dir", help="static frontend directory to mount")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)

    return parser


_DEFAULTS: dict[str, dict] = {
    "generate": {"corpus": None, "format": "internal", "demos": None, "shots": DEFAULT_SHOTS, "budget": DEFAULT_BUDGET,
                 "model": "scripted", "cassette": None, "cassette_mode": "replay",
                 "endpoint": None, "api_key": None, "client_config": None,
                 "max_output_tokens": 512, "seed": 0, "out": None},
    "curate": {"in_path": None, "corpus": None, "format": "internal", "out": None, "report": None, "verdicts": None},
    "build-tasks": {"in_path": None, "tasks": list(TaskKind), "copies": 2,
                    "no_augment": [TaskKind.QI], "min_distractors": 0, "max_distractors": "all",
                    "shuffle": True, "mixin": None, "seed": 0, "out": None},
    "evaluate": {"corpus": None, "format": "internal", "mode": "coc", "seeds": list(DEFAULT_SEEDS), "demos": None,
                 "shots": DEFAULT_SHOTS, "budget": DEFAULT_BUDGET, "model": "scripted",
                 "cassette": None, "cassette_mode": "replay", "endpoint": None, "api_key": None,
                 "client_config": None, "max_output_tokens": 512, "out": None},
    "sweep-noise": {"corpus": None, "format": "internal", "mode": "coc", "ratios": [0, 20, 40, 60, 80, 100],
                    "seeds": list(DEFAULT_SEEDS), "demos": None, "shots": DEFAULT_SHOTS,
                    "budget": DEFAULT_BUDGET, "model": "scripted", "cassette": None,
                    "cassette_mode": "replay", "endpoint": None, "api_key": None,
                    "client_config": None, "max_output_tokens": 512, "out": None},
    "stats": {"corpus": None, "format": "internal", "annotated": None, "out": None},
    "report": {"curation": None, "stats": None, "evaluations": [], "sweeps": [],
               "permutations": 1000, "seed": 0, "out": None},
    "serve-review": {"data": None, "annotations": None, "ui_dir": None,
                     "host": "127.0.0.1", "port": 8321},
}

_COMMANDS = {
    "generate": cmd_generate,
    "curate": cmd_curate,
    "build-tasks": cmd_build_tasks,
    "evaluate": cmd_evaluate,
    "sweep-noise": cmd_sweep_noise,
    "stats": cmd_stats,
    "report": cmd_report,
    "serve-review": cmd_serve_review,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _resolve(args, _DEFAULTS[args.command])
        _COMMANDS[args.command](args)
        return 0
    except CliUsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (TransportError, CassetteMiss) as exc:
        print(f"attrqa: transport error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError) as exc:
        print(f"attrqa: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
