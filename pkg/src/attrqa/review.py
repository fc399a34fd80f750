"""HTTP backing for the human faithfulness assessment: curated samples with
verified quote-highlight offsets, append-only annotation storage with
latest-wins resolution, and aggregate statistics. The browser UI is
presentation only; everything here is computed server-side.

Endpoints: GET /samples, GET /samples/{id}, POST /annotations, GET /summary.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel

from .chains import AttributionChain
from .corpus import QAInstance
from .jsonio import dumps_canonical, read_jsonl

ERROR_CATEGORIES = ("DisorderedSteps", "MissingSteps", "IncorrectSteps")


class AnnotationIn(BaseModel):
    sample_id: str
    faithful: bool
    error_category: str | None = None
    shortcut: bool = False
    annotator_id: str = "anonymous"


@dataclass(frozen=True)
class Annotation:
    sample_id: str
    faithful: bool
    error_category: str | None
    shortcut: bool
    annotator_id: str
    timestamp: float

    def to_record(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "faithful": self.faithful,
            "error_category": self.error_category,
            "shortcut": self.shortcut,
            "annotator_id": self.annotator_id,
            "timestamp": self.timestamp,
        }


def validate_annotation(payload: AnnotationIn) -> str | None:
    """Returns a violation message or None."""
    if payload.faithful and payload.error_category is not None:
        return "error_category must be omitted when faithful is true"
    if not payload.faithful and payload.error_category is None:
        return "error_category is required when faithful is false"
    if payload.error_category is not None and payload.error_category not in ERROR_CATEGORIES:
        return f"unknown error_category: {payload.error_category}"
    return None


def find_quote_span(quote: str, body: str) -> tuple[int, int] | None:
    """Character span of the quote in the original body, tolerating whitespace
    differences (runs of whitespace match any whitespace)."""
    pattern = r"\s+".join(re.escape(part) for part in quote.split())
    if not pattern:
        return None
    match = re.search(pattern, body)
    return match.span() if match else None


def sample_payload(instance: QAInstance, chain: AttributionChain) -> dict:
    """Render payload with per-quote highlight offsets, each verified against
    its document body before serving."""
    bodies = {d.index: d.body for d in instance.documents}
    steps = []
    for step in chain.steps:
        quotes = []
        for quote in step.quotes:
            body = bodies.get(quote.doc)
            span = find_quote_span(quote.text, body) if body is not None else None
            if span is None:
                raise ValueError(
                    f"sample {instance.id}: quote does not resolve in document {quote.doc}"
                )
            quotes.append({"text": quote.text, "doc": quote.doc, "start": span[0], "end": span[1]})
        steps.append({"claim": step.claim, "citations": list(step.citations), "quotes": quotes})
    return {
        "id": instance.id,
        "question": instance.question,
        "hop_count": instance.hop_count,
        "answer": instance.answer,
        "documents": [
            {"index": d.index, "title": d.title, "body": d.body, "is_supporting": d.is_supporting}
            for d in instance.documents
        ],
        "steps": steps,
        "chain_answer": chain.answer,
    }


class AnnotationStore:
    """Append-only JSONL log; summaries resolve to the latest annotation per
    (sample_id, annotator_id)."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.annotations: list[Annotation] = []
        if self.path.exists():
            for _, record in read_jsonl(self.path):
                self.annotations.append(
                    Annotation(
                        sample_id=record["sample_id"],
                        faithful=record["faithful"],
                        error_category=record.get("error_category"),
                        shortcut=record.get("shortcut", False),
                        annotator_id=record.get("annotator_id", "anonymous"),
                        timestamp=record.get("timestamp", 0.0),
                    )
                )

    def append(self, annotation: Annotation) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(dumps_canonical(annotation.to_record()))
            fh.write("\n")
        self.annotations.append(annotation)

    def active(self) -> list[Annotation]:
        latest: dict[tuple[str, str], Annotation] = {}
        for annotation in self.annotations:  # file order; later entries supersede
            latest[(annotation.sample_id, annotation.annotator_id)] = annotation
        return list(latest.values())

    def annotated_ids(self, annotator_id: str) -> set[str]:
        return {a.sample_id for a in self.active() if a.annotator_id == annotator_id}


def summarize(annotations: Sequence[Annotation], hop_by_sample: dict[str, int]) -> dict:
    """Aggregate statistics over active annotations (pure function of the log)."""
    if not annotations:
        raise ValueError("no annotations to summarize")
    total = len(annotations)
    unfaithful = [a for a in annotations if not a.faithful]
    category_split = {}
    if unfaithful:
        for category in ERROR_CATEGORIES:
            n = sum(1 for a in unfaithful if a.error_category == category)
            if n:
                category_split[category] = n / len(unfaithful)
    per_hop: dict[str, float] = {}
    for hop in sorted({hop_by_sample.get(a.sample_id) for a in annotations} - {None}):
        at_hop = [a for a in annotations if hop_by_sample.get(a.sample_id) == hop]
        per_hop[str(hop)] = sum(1 for a in at_hop if not a.faithful) / len(at_hop)
    return {
        "total_annotations": total,
        "unfaithful_fraction": len(unfaithful) / total,
        "category_split": category_split,
        "shortcut_fraction": sum(1 for a in annotations if a.shortcut) / total,
        "per_hop_unfaithful": per_hop,
    }


def create_app(
    samples: Sequence[tuple[QAInstance, AttributionChain]],
    annotations_path: str | Path,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    by_id = {instance.id: (instance, chain) for instance, chain in samples}
    order = sorted(by_id)  # stable listing order
    store = AnnotationStore(annotations_path)
    app = FastAPI(title="attrqa review")

    @app.get("/samples")
    def list_samples(
        hop: int | None = None,
        status: str | None = Query(default=None, pattern="^(annotated|unannotated)$"),
        annotator: str = "anonymous",
        page: int = 1,
        page_size: int = 50,
    ):
        done = store.annotated_ids(annotator)
        rows = []
        for sample_id in order:
            instance, _ = by_id[sample_id]
            if hop is not None and instance.hop_count != hop:
                continue
            annotated = sample_id in done
            if status == "annotated" and not annotated:
                continue
            if status == "unannotated" and annotated:
                continue
            rows.append(
                {
                    "id": sample_id,
                    "question": instance.question,
                    "hop_count": instance.hop_count,
                    "annotated": annotated,
                }
            )
        start = (page - 1) * page_size
        return {
            "total": len(rows),
            "page": page,
            "page_size": page_size,
            "samples": rows[start : start + page_size],
        }

    @app.get("/samples/{sample_id}")
    def get_sample(sample_id: str):
        if sample_id not in by_id:
            raise HTTPException(status_code=404, detail=f"unknown sample: {sample_id}")
        instance, chain = by_id[sample_id]
        return sample_payload(instance, chain)

    @app.post("/annotations")
    def submit_annotation(payload: AnnotationIn):
        if payload.sample_id not in by_id:
            raise HTTPException(status_code=404, detail=f"unknown sample: {payload.sample_id}")
        violation = validate_annotation(payload)
        if violation:
            raise HTTPException(status_code=422, detail=violation)
        annotation = Annotation(
            sample_id=payload.sample_id,
            faithful=payload.faithful,
            error_category=payload.error_category,
            shortcut=payload.shortcut,
            annotator_id=payload.annotator_id,
            timestamp=time.time(),
        )
        store.append(annotation)
        return {"status": "acknowledged"}

    @app.get("/summary")
    def summary():
        try:
            hop_by_sample = {sid: by_id[sid][0].hop_count for sid in by_id}
            return summarize(store.active(), hop_by_sample)
        except ValueError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
