"""attrqa: attribution-grounded multi-hop QA tooling.

Builds AO/CoT/CoC/CoQ reasoning prompts, parses model outputs into attribution
chains, curates annotated generations with five filter rules, generates
multi-task training data with augmentation, and scores predictions for answer
quality, citation quality, and noise robustness.
"""

from .chains import (
    AttributionChain,
    ChainParseError,
    PromptMode,
    Quote,
    ReasoningStep,
    convert,
    extract_answer,
    parse_chain,
    remap_citations,
    render_chain,
)
from .corpus import CorpusStats, Document, QAInstance, load_corpus, subsample, validate_instance
from .curation import CurationReport, CurationVerdict, FailureKind, curate
from .metrics import (
    CorrelationResult,
    MetricReport,
    ScoredPrediction,
    citation_scores,
    correlation,
    exact_match,
    f1,
    normalize_answer,
)
from .prompting import Demonstration, PromptBundle, build_instruction, build_prompt, render_context
from .taskgen import AugmentPolicy, NoiseSpec, TaskExample, TaskKind, apply_noise, augment, build_examples

__version__ = "0.1.0"
