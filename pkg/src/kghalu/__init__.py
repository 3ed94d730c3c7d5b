"""Triplet-level hallucination evaluation toolkit for vision-language models.

The pipeline extracts (subject, predicate, object) triplets from free-form
answers, judges each against the image's scene graph, classifies failures as
object hallucination / relation hallucination / prediction error, and
aggregates question- and image-level rates.
"""

from .analysis import (
    HumanScoreSet,
    PairFrequencyTable,
    krippendorff_alpha,
    pair_frequency,
    pearson,
    top_fraction_relation_rate,
    truncate_response,
)
from .core import (
    HallucinationKind,
    JudgeVerdict,
    KnowledgeGraph,
    SceneGraph,
    SynonymTable,
    Triplet,
    VerdictStatus,
    classify_against_scene_graph,
    normalize_phrase,
    parse_kg_lines,
    render_triplet,
)
from .dataset import (
    Benchmark,
    BenchmarkItem,
    QAItem,
    build_question_gen_prompt,
    compute_statistics,
    load_benchmark,
    parse_question_gen_output,
    save_benchmark,
    validate_relation_richness,
)
from .extraction import ExtractionConfig, build_extraction_prompt, extract_knowledge_graph
from .judge import (
    LlmJudge,
    NliJudge,
    NliJudgeConfig,
    RuleJudge,
    build_llm_judge_prompt,
    cosine_similarity,
    llm_judge,
    nli_judge,
    parse_llm_judge_output,
    select_premise_triplets,
)
from .metrics import (
    EmptyResponsePolicy,
    HallucinationReport,
    KindFilter,
    QuestionResult,
    build_report,
    hallu_i,
    hallu_q,
    question_rate,
)
from .mitigation import MitigationMode, MitigationTrace, mitigate
from .pipeline import evaluate_mitigation, evaluate_responses

__version__ = "0.1.0"
