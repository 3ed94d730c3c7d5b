"""Per-triplet hallucination judges.

Three judges share one verdict type:

- the rule oracle (re-exported from ``core``): deterministic set membership,
  the only judge able to distinguish prediction errors;
- the NLI judge: embedding-similarity premise selection plus an entailment
  threshold, a binary judge whose hallucinations carry kind "unknown";
- the LLM judge: a structured prompt to a text-only chat model that also
  categorizes each hallucination as object1 / object2 / relation.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Sequence

from .core import (
    HallucinationKind,
    JudgeVerdict,
    Phrase,
    SceneGraph,
    SynonymTable,
    Triplet,
    VerdictStatus,
    classify_against_scene_graph,
    render_triplet,
)
from .errors import ProviderError
from .prompts import LLM_JUDGE_PROMPT, load_prompt
from .providers import (
    ChatProvider,
    DEFAULT_JUDGE_MODEL,
    EmbeddingProvider,
    EntailmentProvider,
    user_text_request,
)

NLI_JUDGE_NAME = "nli"
LLM_JUDGE_NAME = "llm"

PREMISE_JOINER = ". "

FORMAT_REMINDER = (
    'Reply with "yes" or "no" for Task 1; if "no", name the unsupported part '
    'as "object1", "object2", or "relation" for Task 2.'
)


@dataclass(frozen=True)
class NliJudgeConfig:
    similarity_threshold: float = 0.5
    fallback_top_k: int = 3
    entailment_threshold: float = 0.6

    def __post_init__(self):
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must be within [0, 1]")
        if not 0.0 <= self.entailment_threshold <= 1.0:
            raise ValueError("entailment_threshold must be within [0, 1]")
        if self.fallback_top_k < 1:
            raise ValueError("fallback_top_k must be >= 1")


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    if len(a) != len(b):
        raise ValueError("vectors must share one dimension")
    dot = sum(x * y for x, y in zip(a, b))
    norm_a = sum(x * x for x in a)
    norm_b = sum(y * y for y in b)
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / math.sqrt(norm_a * norm_b)


def select_premise_triplets(
    claim: Triplet,
    graph: SceneGraph,
    embeddings: EmbeddingProvider,
    config: NliJudgeConfig = NliJudgeConfig(),
) -> tuple[Triplet, ...]:
    """Ground-truth triplets whose rendered cosine similarity to the claim is
    strictly above the threshold, sorted descending; when none qualify, the
    top ``fallback_top_k`` by similarity. Ties keep scene-graph insertion
    order (stable sort)."""
    if not graph.triplets:
        raise ValueError("scene graph has no triplets to select premises from")
    texts = [render_triplet(claim)] + [render_triplet(t) for t in graph.triplets]
    vectors = embeddings.embed(texts).vectors
    claim_vector = vectors[0]
    ranked = sorted(
        zip(graph.triplets, (cosine_similarity(claim_vector, v) for v in vectors[1:])),
        key=lambda pair: -pair[1],
    )
    kept = [(t, s) for t, s in ranked if s > config.similarity_threshold]
    if not kept:
        kept = ranked[: config.fallback_top_k]
    return tuple(t for t, _ in kept)


def nli_judge(
    claim: Triplet,
    graph: SceneGraph,
    embeddings: EmbeddingProvider,
    entailment: EntailmentProvider,
    config: NliJudgeConfig = NliJudgeConfig(),
    retry_limit: int = 1,
) -> JudgeVerdict:
    """Entailment-threshold judge: hallucinated iff the score of
    (selected premises => rendered claim) is strictly below the threshold."""
    hypothesis = render_triplet(claim)
    last_error: ProviderError | None = None
    for _ in range(retry_limit + 1):
        try:
            premises = select_premise_triplets(claim, graph, embeddings, config)
            premise_text = PREMISE_JOINER.join(render_triplet(t) for t in premises)
            score = entailment.entail(premise_text, hypothesis)
            break
        except ProviderError as exc:
            last_error = exc
    else:
        return JudgeVerdict(
            VerdictStatus.UNJUDGEABLE,
            claim,
            NLI_JUDGE_NAME,
            raw_payload=json.dumps(
                {"error": type(last_error).__name__, "detail": str(last_error)}
            ),
        )
    payload = json.dumps({"score": score, "premise": premise_text}, ensure_ascii=False)
    if score < config.entailment_threshold:
        return JudgeVerdict(
            VerdictStatus.HALLUCINATED,
            claim,
            NLI_JUDGE_NAME,
            HallucinationKind.UNKNOWN,
            raw_payload=payload,
        )
    return JudgeVerdict(VerdictStatus.SUPPORTED, claim, NLI_JUDGE_NAME, raw_payload=payload)


def build_llm_judge_prompt(
    reference: Sequence[Triplet], objects: Sequence[Phrase], claim: Triplet
) -> str:
    if not reference:
        raise ValueError("reference triplet list must be non-empty")
    template = load_prompt(LLM_JUDGE_PROMPT)
    return (
        template.replace("<REFERENCE>", "\n".join(render_triplet(t) for t in reference))
        .replace("<LIST_OF_OBJECTS>", ", ".join(objects))
        .replace("<CLAIM>", render_triplet(claim))
    )


_YES_NO = re.compile(r"\b(yes|no)\b", re.IGNORECASE)
_CATEGORY = re.compile(r"\b(object\s*1|object\s*2|relation)\b", re.IGNORECASE)


def parse_llm_judge_output(text: str) -> tuple[str, str]:
    """Case-insensitive token scan of a judge completion.

    The first standalone yes/no token wins; the category is the first Task-2
    keyword after a "no". Returns (yes|no|unknown, object1|object2|relation|none).
    """
    match = _YES_NO.search(text)
    if match is None:
        return ("unknown", "none")
    answer = match.group(1).lower()
    if answer == "yes":
        return ("yes", "none")
    category = _CATEGORY.search(text, match.end())
    if category is None:
        return ("no", "none")
    return ("no", category.group(1).lower().replace(" ", ""))


_CATEGORY_TO_KIND = {
    "object1": (HallucinationKind.OBJECT, "subject"),
    "object2": (HallucinationKind.OBJECT, "object"),
    "relation": (HallucinationKind.RELATION, None),
}


def llm_judge(
    claim: Triplet,
    graph: SceneGraph,
    chat: ChatProvider,
    model_id: str = DEFAULT_JUDGE_MODEL,
) -> JudgeVerdict:
    """Structured-prompt judge; one format-reminder retry, then unjudgeable.

    This judge never returns a prediction-error verdict: that distinction
    exists only in the rule oracle.
    """
    prompt = build_llm_judge_prompt(graph.triplets, graph.objects, claim)
    completion = chat.complete(user_text_request(model_id, prompt))
    answer, category = parse_llm_judge_output(completion)
    if answer == "unknown" or (answer == "no" and category == "none"):
        completion = chat.complete(
            user_text_request(model_id, prompt + "\n\n" + FORMAT_REMINDER)
        )
        answer, category = parse_llm_judge_output(completion)
    if answer == "yes":
        return JudgeVerdict(
            VerdictStatus.SUPPORTED, claim, LLM_JUDGE_NAME, raw_payload=completion
        )
    if answer == "no" and category in _CATEGORY_TO_KIND:
        kind, side = _CATEGORY_TO_KIND[category]
        return JudgeVerdict(
            VerdictStatus.HALLUCINATED,
            claim,
            LLM_JUDGE_NAME,
            kind,
            side,
            raw_payload=completion,
        )
    return JudgeVerdict(
        VerdictStatus.UNJUDGEABLE,
        claim,
        LLM_JUDGE_NAME,
        raw_payload=json.dumps({"error": "parse-failure", "completion": completion}),
    )


class RuleJudge:
    """Offline judge wrapping the rule oracle with a fixed synonym table."""

    name = "rule"

    def __init__(self, synonyms: SynonymTable | None = None):
        self.synonyms = synonyms or SynonymTable.empty()

    def judge_question(self, graph: SceneGraph, claims: Sequence[Triplet]) -> list[JudgeVerdict]:
        return [classify_against_scene_graph(c, graph, self.synonyms) for c in claims]


class NliJudge:
    name = "nli"

    def __init__(
        self,
        embeddings: EmbeddingProvider,
        entailment: EntailmentProvider,
        config: NliJudgeConfig = NliJudgeConfig(),
    ):
        self.embeddings = embeddings
        self.entailment = entailment
        self.config = config

    def judge_question(self, graph: SceneGraph, claims: Sequence[Triplet]) -> list[JudgeVerdict]:
        return [
            nli_judge(c, graph, self.embeddings, self.entailment, self.config) for c in claims
        ]


class LlmJudge:
    name = "llm"

    def __init__(self, chat: ChatProvider, model_id: str = DEFAULT_JUDGE_MODEL):
        self.chat = chat
        self.model_id = model_id

    def judge_question(self, graph: SceneGraph, claims: Sequence[Triplet]) -> list[JudgeVerdict]:
        verdicts = []
        for claim in claims:
            try:
                verdicts.append(llm_judge(claim, graph, self.chat, self.model_id))
            except ProviderError as exc:
                verdicts.append(
                    JudgeVerdict(
                        VerdictStatus.UNJUDGEABLE,
                        claim,
                        LLM_JUDGE_NAME,
                        raw_payload=json.dumps(
                            {"error": type(exc).__name__, "detail": str(exc)}
                        ),
                    )
                )
        return verdicts
