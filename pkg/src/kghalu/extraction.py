"""Knowledge-graph extraction from free-form model answers via a chat provider."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from .core import KnowledgeGraph, parse_kg_lines
from .errors import EmptyExtraction
from .prompts import EXTRACTION_PROMPT, load_prompt
from .providers import ChatProvider, DEFAULT_EXTRACTOR_MODEL, user_text_request

_INPUT_SLOT = "{input_text}"


@dataclass(frozen=True)
class ExtractionConfig:
    model_id: str = DEFAULT_EXTRACTOR_MODEL
    retry_limit: int = 2
    # Empty means the provider's own default inference parameters.
    generation_params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")


def build_extraction_prompt(response_text: str) -> str:
    """Extraction template with the response substituted at the input slot.

    The template is a pinned asset; the built prompt differs from it only at
    the substitution slot.
    """
    if not response_text:
        raise ValueError("response_text must be non-empty")
    return load_prompt(EXTRACTION_PROMPT).replace(_INPUT_SLOT, response_text)


def extract_knowledge_graph(
    response_text: str,
    provider: ChatProvider,
    config: ExtractionConfig = ExtractionConfig(),
    source_response_id: str = "",
) -> KnowledgeGraph:
    """Prompt the provider and parse the completion into a KnowledgeGraph.

    An empty extraction is retried up to ``retry_limit`` times with the
    identical prompt (retries carry a cache salt so a cached empty completion
    does not short-circuit them). A final empty result is not an error: it
    comes back as an empty KnowledgeGraph for the metrics empty-response
    policy to handle.
    """
    prompt = build_extraction_prompt(response_text)
    request = user_text_request(config.model_id, prompt, config.generation_params)
    completion = ""
    for attempt in range(config.retry_limit + 1):
        salt = f"retry-{attempt}" if attempt else ""
        completion = provider.complete(request, cache_salt=salt)
        try:
            return parse_kg_lines(completion, source_response_id=source_response_id)
        except EmptyExtraction:
            continue
    return parse_kg_lines(completion, source_response_id=source_response_id, allow_empty=True)
