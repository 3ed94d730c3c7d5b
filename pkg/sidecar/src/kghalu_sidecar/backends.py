"""Embedding and entailment backends.

The transformer backends host the pretrained models named in the config. The
lexical backends are a dependency-free, fully deterministic stand-in for
offline hosts: hashed bag-of-tokens vectors and token-coverage entailment.
Both pairs satisfy the same contracts (order-preserving vectors of one fixed
dimension; entailment scores in [0, 1]; determinism within a process).
"""

from __future__ import annotations

import hashlib
import math
import re
from typing import Protocol, Sequence

_TOKEN = re.compile(r"[a-z0-9]+")

LEXICAL_DIM = 256


def _tokens(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


class EmbeddingBackend(Protocol):
    model_id: str
    dim: int

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


class EntailmentBackend(Protocol):
    model_id: str

    def score(self, premise: str, hypothesis: str) -> float: ...


class LexicalEmbeddingBackend:
    """Hashed bag-of-tokens vectors, L2-normalized; identical text, identical vector."""

    def __init__(self, model_id: str, dim: int = LEXICAL_DIM):
        self.model_id = f"lexical:{model_id}"
        self.dim = dim

    def _vector(self, text: str) -> list[float]:
        counts = [0.0] * self.dim
        for token in _tokens(text):
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:4], "big") % self.dim
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            counts[bucket] += sign
        norm = math.sqrt(sum(x * x for x in counts))
        if norm == 0.0:
            vector = [0.0] * self.dim
            vector[0] = 1.0
            return vector
        return [x / norm for x in counts]

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        return [self._vector(t) for t in texts]


class LexicalEntailmentBackend:
    """Token coverage of the hypothesis by the premise, in [0, 1]."""

    def __init__(self, model_id: str):
        self.model_id = f"lexical:{model_id}"

    def score(self, premise: str, hypothesis: str) -> float:
        hypothesis_tokens = set(_tokens(hypothesis))
        if not hypothesis_tokens:
            return 0.0
        premise_tokens = set(_tokens(premise))
        return len(hypothesis_tokens & premise_tokens) / len(hypothesis_tokens)


class TransformerEmbeddingBackend:
    """Bi-encoder sentence embeddings via sentence-transformers."""

    def __init__(self, model_id: str):
        from sentence_transformers import SentenceTransformer

        self.model_id = model_id
        self._model = SentenceTransformer(model_id)
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        vectors = self._model.encode(
            list(texts), convert_to_numpy=True, show_progress_bar=False
        )
        return [[float(x) for x in row] for row in vectors]


class CrossEncoderEntailmentBackend:
    """Entailment-class softmax probability from an NLI cross-encoder."""

    def __init__(self, model_id: str):
        from sentence_transformers import CrossEncoder

        self.model_id = model_id
        self._model = CrossEncoder(model_id)
        self._entailment_index = self._find_entailment_index()

    def _find_entailment_index(self) -> int:
        id2label = getattr(getattr(self._model, "config", None), "id2label", None) or {}
        for index, label in id2label.items():
            if "entail" in str(label).lower():
                return int(index)
        return 1

    def score(self, premise: str, hypothesis: str) -> float:
        import numpy as np

        logits = self._model.predict([(premise, hypothesis)], show_progress_bar=False)[0]
        logits = np.asarray(logits, dtype=float).reshape(-1)
        if logits.size == 1:  # single-logit models are already probabilities
            return float(min(1.0, max(0.0, logits[0])))
        shifted = np.exp(logits - logits.max())
        probabilities = shifted / shifted.sum()
        return float(probabilities[self._entailment_index])


def build_backends(
    embedding_model_id: str, entailment_model_id: str, backend: str
) -> tuple[EmbeddingBackend, EntailmentBackend, str]:
    """Returns (embedding, entailment, effective-backend-name)."""
    if backend in ("auto", "transformer"):
        try:
            return (
                TransformerEmbeddingBackend(embedding_model_id),
                CrossEncoderEntailmentBackend(entailment_model_id),
                "transformer",
            )
        except Exception:
            if backend == "transformer":
                raise
    return (
        LexicalEmbeddingBackend(embedding_model_id),
        LexicalEntailmentBackend(entailment_model_id),
        "lexical",
    )
