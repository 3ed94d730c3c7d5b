"""Triplet and graph primitives plus the rule-based verdict oracle.

Phrases are plain strings in canonical form: lowercased, inner whitespace
collapsed, punctuation stripped off both edges. ``normalize_phrase`` is the
single entry point producing that form and is idempotent.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping

from .errors import EmptyExtraction, InvariantError, NormalizationError

Phrase = str

TERMINATOR = "<Done>"
RULE_JUDGE_NAME = "rule"

_EDGE_CHARS = string.punctuation + string.whitespace
_TRIPLE_LINE = re.compile(r'\(\s*"([^"]*)"\s*,\s*"([^"]*)"\s*,\s*"([^"]*)"\s*\)')


def normalize_phrase(text: str) -> Phrase:
    """Canonicalize raw text into a phrase; raises NormalizationError if empty."""
    # Inner double quotes become single quotes so a rendered triplet line is
    # always re-parseable and rendering stays injective. Whitespace collapses
    # before edge-stripping: str.split canonicalizes Unicode whitespace to
    # single ASCII spaces, so a punctuation character can never hide behind a
    # non-ASCII space at the edge (idempotence would break otherwise).
    cleaned = " ".join(text.replace('"', "'").lower().split())
    cleaned = cleaned.strip(_EDGE_CHARS)
    if not cleaned:
        raise NormalizationError(f"phrase is empty after normalization: {text!r}")
    return cleaned


@dataclass(frozen=True)
class Triplet:
    """One (subject, predicate, object) unit; fields are normalized on construction."""

    subject: Phrase
    predicate: Phrase
    object: Phrase

    def __post_init__(self):
        object.__setattr__(self, "subject", normalize_phrase(self.subject))
        object.__setattr__(self, "predicate", normalize_phrase(self.predicate))
        object.__setattr__(self, "object", normalize_phrase(self.object))
        # Membership tests against scene graphs are the hot path; cache the hash.
        object.__setattr__(self, "_hash", hash((self.subject, self.predicate, self.object)))

    def __hash__(self) -> int:
        return self._hash

    def as_tuple(self) -> tuple[Phrase, Phrase, Phrase]:
        return (self.subject, self.predicate, self.object)


def render_triplet(t: Triplet) -> str:
    """Canonical quoted-triple line for a triplet; parse(render(t)) == t."""
    return f'("{t.subject}", "{t.predicate}", "{t.object}")'


@dataclass(frozen=True)
class SceneGraph:
    """Ground-truth graph for one image: object set plus relation triplets.

    The relation vocabulary is derived from the triplets, never stored, so the
    invariant "vocabulary == set of predicates" holds structurally.
    """

    objects: tuple[Phrase, ...]
    triplets: tuple[Triplet, ...]

    def __post_init__(self):
        seen_objects: dict[Phrase, None] = {}
        for raw in self.objects:
            seen_objects.setdefault(normalize_phrase(raw), None)
        seen_triplets: dict[Triplet, None] = {}
        for item in self.triplets:
            t = item if isinstance(item, Triplet) else Triplet(*item)
            seen_triplets.setdefault(t, None)
        object.__setattr__(self, "objects", tuple(seen_objects))
        object.__setattr__(self, "triplets", tuple(seen_triplets))
        obj_set = frozenset(self.objects)
        for t in self.triplets:
            if t.subject not in obj_set or t.object not in obj_set:
                raise InvariantError(
                    f"scene-graph triplet {render_triplet(t)} references an object "
                    "missing from the object list"
                )

    @cached_property
    def object_set(self) -> frozenset[Phrase]:
        return frozenset(self.objects)

    @cached_property
    def triplet_set(self) -> frozenset[Triplet]:
        return frozenset(self.triplets)

    @cached_property
    def relation_vocabulary(self) -> frozenset[Phrase]:
        return frozenset(t.predicate for t in self.triplets)


@dataclass(frozen=True)
class KnowledgeGraph:
    """Triplets extracted from one model response, with provenance to raw lines.

    Duplicate triplets are preserved: every extracted triplet counts toward
    rate denominators individually.
    """

    triplets: tuple[Triplet, ...]
    source_response_id: str = ""
    raw_lines: tuple[str, ...] = ()
    skipped_line_count: int = 0

    def __post_init__(self):
        object.__setattr__(
            self,
            "triplets",
            tuple(t if isinstance(t, Triplet) else Triplet(*t) for t in self.triplets),
        )
        object.__setattr__(self, "raw_lines", tuple(self.raw_lines))
        if self.skipped_line_count < 0:
            raise InvariantError("skipped_line_count must be non-negative")
        if len(self.triplets) + self.skipped_line_count > len(self.raw_lines):
            raise InvariantError(
                "triplets plus skipped lines exceed the recorded raw lines"
            )

    @classmethod
    def from_triplets(
        cls, triplets: Iterable[Triplet], source_response_id: str = ""
    ) -> "KnowledgeGraph":
        ts = tuple(triplets)
        return cls(
            triplets=ts,
            source_response_id=source_response_id,
            raw_lines=tuple(render_triplet(t) for t in ts),
        )

    @property
    def object_phrases(self) -> frozenset[Phrase]:
        """Derived endpoint vocabulary (the extracted graph's object set)."""
        return frozenset(p for t in self.triplets for p in (t.subject, t.object))

    @property
    def predicate_phrases(self) -> frozenset[Phrase]:
        """Derived predicate vocabulary (the extracted graph's relation set)."""
        return frozenset(t.predicate for t in self.triplets)


def parse_kg_lines(
    text: str, source_response_id: str = "", allow_empty: bool = False
) -> KnowledgeGraph:
    """Parse extractor output into a KnowledgeGraph.

    One triplet per well-formed quoted-triple line; parsing stops at the first
    line containing the terminator token. Malformed non-blank lines before the
    terminator are counted as skipped. Raises EmptyExtraction when nothing
    parses, unless ``allow_empty`` is set.
    """
    lines = text.splitlines()
    triplets: list[Triplet] = []
    skipped = 0
    for line in lines:
        if TERMINATOR in line:
            break
        if not line.strip():
            continue
        match = _TRIPLE_LINE.search(line)
        if match is None:
            skipped += 1
            continue
        try:
            triplets.append(Triplet(match[1], match[2], match[3]))
        except NormalizationError:
            skipped += 1
    if not triplets and not allow_empty:
        raise EmptyExtraction(lines)
    return KnowledgeGraph(
        triplets=tuple(triplets),
        source_response_id=source_response_id,
        raw_lines=tuple(lines),
        skipped_line_count=skipped,
    )


@dataclass(frozen=True)
class SynonymTable:
    """Flat phrase-to-canonical-phrase map; canonical targets are fixed points."""

    mapping: Mapping[Phrase, Phrase] = field(default_factory=dict)

    def __post_init__(self):
        normalized: dict[Phrase, Phrase] = {}
        for raw_key, raw_value in self.mapping.items():
            key, value = normalize_phrase(raw_key), normalize_phrase(raw_value)
            if normalized.get(key, value) != value:
                raise InvariantError(
                    f"conflicting synonym entries normalize to {key!r}"
                )
            normalized[key] = value
        for target in normalized.values():
            if normalized.get(target, target) != target:
                raise InvariantError(
                    f"synonym target {target!r} is itself remapped; targets must be fixed points"
                )
        object.__setattr__(self, "mapping", normalized)

    @classmethod
    def empty(cls) -> "SynonymTable":
        return cls({})

    def canonical(self, phrase: Phrase) -> Phrase:
        return self.mapping.get(phrase, phrase)

    def canonicalize_triplet(self, t: Triplet) -> Triplet:
        if not self.mapping:
            return t
        return Triplet(
            self.canonical(t.subject), self.canonical(t.predicate), self.canonical(t.object)
        )

    def canonicalize_graph(self, g: SceneGraph) -> SceneGraph:
        if not self.mapping:
            return g
        return SceneGraph(
            objects=tuple(self.canonical(o) for o in g.objects),
            triplets=tuple(self.canonicalize_triplet(t) for t in g.triplets),
        )


class VerdictStatus(str, Enum):
    SUPPORTED = "supported"
    HALLUCINATED = "hallucinated"
    PREDICTION_ERROR = "prediction-error"
    UNJUDGEABLE = "unjudgeable"


class HallucinationKind(str, Enum):
    OBJECT = "object"
    RELATION = "relation"
    UNKNOWN = "unknown"


@dataclass(frozen=True, slots=True)
class JudgeVerdict:
    """Outcome of judging one claim triplet against one scene graph."""

    status: VerdictStatus
    claim: Triplet
    judge_name: str
    kind: HallucinationKind | None = None
    object_side: str | None = None  # "subject" | "object", object hallucinations only
    raw_payload: str = ""

    def __post_init__(self):
        if (self.kind is not None) != (self.status is VerdictStatus.HALLUCINATED):
            raise InvariantError("kind must be present exactly when status is hallucinated")
        if self.object_side is not None and self.kind is not HallucinationKind.OBJECT:
            raise InvariantError("object_side applies only to object hallucinations")


def supported_verdict(claim: Triplet, judge_name: str, raw_payload: str = "") -> JudgeVerdict:
    return JudgeVerdict(VerdictStatus.SUPPORTED, claim, judge_name, raw_payload=raw_payload)


def hallucinated_verdict(
    claim: Triplet,
    judge_name: str,
    kind: HallucinationKind,
    object_side: str | None = None,
    raw_payload: str = "",
) -> JudgeVerdict:
    return JudgeVerdict(
        VerdictStatus.HALLUCINATED, claim, judge_name, kind, object_side, raw_payload
    )


def unjudgeable_verdict(claim: Triplet, judge_name: str, raw_payload: str = "") -> JudgeVerdict:
    return JudgeVerdict(VerdictStatus.UNJUDGEABLE, claim, judge_name, raw_payload=raw_payload)


def classify_against_scene_graph(
    triplet: Triplet, graph: SceneGraph, synonyms: SynonymTable | None = None
) -> JudgeVerdict:
    """Deterministic rule-based verdict for one claim triplet.

    Membership is exact match after normalization and synonym
    canonicalization of both sides; exactly one verdict per claim:

    - supported: the triplet is in the scene graph;
    - object hallucination: an endpoint is not among the image's objects;
    - relation hallucination: both endpoints known, predicate not in the
      derived relation vocabulary;
    - prediction error: endpoints and predicate all known, but this
      combination is not in the graph (a wrong answer, not a hallucination).
    """
    if synonyms is not None and synonyms.mapping:
        claim = synonyms.canonicalize_triplet(triplet)
        graph = synonyms.canonicalize_graph(graph)
    else:
        claim = triplet
    if claim in graph.triplet_set:
        return JudgeVerdict(
            VerdictStatus.SUPPORTED,
            triplet,
            RULE_JUDGE_NAME,
            raw_payload="triplet present in scene graph",
        )
    objects = graph.object_set
    if claim.subject not in objects:
        return JudgeVerdict(
            VerdictStatus.HALLUCINATED,
            triplet,
            RULE_JUDGE_NAME,
            HallucinationKind.OBJECT,
            "subject",
            raw_payload="subject not among image objects",
        )
    if claim.object not in objects:
        return JudgeVerdict(
            VerdictStatus.HALLUCINATED,
            triplet,
            RULE_JUDGE_NAME,
            HallucinationKind.OBJECT,
            "object",
            raw_payload="object not among image objects",
        )
    if claim.predicate not in graph.relation_vocabulary:
        return JudgeVerdict(
            VerdictStatus.HALLUCINATED,
            triplet,
            RULE_JUDGE_NAME,
            HallucinationKind.RELATION,
            raw_payload="predicate not in relation vocabulary",
        )
    return JudgeVerdict(
        VerdictStatus.PREDICTION_ERROR,
        triplet,
        RULE_JUDGE_NAME,
        raw_payload="known objects and relation paired in a way absent from the graph",
    )
