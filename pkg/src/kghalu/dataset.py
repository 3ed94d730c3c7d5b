"""Benchmark loading, validation, statistics, and question-generation helpers.

Benchmark JSON layout (one file per benchmark):

    {
      "name": ..., "version": ...,
      "items": [
        {
          "imageId": ..., "imagePath": ...,
          "sceneGraph": {"objects": [...], "triplets": [[s, p, o], ...]},
          "questions": [
            {"questionId": ..., "question": ..., "answer": ...,
             "reasoningTriplets": [[s, p, o], ...], "unverified": false}
          ]
        }
      ]
    }

Images are opaque attachments referenced by path; nothing here decodes pixels.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

from .core import (
    SceneGraph,
    SynonymTable,
    Triplet,
    parse_kg_lines,
    render_triplet,
)
from .errors import (
    AlignmentError,
    FormatError,
    InvariantError,
    NormalizationError,
    SchemaError,
)
from .prompts import QUESTION_GEN_PROMPT, load_prompt
from .tables import render_table


@dataclass(frozen=True)
class QAItem:
    question_id: str
    question: str
    answer: str
    reasoning_triplets: tuple[Triplet, ...]
    unverified: bool = False

    def __post_init__(self):
        object.__setattr__(
            self,
            "reasoning_triplets",
            tuple(t if isinstance(t, Triplet) else Triplet(*t) for t in self.reasoning_triplets),
        )
        if not self.question.strip() or not self.answer.strip():
            raise InvariantError(f"question {self.question_id!r}: question and answer must be non-empty")
        if not self.reasoning_triplets and not self.unverified:
            raise InvariantError(
                f"question {self.question_id!r}: reasoning triplets may be empty only when unverified"
            )


@dataclass(frozen=True)
class BenchmarkItem:
    image_id: str
    image_path: str
    scene_graph: SceneGraph
    questions: tuple[QAItem, ...]

    def __post_init__(self):
        object.__setattr__(self, "questions", tuple(self.questions))
        if not self.questions:
            raise InvariantError(f"image {self.image_id!r} has no questions")


@dataclass(frozen=True)
class Benchmark:
    name: str
    version: str
    items: tuple[BenchmarkItem, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))

    def question_index(self) -> dict[str, tuple[BenchmarkItem, QAItem]]:
        return {q.question_id: (item, q) for item in self.items for q in item.questions}


def _expect(mapping: Any, key: str, kind: type, pointer: str) -> Any:
    if not isinstance(mapping, dict):
        raise SchemaError(f"{pointer}: expected an object")
    if key not in mapping:
        raise SchemaError(f"{pointer}/{key}: missing required field")
    value = mapping[key]
    if kind is str and isinstance(value, bool):
        raise SchemaError(f"{pointer}/{key}: expected {kind.__name__}")
    if not isinstance(value, kind):
        raise SchemaError(f"{pointer}/{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def _parse_triplet_array(value: Any, pointer: str) -> Triplet:
    if (
        not isinstance(value, list)
        or len(value) != 3
        or not all(isinstance(part, str) for part in value)
    ):
        raise SchemaError(f"{pointer}: expected a [subject, predicate, object] string triple")
    try:
        return Triplet(*value)
    except NormalizationError as exc:
        raise SchemaError(f"{pointer}: {exc}") from exc


def load_benchmark(path: str | Path, synonyms: SynonymTable | None = None) -> Benchmark:
    """Load and fully validate a benchmark file; phrases are normalized on load.

    Shape problems raise SchemaError with a JSON-pointer location; semantic
    problems (e.g. a triplet endpoint absent from the scene graph) raise
    InvariantError naming the offending triplet.
    """
    syn = synonyms or SynonymTable.empty()
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc

    name = _expect(payload, "name", str, "")
    version = _expect(payload, "version", str, "")
    raw_items = _expect(payload, "items", list, "")

    items: list[BenchmarkItem] = []
    seen_images: set[str] = set()
    seen_questions: set[str] = set()
    for i, raw_item in enumerate(raw_items):
        pointer = f"/items/{i}"
        image_id = _expect(raw_item, "imageId", str, pointer)
        image_path = _expect(raw_item, "imagePath", str, pointer)
        if image_id in seen_images:
            raise SchemaError(f"{pointer}/imageId: duplicate image id {image_id!r}")
        seen_images.add(image_id)

        raw_graph = _expect(raw_item, "sceneGraph", dict, pointer)
        objects = _expect(raw_graph, "objects", list, f"{pointer}/sceneGraph")
        if not all(isinstance(o, str) for o in objects):
            raise SchemaError(f"{pointer}/sceneGraph/objects: expected strings")
        raw_triplets = _expect(raw_graph, "triplets", list, f"{pointer}/sceneGraph")
        triplets = [
            _parse_triplet_array(t, f"{pointer}/sceneGraph/triplets/{j}")
            for j, t in enumerate(raw_triplets)
        ]
        try:
            scene_graph = SceneGraph(objects=tuple(objects), triplets=tuple(triplets))
        except NormalizationError as exc:
            raise SchemaError(f"{pointer}/sceneGraph/objects: {exc}") from exc
        except InvariantError as exc:
            raise InvariantError(f"{pointer}/sceneGraph: {exc}") from exc

        canon_graph = syn.canonicalize_graph(scene_graph)
        raw_questions = _expect(raw_item, "questions", list, pointer)
        questions: list[QAItem] = []
        for j, raw_q in enumerate(raw_questions):
            q_pointer = f"{pointer}/questions/{j}"
            question_id = _expect(raw_q, "questionId", str, q_pointer)
            if question_id in seen_questions:
                raise SchemaError(f"{q_pointer}/questionId: duplicate question id {question_id!r}")
            seen_questions.add(question_id)
            question = _expect(raw_q, "question", str, q_pointer)
            answer = _expect(raw_q, "answer", str, q_pointer)
            unverified = bool(raw_q.get("unverified", False))
            raw_reasoning = _expect(raw_q, "reasoningTriplets", list, q_pointer)
            reasoning = [
                _parse_triplet_array(t, f"{q_pointer}/reasoningTriplets/{k}")
                for k, t in enumerate(raw_reasoning)
            ]
            for t in reasoning:
                ct = syn.canonicalize_triplet(t)
                if ct.subject not in canon_graph.object_set or ct.object not in canon_graph.object_set:
                    raise InvariantError(
                        f"{q_pointer}: reasoning triplet {render_triplet(t)} has an endpoint "
                        "that does not resolve to a scene-graph object"
                    )
                if ct.predicate not in canon_graph.relation_vocabulary:
                    raise InvariantError(
                        f"{q_pointer}: reasoning triplet {render_triplet(t)} uses a predicate "
                        "absent from the scene-graph relation vocabulary"
                    )
            try:
                questions.append(
                    QAItem(question_id, question, answer, tuple(reasoning), unverified)
                )
            except InvariantError as exc:
                raise InvariantError(f"{q_pointer}: {exc}") from exc
        try:
            items.append(BenchmarkItem(image_id, image_path, scene_graph, tuple(questions)))
        except InvariantError as exc:
            raise InvariantError(f"{pointer}: {exc}") from exc

    return Benchmark(name=name, version=version, items=tuple(items))


def benchmark_to_dict(benchmark: Benchmark) -> dict:
    return {
        "name": benchmark.name,
        "version": benchmark.version,
        "items": [
            {
                "imageId": item.image_id,
                "imagePath": item.image_path,
                "sceneGraph": {
                    "objects": list(item.scene_graph.objects),
                    "triplets": [list(t.as_tuple()) for t in item.scene_graph.triplets],
                },
                "questions": [
                    {
                        "questionId": q.question_id,
                        "question": q.question,
                        "answer": q.answer,
                        "reasoningTriplets": [list(t.as_tuple()) for t in q.reasoning_triplets],
                        **({"unverified": True} if q.unverified else {}),
                    }
                    for q in item.questions
                ],
            }
            for item in benchmark.items
        ],
    }


def save_benchmark(benchmark: Benchmark, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(benchmark_to_dict(benchmark), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


@dataclass(frozen=True)
class RelationRichnessReport:
    min_relations: int
    entries: tuple[tuple[str, int, bool], ...]  # (image_id, distinct relations, passed)

    @property
    def failures(self) -> tuple[str, ...]:
        return tuple(image_id for image_id, _, passed in self.entries if not passed)

    def to_json_dict(self) -> dict:
        return {
            "minRelations": self.min_relations,
            "entries": [
                {"imageId": i, "distinctRelations": n, "passed": p} for i, n, p in self.entries
            ],
            "failures": list(self.failures),
        }


def validate_relation_richness(benchmark: Benchmark, min_relations: int = 5) -> RelationRichnessReport:
    """Per-image check that the count of distinct relations is strictly greater
    than ``min_relations``; reports failures, mutates nothing."""
    entries = tuple(
        (
            item.image_id,
            len(item.scene_graph.relation_vocabulary),
            len(item.scene_graph.relation_vocabulary) > min_relations,
        )
        for item in benchmark.items
    )
    return RelationRichnessReport(min_relations=min_relations, entries=entries)


@dataclass(frozen=True)
class BenchmarkStatistics:
    image_count: int
    question_count: int
    object_count: int
    relation_count: int
    questions_per_image: Fraction
    triplets_per_graph: Fraction

    @property
    def questions_per_image_display(self) -> str:
        return f"{float(self.questions_per_image):.2f}"

    @property
    def triplets_per_graph_display(self) -> str:
        return f"{float(self.triplets_per_graph):.2f}"

    def to_json_dict(self) -> dict:
        return {
            "images": self.image_count,
            "questions": self.question_count,
            "objects": self.object_count,
            "relations": self.relation_count,
            "questionsPerImage": float(self.questions_per_image),
            "questionsPerImageDisplay": self.questions_per_image_display,
            "tripletsPerSceneGraph": float(self.triplets_per_graph),
            "tripletsPerSceneGraphDisplay": self.triplets_per_graph_display,
        }

    def to_text_table(self) -> str:
        return render_table(
            [
                "# Images",
                "# Questions",
                "# Objects",
                "# Relations",
                "# Questions / Image",
                "# Triplets / Scene Graph",
            ],
            [
                [
                    str(self.image_count),
                    str(self.question_count),
                    str(self.object_count),
                    str(self.relation_count),
                    self.questions_per_image_display,
                    self.triplets_per_graph_display,
                ]
            ],
        )


def compute_statistics(benchmark: Benchmark) -> BenchmarkStatistics:
    """Corpus-level counts; object/relation vocabularies are distinct after
    normalization but before synonym canonicalization."""
    objects: set[str] = set()
    relations: set[str] = set()
    question_count = 0
    triplet_count = 0
    for item in benchmark.items:
        objects.update(item.scene_graph.objects)
        relations.update(item.scene_graph.relation_vocabulary)
        question_count += len(item.questions)
        triplet_count += len(item.scene_graph.triplets)
    n = len(benchmark.items)
    return BenchmarkStatistics(
        image_count=n,
        question_count=question_count,
        object_count=len(objects),
        relation_count=len(relations),
        questions_per_image=Fraction(question_count, n) if n else Fraction(0),
        triplets_per_graph=Fraction(triplet_count, n) if n else Fraction(0),
    )


_NUMBER_WORDS = {
    1: "one", 2: "two", 3: "three", 4: "four", 5: "five",
    6: "six", 7: "seven", 8: "eight", 9: "nine", 10: "ten",
    11: "eleven", 12: "twelve", 13: "thirteen", 14: "fourteen", 15: "fifteen",
    16: "sixteen", 17: "seventeen", 18: "eighteen", 19: "nineteen", 20: "twenty",
}

QUESTION_SECTION_HEADERS = ("Generated Questions:", "Answers:", "Explanations:")


def build_question_gen_prompt(target_count: int = 10) -> str:
    if target_count < 1:
        raise ValueError("target_count must be >= 1")
    word = _NUMBER_WORDS.get(target_count, str(target_count))
    return load_prompt(QUESTION_GEN_PROMPT).replace("{question_count}", word)


_ITEM_START = re.compile(r"^\s*\d+\s*[.):]\s*")


def _split_items(section: str) -> list[str]:
    lines = section.splitlines()
    numbered = [i for i, line in enumerate(lines) if _ITEM_START.match(line)]
    if not numbered:
        return [line.strip() for line in lines if line.strip()]
    items: list[str] = []
    for pos, start in enumerate(numbered):
        end = numbered[pos + 1] if pos + 1 < len(numbered) else len(lines)
        chunk = [_ITEM_START.sub("", lines[start], count=1)] + lines[start + 1 : end]
        items.append("\n".join(chunk).strip())
    return items


def parse_question_gen_output(text: str, id_prefix: str = "candidate") -> tuple[QAItem, ...]:
    """Align generated questions, answers, and explanation triplets into
    unverified QAItem candidates. Nothing in this module can mark a candidate
    verified; that is a human step."""
    spans = []
    for header in QUESTION_SECTION_HEADERS:
        # spans on the original text: lowercasing a copy could shift offsets
        match = re.search(re.escape(header), text, flags=re.IGNORECASE)
        if match is None:
            raise FormatError(f"missing section header {header!r} in generation output")
        spans.append((match.start(), match.end()))
    if [start for start, _ in spans] != sorted(start for start, _ in spans):
        raise FormatError("section headers out of order in generation output")

    sections = []
    for idx, (_, header_end) in enumerate(spans):
        end = spans[idx + 1][0] if idx + 1 < len(spans) else len(text)
        sections.append(text[header_end:end])

    questions = _split_items(sections[0])
    answers = _split_items(sections[1])
    explanations = _split_items(sections[2])
    if not (len(questions) == len(answers) == len(explanations)):
        raise AlignmentError(len(questions), len(answers), len(explanations))

    candidates = []
    for idx, (question, answer, explanation) in enumerate(
        zip(questions, answers, explanations), start=1
    ):
        kg = parse_kg_lines(explanation, allow_empty=True)
        candidates.append(
            QAItem(
                question_id=f"{id_prefix}-{idx:03d}",
                question=question,
                answer=answer,
                reasoning_triplets=kg.triplets,
                unverified=True,
            )
        )
    return tuple(candidates)
