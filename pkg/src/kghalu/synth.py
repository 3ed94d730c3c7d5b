"""Deterministic synthetic benchmarks for tests, demos, and dry runs.

No randomness in the structural builders: object, relation, and triplet
allocation is systematic, so a rebuilt benchmark is byte-identical. The
response injector uses a seeded RNG and returns its design alongside the
responses so expected rates can be recomputed independently.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Sequence

from .core import SceneGraph, Triplet, render_triplet
from .dataset import Benchmark, BenchmarkItem, QAItem


def _spread(total: int, buckets: int) -> list[int]:
    base, remainder = divmod(total, buckets)
    return [base + 1 if i < remainder else base for i in range(buckets)]


def build_synthetic_benchmark(
    image_count: int,
    questions_per_image: int | Sequence[int],
    triplets_per_graph: int | Sequence[int],
    object_count: int,
    relation_count: int,
    shared_objects: int = 3,
    shared_relations: int = 6,
    name: str = "synthetic",
    version: str = "1.0",
) -> Benchmark:
    """Benchmark with exact corpus-level counts.

    ``object_count`` and ``relation_count`` are the distinct vocabulary sizes
    over the whole corpus; a shared pool appears in every image and the rest
    is distributed evenly. Every image relation appears in at least one
    triplet (the relation vocabulary is derived from triplets), which requires
    triplets_per_graph >= per-image relation count.
    """
    if image_count < 1:
        raise ValueError("image_count must be >= 1")
    questions = (
        list(questions_per_image)
        if not isinstance(questions_per_image, int)
        else [questions_per_image] * image_count
    )
    triplet_counts = (
        list(triplets_per_graph)
        if not isinstance(triplets_per_graph, int)
        else [triplets_per_graph] * image_count
    )
    if len(questions) != image_count or len(triplet_counts) != image_count:
        raise ValueError("per-image sequences must match image_count")
    if object_count <= shared_objects or relation_count <= shared_relations:
        raise ValueError("vocabulary sizes must exceed the shared pools")

    unique_objects = _spread(object_count - shared_objects, image_count)
    unique_relations = _spread(relation_count - shared_relations, image_count)

    shared_object_pool = [f"common object {i}" for i in range(shared_objects)]
    shared_relation_pool = [f"common relation {i}" for i in range(shared_relations)]

    items = []
    object_counter = 0
    relation_counter = 0
    question_counter = 0
    for i in range(image_count):
        image_id = f"img-{i:04d}"
        objects = list(shared_object_pool)
        for _ in range(unique_objects[i]):
            objects.append(f"object {object_counter}")
            object_counter += 1
        relations = list(shared_relation_pool)
        for _ in range(unique_relations[i]):
            relations.append(f"relation {relation_counter}")
            relation_counter += 1

        t_count = triplet_counts[i]
        if t_count < len(relations):
            raise ValueError(
                f"image {image_id}: {t_count} triplets cannot cover {len(relations)} relations"
            )
        pairs = [
            (objects[a], objects[b])
            for a in range(len(objects))
            for b in range(len(objects))
            if a != b
        ]
        if t_count > len(pairs):
            raise ValueError(f"image {image_id}: not enough object pairs for {t_count} triplets")
        triplets = [
            Triplet(pairs[j][0], relations[j % len(relations)], pairs[j][1])
            for j in range(t_count)
        ]
        graph = SceneGraph(objects=tuple(objects), triplets=tuple(triplets))

        qas = []
        for j in range(questions[i]):
            question_counter += 1
            reasoning = (triplets[j % t_count],)
            qas.append(
                QAItem(
                    question_id=f"{image_id}-q{j}",
                    question=f"What does scene {i} imply about {reasoning[0].subject}?",
                    answer=f"It relates to {reasoning[0].object}.",
                    reasoning_triplets=reasoning,
                )
            )
        items.append(
            BenchmarkItem(
                image_id=image_id,
                image_path=f"images/{image_id}.jpg",
                scene_graph=graph,
                questions=tuple(qas),
            )
        )
    return Benchmark(name=name, version=version, items=tuple(items))


def reference_statistics_benchmark() -> Benchmark:
    """Fixture sized to the published corpus statistics: 300 images, 1226
    questions, 1723 distinct objects, 618 distinct relations, 5730 scene-graph
    triplets (19.10 per graph)."""
    questions = [5] * 26 + [4] * 274
    triplets = [20] * 30 + [19] * 270
    return build_synthetic_benchmark(
        image_count=300,
        questions_per_image=questions,
        triplets_per_graph=triplets,
        object_count=1723,
        relation_count=618,
        name="reference-shaped",
        version="1.0",
    )


def inject_hallucinated_responses(
    benchmark: Benchmark,
    seed: int = 0,
    min_triplets: int = 2,
    max_triplets: int = 6,
) -> tuple[dict[str, str], dict[str, dict[str, int]]]:
    """Per-question responses made of rendered triplet lines with a known
    hallucination mix, for recovery tests against the rule oracle.

    Returns (responses, design) where design[qid] carries the exact counts
    {"total", "object", "relation"}; supported lines are scene-graph triplets,
    object hallucinations use a phantom endpoint, relation hallucinations a
    phantom predicate. The designed per-question rate is
    (object + relation) / total.
    """
    rng = random.Random(seed)
    responses: dict[str, str] = {}
    design: dict[str, dict[str, int]] = {}
    for item in benchmark.items:
        graph_triplets = list(item.scene_graph.triplets)
        objects = list(item.scene_graph.objects)
        for qa in item.questions:
            total = rng.randint(min_triplets, min(max_triplets, len(graph_triplets)))
            hallucinated = rng.randint(0, total)
            object_h = rng.randint(0, hallucinated)
            relation_h = hallucinated - object_h
            supported = rng.sample(graph_triplets, total - hallucinated)
            lines = [render_triplet(t) for t in supported]
            for n in range(object_h):
                anchor = rng.choice(graph_triplets)
                lines.append(
                    render_triplet(
                        Triplet(
                            f"phantom entity {qa.question_id} {n}",
                            anchor.predicate,
                            anchor.object,
                        )
                    )
                )
            for n in range(relation_h):
                subject, obj = rng.sample(objects, 2)
                lines.append(
                    render_triplet(
                        Triplet(subject, f"phantom relation {qa.question_id} {n}", obj)
                    )
                )
            rng.shuffle(lines)
            responses[qa.question_id] = "\n".join(lines)
            design[qa.question_id] = {
                "total": total,
                "object": object_h,
                "relation": relation_h,
            }
    return responses, design


def designed_rates(
    design: dict[str, dict[str, int]],
    question_to_image: dict[str, str],
) -> tuple[Fraction, Fraction]:
    """Exact (hallu_q, hallu_i) percentages implied by an injection design."""
    per_question = {
        qid: Fraction(counts["object"] + counts["relation"], counts["total"])
        for qid, counts in design.items()
    }
    q_rate = Fraction(sum(per_question.values()), len(per_question)) * 100
    by_image: dict[str, list[Fraction]] = {}
    for qid, rate in per_question.items():
        by_image.setdefault(question_to_image[qid], []).append(rate)
    image_means = [Fraction(sum(rates), len(rates)) for rates in by_image.values()]
    i_rate = Fraction(sum(image_means), len(image_means)) * 100
    return q_rate, i_rate
