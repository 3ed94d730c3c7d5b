"""End-to-end orchestration: responses -> extraction -> judging -> metrics.

Questions fan out over a bounded worker pool; the final reduction always runs
in sorted question-id order so outputs are byte-stable across worker counts.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

from .core import JudgeVerdict, KnowledgeGraph, SceneGraph, Triplet, VerdictStatus
from .dataset import Benchmark
from .errors import AuthError, ProviderError, SchemaError, TransportError
from .extraction import ExtractionConfig, extract_knowledge_graph
from .metrics import (
    EmptyResponsePolicy,
    HallucinationReport,
    QuestionResult,
    build_report,
)
from .mitigation import MitigationMode, MitigationTrace, collect_mitigated_responses
from .providers import ChatProvider


class QuestionJudge(Protocol):
    name: str

    def judge_question(
        self, graph: SceneGraph, claims: Sequence[Triplet]
    ) -> list[JudgeVerdict]: ...


@dataclass
class EvaluationRun:
    report: HallucinationReport
    question_results: tuple[QuestionResult, ...]
    knowledge_graphs: Mapping[str, KnowledgeGraph]
    failures: tuple[tuple[str, str, str], ...] = ()  # (question_id, error type, message)
    budget_exhausted: bool = False


def evaluate_responses(
    benchmark: Benchmark,
    responses: Mapping[str, str],
    extractor: ChatProvider,
    judge: QuestionJudge,
    extraction_config: ExtractionConfig = ExtractionConfig(),
    policy: EmptyResponsePolicy = EmptyResponsePolicy.EXCLUDE,
    workers: int = 1,
) -> EvaluationRun:
    """Judge every provided response against its question's scene graph.

    Per-question provider failures are recorded and the run continues;
    an AuthError aborts immediately (it cannot succeed on retry).
    """
    index = benchmark.question_index()
    unknown = sorted(set(responses) - set(index))
    if unknown:
        raise SchemaError(f"responses reference unknown question ids: {unknown[:5]}")

    question_ids = sorted(responses)

    def run_one(question_id: str):
        item, _qa = index[question_id]
        text = responses[question_id]
        if not text.strip():
            kg = KnowledgeGraph(triplets=(), source_response_id=question_id)
        else:
            kg = extract_knowledge_graph(
                text, extractor, extraction_config, source_response_id=question_id
            )
        if kg.triplets and item.scene_graph.triplets:
            verdicts = judge.judge_question(item.scene_graph, list(kg.triplets))
        elif kg.triplets:
            verdicts = [
                JudgeVerdict(
                    VerdictStatus.UNJUDGEABLE,
                    claim,
                    judge.name,
                    raw_payload=json.dumps({"error": "empty-scene-graph"}),
                )
                for claim in kg.triplets
            ]
        else:
            verdicts = []
        result = QuestionResult(
            question_id=question_id,
            image_id=item.image_id,
            verdicts=tuple(verdicts),
            empty_response=not verdicts,
        )
        return kg, result

    outcomes: dict[str, tuple[KnowledgeGraph, QuestionResult]] = {}
    failures: list[tuple[str, str, str]] = []
    if workers <= 1:
        for question_id in question_ids:
            try:
                outcomes[question_id] = run_one(question_id)
            except AuthError:
                raise
            except ProviderError as exc:
                failures.append((question_id, type(exc).__name__, str(exc)))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {qid: pool.submit(run_one, qid) for qid in question_ids}
            for question_id in question_ids:
                try:
                    outcomes[question_id] = futures[question_id].result()
                except AuthError:
                    raise
                except ProviderError as exc:
                    failures.append((question_id, type(exc).__name__, str(exc)))

    if not outcomes and failures:
        first = failures[0]
        raise TransportError(
            f"all {len(failures)} questions failed on provider errors; first: "
            f"{first[0]}: {first[2]}"
        )
    results = tuple(outcomes[qid][1] for qid in sorted(outcomes))
    kgs = {qid: outcomes[qid][0] for qid in sorted(outcomes)}
    report = build_report(results, policy=policy, judge_name=judge.name)
    return EvaluationRun(
        report=report,
        question_results=results,
        knowledge_graphs=kgs,
        failures=tuple(failures),
        budget_exhausted=bool(failures),
    )


def verdict_rows(results: Sequence[QuestionResult]) -> list[dict]:
    """One verdict per row: claim, judge, status, kind, and a payload digest."""
    rows = []
    for result in sorted(results, key=lambda r: r.question_id):
        for position, verdict in enumerate(result.verdicts):
            rows.append(
                {
                    "questionId": result.question_id,
                    "imageId": result.image_id,
                    "index": position,
                    "claim": list(verdict.claim.as_tuple()),
                    "judge": verdict.judge_name,
                    "status": verdict.status.value,
                    "kind": verdict.kind.value if verdict.kind else None,
                    "objectSide": verdict.object_side,
                    "payloadDigest": hashlib.sha256(
                        verdict.raw_payload.encode("utf-8")
                    ).hexdigest()[:16],
                }
            )
    return rows


def knowledge_graph_rows(kgs: Mapping[str, KnowledgeGraph]) -> list[dict]:
    return [
        {
            "questionId": question_id,
            "triplets": [list(t.as_tuple()) for t in kg.triplets],
            "skippedLineCount": kg.skipped_line_count,
            "rawLineCount": len(kg.raw_lines),
        }
        for question_id, kg in sorted(kgs.items())
    ]


def load_verdict_rows(rows: Sequence[Mapping]) -> tuple[QuestionResult, ...]:
    """Rebuild QuestionResults from serialized verdict rows (payloads are
    digests only and come back empty)."""
    from .core import HallucinationKind  # local to avoid import clutter at top

    grouped: dict[tuple[str, str], list[tuple[int, JudgeVerdict]]] = {}
    for row in rows:
        verdict = JudgeVerdict(
            status=VerdictStatus(row["status"]),
            claim=Triplet(*row["claim"]),
            judge_name=row["judge"],
            kind=HallucinationKind(row["kind"]) if row.get("kind") else None,
            object_side=row.get("objectSide"),
        )
        key = (row["questionId"], row["imageId"])
        grouped.setdefault(key, []).append((int(row.get("index", 0)), verdict))
    results = []
    for (question_id, image_id), indexed in sorted(grouped.items()):
        ordered = tuple(v for _, v in sorted(indexed, key=lambda pair: pair[0]))
        results.append(
            QuestionResult(question_id=question_id, image_id=image_id, verdicts=ordered)
        )
    return tuple(results)


@dataclass
class MitigationComparison:
    reports: dict[str, HallucinationReport] = field(default_factory=dict)
    traces: dict[str, list[MitigationTrace]] = field(default_factory=dict)
    runs: dict[str, EvaluationRun] = field(default_factory=dict)


def evaluate_mitigation(
    benchmark: Benchmark,
    responder: ChatProvider,
    modes: Sequence[MitigationMode],
    responder_model_id: str,
    extractor: ChatProvider,
    judge: QuestionJudge,
    extraction_config: ExtractionConfig = ExtractionConfig(),
    policy: EmptyResponsePolicy = EmptyResponsePolicy.EXCLUDE,
    workers: int = 1,
) -> MitigationComparison:
    """One full evaluation per mitigation mode over the same subset and judge."""
    comparison = MitigationComparison()
    for mode in modes:
        responses, traces = collect_mitigated_responses(
            benchmark, responder, mode, responder_model_id
        )
        run = evaluate_responses(
            benchmark,
            responses,
            extractor,
            judge,
            extraction_config=extraction_config,
            policy=policy,
            workers=workers,
        )
        comparison.reports[mode.value] = run.report
        comparison.traces[mode.value] = traces
        comparison.runs[mode.value] = run
    return comparison
