"""Question- and image-level hallucination rates with kind decomposition.

All aggregation runs on exact fractions so the partition identity
(overall = object + relation + kind-unknown) holds exactly, not just to float
tolerance; floats are derived only at serialization time. Reductions iterate
in sorted-id order so results are reproducible across runs and worker counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping, Sequence

from .core import HallucinationKind, JudgeVerdict, VerdictStatus
from .errors import InvariantError, MetricsUndefined
from .tables import render_two_level_table


class EmptyResponsePolicy(str, Enum):
    # A question whose response yielded zero judgeable triplets has an
    # undefined rate; exclude it from the means (reported), or count it as 0.
    EXCLUDE = "exclude"
    COUNT_AS_ZERO = "count-as-zero"


class KindFilter(str, Enum):
    OVERALL = "overall"
    OBJECT = "object"
    RELATION = "relation"
    KIND_UNKNOWN = "kind-unknown"


@dataclass(frozen=True)
class QuestionResult:
    question_id: str
    image_id: str
    verdicts: tuple[JudgeVerdict, ...]
    empty_response: bool = False

    def __post_init__(self):
        object.__setattr__(self, "verdicts", tuple(self.verdicts))
        if self.empty_response and self.verdicts:
            raise InvariantError("an empty response cannot carry verdicts")

    @property
    def total_triplets(self) -> int:
        return len(self.verdicts)

    @property
    def judgeable_verdicts(self) -> tuple[JudgeVerdict, ...]:
        return tuple(v for v in self.verdicts if v.status is not VerdictStatus.UNJUDGEABLE)


def _matches(verdict: JudgeVerdict, kind_filter: KindFilter) -> bool:
    if verdict.status is not VerdictStatus.HALLUCINATED:
        return False
    if kind_filter is KindFilter.OVERALL:
        return True
    if kind_filter is KindFilter.OBJECT:
        return verdict.kind is HallucinationKind.OBJECT
    if kind_filter is KindFilter.RELATION:
        return verdict.kind is HallucinationKind.RELATION
    return verdict.kind is HallucinationKind.UNKNOWN


def question_rate(result: QuestionResult, kind_filter: KindFilter = KindFilter.OVERALL) -> Fraction:
    """Hallucinated fraction of the question's judgeable triplets.

    Prediction errors and unjudgeable verdicts never count as hallucinated;
    unjudgeable verdicts also leave the denominator.
    """
    judgeable = result.judgeable_verdicts
    if not judgeable:
        raise MetricsUndefined(
            f"question {result.question_id!r} has no judgeable triplets"
        )
    hallucinated = sum(1 for v in judgeable if _matches(v, kind_filter))
    return Fraction(hallucinated, len(judgeable))


def _surviving_rates(
    results: Sequence[QuestionResult],
    kind_filter: KindFilter,
    policy: EmptyResponsePolicy,
) -> list[tuple[QuestionResult, Fraction]]:
    rates = []
    for result in sorted(results, key=lambda r: r.question_id):
        if result.judgeable_verdicts:
            rates.append((result, question_rate(result, kind_filter)))
        elif policy is EmptyResponsePolicy.COUNT_AS_ZERO:
            rates.append((result, Fraction(0)))
    return rates


def hallu_q(
    results: Sequence[QuestionResult],
    kind_filter: KindFilter = KindFilter.OVERALL,
    policy: EmptyResponsePolicy = EmptyResponsePolicy.EXCLUDE,
) -> Fraction:
    """Question-level rate: mean of per-question hallucinated fractions, x100."""
    rates = _surviving_rates(results, kind_filter, policy)
    if not rates:
        raise MetricsUndefined("every question was excluded by the empty-response policy")
    return Fraction(sum(rate for _, rate in rates), len(rates)) * 100


def hallu_i(
    results: Sequence[QuestionResult],
    kind_filter: KindFilter = KindFilter.OVERALL,
    policy: EmptyResponsePolicy = EmptyResponsePolicy.EXCLUDE,
) -> Fraction:
    """Image-level rate: per-image question-level mean fraction, averaged over
    images, x100. Images whose questions were all excluded drop out of the
    outer mean."""
    by_image: dict[str, list[QuestionResult]] = {}
    for result in results:
        by_image.setdefault(result.image_id, []).append(result)
    image_means = []
    for image_id in sorted(by_image):
        rates = _surviving_rates(by_image[image_id], kind_filter, policy)
        if rates:
            image_means.append(Fraction(sum(rate for _, rate in rates), len(rates)))
    if not image_means:
        raise MetricsUndefined("every image was excluded by the empty-response policy")
    return Fraction(sum(image_means), len(image_means)) * 100


def _display(value: Fraction) -> str:
    return f"{float(value):.2f}"


@dataclass(frozen=True)
class HallucinationReport:
    """Exact rates (percentages) plus audit counters for one evaluation run."""

    judge_name: str
    policy: EmptyResponsePolicy
    hallu_q: Fraction
    hallu_i: Fraction
    per_kind: Mapping[str, tuple[Fraction, Fraction]]  # kind -> (hallu_q, hallu_i)
    per_image: Mapping[str, Fraction]
    per_question: Mapping[str, Fraction]
    excluded_question_count: int
    unjudgeable_count: int
    question_count: int
    image_count: int

    def to_json_dict(self) -> dict:
        def rate_pair(q: Fraction, i: Fraction) -> dict:
            return {
                "halluQ": float(q),
                "halluQDisplay": _display(q),
                "halluI": float(i),
                "halluIDisplay": _display(i),
            }

        return {
            "judge": self.judge_name,
            "policy": self.policy.value,
            "overall": rate_pair(self.hallu_q, self.hallu_i),
            "perKind": {
                kind: rate_pair(q, i) for kind, (q, i) in sorted(self.per_kind.items())
            },
            "perImage": {k: float(v) for k, v in sorted(self.per_image.items())},
            "perQuestion": {k: float(v) for k, v in sorted(self.per_question.items())},
            "excludedQuestionCount": self.excluded_question_count,
            "unjudgeableCount": self.unjudgeable_count,
            "questionCount": self.question_count,
            "imageCount": self.image_count,
        }

    def to_text_table(self, label: str = "model") -> str:
        groups = [
            ("Overall", ("Hallu_I", "Hallu_Q")),
            ("Object", ("Hallu_I", "Hallu_Q")),
            ("Relation", ("Hallu_I", "Hallu_Q")),
        ]
        object_q, object_i = self.per_kind[KindFilter.OBJECT.value]
        relation_q, relation_i = self.per_kind[KindFilter.RELATION.value]
        unknown_q, unknown_i = self.per_kind[KindFilter.KIND_UNKNOWN.value]
        # A binary judge reports every hallucination kind-unknown; print "-"
        # rather than a misleading 0.00 under the kind columns.
        kinds_unattributed = (
            (unknown_q > 0 or unknown_i > 0)
            and object_q == relation_q == object_i == relation_i == 0
        )
        if kinds_unattributed:
            kind_cells = ["-", "-", "-", "-"]
        else:
            kind_cells = [
                _display(object_i),
                _display(object_q),
                _display(relation_i),
                _display(relation_q),
            ]
        cells = [_display(self.hallu_i), _display(self.hallu_q)] + kind_cells
        return render_two_level_table(groups, [(label, cells)], label_header="Method")


def build_report(
    results: Sequence[QuestionResult],
    policy: EmptyResponsePolicy = EmptyResponsePolicy.EXCLUDE,
    judge_name: str = "",
) -> HallucinationReport:
    overall_rates = _surviving_rates(results, KindFilter.OVERALL, policy)
    if not overall_rates:
        raise MetricsUndefined("every question was excluded by the empty-response policy")
    surviving_ids = {r.question_id for r, _ in overall_rates}
    per_kind = {}
    for kind_filter in (KindFilter.OBJECT, KindFilter.RELATION, KindFilter.KIND_UNKNOWN):
        per_kind[kind_filter.value] = (
            hallu_q(results, kind_filter, policy),
            hallu_i(results, kind_filter, policy),
        )
    return HallucinationReport(
        judge_name=judge_name,
        policy=policy,
        hallu_q=hallu_q(results, KindFilter.OVERALL, policy),
        hallu_i=hallu_i(results, KindFilter.OVERALL, policy),
        per_kind=per_kind,
        per_image=_per_image_rates(results, policy),
        per_question={r.question_id: rate * 100 for r, rate in overall_rates},
        excluded_question_count=len(results) - len(surviving_ids),
        unjudgeable_count=sum(
            1
            for result in results
            for v in result.verdicts
            if v.status is VerdictStatus.UNJUDGEABLE
        ),
        question_count=len(results),
        image_count=len({r.image_id for r in results}),
    )


def _per_image_rates(
    results: Sequence[QuestionResult], policy: EmptyResponsePolicy
) -> dict[str, Fraction]:
    by_image: dict[str, list[QuestionResult]] = {}
    for result in results:
        by_image.setdefault(result.image_id, []).append(result)
    out = {}
    for image_id in sorted(by_image):
        rates = _surviving_rates(by_image[image_id], KindFilter.OVERALL, policy)
        if rates:
            out[image_id] = Fraction(sum(r for _, r in rates), len(rates)) * 100
    return out
