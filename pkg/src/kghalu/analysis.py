"""Secondary analyses: object-pair frequency, truncation sweeps, correlation
with human judgments, and inter-annotator agreement."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from scipy import stats

from .core import KnowledgeGraph, SynonymTable, Triplet
from .errors import AgreementUndefined, CorrelationUndefined, MetricsUndefined
from .metrics import (
    EmptyResponsePolicy,
    KindFilter,
    QuestionResult,
    hallu_i,
    hallu_q,
)

Pair = tuple[str, str]


@dataclass(frozen=True)
class PairFrequencyTable:
    """Canonical (subject, object) pairs ranked by descending frequency,
    ties broken lexicographically."""

    pairs: tuple[tuple[Pair, int], ...]
    source_model_id: str = ""
    ordered: bool = True

    def __post_init__(self):
        ranked = sorted(self.pairs, key=lambda entry: (-entry[1], entry[0]))
        object.__setattr__(self, "pairs", tuple((tuple(p), int(c)) for p, c in ranked))
        if any(count < 1 for _, count in self.pairs):
            raise ValueError("pair frequencies must be >= 1")

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def total_mass(self) -> int:
        return sum(count for _, count in self.pairs)

    def top_pairs(self, fraction: float) -> frozenset[Pair]:
        if not 0.0 < fraction <= 1.0:
            raise ValueError("fraction must be within (0, 1]")
        keep = math.ceil(fraction * len(self.pairs))
        return frozenset(pair for pair, _ in self.pairs[:keep])

    def to_json_dict(self) -> dict:
        return {
            "sourceModelId": self.source_model_id,
            "ordered": self.ordered,
            "pairs": [{"pair": list(p), "count": c} for p, c in self.pairs],
        }


def canonical_pair(t: Triplet, synonyms: SynonymTable, ordered: bool = True) -> Pair:
    subject = synonyms.canonical(t.subject)
    obj = synonyms.canonical(t.object)
    if not ordered and obj < subject:
        return (obj, subject)
    return (subject, obj)


def pair_frequency(
    kgs: Iterable[KnowledgeGraph],
    synonyms: SynonymTable | None = None,
    ordered: bool = True,
    source_model_id: str = "",
) -> PairFrequencyTable:
    """Count canonical endpoint pairs over extracted graphs; every triplet
    (duplicates included) contributes one unit of frequency mass."""
    syn = synonyms or SynonymTable.empty()
    counts: Counter[Pair] = Counter()
    for kg in kgs:
        for t in kg.triplets:
            counts[canonical_pair(t, syn, ordered)] += 1
    return PairFrequencyTable(
        pairs=tuple(counts.items()), source_model_id=source_model_id, ordered=ordered
    )


def top_fraction_relation_rate(
    results: Sequence[QuestionResult],
    table: PairFrequencyTable,
    fraction: float = 0.20,
    synonyms: SynonymTable | None = None,
) -> tuple[Fraction, Fraction]:
    """Relation-kind (hallu_i, hallu_q) recomputed after restricting both
    numerator and denominator to claims whose canonical pair ranks in the top
    ``fraction`` of the frequency table. Use the synonym table the frequency
    table was built with."""
    syn = synonyms or SynonymTable.empty()
    top = table.top_pairs(fraction)
    restricted = []
    for result in results:
        kept = tuple(
            v
            for v in result.verdicts
            if canonical_pair(v.claim, syn, table.ordered) in top
        )
        restricted.append(
            QuestionResult(
                question_id=result.question_id,
                image_id=result.image_id,
                verdicts=kept,
            )
        )
    if not any(r.verdicts for r in restricted):
        raise MetricsUndefined("no judged triplet falls in the top pair fraction")
    policy = EmptyResponsePolicy.EXCLUDE
    return (
        hallu_i(restricted, KindFilter.RELATION, policy),
        hallu_q(restricted, KindFilter.RELATION, policy),
    )


def truncate_response(text: str, k: int) -> str:
    """First ``k`` whitespace-delimited tokens rejoined with single spaces;
    texts with at most ``k`` tokens come back unchanged."""
    if k < 1:
        raise ValueError("k must be >= 1")
    tokens = text.split()
    if len(tokens) <= k:
        return text
    return " ".join(tokens[:k])


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    if len(xs) != len(ys):
        raise ValueError("input vectors must have equal lengths")
    if len(xs) < 2:
        raise ValueError("correlation needs at least two points")
    if len(set(xs)) == 1 or len(set(ys)) == 1:
        raise CorrelationUndefined("correlation is undefined for constant input")
    return float(stats.pearsonr(list(xs), list(ys)).statistic)


@dataclass(frozen=True)
class HumanScoreSet:
    """Five-point hallucination scores keyed by (annotator id, response id)."""

    scores: Mapping[tuple[str, str], int]

    def __post_init__(self):
        cleaned = {}
        for (annotator, response), score in self.scores.items():
            if not isinstance(score, int) or isinstance(score, bool) or not 1 <= score <= 5:
                raise ValueError(
                    f"score for ({annotator!r}, {response!r}) must be an integer in 1..5, got {score!r}"
                )
            cleaned[(str(annotator), str(response))] = score
        object.__setattr__(self, "scores", cleaned)

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[str, str, int]]) -> "HumanScoreSet":
        return cls({(a, r): s for a, r, s in rows})

    @property
    def annotators(self) -> tuple[str, ...]:
        return tuple(sorted({a for a, _ in self.scores}))

    @property
    def items(self) -> tuple[str, ...]:
        return tuple(sorted({r for _, r in self.scores}))

    def by_item(self) -> dict[str, list[int]]:
        grouped: dict[str, list[int]] = {}
        for (annotator, response), score in sorted(self.scores.items()):
            grouped.setdefault(response, []).append(score)
        return grouped

    def mean_by_item(self) -> dict[str, Fraction]:
        return {
            item: Fraction(sum(scores), len(scores)) for item, scores in self.by_item().items()
        }


def _ordinal_delta_sq(values: Sequence[int], marginals: Mapping[int, Fraction]) -> dict[tuple[int, int], Fraction]:
    deltas = {}
    for i, c in enumerate(values):
        for k in values[i + 1 :]:
            between = sum((marginals[g] for g in values if c <= g <= k), Fraction(0))
            delta = between - Fraction(marginals[c] + marginals[k], 2)
            deltas[(c, k)] = delta * delta
            deltas[(k, c)] = deltas[(c, k)]
    return deltas


def krippendorff_alpha(score_set: HumanScoreSet, level: str = "ordinal") -> float:
    """Krippendorff's alpha via the coincidence-matrix formulation.

    Handles missing ratings (units rated by a single annotator drop out).
    ``level`` selects the difference metric: "ordinal" (default for the
    five-point scale) or "interval". Exact fraction arithmetic throughout;
    perfect agreement returns 1.0 even when expected disagreement is zero.
    """
    if level not in ("ordinal", "interval"):
        raise ValueError(f"unsupported level {level!r}")
    units = [scores for scores in score_set.by_item().values() if len(scores) > 1]
    if len(score_set.annotators) < 2 or not units:
        raise AgreementUndefined("alpha needs >= 2 annotators with overlapping ratings")

    values = sorted({v for unit in units for v in unit})
    coincidence: dict[tuple[int, int], Fraction] = {}
    for unit in units:
        weight = Fraction(1, len(unit) - 1)
        for i, c in enumerate(unit):
            for j, k in enumerate(unit):
                if i != j:
                    coincidence[(c, k)] = coincidence.get((c, k), Fraction(0)) + weight
    marginals = {
        c: sum((coincidence.get((c, k), Fraction(0)) for k in values), Fraction(0))
        for c in values
    }
    n = sum(marginals.values())

    if level == "interval":
        delta_sq = {
            (c, k): Fraction((c - k) ** 2) for c in values for k in values if c != k
        }
    else:
        delta_sq = _ordinal_delta_sq(values, marginals)

    observed = sum(
        (coincidence.get((c, k), Fraction(0)) * delta_sq[(c, k)]
         for c in values for k in values if c != k),
        Fraction(0),
    )
    expected = sum(
        (marginals[c] * marginals[k] * delta_sq[(c, k)]
         for c in values for k in values if c != k),
        Fraction(0),
    )
    if expected == 0:
        return 1.0
    return float(1 - (n - 1) * observed / expected)
