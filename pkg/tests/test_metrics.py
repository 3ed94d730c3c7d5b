import random
from fractions import Fraction

import pytest

from kghalu.core import HallucinationKind, JudgeVerdict, Triplet, VerdictStatus
from kghalu.errors import InvariantError, MetricsUndefined
from kghalu.metrics import (
    EmptyResponsePolicy,
    KindFilter,
    QuestionResult,
    build_report,
    hallu_i,
    hallu_q,
    question_rate,
)

CLAIM = Triplet("a", "b", "c")


def verdict(status, kind=None, side=None):
    return JudgeVerdict(status, CLAIM, "rule", kind, side)


def supported():
    return verdict(VerdictStatus.SUPPORTED)


def object_h():
    return verdict(VerdictStatus.HALLUCINATED, HallucinationKind.OBJECT, "subject")


def relation_h():
    return verdict(VerdictStatus.HALLUCINATED, HallucinationKind.RELATION)


def unknown_h():
    return verdict(VerdictStatus.HALLUCINATED, HallucinationKind.UNKNOWN)


def prediction_error():
    return verdict(VerdictStatus.PREDICTION_ERROR)


def unjudgeable():
    return verdict(VerdictStatus.UNJUDGEABLE)


def result(qid, image, verdicts, empty=False):
    return QuestionResult(qid, image, tuple(verdicts), empty_response=empty)


class TestQuestionRate:
    def test_basic_fraction(self):
        r = result("q", "i", [object_h(), supported(), supported(), supported()])
        assert question_rate(r) == Fraction(1, 4)

    def test_kind_filter(self):
        r = result("q", "i", [object_h(), relation_h(), supported()])
        assert question_rate(r, KindFilter.OBJECT) == Fraction(1, 3)
        assert question_rate(r, KindFilter.RELATION) == Fraction(1, 3)
        assert question_rate(r, KindFilter.OVERALL) == Fraction(2, 3)

    def test_prediction_errors_not_hallucinations(self):
        r = result("q", "i", [prediction_error(), prediction_error()])
        assert question_rate(r) == 0

    def test_unjudgeable_excluded_from_both_sides(self):
        r = result("q", "i", [object_h(), unjudgeable(), supported()])
        assert question_rate(r) == Fraction(1, 2)

    def test_all_unjudgeable_undefined(self):
        with pytest.raises(MetricsUndefined):
            question_rate(result("q", "i", [unjudgeable()]))

    def test_empty_response_flag_invariant(self):
        with pytest.raises(InvariantError):
            QuestionResult("q", "i", (supported(),), empty_response=True)


class TestHalluQ:
    def test_mean_of_rates(self):
        results = [
            result("q1", "i", [object_h(), supported()]),  # 0.5
            result("q2", "i", [object_h(), supported(), supported(), supported()]),  # 0.25
        ]
        assert hallu_q(results) == Fraction(75, 2)  # 37.5

    def test_all_supported_zero(self):
        assert hallu_q([result("q", "i", [supported(), supported()])]) == 0

    def test_single_question_all_hallucinated(self):
        assert hallu_q([result("q", "i", [object_h(), relation_h()])]) == 100

    def test_exclude_policy(self):
        results = [
            result("q1", "i", [object_h(), supported()]),
            result("q2", "i", [], empty=True),
        ]
        assert hallu_q(results, policy=EmptyResponsePolicy.EXCLUDE) == 50

    def test_count_as_zero_policy(self):
        results = [
            result("q1", "i", [object_h(), supported()]),
            result("q2", "i", [], empty=True),
        ]
        assert hallu_q(results, policy=EmptyResponsePolicy.COUNT_AS_ZERO) == 25

    def test_everything_excluded_undefined(self):
        with pytest.raises(MetricsUndefined):
            hallu_q([result("q", "i", [], empty=True)])

    def test_permutation_invariance(self):
        results = [
            result("q1", "a", [object_h()]),
            result("q2", "b", [supported(), relation_h()]),
            result("q3", "a", [supported()]),
        ]
        assert hallu_q(results) == hallu_q(list(reversed(results)))


class TestHalluI:
    def test_nested_mean(self):
        results = [
            result("qa1", "A", [object_h(), supported(), supported(), supported(), supported()]),  # 0.2
            result("qa2", "A", [object_h(), object_h(), supported(), supported(), supported()]),  # 0.4
            result("qb1", "B", [object_h(), object_h(), object_h(), supported(), supported()]),  # 0.6
        ]
        assert hallu_i(results) == 45  # mean(0.3, 0.6) * 100

    def test_single_image_collapses_to_hallu_q(self):
        results = [
            result("q1", "A", [object_h(), supported()]),
            result("q2", "A", [supported(), supported()]),
        ]
        assert hallu_i(results) == hallu_q(results)

    def test_equal_question_counts_collapse(self):
        results = [
            result("q1", "A", [object_h(), supported()]),
            result("q2", "A", [supported()]),
            result("q3", "B", [object_h()]),
            result("q4", "B", [supported(), supported(), supported()]),
        ]
        assert hallu_i(results) == hallu_q(results)

    def test_unequal_question_counts_diverge(self):
        # image A has two questions at 0 and 1; image B one question at 1.
        results = [
            result("q1", "A", [supported()]),
            result("q2", "A", [object_h()]),
            result("q3", "B", [object_h()]),
        ]
        assert hallu_q(results) == Fraction(200, 3)
        assert hallu_i(results) == 75
        assert hallu_q(results) != hallu_i(results)

    def test_image_with_all_excluded_questions_drops(self):
        results = [
            result("q1", "A", [object_h()]),
            result("q2", "B", [], empty=True),
        ]
        assert hallu_i(results) == 100


class TestBuildReport:
    def test_uniform_injection_collapses_means(self):
        # 30% hallucination at every question
        results = []
        for image in ("A", "B", "C"):
            for q in range(2):
                verdicts = [object_h()] * 3 + [supported()] * 7
                results.append(result(f"{image}-q{q}", image, verdicts))
        report = build_report(results)
        assert report.hallu_q == 30
        assert report.hallu_i == 30

    def test_partition_identity_exact(self):
        rng = random.Random(5)
        results = []
        for q in range(20):
            verdicts = []
            for _ in range(rng.randint(1, 6)):
                verdicts.append(
                    rng.choice(
                        [supported(), object_h(), relation_h(), unknown_h(), prediction_error()]
                    )
                )
            results.append(result(f"q{q}", f"i{q % 4}", verdicts))
        report = build_report(results)
        obj_q, obj_i = report.per_kind[KindFilter.OBJECT.value]
        rel_q, rel_i = report.per_kind[KindFilter.RELATION.value]
        unk_q, unk_i = report.per_kind[KindFilter.KIND_UNKNOWN.value]
        assert obj_q + rel_q + unk_q == report.hallu_q
        assert obj_i + rel_i + unk_i == report.hallu_i

    def test_fully_kinded_object_plus_relation_is_overall(self):
        results = [
            result("q1", "A", [object_h(), relation_h(), supported()]),
            result("q2", "B", [relation_h(), supported()]),
        ]
        report = build_report(results)
        obj_q, obj_i = report.per_kind[KindFilter.OBJECT.value]
        rel_q, rel_i = report.per_kind[KindFilter.RELATION.value]
        assert obj_q + rel_q == report.hallu_q
        assert obj_i + rel_i == report.hallu_i

    def test_serialization_deterministic(self):
        results = [result("q1", "A", [object_h(), supported()])]
        import json

        a = json.dumps(build_report(results).to_json_dict(), sort_keys=True)
        b = json.dumps(build_report(results).to_json_dict(), sort_keys=True)
        assert a == b

    def test_counters(self):
        results = [
            result("q1", "A", [object_h(), unjudgeable()]),
            result("q2", "A", [], empty=True),
        ]
        report = build_report(results)
        assert report.excluded_question_count == 1
        assert report.unjudgeable_count == 1
        assert report.question_count == 2
        assert report.image_count == 1

    def test_monotonicity_flipping_supported_never_decreases(self):
        rng = random.Random(11)
        base = []
        for q in range(12):
            verdicts = [
                rng.choice([supported(), object_h(), relation_h(), prediction_error()])
                for _ in range(rng.randint(1, 5))
            ]
            base.append(result(f"q{q}", f"i{q % 3}", verdicts))
        before_q, before_i = hallu_q(base), hallu_i(base)
        flipped = []
        flipped_one = False
        for r in base:
            verdicts = list(r.verdicts)
            if not flipped_one:
                for pos, v in enumerate(verdicts):
                    if v.status is VerdictStatus.SUPPORTED:
                        verdicts[pos] = object_h()
                        flipped_one = True
                        break
            flipped.append(result(r.question_id, r.image_id, verdicts))
        assert flipped_one
        assert hallu_q(flipped) >= before_q
        assert hallu_i(flipped) >= before_i


def brute_force_eq1(question_fractions):
    """Direct float transcription: mean over questions of (#HT / #TT) * 100."""
    terms = [ht / tt for ht, tt in question_fractions]
    return 100.0 * sum(terms) / len(terms)


def brute_force_eq2(image_to_fractions):
    """Direct float transcription of the nested per-image mean."""
    image_terms = []
    for fractions in image_to_fractions.values():
        terms = [ht / tt for ht, tt in fractions]
        image_terms.append(sum(terms) / len(terms))
    return 100.0 * sum(image_terms) / len(image_terms)


class TestBruteForceOracle:
    def test_random_fixtures_agree_with_formula(self):
        rng = random.Random(99)
        for _ in range(60):
            results = []
            per_question = []
            per_image: dict[str, list] = {}
            for image in range(rng.randint(1, 6)):
                image_id = f"i{image}"
                for q in range(rng.randint(1, 4)):
                    total = rng.randint(1, 6)
                    halu = rng.randint(0, total)
                    verdicts = [object_h()] * halu + [supported()] * (total - halu)
                    results.append(result(f"{image_id}-q{q}", image_id, verdicts))
                    per_question.append((halu, total))
                    per_image.setdefault(image_id, []).append((halu, total))
            assert abs(float(hallu_q(results)) - brute_force_eq1(per_question)) < 1e-9
            assert abs(float(hallu_i(results)) - brute_force_eq2(per_image)) < 1e-9
