import pytest

from kghalu.core import SceneGraph, SynonymTable, Triplet
from kghalu.dataset import Benchmark, BenchmarkItem, QAItem


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\n[ACCEPTANCE] {name}: {outcome}", flush=True)


@pytest.fixture
def station_graph():
    # Small waiting-area scene: "walking around" is deliberately absent from
    # the relation vocabulary and "popular spot for socializing" from objects.
    triplets = (
        Triplet("people", "waiting in", "area"),
        Triplet("people", "standing on", "platform"),
        Triplet("train", "stopped at", "platform"),
        Triplet("sign", "hanging above", "platform"),
        Triplet("area", "next to", "platform"),
        Triplet("train", "carrying", "people"),
    )
    objects = ("people", "area", "platform", "train", "sign", "location")
    return SceneGraph(objects=objects, triplets=triplets)


@pytest.fixture
def tiny_benchmark(station_graph):
    questions = (
        QAItem(
            question_id="q-1",
            question="Why are the people here?",
            answer="They are waiting for a train.",
            reasoning_triplets=(Triplet("people", "waiting in", "area"),),
        ),
        QAItem(
            question_id="q-2",
            question="Where is the train?",
            answer="At the platform.",
            reasoning_triplets=(Triplet("train", "stopped at", "platform"),),
        ),
    )
    item = BenchmarkItem(
        image_id="img-0",
        image_path="images/img-0.jpg",
        scene_graph=station_graph,
        questions=questions,
    )
    return Benchmark(name="tiny", version="1.0", items=(item,))


@pytest.fixture
def synonyms():
    return SynonymTable({"woman": "person", "man": "person", "people": "person"})
