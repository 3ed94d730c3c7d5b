"""Smoke test: the toolkit's entailment judge against a live sidecar.

Ten hand-built cases (five verbatim-supported claims, five clearly-unsupported
ones) must agree with the offline rule oracle on at least 9 of 10.
"""

import socket
import threading
import time

import pytest

kghalu = pytest.importorskip("kghalu")

import uvicorn

from kghalu.core import SceneGraph, Triplet, VerdictStatus, classify_against_scene_graph
from kghalu.judge import nli_judge
from kghalu.providers import SidecarEmbeddingProvider, SidecarEntailmentProvider
from kghalu_sidecar import SidecarConfig, create_app


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="module")
def sidecar_url():
    port = free_port()
    config = SidecarConfig(bind_address=f"127.0.0.1:{port}", backend="lexical")
    server = uvicorn.Server(
        uvicorn.Config(create_app(config), host="127.0.0.1", port=port, log_level="error")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{port}"
    import httpx

    deadline = time.time() + 15
    while time.time() < deadline:
        try:
            if httpx.get(f"{url}/health", timeout=1.0).status_code == 200:
                break
        except httpx.HTTPError:
            pass
        time.sleep(0.1)
    else:
        pytest.fail("sidecar did not become healthy in time")
    yield url
    server.should_exit = True
    thread.join(timeout=5)


GRAPH = SceneGraph(
    objects=(
        "people", "area", "platform", "train", "sign", "bench", "clock", "luggage",
    ),
    triplets=(
        Triplet("people", "waiting in", "area"),
        Triplet("train", "stopped at", "platform"),
        Triplet("sign", "hanging above", "platform"),
        Triplet("people", "sitting on", "bench"),
        Triplet("clock", "mounted on", "sign"),
        Triplet("luggage", "next to", "bench"),
    ),
)

SUPPORTED_CLAIMS = [
    Triplet("people", "waiting in", "area"),
    Triplet("train", "stopped at", "platform"),
    Triplet("sign", "hanging above", "platform"),
    Triplet("people", "sitting on", "bench"),
    Triplet("clock", "mounted on", "sign"),
]

# vocabulary fully disjoint from the scene graph
UNSUPPORTED_CLAIMS = [
    Triplet("dragon", "breathing fire over", "castle"),
    Triplet("submarine", "diving under", "iceberg"),
    Triplet("wizard", "casting spell on", "cauldron"),
    Triplet("comet", "streaking across", "nebula"),
    Triplet("violin", "propped against", "harpsichord"),
]


def test_live_sidecar_agreement_with_rule_oracle(sidecar_url):
    embeddings = SidecarEmbeddingProvider(sidecar_url)
    entailment = SidecarEntailmentProvider(sidecar_url)
    agreements = 0
    for claim in SUPPORTED_CLAIMS + UNSUPPORTED_CLAIMS:
        rule = classify_against_scene_graph(claim, GRAPH)
        judged = nli_judge(claim, GRAPH, embeddings, entailment)
        assert judged.status is not VerdictStatus.UNJUDGEABLE
        rule_hallucinated = rule.status is not VerdictStatus.SUPPORTED
        nli_hallucinated = judged.status is VerdictStatus.HALLUCINATED
        if rule_hallucinated == nli_hallucinated:
            agreements += 1
    assert agreements >= 9, f"only {agreements}/10 verdicts agree with the rule oracle"


def test_live_sidecar_embed_contract(sidecar_url):
    provider = SidecarEmbeddingProvider(sidecar_url)
    response = provider.embed(['("people", "waiting in", "area")'] * 2)
    assert response.vectors[0] == response.vectors[1]
    assert response.dim > 0


def test_live_sidecar_entail_contract(sidecar_url):
    provider = SidecarEntailmentProvider(sidecar_url)
    score = provider.entail("the people wait", "the people wait")
    assert 0.0 <= score <= 1.0
    assert score >= 0.9
