import math

import pytest
from fastapi.testclient import TestClient

from kghalu_sidecar import SidecarConfig, create_app


@pytest.fixture(scope="module")
def client():
    config = SidecarConfig(backend="lexical", max_batch_size=8)
    with TestClient(create_app(config)) as client:
        response = client.get("/health")
        assert response.status_code == 200
        yield client


def cosine(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    return dot / math.sqrt(sum(x * x for x in a) * sum(y * y for y in b))


class TestHealth:
    def test_before_startup_503(self):
        # no lifespan entered: loading never kicked off
        client = TestClient(create_app(SidecarConfig(backend="lexical")))
        assert client.get("/health").status_code == 503
        assert client.post("/embed", json={"texts": ["x"]}).status_code == 503

    def test_after_load_lists_both_models(self, client):
        payload = client.get("/health").json()
        assert payload["status"] == "ok"
        assert len(payload["models"]) == 2
        assert payload["backend"] == "lexical"


class TestEmbed:
    def test_identical_texts_identical_vectors(self, client):
        payload = client.post("/embed", json={"texts": ["a cat", "a cat"]}).json()
        assert payload["vectors"][0] == payload["vectors"][1]

    def test_dim_matches_declared(self, client):
        payload = client.post("/embed", json={"texts": ["one sentence"]}).json()
        assert payload["dim"] == len(payload["vectors"][0]) > 0

    def test_self_cosine_is_one(self, client):
        payload = client.post(
            "/embed", json={"texts": ["the dog chases the ball", "the dog chases the ball"]}
        ).json()
        value = cosine(payload["vectors"][0], payload["vectors"][1])
        assert abs(value - 1.0) <= 1e-6

    def test_order_preserving(self, client):
        one = client.post("/embed", json={"texts": ["aa", "bb"]}).json()["vectors"]
        two = client.post("/embed", json={"texts": ["bb", "aa"]}).json()["vectors"]
        assert one[0] == two[1] and one[1] == two[0]

    def test_empty_list_400(self, client):
        assert client.post("/embed", json={"texts": []}).status_code == 400

    def test_oversize_batch_400(self, client):
        assert (
            client.post("/embed", json={"texts": ["x"] * 9}).status_code == 400
        )

    def test_missing_field_400(self, client):
        assert client.post("/embed", json={}).status_code == 400

    def test_schema_shape(self, client):
        payload = client.post("/embed", json={"texts": ["x"]}).json()
        assert set(payload) == {"vectors", "dim"}
        assert isinstance(payload["dim"], int)
        assert all(isinstance(x, float) for x in payload["vectors"][0])


class TestNli:
    def test_self_entailment_high(self, client):
        sentence = "the cat sits on the mat"
        payload = client.post(
            "/nli", json={"premise": sentence, "hypothesis": sentence}
        ).json()
        assert payload["entailment"] >= 0.9

    def test_unrelated_low(self, client):
        payload = client.post(
            "/nli", json={"premise": "the cat sits", "hypothesis": "the moon is cheese"}
        ).json()
        assert payload["entailment"] < 0.5

    def test_golden_values_stable(self, client):
        # frozen goldens for the lexical backend: coverage of hypothesis tokens
        cases = [
            ("the red car", "the red car", 1.0),
            ("the red car drives", "a red car", 2 / 3),
            ("alpha beta", "gamma delta", 0.0),
        ]
        for premise, hypothesis, expected in cases:
            payload = client.post(
                "/nli", json={"premise": premise, "hypothesis": hypothesis}
            ).json()
            assert payload["entailment"] == pytest.approx(expected, abs=1e-12)

    def test_deterministic_across_repeated_calls(self, client):
        body = {"premise": "a b c", "hypothesis": "b c d"}
        first = client.post("/nli", json=body)
        second = client.post("/nli", json=body)
        assert first.content == second.content

    def test_missing_premise_400(self, client):
        assert client.post("/nli", json={"hypothesis": "x"}).status_code == 400

    def test_empty_fields_400(self, client):
        assert (
            client.post("/nli", json={"premise": "", "hypothesis": "x"}).status_code == 400
        )

    def test_score_in_unit_interval(self, client):
        payload = client.post(
            "/nli", json={"premise": "a b", "hypothesis": "a c"}
        ).json()
        assert 0.0 <= payload["entailment"] <= 1.0


class TestConfig:
    def test_batch_size_validated(self):
        with pytest.raises(ValueError):
            SidecarConfig(max_batch_size=0)

    def test_backend_validated(self):
        with pytest.raises(ValueError):
            SidecarConfig(backend="quantum")

    def test_bind_address_parsing(self):
        config = SidecarConfig(bind_address="0.0.0.0:9000")
        assert config.host == "0.0.0.0"
        assert config.port == 9000
