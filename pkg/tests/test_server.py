import numpy as np
import pytest
from fastapi.testclient import TestClient

from protqa.adapter import AdapterConfig
from protqa.bundle import build_bundle
from protqa.encoder import EncoderConfig
from protqa.lm import LMConfig, LoRAConfig
from protqa.pdbio import format_pdb
from protqa.server import create_app
from structs import random_structure


@pytest.fixture(scope="module")
def bundle():
    enc = EncoderConfig(hidden_dim=8, encoder_layers=1, decoder_layers=1, neighbors=6,
                        rbf_count=4, ensemble_size=2, seed=0)
    ada = AdapterConfig(input_width=16, output_width=32, question_width=32, query_count=4, heads=2)
    lm = LMConfig(layers=2, d_model=32, heads=4, kv_heads=2, max_context=256)
    return build_bundle(enc, ada, lm, LoRAConfig(dropout=0.0), seed=0)


@pytest.fixture(scope="module")
def pdb_text():
    return format_pdb(random_structure(np.random.default_rng(1), 12))


@pytest.fixture(scope="module")
def client(bundle, tmp_path_factory, pdb_text):
    fixtures = tmp_path_factory.mktemp("fixtures")
    (fixtures / "toy.pdb").write_text(pdb_text)
    app = create_app(bundle, fixtures_dir=fixtures)
    return TestClient(app)


class TestHealthAndConfig:
    def test_health(self, client):
        r = client.get("/api/health")
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "ok"
        assert body["model_version"].startswith("protqa/")
        assert len(body["config_hash"]) == 16

    def test_config_carries_same_hash(self, client):
        health = client.get("/api/health").json()
        config = client.get("/api/config").json()
        assert config["config_hash"] == health["config_hash"]
        assert config["config"]["lm"]["d_model"] == 32
        assert config["limits"]["max_pdb_bytes"] == 2 * 1024 * 1024


class TestChat:
    def test_inline_pdb_roundtrip(self, client, pdb_text):
        r = client.post("/api/chat", json={
            "pdb": pdb_text,
            "question": "How many residues does this protein have?",
            "max_new": 8,
        })
        assert r.status_code == 200, r.text
        body = r.json()
        assert body["n_residues"] == 12
        assert set(body["timing"]) == {"parse_ms", "encode_ms", "adapter_ms", "generate_ms"}
        assert all(v >= 0 for v in body["timing"].values())

    def test_fixture_name_resolution(self, client):
        r = client.post("/api/chat", json={"pdb": "toy.pdb", "question": "Q?", "max_new": 4})
        assert r.status_code == 200
        assert r.json()["n_residues"] == 12

    def test_unknown_fixture_422(self, client):
        r = client.post("/api/chat", json={"pdb": "nope.pdb", "question": "Q?"})
        assert r.status_code == 422

    def test_empty_question_400(self, client, pdb_text):
        r = client.post("/api/chat", json={"pdb": pdb_text, "question": "  "})
        assert r.status_code == 400

    def test_malformed_pdb_422(self, client):
        r = client.post("/api/chat", json={
            "pdb": "ATOM      1  CA  ALA A   1      bad coords here\n",
            "question": "Q?",
        })
        assert r.status_code == 422
        assert "line" in r.json()["detail"]

    def test_oversize_pdb_413(self, client):
        r = client.post("/api/chat", json={"pdb": "X" * (2 * 1024 * 1024 + 10), "question": "Q?"})
        assert r.status_code == 413

    def test_context_overflow_413(self, client, pdb_text):
        r = client.post("/api/chat", json={
            "pdb": pdb_text,
            "question": "x" * 400,
            "max_new": 8,
        })
        assert r.status_code == 413

    def test_greedy_determinism(self, client, pdb_text):
        req = {"pdb": pdb_text, "question": "Does residue 1 contact residue 5?", "max_new": 12}
        a = client.post("/api/chat", json=req).json()["answer"]
        b = client.post("/api/chat", json=req).json()["answer"]
        assert a == b

    def test_weights_not_mutated_by_requests(self, client, bundle, pdb_text):
        before = {k: t.data.tobytes() for k, t in bundle.named_params().items()}
        client.post("/api/chat", json={"pdb": pdb_text, "question": "Q?", "max_new": 4})
        after = {k: t.data.tobytes() for k, t in bundle.named_params().items()}
        assert before == after

    def test_concurrent_matches_serial(self, client, pdb_text):
        from concurrent.futures import ThreadPoolExecutor

        req = {"pdb": pdb_text, "question": "Is residue 3 helical?", "max_new": 10}
        serial = client.post("/api/chat", json=req).json()["answer"]
        with ThreadPoolExecutor(max_workers=4) as pool:
            answers = list(pool.map(
                lambda _: client.post("/api/chat", json=req).json()["answer"], range(4)))
        assert all(a == serial for a in answers)
