"""Route-level protocol tests against a fake engine.

These pin the wire contract: response shapes, the {"error": str} envelope,
503 before the model is ready, 400 on malformed or over-budget requests,
and 500 on inference failure.
"""

import threading
import time

import pytest
from fastapi.testclient import TestClient

from embed_server.cli import build_parser
from embed_server.engine import KNOWN_MODELS, OverBudgetError, load_engine
from embed_server.server import create_app


class FakeEngine:
    """Counts two specials plus whitespace words; embeds deterministically."""

    def __init__(self, model_name="fake-model", max_tokens=16, dimension=4):
        self.model_name = model_name
        self.max_tokens = max_tokens
        self.dimension = dimension

    def count(self, texts):
        return [2 + len(t.split()) for t in texts]

    def embed(self, texts):
        for i, n in enumerate(self.count(texts)):
            if n > self.max_tokens:
                raise OverBudgetError(
                    f"text at index {i} is {n} tokens, over the "
                    f"{self.max_tokens}-token limit of {self.model_name}")
        out = []
        for t in texts:
            head = [float(len(t)), float(sum(map(ord, t)) % 97)]
            out.append((head + [0.0] * self.dimension)[:self.dimension])
        return out


@pytest.fixture()
def client():
    app = create_app(engine=FakeEngine())
    with TestClient(app) as c:
        yield c


class TestInfo:
    def test_reports_engine_metadata(self, client):
        resp = client.get("/info")
        assert resp.status_code == 200
        assert resp.json() == {"model": "fake-model", "max_tokens": 16,
                               "dimension": 4}

    @pytest.mark.parametrize("name", sorted(KNOWN_MODELS))
    def test_known_model_numbers(self, name):
        max_tokens, dimension = KNOWN_MODELS[name]
        app = create_app(engine=FakeEngine(name, max_tokens, dimension))
        with TestClient(app) as c:
            payload = c.get("/info").json()
        assert payload == {"model": name, "max_tokens": max_tokens,
                           "dimension": dimension}

    def test_published_budgets(self):
        assert KNOWN_MODELS["bert-base-uncased"] == (512, 768)
        assert KNOWN_MODELS["longformer-base-4096"] == (4096, 768)


class TestNotReady:
    def test_503_without_engine(self):
        app = create_app()
        with TestClient(app) as c:
            for call in (lambda: c.get("/info"),
                         lambda: c.post("/count_tokens", json={"texts": ["x"]}),
                         lambda: c.post("/embed", json={"texts": ["x"]})):
                resp = call()
                assert resp.status_code == 503
                assert "loading" in resp.json()["error"]

    def test_503_until_loader_finishes(self):
        gate = threading.Event()

        def loader():
            gate.wait(timeout=5.0)
            return FakeEngine()

        app = create_app(loader=loader)
        with TestClient(app) as c:
            assert c.get("/info").status_code == 503
            gate.set()
            deadline = time.monotonic() + 5.0
            while time.monotonic() < deadline:
                if c.get("/info").status_code == 200:
                    break
                time.sleep(0.01)
            else:
                pytest.fail("engine never became ready")

    def test_loader_failure_keeps_503_with_reason(self):
        def loader():
            raise ValueError("checkpoint corrupt")

        app = create_app(loader=loader)
        with TestClient(app) as c:
            deadline = time.monotonic() + 5.0
            while time.monotonic() < deadline:
                msg = c.get("/info").json()["error"]
                if "failed to load" in msg:
                    break
                time.sleep(0.01)
            else:
                pytest.fail("load failure never surfaced")
            resp = c.get("/info")
            assert resp.status_code == 503
            assert "checkpoint corrupt" in resp.json()["error"]


class TestBadRequests:
    @pytest.mark.parametrize("body", [
        {},                       # missing key
        {"texts": "not a list"},  # wrong type
        {"texts": [1, 2]},        # non-string items
        {"texts": None},
    ])
    @pytest.mark.parametrize("route", ["/count_tokens", "/embed"])
    def test_malformed_body_is_400(self, client, route, body):
        resp = client.post(route, json=body)
        assert resp.status_code == 400
        msg = resp.json()["error"]
        assert "texts" in msg
        # no server internals on the wire
        assert "File \"" not in msg

    def test_unparseable_json_is_400(self, client):
        resp = client.post("/count_tokens", content=b"{nope",
                           headers={"Content-Type": "application/json"})
        assert resp.status_code == 400
        assert "error" in resp.json()

    def test_over_budget_embed_is_400(self, client):
        long = " ".join(["w"] * 20)  # 22 tokens against a budget of 16
        resp = client.post("/embed", json={"texts": ["ok", long]})
        assert resp.status_code == 400
        msg = resp.json()["error"]
        assert "index 1" in msg and "16-token limit" in msg

    def test_counting_never_rejects_long_text(self, client):
        long = " ".join(["w"] * 500)
        resp = client.post("/count_tokens", json={"texts": [long]})
        assert resp.status_code == 200
        assert resp.json()["counts"] == [502]


class TestRoundTrips:
    def test_counts_match_engine_rule(self, client):
        texts = ["", "one", "one two", "a  b   c"]
        resp = client.post("/count_tokens", json={"texts": texts})
        assert resp.json()["counts"] == [2, 3, 4, 5]

    def test_embeddings_order_aligned(self, client):
        resp = client.post("/embed", json={"texts": ["a", "bbbb", "a"]})
        rows = resp.json()["embeddings"]
        assert len(rows) == 3
        assert rows[0] == rows[2] != rows[1]
        assert all(len(r) == 4 for r in rows)

    def test_empty_list_round_trips(self, client):
        assert client.post("/count_tokens", json={"texts": []}).json() == {"counts": []}
        assert client.post("/embed", json={"texts": []}).json() == {"embeddings": []}


class TestFailures:
    def test_inference_failure_is_500(self):
        class BrokenEngine(FakeEngine):
            def embed(self, texts):
                raise RuntimeError("matmul exploded")

        app = create_app(engine=BrokenEngine())
        with TestClient(app, raise_server_exceptions=False) as c:
            resp = c.post("/embed", json={"texts": ["x"]})
        assert resp.status_code == 500
        assert "matmul exploded" in resp.json()["error"]

    def test_load_engine_rejects_mismatched_checkpoint(self, monkeypatch):
        import transformers

        class StubTokenizer:
            model_max_length = 128

        class StubModel:
            class config:
                hidden_size = 32
                max_position_embeddings = 128

            def eval(self):
                return self

        monkeypatch.setattr(transformers.AutoTokenizer, "from_pretrained",
                            classmethod(lambda cls, name: StubTokenizer()))
        monkeypatch.setattr(transformers.AutoModel, "from_pretrained",
                            classmethod(lambda cls, name: StubModel()))
        with pytest.raises(RuntimeError, match="does not match"):
            load_engine("bert-base-uncased")
        # unknown names carry their own limits instead
        eng = load_engine("some-local-dir")
        assert (eng.max_tokens, eng.dimension) == (128, 32)


class TestCli:
    def test_defaults(self):
        args = build_parser().parse_args([])
        assert args.model == "bert-base-uncased"
        assert args.repr_mode == "token-mean"
        assert args.port == 8901
        assert args.batch_size == 8

    def test_all_flags(self):
        args = build_parser().parse_args([
            "--model", "longformer-base-4096", "--repr", "classifier-token",
            "--port", "9000", "--batch-size", "4"])
        assert args.model == "longformer-base-4096"
        assert args.repr_mode == "classifier-token"
        assert args.port == 9000
        assert args.batch_size == 4

    @pytest.mark.parametrize("argv", [
        ["--model", "gpt2"],
        ["--repr", "max-pool"],
        ["--port", "not-a-port"],
    ])
    def test_bad_values_exit(self, argv, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args(argv)
        capsys.readouterr()
