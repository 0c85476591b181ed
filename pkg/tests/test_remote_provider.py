"""Wire-format and retry behavior of the remote embedding client, against a
real in-process HTTP server."""
import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from bitextqc.errors import ConfigError, ProviderError
from bitextqc.similarity import RemoteProvider


class _EmbedHandler(BaseHTTPRequestHandler):
    fail_remaining = 0
    dim = 4
    requests_seen: list[dict] = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).requests_seen.append(body)
        if type(self).fail_remaining > 0:
            type(self).fail_remaining -= 1
            self.send_response(503)
            self.end_headers()
            return
        vectors = [
            [float(len(text) + i) for i in range(type(self).dim)] for text in body["texts"]
        ]
        payload = json.dumps({"embeddings": vectors}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def embed_server():
    server = HTTPServer(("127.0.0.1", 0), _EmbedHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _EmbedHandler.fail_remaining = 0
    _EmbedHandler.requests_seen = []
    yield f"http://127.0.0.1:{server.server_port}/embed"
    server.shutdown()


def test_round_trip_and_exact_field_names(embed_server):
    provider = RemoteProvider(url=embed_server, dim=4, batch_limit=8)
    out = provider.embed_batch(["ab", "xyz"])
    assert len(out) == 2
    assert np.array_equal(out[0].values, np.array([2.0, 3.0, 4.0, 5.0]))
    request = _EmbedHandler.requests_seen[0]
    assert set(request.keys()) == {"texts"}
    assert request["texts"] == ["ab", "xyz"]


def test_retry_then_success(embed_server):
    _EmbedHandler.fail_remaining = 2
    provider = RemoteProvider(url=embed_server, dim=4, retries=3, backoff_seconds=0.01)
    out = provider.embed_batch(["abcd"])
    assert len(out) == 1
    assert len(_EmbedHandler.requests_seen) == 3


def test_exhausted_retries_raise_provider_error(embed_server):
    _EmbedHandler.fail_remaining = 99
    provider = RemoteProvider(url=embed_server, dim=4, retries=2, backoff_seconds=0.01)
    with pytest.raises(ProviderError, match="unreachable after 2 retries"):
        provider.embed_batch(["abcd"])


def test_dimension_mismatch_is_fatal_config_error(embed_server):
    provider = RemoteProvider(url=embed_server, dim=7, retries=0)
    with pytest.raises(ConfigError, match="dimension mismatch"):
        provider.embed_batch(["abcd"])


def test_unreachable_endpoint(monkeypatch):
    provider = RemoteProvider(url="http://127.0.0.1:9/embed", dim=4, retries=1, backoff_seconds=0.01)
    with pytest.raises(ProviderError):
        provider.embed_batch(["abcd"])


def test_empty_batch_never_hits_network():
    provider = RemoteProvider(url="http://127.0.0.1:9/embed", dim=4)
    assert provider.embed_batch([]) == []
