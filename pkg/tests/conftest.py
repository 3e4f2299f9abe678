"""Shared fixtures: an instrumented mock chat-completions server and corpora."""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from lexforge.synth import ProviderConfig


class MockChatServer:
    """Scriptable stand-in for a chat-completions endpoint.

    Instrumented for the client contract tests: records every request
    payload, arrival timestamps, and the high-water mark of concurrent
    in-flight requests. `status_script` forces status codes for the next
    requests; `status_for` decides per payload; `responder` maps a payload
    to the assistant message content.
    """

    def __init__(self):
        self.responder = lambda payload: "ok"
        self.status_script: list[int] = []
        self.status_for = None
        self.raw_body: bytes | None = None
        self.delay = 0.0
        self.requests: list[dict] = []
        self.request_headers: list[dict] = []
        self.request_times: list[float] = []
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()
        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), self._handler_class())
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    def start(self) -> "MockChatServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self._httpd.server_port}/v1"

    def _handler_class(self):
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # keep test output quiet
                pass

            def do_POST(self):
                with server._lock:
                    server.in_flight += 1
                    server.max_in_flight = max(server.max_in_flight, server.in_flight)
                    server.request_times.append(time.monotonic())
                try:
                    length = int(self.headers.get("Content-Length", 0))
                    payload = json.loads(self.rfile.read(length)) if length else {}
                    with server._lock:
                        server.requests.append(payload)
                        server.request_headers.append(dict(self.headers))
                        if server.status_script:
                            status = server.status_script.pop(0)
                        elif server.status_for is not None:
                            status = server.status_for(payload)
                        else:
                            status = 200
                    if server.delay:
                        time.sleep(server.delay)
                    if status != 200:
                        self._send(status, b'{"error": "scripted failure"}')
                        return
                    if server.raw_body is not None:
                        self._send(200, server.raw_body)
                        return
                    content = server.responder(payload)
                    body = json.dumps(
                        {"choices": [{"message": {"role": "assistant", "content": content}}]},
                        ensure_ascii=False,
                    ).encode("utf-8")
                    self._send(200, body)
                finally:
                    with server._lock:
                        server.in_flight -= 1

            def _send(self, status: int, body: bytes) -> None:
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        return Handler


@pytest.fixture
def mock_server():
    server = MockChatServer().start()
    yield server
    server.stop()


# Three-law desk corpus: A has a preamble and two articles, B has three
# articles behind a blank line, C has no article headers at all.
FIXTURE_LAWS = {
    "lawA.txt": (
        "قانون رقم (1) لسنة 2020\n"
        "ديباجة تمهيدية للقانون.\n"
        "مادة (1)\n"
        "يلتزم صاحب العمل بتوفير شروط السلامة كافة.\n"
        "مادة (2)\n"
        "يحظر تشغيل الأحداث في الأعمال الخطرة.\n"
    ),
    "lawB.txt": (
        "قانون رقم (2) لسنة 2021\n"
        "\n"
        "مادة (1)\n"
        "تسري أحكام هذا القانون على جميع العاملين.\n"
        "مادة (2)\n"
        "للعامل الحق في إجازة سنوية مدفوعة الأجر.\n"
        "مادة (3)\n"
        "تحتسب مدة الخدمة من تاريخ المباشرة.\n"
    ),
    "lawC.txt": (
        "ملاحظات عامة حول التشريعات.\n"
        "هذه الوثيقة لا تحتوي على مواد قانونية.\n"
    ),
}

# Articles that carry a number and a body, hence reach generation.
FIXTURE_GENERABLE_ARTICLES = 5


def build_fixture_corpus(root) -> None:
    root.mkdir(parents=True, exist_ok=True)
    for name, text in FIXTURE_LAWS.items():
        (root / name).write_text(text, encoding="utf-8")


def generation_responder(payload: dict) -> str:
    """Scripted provider: answer any generation prompt with one valid pair."""
    import re

    prompt = payload["messages"][0]["content"]
    m = re.match(r"^(.*) in Article (\d+)\.$", prompt.splitlines()[1])
    title, number = m.group(1), m.group(2)
    return json.dumps(
        {
            "question": f"ما الذي تنص عليه المادة {number} من {title}؟",
            "answer": (
                f"وفقاً للمادة {number} من {title}، "
                "يقرر النص المذكور الأحكام الواردة فيه بشكل ملزم."
            ),
        },
        ensure_ascii=False,
    )


@pytest.fixture
def api_key(monkeypatch):
    monkeypatch.setenv("LEXFORGE_API_KEY", "test-key")
    return "test-key"


def provider_for(server: MockChatServer, **overrides) -> ProviderConfig:
    """Config pointing at the mock; fast defaults unless a test overrides."""
    settings = {
        "base_url": server.base_url,
        "model_name": "mock-model",
        "max_concurrency": 4,
        "requests_per_second": 1000.0,
        "max_retries": 3,
        "temperature": 0.7,
    }
    settings.update(overrides)
    return ProviderConfig(**settings)
