import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from crsadv.corpus import EvalInstance, Turn
from crsadv.knowledge import bundled_kb
from crsadv.lexicon import bundled_lexicon

FIXTURES = Path(__file__).parent / "fixtures"
DATA = Path(__file__).parents[1] / "src" / "crsadv" / "data"


def fixture_cmd(script, *args):
    parts = [sys.executable, str(FIXTURES / script), *args]
    return " ".join(f'"{p}"' for p in parts)


def make_instance(text, truth=("104",), titles=(), domain="movie", context_before=(),
                  dialogue_id="d1"):
    """Single-answer instance; ``titles`` are (title, item id) pairs found in ``text``."""
    mentions = []
    for title, item_id in titles:
        start = text.index(title)
        mentions.append((start, start + len(title), item_id))
    answer = Turn("seeker", text, [m[2] for m in mentions], [], mentions)
    context = [*context_before, answer]
    return EvalInstance(dialogue_id, len(context), context, answer, list(truth), domain)


@pytest.fixture(scope="session")
def kb():
    return bundled_kb()


@pytest.fixture(scope="session")
def lexicon():
    return bundled_lexicon()


class _StubHandler(BaseHTTPRequestHandler):
    mode = "ok"

    def log_message(self, *args):
        pass

    def do_POST(self):
        if self.path != "/recommend":
            self.send_error(404)
            return
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        mode = self.server.mode
        items = ["104", "101", "102"]
        if mode == "duplicate":
            items = ["101", "101"]
        elif mode == "slow":
            threading.Event().wait(2)
        elif mode == "error":
            self.send_error(500)
            return
        payload = json.dumps({"id": body["id"], "items": items[: body["k"]]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)


@pytest.fixture
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    server.mode = "ok"
    server.daemon_threads = True
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    server.url = f"http://127.0.0.1:{server.server_address[1]}"
    yield server
    server.shutdown()
    server.server_close()


# -- acceptance summary ------------------------------------------------------------------

ACCEPTANCE_RESULTS: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        name, ok, detail = ACCEPTANCE_RESULTS[n]
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {name}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
