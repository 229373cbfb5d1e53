"""Recommender adapters.

Every recommender, built in or external, answers a :class:`RecommendRequest`
with a :class:`Ranking`.  External recommenders speak one JSON object per
line, UTF-8::

    request   {"id": str, "context": [{"speaker": str, "text": str}, ...],
               "answer": str, "k": int}
    response  {"id": str, "items": [item id, ...]}

either over a child process's stdin/stdout or as the body of
``POST /recommend``.
"""
from __future__ import annotations

import json
import logging
import math
import queue
import re
import shlex
import subprocess
import threading
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .knowledge import KnowledgeBase, item_sort_key

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
DEFAULT_K = 50
DEFAULT_TIMEOUT = 30.0


class AdapterError(RuntimeError):
    """A single request failed; the harness records it and moves on."""


class ProtocolError(AdapterError):
    pass


class AdapterTimeout(AdapterError):
    pass


@dataclass
class RecommendRequest:
    instance_id: str
    context: list[dict]
    answer: str
    k_max: int = DEFAULT_K

    def to_wire(self) -> dict:
        return {"id": self.instance_id,
                "context": [{"speaker": t["speaker"], "text": t["text"]} for t in self.context],
                "answer": self.answer, "k": self.k_max}

    @classmethod
    def from_wire(cls, d: dict) -> "RecommendRequest":
        return cls(str(d["id"]), list(d.get("context", [])), d.get("answer", ""), int(d.get("k", DEFAULT_K)))


@dataclass
class Ranking:
    instance_id: str
    items: list[str] = field(default_factory=list)

    def to_wire(self) -> dict:
        return {"id": self.instance_id, "items": list(self.items)}


def validate_response(obj, request: RecommendRequest) -> Ranking:
    """Check a decoded response against the request; raises ProtocolError."""
    if not isinstance(obj, dict):
        raise ProtocolError("response is not a JSON object")
    if str(obj.get("id")) != request.instance_id:
        raise ProtocolError(f"response id {obj.get('id')!r} != request id {request.instance_id!r}")
    items = obj.get("items")
    if not isinstance(items, list) or not all(isinstance(i, (str, int)) and not isinstance(i, bool)
                                              for i in items):
        raise ProtocolError("items must be a list of item ids")
    items = [str(i) for i in items]
    if len(set(items)) != len(items):
        raise ProtocolError("ranking contains duplicate item ids")
    if len(items) > request.k_max:
        raise ProtocolError(f"ranking has {len(items)} items, more than k={request.k_max}")
    return Ranking(request.instance_id, items)


# -- builtin baseline ------------------------------------------------------------

STOPWORDS = frozenset(
    "a an the and or of in on at to for with from by is are was were be i you it my me "
    "s t this that de la le".split()
)
_DESIRE = r"(?:like|likes|liked|love|loves|loved|enjoy|enjoys|enjoyed|want|wants|wanted|prefer|prefers|preferred)"
_NEGATIVE_CUE = re.compile(
    r"(?:\b(?:do|does|did)\s+not|\b(?:don't|doesn't|didn't|dont|doesnt|didnt|never|not))"
    rf"\s+(?:\w+\s+)?{_DESIRE}\b"
    r"|\b(?:hat(?:e|es|ed|ing)|dislik(?:e|es|ed|ing)|detest\w*|loath(?:e|es|ed|ing)"
    r"|despis(?:e|es|ed|ing)|avoid\w*|refus(?:e|es|ed|ing)|reject\w*)\b"
)
_SENTENCE = re.compile(r"[^.!?\n]+")
TITLE_WEIGHT = 3
GENRE_WEIGHT = 1


def content_tokens(text: str) -> set[str]:
    return set(re.findall(r"[a-z0-9]+", text.lower())) - STOPWORDS


def _phrase_in(phrase: str, text: str) -> bool:
    return re.search(rf"(?<!\w){re.escape(phrase.lower())}(?!\w)", text) is not None


def disliked(text: str, kb: KnowledgeBase) -> tuple[set[str], set[str]]:
    """Genres and item ids that a negative cue points at within the same sentence."""
    text = text.lower().replace("’", "'")
    genres, items = set(), set()
    for sent in _SENTENCE.finditer(text):
        for cue in _NEGATIVE_CUE.finditer(sent.group()):
            rest = sent.group()[cue.end():]
            genres |= {g for g in kb.genres if _phrase_in(g, rest)}
            items |= {i for i, it in kb.items.items() if _phrase_in(it.title, rest)}
    return genres, items


def overlap_scores(request: RecommendRequest, kb: KnowledgeBase) -> dict[str, float]:
    text = "\n".join([*(t["text"] for t in request.context), request.answer])
    words = content_tokens(text)
    mentioned = kb.mentioned_genres(text)
    bad_genres, bad_items = disliked(text, kb)
    scores = {}
    for item_id, item in kb.items.items():
        if item_id in bad_items or bad_genres.intersection(item.genres):
            scores[item_id] = -math.inf
            continue
        title_hits = len(content_tokens(item.title) & words)
        genre_hits = len(mentioned.intersection(item.genres))
        scores[item_id] = TITLE_WEIGHT * title_hits + GENRE_WEIGHT * genre_hits
    return scores


def builtin_overlap(request: RecommendRequest, kb: KnowledgeBase) -> Ranking:
    """Deterministic lexical-overlap recommender over the knowledge base."""
    scores = overlap_scores(request, kb)
    order = sorted(scores, key=lambda i: (-scores[i], item_sort_key(i)))
    return Ranking(request.instance_id, order[: request.k_max])


class BuiltinAdapter:
    def __init__(self, kb: KnowledgeBase):
        self.kb = kb

    def recommend(self, request: RecommendRequest) -> Ranking:
        return builtin_overlap(request, self.kb)

    def close(self):
        pass


# -- subprocess ----------------------------------------------------------------------

class SubprocessAdapter:
    """Talks to one long-lived child process; restarted after any failure."""

    def __init__(self, command, timeout: float = DEFAULT_TIMEOUT):
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._proc = None
        self._lines: queue.Queue | None = None

    def _start(self):
        self._proc = subprocess.Popen(
            self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
            text=True, encoding="utf-8", bufsize=1,
        )
        self._lines = queue.Queue()
        proc, lines = self._proc, self._lines

        def pump():
            for line in proc.stdout:
                lines.put(line)
            lines.put(None)

        threading.Thread(target=pump, daemon=True).start()

    def close(self):
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=1)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def _kill(self):
        proc, self._proc = self._proc, None
        if proc is not None and proc.poll() is None:
            proc.kill()
            proc.wait()

    def query(self, request: RecommendRequest) -> Ranking:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._start()
            except OSError as exc:
                raise AdapterError(f"cannot start {self.argv!r}: {exc}") from None
        try:
            self._proc.stdin.write(json.dumps(request.to_wire(), ensure_ascii=False) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self._kill()
            raise AdapterError(f"adapter exited: {exc}") from None
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self._kill()
            raise AdapterTimeout(f"no response within {self.timeout}s") from None
        if line is None:
            self._kill()
            raise AdapterError("adapter exited before responding")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            self._kill()
            raise ProtocolError(f"malformed response line: {line[:80]!r}") from None
        try:
            return validate_response(obj, request)
        except ProtocolError:
            self._kill()
            raise

    recommend = query


def subprocess_query(request: RecommendRequest, command, timeout: float = DEFAULT_TIMEOUT) -> Ranking:
    """One-shot query against a freshly started child process."""
    adapter = SubprocessAdapter(command, timeout)
    try:
        return adapter.query(request)
    finally:
        adapter.close()


# -- HTTP --------------------------------------------------------------------------

def _endpoint(url: str) -> str:
    url = url.rstrip("/")
    return url if url.endswith("/recommend") else url + "/recommend"


def http_query(request: RecommendRequest, url: str, timeout: float = DEFAULT_TIMEOUT) -> Ranking:
    body = json.dumps(request.to_wire(), ensure_ascii=False).encode("utf-8")
    req = urllib.request.Request(_endpoint(url), data=body, method="POST",
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            payload = resp.read()
    except urllib.error.HTTPError as exc:
        raise AdapterError(f"HTTP {exc.code} from {url}") from None
    except TimeoutError:
        raise AdapterTimeout(f"no response within {timeout}s") from None
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, TimeoutError):
            raise AdapterTimeout(f"no response within {timeout}s") from None
        raise AdapterError(f"network error: {exc.reason}") from None
    except OSError as exc:
        raise AdapterError(f"network error: {exc}") from None
    try:
        obj = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise ProtocolError("malformed response body") from None
    return validate_response(obj, request)


class HttpAdapter:
    def __init__(self, url: str, timeout: float = DEFAULT_TIMEOUT):
        self.url = url
        self.timeout = timeout

    def recommend(self, request: RecommendRequest) -> Ranking:
        return http_query(request, self.url, self.timeout)

    def close(self):
        pass


# -- specs and the runner ---------------------------------------------------------------

def parse_adapter_spec(spec: str, kb: KnowledgeBase | None = None, timeout: float = DEFAULT_TIMEOUT):
    """``builtin`` | ``cmd:<command line>`` | ``http:<url>`` -> adapter factory."""
    spec = spec.strip()
    if spec == "builtin":
        if kb is None:
            raise ValueError("the builtin adapter needs a knowledge base")
        return lambda: BuiltinAdapter(kb)
    if spec.startswith("cmd:"):
        command = spec[4:].strip()
        if not command or not shlex.split(command):
            raise ValueError("empty adapter command")
        return lambda: SubprocessAdapter(command, timeout)
    if spec.startswith("http:"):
        url = spec[5:].strip()
        if url.startswith("//"):
            url = "http:" + url
        if not url.startswith(("http://", "https://")):
            raise ValueError(f"bad adapter url {url!r}")
        return lambda: HttpAdapter(url, timeout)
    raise ValueError(f"unrecognised adapter spec {spec!r}")


def run_requests(requests, factory, workers: int = 1) -> dict[str, Ranking | AdapterError]:
    """Answer every request; each worker thread owns one adapter instance.

    Results are keyed by instance id, so scheduling order never matters.
    """
    requests = list(requests)
    local = threading.local()
    created = []
    lock = threading.Lock()

    def adapter():
        if not hasattr(local, "adapter"):
            local.adapter = factory()
            with lock:
                created.append(local.adapter)
        return local.adapter

    def one(req):
        try:
            return req.instance_id, adapter().recommend(req)
        except AdapterError as exc:
            logger.warning("instance %s failed: %s", req.instance_id, exc)
            return req.instance_id, exc

    try:
        if workers <= 1:
            results = [one(r) for r in requests]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(one, requests))
    finally:
        for a in created:
            a.close()
    return dict(results)
